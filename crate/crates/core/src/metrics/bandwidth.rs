use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    /// Clustered multicast of per-group VBM frames, unicast VBM for noise users.
    Evas,
    /// One VBM per user, no grouping.
    EvasUnicast,
    /// Full frame per user.
    NonViewport,
    /// Full-view base layer plus FOV enhancement layer per user.
    TwoLayer,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Evas, Scheme::EvasUnicast, Scheme::NonViewport, Scheme::TwoLayer];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Evas => "evas",
            Scheme::EvasUnicast => "evas_unicast",
            Scheme::NonViewport => "nonviewport",
            Scheme::TwoLayer => "twolayer",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| format!("unknown scheme {s:?}"))
    }
}

/// Transmission cost of one scheme for one tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandwidthRecord {
    pub scheme: Scheme,
    pub tick: usize,
    pub bytes: u64,
    pub recipients: usize,
    pub transmissions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemeTotals {
    pub bytes: u64,
    pub transmissions: u64,
    pub recipients: u64,
    pub ticks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRow {
    pub tick: usize,
    pub bytes: BTreeMap<Scheme, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSummary {
    pub totals: BTreeMap<Scheme, SchemeTotals>,
    pub per_tick: Vec<TickRow>,
}

impl BandwidthSummary {
    /// `1 − bytes(a)/bytes(b)`; `None` if either scheme is missing or `b`
    /// sent nothing.
    pub fn savings(&self, a: Scheme, b: Scheme) -> Option<f64> {
        let (ta, tb) = (self.totals.get(&a)?, self.totals.get(&b)?);
        (tb.bytes > 0).then(|| 1.0 - ta.bytes as f64 / tb.bytes as f64)
    }

    /// Savings for every ordered pair of distinct schemes present.
    pub fn savings_table(&self) -> Vec<(Scheme, Scheme, f64)> {
        let mut out = Vec::new();
        for &a in self.totals.keys() {
            for &b in self.totals.keys() {
                if a != b {
                    if let Some(s) = self.savings(a, b) {
                        out.push((a, b, s));
                    }
                }
            }
        }
        out
    }
}

/// Aggregates records per scheme and per tick. Every scheme must cover the
/// same set of ticks.
pub fn bandwidth_summary(records: &[BandwidthRecord]) -> Result<BandwidthSummary, MetricsError> {
    let mut ticks_by_scheme: BTreeMap<Scheme, BTreeSet<usize>> = BTreeMap::new();
    let mut totals: BTreeMap<Scheme, SchemeTotals> = BTreeMap::new();
    let mut per_tick: BTreeMap<usize, BTreeMap<Scheme, u64>> = BTreeMap::new();
    for r in records {
        ticks_by_scheme.entry(r.scheme).or_default().insert(r.tick);
        let t = totals.entry(r.scheme).or_default();
        t.bytes += r.bytes;
        t.transmissions += r.transmissions as u64;
        t.recipients += r.recipients as u64;
        *per_tick.entry(r.tick).or_default().entry(r.scheme).or_default() += r.bytes;
    }
    let all: BTreeSet<usize> = per_tick.keys().copied().collect();
    for (scheme, ticks) in &ticks_by_scheme {
        if *ticks != all {
            return Err(MetricsError::TickCoverage {
                scheme: *scheme,
                expected: all.into_iter().collect(),
                found: ticks.iter().copied().collect(),
            });
        }
        totals.get_mut(scheme).expect("scheme seen").ticks = ticks.len();
    }
    Ok(BandwidthSummary {
        totals,
        per_tick: per_tick.into_iter().map(|(tick, bytes)| TickRow { tick, bytes }).collect(),
    })
}

/// Encoded frame sizes keyed by frame id, overriding the raw-pixel proxy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodedSizes(pub HashMap<String, u64>);

impl EncodedSizes {
    pub fn get(&self, frame_id: &str) -> Option<u64> {
        self.0.get(frame_id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Parses the `frame_id,bytes` table. The header line is mandatory; blank
/// lines are skipped; a repeated frame id is an error.
pub fn parse_encoded_sizes(text: &str) -> Result<EncodedSizes, MetricsError> {
    let err = |line: usize, msg: String| MetricsError::EncodedSizes { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, "frame_id,bytes")) => {}
        Some((n, other)) => return Err(err(n, format!("expected header \"frame_id,bytes\", got {other:?}"))),
        None => return Err(err(1, "missing header".into())),
    }
    let mut map = HashMap::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (id, bytes) = line
            .split_once(',')
            .ok_or_else(|| err(n, "expected two comma-separated fields".into()))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(err(n, "empty frame id".into()));
        }
        let bytes: u64 = bytes
            .trim()
            .parse()
            .map_err(|_| err(n, format!("byte count {:?} is not a non-negative integer", bytes.trim())))?;
        if map.insert(id.to_string(), bytes).is_some() {
            return Err(err(n, format!("duplicate frame id {id:?}")));
        }
    }
    Ok(EncodedSizes(map))
}
