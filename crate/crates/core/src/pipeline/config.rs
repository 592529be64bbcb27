//! Line-oriented `key = value` simulation config. `#` starts a comment;
//! relative paths resolve against the config file's directory.
//!
//! ```text
//! frames_dir  = frames
//! traces      = traces/u0.csv, traces/u1.csv
//! trace_cols  = t,yaw,pitch,roll
//! tick_rate   = 10
//! history     = 10
//! horizon     = 1.0
//! predictor   = lr            # oracle | hold | lr | gru
//! model       = model.gru     # required for gru
//! eps         = 0.15
//! min_pts     = 2
//! omega       = 0.8
//! schemes     = evas, evas_unicast, nonviewport, twolayer
//! variants    = joint, position, multicast
//! sampling    = bilinear
//! output_dir  = out
//! seed        = 7
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{GroupingRule, PipelineError, PredictorKind, SimConfig};
use crate::metrics::Scheme;
use crate::prediction::TraceFormat;

fn err(line: usize, msg: impl Into<String>) -> PipelineError {
    PipelineError::Config { line, msg: msg.into() }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, PipelineError> {
    v.parse().map_err(|_| err(line, format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, PipelineError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(line, format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses config text; `base` anchors relative paths.
pub fn parse_sim_config(text: &str, base: &Path) -> Result<SimConfig, PipelineError> {
    let mut cfg = SimConfig::default();
    let mut seen = BTreeSet::new();
    let (mut frames_dir, mut cols, mut degrees, mut model) = (None, None, false, None);
    let mut predictor = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(n, format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(n, format!("duplicate key {key:?}")));
        }
        match key {
            "frames_dir" => frames_dir = Some(resolve(base, value)),
            "traces" => cfg.traces = list(value).map(|p| resolve(base, p)).collect(),
            "trace_cols" => cols = Some(value.to_string()),
            "trace_degrees" => degrees = parse_bool(n, key, value)?,
            "tick_rate" => cfg.tick_rate = parse_num(n, key, value)?,
            "history" => cfg.prediction.history = parse_num(n, key, value)?,
            "horizon" => cfg.prediction.horizon = parse_num(n, key, value)?,
            "threshold" => cfg.prediction.accuracy_threshold = parse_num(n, key, value)?,
            "predictor" => predictor = Some((n, value.to_string())),
            "model" => model = Some(resolve(base, value)),
            "eps" => cfg.clustering.eps = parse_num(n, key, value)?,
            "min_pts" => cfg.clustering.min_pts = parse_num(n, key, value)?,
            "omega" => cfg.clustering.omega = parse_num(n, key, value)?,
            "schemes" => {
                cfg.schemes = list(value).map(|s| s.parse::<Scheme>().map_err(|e| err(n, e))).collect::<Result<_, _>>()?;
            }
            "variants" => {
                cfg.variants = list(value).map(|s| s.parse::<GroupingRule>().map_err(|e| err(n, e))).collect::<Result<_, _>>()?;
            }
            "sampling" => cfg.sampling = value.parse().map_err(|e: String| err(n, e))?,
            "output_dir" => cfg.output_dir = resolve(base, value),
            "seed" => cfg.seed = parse_num(n, key, value)?,
            "encoded_sizes" => cfg.encoded_sizes = Some(resolve(base, value)),
            "max_ticks" => cfg.max_ticks = Some(parse_num(n, key, value)?),
            "score_quality" => cfg.score_quality = parse_bool(n, key, value)?,
            other => return Err(err(n, format!("unknown key {other:?}"))),
        }
    }
    cfg.frames_dir = frames_dir.ok_or_else(|| err(0, "missing frames_dir"))?;
    if let Some(c) = cols {
        cfg.trace_format = TraceFormat::parse(&c, degrees).map_err(|e| err(0, e.to_string()))?;
    } else {
        cfg.trace_format.degrees = degrees;
    }
    cfg.predictor = match predictor {
        None => PredictorKind::Linear,
        Some((n, p)) => match p.as_str() {
            "oracle" => PredictorKind::Oracle,
            "hold" => PredictorKind::Hold,
            "lr" => PredictorKind::Linear,
            "gru" => PredictorKind::Gru(model.clone().ok_or_else(|| err(n, "predictor gru needs a model path"))?),
            other => return Err(err(n, format!("unknown predictor {other:?}"))),
        },
    };
    cfg.prediction.sample_rate = cfg.tick_rate;
    cfg.clustering.motion_dt = 1.0 / cfg.tick_rate;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sim_config(path: impl AsRef<Path>) -> Result<SimConfig, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_sim_config(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sampling;

    const DEMO: &str = "\
# demo
frames_dir = frames
traces = a.csv, /abs/b.csv
trace_cols = t,_,yaw,pitch,roll
trace_degrees = true
tick_rate = 10
history = 5
horizon = 0.5
predictor = hold
eps = 0.2
min_pts = 3
omega = 1
schemes = evas, twolayer
variants = joint, multicast
sampling = nearest   # exact
output_dir = out
seed = 9
max_ticks = 4
";

    #[test]
    fn parses_every_key() {
        let c = parse_sim_config(DEMO, Path::new("/cfg")).unwrap();
        assert_eq!(c.frames_dir, PathBuf::from("/cfg/frames"));
        assert_eq!(c.traces, vec![PathBuf::from("/cfg/a.csv"), PathBuf::from("/abs/b.csv")]);
        assert!(c.trace_format.degrees);
        assert_eq!(c.tick_rate, 10.0);
        assert_eq!(c.prediction.sample_rate, 10.0);
        assert_eq!((c.prediction.history, c.prediction.horizon), (5, 0.5));
        assert_eq!(c.predictor, PredictorKind::Hold);
        assert_eq!((c.clustering.eps, c.clustering.min_pts, c.clustering.omega), (0.2, 3, 1.0));
        assert_eq!(c.clustering.motion_dt, 0.1);
        assert_eq!(c.schemes, vec![Scheme::Evas, Scheme::TwoLayer]);
        assert_eq!(c.variants, vec![GroupingRule::Joint, GroupingRule::Multicast]);
        assert_eq!(c.sampling, Sampling::Nearest);
        assert_eq!(c.output_dir, PathBuf::from("/cfg/out"));
        assert_eq!((c.seed, c.max_ticks), (9, Some(4)));
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("frames_dir = f\ntraces = a\nbogus = 1\n", 3),
            ("frames_dir = f\ntraces = a\ntick_rate = fast\n", 3),
            ("frames_dir = f\ntraces = a\nseed = 1\nseed = 2\n", 4),
            ("frames_dir = f\nno equals sign\n", 2),
            ("frames_dir = f\ntraces = a\npredictor = gru\n", 3),
            ("frames_dir = f\ntraces = a\nschemes = evas, multicast\n", 3),
        ];
        for (text, line) in cases {
            match parse_sim_config(text, Path::new(".")) {
                Err(PipelineError::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_validation() {
        for text in [
            "traces = a\n",
            "frames_dir = f\n",
            "frames_dir = f\ntraces = a\ntick_rate = 0\n",
            "frames_dir = f\ntraces = a\nschemes = \n",
            "frames_dir = f\ntraces = a\nhistory = 1\n",
            "frames_dir = f\ntraces = a\nomega = 2\n",
        ] {
            assert!(parse_sim_config(text, Path::new(".")).is_err(), "{text:?}");
        }
    }
}
