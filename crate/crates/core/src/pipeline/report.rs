use std::fmt::Write as _;
use std::path::Path;

use super::{variant_table, PipelineError, SimResult};

/// `tick,scheme,bytes,transmissions`
pub fn format_bandwidth_csv(res: &SimResult) -> String {
    let mut out = String::from("tick,scheme,bytes,transmissions\n");
    for r in &res.bandwidth {
        writeln!(out, "{},{},{},{}", r.tick, r.scheme, r.bytes, r.transmissions).unwrap();
    }
    out
}

/// `tick,user,scheme_variant,fov_mse`
pub fn format_quality_csv(res: &SimResult) -> String {
    let mut out = String::from("tick,user,scheme_variant,fov_mse\n");
    for q in &res.quality {
        writeln!(out, "{},{},{},{:.6}", q.tick, res.users[q.user], q.variant, q.fov_mse).unwrap();
    }
    out
}

/// `tick,k,noise`
pub fn format_ticks_csv(res: &SimResult) -> String {
    let mut out = String::from("tick,k,noise\n");
    for t in &res.ticks {
        writeln!(out, "{},{},{}", t.tick, t.k, t.noise).unwrap();
    }
    out
}

pub fn format_summary(res: &SimResult) -> String {
    let mut out = String::new();
    let first = res.ticks.first().map_or(0, |t| t.tick);
    let last = res.ticks.last().map_or(0, |t| t.tick);
    writeln!(out, "users {}", res.users.len()).unwrap();
    writeln!(out, "ticks {} ({first}..={last})", res.ticks.len()).unwrap();
    writeln!(out, "seed {}", res.seed).unwrap();
    writeln!(out, "mean_k {:.6}", res.mean_k()).unwrap();
    writeln!(out, "mean_noise {:.6}", res.mean_noise()).unwrap();
    for (scheme, t) in &res.summary.totals {
        writeln!(out, "bytes {scheme} {} transmissions {}", t.bytes, t.transmissions).unwrap();
    }
    for (a, b, s) in res.summary.savings_table() {
        writeln!(out, "savings {a} vs {b} {:.6}", s).unwrap();
    }
    if let Ok(rows) = variant_table(res) {
        for (rule, m) in rows {
            writeln!(out, "fov_mse {rule} {m:.6}").unwrap();
        }
    }
    out
}

/// Writes `bandwidth.csv`, `quality.csv`, `ticks.csv` and `summary.txt`.
pub fn write_outputs(res: &SimResult, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
    let dir = dir.as_ref();
    let io = |e: std::io::Error| PipelineError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in [
        ("bandwidth.csv", format_bandwidth_csv(res)),
        ("quality.csv", format_quality_csv(res)),
        ("ticks.csv", format_ticks_csv(res)),
        ("summary.txt", format_summary(res)),
    ] {
        std::fs::write(dir.join(name), body).map_err(io)?;
    }
    Ok(())
}
