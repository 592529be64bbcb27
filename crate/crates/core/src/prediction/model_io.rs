//! Versioned text format for trained predictors. Floats are written with
//! Rust's shortest round-trip formatting, so `load ∘ save` is bit-exact.
//!
//! ```text
//! evas-gru 1
//! model yaw
//! history 30
//! hidden 64
//! norm <in_mean> <in_scale> <out_mean> <out_scale>
//! params <count>
//! <values, whitespace separated>
//! end
//! model pitch
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::gru::{param_count, GruModel, Normalization};
use super::linear::Angle;
use super::PredictionError;

const MAGIC: &str = "evas-gru 1";
/// Generous ceilings that keep a hostile file from requesting huge buffers.
const MAX_HIDDEN: usize = 1024;
const MAX_HISTORY: usize = 100_000;
const VALUES_PER_LINE: usize = 8;

pub fn encode_models(models: &[GruModel]) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    for m in models {
        writeln!(out, "model {}", m.angle).unwrap();
        writeln!(out, "history {}", m.history).unwrap();
        writeln!(out, "hidden {}", m.hidden).unwrap();
        let n = &m.norm;
        writeln!(out, "norm {:?} {:?} {:?} {:?}", n.in_mean, n.in_scale, n.out_mean, n.out_scale).unwrap();
        writeln!(out, "params {}", m.params().len()).unwrap();
        for chunk in m.params().chunks(VALUES_PER_LINE) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        writeln!(out, "end").unwrap();
    }
    out
}

struct Tokens<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Tokens<'a> {
    fn err(line: usize, msg: impl Into<String>) -> PredictionError {
        PredictionError::ModelFormat {
            line,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.lines.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), PredictionError> {
        let (n, line) = self.next_line().ok_or_else(|| Self::err(0, format!("unexpected end of file, expected {key:?}")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Self::err(n, format!("expected {key:?}, got {line:?}")));
        }
        Ok((n, parts.collect()))
    }

    fn usize_field(&mut self, key: &str, max: usize) -> Result<usize, PredictionError> {
        let (n, rest) = self.keyed(key)?;
        match rest.as_slice() {
            [v] => {
                let v: usize = v.parse().map_err(|_| Self::err(n, format!("{key} {v:?} is not an integer")))?;
                if v > max {
                    return Err(Self::err(n, format!("{key} {v} exceeds {max}")));
                }
                Ok(v)
            }
            _ => Err(Self::err(n, format!("{key} takes one value"))),
        }
    }
}

fn parse_f64(line: usize, s: &str) -> Result<f64, PredictionError> {
    let v: f64 = s.parse().map_err(|_| Tokens::err(line, format!("{s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Tokens::err(line, format!("{s:?} is not finite")));
    }
    Ok(v)
}

pub fn decode_models(text: &str) -> Result<Vec<GruModel>, PredictionError> {
    let mut tk = Tokens {
        lines: text.lines().enumerate().peekable(),
    };
    match tk.next_line() {
        Some((_, MAGIC)) => {}
        Some((n, other)) => return Err(Tokens::err(n, format!("expected {MAGIC:?}, got {other:?}"))),
        None => return Err(Tokens::err(0, "empty model file")),
    }
    let mut models = Vec::new();
    while tk.lines.peek().is_some() {
        if tk.lines.peek().is_some_and(|(_, l)| l.trim().is_empty()) {
            tk.lines.next();
            continue;
        }
        let (n, rest) = tk.keyed("model")?;
        let angle = match rest.as_slice() {
            ["yaw"] => Angle::Yaw,
            ["pitch"] => Angle::Pitch,
            ["roll"] => Angle::Roll,
            _ => return Err(Tokens::err(n, format!("unknown model angle {rest:?}"))),
        };
        let history = tk.usize_field("history", MAX_HISTORY)?;
        let hidden = tk.usize_field("hidden", MAX_HIDDEN)?;
        let (n, rest) = tk.keyed("norm")?;
        let vals = match rest.as_slice() {
            [a, b, c, d] => [parse_f64(n, a)?, parse_f64(n, b)?, parse_f64(n, c)?, parse_f64(n, d)?],
            _ => return Err(Tokens::err(n, "norm takes four values")),
        };
        let norm = Normalization {
            in_mean: vals[0],
            in_scale: vals[1],
            out_mean: vals[2],
            out_scale: vals[3],
        };
        let count = tk.usize_field("params", param_count(MAX_HIDDEN))?;
        if hidden == 0 || count != param_count(hidden) {
            return Err(Tokens::err(n, format!("hidden {hidden} needs {} parameters, file declares {count}", param_count(hidden.max(1)))));
        }
        let mut params = Vec::with_capacity(count);
        let end_line = loop {
            let (n, line) = tk.next_line().ok_or_else(|| Tokens::err(0, "unexpected end of file in params"))?;
            if line == "end" {
                break n;
            }
            for tok in line.split_whitespace() {
                params.push(parse_f64(n, tok)?);
                if params.len() > count {
                    return Err(Tokens::err(n, format!("more than {count} parameters")));
                }
            }
        };
        if params.len() != count {
            return Err(Tokens::err(end_line, format!("expected {count} parameters, found {}", params.len())));
        }
        models.push(GruModel::from_parts(angle, history, hidden, norm, params).map_err(|e| Tokens::err(end_line, e.to_string()))?);
    }
    if models.is_empty() {
        return Err(Tokens::err(0, "no models in file"));
    }
    Ok(models)
}

pub fn save_models(path: impl AsRef<Path>, models: &[GruModel]) -> Result<(), PredictionError> {
    let path = path.as_ref();
    std::fs::write(path, encode_models(models)).map_err(|e| PredictionError::Io(format!("{}: {e}", path.display())))
}

pub fn load_models(path: impl AsRef<Path>) -> Result<Vec<GruModel>, PredictionError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PredictionError::Io(format!("{}: {e}", path.display())))?;
    decode_models(&text).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_models() -> Vec<GruModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        Angle::ALL
            .iter()
            .map(|&a| {
                let mut m = GruModel::random(a, 7, 3, &mut rng);
                m.norm = Normalization {
                    in_mean: 0.1 / 3.0,
                    in_scale: std::f64::consts::PI,
                    out_mean: -1e-300,
                    out_scale: 1.0 + f64::EPSILON,
                };
                m
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let models = sample_models();
        let back = decode_models(&encode_models(&models)).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in models.iter().zip(&back) {
            assert_eq!(a.angle, b.angle);
            assert_eq!(a.norm, b.norm);
            let bits = |m: &GruModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(encode_models(&back), encode_models(&models));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gru");
        save_models(&path, &sample_models()).unwrap();
        assert_eq!(load_models(&path).unwrap(), sample_models());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let good = encode_models(&sample_models()[..1]);
        let cases = [
            String::new(),
            "evas-gru 2\n".to_string(),
            MAGIC.to_string(),
            good.replace("hidden 3", "hidden 4"),
            good.replace(&format!("params {}", param_count(3)), "params 120"),
            good.replace("model yaw", "model tilt"),
            good.replacen("end", "", 1),
            good.replace("norm ", "norm 1 "),
            good.replace(&format!("norm {:?}", 0.1 / 3.0), "norm NaN"),
            good.replace("hidden 3", "hidden 99999999999"),
        ];
        for c in &cases {
            assert!(decode_models(c).is_err(), "{c:?}");
        }
    }
}
