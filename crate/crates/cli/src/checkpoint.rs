//! Text checkpoint of a trained model and its score head.
//!
//! ```text
//! denoise-checkpoint 1
//! tau_exp <f64>
//! matrix encoder.0 <rows> <cols>
//! <cols f64 per line, rows lines>
//! ...                                  (encoder.1.., decoder.0..3)
//! normalizer variance|stddev
//! matrix head.w1 ...                   (head.b1, head.w2, head.b2)
//! stats mean <4 f64>
//! stats var <4 f64>
//! end
//! ```
//!
//! Every `f64` is written as the 16-digit hex of its IEEE-754 bits, so a
//! save/load round trip is exact. The `stats` lines are absent for a head
//! that was never fitted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use denoise_core::model::{DecoderParams, EncoderParams, GraphAutoencoder};
use denoise_core::scorer::{AggStats, Mlp, Normalizer, ScoreHead, AGG_DIM};
use denoise_core::Matrix;

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "denoise-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: GraphAutoencoder,
    pub head: ScoreHead,
    pub tau_exp: f64,
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn write_matrix(out: &mut String, name: &str, m: &Matrix) {
    writeln!(out, "matrix {name} {} {}", m.rows(), m.cols()).unwrap();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| hex(v)).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

pub fn to_text(ck: &Checkpoint) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(out, "tau_exp {}", hex(ck.tau_exp)).unwrap();
    for (i, w) in ck.model.encoder.weights.iter().enumerate() {
        write_matrix(&mut out, &format!("encoder.{i}"), w);
    }
    for (i, w) in ck.model.decoder.weights.iter().enumerate() {
        write_matrix(&mut out, &format!("decoder.{i}"), w);
    }
    let normalizer = match ck.head.normalizer {
        Normalizer::Variance => "variance",
        Normalizer::StdDev => "stddev",
    };
    writeln!(out, "normalizer {normalizer}").unwrap();
    let mlp = &ck.head.mlp;
    for (name, m) in [("head.w1", &mlp.w1), ("head.b1", &mlp.b1), ("head.w2", &mlp.w2), ("head.b2", &mlp.b2)] {
        write_matrix(&mut out, name, m);
    }
    if let Some(stats) = &ck.head.stats {
        for (name, v) in [("mean", &stats.mean), ("var", &stats.var)] {
            let vals: Vec<String> = v.iter().map(|&x| hex(x)).collect();
            writeln!(out, "stats {name} {}", vals.join(" ")).unwrap();
        }
    }
    writeln!(out, "end").unwrap();
    out
}

pub fn save(ck: &Checkpoint, path: &Path) -> Result<(), CliError> {
    fs::write(path, to_text(ck)).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Checkpoint, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_text(&text).map_err(|(line, msg)| CliError::Checkpoint {
        path: path.to_path_buf(),
        line,
        msg,
    })
}

type ParseResult<T> = Result<T, (usize, String)>;

struct Reader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> ParseResult<Vec<&'a str>> {
        match self.lines.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l.split_whitespace().collect())
            }
            None => Err((self.last + 1, "unexpected end of file".into())),
        }
    }

    fn peek_is(&mut self, word: &str) -> bool {
        self.lines.peek().is_some_and(|(_, l)| l.split_whitespace().next() == Some(word))
    }

    fn fail<T>(&self, msg: impl Into<String>) -> ParseResult<T> {
        Err((self.last, msg.into()))
    }

    fn float(&self, s: &str) -> ParseResult<f64> {
        if s.len() != 16 {
            return self.fail(format!("bad value {s:?}"));
        }
        u64::from_str_radix(s, 16)
            .map(f64::from_bits)
            .or_else(|_| self.fail(format!("bad value {s:?}")))
    }

    fn matrix(&mut self, name: &str) -> ParseResult<Matrix> {
        let head = self.next()?;
        let (rows, cols) = match head.as_slice() {
            ["matrix", n, r, c] if *n == name => match (r.parse::<usize>(), c.parse::<usize>()) {
                (Ok(r), Ok(c)) => (r, c),
                _ => return self.fail("bad matrix shape"),
            },
            _ => return self.fail(format!("expected matrix {name}")),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let fields = self.next()?;
            if fields.len() != cols {
                return self.fail(format!("expected {cols} values"));
            }
            for f in fields {
                data.push(self.float(f)?);
            }
        }
        Matrix::from_vec(rows, cols, data).or_else(|e| self.fail(e.to_string()))
    }

    fn stats(&mut self, name: &str) -> ParseResult<[f64; AGG_DIM]> {
        let fields = self.next()?;
        match fields.as_slice() {
            ["stats", n, rest @ ..] if *n == name && rest.len() == AGG_DIM => {
                let mut out = [0.0; AGG_DIM];
                for (o, f) in out.iter_mut().zip(rest) {
                    *o = self.float(f)?;
                }
                Ok(out)
            }
            _ => self.fail(format!("expected stats {name}")),
        }
    }
}

pub fn from_text(text: &str) -> ParseResult<Checkpoint> {
    let mut r = Reader {
        lines: text.lines().enumerate().peekable(),
        last: 0,
    };
    match r.next()?.as_slice() {
        [MAGIC, v] if *v == FORMAT_VERSION.to_string() => {}
        [MAGIC, v] => return r.fail(format!("unsupported format version {v}")),
        _ => return r.fail("not a checkpoint file"),
    }
    let tau_exp = match r.next()?.as_slice() {
        ["tau_exp", v] => r.float(v)?,
        _ => return r.fail("expected tau_exp"),
    };
    let mut enc = Vec::new();
    while r.peek_is("matrix") && r.lines.peek().is_some_and(|(_, l)| l.contains("encoder.")) {
        enc.push(r.matrix(&format!("encoder.{}", enc.len()))?);
    }
    let mut dec = Vec::new();
    for i in 0..4 {
        dec.push(r.matrix(&format!("decoder.{i}"))?);
    }
    let model = GraphAutoencoder::from_parts(EncoderParams { weights: enc }, DecoderParams { weights: dec })
        .or_else(|e| r.fail(e.to_string()))?;
    let normalizer = match r.next()?.as_slice() {
        ["normalizer", "variance"] => Normalizer::Variance,
        ["normalizer", "stddev"] => Normalizer::StdDev,
        _ => return r.fail("expected normalizer"),
    };
    let mlp = Mlp {
        w1: r.matrix("head.w1")?,
        b1: r.matrix("head.b1")?,
        w2: r.matrix("head.w2")?,
        b2: r.matrix("head.b2")?,
    };
    let h = mlp.w1.cols();
    if mlp.w1.shape() != (AGG_DIM, h) || mlp.b1.shape() != (1, h) || mlp.w2.shape() != (h, AGG_DIM) || mlp.b2.shape() != (1, AGG_DIM) {
        return r.fail("score head shapes are inconsistent");
    }
    let stats = if r.peek_is("stats") {
        Some(AggStats {
            mean: r.stats("mean")?,
            var: r.stats("var")?,
        })
    } else {
        None
    };
    match r.next()?.as_slice() {
        ["end"] => {}
        _ => return r.fail("expected end"),
    }
    Ok(Checkpoint {
        model,
        head: ScoreHead::new(mlp, stats, normalizer),
        tau_exp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use denoise_core::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ModelConfig {
            attr_dim: 3,
            hidden: 5,
            layers: 3,
        };
        let model = GraphAutoencoder::init(cfg, &mut rng).unwrap();
        let mut mlp = Mlp::init(6, &mut rng);
        mlp.b1.as_mut_slice()[2] = -0.0;
        mlp.b2.as_mut_slice()[0] = 1e-310;
        let stats = AggStats {
            mean: [0.1, 0.2, f64::MIN_POSITIVE, 3.0],
            var: [1e-8, 2.0, 0.5, 1.0 / 3.0],
        };
        Checkpoint {
            model,
            head: ScoreHead::new(mlp, Some(stats), Normalizer::StdDev),
            tau_exp: -1.0,
        }
    }

    fn bits(m: &Matrix) -> Vec<u64> {
        m.as_slice().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = from_text(&to_text(&ck)).unwrap();
        assert_eq!(back, ck);
        assert_eq!(bits(&back.head.mlp.b1), bits(&ck.head.mlp.b1));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.txt");
        save(&ck, &path).unwrap();
        assert_eq!(load(&path).unwrap(), ck);
        assert_eq!(to_text(&load(&path).unwrap()), to_text(&ck));
    }

    #[test]
    fn unfitted_head_round_trips() {
        let mut ck = sample();
        ck.head.stats = None;
        assert_eq!(from_text(&to_text(&ck)).unwrap(), ck);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let text = to_text(&sample());
        assert!(from_text("").is_err());
        assert!(from_text(&text.replace("denoise-checkpoint 1", "denoise-checkpoint 9")).is_err());
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(from_text(&truncated).is_err());
        let (line, _) = from_text(&text.replacen("matrix decoder.1", "matrix decoder.7", 1)).unwrap_err();
        assert!(line > 1);
    }
}
