//! Aggregated reconstruction-error vectors and the scoring head.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{row_std, AdamConfig, AdamState, Tape};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::losses::{feature_loss, structure_loss, ReconErrors};
use crate::matrix::Matrix;
use crate::model::GraphAutoencoder;
use crate::EPS;

pub const AGG_DIM: usize = 4;

/// `(mean feature error, mean structure error, std feature error, std
/// structure error)` over a graph's nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggErrorVector(pub [f64; AGG_DIM]);

/// Per-node reconstruction errors of `g` on its clean adjacency.
pub fn recon_errors(model: &GraphAutoencoder, g: &Graph, tau_exp: f64) -> Result<ReconErrors> {
    if g.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let rec = model.reconstruct(g)?;
    let mut tape = Tape::new();
    let x = tape.constant(g.attrs().clone())?;
    let x_hat = tape.constant(rec.x_hat)?;
    let a_hat = tape.constant(rec.a_hat)?;
    let lf = feature_loss(&mut tape, x, x_hat)?;
    let ls = structure_loss(&mut tape, &g.adjacency(), a_hat, tau_exp)?;
    Ok(ReconErrors {
        feature_per_node: tape.value(lf.per_node).as_slice().to_vec(),
        structure_per_node: tape.value(ls.per_node).as_slice().to_vec(),
        feature_total: tape.value(lf.total).item(),
        structure_total: tape.value(ls.total).item(),
    })
}

impl AggErrorVector {
    pub fn from_errors(errors: &ReconErrors) -> Self {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        AggErrorVector([
            mean(&errors.feature_per_node),
            mean(&errors.structure_per_node),
            row_std(&errors.feature_per_node),
            row_std(&errors.structure_per_node),
        ])
    }
}

pub fn agg_error_vector(model: &GraphAutoencoder, g: &Graph, tau_exp: f64) -> Result<AggErrorVector> {
    Ok(AggErrorVector::from_errors(&recon_errors(model, g, tau_exp)?))
}

/// Two-layer ReLU perceptron `4 -> hidden -> 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let mut glorot = |r: usize, c: usize| {
            let bound = libm::sqrt(6.0 / (r + c) as f64);
            let mut m = Matrix::zeros(r, c);
            m.as_mut_slice().iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
            m
        };
        Mlp {
            w1: glorot(AGG_DIM, hidden),
            b1: Matrix::zeros(1, hidden),
            w2: glorot(hidden, AGG_DIM),
            b2: Matrix::zeros(1, AGG_DIM),
        }
    }

    /// Exact identity through `x = relu(x) - relu(-x)`; needs 8 hidden units.
    pub fn identity(hidden: usize) -> Result<Self> {
        if hidden < 2 * AGG_DIM {
            return Err(Error::InvalidConfig("identity map needs at least 8 hidden units"));
        }
        let mut w1 = Matrix::zeros(AGG_DIM, hidden);
        let mut w2 = Matrix::zeros(hidden, AGG_DIM);
        for j in 0..AGG_DIM {
            w1[(j, j)] = 1.0;
            w1[(j, AGG_DIM + j)] = -1.0;
            w2[(j, j)] = 1.0;
            w2[(AGG_DIM + j, j)] = -1.0;
        }
        Ok(Mlp {
            w1,
            b1: Matrix::zeros(1, hidden),
            w2,
            b2: Matrix::zeros(1, AGG_DIM),
        })
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    fn params(&self) -> [Matrix; 4] {
        [self.w1.clone(), self.b1.clone(), self.w2.clone(), self.b2.clone()]
    }

    /// Turns a map `g` on standardized coordinates into the raw-space map
    /// `v -> mean + scale * g((v - mean) / scale)`.
    pub fn unstandardize(&self, stats: &AggStats) -> Mlp {
        let s = stats.scale();
        let mut w1 = self.w1.clone();
        let mut b1 = self.b1.clone();
        for j in 0..AGG_DIM {
            for k in 0..self.hidden() {
                w1[(j, k)] = self.w1[(j, k)] / s[j];
                b1[(0, k)] -= stats.mean[j] * w1[(j, k)];
            }
        }
        let mut w2 = self.w2.clone();
        let mut b2 = self.b2.clone();
        for j in 0..AGG_DIM {
            for k in 0..self.hidden() {
                w2[(k, j)] *= s[j];
            }
            b2[(0, j)] = s[j] * self.b2[(0, j)] + stats.mean[j];
        }
        Mlp { w1, b1, w2, b2 }
    }

    pub fn forward(&self, v: &[f64; AGG_DIM]) -> [f64; AGG_DIM] {
        let h: Vec<f64> = (0..self.hidden())
            .map(|k| {
                let s: f64 = (0..AGG_DIM).map(|j| v[j] * self.w1[(j, k)]).sum::<f64>() + self.b1[(0, k)];
                s.max(0.0)
            })
            .collect();
        let mut out = [0.0; AGG_DIM];
        for (j, o) in out.iter_mut().enumerate() {
            *o = h.iter().enumerate().map(|(k, hv)| hv * self.w2[(k, j)]).sum::<f64>() + self.b2[(0, j)];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalizer {
    #[default]
    Variance,
    StdDev,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub hidden: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub normalizer: Normalizer,
    /// Train on standardized vectors, then fold the scaling into the
    /// weights so the head still maps raw vectors to raw vectors.
    pub standardize: bool,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            hidden: 16,
            steps: 500,
            lr: 1e-3,
            seed: 0,
            normalizer: Normalizer::Variance,
            standardize: true,
        }
    }
}

/// Per-dimension training mean and population variance (floored at `EPS`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggStats {
    pub mean: [f64; AGG_DIM],
    pub var: [f64; AGG_DIM],
}

impl AggStats {
    pub fn fit(vectors: &[AggErrorVector]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::TooFewVectors(vectors.len()));
        }
        let n = vectors.len() as f64;
        let mut mean = [0.0; AGG_DIM];
        for v in vectors {
            for j in 0..AGG_DIM {
                mean[j] += v.0[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; AGG_DIM];
        for v in vectors {
            for j in 0..AGG_DIM {
                var[j] += (v.0[j] - mean[j]) * (v.0[j] - mean[j]);
            }
        }
        var.iter_mut().for_each(|s| *s = (*s / n).max(EPS));
        Ok(AggStats { mean, var })
    }

    pub fn scale(&self) -> [f64; AGG_DIM] {
        self.var.map(libm::sqrt)
    }

    pub fn standardize(&self, v: &[f64; AGG_DIM]) -> [f64; AGG_DIM] {
        let s = self.scale();
        core::array::from_fn(|j| (v[j] - self.mean[j]) / s[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHead {
    pub mlp: Mlp,
    pub stats: Option<AggStats>,
    pub normalizer: Normalizer,
}

impl ScoreHead {
    pub fn new(mlp: Mlp, stats: Option<AggStats>, normalizer: Normalizer) -> Self {
        ScoreHead {
            mlp,
            stats,
            normalizer,
        }
    }
}

/// Mean squared reconstruction error of the MLP over `vectors`.
pub fn head_loss(mlp: &Mlp, vectors: &[AggErrorVector]) -> f64 {
    let total: f64 = vectors
        .iter()
        .map(|v| {
            let out = mlp.forward(&v.0);
            out.iter().zip(&v.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    total / (vectors.len() * AGG_DIM) as f64
}

/// Fits the normalization statistics and trains the MLP to reconstruct
/// the training vectors by full-batch Adam on squared error.
pub fn fit_score_head(vectors: &[AggErrorVector], cfg: &HeadConfig) -> Result<ScoreHead> {
    let stats = AggStats::fit(vectors)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mlp = Mlp::init(cfg.hidden, &mut rng);
    let rows: Vec<[f64; AGG_DIM]> = vectors
        .iter()
        .map(|v| if cfg.standardize { stats.standardize(&v.0) } else { v.0 })
        .collect();
    let targets = Matrix::from_rows(&rows)?;

    let mut params = mlp.params();
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut opt = AdamState::new(adam, &params);
    for _ in 0..cfg.steps {
        let mut tape = Tape::new();
        let vars = [
            tape.param(params[0].clone())?,
            tape.param(params[1].clone())?,
            tape.param(params[2].clone())?,
            tape.param(params[3].clone())?,
        ];
        let z = tape.constant(targets.clone())?;
        let h = tape.matmul(z, vars[0])?;
        let h = tape.add_row(h, vars[1])?;
        let h = tape.relu(h)?;
        let out = tape.matmul(h, vars[2])?;
        let out = tape.add_row(out, vars[3])?;
        let diff = tape.sub(out, z)?;
        let sq = tape.mul(diff, diff)?;
        let loss = tape.mean(sq)?;
        tape.backward(loss)?;
        let grads: Vec<Option<Matrix>> = vars.iter().map(|&v| tape.grad(v).cloned()).collect();
        opt.step(&mut params, &grads)?;
    }
    let [w1, b1, w2, b2] = params;
    let mut mlp = Mlp { w1, b1, w2, b2 };
    if cfg.standardize {
        mlp = mlp.unstandardize(&stats);
    }
    Ok(ScoreHead {
        mlp,
        stats: Some(stats),
        normalizer: cfg.normalizer,
    })
}

/// `(1/4) Σ_j (MLP(v)_j - v_j)² / s_j`, `s_j` the training variance (or
/// standard deviation, per the head's normalizer).
pub fn anomaly_score(v: &AggErrorVector, head: &ScoreHead) -> Result<f64> {
    let stats = head.stats.as_ref().ok_or(Error::UnfittedHead)?;
    let out = head.mlp.forward(&v.0);
    let mut total = 0.0;
    for j in 0..AGG_DIM {
        let denom = match head.normalizer {
            Normalizer::Variance => stats.var[j],
            Normalizer::StdDev => libm::sqrt(stats.var[j]),
        };
        total += (out[j] - v.0[j]) * (out[j] - v.0[j]) / denom;
    }
    Ok(total / AGG_DIM as f64)
}
