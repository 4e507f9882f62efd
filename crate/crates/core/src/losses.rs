//! Reconstruction and contrastive objectives.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::EPS;

/// Per-node feature error `1 - cos(X_i, X̂_i)` (n x 1) and its mean.
#[derive(Debug, Clone, Copy)]
pub struct FeatureLoss {
    pub per_node: Var,
    pub total: Var,
}

/// Per-node row mean of the weighted BCE (n x 1), its mean, and the
/// positive-class weight `ω` that was applied.
#[derive(Debug, Clone, Copy)]
pub struct StructureLoss {
    pub per_node: Var,
    pub total: Var,
    pub weight: f64,
}

/// Per-node error vectors and their means for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconErrors {
    pub feature_per_node: Vec<f64>,
    pub structure_per_node: Vec<f64>,
    pub feature_total: f64,
    pub structure_total: f64,
}

/// Rows where either side has (near) zero norm contribute 0 but still
/// count towards the mean.
pub fn feature_loss(tape: &mut Tape, x: Var, x_hat: Var) -> Result<FeatureLoss> {
    let (xs, hs) = (tape.value(x), tape.value(x_hat));
    if xs.shape() != hs.shape() {
        return Err(Error::ShapeMismatch {
            op: "feature_loss",
            lhs: xs.shape(),
            rhs: hs.shape(),
        });
    }
    if xs.rows() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mask: Vec<f64> = (0..xs.rows())
        .map(|i| {
            if norm(xs.row(i)) < EPS || norm(hs.row(i)) < EPS {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    let mask = tape.constant(Matrix::from_vec(mask.len(), 1, mask)?)?;
    let cos = tape.cosine_rows(x, x_hat)?;
    let err = tape.affine(cos, -1.0, 1.0)?;
    let per_node = tape.mul(err, mask)?;
    let total = tape.mean(per_node)?;
    Ok(FeatureLoss { per_node, total })
}

/// `ω = (Σ A / Σ (1 - A))^τ`. A graph without edges gets `ω = 1`; the
/// positive term vanishes there anyway.
pub fn positive_weight(adj: &Matrix, tau_exp: f64) -> f64 {
    let ones = adj.sum();
    let zeros = (adj.rows() * adj.cols()) as f64 - ones;
    if ones == 0.0 || zeros == 0.0 {
        return 1.0;
    }
    libm::pow(ones / zeros, tau_exp)
}

/// `-(ω A log Â + (1 - A) log(1 - Â))` averaged over all `n²` entries.
pub fn structure_loss(tape: &mut Tape, adj: &Matrix, a_hat: Var, tau_exp: f64) -> Result<StructureLoss> {
    let pred = tape.value(a_hat);
    if pred.shape() != adj.shape() || adj.rows() != adj.cols() {
        return Err(Error::ShapeMismatch {
            op: "structure_loss",
            lhs: adj.shape(),
            rhs: pred.shape(),
        });
    }
    if adj.rows() == 0 {
        return Err(Error::EmptyGraph);
    }
    for i in 0..adj.rows() {
        for j in 0..adj.cols() {
            let v = adj[(i, j)];
            if v != 0.0 && v != 1.0 {
                return Err(Error::NonBinaryAdjacency(i, j));
            }
        }
    }
    let weight = positive_weight(adj, tau_exp);
    let pos = tape.constant(adj.map(|v| weight * v))?;
    let neg = tape.constant(adj.map(|v| 1.0 - v))?;

    let log_p = tape.log(a_hat)?;
    let one_minus = tape.affine(a_hat, -1.0, 1.0)?;
    let log_q = tape.log(one_minus)?;
    let pos_term = tape.mul(pos, log_p)?;
    let neg_term = tape.mul(neg, log_q)?;
    let ll = tape.add(pos_term, neg_term)?;
    let bce = tape.scale(ll, -1.0)?;
    let per_node = tape.rowmean(bce)?;
    let total = tape.mean(per_node)?;
    Ok(StructureLoss {
        per_node,
        total,
        weight,
    })
}

fn normalized_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = norm(row).max(EPS);
        row.iter_mut().for_each(|v| *v /= n);
    }
    out
}

/// `mean_i log(ℓ⁺_i / (ℓ⁺_i + ℓ⁻_i))` with `ℓ^± = Σ_j exp(cos(ẑ_i, z^±_j) / temp)`.
///
/// Anchors are constants; only `z_hat` receives gradient. The value lies
/// in `(-∞, 0)`.
pub fn contrastive_loss(
    tape: &mut Tape,
    z_hat: Var,
    positives: &Matrix,
    negatives: &Matrix,
    temp: f64,
) -> Result<Var> {
    if positives.rows() == 0 || negatives.rows() == 0 {
        return Err(Error::EmptyAnchorSet);
    }
    if !(temp > 0.0) {
        return Err(Error::InvalidConfig("temperature must be positive"));
    }
    let d = tape.shape(z_hat).1;
    for anchors in [positives, negatives] {
        if anchors.cols() != d {
            return Err(Error::ShapeMismatch {
                op: "contrastive_loss",
                lhs: tape.shape(z_hat),
                rhs: anchors.shape(),
            });
        }
    }
    let q = tape.l2_normalize_rows(z_hat)?;
    let mass = |tape: &mut Tape, anchors: &Matrix| -> Result<Var> {
        let at = tape.constant(normalized_rows(anchors).transpose())?;
        let sims = tape.matmul(q, at)?;
        let scaled = tape.scale(sims, 1.0 / temp)?;
        let e = tape.exp(scaled)?;
        tape.rowsum(e)
    };
    let pos = mass(tape, positives)?;
    let neg = mass(tape, negatives)?;
    let both = tape.add(pos, neg)?;
    let log_pos = tape.log(pos)?;
    let log_both = tape.log(both)?;
    let ratio = tape.sub(log_pos, log_both)?;
    tape.mean(ratio)
}
