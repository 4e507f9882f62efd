//! Anchor selection, mixup fusion, and contrastive pool sampling.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::discriminator::quantile;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::EPS;

/// High-information node embeddings taken from pseudo-normal graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorBank {
    pub embeddings: Matrix,
    /// `(graph id, node id)` of each row.
    pub sources: Vec<(usize, usize)>,
    /// Number of rows actually selected.
    pub k: usize,
}

/// `I(node)`: mean cosine between a node embedding and every graph-level
/// embedding in `graph_embeddings` (one row per normal graph).
///
/// Returns one score vector per entry of `node_embeddings`.
pub fn node_info_scores(node_embeddings: &[Matrix], graph_embeddings: &Matrix) -> Result<Vec<Vec<f64>>> {
    if graph_embeddings.rows() == 0 || node_embeddings.is_empty() {
        return Err(Error::NoNormalGraphs);
    }
    let d = graph_embeddings.cols();
    // mean of cosines = <u, mean of unit graph vectors> for unit u
    let mut centroid = alloc::vec![0.0; d];
    for i in 0..graph_embeddings.rows() {
        let r = graph_embeddings.row(i);
        let n = norm(r).max(EPS);
        for (c, v) in centroid.iter_mut().zip(r) {
            *c += v / n;
        }
    }
    let inv = 1.0 / graph_embeddings.rows() as f64;
    centroid.iter_mut().for_each(|c| *c *= inv);

    node_embeddings
        .iter()
        .map(|z| {
            if z.cols() != d {
                return Err(Error::ShapeMismatch {
                    op: "node_info_scores",
                    lhs: z.shape(),
                    rhs: graph_embeddings.shape(),
                });
            }
            Ok((0..z.rows())
                .map(|j| dot(z.row(j), &centroid) / norm(z.row(j)).max(EPS))
                .collect())
        })
        .collect()
}

/// Picks the `k` highest-scoring nodes across all graphs; ties go to the
/// smaller `(graph id, node id)`. `graph_ids[i]` names the graph whose
/// scores are `scores[i]`.
pub fn select_topk_nodes(
    scores: &[Vec<f64>],
    embeddings: &[Matrix],
    graph_ids: &[usize],
    k: usize,
) -> Result<AnchorBank> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1"));
    }
    if scores.len() != embeddings.len() || scores.len() != graph_ids.len() {
        return Err(Error::ShapeMismatch {
            op: "select_topk_nodes",
            lhs: (scores.len(), 0),
            rhs: (embeddings.len(), graph_ids.len()),
        });
    }
    let mut candidates: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (slot, (s, &gid)) in scores.iter().zip(graph_ids).enumerate() {
        for (node, &score) in s.iter().enumerate() {
            candidates.push((score, gid, node, slot));
        }
    }
    candidates.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => (a.1, a.2).cmp(&(b.1, b.2)),
        other => other,
    });
    candidates.truncate(k);
    let d = embeddings.first().map_or(0, Matrix::cols);
    let mut rows = Vec::with_capacity(candidates.len() * d);
    let mut sources = Vec::with_capacity(candidates.len());
    for &(_, gid, node, slot) in &candidates {
        rows.extend_from_slice(embeddings[slot].row(node));
        sources.push((gid, node));
    }
    let k = sources.len();
    Ok(AnchorBank {
        embeddings: Matrix::from_vec(k, d, rows)?,
        sources,
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixupMode {
    /// Rows of `T = Z Bᵀ` are softmax-normalized before mixing.
    #[default]
    SoftmaxNormalized,
    /// `T = Z Bᵀ` used as is.
    Verbatim,
}

/// Draws `λ ~ Uniform[lo, hi]`.
pub fn draw_lambda<R: Rng + ?Sized>(interval: (f64, f64), rng: &mut R) -> Result<f64> {
    let (lo, hi) = interval;
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidConfig("lambda interval must satisfy 0 <= lo <= hi <= 1"));
    }
    if lo == hi {
        return Ok(lo);
    }
    Ok(rng.random_range(lo..=hi))
}

/// `λ Z + (1 - λ) T B` with `T = Z Bᵀ` (row-softmaxed in the default mode).
/// The bank is a constant; gradient reaches `z` only.
pub fn mixup_with_lambda(tape: &mut Tape, z: Var, bank: &AnchorBank, lambda: f64, mode: MixupMode) -> Result<Var> {
    if bank.k == 0 || bank.embeddings.rows() == 0 {
        return Err(Error::EmptyBank);
    }
    if lambda == 1.0 {
        return Ok(z);
    }
    let b = tape.constant(bank.embeddings.clone())?;
    let bt = tape.constant(bank.embeddings.transpose())?;
    let mut t = tape.matmul(z, bt)?;
    if mode == MixupMode::SoftmaxNormalized {
        t = tape.softmax_rows(t)?;
    }
    let mixed = tape.matmul(t, b)?;
    let keep = tape.scale(z, lambda)?;
    let blend = tape.scale(mixed, 1.0 - lambda)?;
    tape.add(keep, blend)
}

/// Draws one `λ` from `interval` and fuses.
pub fn mixup_fuse<R: Rng + ?Sized>(
    tape: &mut Tape,
    z: Var,
    bank: &AnchorBank,
    interval: (f64, f64),
    rng: &mut R,
    mode: MixupMode,
) -> Result<Var> {
    if bank.k == 0 {
        return Err(Error::EmptyBank);
    }
    let lambda = draw_lambda(interval, rng)?;
    mixup_with_lambda(tape, z, bank, lambda, mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePools {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub beta1: f64,
    pub beta2: f64,
    /// Set when a region held fewer than `K` graphs and was sampled with
    /// replacement.
    pub with_replacement: bool,
}

fn draw<R: Rng + ?Sized>(region: &[usize], count: usize, rng: &mut R) -> (Vec<usize>, bool) {
    if region.len() >= count {
        let mut pool = region.to_vec();
        pool.shuffle(rng);
        pool.truncate(count);
        (pool, false)
    } else {
        let picks = (0..count)
            .map(|_| region[rng.random_range(0..region.len())])
            .collect();
        (picks, true)
    }
}

/// Positives come from graphs with `η` above the `beta1` quantile,
/// negatives from graphs with `η` below the `beta2` quantile; `count`
/// of each.
pub fn sample_pools<R: Rng + ?Sized>(
    eta: &[f64],
    beta1: f64,
    beta2: f64,
    count: usize,
    rng: &mut R,
) -> Result<SamplePools> {
    if !(0.0 < beta2 && beta2 < beta1 && beta1 < 1.0) {
        return Err(Error::InvalidConfig("need 0 < beta2 < beta1 < 1"));
    }
    if count == 0 {
        return Err(Error::InvalidConfig("pool size must be at least 1"));
    }
    let high = quantile(eta, beta1)?;
    let low = quantile(eta, beta2)?;
    let upper: Vec<usize> = (0..eta.len()).filter(|&i| eta[i] > high).collect();
    let lower: Vec<usize> = (0..eta.len()).filter(|&i| eta[i] < low).collect();
    if upper.is_empty() {
        return Err(Error::DegeneratePools("positive"));
    }
    if lower.is_empty() {
        return Err(Error::DegeneratePools("negative"));
    }
    let (positives, rp) = draw(&upper, count, rng);
    let (negatives, rn) = draw(&lower, count, rng);
    Ok(SamplePools {
        positives,
        negatives,
        beta1,
        beta2,
        with_replacement: rp || rn,
    })
}
