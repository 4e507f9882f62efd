//! Similarity-based pseudo-labelling of the training graphs.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::EPS;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub eta: Vec<f64>,
    pub threshold: f64,
    pub alpha: f64,
    /// `true` = provisionally anomalous.
    pub flagged: Vec<bool>,
}

impl PseudoLabels {
    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }

    /// Indices of graphs labelled normal.
    pub fn normal_indices(&self) -> Vec<usize> {
        (0..self.flagged.len()).filter(|&i| !self.flagged[i]).collect()
    }
}

/// `η_i`: mean cosine similarity of row `i` against every other row.
pub fn graph_similarity_scores(z_graphs: &Matrix) -> Result<Vec<f64>> {
    let m = z_graphs.rows();
    if m < 2 {
        return Err(Error::TooFewGraphs(m));
    }
    let unit: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let r = z_graphs.row(i);
            let n = norm(r).max(EPS);
            r.iter().map(|v| v / n).collect()
        })
        .collect();
    let mut eta = alloc::vec![0.0; m];
    for i in 0..m {
        for j in i + 1..m {
            let s = dot(&unit[i], &unit[j]);
            eta[i] += s;
            eta[j] += s;
        }
    }
    let denom = (m - 1) as f64;
    eta.iter_mut().for_each(|v| *v /= denom);
    Ok(eta)
}

/// Empirical lower-tail quantile with linear interpolation between order
/// statistics: `q = 0` gives the minimum, `q = 1` the maximum.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyVector);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig("quantile level must lie in [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Flags graphs whose `η` falls strictly below the `alpha`-quantile.
pub fn assign_pseudo_labels(eta: &[f64], alpha: f64) -> Result<PseudoLabels> {
    let threshold = quantile(eta, alpha)?;
    let flagged = eta.iter().map(|&v| v < threshold).collect();
    Ok(PseudoLabels {
        eta: eta.to_vec(),
        threshold,
        alpha,
        flagged,
    })
}
