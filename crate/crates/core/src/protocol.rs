//! Evaluation protocol: class-wise splits, contamination injection, and
//! rank-based AUROC.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Dataset, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assignment {
    Train,
    Val,
    Test,
    /// Anomalies not placed in val/test; the contamination pool.
    Unused,
}

impl Assignment {
    pub fn as_str(self) -> &'static str {
        match self {
            Assignment::Train => "train",
            Assignment::Val => "val",
            Assignment::Test => "test",
            Assignment::Unused => "unused",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub assignment: Vec<Assignment>,
    /// Anomalies moved into the training split by [`inject_noise`].
    pub injected: Vec<usize>,
    pub seed: u64,
    pub beta: f64,
}

impl SplitSpec {
    pub fn ids(&self, which: Assignment) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == which)
            .collect()
    }

    pub fn train_ids(&self) -> Vec<usize> {
        self.ids(Assignment::Train)
    }

    pub fn count(&self, which: Assignment) -> usize {
        self.assignment.iter().filter(|&&a| a == which).count()
    }

    pub fn train_normal_count(&self) -> usize {
        self.count(Assignment::Train) - self.injected.len()
    }
}

fn round_count(frac: f64, n: usize) -> usize {
    libm::round(frac * n as f64) as usize
}

/// Normals go 80/10/10 to train/val/test; 5% of anomalies go to val and
/// 5% to test (at least one each); the remaining anomalies form the
/// injection pool.
pub fn split_labels(labels: &[Label], seed: u64) -> Result<SplitSpec> {
    let mut normals: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_anomalous()).collect();
    let mut anomalies: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_anomalous()).collect();
    if normals.is_empty() || anomalies.len() < 2 {
        return Err(Error::SingleClassDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normals.shuffle(&mut rng);
    anomalies.shuffle(&mut rng);

    let mut assignment = alloc::vec![Assignment::Unused; labels.len()];
    let n_train = round_count(0.8, normals.len());
    let n_val = round_count(0.1, normals.len()).min(normals.len() - n_train);
    for (pos, &i) in normals.iter().enumerate() {
        assignment[i] = if pos < n_train {
            Assignment::Train
        } else if pos < n_train + n_val {
            Assignment::Val
        } else {
            Assignment::Test
        };
    }
    let per_split = round_count(0.05, anomalies.len()).max(1);
    for (pos, &i) in anomalies.iter().enumerate() {
        if pos < per_split {
            assignment[i] = Assignment::Val;
        } else if pos < 2 * per_split {
            assignment[i] = Assignment::Test;
        }
    }
    Ok(SplitSpec {
        assignment,
        injected: Vec::new(),
        seed,
        beta: 0.0,
    })
}

pub fn split_dataset(dataset: &Dataset, seed: u64) -> Result<SplitSpec> {
    split_labels(&dataset.labels(), seed)
}

/// Moves `round(β · #train normals)` pool anomalies into the training
/// split and returns the contaminated training ids in ascending order.
pub fn inject_noise(split: &mut SplitSpec, beta: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidConfig("beta must lie in [0, 1)"));
    }
    let requested = round_count(beta, split.train_normal_count());
    let mut pool = split.ids(Assignment::Unused);
    if pool.len() < requested {
        return Err(Error::PoolExhausted {
            available: pool.len(),
            requested,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    for &i in &pool[..requested] {
        split.assignment[i] = Assignment::Train;
        split.injected.push(i);
    }
    split.beta = beta;
    Ok(split.train_ids())
}

/// Probability that a random anomaly outscores a random normal, ties
/// counting one half (Mann–Whitney with mid-ranks).
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "auroc",
            lhs: (scores.len(), 1),
            rhs: (labels.len(), 1),
        });
    }
    let positives = labels.iter().filter(|l| l.is_anomalous()).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClassLabels);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFiniteResult("auroc"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based start+1..=end) share their midpoint
        let mid = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&i| labels[i].is_anomalous()).count();
        rank_sum += mid * tied_pos as f64;
        start = end;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyVector);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, libm::sqrt(var)))
}
