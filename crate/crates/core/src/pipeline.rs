//! One protocol trial: split, contaminate, train, fit the scoring head and
//! evaluate. IO-free; callers decide what to persist.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, Label};
use crate::protocol::{auroc, inject_noise, split_dataset, Assignment, SplitSpec};
use crate::scorer::{agg_error_vector, anomaly_score, fit_score_head, AggErrorVector, HeadConfig, ScoreHead};
use crate::trainer::{train_with_clock, Clock, NoClock, TrainConfig, TrainHistory};
use crate::model::GraphAutoencoder;

/// Offset separating the injection stream from the split stream.
pub const INJECT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub train: TrainConfig,
    pub head: HeadConfig,
    pub beta: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            train: TrainConfig::default(),
            head: HeadConfig::default(),
            beta: 0.0,
        }
    }
}

/// Score of one evaluated graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGraph {
    pub graph_id: usize,
    pub label: Label,
    pub score: f64,
    pub z_agg: AggErrorVector,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub seed: u64,
    pub split: SplitSpec,
    pub model: GraphAutoencoder,
    pub head: ScoreHead,
    pub history: TrainHistory,
    pub test: Vec<ScoredGraph>,
    pub val: Vec<ScoredGraph>,
    pub test_auc: f64,
    pub val_auc: f64,
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    master.wrapping_add(trial as u64)
}

/// Scores every graph in `ids` with a fitted model and head.
pub fn score_graphs(
    model: &GraphAutoencoder,
    head: &ScoreHead,
    graphs: &[Graph],
    ids: &[usize],
    tau_exp: f64,
) -> Result<Vec<ScoredGraph>> {
    ids.iter()
        .map(|&i| {
            let g = &graphs[i];
            let z_agg = agg_error_vector(model, g, tau_exp)?;
            Ok(ScoredGraph {
                graph_id: i,
                label: g.label(),
                score: anomaly_score(&z_agg, head)?,
                z_agg,
            })
        })
        .collect()
}

pub fn scored_auc(scored: &[ScoredGraph]) -> Result<f64> {
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let labels: Vec<Label> = scored.iter().map(|s| s.label).collect();
    auroc(&scores, &labels)
}

pub fn run_trial(dataset: &Dataset, cfg: &TrialConfig, seed: u64) -> Result<TrialResult> {
    run_trial_with_clock(dataset, cfg, seed, &NoClock)
}

pub fn run_trial_with_clock(dataset: &Dataset, cfg: &TrialConfig, seed: u64, clock: &dyn Clock) -> Result<TrialResult> {
    let mut split = split_dataset(dataset, seed)?;
    let train_ids = inject_noise(&mut split, cfg.beta, seed ^ INJECT_STREAM)?;
    if train_ids.len() < 2 {
        return Err(Error::TooFewGraphs(train_ids.len()));
    }
    let graphs = dataset.graphs();
    let train_graphs: Vec<Graph> = train_ids.iter().map(|&i| graphs[i].clone()).collect();
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let out = train_with_clock(&train_graphs, &train_cfg, clock)?;
    let model = out.state.model;

    let tau = train_cfg.tau_exp;
    let train_vectors = train_graphs
        .iter()
        .map(|g| agg_error_vector(&model, g, tau))
        .collect::<Result<Vec<_>>>()?;
    let head_cfg = HeadConfig {
        seed,
        ..cfg.head.clone()
    };
    let head = fit_score_head(&train_vectors, &head_cfg)?;

    let test = score_graphs(&model, &head, graphs, &split.ids(Assignment::Test), tau)?;
    let val = score_graphs(&model, &head, graphs, &split.ids(Assignment::Val), tau)?;
    let test_auc = scored_auc(&test)?;
    let val_auc = scored_auc(&val)?;
    Ok(TrialResult {
        seed,
        split,
        model,
        head,
        history: out.history,
        test,
        val,
        test_auc,
        val_auc,
    })
}
