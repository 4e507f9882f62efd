//! Multi-trial experiments, sweeps and embedding dumps on top of the core
//! pipeline, with their file outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use denoise_core::graph::gen_synthetic;
use denoise_core::model::GraphAutoencoder;
use denoise_core::pipeline::{run_trial_with_clock, trial_seed, TrialResult};
use denoise_core::protocol::{inject_noise, mean_std, split_dataset, SplitSpec};
use denoise_core::trainer::Clock;
use denoise_core::{Dataset, Matrix};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output;
use crate::tu::{parse_tudataset, validate_dataset};

/// Seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Builds the synthetic dataset or parses the configured TU collection,
/// refusing collections with non-finite attributes or empty graphs.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let Some(dir) = &cfg.dataset else {
        return gen_synthetic(&cfg.synth_config(), cfg.synth_seed).map_err(CliError::core("synthetic dataset"));
    };
    let name = match &cfg.name {
        Some(n) => n.clone(),
        None => dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Config {
                path: None,
                msg: format!("name: cannot infer from {}", dir.display()),
            })?,
    };
    let parsed = parse_tudataset(dir, &name, &cfg.tu_options())?;
    let report = validate_dataset(&parsed.dataset);
    if !report.is_clean() {
        return Err(CliError::Data {
            name,
            msg: format!(
                "non-finite attributes in graphs {:?}, empty graphs {:?}",
                report.nonfinite_graphs, report.empty_graphs
            ),
        });
    }
    Ok(parsed.dataset)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub test_auc: f64,
    pub val_auc: f64,
    pub train_graphs: usize,
    pub injected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub dataset: String,
    pub master_seed: u64,
    pub beta: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub trials: Vec<TrialSummary>,
    pub config: ExperimentConfig,
}

impl TrialReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are plain data")
    }
}

fn summarize(dataset: &Dataset, cfg: &ExperimentConfig, results: &[TrialResult]) -> Result<TrialReport, CliError> {
    let trials: Vec<TrialSummary> = results
        .iter()
        .enumerate()
        .map(|(i, r)| TrialSummary {
            trial: i,
            seed: r.seed,
            test_auc: r.test_auc,
            val_auc: r.val_auc,
            train_graphs: r.split.train_ids().len(),
            injected: r.split.injected.len(),
        })
        .collect();
    let aucs: Vec<f64> = trials.iter().map(|t| t.test_auc).collect();
    let (mean_auc, std_auc) = mean_std(&aucs).map_err(CliError::core("aggregating trials"))?;
    Ok(TrialReport {
        dataset: dataset.name().to_owned(),
        master_seed: cfg.seed,
        beta: cfg.beta,
        mean_auc,
        std_auc,
        trials,
        config: ExperimentConfig {
            grid: None,
            ..cfg.clone()
        },
    })
}

/// Runs `cfg.trials` independent trials, spread over the available cores.
/// Results are ordered by trial index and do not depend on scheduling.
pub fn run_trials(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<TrialResult>, CliError> {
    let trial_cfg = cfg.trial_config();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.trials);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<TrialResult, CliError>>>> = Mutex::new((0..cfg.trials).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= cfg.trials {
                    break;
                }
                let seed = trial_seed(cfg.seed, t);
                let clock = WallClock::start();
                let r = run_trial_with_clock(dataset, &trial_cfg, seed, &clock)
                    .map_err(CliError::core(format!("trial {t} (seed {seed})")));
                slots.lock().expect("no worker panics while holding the lock")[t] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers have finished")
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Every trial of an experiment plus its aggregate report.
pub struct Experiment {
    pub report: TrialReport,
    pub results: Vec<TrialResult>,
}

/// Full protocol run. With `out`, writes `report.toml`, `trials.csv` and
/// per trial `trial_<i>_{history,split,scores_test,scores_val}.csv`
/// (plus `trial_<i>_embeddings.csv` when `dump_embeddings` is set).
pub fn run_experiment(dataset: &Dataset, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Experiment, CliError> {
    let results = run_trials(dataset, cfg)?;
    let report = summarize(dataset, cfg, &results)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_text(&dir.join("report.toml"), &report.to_toml())?;
        let records: Vec<Vec<String>> = report
            .trials
            .iter()
            .map(|t| {
                vec![
                    t.trial.to_string(),
                    t.seed.to_string(),
                    t.test_auc.to_string(),
                    t.val_auc.to_string(),
                    t.train_graphs.to_string(),
                    t.injected.to_string(),
                ]
            })
            .collect();
        let head: Vec<String> = ["trial", "seed", "test_auc", "val_auc", "train_graphs", "injected"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        output::write_table(&dir.join("trials.csv"), &head, &records)?;
        for (i, r) in results.iter().enumerate() {
            let file = |kind: &str| dir.join(format!("trial_{i}_{kind}.csv"));
            output::write_history(&file("history"), &r.history)?;
            output::write_split(&file("split"), dataset, &r.split)?;
            output::write_scores(&file("scores_test"), &r.test)?;
            output::write_scores(&file("scores_val"), &r.val)?;
            if cfg.dump_embeddings {
                dump_embeddings(&r.model, dataset, &r.split, &file("embeddings"))?;
            }
        }
    }
    Ok(Experiment { report, results })
}

/// One sweep cell: the grid values and the resulting report.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub assignments: Vec<(&'static str, String)>,
    pub report: TrialReport,
}

/// Runs every grid point of `cfg`; with `out`, writes `sweep.csv` (one
/// row per point: axis values, mean and std AUC) and each point's
/// experiment files under `point_<i>/`.
pub fn sweep(dataset: &Dataset, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<SweepRow>, CliError> {
    let points = cfg.grid_points()?;
    let mut rows = Vec::with_capacity(points.len());
    for (i, p) in points.into_iter().enumerate() {
        let dir: Option<PathBuf> = out.map(|d| d.join(format!("point_{i}")));
        let exp = run_experiment(dataset, &p.config, dir.as_deref())?;
        rows.push(SweepRow {
            assignments: p.assignments,
            report: exp.report,
        });
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        let mut head: Vec<String> = rows[0].assignments.iter().map(|(n, _)| n.to_string()).collect();
        head.extend(["mean_auc".to_string(), "std_auc".to_string()]);
        let records: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut rec: Vec<String> = r.assignments.iter().map(|(_, v)| v.clone()).collect();
                rec.push(r.report.mean_auc.to_string());
                rec.push(r.report.std_auc.to_string());
                rec
            })
            .collect();
        output::write_table(&dir.join("sweep.csv"), &head, &records)?;
    }
    Ok(rows)
}

/// The split a trial with `seed` uses, including its injected anomalies.
pub fn trial_split(dataset: &Dataset, beta: f64, seed: u64) -> Result<SplitSpec, CliError> {
    let mut split = split_dataset(dataset, seed).map_err(CliError::core("splitting"))?;
    inject_noise(&mut split, beta, seed ^ denoise_core::pipeline::INJECT_STREAM).map_err(CliError::core("injecting anomalies"))?;
    Ok(split)
}

/// Writes the clean-adjacency graph embedding of every graph.
pub fn dump_embeddings(model: &GraphAutoencoder, dataset: &Dataset, split: &SplitSpec, path: &Path) -> Result<(), CliError> {
    let embeddings = dataset
        .graphs()
        .iter()
        .map(|g| model.embed_graph(g))
        .collect::<Result<Vec<Matrix>, _>>()
        .map_err(CliError::core("embedding graphs"))?;
    output::write_embeddings(path, dataset, &output::split_names(split), &embeddings)
}
