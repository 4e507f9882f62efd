//! Experiment configuration: one flat TOML table whose keys mirror the
//! training, head, split and dataset knobs, plus an optional `[grid]`
//! table for sweeps. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use denoise_core::anchor::MixupMode;
use denoise_core::graph::SynthConfig;
use denoise_core::pipeline::TrialConfig;
use denoise_core::scorer::{HeadConfig, Normalizer};
use denoise_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::tu::{ClassPolicy, NodeFeatures, TuOptions, DEFAULT_MAX_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixup {
    Softmax,
    Verbatim,
}

/// See [`NodeFeatures`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Features {
    Labels,
    Attributes,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreNormalizer {
    Variance,
    Stddev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// TU collection directory; the synthetic generator when absent.
    pub dataset: Option<PathBuf>,
    /// File prefix inside `dataset`; defaults to the directory name.
    pub name: Option<String>,
    /// Raw graph class treated as anomalous; minority class when absent.
    pub anomaly_class: Option<i64>,
    pub node_features: Features,
    pub max_degree: usize,

    pub n_graphs: usize,
    pub nodes_lo: usize,
    pub nodes_hi: usize,
    pub p_normal: f64,
    pub p_anom: f64,
    pub attr_shift: f64,
    pub anom_frac: f64,
    pub attr_dim: usize,
    pub synth_seed: u64,

    pub beta: f64,
    pub seed: u64,
    pub trials: usize,

    pub epochs: usize,
    pub s1_steps: usize,
    pub s2_steps: usize,
    pub w: f64,
    pub lr: f64,
    pub drop_rate: f64,
    pub alpha: f64,
    pub k: usize,
    pub lambda_interval: (f64, f64),
    pub pool_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub temp: f64,
    pub tau_exp: f64,
    pub mixup: Mixup,
    pub hidden: usize,
    pub layers: usize,

    pub head_hidden: usize,
    pub head_steps: usize,
    pub head_lr: f64,
    pub head_standardize: bool,
    pub normalizer: ScoreNormalizer,

    pub dump_embeddings: bool,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

/// Sweep axes; every listed value is crossed with every other axis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub k: Option<Vec<usize>>,
    pub lambda_interval: Option<Vec<(f64, f64)>>,
    pub pool_size: Option<Vec<usize>>,
    pub beta1: Option<Vec<f64>>,
    pub beta2: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let train = TrainConfig::default();
        let head = HeadConfig::default();
        ExperimentConfig {
            dataset: None,
            name: None,
            anomaly_class: None,
            node_features: Features::Labels,
            max_degree: DEFAULT_MAX_DEGREE,
            n_graphs: synth.n_graphs,
            nodes_lo: synth.nodes_lo,
            nodes_hi: synth.nodes_hi,
            p_normal: synth.p_normal,
            p_anom: synth.p_anom,
            attr_shift: synth.attr_shift,
            anom_frac: synth.anom_frac,
            attr_dim: synth.attr_dim,
            synth_seed: 0,
            beta: 0.0,
            seed: 0,
            trials: 5,
            epochs: train.epochs,
            s1_steps: train.s1_steps,
            s2_steps: train.s2_steps,
            w: train.w,
            lr: train.lr,
            drop_rate: train.drop_rate,
            alpha: train.alpha,
            k: train.k,
            lambda_interval: train.lambda_interval,
            pool_size: train.pool_size,
            beta1: train.beta1,
            beta2: train.beta2,
            temp: train.temp,
            tau_exp: train.tau_exp,
            mixup: Mixup::Softmax,
            hidden: train.hidden,
            layers: train.layers,
            head_hidden: head.hidden,
            head_steps: head.steps,
            head_lr: head.lr,
            head_standardize: head.standardize,
            normalizer: ScoreNormalizer::Variance,
            dump_embeddings: false,
            grid: None,
        }
    }
}

/// One concrete value of every grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub assignments: Vec<(&'static str, String)>,
    pub config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|msg| CliError::Config {
            path: Some(path.to_path_buf()),
            msg,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field checks that the type system cannot express.
    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials: must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err("beta: must lie in [0, 1)".into());
        }
        self.train_config().validate().map_err(|e| e.to_string())?;
        if self.dataset.is_none() {
            self.synth_config().validate().map_err(|e| e.to_string())?;
        }
        if self.head_hidden == 0 || !(self.head_lr >= 0.0) {
            return Err("head_hidden must be positive and head_lr non-negative".into());
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_graphs: self.n_graphs,
            nodes_lo: self.nodes_lo,
            nodes_hi: self.nodes_hi,
            p_normal: self.p_normal,
            p_anom: self.p_anom,
            attr_shift: self.attr_shift,
            anom_frac: self.anom_frac,
            attr_dim: self.attr_dim,
        }
    }

    pub fn tu_options(&self) -> TuOptions {
        TuOptions {
            policy: self.anomaly_class.map_or(ClassPolicy::Minority, ClassPolicy::Explicit),
            features: match self.node_features {
                Features::Labels => NodeFeatures::Labels,
                Features::Attributes => NodeFeatures::Attributes,
                Features::Both => NodeFeatures::Both,
            },
            max_degree: self.max_degree,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            s1_steps: self.s1_steps,
            s2_steps: self.s2_steps,
            w: self.w,
            lr: self.lr,
            drop_rate: self.drop_rate,
            alpha: self.alpha,
            k: self.k,
            lambda_interval: self.lambda_interval,
            pool_size: self.pool_size,
            beta1: self.beta1,
            beta2: self.beta2,
            temp: self.temp,
            tau_exp: self.tau_exp,
            seed: self.seed,
            mixup_mode: match self.mixup {
                Mixup::Softmax => MixupMode::SoftmaxNormalized,
                Mixup::Verbatim => MixupMode::Verbatim,
            },
            hidden: self.hidden,
            layers: self.layers,
        }
    }

    pub fn head_config(&self) -> HeadConfig {
        HeadConfig {
            hidden: self.head_hidden,
            steps: self.head_steps,
            lr: self.head_lr,
            seed: self.seed,
            normalizer: match self.normalizer {
                ScoreNormalizer::Variance => Normalizer::Variance,
                ScoreNormalizer::Stddev => Normalizer::StdDev,
            },
            standardize: self.head_standardize,
        }
    }

    pub fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            train: self.train_config(),
            head: self.head_config(),
            beta: self.beta,
        }
    }

    /// Cartesian product of the grid axes, in axis order with the last
    /// axis varying fastest.
    pub fn grid_points(&self) -> Result<Vec<GridPoint>, CliError> {
        let grid = self.grid.as_ref().ok_or(CliError::EmptyGrid)?;
        type Apply = Box<dyn Fn(&mut ExperimentConfig)>;
        let mut axes: Vec<Vec<(&'static str, String, Apply)>> = Vec::new();
        macro_rules! axis {
            ($field:ident) => {
                if let Some(values) = &grid.$field {
                    axes.push(
                        values
                            .iter()
                            .map(|&v| {
                                let apply: Apply = Box::new(move |c: &mut ExperimentConfig| c.$field = v);
                                (stringify!($field), format!("{v:?}"), apply)
                            })
                            .collect(),
                    );
                }
            };
        }
        axis!(k);
        axis!(lambda_interval);
        axis!(pool_size);
        axis!(beta1);
        axis!(beta2);
        axis!(w);
        axis!(alpha);
        axis!(beta);
        if axes.is_empty() || axes.iter().any(Vec::is_empty) {
            return Err(CliError::EmptyGrid);
        }

        let mut points = vec![GridPoint {
            assignments: Vec::new(),
            config: ExperimentConfig {
                grid: None,
                ..self.clone()
            },
        }];
        for axis in &axes {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for (name, shown, apply) in axis {
                    let mut q = p.clone();
                    apply(&mut q.config);
                    q.assignments.push((name, shown.clone()));
                    next.push(q);
                }
            }
            points = next;
        }
        for p in &points {
            p.config.validate().map_err(|msg| CliError::Config { path: None, msg })?;
        }
        Ok(points)
    }
}
