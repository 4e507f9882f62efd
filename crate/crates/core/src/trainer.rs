//! Adversarial alternating training.
//!
//! Each epoch runs reconstruction steps over the encoder and both decoders,
//! refreshes pseudo-labels, the anchor bank and the contrastive pools from
//! clean-adjacency embeddings, then runs contrastive ascent steps over the
//! encoder alone. The encoder keeps a single Adam state across both stages,
//! so the adversarial weight `w` also sets how strongly the contrastive
//! gradients dominate its second-moment estimate.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::anchor::{draw_lambda, mixup_with_lambda, node_info_scores, sample_pools, select_topk_nodes};
use crate::anchor::{AnchorBank, MixupMode, SamplePools};
use crate::autodiff::{AdamConfig, AdamState, Tape, Var};
use crate::discriminator::{assign_pseudo_labels, graph_similarity_scores, PseudoLabels};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::losses::{contrastive_loss, feature_loss, structure_loss};
use crate::matrix::Matrix;
use crate::model::{decode_attributes, decode_structure, encode, normalized_propagation, perturb_edges, readout};
use crate::model::{GraphAutoencoder, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub s1_steps: usize,
    pub s2_steps: usize,
    /// Adversarial weight on the contrastive objective.
    pub w: f64,
    pub lr: f64,
    pub drop_rate: f64,
    /// Quantile level of the pseudo-labelling threshold.
    pub alpha: f64,
    /// Anchor bank size.
    pub k: usize,
    pub lambda_interval: (f64, f64),
    /// Graphs drawn into each contrastive pool.
    pub pool_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub temp: f64,
    pub tau_exp: f64,
    pub seed: u64,
    pub mixup_mode: MixupMode,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            s1_steps: 1,
            s2_steps: 1,
            w: 200.0,
            lr: 1e-2,
            drop_rate: 0.1,
            alpha: 0.15,
            k: 256,
            lambda_interval: (0.7, 0.9),
            pool_size: 20,
            beta1: 0.9,
            beta2: 0.1,
            temp: 0.5,
            tau_exp: 1.0,
            seed: 0,
            mixup_mode: MixupMode::SoftmaxNormalized,
            hidden: 64,
            layers: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s1_steps == 0 && self.s2_steps == 0 && self.epochs > 0 {
            return Err(Error::InvalidConfig("at least one stage must run"));
        }
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(Error::InvalidConfig("w must be finite and non-negative"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("lr must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::InvalidConfig("drop_rate must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("alpha must lie in [0, 1]"));
        }
        if self.k == 0 || self.pool_size == 0 {
            return Err(Error::InvalidConfig("k and pool_size must be positive"));
        }
        let (lo, hi) = self.lambda_interval;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidConfig("lambda interval must satisfy 0 <= lo <= hi <= 1"));
        }
        if !(0.0 < self.beta2 && self.beta2 < self.beta1 && self.beta1 < 1.0) {
            return Err(Error::InvalidConfig("need 0 < beta2 < beta1 < 1"));
        }
        if !(self.temp > 0.0) || !self.tau_exp.is_finite() {
            return Err(Error::InvalidConfig("temp must be positive and tau_exp finite"));
        }
        if self.hidden == 0 || self.layers == 0 {
            return Err(Error::InvalidConfig("hidden and layers must be positive"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Model parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub model: GraphAutoencoder,
    pub encoder_opt: AdamState,
    pub decoder_opt: AdamState,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub recon_loss: f64,
    /// `None` when the contrastive stage is disabled (`w = 0`).
    pub contrast_loss: Option<f64>,
    pub flagged: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// Equality ignoring wall-clock time.
    pub fn same_trajectory(&self, other: &TrainHistory) -> bool {
        self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.recon_loss.to_bits() == b.recon_loss.to_bits()
                    && a.contrast_loss.map(f64::to_bits) == b.contrast_loss.map(f64::to_bits)
                    && a.flagged == b.flagged
            })
    }
}

/// Anchor embeddings for the contrastive loss, detached from the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastAnchors {
    pub positives: Matrix,
    pub negatives: Matrix,
}

/// Discriminator output for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Refresh {
    pub graph_embeddings: Matrix,
    pub labels: PseudoLabels,
    pub bank: AnchorBank,
    pub pools: SamplePools,
    pub anchors: ContrastAnchors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub state: ModelState,
    pub history: TrainHistory,
    /// Bank from the last refresh; `None` when no epoch ran.
    pub bank: Option<AnchorBank>,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub state: ModelState,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig, attr_dim: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model_cfg = ModelConfig {
            attr_dim,
            hidden: config.hidden,
            layers: config.layers,
        };
        let model = GraphAutoencoder::init(model_cfg, &mut rng)?;
        let encoder_opt = AdamState::new(config.adam(), &model.encoder.weights);
        let decoder_opt = AdamState::new(config.adam(), &model.decoder.weights);
        Ok(Trainer {
            state: ModelState {
                model,
                encoder_opt,
                decoder_opt,
                seed: config.seed,
            },
            config,
            rng,
        })
    }

    pub fn model(&self) -> &GraphAutoencoder {
        &self.state.model
    }

    /// Independent edge-dropout draw for every graph.
    pub fn perturb(&mut self, graphs: &[Graph]) -> Result<Vec<Matrix>> {
        graphs
            .iter()
            .map(|g| perturb_edges(g, self.config.drop_rate, &mut self.rng))
            .collect()
    }

    /// One reconstruction step with fresh perturbations.
    pub fn stage1_step(&mut self, graphs: &[Graph]) -> Result<f64> {
        let adjs = self.perturb(graphs)?;
        self.stage1_step_with(graphs, &adjs)
    }

    /// One full-batch reconstruction step on the given perturbed
    /// adjacencies. Returns the mean `L_F + L_S` before the update.
    pub fn stage1_step_with(&mut self, graphs: &[Graph], perturbed: &[Matrix]) -> Result<f64> {
        if graphs.is_empty() || graphs.len() != perturbed.len() {
            return Err(Error::InvalidConfig("need one perturbed adjacency per graph"));
        }
        let model = &self.state.model;
        let mut tape = Tape::new();
        let enc = model.encoder.register(&mut tape, true)?;
        let dec = model.decoder.register(&mut tape, true)?;
        let base = tape.len();
        let scale = 1.0 / graphs.len() as f64;
        let mut total = 0.0;
        for (g, adj) in graphs.iter().zip(perturbed) {
            let x = tape.constant(g.attrs().clone())?;
            let prop = tape.constant(normalized_propagation(adj))?;
            let z = encode(&mut tape, x, prop, &enc)?;
            let a_hat = decode_structure(&mut tape, z, prop, &dec)?;
            let x_hat = decode_attributes(&mut tape, z, prop, &dec)?;
            let lf = feature_loss(&mut tape, x, x_hat)?;
            let ls = structure_loss(&mut tape, &g.adjacency(), a_hat, self.config.tau_exp)?;
            let loss = tape.add(lf.total, ls.total)?;
            total += tape.value(loss).item();
            let scaled = tape.scale(loss, scale)?;
            tape.backward(scaled)?;
            tape.truncate(base);
        }
        let enc_grads = collect_grads(&tape, enc.weights(), &model.encoder.weights);
        let dec_grads = collect_grads(&tape, dec.weights(), &model.decoder.weights);
        let state = &mut self.state;
        state.encoder_opt.step(&mut state.model.encoder.weights, &enc_grads)?;
        state.decoder_opt.step(&mut state.model.decoder.weights, &dec_grads)?;
        Ok(total * scale)
    }

    /// Pseudo-labels, anchor bank and contrastive pools from the current
    /// clean-adjacency embeddings.
    pub fn refresh(&mut self, graphs: &[Graph]) -> Result<Refresh> {
        let model = &self.state.model;
        let node_embs = graphs
            .iter()
            .map(|g| model.embed_nodes(g))
            .collect::<Result<Vec<_>>>()?;
        if node_embs.iter().any(|z| z.rows() == 0) {
            return Err(Error::EmptyGraph);
        }
        let rows: Vec<Matrix> = node_embs.iter().map(Matrix::col_mean).collect();
        let graph_embeddings = Matrix::vstack(&rows.iter().collect::<Vec<_>>())?;
        let eta = graph_similarity_scores(&graph_embeddings)?;
        let labels = assign_pseudo_labels(&eta, self.config.alpha)?;

        let normals = labels.normal_indices();
        if normals.is_empty() {
            return Err(Error::NoNormalGraphs);
        }
        let normal_graphs = graph_embeddings.select_rows(&normals);
        let mut normal_nodes = Vec::with_capacity(normals.len());
        let mut node_embs: Vec<Option<Matrix>> = node_embs.into_iter().map(Some).collect();
        for &i in &normals {
            normal_nodes.push(node_embs[i].take().expect("indices are distinct"));
        }
        let scores = node_info_scores(&normal_nodes, &normal_graphs)?;
        let bank = select_topk_nodes(&scores, &normal_nodes, &normals, self.config.k)?;

        let pools = sample_pools(
            &eta,
            self.config.beta1,
            self.config.beta2,
            self.config.pool_size,
            &mut self.rng,
        )?;
        let anchors = ContrastAnchors {
            positives: graph_embeddings.select_rows(&pools.positives),
            negatives: graph_embeddings.select_rows(&pools.negatives),
        };
        Ok(Refresh {
            graph_embeddings,
            labels,
            bank,
            pools,
            anchors,
        })
    }

    /// One contrastive ascent step over the encoder, scaled by `w`.
    /// Returns the contrastive objective before the update. With `w = 0`
    /// nothing is updated.
    pub fn stage2_step(&mut self, graphs: &[Graph], bank: &AnchorBank, anchors: &ContrastAnchors, lambda: f64) -> Result<f64> {
        if graphs.is_empty() {
            return Err(Error::InvalidConfig("no training graphs"));
        }
        let cfg = &self.config;
        let model = &self.state.model;
        let update = cfg.w > 0.0;
        let mut tape = Tape::new();
        let enc = model.encoder.register(&mut tape, update)?;
        let base = tape.len();
        let m = graphs.len() as f64;
        let mut total = 0.0;
        for g in graphs {
            let x = tape.constant(g.attrs().clone())?;
            let prop = tape.constant(normalized_propagation(&g.adjacency()))?;
            let z = encode(&mut tape, x, prop, &enc)?;
            let fused = mixup_with_lambda(&mut tape, z, bank, lambda, cfg.mixup_mode)?;
            let z_graph = readout(&mut tape, fused)?;
            let loss = contrastive_loss(&mut tape, z_graph, &anchors.positives, &anchors.negatives, cfg.temp)?;
            total += tape.value(loss).item();
            if update {
                // ascend L_cont: descend -w * L_cont / M
                let objective = tape.scale(loss, -cfg.w / m)?;
                tape.backward(objective)?;
            }
            tape.truncate(base);
        }
        if update {
            let grads = collect_grads(&tape, enc.weights(), &model.encoder.weights);
            let state = &mut self.state;
            state.encoder_opt.step(&mut state.model.encoder.weights, &grads)?;
        }
        Ok(total / m)
    }

    /// Runs one epoch and returns its record (with `seconds = 0`) and the
    /// refresh it used.
    pub fn epoch(&mut self, graphs: &[Graph], index: usize) -> Result<(EpochRecord, Refresh)> {
        let perturbed = self.perturb(graphs)?;
        let mut recon = 0.0;
        for _ in 0..self.config.s1_steps {
            recon = self.stage1_step_with(graphs, &perturbed)?;
        }
        let refresh = self.refresh(graphs)?;
        let mut contrast = None;
        if self.config.w > 0.0 && self.config.s2_steps > 0 {
            let lambda = draw_lambda(self.config.lambda_interval, &mut self.rng)?;
            for _ in 0..self.config.s2_steps {
                contrast = Some(self.stage2_step(graphs, &refresh.bank, &refresh.anchors, lambda)?);
            }
        }
        let record = EpochRecord {
            epoch: index,
            recon_loss: recon,
            contrast_loss: contrast,
            flagged: refresh.labels.flagged_count(),
            seconds: 0.0,
        };
        Ok((record, refresh))
    }

    pub fn into_state(self) -> ModelState {
        self.state
    }
}

fn collect_grads(tape: &Tape, vars: &[Var], params: &[Matrix]) -> Vec<Option<Matrix>> {
    vars.iter()
        .zip(params)
        .map(|(&v, p)| Some(tape.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols()))))
        .collect()
}

/// Source of elapsed seconds for [`TrainHistory`].
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Reports zero for every epoch.
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

pub fn train(graphs: &[Graph], config: &TrainConfig) -> Result<TrainOutput> {
    train_with_clock(graphs, config, &NoClock)
}

/// Full training run; deterministic in `config.seed` apart from the
/// wall-clock column.
pub fn train_with_clock(graphs: &[Graph], config: &TrainConfig, clock: &dyn Clock) -> Result<TrainOutput> {
    let first = graphs.first().ok_or(Error::InvalidConfig("training split is empty"))?;
    let mut trainer = Trainer::new(config.clone(), first.attr_dim())?;
    let mut history = TrainHistory::default();
    let mut bank = None;
    for epoch in 0..config.epochs {
        let start = clock.seconds();
        let (mut record, refresh) = trainer.epoch(graphs, epoch)?;
        record.seconds = clock.seconds() - start;
        history.epochs.push(record);
        bank = Some(refresh.bank);
    }
    Ok(TrainOutput {
        state: trainer.into_state(),
        history,
        bank,
    })
}
