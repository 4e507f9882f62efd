//! Graph autoencoder: edge-dropout perturbation, a GCN encoder, an
//! inner-product structure decoder and a GCN attribute decoder.

use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{adjacency_from_edges, Graph};
use crate::matrix::Matrix;
use crate::EPS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub attr_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl ModelConfig {
    pub fn new(attr_dim: usize) -> Self {
        ModelConfig {
            attr_dim,
            hidden: 64,
            layers: 2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.attr_dim == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::InvalidConfig("attr_dim, hidden and layers must be positive"));
        }
        Ok(())
    }
}

/// Drops each undirected edge independently with probability `drop_rate`.
pub fn perturb_edges<R: Rng + ?Sized>(g: &Graph, drop_rate: f64, rng: &mut R) -> Result<Matrix> {
    if !(0.0..1.0).contains(&drop_rate) {
        return Err(Error::InvalidConfig("drop_rate must lie in [0, 1)"));
    }
    if drop_rate == 0.0 {
        return Ok(g.adjacency());
    }
    let kept = g
        .edges()
        .iter()
        .copied()
        .filter(|_| !rng.random_bool(drop_rate))
        .collect::<Vec<_>>();
    Ok(adjacency_from_edges(g.node_count(), kept.into_iter()))
}

/// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
pub fn normalized_propagation(adj: &Matrix) -> Matrix {
    let n = adj.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / libm::sqrt(adj.row(i).iter().sum::<f64>() + 1.0))
        .collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a = adj[(i, j)] + if i == j { 1.0 } else { 0.0 };
            if a != 0.0 {
                out[(i, j)] = inv_sqrt[i] * a * inv_sqrt[j];
            }
        }
    }
    out
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.random_range(-bound..bound);
    }
    m
}

/// Encoder weights `W^(0..L)`; the first maps `attr_dim -> hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub weights: Vec<Matrix>,
}

/// Structure head (graph conv + linear producing `H`) and attribute head
/// (graph conv + linear producing `X̂`), stored in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub weights: Vec<Matrix>,
}

impl DecoderParams {
    pub const STRUCT_CONV: usize = 0;
    pub const STRUCT_LINEAR: usize = 1;
    pub const ATTR_CONV: usize = 2;
    pub const ATTR_LINEAR: usize = 3;
}

#[derive(Debug, Clone)]
pub struct EncoderVars {
    weights: Vec<Var>,
}

impl EncoderVars {
    /// Wraps already-recorded tape variables, in parameter order.
    pub fn from_vars(weights: Vec<Var>) -> Self {
        EncoderVars { weights }
    }

    pub fn weights(&self) -> &[Var] {
        &self.weights
    }
}

#[derive(Debug, Clone)]
pub struct DecoderVars {
    weights: Vec<Var>,
}

impl DecoderVars {
    /// Wraps already-recorded tape variables, in parameter order.
    pub fn from_vars(weights: Vec<Var>) -> Self {
        DecoderVars { weights }
    }

    pub fn weights(&self) -> &[Var] {
        &self.weights
    }
}

fn register(tape: &mut Tape, mats: &[Matrix], trainable: bool) -> Result<Vec<Var>> {
    mats.iter()
        .map(|m| {
            if trainable {
                tape.param(m.clone())
            } else {
                tape.constant(m.clone())
            }
        })
        .collect()
}

impl EncoderParams {
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Result<EncoderVars> {
        Ok(EncoderVars {
            weights: register(tape, &self.weights, trainable)?,
        })
    }
}

impl DecoderParams {
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Result<DecoderVars> {
        Ok(DecoderVars {
            weights: register(tape, &self.weights, trainable)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphAutoencoder {
    pub config: ModelConfig,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

impl GraphAutoencoder {
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let mut enc = Vec::with_capacity(config.layers);
        enc.push(glorot(config.attr_dim, h, rng));
        for _ in 1..config.layers {
            enc.push(glorot(h, h, rng));
        }
        let dec = alloc::vec![
            glorot(h, h, rng),
            glorot(h, h, rng),
            glorot(h, h, rng),
            glorot(h, config.attr_dim, rng),
        ];
        Ok(GraphAutoencoder {
            config,
            encoder: EncoderParams { weights: enc },
            decoder: DecoderParams { weights: dec },
        })
    }

    /// Rebuilds a model from stored matrices, checking their shapes.
    pub fn from_parts(encoder: EncoderParams, decoder: DecoderParams) -> Result<Self> {
        let first = encoder.weights.first().ok_or(Error::InvalidConfig("encoder has no layers"))?;
        let config = ModelConfig {
            attr_dim: first.rows(),
            hidden: first.cols(),
            layers: encoder.weights.len(),
        };
        let (d, h) = (config.attr_dim, config.hidden);
        let expect_enc = encoder.weights.iter().enumerate().all(|(i, w)| {
            w.shape() == if i == 0 { (d, h) } else { (h, h) }
        });
        let expected_dec = [(h, h), (h, h), (h, h), (h, d)];
        let expect_dec = decoder.weights.len() == 4
            && decoder.weights.iter().zip(expected_dec).all(|(w, s)| w.shape() == s);
        if !expect_enc || !expect_dec {
            return Err(Error::InvalidConfig("parameter shapes are inconsistent"));
        }
        Ok(GraphAutoencoder {
            config,
            encoder,
            decoder,
        })
    }

    /// Clean-adjacency forward pass with no trainable leaves.
    pub fn reconstruct(&self, g: &Graph) -> Result<Reconstruction> {
        let mut tape = Tape::new();
        let enc = self.encoder.register(&mut tape, false)?;
        let dec = self.decoder.register(&mut tape, false)?;
        let x = tape.constant(g.attrs().clone())?;
        let prop = tape.constant(normalized_propagation(&g.adjacency()))?;
        let z = encode(&mut tape, x, prop, &enc)?;
        let a_hat = decode_structure(&mut tape, z, prop, &dec)?;
        let x_hat = decode_attributes(&mut tape, z, prop, &dec)?;
        Ok(Reconstruction {
            z_node: tape.value(z).clone(),
            a_hat: tape.value(a_hat).clone(),
            x_hat: tape.value(x_hat).clone(),
        })
    }

    /// Node embeddings on the clean adjacency.
    pub fn embed_nodes(&self, g: &Graph) -> Result<Matrix> {
        let mut tape = Tape::new();
        let enc = self.encoder.register(&mut tape, false)?;
        let x = tape.constant(g.attrs().clone())?;
        let prop = tape.constant(normalized_propagation(&g.adjacency()))?;
        let z = encode(&mut tape, x, prop, &enc)?;
        Ok(tape.value(z).clone())
    }

    /// Mean-readout graph embedding on the clean adjacency.
    pub fn embed_graph(&self, g: &Graph) -> Result<Matrix> {
        let z = self.embed_nodes(g)?;
        if z.rows() == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(z.col_mean())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub z_node: Matrix,
    pub a_hat: Matrix,
    pub x_hat: Matrix,
}

fn check_prop(tape: &Tape, h: Var, prop: Var, op: &'static str) -> Result<()> {
    let (n, m) = tape.shape(prop);
    if n != m || n != tape.shape(h).0 {
        return Err(Error::ShapeMismatch {
            op,
            lhs: tape.shape(prop),
            rhs: tape.shape(h),
        });
    }
    Ok(())
}

fn graph_conv(tape: &mut Tape, h: Var, prop: Var, w: Var) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    tape.matmul(prop, hw)
}

/// `L` graph convolutions `P H W`, ReLU between layers, linear output.
/// `prop` is the normalized propagation matrix of the (perturbed) adjacency.
pub fn encode(tape: &mut Tape, x: Var, prop: Var, enc: &EncoderVars) -> Result<Var> {
    check_prop(tape, x, prop, "encode")?;
    let mut h = x;
    let last = enc.weights.len() - 1;
    for (l, &w) in enc.weights.iter().enumerate() {
        h = graph_conv(tape, h, prop, w)?;
        if l < last {
            h = tape.relu(h)?;
        }
    }
    Ok(h)
}

/// `Â = clamp(σ(H Hᵀ), ε, 1 - ε)` with `H = ReLU(P Z W_conv) W_lin`.
pub fn decode_structure(tape: &mut Tape, z: Var, prop: Var, dec: &DecoderVars) -> Result<Var> {
    check_prop(tape, z, prop, "decode_structure")?;
    let conv = graph_conv(tape, z, prop, dec.weights[DecoderParams::STRUCT_CONV])?;
    let conv = tape.relu(conv)?;
    let h = tape.matmul(conv, dec.weights[DecoderParams::STRUCT_LINEAR])?;
    let ht = tape.transpose(h)?;
    let logits = tape.matmul(h, ht)?;
    let probs = tape.sigmoid(logits)?;
    tape.clamp(probs, EPS, 1.0 - EPS)
}

/// `X̂ = ReLU(P Z W_conv) W_lin`.
pub fn decode_attributes(tape: &mut Tape, z: Var, prop: Var, dec: &DecoderVars) -> Result<Var> {
    check_prop(tape, z, prop, "decode_attributes")?;
    let conv = graph_conv(tape, z, prop, dec.weights[DecoderParams::ATTR_CONV])?;
    let conv = tape.relu(conv)?;
    tape.matmul(conv, dec.weights[DecoderParams::ATTR_LINEAR])
}

/// Mean over nodes.
pub fn readout(tape: &mut Tape, z: Var) -> Result<Var> {
    tape.colmean(z)
}
