use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed, ordered list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Matrix]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        AdamState {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. `grads[i]` belongs to `params[i]`.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Option<Matrix>]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: (params.len(), 0),
                rhs: (self.first.len(), 0),
            });
        }
        for i in 0..params.len() {
            match grads.get(i) {
                Some(Some(g)) if g.shape() == params[i].shape() => {}
                Some(Some(g)) => {
                    return Err(Error::ShapeMismatch {
                        op: "adam_step",
                        lhs: params[i].shape(),
                        rhs: g.shape(),
                    })
                }
                _ => return Err(Error::MissingGradient(i)),
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);

        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].as_ref().expect("checked above");
            let m = self.first[i].as_mut_slice();
            let v = self.second[i].as_mut_slice();
            for (((pv, &gv), mv), vv) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}
