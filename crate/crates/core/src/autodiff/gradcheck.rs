use crate::error::Result;
use crate::matrix::Matrix;

use super::tape::{Tape, Var};

/// Largest relative disagreement between the tape gradient of `f` at `x`
/// and a central finite difference with step `h`:
/// `max |analytic - fd| / max(1, |fd|)` over the entries of `x`.
pub fn grad_check<F>(f: F, x: &Matrix, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.param(x.clone())?;
    let loss = f(&mut tape, xv)?;
    tape.backward(loss)?;
    let analytic = match tape.grad(xv) {
        Some(g) => g.clone(),
        None => Matrix::zeros(x.rows(), x.cols()),
    };

    let eval = |probe: Matrix| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.param(probe)?;
        let out = f(&mut t, v)?;
        Ok(t.value(out).item())
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.as_slice().len() {
        let mut plus = x.clone();
        plus.as_mut_slice()[i] += h;
        let mut minus = x.clone();
        minus.as_mut_slice()[i] -= h;
        let fd = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let err = libm::fabs(analytic.as_slice()[i] - fd) / libm::fabs(fd).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
