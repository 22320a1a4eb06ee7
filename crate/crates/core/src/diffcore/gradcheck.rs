//! Central-difference verification of reverse-mode gradients.

use crate::error::{Error, Result};

use super::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Coordinate excluded from the comparison because the function has a kink
/// there (one-sided slopes disagree), e.g. `relu` at exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkippedCoord {
    pub input: usize,
    pub index: usize,
    pub left_slope: f64,
    pub right_slope: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub skipped: Vec<SkippedCoord>,
}

impl GradCheckReport {
    pub fn merge(&mut self, other: GradCheckReport) {
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
            self.worst = other.worst.or(self.worst);
        }
        self.checked += other.checked;
        self.skipped.extend(other.skipped);
    }
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn eval(f: &impl Fn() -> Result<Tensor>) -> Result<f64> {
    let y = f()?;
    if y.shape() != (1, 1) {
        return Err(Error::NonScalarLoss(y.shape()));
    }
    Ok(y.item())
}

/// Compare the reverse-mode gradient of `f` with respect to every coordinate
/// of every tensor in `inputs` against central differences.
///
/// `f` must rebuild its graph from the current values of `inputs` on every
/// call; the inputs are perturbed in place and restored afterwards. The step
/// for coordinate `i` is `step * max(1, |x_i|)`. The reported error is
/// `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: Option<f64>) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
{
    let step = step.unwrap_or(DEFAULT_STEP);
    inputs.iter().for_each(Tensor::zero_grad);
    let y = f()?;
    if y.shape() != (1, 1) {
        return Err(Error::NonScalarLoss(y.shape()));
    }
    let f0 = y.item();
    y.backward()?;
    drop(y);
    let analytic: Vec<Vec<f64>> = inputs.iter().map(Tensor::grad).collect();
    inputs.iter().for_each(Tensor::zero_grad);

    let mut report = GradCheckReport::default();
    for (k, x) in inputs.iter().enumerate() {
        for i in 0..x.len() {
            let x0 = x.data()[i];
            let h = step * x0.abs().max(1.0);
            x.data_mut()[i] = x0 + h;
            let plus = eval(&f);
            x.data_mut()[i] = x0 - h;
            let minus = eval(&f);
            x.data_mut()[i] = x0;
            let (plus, minus) = (plus?, minus?);

            let right = (plus - f0) / h;
            let left = (f0 - minus) / h;
            if (right - left).abs() > 1e-3 * 1f64.max(right.abs()).max(left.abs()) {
                report.skipped.push(SkippedCoord {
                    input: k,
                    index: i,
                    left_slope: left,
                    right_slope: right,
                });
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = rel_error(analytic[k][i], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((k, i));
            }
        }
    }
    Ok(report)
}
