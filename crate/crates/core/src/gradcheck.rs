//! Finite-difference verification of tape gradients.

use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::model::{build_model, model_forward_taped, ModelConfig, ModelLeaves};
use crate::tape::Tape;
use crate::tensor::{seeded_rng, FeatureMatrix};

pub const FD_STEP: f64 = 1e-6;
/// Gradients below this magnitude are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compares `analytic` against central differences of `loss` at the given
/// coordinates of `x`.
pub fn check_coordinates(
    x: &[f64],
    analytic: &[f64],
    indices: &[usize],
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut probe = x.to_vec();
    let mut report = GradCheckReport { checked: 0, max_rel_err: 0.0, worst_index: 0 };
    for &i in indices {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let up = loss(&probe)?;
        probe[i] = orig - FD_STEP;
        let down = loss(&probe)?;
        probe[i] = orig;
        let err = rel_error(analytic[i], (up - down) / (2.0 * FD_STEP));
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Checks every coordinate of `x`.
pub fn check_all(x: &[f64], analytic: &[f64], loss: impl FnMut(&[f64]) -> Result<f64>) -> Result<GradCheckReport> {
    let idx: Vec<usize> = (0..x.len()).collect();
    check_coordinates(x, analytic, &idx, loss)
}

/// Gradient check of a whole model built from `config`.
///
/// The scalar under test is a fixed random projection of the embedding of a
/// random `input_dim x frames` input. At most `max_params` parameters
/// (chosen at random when there are more) and every input value are
/// checked.
pub fn check_model(config: &ModelConfig, seed: u64, frames: usize, max_params: usize) -> Result<GradCheckReport> {
    let model = build_model(config, seed)?;
    let mut rng = seeded_rng(seed.wrapping_add(1));
    let input = FeatureMatrix::from_fn(config.input_dim, frames, |_, _| rng.random_range(-1.0..1.0));
    let proj: Vec<f64> = (0..config.embedding_dim).map(|_| rng.random_range(-1.0..1.0)).collect();

    let eval = |params: &[f64], input: &FeatureMatrix, want_grads: bool| -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let mut m = model.clone();
        m.set_params_flat(params)?;
        let mut tape = Tape::new();
        let leaves = ModelLeaves::register(&mut tape, &m);
        let x = tape.leaf(input.clone());
        let emb = model_forward_taped(&mut tape, &m, &leaves, x)?;
        let value: f64 = tape.value(emb).data().iter().zip(&proj).map(|(a, b)| a * b).sum();
        if !want_grads {
            return Ok((value, Vec::new(), Vec::new()));
        }
        let r = tape.leaf(FeatureMatrix::new(proj.len(), 1, proj.clone())?);
        let prod = tape_dot(&mut tape, emb, r)?;
        let grads = tape.backward(prod, 1.0)?;
        Ok((value, leaves.flat_grads(&tape, &grads), grads.wrt(&tape, x).into_data()))
    };

    let params = model.params_flat();
    let (_, gp, gx) = eval(&params, &input, true)?;
    let idx: Vec<usize> = if params.len() <= max_params {
        (0..params.len()).collect()
    } else {
        let mut v = sample(&mut rng, params.len(), max_params).into_vec();
        v.sort_unstable();
        v
    };
    let p_report = check_coordinates(&params, &gp, &idx, |p| Ok(eval(p, &input, false)?.0))?;
    let x_report = check_all(input.data(), &gx, |xs| {
        let f = FeatureMatrix::new(input.channels(), input.frames(), xs.to_vec())?;
        Ok(eval(&params, &f, false)?.0)
    })?;
    Ok(GradCheckReport {
        checked: p_report.checked + x_report.checked,
        max_rel_err: Float::max(p_report.max_rel_err, x_report.max_rel_err),
        worst_index: if x_report.max_rel_err > p_report.max_rel_err {
            params.len() + x_report.worst_index
        } else {
            p_report.worst_index
        },
    })
}

/// `sum(a * b)` for two column nodes of equal shape, built from tape ops.
fn tape_dot(tape: &mut Tape, a: crate::tape::NodeId, b: crate::tape::NodeId) -> Result<crate::tape::NodeId> {
    let prod = tape.mul(a, b)?;
    tape.sum(prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_error_floor() {
        assert_eq!(rel_error(1e-9, 0.0), 1e-6);
        assert_eq!(rel_error(2.0, 1.0), 0.5);
    }

    #[test]
    fn quadratic() {
        let x = [0.5, -1.5, 2.0];
        let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = check_all(&x, &g, |p| Ok(p.iter().map(|v| v * v).sum())).unwrap();
        assert!(r.passes(1e-8), "{r:?}");
        let bad = [1.0, -3.0, 0.0];
        assert!(!check_all(&x, &bad, |p| Ok(p.iter().map(|v| v * v).sum())).unwrap().passes(1e-2));
    }

    #[test]
    fn tiny_model() {
        let config = ModelConfig::with_tm(8, 4, 0.0, 8, 2);
        let r = check_model(&config, 5, 6, usize::MAX).unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }
}
