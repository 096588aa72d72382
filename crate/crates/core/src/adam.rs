//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor4};

/// First/second moment accumulators and hyperparameters for one parameter
/// set. Slots are aligned with the order in which the owner exposes its
/// trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    moments: Vec<(Tensor4, Tensor4)>,
}

impl AdamState {
    /// Fresh state for the given parameters (moments all zero).
    pub fn new(params: &[&Parameter], lr: f32) -> Self {
        let moments = params
            .iter()
            .map(|p| {
                let s = p.value.shape();
                (Tensor4::zeros(s), Tensor4::zeros(s))
            })
            .collect();
        AdamState {
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            moments,
        }
    }

    pub fn second_moments_nonnegative(&self) -> bool {
        self.moments
            .iter()
            .all(|(_, v)| v.data().iter().all(|&x| x >= 0.0))
    }
}

/// One Adam update over `params` using the gradients accumulated in their
/// `grad` buffers. Gradients are left untouched; the caller zeroes them.
/// A non-finite gradient aborts the step before any parameter is modified.
pub fn adam_step(params: &mut [&mut Parameter], state: &mut AdamState) -> Result<()> {
    if params.len() != state.moments.len() {
        return Err(Error::ShapeMismatch {
            context: "adam_step slots",
            expected: format!("{} parameters", state.moments.len()),
            got: format!("{}", params.len()),
        });
    }
    for (i, p) in params.iter().enumerate() {
        if !p.grad.is_finite() {
            return Err(Error::NumericalFailure {
                frame: None,
                detail: format!("non-finite gradient in parameter {i}"),
            });
        }
        if p.value.shape() != state.moments[i].0.shape() {
            return Err(Error::ShapeMismatch {
                context: "adam_step moment shape",
                expected: format!("{:?}", state.moments[i].0.shape()),
                got: format!("{:?}", p.value.shape()),
            });
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (p, (m, v)) in params.iter_mut().zip(state.moments.iter_mut()) {
        if !p.trainable {
            continue;
        }
        let g = p.grad.data();
        let val = p.value.data_mut();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..g.len() {
            let gi = g[i];
            md[i] = state.beta1 * md[i] + (1.0 - state.beta1) * gi;
            vd[i] = state.beta2 * vd[i] + (1.0 - state.beta2) * gi * gi;
            let mhat = md[i] / bc1;
            let vhat = vd[i] / bc2;
            val[i] -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Resets every gradient buffer to zero; values are untouched.
pub fn zero_grads(params: &mut [&mut Parameter]) {
    for p in params.iter_mut() {
        p.zero_grad();
    }
}
