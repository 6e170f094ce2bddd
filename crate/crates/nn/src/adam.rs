use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one buffer per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// One bias-corrected Adam update of every parameter in `params`.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NnError::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.1.len() != g.len() || m.len() != g.len() {
            return Err(NnError::ShapeMismatch(format!("adam: gradient for {} has wrong size", p.0)));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .tensors_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((pi, gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let mhat = *mi / bc1;
            let vhat = *vi / bc2;
            *pi -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("x", Tensor::scalar(v));
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_store(2.0);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        adam_step(&mut p, &[Tensor::scalar(1.0)], &mut st, cfg).unwrap();
        // mhat = 1, vhat = 1 -> delta = lr / (1 + eps)
        let moved = 2.0 - p.iter().next().unwrap().1.data()[0];
        assert!((moved - 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = scalar_store(1.25);
        let mut st = AdamState::new(&p);
        st.m[0][0] = 0.0;
        adam_step(&mut p, &[Tensor::scalar(0.0)], &mut st, AdamConfig::default()).unwrap();
        assert_eq!(p.iter().next().unwrap().1.data()[0], 1.25);
        st.m[0][0] = 0.5;
        st.v[0][0] = 0.25;
        let mut q = scalar_store(0.0);
        adam_step(&mut q, &[Tensor::scalar(0.0)], &mut st, AdamConfig { lr: 0.0, ..Default::default() })
            .unwrap();
        assert!((st.m[0][0] - 0.45).abs() < 1e-15);
        assert!((st.v[0][0] - 0.25 * 0.999).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = scalar_store(0.0);
        let mut st = AdamState::new(&p);
        let err = adam_step(&mut p, &[Tensor::zeros(vec![2])], &mut st, AdamConfig::default());
        assert!(matches!(err, Err(NnError::ShapeMismatch(_))));
    }
}
