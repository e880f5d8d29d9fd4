use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates for every parameter, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: ParamStore,
    pub v: ParamStore,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        AdamState { config, m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }
}

/// One bias-corrected Adam update. `maximize` turns it into gradient ascent.
///
/// A non-finite gradient aborts before anything is modified.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &ParamStore,
    state: &mut AdamState,
    maximize: bool,
) -> Result<()> {
    if !params.same_layout(grads) || !params.same_layout(&state.m) {
        return Err(Error::dim("adam_step", "parameter, gradient and moment layouts differ"));
    }
    for (name, g) in grads.iter() {
        if let Some(bad) = g.data().iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("gradient of {name} at entry {bad} (step {})", state.t + 1),
            });
        }
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    let sign = if maximize { 1.0 } else { -1.0 };
    for i in 0..params.len() {
        let g = grads.matrix(i).data();
        let m = state.m.matrix_mut(i).data_mut();
        for (mj, gj) in m.iter_mut().zip(g) {
            *mj = beta1 * *mj + (1.0 - beta1) * gj;
        }
        let v = state.v.matrix_mut(i).data_mut();
        for (vj, gj) in v.iter_mut().zip(g) {
            *vj = beta2 * *vj + (1.0 - beta2) * gj * gj;
        }
        let (m, v) = (state.m.matrix(i).data(), state.v.matrix(i).data());
        let p = params.matrix_mut(i).data_mut();
        for ((pj, mj), vj) in p.iter_mut().zip(m).zip(v) {
            let m_hat = mj / bc1;
            let v_hat = vj / bc2;
            *pj += sign * lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;

    fn scalar_store(x: f64) -> ParamStore {
        let mut p = ParamStore::new();
        p.insert("x", Matrix::scalar(x));
        p
    }

    #[test]
    fn first_step_moves_by_about_lr_toward_ascent() {
        for g in [2.5, -0.01, 1e3] {
            let mut p = scalar_store(1.0);
            let mut s = AdamState::new(&p, AdamConfig::default());
            adam_step(&mut p, &scalar_store(g), &mut s, true).unwrap();
            let delta = p.matrix(0).data()[0] - 1.0;
            assert_eq!(delta.signum(), g.signum());
            assert!((0.9e-3..=1e-3).contains(&delta.abs()), "delta {delta}");
            assert_eq!(s.t, 1);
        }
    }

    #[test]
    fn descent_moves_against_the_gradient() {
        let mut p = scalar_store(0.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &scalar_store(4.0), &mut s, false).unwrap();
        assert!(p.matrix(0).data()[0] < 0.0);
    }

    #[test]
    fn zero_gradient_keeps_params_and_counts_the_step() {
        let mut p = scalar_store(0.3);
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &scalar_store(0.0), &mut s, true).unwrap();
        assert_eq!(p.matrix(0).data()[0], 0.3);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn identical_inputs_give_identical_results() {
        let run = || {
            let mut p = scalar_store(0.7);
            let mut s = AdamState::new(&p, AdamConfig::default());
            for g in [0.3, -1.2, 0.05] {
                adam_step(&mut p, &scalar_store(g), &mut s, true).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut p = scalar_store(0.3);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let err = adam_step(&mut p, &scalar_store(f64::NAN), &mut s, true).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!(s.t, 0);
        assert_eq!(p.matrix(0).data()[0], 0.3);
    }
}
