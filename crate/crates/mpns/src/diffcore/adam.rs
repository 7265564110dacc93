//! Adam optimizer over [`ParamSet`]-shaped parameters.

use crate::error::{Error, Result};

use super::{MlpSpec, ParamSet};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("adam lr {} must be > 0", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("adam {name} {b} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "adam epsilon {} must be > 0",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// First/second moment estimates plus the step counter for one network.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimState {
    m: ParamSet,
    v: ParamSet,
    step: u64,
    hyper: AdamParams,
}

impl OptimState {
    pub fn new(spec: &MlpSpec, hyper: AdamParams) -> Result<Self> {
        hyper.validate()?;
        Ok(OptimState {
            m: ParamSet::zeros(spec),
            v: ParamSet::zeros(spec),
            step: 0,
            hyper,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn hyper(&self) -> &AdamParams {
        &self.hyper
    }
}

/// One Adam update: advances the step counter, updates both moment
/// estimates, and applies the bias-corrected update in place.
///
/// Zero gradients leave the parameters exactly unchanged (the update term
/// is `0 / (0 + epsilon) = 0`), though moments still decay.
pub fn adam_step(params: &mut ParamSet, grads: &ParamSet, state: &mut OptimState) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(Error::ShapeMismatch {
            context: "adam_step",
            expected: params.param_count(),
            got: grads.param_count(),
        });
    }
    debug_assert!(grads.all_finite(), "adam_step received non-finite gradients");
    state.step += 1;
    let t = state.step;
    let AdamParams { lr, beta1, beta2, epsilon } = state.hyper;
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);

    params.revision += 1;
    for li in 0..params.layers.len() {
        let p = &mut params.layers[li];
        let g = &grads.layers[li];
        let m = &mut state.m.layers[li];
        let v = &mut state.v.layers[li];
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };
        for i in 0..p.weights.len() {
            update(&mut p.weights[i], g.weights[i], &mut m.weights[i], &mut v.weights[i]);
        }
        for i in 0..p.biases.len() {
            update(&mut p.biases[i], g.biases[i], &mut m.biases[i], &mut v.biases[i]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{Activation, MlpSpec};
    use crate::seeds;

    fn tiny_spec() -> MlpSpec {
        MlpSpec::new(2, vec![3], 1, Activation::Sigmoid)
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let spec = tiny_spec();
        let mut params = ParamSet::init(&spec, &mut seeds::stream_rng(1, 0));
        let before = params.flat_values();
        let grads = ParamSet::zeros(&spec);
        let mut state = OptimState::new(&spec, AdamParams::default()).unwrap();
        for _ in 0..5 {
            adam_step(&mut params, &grads, &mut state).unwrap();
        }
        assert_eq!(params.flat_values(), before);
        assert_eq!(state.step(), 5);
    }

    #[test]
    fn first_step_matches_closed_form() {
        // With m = (1-b1)g, v = (1-b2)g^2, bias correction gives
        // m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps).
        let spec = MlpSpec::new(1, vec![], 1, Activation::Linear);
        let mut params = ParamSet::zeros(&spec);
        params.layer_mut(0).weights[0] = 0.7;
        let mut grads = ParamSet::zeros(&spec);
        grads.layer_mut(0).weights[0] = -3.0;
        let hyper = AdamParams::default();
        let mut state = OptimState::new(&spec, hyper).unwrap();
        adam_step(&mut params, &grads, &mut state).unwrap();
        let expected = 0.7 - hyper.lr * (-3.0) / (3.0 + hyper.epsilon);
        assert!((params.layers()[0].weights[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn update_is_sign_symmetric() {
        let spec = MlpSpec::new(1, vec![], 1, Activation::Linear);
        let run = |g: f64| -> f64 {
            let mut params = ParamSet::zeros(&spec);
            let mut grads = ParamSet::zeros(&spec);
            grads.layer_mut(0).weights[0] = g;
            let mut state = OptimState::new(&spec, AdamParams::default()).unwrap();
            for _ in 0..10 {
                adam_step(&mut params, &grads, &mut state).unwrap();
            }
            params.layers()[0].weights[0]
        };
        assert_eq!(run(2.5), -run(-2.5));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let spec = tiny_spec();
        let other = MlpSpec::new(2, vec![4], 1, Activation::Sigmoid);
        let mut params = ParamSet::zeros(&spec);
        let grads = ParamSet::zeros(&other);
        let mut state = OptimState::new(&spec, AdamParams::default()).unwrap();
        assert!(adam_step(&mut params, &grads, &mut state).is_err());
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        let spec = tiny_spec();
        for bad in [
            AdamParams { lr: 0.0, ..AdamParams::default() },
            AdamParams { beta1: 1.0, ..AdamParams::default() },
            AdamParams { beta2: -0.1, ..AdamParams::default() },
            AdamParams { epsilon: 0.0, ..AdamParams::default() },
        ] {
            assert!(OptimState::new(&spec, bad).is_err());
        }
    }

    #[test]
    fn descends_a_simple_quadratic() {
        // Minimize (w - 2)^2 by feeding its gradient; Adam should converge
        // close to 2 within a few hundred steps at lr 0.05.
        let spec = MlpSpec::new(1, vec![], 1, Activation::Linear);
        let mut params = ParamSet::zeros(&spec);
        let hyper = AdamParams { lr: 0.05, ..AdamParams::default() };
        let mut state = OptimState::new(&spec, hyper).unwrap();
        for _ in 0..500 {
            let w = params.layers()[0].weights[0];
            let mut grads = ParamSet::zeros(&spec);
            grads.layer_mut(0).weights[0] = 2.0 * (w - 2.0);
            adam_step(&mut params, &grads, &mut state).unwrap();
        }
        assert!((params.layers()[0].weights[0] - 2.0).abs() < 1e-3);
    }
}
