//! Dense MLP kernels with taped reverse-mode differentiation.
//!
//! This is deliberately small: fully-connected layers, ReLU hidden
//! activations, a linear or sigmoid output head, and a Wengert-style tape
//! recorded during the forward pass so gradients can be computed without
//! recomputation. Everything is `f64` and every reduction has a fixed
//! summation order, so identical inputs give bitwise-identical outputs
//! within one build.

mod adam;

pub use adam::{adam_step, AdamParams, OptimState};

use rand::Rng;

use crate::error::{Error, Result};

/// Probability outputs are clamped into `[SIGMOID_CLAMP, 1 - SIGMOID_CLAMP]`
/// so log-based losses never see exact 0 or 1.
pub const SIGMOID_CLAMP: f64 = 1e-7;

/// Element-wise activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    Sigmoid,
}

/// Architecture of one MLP: layer widths plus activations.
///
/// Hidden layers always use ReLU; the output head is linear or sigmoid.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        output_activation: Activation,
    ) -> Self {
        MlpSpec {
            input_dim,
            hidden_dims,
            output_dim,
            hidden_activation: Activation::Relu,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "all MLP dimensions must be >= 1".into(),
            ));
        }
        if self.hidden_activation != Activation::Relu {
            return Err(Error::InvalidConfig(
                "hidden activation must be relu".into(),
            ));
        }
        if self.output_activation == Activation::Relu {
            return Err(Error::InvalidConfig(
                "output activation must be linear or sigmoid".into(),
            ));
        }
        Ok(())
    }

    /// Layer widths from input to output, e.g. `[20, 64, 32, 8]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    /// Total parameter count: sum of `(fan_in + 1) * fan_out` over layer pairs.
    pub fn param_count(&self) -> usize {
        let dims = self.layer_dims();
        dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn n_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

/// One dense layer's parameters. Weights are row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }
}

/// All parameters of one MLP (also used for gradient accumulators and
/// optimizer moments, which share the shape).
///
/// Mutation goes through [`ParamSet::layer_mut`] / [`ParamSet::layers_mut`],
/// which bump an internal revision counter. Tapes record the revision they
/// were taken against, so a backward pass with an out-of-date tape fails
/// instead of silently producing wrong gradients.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParamSet {
    layers: Vec<Layer>,
    #[serde(default)]
    revision: u64,
}

impl ParamSet {
    /// Zero-initialized parameters for `spec`.
    pub fn zeros(spec: &MlpSpec) -> Self {
        let dims = spec.layer_dims();
        let layers = dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        ParamSet { layers, revision: 0 }
    }

    /// Glorot-style uniform init: weights in `±sqrt(6 / (fan_in + fan_out))`,
    /// biases zero. Weight draw order is row-major per layer, layers in order.
    pub fn init<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut set = ParamSet::zeros(spec);
        for layer in &mut set.layers {
            let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        set
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, idx: usize) -> &mut Layer {
        self.revision += 1;
        &mut self.layers[idx]
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.revision += 1;
        &mut self.layers
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn matches_spec(&self, spec: &MlpSpec) -> bool {
        let dims = spec.layer_dims();
        self.layers.len() == dims.len() - 1
            && self
                .layers
                .iter()
                .zip(dims.windows(2))
                .all(|(l, w)| l.in_dim == w[0] && l.out_dim == w[1])
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Sets every entry to zero without changing shape.
    pub fn reset_zero(&mut self) {
        self.revision += 1;
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v = 0.0);
            l.biases.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Multiplies every entry by `c`.
    pub fn scale(&mut self, c: f64) {
        self.revision += 1;
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v *= c);
            l.biases.iter_mut().for_each(|v| *v *= c);
        }
    }

    /// Flat view of all parameters in stable order (per layer: weights
    /// row-major, then biases).
    pub fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }
}

/// Forward-pass record for one input: pre-activations and activations per
/// layer, plus the shape/revision stamp of the parameters used.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeRecord {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    dims: Vec<usize>,
    revision: u64,
}

impl TapeRecord {
    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    pub fn activations(&self) -> &[Vec<f64>] {
        &self.post
    }

    pub fn output(&self) -> &[f64] {
        self.post.last().expect("tape has at least one layer")
    }
}

/// Dot product with a fixed 4-lane summation order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

#[inline]
fn sigmoid_clamped(z: f64) -> f64 {
    let s = 1.0 / (1.0 + (-z).exp());
    s.clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
}

fn validate_forward_input(spec: &MlpSpec, params: &ParamSet, input: &[f64]) -> Result<()> {
    if input.len() != spec.input_dim {
        return Err(Error::ShapeMismatch {
            context: "mlp_forward input",
            expected: spec.input_dim,
            got: input.len(),
        });
    }
    if !params.matches_spec(spec) {
        return Err(Error::ShapeMismatch {
            context: "mlp_forward params",
            expected: spec.param_count(),
            got: params.param_count(),
        });
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mlp_forward input".into()));
    }
    Ok(())
}

fn affine(layer: &Layer, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.reserve(layer.out_dim);
    for o in 0..layer.out_dim {
        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
        out.push(layer.biases[o] + dot(row, x));
    }
}

/// Runs the network and records a tape for a later backward pass.
///
/// Sigmoid outputs are clamped away from exact 0/1 (see [`SIGMOID_CLAMP`]).
pub fn mlp_forward(spec: &MlpSpec, params: &ParamSet, input: &[f64]) -> Result<(Vec<f64>, TapeRecord)> {
    validate_forward_input(spec, params, input)?;
    let n_layers = spec.n_layers();
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(n_layers);
    let mut x = input.to_vec();
    for (li, layer) in params.layers.iter().enumerate() {
        let mut z = Vec::new();
        affine(layer, &x, &mut z);
        let a: Vec<f64> = if li + 1 < n_layers {
            z.iter().map(|&v| v.max(0.0)).collect()
        } else {
            match spec.output_activation {
                Activation::Linear => z.clone(),
                Activation::Sigmoid => z.iter().map(|&v| sigmoid_clamped(v)).collect(),
                Activation::Relu => unreachable!("rejected by validate"),
            }
        };
        pre.push(z);
        x = a.clone();
        post.push(a);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mlp_forward output".into()));
    }
    let tape = TapeRecord {
        input: input.to_vec(),
        pre,
        post,
        dims: spec.layer_dims(),
        revision: params.revision,
    };
    Ok((x, tape))
}

/// Forward pass without tape recording, for inference and evaluation.
pub fn mlp_output(spec: &MlpSpec, params: &ParamSet, input: &[f64]) -> Result<Vec<f64>> {
    validate_forward_input(spec, params, input)?;
    let n_layers = spec.n_layers();
    let mut x = input.to_vec();
    let mut z = Vec::new();
    for (li, layer) in params.layers.iter().enumerate() {
        affine(layer, &x, &mut z);
        if li + 1 < n_layers {
            x.clear();
            x.extend(z.iter().map(|&v| v.max(0.0)));
        } else {
            match spec.output_activation {
                Activation::Linear => {
                    x.clear();
                    x.extend_from_slice(&z);
                }
                Activation::Sigmoid => {
                    x.clear();
                    x.extend(z.iter().map(|&v| sigmoid_clamped(v)));
                }
                Activation::Relu => unreachable!("rejected by validate"),
            }
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mlp_output output".into()));
    }
    Ok(x)
}

fn validate_backward(spec: &MlpSpec, params: &ParamSet, tape: &TapeRecord, output_grad: &[f64]) -> Result<()> {
    if tape.dims != spec.layer_dims() {
        return Err(Error::StaleTape(
            "tape layer dims do not match spec".into(),
        ));
    }
    if !params.matches_spec(spec) {
        return Err(Error::ShapeMismatch {
            context: "mlp_backward params",
            expected: spec.param_count(),
            got: params.param_count(),
        });
    }
    if tape.revision != params.revision {
        return Err(Error::StaleTape(format!(
            "tape recorded at parameter revision {}, current revision is {}",
            tape.revision, params.revision
        )));
    }
    if output_grad.len() != spec.output_dim {
        return Err(Error::ShapeMismatch {
            context: "mlp_backward output_grad",
            expected: spec.output_dim,
            got: output_grad.len(),
        });
    }
    Ok(())
}

/// Backward pass that *accumulates* parameter gradients into `grad_acc`
/// (which must be `ParamSet`-shaped) and returns the input gradient.
///
/// This is the hot path for minibatch training: gradients for every sample
/// of a batch land in one accumulator without intermediate allocation.
pub fn mlp_backward_acc(
    spec: &MlpSpec,
    params: &ParamSet,
    tape: &TapeRecord,
    output_grad: &[f64],
    grad_acc: &mut ParamSet,
) -> Result<Vec<f64>> {
    validate_backward(spec, params, tape, output_grad)?;
    if !grad_acc.same_shape(params) {
        return Err(Error::ShapeMismatch {
            context: "mlp_backward grad accumulator",
            expected: params.param_count(),
            got: grad_acc.param_count(),
        });
    }
    let n_layers = spec.n_layers();

    // Output-layer delta: chain through the head activation.
    let out_act = tape.post[n_layers - 1].as_slice();
    let mut delta: Vec<f64> = match spec.output_activation {
        Activation::Linear => output_grad.to_vec(),
        Activation::Sigmoid => output_grad
            .iter()
            .zip(out_act)
            .map(|(&g, &y)| g * y * (1.0 - y))
            .collect(),
        Activation::Relu => unreachable!("rejected by validate"),
    };

    grad_acc.revision += 1;
    let mut input_grad = Vec::new();
    for li in (0..n_layers).rev() {
        let layer = &params.layers[li];
        let x: &[f64] = if li == 0 { &tape.input } else { &tape.post[li - 1] };
        let g = &mut grad_acc.layers[li];
        for ((&d, gb), grow) in delta
            .iter()
            .zip(g.biases.iter_mut())
            .zip(g.weights.chunks_mut(layer.in_dim))
        {
            *gb += d;
            for (gw, &xi) in grow.iter_mut().zip(x) {
                *gw += d * xi;
            }
        }
        // Propagate to the layer input: dx = W^T delta.
        let mut dx = vec![0.0; layer.in_dim];
        for (&d, row) in delta.iter().zip(layer.weights.chunks(layer.in_dim)) {
            for (dxi, &w) in dx.iter_mut().zip(row) {
                *dxi += w * d;
            }
        }
        if li == 0 {
            input_grad = dx;
        } else {
            let pre_prev = &tape.pre[li - 1];
            delta = dx
                .iter()
                .zip(pre_prev)
                .map(|(&v, &z)| if z > 0.0 { v } else { 0.0 })
                .collect();
        }
    }
    Ok(input_grad)
}

/// Backward pass returning fresh parameter gradients and the input gradient.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &ParamSet,
    tape: &TapeRecord,
    output_grad: &[f64],
) -> Result<(ParamSet, Vec<f64>)> {
    let mut grads = ParamSet::zeros(spec);
    let input_grad = mlp_backward_acc(spec, params, tape, output_grad, &mut grads)?;
    Ok((grads, input_grad))
}

/// A scalar loss over the network output, with its gradient.
pub trait ScalarLoss {
    fn value(&self, output: &[f64]) -> f64;
    fn grad(&self, output: &[f64]) -> Vec<f64>;
}

impl<V, G> ScalarLoss for (V, G)
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, output: &[f64]) -> f64 {
        (self.0)(output)
    }
    fn grad(&self, output: &[f64]) -> Vec<f64> {
        (self.1)(output)
    }
}

/// Relative error between an analytic gradient and central finite
/// differences of `loss ∘ forward` with step `eps`, maximized over all
/// parameters: `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check_against(
    spec: &MlpSpec,
    params: &ParamSet,
    input: &[f64],
    loss: &dyn ScalarLoss,
    eps: f64,
    analytic: &ParamSet,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidConfig(format!(
            "grad_check eps {eps} outside [1e-7, 1e-3]"
        )));
    }
    if !analytic.same_shape(params) {
        return Err(Error::ShapeMismatch {
            context: "grad_check analytic grads",
            expected: params.param_count(),
            got: analytic.param_count(),
        });
    }
    let mut perturbed = params.clone();
    let mut max_rel: f64 = 0.0;
    for li in 0..params.layers.len() {
        let n_w = params.layers[li].weights.len();
        let n_b = params.layers[li].biases.len();
        for idx in 0..n_w + n_b {
            let read = |p: &ParamSet| {
                if idx < n_w {
                    p.layers[li].weights[idx]
                } else {
                    p.layers[li].biases[idx - n_w]
                }
            };
            let orig = read(params);
            let mut eval_at = |v: f64| -> Result<f64> {
                let l = perturbed.layer_mut(li);
                if idx < n_w {
                    l.weights[idx] = v;
                } else {
                    l.biases[idx - n_w] = v;
                }
                let out = mlp_output(spec, &perturbed, input)?;
                let value = loss.value(&out);
                if !value.is_finite() {
                    return Err(Error::NonFinite("grad_check loss".into()));
                }
                Ok(value)
            };
            let plus = eval_at(orig + eps)?;
            let minus = eval_at(orig - eps)?;
            eval_at(orig)?;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = read(analytic);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

/// Compares this module's backward pass against central finite differences
/// for an arbitrary differentiable scalar loss; returns the max relative
/// error over all parameters.
pub fn grad_check(
    spec: &MlpSpec,
    params: &ParamSet,
    input: &[f64],
    loss: &dyn ScalarLoss,
    eps: f64,
) -> Result<f64> {
    let (out, tape) = mlp_forward(spec, params, input)?;
    let l0 = loss.value(&out);
    if !l0.is_finite() {
        return Err(Error::NonFinite("grad_check loss at base point".into()));
    }
    let og = loss.grad(&out);
    let (analytic, _) = mlp_backward(spec, params, &tape, &og)?;
    grad_check_against(spec, params, input, loss, eps, &analytic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn spec_341() -> MlpSpec {
        MlpSpec::new(3, vec![4], 1, Activation::Sigmoid)
    }

    #[test]
    fn zero_net_sigmoid_outputs_half() {
        let spec = MlpSpec::new(3, vec![4], 2, Activation::Sigmoid);
        let params = ParamSet::zeros(&spec);
        let (out, _) = mlp_forward(&spec, &params, &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let spec = MlpSpec::new(3, vec![], 3, Activation::Linear);
        let mut params = ParamSet::zeros(&spec);
        for i in 0..3 {
            params.layer_mut(0).weights[i * 3 + i] = 1.0;
        }
        let x = [0.7, -2.5, 0.0];
        let (out, _) = mlp_forward(&spec, &params, &x).unwrap();
        assert_eq!(out, x.to_vec());
    }

    /// Independent straight-line re-evaluation of affine+relu+sigmoid,
    /// written with plain sequential loops (no shared code with the
    /// implementation's fused dot product).
    #[allow(clippy::needless_range_loop)]
    fn reference_341(params: &ParamSet, x: &[f64]) -> f64 {
        let l0 = &params.layers()[0];
        let mut h = [0.0f64; 4];
        for o in 0..4 {
            let mut z = l0.biases[o];
            for i in 0..3 {
                z += l0.weights[o * 3 + i] * x[i];
            }
            h[o] = if z > 0.0 { z } else { 0.0 };
        }
        let l1 = &params.layers()[1];
        let mut z = l1.biases[0];
        for (o, &hv) in h.iter().enumerate() {
            z += l1.weights[o] * hv;
        }
        (1.0 / (1.0 + (-z).exp())).clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    }

    #[test]
    fn random_net_matches_reference_evaluation() {
        let spec = spec_341();
        let mut rng = seeds::stream_rng(11, 0);
        for _ in 0..20 {
            let params = ParamSet::init(&spec, &mut rng);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (out, _) = mlp_forward(&spec, &params, &x).unwrap();
            assert!((out[0] - reference_341(&params, &x)).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let spec = spec_341();
        let params = ParamSet::zeros(&spec);
        assert!(matches!(
            mlp_forward(&spec, &params, &[1.0, 2.0]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            mlp_forward(&spec, &params, &[1.0, f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let spec = spec_341();
        let mut rng = seeds::stream_rng(5, 0);
        let params = ParamSet::init(&spec, &mut rng);
        let (_, tape) = mlp_forward(&spec, &params, &[1.0, 2.0, 3.0]).unwrap();
        let (grads, dx) = mlp_backward(&spec, &params, &tape, &[0.0]).unwrap();
        assert!(grads.flat_values().iter().all(|&g| g == 0.0));
        assert!(dx.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_one_one_analytic_gradient() {
        let spec = MlpSpec::new(1, vec![], 1, Activation::Linear);
        let mut params = ParamSet::zeros(&spec);
        params.layer_mut(0).weights[0] = 1.5;
        params.layer_mut(0).biases[0] = -0.25;
        let x = 0.8;
        let (_, tape) = mlp_forward(&spec, &params, &[x]).unwrap();
        let (grads, dx) = mlp_backward(&spec, &params, &tape, &[1.0]).unwrap();
        assert_eq!(grads.layers()[0].weights[0], x);
        assert_eq!(grads.layers()[0].biases[0], 1.0);
        assert_eq!(dx[0], 1.5);
    }

    #[test]
    fn backward_matches_finite_differences_on_583_net() {
        let spec = MlpSpec::new(5, vec![8], 3, Activation::Sigmoid);
        let mut rng = seeds::stream_rng(17, 0);
        let params = ParamSet::init(&spec, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cg = c.clone();
        let loss = (
            move |out: &[f64]| out.iter().zip(&c).map(|(o, w)| o * w).sum::<f64>(),
            move |_: &[f64]| cg.clone(),
        );
        let err = grad_check(&spec, &params, &x, &loss, 1e-5).unwrap();
        assert!(err < 1e-4, "finite-difference mismatch: {err}");
    }

    #[test]
    fn grad_check_quadratic_on_linear_net() {
        let spec = MlpSpec::new(2, vec![], 2, Activation::Linear);
        let mut rng = seeds::stream_rng(23, 0);
        let params = ParamSet::init(&spec, &mut rng);
        let loss = (
            |out: &[f64]| out.iter().map(|o| o * o).sum::<f64>(),
            |out: &[f64]| out.iter().map(|o| 2.0 * o).collect::<Vec<_>>(),
        );
        let err = grad_check(&spec, &params, &[0.4, -1.1], &loss, 1e-5).unwrap();
        assert!(err < 1e-6, "quadratic grad check too loose: {err}");
    }

    #[test]
    fn grad_check_smallest_net_is_finite() {
        let spec = MlpSpec::new(1, vec![], 1, Activation::Linear);
        let mut rng = seeds::stream_rng(29, 0);
        let params = ParamSet::init(&spec, &mut rng);
        let loss = (
            |out: &[f64]| out[0] * out[0],
            |out: &[f64]| vec![2.0 * out[0]],
        );
        let err = grad_check(&spec, &params, &[0.9], &loss, 1e-5).unwrap();
        assert!(err.is_finite());
    }

    #[test]
    fn grad_check_detects_corrupted_gradient() {
        let spec = MlpSpec::new(2, vec![3], 1, Activation::Sigmoid);
        let mut rng = seeds::stream_rng(31, 0);
        let params = ParamSet::init(&spec, &mut rng);
        let x = [0.6, -0.2];
        let loss = (
            |out: &[f64]| (out[0] - 1.0) * (out[0] - 1.0),
            |out: &[f64]| vec![2.0 * (out[0] - 1.0)],
        );
        let (out, tape) = mlp_forward(&spec, &params, &x).unwrap();
        let og = loss.grad(&out);
        let (mut analytic, _) = mlp_backward(&spec, &params, &tape, &og).unwrap();
        // Double the largest-magnitude gradient entry.
        let (li, wi, _) = analytic
            .layers()
            .iter()
            .enumerate()
            .flat_map(|(li, l)| {
                l.weights
                    .iter()
                    .enumerate()
                    .map(move |(wi, &w)| (li, wi, w.abs()))
            })
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .unwrap();
        analytic.layer_mut(li).weights[wi] *= 2.0;
        let err = grad_check_against(&spec, &params, &x, &loss, 1e-5, &analytic).unwrap();
        assert!(err > 0.1, "corruption not detected: {err}");
    }

    #[test]
    fn stale_tape_is_rejected_after_update() {
        let spec = spec_341();
        let mut rng = seeds::stream_rng(37, 0);
        let mut params = ParamSet::init(&spec, &mut rng);
        let (_, tape) = mlp_forward(&spec, &params, &[0.1, 0.2, 0.3]).unwrap();
        params.layer_mut(0).weights[0] += 0.5;
        assert!(matches!(
            mlp_backward(&spec, &params, &tape, &[1.0]),
            Err(Error::StaleTape(_))
        ));
    }

    #[test]
    fn tape_from_other_spec_is_rejected() {
        let spec_a = spec_341();
        let spec_b = MlpSpec::new(3, vec![5], 1, Activation::Sigmoid);
        let mut rng = seeds::stream_rng(41, 0);
        let pa = ParamSet::init(&spec_a, &mut rng);
        let pb = ParamSet::init(&spec_b, &mut rng);
        let (_, tape) = mlp_forward(&spec_a, &pa, &[0.1, 0.2, 0.3]).unwrap();
        assert!(mlp_backward(&spec_b, &pb, &tape, &[1.0]).is_err());
    }

    #[test]
    fn tape_replay_reproduces_recorded_values() {
        let spec = MlpSpec::new(4, vec![6, 5], 2, Activation::Sigmoid);
        let mut rng = seeds::stream_rng(43, 0);
        let params = ParamSet::init(&spec, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, t1) = mlp_forward(&spec, &params, &x).unwrap();
        let (_, t2) = mlp_forward(&spec, &params, &x).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn determinism_is_bitwise() {
        let spec = MlpSpec::new(6, vec![7, 5], 3, Activation::Sigmoid);
        let p1 = ParamSet::init(&spec, &mut seeds::stream_rng(99, 4));
        let p2 = ParamSet::init(&spec, &mut seeds::stream_rng(99, 4));
        assert_eq!(p1, p2);
        let x = [0.5, -0.25, 1.5, 0.0, -1.0, 2.0];
        let (o1, _) = mlp_forward(&spec, &p1, &x).unwrap();
        let (o2, _) = mlp_forward(&spec, &p2, &x).unwrap();
        assert!(o1.iter().zip(&o2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn sigmoid_never_saturates_to_exact_bounds() {
        let spec = MlpSpec::new(1, vec![], 1, Activation::Sigmoid);
        let mut params = ParamSet::zeros(&spec);
        params.layer_mut(0).weights[0] = 1000.0;
        for x in [-100.0, 100.0] {
            let (out, _) = mlp_forward(&spec, &params, &[x]).unwrap();
            assert!(out[0] >= SIGMOID_CLAMP && out[0] <= 1.0 - SIGMOID_CLAMP);
            assert!(out[0] > 0.0 && out[0] < 1.0);
        }
    }

    #[test]
    fn param_count_matches_closed_form() {
        let spec = MlpSpec::new(20, vec![64, 32], 8, Activation::Linear);
        let expected = (20 + 1) * 64 + (64 + 1) * 32 + (32 + 1) * 8;
        assert_eq!(spec.param_count(), expected);
        assert_eq!(ParamSet::zeros(&spec).param_count(), expected);
    }
}
