//! MLP parameterization, the noisy forward pass, and exact backpropagation.
//!
//! Layer convention: weights are numbered `l = 1..=L`, with `W[0]` (`W⁽¹⁾`)
//! mapping the input to the first hidden layer. Hidden layers use sigmoid
//! activations; the readout is linear (logits are the last pre-activation).
//! Additive noise enters at the hidden post-activations `a⁽¹⁾..a⁽ᴸ⁻¹⁾` only,
//! so the pre-activation of layer `l` sees the perturbed input:
//!
//! ```text
//! z⁽ˡ⁾ = W⁽ˡ⁾ (a⁽ˡ⁻¹⁾ + n̂⁽ˡ⁻¹⁾) + b⁽ˡ⁾,   n̂⁽⁰⁾ = 0
//! ```
//!
//! Batches are row-major: a batch of B inputs is a B×n₀ matrix, and every
//! per-layer quantity is B×n_l.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::{sample_layer_noise, NoiseSpec};
use crate::stream::{rng_from, tag};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

pub fn sigmoid_second(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

/// Weights and biases of a fully connected network.
///
/// `weights[l]` has shape `n_{l+1} × n_l` (output rows, input columns), so
/// entry `(i, j)` is the weight from neuron `j` of the previous layer to
/// neuron `i` of the next.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpParams {
    /// Glorot-uniform initialization: each layer drawn from its own seed
    /// stream so the draw for one layer does not depend on the widths of the
    /// others. Biases start at zero.
    pub fn glorot(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "layer sizes must list at least two positive widths, got {layer_sizes:?}"
            )));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for l in 1..layer_sizes.len() {
            let (nin, nout) = (layer_sizes[l - 1], layer_sizes[l]);
            let limit = (6.0 / (nin + nout) as f64).sqrt();
            let mut rng = rng_from(seed, &[tag::INIT, l as u64]);
            let data: Vec<f64> = (0..nout * nin)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(
                Array2::from_shape_vec((nout, nin), data)
                    .map_err(|e| Error::ShapeMismatch(e.to_string()))?,
            );
            biases.push(Array1::zeros(nout));
        }
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Number of weight layers (`L`).
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() != self.weights.len() + 1
            || self.weights.len() != self.biases.len()
        {
            return Err(Error::ShapeMismatch(format!(
                "{} layer sizes with {} weight and {} bias layers",
                self.layer_sizes.len(),
                self.weights.len(),
                self.biases.len()
            )));
        }
        for l in 0..self.weights.len() {
            let (nout, nin) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            if self.weights[l].shape() != [nout, nin] {
                return Err(Error::ShapeMismatch(format!(
                    "weights[{l}] is {:?}, expected [{nout}, {nin}]",
                    self.weights[l].shape()
                )));
            }
            if self.biases[l].len() != nout {
                return Err(Error::ShapeMismatch(format!(
                    "biases[{l}] has length {}, expected {nout}",
                    self.biases[l].len()
                )));
            }
            if self.weights[l].iter().any(|v| !v.is_finite())
                || self.biases[l].iter().any(|v| !v.is_finite())
            {
                return Err(Error::NonFiniteInput(format!(
                    "parameters of layer {}",
                    l + 1
                )));
            }
        }
        Ok(())
    }
}

/// Everything the forward pass computed, including the exact noise draws, so
/// a backward pass (or a replay) sees the same stochastic realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `pre_activations[l-1]` holds z⁽ˡ⁾ for `l = 1..=L`; the last entry is
    /// the logits.
    pub pre_activations: Vec<Array2<f64>>,
    /// `activations[0]` is the input a⁽⁰⁾; `activations[l]` holds a⁽ˡ⁾ for
    /// the hidden layers `l = 1..L`.
    pub activations: Vec<Array2<f64>>,
    /// `noise_draws[l-1]` is n̂⁽ˡ⁾ added to hidden activation a⁽ˡ⁾.
    pub noise_draws: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &Array2<f64> {
        self.pre_activations.last().expect("trace has layers")
    }
}

/// Run the network on a batch, sampling fresh noise from `rng`.
///
/// Hidden layers are visited in order and each covered site consumes draws
/// from `rng` in a fixed order, so a given (params, input, spec, generator
/// state) always yields a bit-identical trace. Layers excluded by
/// `NoiseSpec::sites` get an exact zero draw and consume no randomness.
pub fn forward<R: Rng + ?Sized>(
    params: &MlpParams,
    input: &Array2<f64>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<ForwardTrace> {
    let depth = params.depth();
    let mut draws = Vec::with_capacity(depth - 1);
    for l in 1..depth {
        let width = params.layer_sizes[l];
        let draw = if noise.covers(l) {
            sample_layer_noise(noise, width, input.nrows(), rng)?
        } else {
            Array2::zeros((input.nrows(), width))
        };
        draws.push(draw);
    }
    forward_with_draws(params, input, &draws)
}

/// Run the network with the noise realization fixed up front. This is the
/// deterministic core of [`forward`] and the replay path for gradient
/// checking: perturbing a parameter and re-running with the same draws
/// differentiates through the identical stochastic forward pass.
pub fn forward_with_draws(
    params: &MlpParams,
    input: &Array2<f64>,
    draws: &[Array2<f64>],
) -> Result<ForwardTrace> {
    let depth = params.depth();
    if input.ncols() != params.input_width() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, network expects {}",
            input.ncols(),
            params.input_width()
        )));
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("forward input".into()));
    }
    if draws.len() != depth - 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} noise draws for {} hidden layers",
            draws.len(),
            depth - 1
        )));
    }
    let batch = input.nrows();
    for (i, d) in draws.iter().enumerate() {
        if d.shape() != [batch, params.layer_sizes[i + 1]] {
            return Err(Error::ShapeMismatch(format!(
                "noise draw {} is {:?}, expected [{batch}, {}]",
                i,
                d.shape(),
                params.layer_sizes[i + 1]
            )));
        }
    }

    let mut pre_activations = Vec::with_capacity(depth);
    let mut activations = Vec::with_capacity(depth);
    activations.push(input.clone());
    let mut current = input.clone();
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut z = current.dot(&w.t());
        z += b;
        if let Some(draw) = draws.get(l) {
            let a = z.mapv(sigmoid);
            current = &a + draw;
            activations.push(a);
        }
        pre_activations.push(z);
    }
    Ok(ForwardTrace {
        pre_activations,
        activations,
        noise_draws: draws.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    SoftmaxCrossEntropy,
    SigmoidMse,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::SoftmaxCrossEntropy => "softmax-ce",
            LossKind::SigmoidMse => "sigmoid-mse",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax-ce" => Ok(LossKind::SoftmaxCrossEntropy),
            "sigmoid-mse" => Ok(LossKind::SigmoidMse),
            other => Err(Error::ConfigMismatch(format!("unknown loss `{other}`"))),
        }
    }
}

/// Data loss averaged over the batch, plus its gradient w.r.t. the logits.
pub fn loss_and_output_grad(
    logits: &Array2<f64>,
    labels: &[u8],
    loss: LossKind,
) -> Result<(f64, Array2<f64>)> {
    let (batch, classes) = (logits.nrows(), logits.ncols());
    if labels.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    for (index, &label) in labels.iter().enumerate() {
        if label as usize >= classes {
            return Err(Error::LabelOutOfRange {
                label: label as usize,
                index,
                classes,
            });
        }
    }
    let b = batch as f64;
    match loss {
        LossKind::SoftmaxCrossEntropy => {
            let mut grad = Array2::zeros((batch, classes));
            let mut total = 0.0;
            for (r, row) in logits.rows().into_iter().enumerate() {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut denom = 0.0;
                for &v in row.iter() {
                    denom += (v - max).exp();
                }
                let log_denom = denom.ln() + max;
                let y = labels[r] as usize;
                total += log_denom - row[y];
                for (c, &v) in row.iter().enumerate() {
                    let p = (v - log_denom).exp();
                    grad[[r, c]] = (p - if c == y { 1.0 } else { 0.0 }) / b;
                }
            }
            Ok((total / b, grad))
        }
        LossKind::SigmoidMse => {
            let mut grad = Array2::zeros((batch, classes));
            let mut total = 0.0;
            for (r, row) in logits.rows().into_iter().enumerate() {
                let y = labels[r] as usize;
                for (c, &v) in row.iter().enumerate() {
                    let s = sigmoid(v);
                    let t = if c == y { 1.0 } else { 0.0 };
                    total += (s - t) * (s - t);
                    grad[[r, c]] = 2.0 * (s - t) * s * (1.0 - s) / b;
                }
            }
            Ok((total / b, grad))
        }
    }
}

/// Parameter gradients, shape-congruent with [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Gradients {
            weights: params
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: params
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }
}

/// Exact reverse-mode gradients of a scalar loss through the traced forward
/// pass, treating the recorded noise draws as constants.
pub fn backward(
    params: &MlpParams,
    trace: &ForwardTrace,
    output_grad: &Array2<f64>,
) -> Result<Gradients> {
    backward_with_injections(params, trace, output_grad, &[])
}

/// [`backward`] with extra gradient terms injected at hidden pre-activation
/// nodes. `injections[l-1]`, when present, is added to ∂loss/∂z⁽ˡ⁾ for hidden
/// layer `l` and flows on to all upstream parameters. Regularizers that
/// penalize pre-activations (the derivative penalty) enter here; an empty
/// slice means no injections.
pub fn backward_with_injections(
    params: &MlpParams,
    trace: &ForwardTrace,
    output_grad: &Array2<f64>,
    injections: &[Option<Array2<f64>>],
) -> Result<Gradients> {
    let depth = params.depth();
    if trace.pre_activations.len() != depth || trace.activations.len() != depth {
        return Err(Error::ShapeMismatch(
            "trace depth does not match network depth".into(),
        ));
    }
    if output_grad.shape() != trace.logits().shape() {
        return Err(Error::ShapeMismatch(format!(
            "output gradient is {:?}, logits are {:?}",
            output_grad.shape(),
            trace.logits().shape()
        )));
    }
    if !injections.is_empty() && injections.len() != depth - 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} injections for {} hidden layers",
            injections.len(),
            depth - 1
        )));
    }

    let mut grads = Gradients::zeros_like(params);
    let mut delta = output_grad.clone();
    for l in (0..depth).rev() {
        // Input the layer actually saw: noisy for hidden activations,
        // clean for the network input.
        let layer_input = if l == 0 {
            trace.activations[0].clone()
        } else {
            &trace.activations[l] + &trace.noise_draws[l - 1]
        };
        grads.weights[l] = delta.t().dot(&layer_input);
        grads.biases[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let upstream = delta.dot(&params.weights[l]);
            let a = &trace.activations[l];
            delta = upstream * &a.mapv(|v| v * (1.0 - v));
            if let Some(Some(inject)) = injections.get(l - 1) {
                if inject.shape() != delta.shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "injection at hidden layer {l} is {:?}, expected {:?}",
                        inject.shape(),
                        delta.shape()
                    )));
                }
                delta += inject;
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;
    use crate::stream::rng_from;
    use ndarray::array;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    #[test]
    fn sigmoid_symmetry_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid_prime(0.0), 0.25);
        assert_eq!(sigmoid_second(0.0), 0.0);
        let z = 3.7;
        assert!((sigmoid(-z) - (1.0 - sigmoid(z))).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!(sigmoid_prime(800.0).is_finite());
    }

    #[test]
    fn sigmoid_prime_matches_finite_differences() {
        let h = 1e-6;
        for z in [-4.0, -1.0, 0.5, 6.0] {
            let fd = (sigmoid(z + h) - sigmoid(z - h)) / (2.0 * h);
            assert!(
                rel_err(sigmoid_prime(z), fd) < 1e-6,
                "sigmoid_prime mismatch at z={z}"
            );
        }
    }

    #[test]
    fn zero_network_forward() {
        let params = MlpParams {
            layer_sizes: vec![3, 4, 2],
            weights: vec![Array2::zeros((4, 3)), Array2::zeros((2, 4))],
            biases: vec![Array1::zeros(4), Array1::zeros(2)],
        };
        let input = Array2::zeros((2, 3));
        let trace = forward(&params, &input, &NoiseSpec::none(), &mut rng_from(0, &[])).unwrap();
        assert!(trace.pre_activations[0].iter().all(|&z| z == 0.0));
        assert!(trace.activations[1].iter().all(|&a| a == 0.5));
        assert!(trace.logits().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn tiny_network_arithmetic() {
        let params = MlpParams {
            layer_sizes: vec![1, 1, 1],
            weights: vec![array![[2.0]], array![[1.0]]],
            biases: vec![array![1.0], array![0.0]],
        };
        let input = array![[0.5]];
        let trace = forward(&params, &input, &NoiseSpec::none(), &mut rng_from(0, &[])).unwrap();
        assert_eq!(trace.pre_activations[0][[0, 0]], 2.0);
    }

    #[test]
    fn forward_is_deterministic_for_a_seed() {
        let params = MlpParams::glorot(&[5, 4, 3], 11).unwrap();
        let input = Array2::from_shape_fn((3, 5), |(i, j)| (i + j) as f64 / 10.0);
        let spec = NoiseSpec::uncorrelated(0.1).unwrap();
        let t1 = forward(&params, &input, &spec, &mut rng_from(7, &[1])).unwrap();
        let t2 = forward(&params, &input, &spec, &mut rng_from(7, &[1])).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn glorot_is_deterministic_and_bounded() {
        let a = MlpParams::glorot(&[784, 300, 10], 42).unwrap();
        let b = MlpParams::glorot(&[784, 300, 10], 42).unwrap();
        assert_eq!(a, b);
        let limit = (6.0_f64 / (784.0 + 300.0)).sqrt();
        assert!(a.weights[0].iter().all(|&w| w.abs() < limit));
        assert!(a.biases[0].iter().all(|&v| v == 0.0));
        let c = MlpParams::glorot(&[784, 300, 10], 43).unwrap();
        assert_ne!(a.weights[0], c.weights[0]);
    }

    #[test]
    fn error_factor_decomposition() {
        // z⁽ˡ⁾ minus the noiseless affine map equals W⁽ˡ⁾ n̂⁽ˡ⁻¹⁾.
        let params = MlpParams::glorot(&[6, 5, 4], 3).unwrap();
        let input = Array2::from_shape_fn((4, 6), |(i, j)| ((i * 7 + j) % 5) as f64 / 5.0);
        let spec = NoiseSpec::uncorrelated(0.5).unwrap();
        let trace = forward(&params, &input, &spec, &mut rng_from(5, &[])).unwrap();
        let clean = trace.activations[1].dot(&params.weights[1].t()) + &params.biases[1];
        let error_factor = trace.noise_draws[0].dot(&params.weights[1].t());
        let diff = &trace.pre_activations[1] - &clean - &error_factor;
        assert!(diff.iter().all(|&d| d.abs() < 1e-12));
    }

    #[test]
    fn correlated_noise_cancels_on_zero_row_sums() {
        let mut params = MlpParams::glorot(&[6, 5, 4], 9).unwrap();
        // project rows of every matrix past the first to zero sum
        for w in params.weights.iter_mut().skip(1) {
            for mut row in w.rows_mut() {
                let mean = row.sum() / row.len() as f64;
                row.mapv_inplace(|v| v - mean);
            }
        }
        let input = Array2::from_shape_fn((3, 6), |(i, j)| (i as f64 - j as f64) / 6.0);
        let clean = forward(&params, &input, &NoiseSpec::none(), &mut rng_from(0, &[])).unwrap();
        let spec = NoiseSpec::correlated(1.0).unwrap();
        for rep in 0..20 {
            let noisy = forward(&params, &input, &spec, &mut rng_from(rep, &[4])).unwrap();
            let diff = noisy.logits() - clean.logits();
            assert!(
                diff.iter().all(|&d| d.abs() < 1e-10),
                "correlated noise leaked through zero-row-sum weights (rep {rep})"
            );
        }
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let params = MlpParams::glorot(&[4, 3, 2], 1).unwrap();
        let wide = Array2::zeros((2, 5));
        assert!(matches!(
            forward(&params, &wide, &NoiseSpec::none(), &mut rng_from(0, &[])),
            Err(Error::ShapeMismatch(_))
        ));
        let mut bad = Array2::zeros((2, 4));
        bad[[0, 0]] = f64::NAN;
        assert!(matches!(
            forward(&params, &bad, &NoiseSpec::none(), &mut rng_from(0, &[])),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn uniform_logits_cross_entropy() {
        let logits = Array2::zeros((3, 10));
        let (loss, _) =
            loss_and_output_grad(&logits, &[0, 5, 9], LossKind::SoftmaxCrossEntropy).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_mse_is_near_zero() {
        let mut logits = Array2::from_elem((2, 4), -30.0);
        logits[[0, 1]] = 30.0;
        logits[[1, 3]] = 30.0;
        let (loss, _) = loss_and_output_grad(&logits, &[1, 3], LossKind::SigmoidMse).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn label_out_of_range_is_reported() {
        let logits = Array2::zeros((2, 4));
        let err = loss_and_output_grad(&logits, &[1, 4], LossKind::SigmoidMse).unwrap_err();
        assert!(matches!(
            err,
            Error::LabelOutOfRange {
                label: 4,
                index: 1,
                classes: 4
            }
        ));
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let logits =
            Array2::from_shape_fn((3, 4), |(i, j)| ((i * 13 + j * 7) % 11) as f64 / 3.0 - 1.5);
        let labels = [2u8, 0, 3];
        let h = 1e-5;
        for kind in [LossKind::SoftmaxCrossEntropy, LossKind::SigmoidMse] {
            let (_, grad) = loss_and_output_grad(&logits, &labels, kind).unwrap();
            for i in 0..3 {
                for j in 0..4 {
                    let mut plus = logits.clone();
                    plus[[i, j]] += h;
                    let mut minus = logits.clone();
                    minus[[i, j]] -= h;
                    let (lp, _) = loss_and_output_grad(&plus, &labels, kind).unwrap();
                    let (lm, _) = loss_and_output_grad(&minus, &labels, kind).unwrap();
                    let fd = (lp - lm) / (2.0 * h);
                    assert!(
                        rel_err(grad[[i, j]], fd) < 1e-5,
                        "{kind:?} gradient mismatch at ({i}, {j}): {} vs {fd}",
                        grad[[i, j]]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let params = MlpParams::glorot(&[4, 3, 2], 2).unwrap();
        let input = Array2::from_elem((2, 4), 0.3);
        let trace = forward(&params, &input, &NoiseSpec::none(), &mut rng_from(0, &[])).unwrap();
        let grads = backward(&params, &trace, &Array2::zeros((2, 2))).unwrap();
        assert!(grads.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(grads.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    /// Central finite differences of the data loss w.r.t. every parameter,
    /// replaying the recorded noise draws so the stochastic pass is held
    /// fixed while a parameter moves.
    fn check_full_gradient(
        params: &MlpParams,
        draws: &[Array2<f64>],
        input: &Array2<f64>,
        labels: &[u8],
    ) {
        let trace = forward_with_draws(params, input, draws).unwrap();
        let (_, output_grad) =
            loss_and_output_grad(trace.logits(), labels, LossKind::SoftmaxCrossEntropy).unwrap();
        let grads = backward(params, &trace, &output_grad).unwrap();
        let h = 1e-5;
        let loss_at = |p: &MlpParams| {
            let t = forward_with_draws(p, input, draws).unwrap();
            loss_and_output_grad(t.logits(), labels, LossKind::SoftmaxCrossEntropy)
                .unwrap()
                .0
        };
        for l in 0..params.depth() {
            for idx in 0..params.weights[l].len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus.weights[l].as_slice_mut().unwrap()[idx] += h;
                minus.weights[l].as_slice_mut().unwrap()[idx] -= h;
                let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let analytic = grads.weights[l].as_slice().unwrap()[idx];
                assert!(
                    rel_err(analytic, fd) < 1e-5,
                    "weight grad mismatch layer {l} index {idx}: {analytic} vs {fd}"
                );
            }
            for idx in 0..params.biases[l].len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus.biases[l][idx] += h;
                minus.biases[l][idx] -= h;
                let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let analytic = grads.biases[l][idx];
                assert!(
                    rel_err(analytic, fd) < 1e-5,
                    "bias grad mismatch layer {l} index {idx}: {analytic} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences_noiseless() {
        let params = MlpParams::glorot(&[2, 2, 2], 17).unwrap();
        let input = array![[0.2, 0.9], [0.7, 0.1], [0.4, 0.5]];
        let draws = vec![Array2::zeros((3, 2))];
        check_full_gradient(&params, &draws, &input, &[0, 1, 1]);
    }

    #[test]
    fn backward_matches_finite_differences_with_frozen_noise() {
        let params = MlpParams::glorot(&[3, 4, 4, 2], 23).unwrap();
        let input = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j) % 7) as f64 / 7.0);
        let spec = NoiseSpec::new(NoiseKind::Uncorrelated, 0.4).unwrap();
        let mut rng = rng_from(31, &[6]);
        let sampled = forward(&params, &input, &spec, &mut rng).unwrap();
        check_full_gradient(&params, &sampled.noise_draws, &input, &[0, 1, 0, 1, 1]);
    }
}
