//! Penalty terms that shape networks for noise resilience.
//!
//! Two families, one per noise model. For correlated noise, an L1 penalty on
//! weight-matrix row sums: a layer whose rows sum to zero multiplies a
//! constant perturbation by zero, cancelling it exactly. For uncorrelated
//! noise, a penalty on sigmoid derivatives at hidden pre-activations (pushing
//! operating points into saturation, where input perturbations are damped)
//! combined with per-layer L2 to keep the readout from amplifying whatever
//! noise remains.
//!
//! Values and gradients are closed-form. Weight penalties contribute
//! gradients directly on the matrices; the derivative penalty contributes at
//! pre-activation nodes and is injected into backpropagation so it reaches
//! all upstream parameters.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::network::{sigmoid_prime, sigmoid_second, ForwardTrace, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegMode {
    None,
    Correlated,
    Uncorrelated,
}

impl RegMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegMode::None => "none",
            RegMode::Correlated => "correlated",
            RegMode::Uncorrelated => "uncorrelated",
        }
    }
}

impl std::str::FromStr for RegMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RegMode::None),
            "correlated" => Ok(RegMode::Correlated),
            "uncorrelated" => Ok(RegMode::Uncorrelated),
            other => Err(Error::ConfigMismatch(format!(
                "unknown regularizer mode `{other}`"
            ))),
        }
    }
}

/// Which penalties apply and how strongly.
///
/// Per-layer coefficient vectors cover weight layers `l = 2..=L` (everything
/// except the input matrix), index 0 meaning `l = 2`. `deriv_layers` holds
/// 1-based hidden layer indices; `None` means every hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RegConfig {
    pub mode: RegMode,
    pub lambda_rowsum: Vec<f64>,
    pub lambda_deriv: f64,
    pub lambda_l2: Vec<f64>,
    pub deriv_layers: Option<BTreeSet<usize>>,
}

impl RegConfig {
    pub fn none() -> Self {
        RegConfig {
            mode: RegMode::None,
            lambda_rowsum: Vec::new(),
            lambda_deriv: 0.0,
            lambda_l2: Vec::new(),
            deriv_layers: None,
        }
    }

    pub fn correlated(lambda_rowsum: Vec<f64>) -> Self {
        RegConfig {
            mode: RegMode::Correlated,
            lambda_rowsum,
            lambda_deriv: 0.0,
            lambda_l2: Vec::new(),
            deriv_layers: None,
        }
    }

    pub fn uncorrelated(lambda_deriv: f64, lambda_l2: Vec<f64>) -> Self {
        RegConfig {
            mode: RegMode::Uncorrelated,
            lambda_rowsum: Vec::new(),
            lambda_deriv,
            lambda_l2,
            deriv_layers: None,
        }
    }

    pub fn with_deriv_layers(mut self, layers: BTreeSet<usize>) -> Self {
        self.deriv_layers = Some(layers);
        self
    }

    /// Check coefficients against a network of `depth` weight layers.
    pub fn validate(&self, depth: usize) -> Result<()> {
        let per_layer = depth - 1;
        let check_len = |name: &str, v: &[f64]| {
            if v.len() != per_layer {
                return Err(Error::ConfigMismatch(format!(
                    "{name} lists {} coefficients, network has {per_layer} layers past the first",
                    v.len()
                )));
            }
            if v.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::ConfigMismatch(format!(
                    "{name} coefficients must be finite and non-negative"
                )));
            }
            Ok(())
        };
        match self.mode {
            RegMode::None => {}
            RegMode::Correlated => check_len("lambda_rowsum", &self.lambda_rowsum)?,
            RegMode::Uncorrelated => {
                check_len("lambda_l2", &self.lambda_l2)?;
                if !self.lambda_deriv.is_finite() || self.lambda_deriv < 0.0 {
                    return Err(Error::ConfigMismatch(
                        "lambda_deriv must be finite and non-negative".into(),
                    ));
                }
                if let Some(layers) = &self.deriv_layers {
                    if let Some(&bad) = layers.iter().find(|&&h| h == 0 || h >= depth) {
                        return Err(Error::ConfigMismatch(format!(
                            "derivative penalty names hidden layer {bad}, network has 1..={}",
                            depth - 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Hidden layers the derivative penalty covers, for a net of `depth`
    /// weight layers.
    pub fn deriv_layer_list(&self, depth: usize) -> Vec<usize> {
        match &self.deriv_layers {
            Some(set) => set.iter().copied().collect(),
            None => (1..depth).collect(),
        }
    }
}

/// Σ_i |Σ_j w_ij|: total absolute row sum.
pub fn row_sum_penalty(w: &Array2<f64>) -> f64 {
    w.rows().into_iter().map(|row| row.sum().abs()).sum()
}

/// Subgradient of [`row_sum_penalty`]: every entry of row i equals
/// sign(row sum), with sign(0) = 0 so exact cancellation is a stationary
/// point.
pub fn row_sum_penalty_grad(w: &Array2<f64>) -> Array2<f64> {
    let mut grad = Array2::zeros(w.raw_dim());
    for (mut grow, wrow) in grad.rows_mut().into_iter().zip(w.rows()) {
        let s = wrow.sum();
        let sign = if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        };
        grow.fill(sign);
    }
    grad
}

/// Mean over the batch of Σ_i f′(z_i): how far the layer sits from
/// saturation.
pub fn derivative_penalty(z: &Array2<f64>) -> f64 {
    z.iter().map(|&v| sigmoid_prime(v)).sum::<f64>() / z.nrows() as f64
}

/// Gradient of [`derivative_penalty`] w.r.t. each pre-activation entry:
/// f″(z)/batch. Negative for z > 0 and positive for z < 0, so descent pushes
/// pre-activations deeper into saturation.
pub fn derivative_penalty_grad(z: &Array2<f64>) -> Array2<f64> {
    let b = z.nrows() as f64;
    z.mapv(|v| sigmoid_second(v) / b)
}

/// Σ w²: squared Frobenius norm.
pub fn l2_penalty(w: &Array2<f64>) -> f64 {
    w.iter().map(|&v| v * v).sum()
}

pub fn l2_penalty_grad(w: &Array2<f64>) -> Array2<f64> {
    w.mapv(|v| 2.0 * v)
}

/// Gradient contributions of the active penalties, ready to combine with the
/// data-loss gradients.
#[derive(Debug, Clone)]
pub struct RegTerms {
    /// Penalty value added to the base loss.
    pub penalty: f64,
    /// Per weight layer, added to the weight gradients.
    pub weight_grads: Vec<Array2<f64>>,
    /// Per hidden layer, injected at the pre-activation node during
    /// backpropagation (see `backward_with_injections`).
    pub injections: Vec<Option<Array2<f64>>>,
}

impl RegTerms {
    pub fn empty(params: &MlpParams) -> Self {
        RegTerms {
            penalty: 0.0,
            weight_grads: params
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            injections: vec![None; params.depth() - 1],
        }
    }
}

/// Total training loss under the active regularizer, with its gradient
/// pieces. Weight penalties are data-independent and enter unscaled; the
/// derivative penalty averages over the batch like the data loss.
pub fn total_loss(
    base_loss: f64,
    params: &MlpParams,
    trace: &ForwardTrace,
    cfg: &RegConfig,
) -> Result<(f64, RegTerms)> {
    let depth = params.depth();
    cfg.validate(depth)?;
    let mut terms = RegTerms::empty(params);
    match cfg.mode {
        RegMode::None => {}
        RegMode::Correlated => {
            for l in 1..depth {
                let lambda = cfg.lambda_rowsum[l - 1];
                if lambda == 0.0 {
                    continue;
                }
                terms.penalty += lambda * row_sum_penalty(&params.weights[l]);
                terms.weight_grads[l] += &(row_sum_penalty_grad(&params.weights[l]) * lambda);
            }
        }
        RegMode::Uncorrelated => {
            if cfg.lambda_deriv > 0.0 {
                for hl in cfg.deriv_layer_list(depth) {
                    let z = &trace.pre_activations[hl - 1];
                    terms.penalty += cfg.lambda_deriv * derivative_penalty(z);
                    terms.injections[hl - 1] = Some(derivative_penalty_grad(z) * cfg.lambda_deriv);
                }
            }
            for l in 1..depth {
                let lambda = cfg.lambda_l2[l - 1];
                if lambda == 0.0 {
                    continue;
                }
                terms.penalty += lambda * l2_penalty(&params.weights[l]);
                terms.weight_grads[l] += &(l2_penalty_grad(&params.weights[l]) * lambda);
            }
        }
    }
    Ok((base_loss + terms.penalty, terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{
        backward_with_injections, forward_with_draws, loss_and_output_grad, LossKind,
    };
    use ndarray::array;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    #[test]
    fn row_sum_penalty_arithmetic() {
        let w = array![[1.0, -1.0], [2.0, 0.0]];
        assert_eq!(row_sum_penalty(&w), 2.0);
        assert_eq!(row_sum_penalty_grad(&w), array![[0.0, 0.0], [1.0, 1.0]]);
    }

    #[test]
    fn zero_row_sums_are_the_kernel() {
        let w = array![[3.0, -1.0, -2.0], [0.5, 0.5, -1.0]];
        assert_eq!(row_sum_penalty(&w), 0.0);
        assert!(row_sum_penalty_grad(&Array2::<f64>::zeros((3, 3)))
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn row_sum_penalty_matches_brute_force() {
        let w = Array2::from_shape_fn((5, 7), |(i, j)| ((i * 31 + j * 17) % 13) as f64 / 6.0 - 1.0);
        let mut brute = 0.0;
        for i in 0..5 {
            let mut s = 0.0;
            for j in 0..7 {
                s += w[[i, j]];
            }
            brute += s.abs();
        }
        assert!((row_sum_penalty(&w) - brute).abs() < 1e-12);
    }

    #[test]
    fn row_sum_grad_matches_finite_differences_away_from_kinks() {
        let w = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 5 + j * 3) % 7) as f64 + 1.0);
        let grad = row_sum_penalty_grad(&w);
        let h = 1e-6;
        for i in 0..4 {
            for j in 0..3 {
                let mut plus = w.clone();
                plus[[i, j]] += h;
                let mut minus = w.clone();
                minus[[i, j]] -= h;
                let fd = (row_sum_penalty(&plus) - row_sum_penalty(&minus)) / (2.0 * h);
                assert!(rel_err(grad[[i, j]], fd) < 1e-6);
            }
        }
    }

    #[test]
    fn row_sum_penalty_is_column_permutation_invariant() {
        let w = Array2::from_shape_fn((3, 5), |(i, j)| ((i * 11 + j * 7) % 9) as f64 - 4.0);
        let p = row_sum_penalty(&w);
        let mut shuffled = w.clone();
        // reverse the column order, then append a zero column
        for i in 0..3 {
            for j in 0..5 {
                shuffled[[i, j]] = w[[i, 4 - j]];
            }
        }
        assert_eq!(row_sum_penalty(&shuffled), p);
        let mut widened = Array2::zeros((3, 6));
        widened.slice_mut(ndarray::s![.., ..5]).assign(&w);
        assert_eq!(row_sum_penalty(&widened), p);
    }

    #[test]
    fn derivative_penalty_at_symmetry_and_saturation() {
        let z = Array2::zeros((4, 300));
        assert!((derivative_penalty(&z) - 75.0).abs() < 1e-12);
        let saturated = Array2::from_elem((4, 300), 30.0);
        assert!(derivative_penalty(&saturated) < 1e-9);
    }

    #[test]
    fn derivative_penalty_matches_brute_force() {
        let z = Array2::from_shape_fn((6, 9), |(i, j)| ((i * 13 + j * 5) % 17) as f64 / 4.0 - 2.0);
        let mut brute = 0.0;
        for i in 0..6 {
            for j in 0..9 {
                brute += sigmoid_prime(z[[i, j]]);
            }
        }
        brute /= 6.0;
        assert!((derivative_penalty(&z) - brute).abs() < 1e-12);
    }

    #[test]
    fn derivative_penalty_grad_signs() {
        let z = array![[0.0, 1.5, -1.5]];
        let g = derivative_penalty_grad(&z);
        assert_eq!(g[[0, 0]], 0.0);
        assert!(g[[0, 1]] < 0.0, "positive z should be pushed larger");
        assert!(g[[0, 2]] > 0.0, "negative z should be pushed smaller");
    }

    #[test]
    fn derivative_penalty_monotone_in_magnitude() {
        let z = Array2::from_shape_fn((2, 4), |(i, j)| (i as f64 - 0.5) * (j as f64 + 0.3));
        let p = derivative_penalty(&z);
        for i in 0..2 {
            for j in 0..4 {
                let mut grown = z.clone();
                grown[[i, j]] = 3.0 * grown[[i, j]] + grown[[i, j]].signum();
                assert!(derivative_penalty(&grown) <= p + 1e-12);
            }
        }
    }

    #[test]
    fn l2_penalty_arithmetic() {
        let w = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(l2_penalty(&w), 30.0);
        assert_eq!(l2_penalty_grad(&w), array![[2.0, 4.0], [6.0, 8.0]]);
        let zero = Array2::<f64>::zeros((2, 2));
        assert_eq!(l2_penalty(&zero), 0.0);
        assert!(l2_penalty_grad(&zero).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn l2_grad_matches_finite_differences() {
        let w = Array2::from_shape_fn((3, 4), |(i, j)| ((i + 2 * j) % 5) as f64 / 3.0 - 0.6);
        let grad = l2_penalty_grad(&w);
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..4 {
                let mut plus = w.clone();
                plus[[i, j]] += h;
                let mut minus = w.clone();
                minus[[i, j]] -= h;
                let fd = (l2_penalty(&plus) - l2_penalty(&minus)) / (2.0 * h);
                assert!(rel_err(grad[[i, j]], fd) < 1e-6);
            }
        }
    }

    #[test]
    fn zero_coefficients_leave_loss_untouched() {
        let params = MlpParams::glorot(&[3, 4, 2], 5).unwrap();
        let input = Array2::from_elem((2, 3), 0.4);
        let draws = vec![Array2::zeros((2, 4))];
        let trace = forward_with_draws(&params, &input, &draws).unwrap();
        let cfg = RegConfig::uncorrelated(0.0, vec![0.0]);
        let (total, terms) = total_loss(1.25, &params, &trace, &cfg).unwrap();
        assert_eq!(total, 1.25);
        assert!(terms
            .weight_grads
            .iter()
            .all(|g| g.iter().all(|&v| v == 0.0)));
        assert!(terms.injections.iter().all(|i| i.is_none()));
    }

    #[test]
    fn correlated_penalty_vanishes_on_zero_row_sums() {
        let mut params = MlpParams::glorot(&[3, 4, 2], 6).unwrap();
        for mut row in params.weights[1].rows_mut() {
            let mean = row.sum() / row.len() as f64;
            row.mapv_inplace(|v| v - mean);
        }
        let input = Array2::from_elem((2, 3), 0.1);
        let trace = forward_with_draws(&params, &input, &[Array2::zeros((2, 4))]).unwrap();
        let cfg = RegConfig::correlated(vec![1.0]);
        let (total, _) = total_loss(0.5, &params, &trace, &cfg).unwrap();
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coefficient_count_mismatch_is_rejected() {
        let params = MlpParams::glorot(&[3, 4, 4, 2], 7).unwrap();
        let input = Array2::from_elem((1, 3), 0.2);
        let draws = vec![Array2::zeros((1, 4)), Array2::zeros((1, 4))];
        let trace = forward_with_draws(&params, &input, &draws).unwrap();
        let cfg = RegConfig::correlated(vec![1.0]);
        assert!(matches!(
            total_loss(0.0, &params, &trace, &cfg),
            Err(Error::ConfigMismatch(_))
        ));
        let cfg = RegConfig::uncorrelated(0.1, vec![0.0, 0.0])
            .with_deriv_layers([3usize].into_iter().collect());
        assert!(matches!(
            total_loss(0.0, &params, &trace, &cfg),
            Err(Error::ConfigMismatch(_))
        ));
    }

    /// Full regularized loss as a function of the parameters, for finite
    /// differences: data loss on a replayed forward pass plus the penalty.
    fn regularized_loss(
        params: &MlpParams,
        input: &Array2<f64>,
        draws: &[Array2<f64>],
        labels: &[u8],
        cfg: &RegConfig,
    ) -> f64 {
        let trace = forward_with_draws(params, input, draws).unwrap();
        let (base, _) =
            loss_and_output_grad(trace.logits(), labels, LossKind::SoftmaxCrossEntropy).unwrap();
        total_loss(base, params, &trace, cfg).unwrap().0
    }

    #[test]
    fn full_gradient_matches_finite_differences_both_modes() {
        let params = MlpParams::glorot(&[6, 5, 5, 3], 29).unwrap();
        let input = Array2::from_shape_fn((4, 6), |(i, j)| ((i * 7 + j * 3) % 10) as f64 / 10.0);
        let labels = [0u8, 2, 1, 2];
        let draws = vec![Array2::zeros((4, 5)), Array2::zeros((4, 5))];
        let configs = [
            RegConfig::correlated(vec![0.3, 0.7]),
            RegConfig::uncorrelated(0.21, vec![0.05, 0.4]),
            RegConfig::uncorrelated(0.4, vec![0.0, 0.1])
                .with_deriv_layers([2usize].into_iter().collect()),
        ];
        for cfg in configs {
            let trace = forward_with_draws(&params, &input, &draws).unwrap();
            let (base, output_grad) =
                loss_and_output_grad(trace.logits(), &labels, LossKind::SoftmaxCrossEntropy)
                    .unwrap();
            let (_, terms) = total_loss(base, &params, &trace, &cfg).unwrap();
            let mut grads =
                backward_with_injections(&params, &trace, &output_grad, &terms.injections).unwrap();
            for l in 0..params.depth() {
                grads.weights[l] += &terms.weight_grads[l];
            }
            let h = 1e-5;
            for l in 0..params.depth() {
                for idx in 0..params.weights[l].len() {
                    let mut plus = params.clone();
                    let mut minus = params.clone();
                    plus.weights[l].as_slice_mut().unwrap()[idx] += h;
                    minus.weights[l].as_slice_mut().unwrap()[idx] -= h;
                    let fd = (regularized_loss(&plus, &input, &draws, &labels, &cfg)
                        - regularized_loss(&minus, &input, &draws, &labels, &cfg))
                        / (2.0 * h);
                    let analytic = grads.weights[l].as_slice().unwrap()[idx];
                    assert!(
                        rel_err(analytic, fd) < 1e-5,
                        "mode {:?} weight grad mismatch layer {l} index {idx}: {analytic} vs {fd}",
                        cfg.mode
                    );
                }
                for idx in 0..params.biases[l].len() {
                    let mut plus = params.clone();
                    let mut minus = params.clone();
                    plus.biases[l][idx] += h;
                    minus.biases[l][idx] -= h;
                    let fd = (regularized_loss(&plus, &input, &draws, &labels, &cfg)
                        - regularized_loss(&minus, &input, &draws, &labels, &cfg))
                        / (2.0 * h);
                    assert!(
                        rel_err(grads.biases[l][idx], fd) < 1e-5,
                        "mode {:?} bias grad mismatch layer {l} index {idx}",
                        cfg.mode
                    );
                }
            }
        }
    }
}
