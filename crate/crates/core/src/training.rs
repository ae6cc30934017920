//! Minibatch training in four modes.
//!
//! `standard` minimizes the plain data loss. `noise-aware` injects fresh
//! inference-like noise into every training batch so the network adapts to
//! it. `reg-correlated` adds the row-sum penalty, `reg-uncorrelated` the
//! derivative and L2 penalties; the reg modes train noiselessly by default
//! but accept a noise spec to combine both defenses.
//!
//! Everything stochastic (init, shuffling, training noise) derives from the
//! config seed through fixed stream tags, so a config determines the final
//! parameters bit for bit.

use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::evaluation::evaluate_accuracy;
use crate::idx::Dataset;
use crate::network::{
    backward_with_injections, forward, forward_with_draws, loss_and_output_grad, Gradients,
    LossKind, MlpParams,
};
use crate::noise::{sample_layer_noise, NoiseSpec};
use crate::regularizers::{total_loss, RegConfig, RegMode};
use crate::stream::{rng_from, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Standard,
    NoiseAware,
    RegCorrelated,
    RegUncorrelated,
}

impl TrainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainMode::Standard => "standard",
            TrainMode::NoiseAware => "noise-aware",
            TrainMode::RegCorrelated => "reg-correlated",
            TrainMode::RegUncorrelated => "reg-uncorrelated",
        }
    }

    pub const ALL: [TrainMode; 4] = [
        TrainMode::Standard,
        TrainMode::NoiseAware,
        TrainMode::RegCorrelated,
        TrainMode::RegUncorrelated,
    ];
}

impl std::str::FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(TrainMode::Standard),
            "noise-aware" => Ok(TrainMode::NoiseAware),
            "reg-correlated" => Ok(TrainMode::RegCorrelated),
            "reg-uncorrelated" => Ok(TrainMode::RegUncorrelated),
            other => Err(Error::ConfigMismatch(format!(
                "unknown training mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    SgdMomentum {
        momentum: f64,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::SgdMomentum { .. } => "sgd-momentum",
            OptimizerKind::Adam { .. } => "adam",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerKind::Sgd => true,
            OptimizerKind::SgdMomentum { momentum } => (0.0..1.0).contains(&momentum),
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigMismatch(format!(
                "invalid optimizer hyperparameters {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
    /// Noise injected during training. Must be inactive for `standard`;
    /// `noise-aware` relies on it; reg modes may add it on top of the
    /// penalty.
    pub noise: NoiseSpec,
    pub reg: RegConfig,
    pub loss: LossKind,
}

impl TrainConfig {
    /// Standard training with the default optimizer settings.
    pub fn standard(layer_sizes: Vec<usize>, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            mode: TrainMode::Standard,
            layer_sizes,
            epochs,
            batch_size: 128,
            optimizer: OptimizerKind::adam(),
            learning_rate: 1e-3,
            seed,
            noise: NoiseSpec::none(),
            reg: RegConfig::none(),
            loss: LossKind::SoftmaxCrossEntropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::ConfigMismatch(format!(
                "layer sizes must list at least two positive widths, got {:?}",
                self.layer_sizes
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::ConfigMismatch("batch size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::ConfigMismatch(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.optimizer.validate()?;
        match self.mode {
            TrainMode::Standard => {
                if self.reg.mode != RegMode::None {
                    return Err(Error::ConfigMismatch(
                        "standard mode does not take a regularizer".into(),
                    ));
                }
                if self.noise.is_active() {
                    return Err(Error::ConfigMismatch(
                        "standard mode trains without noise".into(),
                    ));
                }
            }
            TrainMode::NoiseAware => {
                if self.reg.mode != RegMode::None {
                    return Err(Error::ConfigMismatch(
                        "noise-aware mode does not take a regularizer".into(),
                    ));
                }
            }
            TrainMode::RegCorrelated => {
                if self.reg.mode != RegMode::Correlated {
                    return Err(Error::ConfigMismatch(
                        "reg-correlated mode requires a correlated regularizer config".into(),
                    ));
                }
            }
            TrainMode::RegUncorrelated => {
                if self.reg.mode != RegMode::Uncorrelated {
                    return Err(Error::ConfigMismatch(
                        "reg-uncorrelated mode requires an uncorrelated regularizer config".into(),
                    ));
                }
            }
        }
        self.reg.validate(self.layer_sizes.len() - 1)
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub penalty: Vec<f64>,
    pub wall_time_s: Vec<f64>,
}

/// What one optimizer step saw; passed to the training observer.
pub struct BatchEvent<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    pub penalty: f64,
    pub noise_draws: &'a [Array2<f64>],
}

struct OptState {
    t: u64,
    first: Gradients,
    second: Gradients,
}

impl OptState {
    fn new(params: &MlpParams) -> Self {
        OptState {
            t: 0,
            first: Gradients::zeros_like(params),
            second: Gradients::zeros_like(params),
        }
    }
}

fn update_slice(
    kind: &OptimizerKind,
    lr: f64,
    t: u64,
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
) {
    match *kind {
        OptimizerKind::Sgd => {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= lr * gi;
            }
        }
        OptimizerKind::SgdMomentum { momentum } => {
            for ((pi, gi), mi) in p.iter_mut().zip(g).zip(m) {
                *mi = momentum * *mi + gi;
                *pi -= lr * *mi;
            }
        }
        OptimizerKind::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            let bc1 = 1.0 - beta1.powi(t as i32);
            let bc2 = 1.0 - beta2.powi(t as i32);
            for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi -= lr * mhat / (vhat.sqrt() + epsilon);
            }
        }
    }
}

fn apply_update(
    params: &mut MlpParams,
    grads: &Gradients,
    kind: &OptimizerKind,
    lr: f64,
    state: &mut OptState,
) {
    state.t += 1;
    for l in 0..params.weights.len() {
        update_slice(
            kind,
            lr,
            state.t,
            params.weights[l].as_slice_mut().expect("contiguous"),
            grads.weights[l].as_slice().expect("contiguous"),
            state.first.weights[l].as_slice_mut().expect("contiguous"),
            state.second.weights[l].as_slice_mut().expect("contiguous"),
        );
        update_slice(
            kind,
            lr,
            state.t,
            params.biases[l].as_slice_mut().expect("contiguous"),
            grads.biases[l].as_slice().expect("contiguous"),
            state.first.biases[l].as_slice_mut().expect("contiguous"),
            state.second.biases[l].as_slice_mut().expect("contiguous"),
        );
    }
}

fn check_dataset(data: &Dataset, cfg: &TrainConfig, role: &str) -> Result<()> {
    if data.features.ncols() != cfg.layer_sizes[0] {
        return Err(Error::ShapeMismatch(format!(
            "{role} data has {} features, network expects {}",
            data.features.ncols(),
            cfg.layer_sizes[0]
        )));
    }
    let classes = *cfg.layer_sizes.last().unwrap();
    for (index, &label) in data.labels.iter().enumerate() {
        if label as usize >= classes {
            return Err(Error::LabelOutOfRange {
                label: label as usize,
                index,
                classes,
            });
        }
    }
    Ok(())
}

pub fn train(
    cfg: &TrainConfig,
    train_data: &Dataset,
    val_data: &Dataset,
) -> Result<(MlpParams, TrainHistory)> {
    train_with_observer(cfg, train_data, val_data, |_| {})
}

/// [`train`] with a per-batch callback, used for progress reporting and for
/// inspecting the noise actually injected.
pub fn train_with_observer(
    cfg: &TrainConfig,
    train_data: &Dataset,
    val_data: &Dataset,
    mut observer: impl FnMut(&BatchEvent),
) -> Result<(MlpParams, TrainHistory)> {
    cfg.validate()?;
    check_dataset(train_data, cfg, "training")?;
    check_dataset(val_data, cfg, "validation")?;
    if train_data.is_empty() {
        return Err(Error::ShapeMismatch("training dataset is empty".into()));
    }

    let mut params = MlpParams::glorot(&cfg.layer_sizes, cfg.seed)?;
    let mut shuffle_rng = rng_from(cfg.seed, &[tag::SHUFFLE]);
    let mut noise_rng = rng_from(cfg.seed, &[tag::TRAIN_NOISE]);
    let mut state = OptState::new(&params);
    let mut history = TrainHistory::default();
    let mut initial_loss: Option<f64> = None;
    let mut high_loss_epochs = 0usize;
    let mut indices: Vec<usize> = (0..train_data.len()).collect();

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        indices.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut penalty_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            let input = train_data.features.select(Axis(0), chunk);
            let labels: Vec<u8> = chunk.iter().map(|&i| train_data.labels[i]).collect();
            let trace = forward(&params, &input, &cfg.noise, &mut noise_rng)?;
            let (base, output_grad) = loss_and_output_grad(trace.logits(), &labels, cfg.loss)?;
            let (loss, terms) = total_loss(base, &params, &trace, &cfg.reg)?;
            if !loss.is_finite() {
                return Err(Error::DivergenceDetected(format!(
                    "non-finite loss at epoch {}, batch {batch_idx}",
                    epoch + 1
                )));
            }
            // The divergence baseline is the very first batch loss: an epoch
            // mean would already be contaminated by a blow-up inside epoch 1.
            initial_loss.get_or_insert(loss);
            let mut grads =
                backward_with_injections(&params, &trace, &output_grad, &terms.injections)?;
            for l in 0..params.depth() {
                grads.weights[l] += &terms.weight_grads[l];
            }
            observer(&BatchEvent {
                epoch,
                batch: batch_idx,
                loss,
                penalty: terms.penalty,
                noise_draws: &trace.noise_draws,
            });
            apply_update(
                &mut params,
                &grads,
                &cfg.optimizer,
                cfg.learning_rate,
                &mut state,
            );
            loss_sum += loss;
            penalty_sum += terms.penalty;
            batches += 1;
        }
        let mean_loss = loss_sum / batches as f64;
        let initial = initial_loss.unwrap_or(mean_loss);
        if mean_loss > 10.0 * initial {
            high_loss_epochs += 1;
            if high_loss_epochs >= 3 {
                return Err(Error::DivergenceDetected(format!(
                    "epoch {} mean loss {mean_loss:.4} exceeded 10x the initial {initial:.4} for 3 consecutive epochs",
                    epoch + 1
                )));
            }
        } else {
            high_loss_epochs = 0;
        }
        let (val_acc, _) = evaluate_accuracy(&params, val_data, &NoiseSpec::none(), 1, 0)?;
        history.train_loss.push(mean_loss);
        history.val_accuracy.push(val_acc);
        history.penalty.push(penalty_sum / batches as f64);
        history.wall_time_s.push(start.elapsed().as_secs_f64());
    }
    Ok((params, history))
}

/// One mode's gradient verification outcome.
#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub mode: TrainMode,
    pub probes: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Representative regularizer settings for verifying each mode's gradient
/// at a generic point.
fn gradcheck_reg(mode: TrainMode, depth: usize) -> RegConfig {
    match mode {
        TrainMode::Standard | TrainMode::NoiseAware => RegConfig::none(),
        TrainMode::RegCorrelated => {
            RegConfig::correlated((0..depth - 1).map(|i| 0.3 + 0.1 * i as f64).collect())
        }
        TrainMode::RegUncorrelated => {
            RegConfig::uncorrelated(0.2, (0..depth - 1).map(|i| 0.05 + 0.1 * i as f64).collect())
        }
    }
}

/// Compare assembled analytic gradients against central finite differences
/// at random parameter coordinates, for every training mode on a small
/// synthetic net. Noise-aware mode freezes one sampled noise realization and
/// replays it on both sides of each difference.
pub fn gradient_check(
    layer_sizes: &[usize],
    loss_kind: LossKind,
    n_probes: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let depth = layer_sizes.len() - 1;
    let batch = 16;
    let classes = *layer_sizes.last().unwrap();
    let mut data_rng = rng_from(seed, &[tag::GRADCHECK, 0]);
    let input = Array2::from_shape_fn((batch, layer_sizes[0]), |_| data_rng.random_range(0.0..1.0));
    let labels: Vec<u8> = (0..batch)
        .map(|_| data_rng.random_range(0..classes as u32) as u8)
        .collect();

    let mut entries = Vec::new();
    for (mode_idx, mode) in TrainMode::ALL.iter().enumerate() {
        let params = MlpParams::glorot(layer_sizes, seed)?;
        let reg = gradcheck_reg(*mode, depth);
        let draws: Vec<Array2<f64>> = {
            let mut noise_rng = rng_from(seed, &[tag::GRADCHECK, 1 + mode_idx as u64]);
            (1..=depth - 1)
                .map(|l| {
                    if *mode == TrainMode::NoiseAware {
                        sample_layer_noise(
                            &NoiseSpec::uncorrelated(0.25)?,
                            layer_sizes[l],
                            batch,
                            &mut noise_rng,
                        )
                    } else {
                        Ok(Array2::zeros((batch, layer_sizes[l])))
                    }
                })
                .collect::<Result<_>>()?
        };

        let loss_at = |p: &MlpParams| -> Result<f64> {
            let trace = forward_with_draws(p, &input, &draws)?;
            let (base, _) = loss_and_output_grad(trace.logits(), &labels, loss_kind)?;
            Ok(total_loss(base, p, &trace, &reg)?.0)
        };

        let trace = forward_with_draws(&params, &input, &draws)?;
        let (base, output_grad) = loss_and_output_grad(trace.logits(), &labels, loss_kind)?;
        let (_, terms) = total_loss(base, &params, &trace, &reg)?;
        let mut grads = backward_with_injections(&params, &trace, &output_grad, &terms.injections)?;
        for l in 0..depth {
            grads.weights[l] += &terms.weight_grads[l];
        }

        let weight_count: usize = params.weights.iter().map(|w| w.len()).sum();
        let total: usize = weight_count + params.biases.iter().map(|b| b.len()).sum::<usize>();
        let mut probe_rng = rng_from(seed, &[tag::GRADCHECK, 10 + mode_idx as u64]);
        let mut max_err = 0.0f64;
        let step = 1e-5;
        for _ in 0..n_probes {
            let coord = probe_rng.random_range(0..total as u64) as usize;
            let analytic;
            let mut plus = params.clone();
            let mut minus = params.clone();
            if coord < weight_count {
                let mut offset = coord;
                let mut layer = 0;
                while offset >= params.weights[layer].len() {
                    offset -= params.weights[layer].len();
                    layer += 1;
                }
                analytic = grads.weights[layer].as_slice().unwrap()[offset];
                plus.weights[layer].as_slice_mut().unwrap()[offset] += step;
                minus.weights[layer].as_slice_mut().unwrap()[offset] -= step;
            } else {
                let mut offset = coord - weight_count;
                let mut layer = 0;
                while offset >= params.biases[layer].len() {
                    offset -= params.biases[layer].len();
                    layer += 1;
                }
                analytic = grads.biases[layer][offset];
                plus.biases[layer][offset] += step;
                minus.biases[layer][offset] -= step;
            }
            let fd = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * step);
            max_err = max_err.max(rel_err(analytic, fd));
        }
        entries.push(GradCheckEntry {
            mode: *mode,
            probes: n_probes,
            max_rel_err: max_err,
        });
    }

    let report = GradCheckReport { entries, tolerance };
    if report.max_rel_err() >= tolerance {
        let detail: Vec<String> = report
            .entries
            .iter()
            .map(|e| format!("{}: max rel err {:.3e}", e.mode.as_str(), e.max_rel_err))
            .collect();
        return Err(Error::GradientMismatch(format!(
            "gradient check failed at tolerance {tolerance:.1e} ({})",
            detail.join(", ")
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_dataset(n: usize, width: usize, classes: usize) -> Dataset {
        let features = Array2::from_shape_fn((n, width), |(i, j)| {
            (((i * 31 + j * 17) % 97) as f64 / 97.0).powi(2)
        });
        let labels = (0..n).map(|i| (i % classes) as u8).collect();
        Dataset {
            features,
            labels,
            name: "synthetic".into(),
        }
    }

    fn tiny_config(mode: TrainMode, epochs: usize) -> TrainConfig {
        let mut cfg = TrainConfig::standard(vec![6, 5, 4], epochs, 77);
        cfg.mode = mode;
        cfg.batch_size = 16;
        cfg
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = tiny_config(TrainMode::Standard, 0);
        let data = synthetic_dataset(48, 6, 4);
        let val = synthetic_dataset(16, 6, 4);
        let (params, history) = train(&cfg, &data, &val).unwrap();
        assert_eq!(params, MlpParams::glorot(&[6, 5, 4], 77).unwrap());
        assert!(history.train_loss.is_empty());
        assert!(history.val_accuracy.is_empty());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let mut cfg = tiny_config(TrainMode::NoiseAware, 2);
        cfg.noise = NoiseSpec::uncorrelated(0.3).unwrap();
        let data = synthetic_dataset(64, 6, 4);
        let val = synthetic_dataset(16, 6, 4);
        let (p1, h1) = train(&cfg, &data, &val).unwrap();
        let (p2, h2) = train(&cfg, &data, &val).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(h1.train_loss, h2.train_loss);
        assert_eq!(h1.val_accuracy, h2.val_accuracy);
        assert_eq!(h1.penalty, h2.penalty);
    }

    #[test]
    fn reg_modes_with_zero_lambda_match_standard() {
        let data = synthetic_dataset(64, 6, 4);
        let val = synthetic_dataset(16, 6, 4);
        let (standard, _) = train(&tiny_config(TrainMode::Standard, 2), &data, &val).unwrap();

        let mut corr = tiny_config(TrainMode::RegCorrelated, 2);
        corr.reg = RegConfig::correlated(vec![0.0]);
        let (corr_params, _) = train(&corr, &data, &val).unwrap();
        assert_eq!(standard, corr_params);

        let mut unc = tiny_config(TrainMode::RegUncorrelated, 2);
        unc.reg = RegConfig::uncorrelated(0.0, vec![0.0]);
        let (unc_params, _) = train(&unc, &data, &val).unwrap();
        assert_eq!(standard, unc_params);
    }

    #[test]
    fn history_lengths_match_epochs_and_loss_decreases() {
        let cfg = tiny_config(TrainMode::Standard, 5);
        let data = synthetic_dataset(128, 6, 4);
        let val = synthetic_dataset(32, 6, 4);
        let (_, history) = train(&cfg, &data, &val).unwrap();
        assert_eq!(history.train_loss.len(), 5);
        assert_eq!(history.val_accuracy.len(), 5);
        assert_eq!(history.penalty.len(), 5);
        assert_eq!(history.wall_time_s.len(), 5);
        assert!(history.train_loss[4] < history.train_loss[0]);
        assert!(history.penalty.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn mode_consistency_is_enforced() {
        let mut standard_with_noise = tiny_config(TrainMode::Standard, 1);
        standard_with_noise.noise = NoiseSpec::uncorrelated(0.5).unwrap();
        assert!(matches!(
            standard_with_noise.validate(),
            Err(Error::ConfigMismatch(_))
        ));

        let mut aware_with_reg = tiny_config(TrainMode::NoiseAware, 1);
        aware_with_reg.reg = RegConfig::correlated(vec![0.1]);
        assert!(matches!(
            aware_with_reg.validate(),
            Err(Error::ConfigMismatch(_))
        ));

        let corr_without_reg = tiny_config(TrainMode::RegCorrelated, 1);
        assert!(matches!(
            corr_without_reg.validate(),
            Err(Error::ConfigMismatch(_))
        ));

        let mut unc_with_corr_reg = tiny_config(TrainMode::RegUncorrelated, 1);
        unc_with_corr_reg.reg = RegConfig::correlated(vec![0.1]);
        assert!(matches!(
            unc_with_corr_reg.validate(),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn noise_aware_resamples_noise_every_batch() {
        let mut cfg = tiny_config(TrainMode::NoiseAware, 1);
        cfg.noise = NoiseSpec::uncorrelated(0.5).unwrap();
        cfg.batch_size = 32;
        let data = synthetic_dataset(64, 6, 4);
        let val = synthetic_dataset(16, 6, 4);
        let mut first_draws: Vec<Array2<f64>> = Vec::new();
        let mut second_draws: Vec<Array2<f64>> = Vec::new();
        train_with_observer(&cfg, &data, &val, |event| {
            if event.epoch == 0 && event.batch == 0 {
                first_draws = event.noise_draws.to_vec();
            }
            if event.epoch == 0 && event.batch == 1 {
                second_draws = event.noise_draws.to_vec();
            }
        })
        .unwrap();
        assert!(!first_draws.is_empty() && !second_draws.is_empty());
        assert_ne!(first_draws, second_draws);
        assert!(first_draws[0].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn reg_correlated_reduces_row_sum_penalty() {
        let mut cfg = tiny_config(TrainMode::RegCorrelated, 6);
        cfg.reg = RegConfig::correlated(vec![1.0]);
        let data = synthetic_dataset(128, 6, 4);
        let val = synthetic_dataset(32, 6, 4);
        let (_, history) = train(&cfg, &data, &val).unwrap();
        assert!(
            history.penalty[5] < history.penalty[0],
            "penalty did not shrink: {:?}",
            history.penalty
        );
    }

    #[test]
    fn runaway_learning_rate_is_detected() {
        let mut cfg = tiny_config(TrainMode::Standard, 8);
        cfg.optimizer = OptimizerKind::Sgd;
        cfg.learning_rate = 1e9;
        let data = synthetic_dataset(64, 6, 4);
        let val = synthetic_dataset(16, 6, 4);
        assert!(matches!(
            train(&cfg, &data, &val),
            Err(Error::DivergenceDetected(_))
        ));
    }

    #[test]
    fn label_out_of_range_is_rejected_before_training() {
        let cfg = tiny_config(TrainMode::Standard, 1);
        let mut data = synthetic_dataset(16, 6, 4);
        data.labels[3] = 9;
        let val = synthetic_dataset(8, 6, 4);
        assert!(matches!(
            train(&cfg, &data, &val),
            Err(Error::LabelOutOfRange {
                label: 9,
                index: 3,
                classes: 4
            })
        ));
    }

    #[test]
    fn sgd_and_momentum_also_learn() {
        let data = synthetic_dataset(128, 6, 4);
        let val = synthetic_dataset(32, 6, 4);
        for optimizer in [
            OptimizerKind::Sgd,
            OptimizerKind::SgdMomentum { momentum: 0.9 },
        ] {
            let mut cfg = tiny_config(TrainMode::Standard, 5);
            cfg.optimizer = optimizer;
            cfg.learning_rate = 0.1;
            let (_, history) = train(&cfg, &data, &val).unwrap();
            assert!(
                history.train_loss[4] < history.train_loss[0],
                "{optimizer:?} failed to reduce loss"
            );
        }
    }

    #[test]
    fn gradient_check_passes_all_modes() {
        let report =
            gradient_check(&[6, 5, 5, 3], LossKind::SoftmaxCrossEntropy, 60, 1e-5, 3).unwrap();
        assert_eq!(report.entries.len(), 4);
        assert!(report.max_rel_err() < 1e-5);
        let mse = gradient_check(&[6, 5, 5, 3], LossKind::SigmoidMse, 40, 1e-5, 4).unwrap();
        assert!(mse.max_rel_err() < 1e-5);
    }

    #[test]
    fn gradient_check_catches_a_broken_tolerance() {
        assert!(matches!(
            gradient_check(&[6, 5, 3], LossKind::SoftmaxCrossEntropy, 30, 1e-16, 5),
            Err(Error::GradientMismatch(_))
        ));
    }
}
