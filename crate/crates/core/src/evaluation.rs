//! Monte Carlo accuracy under noise, and the variance-sweep harness.
//!
//! Every stochastic evaluation derives its generators from an explicit base
//! seed: repeat r of an evaluation uses the stream (seed, EVAL_REPEAT, r),
//! and sweep point i uses the base (seed, SWEEP_POINT, kind, i). Points are
//! therefore independent of execution order and may run on any parallel
//! schedule without changing a single bit of the result.

use ndarray::s;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::idx::Dataset;
use crate::network::{forward, MlpParams};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::stream::{derive_seed, rng_from, tag};

/// Inputs per forward pass during evaluation. Fixed so the per-repeat noise
/// stream is consumed in a reproducible order regardless of dataset size.
pub const EVAL_CHUNK: usize = 2048;

/// Mean and standard deviation of accuracy (percent) over `repeats` full
/// passes, each with fresh noise.
pub fn evaluate_accuracy(
    params: &MlpParams,
    data: &Dataset,
    noise: &NoiseSpec,
    repeats: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if repeats == 0 {
        return Err(Error::ConfigMismatch(
            "evaluation needs at least one repeat".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::ShapeMismatch("evaluation dataset is empty".into()));
    }
    let mut accuracies = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = rng_from(seed, &[tag::EVAL_REPEAT, r as u64]);
        let mut correct = 0usize;
        let mut offset = 0usize;
        while offset < data.len() {
            let end = (offset + EVAL_CHUNK).min(data.len());
            let input = data.features.slice(s![offset..end, ..]).to_owned();
            let trace = forward(params, &input, noise, &mut rng)?;
            let logits = trace.logits();
            for (row, &label) in logits.rows().into_iter().zip(&data.labels[offset..end]) {
                let mut best = 0usize;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                if best == label as usize {
                    correct += 1;
                }
            }
            offset = end;
        }
        accuracies.push(100.0 * correct as f64 / data.len() as f64);
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let var = accuracies
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub variance: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
}

/// Accuracy across a grid of noise variances for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub model_tag: String,
    pub kind: NoiseKind,
    pub points: Vec<SweepPoint>,
    pub repeats: usize,
    pub seed: u64,
}

/// The Monte Carlo noise sweep. `variances` must be strictly increasing;
/// each point gets its own seed derived from (seed, kind, index), so results
/// do not depend on evaluation order. Points run in parallel.
pub fn noise_sweep(
    params: &MlpParams,
    data: &Dataset,
    kind: NoiseKind,
    variances: &[f64],
    repeats: usize,
    seed: u64,
    model_tag: &str,
) -> Result<SweepResult> {
    if variances.is_empty() {
        return Err(Error::ConfigMismatch(
            "sweep needs at least one variance".into(),
        ));
    }
    if variances.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ConfigMismatch(
            "sweep variances must be strictly increasing".into(),
        ));
    }
    let kind_tag = match kind {
        NoiseKind::None => 0u64,
        NoiseKind::Correlated => 1,
        NoiseKind::Uncorrelated => 2,
    };
    let points: Result<Vec<SweepPoint>> = variances
        .par_iter()
        .enumerate()
        .map(|(i, &variance)| {
            let spec = NoiseSpec::new(kind, variance)?;
            let point_seed = derive_seed(seed, &[tag::SWEEP_POINT, kind_tag, i as u64]);
            let (mean_acc, std_acc) = evaluate_accuracy(params, data, &spec, repeats, point_seed)?;
            Ok(SweepPoint {
                variance,
                mean_acc,
                std_acc,
            })
        })
        .collect();
    Ok(SweepResult {
        model_tag: model_tag.to_string(),
        kind,
        points: points?,
        repeats,
        seed,
    })
}

/// The default sweep grid: 30 log-spaced variances from 1e-3 to 1.
pub fn default_variance_grid() -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 1f64.ln());
    (0..30)
        .map(|i| {
            if i == 29 {
                1.0
            } else {
                (lo + (hi - lo) * i as f64 / 29.0).exp()
            }
        })
        .collect()
}

/// Per-point accuracy drop relative to a noiseless baseline.
pub fn drop_report(sweep: &SweepResult, noiseless: f64) -> Vec<(f64, f64)> {
    sweep
        .points
        .iter()
        .map(|p| (p.variance, noiseless - p.mean_acc))
        .collect()
}
