//! Distribution of a sigmoid-transformed Gaussian, analytically and by
//! Monte Carlo.
//!
//! A noisy pre-activation is modeled as z ∼ 𝒩(μ, σ²). Because the sigmoid is
//! monotonic, the density of a = f(z) follows by change of variables:
//!
//! ```text
//! p(a) = 𝒩(logit(a); μ, σ²) / (a (1 − a))
//! ```
//!
//! with logit = f⁻¹ and a(1−a) = |da/dz|. The further μ sits from the
//! origin, the more the output distribution contracts toward 0 or 1, which
//! is the mechanism the derivative penalty exploits.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::idx::Dataset;
use crate::network::{forward_with_draws, sigmoid, MlpParams};

/// Parameters of the Gaussian feeding the sigmoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInput {
    pub mu: f64,
    pub variance: f64,
}

impl GaussianInput {
    pub fn new(mu: f64, variance: f64) -> Result<Self> {
        if !mu.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::DomainError(format!(
                "Gaussian input needs finite mu and positive variance, got mu={mu}, variance={variance}"
            )));
        }
        Ok(GaussianInput { mu, variance })
    }
}

pub fn logit(a: f64) -> f64 {
    (a / (1.0 - a)).ln()
}

fn gaussian_density(x: f64, mu: f64, variance: f64) -> f64 {
    let d = x - mu;
    (-d * d / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Density of sigmoid(z) at `a` for z ∼ 𝒩(mu, variance).
pub fn analytic_activation_pdf(g: GaussianInput, a: f64) -> Result<f64> {
    if !(0.0 < a && a < 1.0) {
        return Err(Error::DomainError(format!(
            "activation density is defined on (0, 1), got {a}"
        )));
    }
    Ok(gaussian_density(logit(a), g.mu, g.variance) / (a * (1.0 - a)))
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Panel edges for integrating the transformed density: the images of
/// μ + kσ for k = −12..=12, kept strictly inside (0, 1). The density can be
/// a spike occupying a sliver of (0, 1), so a single adaptive pass over the
/// whole support can mistake it for zero; one panel per σ keeps every panel
/// smooth enough for the error estimate to be trusted.
fn integration_panels(g: GaussianInput) -> Vec<f64> {
    let sd = g.variance.sqrt();
    let mut edges: Vec<f64> = (-12..=12)
        .map(|k| sigmoid(g.mu + k as f64 * sd).clamp(1e-15, 1.0 - 1e-15))
        .collect();
    edges.dedup_by(|a, b| *a <= *b);
    if edges.len() < 2 {
        edges = vec![1e-15, 1.0 - 1e-15];
    }
    edges
}

fn integrate_over_panels(f: &impl Fn(f64) -> f64, edges: &[f64], tol: f64) -> f64 {
    let panels = edges.len().saturating_sub(1).max(1);
    edges
        .windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol / panels as f64))
        .sum()
}

/// Zeroth, first, and second central moments of the analytic density:
/// (total mass, mean, standard deviation). Mass ≈ 1 confirms the transform
/// conserves probability.
pub fn analytic_moments(g: GaussianInput) -> (f64, f64, f64) {
    let edges = integration_panels(g);
    let pdf = |a: f64| analytic_activation_pdf(g, a).expect("bounds inside (0,1)");
    let mass = integrate_over_panels(&pdf, &edges, 1e-9);
    let mean = integrate_over_panels(&|a| a * pdf(a), &edges, 1e-9) / mass;
    let second = integrate_over_panels(&|a| a * a * pdf(a), &edges, 1e-9) / mass;
    (mass, mean, (second - mean * mean).max(0.0).sqrt())
}

/// A density-normalized histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `len = bins + 1`, strictly increasing.
    pub bin_edges: Vec<f64>,
    /// Density per bin; Σ density·width = 1 for nonempty input.
    pub densities: Vec<f64>,
}

impl Histogram {
    /// Histogram of `values` over `bins` uniform bins spanning `range`.
    /// Values outside the range are clamped into the end bins.
    pub fn uniform(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Self> {
        if bins == 0 || values.is_empty() {
            return Err(Error::DomainError(
                "histogram needs at least one bin and one value".into(),
            ));
        }
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::DomainError(format!(
                "histogram needs a finite increasing range, got [{lo}, {hi}]"
            )));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = (((v - lo) / width) as isize).clamp(0, bins as isize - 1) as usize;
            counts[idx] += 1;
        }
        let n = values.len() as f64;
        Ok(Histogram {
            bin_edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
            densities: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
        })
    }

    /// Histogram over the observed value range. A point mass (all values
    /// equal) degenerates to the single unit-width bin around the value.
    pub fn over_observed_range(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DomainError("histogram of no values".into()));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Ok(Histogram {
                bin_edges: vec![lo - 0.5, lo + 0.5],
                densities: vec![1.0],
            });
        }
        Self::uniform(values, bins, (lo, hi))
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (w[1] - w[0]) * d)
            .sum()
    }

    /// Probability mass in bins whose left edge is at or above `threshold`.
    pub fn mass_above(&self, threshold: f64) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.densities)
            .filter(|(w, _)| w[0] >= threshold)
            .map(|(w, d)| (w[1] - w[0]) * d)
            .sum()
    }
}

/// Monte Carlo counterpart of [`analytic_activation_pdf`]: histogram of
/// sigmoid(z) over uniform bins on (0, 1).
pub fn empirical_activation_pdf<R: Rng + ?Sized>(
    g: GaussianInput,
    n_samples: usize,
    bins: usize,
    rng: &mut R,
) -> Result<Histogram> {
    if n_samples == 0 {
        return Err(Error::DomainError("need at least one sample".into()));
    }
    let normal = Normal::new(g.mu, g.variance.sqrt())
        .map_err(|_| Error::DomainError("invalid Gaussian parameters".into()))?;
    let values: Vec<f64> = (0..n_samples)
        .map(|_| sigmoid(normal.sample(rng)))
        .collect();
    Histogram::uniform(&values, bins, (0.0, 1.0))
}

/// Analytic probability mass of sigmoid(z) inside [lo, hi] ⊆ [0, 1]: the
/// Gaussian mass on [logit(lo), logit(hi)], integrated in z where the
/// integrand is a plain normal density. Edges at 0 or 1 map to clipped
/// tails at μ ± 40σ, beyond which the mass is zero at double precision.
fn analytic_bin_mass(g: GaussianInput, lo: f64, hi: f64) -> f64 {
    let clip = 40.0 * g.variance.sqrt();
    let z_lo = if lo <= 0.0 {
        g.mu - clip
    } else {
        logit(lo).max(g.mu - clip)
    };
    let z_hi = if hi >= 1.0 {
        g.mu + clip
    } else {
        logit(hi).min(g.mu + clip)
    };
    if z_lo >= z_hi {
        return 0.0;
    }
    adaptive_simpson(
        &|z| gaussian_density(z, g.mu, g.variance),
        z_lo,
        z_hi,
        1e-12,
    )
}

/// Mean absolute density difference times bin width: ∫|p_analytic − p_mc|
/// approximated on the histogram grid. The histogram reports bin-averaged
/// densities, so the analytic density is averaged over each bin as well;
/// evaluated at bin centers instead, a density that is spiked at bin scale
/// leaves a resolution artifact no sample count removes.
pub fn l1_distance_to_analytic(g: GaussianInput, hist: &Histogram) -> Result<f64> {
    let first = *hist.bin_edges.first().expect("histogram has edges");
    let last = *hist.bin_edges.last().expect("histogram has edges");
    if first < 0.0 || last > 1.0 {
        return Err(Error::DomainError(format!(
            "activation histogram must span a subset of [0, 1], got [{first}, {last}]"
        )));
    }
    let mut total = 0.0;
    for (w, &density) in hist.bin_edges.windows(2).zip(&hist.densities) {
        let width = w[1] - w[0];
        let analytic = analytic_bin_mass(g, w[0], w[1]) / width;
        total += (analytic - density).abs() * width;
    }
    Ok(total)
}

/// Histograms of what a trained network actually computes on data.
#[derive(Debug, Clone)]
pub struct NetworkDistributions {
    /// One per hidden layer, over the observed pre-activation range.
    pub pre_activations: Vec<Histogram>,
    /// One per hidden layer, over (0, 1).
    pub post_activations: Vec<Histogram>,
    /// All entries of the readout weight matrix.
    pub output_weights: Histogram,
}

pub const DISTRIBUTION_BINS: usize = 200;

/// Noiseless forward pass over up to `sample_cap` inputs, histogramming all
/// hidden pre-activations, hidden activations, and the readout weights.
pub fn collect_network_distributions(
    params: &MlpParams,
    data: &Dataset,
    sample_cap: usize,
) -> Result<NetworkDistributions> {
    let n = data.len().min(sample_cap.max(1));
    let input = data.features.slice(ndarray::s![..n, ..]).to_owned();
    let draws: Vec<Array2<f64>> = (1..params.depth())
        .map(|l| Array2::zeros((n, params.layer_sizes[l])))
        .collect();
    let trace = forward_with_draws(params, &input, &draws)?;
    let mut pre_activations = Vec::new();
    let mut post_activations = Vec::new();
    for l in 1..params.depth() {
        let z: Vec<f64> = trace.pre_activations[l - 1].iter().copied().collect();
        pre_activations.push(Histogram::over_observed_range(&z, DISTRIBUTION_BINS)?);
        let a: Vec<f64> = trace.activations[l].iter().copied().collect();
        post_activations.push(Histogram::uniform(&a, DISTRIBUTION_BINS, (0.0, 1.0))?);
    }
    let w: Vec<f64> = params.weights[params.depth() - 1].iter().copied().collect();
    let output_weights = Histogram::over_observed_range(&w, DISTRIBUTION_BINS)?;
    Ok(NetworkDistributions {
        pre_activations,
        post_activations,
        output_weights,
    })
}

/// Per-row (mean, population standard deviation), ordered by ascending mean.
pub fn row_stats(w: &Array2<f64>) -> Vec<(f64, f64)> {
    let mut stats: Vec<(f64, f64)> = w
        .rows()
        .into_iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect();
    stats.sort_by(|a, b| a.0.total_cmp(&b.0));
    stats
}
