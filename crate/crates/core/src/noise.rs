//! Additive Gaussian noise models for analog activation hardware.
//!
//! Correlated noise applies one shared draw to every neuron of a layer in a
//! given forward pass (shared physical components: supply voltage,
//! temperature). Uncorrelated noise draws independently per neuron from the
//! same zero-mean Gaussian. Draws are independent across layers and across
//! batch rows.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Correlated,
    Uncorrelated,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Correlated => "correlated",
            NoiseKind::Uncorrelated => "uncorrelated",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseKind::None),
            "correlated" => Ok(NoiseKind::Correlated),
            "uncorrelated" => Ok(NoiseKind::Uncorrelated),
            other => Err(Error::ConfigMismatch(format!(
                "unknown noise kind `{other}`"
            ))),
        }
    }
}

/// Where and how much noise to inject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Gaussian variance, as an ordered bit pattern for Eq-comparison.
    variance_bits: u64,
    /// Hidden layers (1-based, `1..=L-1`) receiving noise; `None` = all.
    pub sites: Option<BTreeSet<usize>>,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, variance: f64) -> Result<Self> {
        if !variance.is_finite() || variance < 0.0 {
            return Err(Error::NegativeVariance(variance));
        }
        Ok(NoiseSpec {
            kind,
            variance_bits: variance.to_bits(),
            sites: None,
        })
    }

    pub fn none() -> Self {
        NoiseSpec {
            kind: NoiseKind::None,
            variance_bits: 0f64.to_bits(),
            sites: None,
        }
    }

    pub fn correlated(variance: f64) -> Result<Self> {
        Self::new(NoiseKind::Correlated, variance)
    }

    pub fn uncorrelated(variance: f64) -> Result<Self> {
        Self::new(NoiseKind::Uncorrelated, variance)
    }

    pub fn with_sites(mut self, sites: BTreeSet<usize>) -> Self {
        self.sites = Some(sites);
        self
    }

    pub fn variance(&self) -> f64 {
        f64::from_bits(self.variance_bits)
    }

    /// Whether hidden layer `layer` (1-based) receives noise under this spec.
    pub fn covers(&self, layer: usize) -> bool {
        match &self.sites {
            None => true,
            Some(set) => set.contains(&layer),
        }
    }

    pub fn is_active(&self) -> bool {
        self.kind != NoiseKind::None && self.variance() > 0.0
    }
}

/// Sample one layer's noise for a batch.
///
/// `none` (or zero variance) yields an exact zero matrix. `correlated` draws
/// one scalar per batch row and replicates it across the layer width.
/// `uncorrelated` draws i.i.d. per entry, row-major.
pub fn sample_layer_noise<R: Rng + ?Sized>(
    spec: &NoiseSpec,
    width: usize,
    batch: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let variance = spec.variance();
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    if spec.kind == NoiseKind::None || variance == 0.0 {
        return Ok(Array2::zeros((batch, width)));
    }
    let normal =
        Normal::new(0.0, variance.sqrt()).map_err(|_| Error::NegativeVariance(variance))?;
    match spec.kind {
        NoiseKind::None => unreachable!(),
        NoiseKind::Correlated => {
            let mut out = Array2::zeros((batch, width));
            for mut row in out.rows_mut() {
                let draw = normal.sample(rng);
                row.fill(draw);
            }
            Ok(out)
        }
        NoiseKind::Uncorrelated => {
            let data: Vec<f64> = (0..batch * width).map(|_| normal.sample(rng)).collect();
            Array2::from_shape_vec((batch, width), data)
                .map_err(|e| Error::ShapeMismatch(e.to_string()))
        }
    }
}
