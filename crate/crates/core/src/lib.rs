//! Training and analysis of feed-forward networks under additive analog
//! noise.
//!
//! The crate models hardware whose activations are perturbed by zero-mean
//! Gaussian noise each time a layer output is read, and provides:
//!
//! - IDX dataset parsing and in-memory datasets ([`idx`]),
//! - a noisy forward pass with exact record of every draw, and
//!   backpropagation through it ([`network`]),
//! - correlated and uncorrelated noise models ([`noise`]),
//! - penalties that make trained weights robust to each noise family
//!   ([`regularizers`]),
//! - the sigmoid change-of-variables density and histogram tooling
//!   ([`pdf`]),
//! - training loops for the four supported modes and a finite-difference
//!   gradient checker ([`training`]),
//! - Monte Carlo accuracy-vs-variance sweeps ([`evaluation`]),
//! - a binary checkpoint format ([`checkpoint`]) and a plain-text run
//!   configuration format ([`config`]).
//!
//! All numerics are `f64`. Every random quantity flows from a single `u64`
//! seed through labeled substreams ([`stream`]), so results are bit-for-bit
//! reproducible regardless of thread count.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod idx;
pub mod network;
pub mod noise;
pub mod pdf;
pub mod regularizers;
pub mod stream;
pub mod training;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
pub use config::{parse_config, run_config_from_text, ConfigBuilder, RunConfig};
pub use error::{Error, Result};
pub use evaluation::{
    default_variance_grid, drop_report, evaluate_accuracy, noise_sweep, SweepPoint, SweepResult,
};
pub use idx::{parse_idx_images, parse_idx_labels, Dataset};
pub use network::{
    backward, forward, forward_with_draws, loss_and_output_grad, ForwardTrace, Gradients, LossKind,
    MlpParams,
};
pub use noise::{sample_layer_noise, NoiseKind, NoiseSpec};
pub use pdf::{
    analytic_activation_pdf, analytic_moments, collect_network_distributions,
    empirical_activation_pdf, GaussianInput, Histogram, NetworkDistributions,
};
pub use regularizers::{
    derivative_penalty, l2_penalty, row_sum_penalty, RegConfig, RegMode, RegTerms,
};
pub use stream::{derive_seed, rng_from};
pub use training::{
    gradient_check, train, train_with_observer, GradCheckReport, OptimizerKind, TrainConfig,
    TrainHistory, TrainMode,
};
