//! Plain-text run configuration.
//!
//! The format is one `key = value` pair per line, keys namespaced with dots
//! (`training.*`, `noise.*`, `reg.*`, `data.*`). Blank lines and lines
//! starting with `#` are ignored. Later assignments win, which is also how
//! command-line overrides are applied: they are replayed after the file.
//!
//! ```text
//! training.mode = reg-uncorrelated
//! training.layer_sizes = 784,300,300,10
//! training.epochs = 20
//! reg.lambda_deriv = 0.01
//! reg.lambda_l2 = 0.0003,0.03
//! reg.deriv_layers = 2
//! data.train = data/mnist_train.nnds
//! data.test = data/mnist_test.nnds
//! ```
//!
//! Unknown keys and malformed values are rejected with their line number.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::network::LossKind;
use crate::noise::{NoiseKind, NoiseSpec};
use crate::regularizers::RegConfig;
use crate::training::{OptimizerKind, TrainConfig, TrainMode};

/// A fully resolved configuration: the training setup plus dataset wiring.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub train_data: Option<String>,
    pub test_data: Option<String>,
    /// Samples held out from the end of the training set for per-epoch
    /// validation.
    pub val_split: usize,
}

#[derive(Debug, Default, Clone)]
pub struct ConfigBuilder {
    mode: Option<TrainMode>,
    layer_sizes: Option<Vec<usize>>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    optimizer: Option<String>,
    momentum: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    learning_rate: Option<f64>,
    seed: Option<u64>,
    loss: Option<LossKind>,
    noise_kind: Option<NoiseKind>,
    noise_variance: Option<f64>,
    noise_sites: Option<BTreeSet<usize>>,
    lambda_rowsum: Option<Vec<f64>>,
    lambda_deriv: Option<f64>,
    lambda_l2: Option<Vec<f64>>,
    deriv_layers: Option<BTreeSet<usize>>,
    train_data: Option<String>,
    test_data: Option<String>,
    val_split: Option<usize>,
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        msg: msg.into(),
    }
}

fn parse_scalar<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.trim().parse().map_err(|_| {
        bad(
            line,
            format!("cannot parse value `{}` for {key}", value.trim()),
        )
    })
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<Vec<T>> {
    let items: Result<Vec<T>> = value
        .split(',')
        .map(|item| parse_scalar(item, line, key))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(bad(line, format!("{key} needs at least one entry")));
    }
    Ok(items)
}

impl ConfigBuilder {
    /// Apply one assignment. `line` is used for error reporting; pass 0 for
    /// command-line overrides.
    pub fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "training.mode" => {
                self.mode =
                    Some(parse_scalar::<TrainMode>(value, line, key).map_err(|_| {
                        bad(line, format!("unknown training mode `{}`", value.trim()))
                    })?)
            }
            "training.layer_sizes" => self.layer_sizes = Some(parse_list(value, line, key)?),
            "training.epochs" => self.epochs = Some(parse_scalar(value, line, key)?),
            "training.batch_size" => self.batch_size = Some(parse_scalar(value, line, key)?),
            "training.optimizer" => self.optimizer = Some(value.trim().to_string()),
            "training.momentum" => self.momentum = Some(parse_scalar(value, line, key)?),
            "training.beta1" => self.beta1 = Some(parse_scalar(value, line, key)?),
            "training.beta2" => self.beta2 = Some(parse_scalar(value, line, key)?),
            "training.epsilon" => self.epsilon = Some(parse_scalar(value, line, key)?),
            "training.learning_rate" => self.learning_rate = Some(parse_scalar(value, line, key)?),
            "training.seed" => self.seed = Some(parse_scalar(value, line, key)?),
            "training.loss" => {
                self.loss = Some(
                    value
                        .trim()
                        .parse::<LossKind>()
                        .map_err(|_| bad(line, format!("unknown loss `{}`", value.trim())))?,
                )
            }
            "noise.kind" => {
                self.noise_kind = Some(
                    value
                        .trim()
                        .parse::<NoiseKind>()
                        .map_err(|_| bad(line, format!("unknown noise kind `{}`", value.trim())))?,
                )
            }
            "noise.variance" => self.noise_variance = Some(parse_scalar(value, line, key)?),
            "noise.sites" => {
                self.noise_sites = Some(parse_list(value, line, key)?.into_iter().collect())
            }
            "reg.lambda_rowsum" => self.lambda_rowsum = Some(parse_list(value, line, key)?),
            "reg.lambda_deriv" => self.lambda_deriv = Some(parse_scalar(value, line, key)?),
            "reg.lambda_l2" => self.lambda_l2 = Some(parse_list(value, line, key)?),
            "reg.deriv_layers" => {
                self.deriv_layers = Some(parse_list(value, line, key)?.into_iter().collect())
            }
            "data.train" => self.train_data = Some(value.trim().to_string()),
            "data.test" => self.test_data = Some(value.trim().to_string()),
            "data.val_split" => self.val_split = Some(parse_scalar(value, line, key)?),
            other => return Err(bad(line, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn finalize(self) -> Result<RunConfig> {
        let mode = self
            .mode
            .ok_or_else(|| Error::ConfigMismatch("config does not set training.mode".into()))?;
        let layer_sizes = self.layer_sizes.unwrap_or_else(|| vec![784, 300, 300, 10]);
        if layer_sizes.len() < 2 {
            return Err(Error::ConfigMismatch(
                "training.layer_sizes needs at least two entries".into(),
            ));
        }
        let per_layer = layer_sizes.len() - 2;

        let optimizer = match self.optimizer.as_deref().unwrap_or("adam") {
            "sgd" => {
                if self.momentum.is_some() || self.beta1.is_some() || self.beta2.is_some() {
                    return Err(Error::ConfigMismatch(
                        "momentum/beta settings do not apply to plain sgd".into(),
                    ));
                }
                OptimizerKind::Sgd
            }
            "sgd-momentum" => {
                if self.beta1.is_some() || self.beta2.is_some() || self.epsilon.is_some() {
                    return Err(Error::ConfigMismatch(
                        "beta/epsilon settings do not apply to sgd-momentum".into(),
                    ));
                }
                OptimizerKind::SgdMomentum {
                    momentum: self.momentum.unwrap_or(0.9),
                }
            }
            "adam" => {
                if self.momentum.is_some() {
                    return Err(Error::ConfigMismatch(
                        "training.momentum does not apply to adam".into(),
                    ));
                }
                OptimizerKind::Adam {
                    beta1: self.beta1.unwrap_or(0.9),
                    beta2: self.beta2.unwrap_or(0.999),
                    epsilon: self.epsilon.unwrap_or(1e-8),
                }
            }
            other => {
                return Err(Error::ConfigMismatch(format!(
                    "unknown optimizer `{other}`"
                )))
            }
        };

        let mut noise = NoiseSpec::new(
            self.noise_kind.unwrap_or(NoiseKind::None),
            self.noise_variance.unwrap_or(0.0),
        )?;
        if let Some(sites) = self.noise_sites {
            noise = noise.with_sites(sites);
        }

        let reg = match mode {
            TrainMode::Standard | TrainMode::NoiseAware => {
                if self.lambda_rowsum.is_some()
                    || self.lambda_deriv.is_some()
                    || self.lambda_l2.is_some()
                    || self.deriv_layers.is_some()
                {
                    return Err(Error::ConfigMismatch(format!(
                        "reg.* keys are not accepted in {} mode",
                        mode.as_str()
                    )));
                }
                RegConfig::none()
            }
            TrainMode::RegCorrelated => {
                if self.lambda_deriv.is_some()
                    || self.lambda_l2.is_some()
                    || self.deriv_layers.is_some()
                {
                    return Err(Error::ConfigMismatch(
                        "reg-correlated mode takes only reg.lambda_rowsum".into(),
                    ));
                }
                RegConfig::correlated(self.lambda_rowsum.unwrap_or_else(|| vec![0.0; per_layer]))
            }
            TrainMode::RegUncorrelated => {
                if self.lambda_rowsum.is_some() {
                    return Err(Error::ConfigMismatch(
                        "reg.lambda_rowsum does not apply to reg-uncorrelated mode".into(),
                    ));
                }
                let mut reg = RegConfig::uncorrelated(
                    self.lambda_deriv.unwrap_or(0.0),
                    self.lambda_l2.unwrap_or_else(|| vec![0.0; per_layer]),
                );
                if let Some(layers) = self.deriv_layers {
                    reg = reg.with_deriv_layers(layers);
                }
                reg
            }
        };

        let val_split = self.val_split.unwrap_or(10_000);
        if val_split == 0 {
            return Err(Error::ConfigMismatch(
                "data.val_split must be at least 1".into(),
            ));
        }

        let train = TrainConfig {
            mode,
            layer_sizes,
            epochs: self.epochs.unwrap_or(30),
            batch_size: self.batch_size.unwrap_or(128),
            optimizer,
            learning_rate: self.learning_rate.unwrap_or(1e-3),
            seed: self.seed.unwrap_or(42),
            noise,
            reg,
            loss: self.loss.unwrap_or(LossKind::SoftmaxCrossEntropy),
        };
        train.validate()?;
        Ok(RunConfig {
            train,
            train_data: self.train_data,
            test_data: self.test_data,
            val_split,
        })
    }
}

/// Parse config text into a builder, leaving room for overrides before
/// [`ConfigBuilder::finalize`].
pub fn parse_config(text: &str) -> Result<ConfigBuilder> {
    let mut builder = ConfigBuilder::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| bad(line, format!("expected key = value, got `{trimmed}`")))?;
        builder.apply(key.trim(), value, line)?;
    }
    Ok(builder)
}

/// Parse text and apply `key=value` overrides on top (overrides report line
/// 0 in errors).
pub fn run_config_from_text(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut builder = parse_config(text)?;
    for (key, value) in overrides {
        builder.apply(key, value, 0)?;
    }
    builder.finalize()
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Canonical key=value listing of the effective configuration. Feeding
    /// the result back through the parser reproduces this config, which is
    /// what makes run manifests replayable.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let t = &self.train;
        let mut out: Vec<(String, String)> = vec![
            ("training.mode".into(), t.mode.as_str().into()),
            ("training.layer_sizes".into(), join(&t.layer_sizes)),
            ("training.epochs".into(), t.epochs.to_string()),
            ("training.batch_size".into(), t.batch_size.to_string()),
            ("training.optimizer".into(), t.optimizer.name().into()),
        ];
        match t.optimizer {
            OptimizerKind::Sgd => {}
            OptimizerKind::SgdMomentum { momentum } => {
                out.push(("training.momentum".into(), momentum.to_string()));
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                out.push(("training.beta1".into(), beta1.to_string()));
                out.push(("training.beta2".into(), beta2.to_string()));
                out.push(("training.epsilon".into(), epsilon.to_string()));
            }
        }
        out.push(("training.learning_rate".into(), t.learning_rate.to_string()));
        out.push(("training.seed".into(), t.seed.to_string()));
        out.push(("training.loss".into(), t.loss.as_str().into()));
        out.push(("noise.kind".into(), t.noise.kind.as_str().into()));
        out.push(("noise.variance".into(), t.noise.variance().to_string()));
        if let Some(sites) = &t.noise.sites {
            out.push(("noise.sites".into(), join(sites.iter())));
        }
        match t.reg.mode {
            crate::regularizers::RegMode::None => {}
            crate::regularizers::RegMode::Correlated => {
                out.push(("reg.lambda_rowsum".into(), join(&t.reg.lambda_rowsum)));
            }
            crate::regularizers::RegMode::Uncorrelated => {
                out.push(("reg.lambda_deriv".into(), t.reg.lambda_deriv.to_string()));
                out.push(("reg.lambda_l2".into(), join(&t.reg.lambda_l2)));
                if let Some(layers) = &t.reg.deriv_layers {
                    out.push(("reg.deriv_layers".into(), join(layers.iter())));
                }
            }
        }
        if let Some(p) = &self.train_data {
            out.push(("data.train".into(), p.clone()));
        }
        if let Some(p) = &self.test_data {
            out.push(("data.test".into(), p.clone()));
        }
        out.push(("data.val_split".into(), self.val_split.to_string()));
        out
    }
}
