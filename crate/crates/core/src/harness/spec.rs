use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AggregateMode;
use crate::data::{CircleSpec, GroupingSpec};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::nn::{Activation, TrainConfig};

/// Environment variable naming the default directory of benchmark files.
pub const DATA_DIR_ENV: &str = "GRANLAB_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TrainSize,
    HiddenNeurons,
    Redundancy,
    Beta,
    /// Cartesian product of `values` (train sizes) and `hidden_values`
    /// (fine widths), reported against `n_fine / p`.
    ParamDataRatio,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::TrainSize => "train_size",
            SweepAxis::HiddenNeurons => "hidden_neurons",
            SweepAxis::Redundancy => "redundancy",
            SweepAxis::Beta => "beta",
            SweepAxis::ParamDataRatio => "param_data_ratio",
        })
    }
}

/// A grouping preset name or an inline grouping document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupingRef {
    Named(String),
    Inline(GroupingSpec),
}

impl GroupingRef {
    pub fn resolve(&self) -> Result<GroupingSpec> {
        match self {
            GroupingRef::Named(name) => GroupingSpec::resolve(name),
            GroupingRef::Inline(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SourceSpec {
    /// Concentric circles; the training pool is regenerated only when the
    /// redundancy changes, so every point shares its geometry.
    Circles {
        k: usize,
        #[serde(default)]
        redundancy: f64,
        #[serde(default)]
        radial_jitter: Option<f64>,
        #[serde(default)]
        sector_offset_per_circle: f64,
        /// Size of the training pool; defaults to the largest train size.
        #[serde(default)]
        pool_size: Option<usize>,
    },
    /// A benchmark from the source registry, grouped into two coarse classes.
    Real {
        dataset: String,
        grouping: GroupingRef,
        #[serde(default)]
        data_dir: Option<PathBuf>,
    },
    /// A dataset document written by `generate`.
    File { path: PathBuf },
}

impl SourceSpec {
    pub fn circle_spec(
        &self,
        n_points: usize,
        seed: u64,
        redundancy: Option<f64>,
    ) -> Option<CircleSpec> {
        match self {
            SourceSpec::Circles {
                k,
                redundancy: r,
                radial_jitter,
                sector_offset_per_circle,
                ..
            } => Some(CircleSpec {
                k: *k,
                n_points,
                redundancy: redundancy.unwrap_or(*r),
                radial_jitter: *radial_jitter,
                sector_offset_per_circle: *sector_offset_per_circle,
                seed,
            }),
            _ => None,
        }
    }

    pub fn data_dir(&self) -> Option<PathBuf> {
        match self {
            SourceSpec::Real { data_dir, .. } => data_dir
                .clone()
                .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)),
            _ => None,
        }
    }
}

fn default_replicates() -> usize {
    30
}

fn default_true() -> bool {
    true
}

fn default_fine_loss() -> LossKind {
    LossKind::Fine
}

/// A complete sweep: data source, one axis, model sizes and training setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub source: SourceSpec,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Fine widths for the `param_data_ratio` axis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hidden_values: Vec<usize>,
    /// Training-set size when the axis is not `train_size`.
    #[serde(default)]
    pub train_size: Option<usize>,
    pub fine_hidden: usize,
    /// `None` derives the coarse width by capacity matching.
    #[serde(default)]
    pub coarse_hidden: Option<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Objective of the softmax model; the `beta` axis overrides it with
    /// the hybrid loss.
    #[serde(default = "default_fine_loss")]
    pub fine_loss: LossKind,
    #[serde(default)]
    pub train: TrainConfig,
    /// `None` picks the batch size from the training-set size.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub test_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub aggregate: AggregateMode,
    #[serde(default = "default_true")]
    pub stratified: bool,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let spec: ExperimentSpec =
            crate::io::read_json(path).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates must be at least 1"));
        }
        if self.test_size == 0 {
            return Err(Error::config("test_size must be positive"));
        }
        if self.fine_hidden == 0 || self.coarse_hidden == Some(0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if self.values.is_empty() {
            return Err(Error::config("sweep needs at least one axis value"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("axis values must be finite"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("axis values must be strictly increasing"));
        }
        let integral = |v: f64| v >= 1.0 && v.fract() == 0.0;
        match self.axis {
            SweepAxis::TrainSize | SweepAxis::HiddenNeurons | SweepAxis::ParamDataRatio => {
                if !self.values.iter().all(|&v| integral(v)) {
                    return Err(Error::config(format!(
                        "{} values must be positive integers",
                        self.axis
                    )));
                }
            }
            SweepAxis::Redundancy => {
                if !matches!(self.source, SourceSpec::Circles { .. }) {
                    return Err(Error::config("the redundancy axis needs a circles source"));
                }
            }
            SweepAxis::Beta => {
                if self.values.iter().any(|b| !(0.0..=1.0).contains(b)) {
                    return Err(Error::config("beta values must lie in [0, 1]"));
                }
            }
        }
        if self.axis == SweepAxis::ParamDataRatio {
            if self.hidden_values.is_empty() || self.hidden_values.contains(&0) {
                return Err(Error::config(
                    "param_data_ratio needs positive hidden_values alongside train-size values",
                ));
            }
        } else if !self.hidden_values.is_empty() {
            return Err(Error::config(
                "hidden_values is only used by the param_data_ratio axis",
            ));
        }
        if !matches!(self.axis, SweepAxis::TrainSize | SweepAxis::ParamDataRatio)
            && self.train_size.is_none()
        {
            return Err(Error::config(format!(
                "train_size is required for the {} axis",
                self.axis
            )));
        }
        if let Some(c) = self.source.circle_spec(1, 0, None) {
            c.validate()?;
        }
        let mut train = self.train.clone();
        train.batch_size = self.batch_size.unwrap_or(1);
        train.validate()
    }

    /// Largest training-set size any point of the sweep asks for.
    pub fn max_train_size(&self) -> usize {
        match self.axis {
            SweepAxis::TrainSize | SweepAxis::ParamDataRatio => {
                self.values.iter().fold(0.0f64, |a, &b| a.max(b)) as usize
            }
            _ => self.train_size.unwrap_or(0),
        }
    }
}
