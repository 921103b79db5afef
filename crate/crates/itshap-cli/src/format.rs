//! JSON and CSV schemas shared by the commands.
//!
//! All files are JSON except benchmark tables, which are CSV. Field order
//! is fixed by declaration order and floats serialize in shortest
//! round-trip decimal, so re-reading and re-serializing any file written
//! here is byte-identical. Feature indices and instance coordinates are
//! 1-based on disk and 0-based inside the library.

use serde::{Deserialize, Serialize};

use itshap::tt::{DenseTensor, TensorTrain};
use itshap::value::{DistributionTensor, ModelTensor};

use crate::CliError;

/// Serialized tensor train: cores as flat 64-bit float arrays in row-major
/// `(left rank, mode, right rank)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtContainerFile {
    pub mode_sizes: Vec<usize>,
    /// Bond dimensions `r_0 .. r_n` including the unit boundaries.
    pub ranks: Vec<usize>,
    pub cores: Vec<Vec<f64>>,
}

impl TtContainerFile {
    pub fn from_train(tt: &TensorTrain) -> Self {
        TtContainerFile {
            mode_sizes: tt.mode_sizes(),
            ranks: tt.ranks(),
            cores: (0..tt.n_modes()).map(|i| tt.core_flat(i)).collect(),
        }
    }

    pub fn to_train(&self) -> Result<TensorTrain, CliError> {
        TensorTrain::from_flat_cores(&self.mode_sizes, &self.ranks, &self.cores)
            .map_err(|e| CliError::Parse(e.to_string()))
    }
}

/// A model or distribution payload: dense values or a train container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorSpec {
    /// Flat row-major values (models: domain modes then output mode).
    Dense(Vec<f64>),
    Tt(TtContainerFile),
}

/// Problem description: domain, model, and background distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub domain: Vec<usize>,
    pub n_outputs: usize,
    pub model: TensorSpec,
    pub distribution: TensorSpec,
}

impl ProblemFile {
    pub fn model_tensor(&self) -> Result<ModelTensor, CliError> {
        let mut sizes = self.domain.clone();
        sizes.push(self.n_outputs);
        match &self.model {
            TensorSpec::Dense(values) => {
                let dense = DenseTensor::new(sizes, values.clone())?;
                Ok(ModelTensor::from_dense(dense, self.n_outputs)?)
            }
            TensorSpec::Tt(container) => {
                if container.mode_sizes != sizes {
                    return Err(CliError::Domain(format!(
                        "model train modes {:?} do not match domain {:?} plus {} outputs",
                        container.mode_sizes, self.domain, self.n_outputs
                    )));
                }
                Ok(ModelTensor::from_tt(container.to_train()?, self.n_outputs)?)
            }
        }
    }

    pub fn distribution_tensor(&self) -> Result<DistributionTensor, CliError> {
        match &self.distribution {
            TensorSpec::Dense(values) => {
                let dense = DenseTensor::new(self.domain.clone(), values.clone())?;
                Ok(DistributionTensor::from_dense(dense)?)
            }
            TensorSpec::Tt(container) => {
                if container.mode_sizes != self.domain {
                    return Err(CliError::Domain(format!(
                        "distribution train modes {:?} do not match domain {:?}",
                        container.mode_sizes, self.domain
                    )));
                }
                Ok(DistributionTensor::from_tt(container.to_train()?)?)
            }
        }
    }
}

/// A standalone dense tensor, the input format of `decompose`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseTensorFile {
    pub mode_sizes: Vec<usize>,
    pub entries: Vec<f64>,
}

/// One interaction component: 1-based sorted feature list plus one value
/// per model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentOut {
    pub subset: Vec<usize>,
    pub values: Vec<f64>,
}

/// Bond-rank summary of a train-backed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RanksOut {
    pub value: Vec<usize>,
    pub weight_max: usize,
    pub contracted_max: usize,
    pub reduction_depth: usize,
}

/// Wall-clock phases in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingsOut {
    pub value_build: f64,
    pub contraction: f64,
}

/// Output of `explain`: every component of order up to `order`, sorted by
/// subset size then lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub instance: Vec<usize>,
    pub order: usize,
    pub backend: String,
    pub components: Vec<ComponentOut>,
    pub efficiency_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_backend_max_diff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<RanksOut>,
    pub timings_ms: TimingsOut,
}

/// Benchmark configuration: problem sizes to time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfigFile {
    pub cases: Vec<BenchCaseFile>,
}

fn default_mode_size() -> usize {
    2
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCaseFile {
    pub n: usize,
    pub k: usize,
    pub rank: usize,
    #[serde(default = "default_mode_size")]
    pub mode_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Subset mask to a 1-based sorted feature list.
pub fn subset_to_features(mask: u32) -> Vec<usize> {
    (0..32)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| i + 1)
        .collect()
}
