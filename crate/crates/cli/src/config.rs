use std::path::{Path, PathBuf};

use ppgstress::compress::PruneConfig;
use ppgstress::model::DEFAULT_HIDDEN_UNITS;
use ppgstress::qengine::Budget;
use ppgstress::scalogram::CwtConfig;
use ppgstress::signal::{DEFAULT_SAMPLE_RATE_HZ, DEFAULT_STRIDE_S, DEFAULT_WINDOW_S};
use ppgstress::train::TrainConfig;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub records_per_class: usize,
    pub duration_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            records_per_class: 5,
            duration_s: 59.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub sample_rate_hz: f64,
    pub window_s: f64,
    pub stride_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            window_s: DEFAULT_WINDOW_S,
            stride_s: DEFAULT_STRIDE_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden_units: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_units: DEFAULT_HIDDEN_UNITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantizeConfig {
    /// Images drawn evenly from the calibration set.
    pub calibration_images: usize,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self {
            calibration_images: 64,
        }
    }
}

/// Default artifact locations, used when a stage's flag is omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub records: Option<PathBuf>,
    pub scalograms: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub pruned: Option<PathBuf>,
    pub quantized: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub pr_curve: Option<PathBuf>,
    pub budget: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Everything a pipeline run needs. Loaded from TOML or JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub windowing: WindowConfig,
    pub cwt: CwtConfig,
    pub model: ModelConfig,
    /// `seed` and `augment.seed` are overwritten from the run seed.
    pub train: TrainConfig,
    pub prune: PruneConfig,
    pub quantize: QuantizeConfig,
    pub budget: Budget,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Streams derived from the run seed, one per stochastic stage.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Synth = 1,
    Init = 2,
    Train = 3,
    Augment = 4,
}

pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}
