//! Declarative run configuration.
//!
//! Every subcommand accepts a JSON config file plus flag overrides; flags
//! win. Unknown keys are rejected. Defaults reproduce the reference
//! experiment protocol: retrieval runs 1000 steps with beta starting at 1.25
//! and increasing by 0.25 every 250 steps, J = 1/3, sigma = 0.25, q = 0.51.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use crate::model::{AnnealSchedule, ModelError, NoiseModel, PcaParams, PriorParams};
use crate::samplers::Method;
use crate::synthesis::MrfGenSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("invalid config {0}: {1}")]
    Parse(PathBuf, serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse(path.to_path_buf(), e))
}

/// Default retrieval schedule: 1000 steps, beta 1.25 + 0.25 every 250.
pub fn default_retrieval_schedule(steps: u32) -> AnnealSchedule {
    AnnealSchedule { beta0: 1.25, increment: 0.25, period: 250, total_steps: steps }
}

/// Default generation schedule: 400 sweeps, beta 0.4 + 0.1 every 50.
pub fn default_generation_schedule(steps: u32) -> AnnealSchedule {
    AnnealSchedule { beta0: 0.4, increment: 0.1, period: 50, total_steps: steps }
}

pub const DEFAULT_COUPLING: f64 = 1.0 / 3.0;
pub const DEFAULT_SIGMA: f64 = 0.25;
pub const DEFAULT_INERTIA: f64 = 0.51;

// ---------------------------------------------------------------------------
// File-level option bags (JSON), one per subcommand.
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateFile {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub levels: Option<u16>,
    pub coupling_j: Option<f64>,
    pub beta0: Option<f64>,
    pub increment: Option<f64>,
    pub period: Option<u32>,
    pub steps: Option<u32>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub view: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradeFile {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub view: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseFile {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub method: Option<Method>,
    pub sigma: Option<f64>,
    pub coupling_j: Option<f64>,
    pub inertia_q: Option<f64>,
    pub norm_exponent: Option<f64>,
    pub beta0: Option<f64>,
    pub increment: Option<f64>,
    pub period: Option<u32>,
    pub steps: Option<u32>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub trace: Option<PathBuf>,
    pub checkpoint_every: Option<u32>,
    pub view: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub levels: Option<u16>,
    pub steps: Option<u32>,
    pub max_threads: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Resolved, validated parameter sets.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GenerateParams {
    pub spec: MrfGenSpec,
    pub output: PathBuf,
    pub view: bool,
}

#[derive(Debug, Clone)]
pub struct DegradeParams {
    pub input: PathBuf,
    pub output: PathBuf,
    pub noise: NoiseModel,
    pub seed: u64,
    pub view: bool,
}

#[derive(Debug, Clone)]
pub struct DenoiseParams {
    pub input: PathBuf,
    pub output: PathBuf,
    pub method: Method,
    /// None means "take sigma from the input sidecar, fall back to 0.25".
    pub sigma: Option<f64>,
    pub prior: PriorParams,
    pub pca: PcaParams,
    pub schedule: AnnealSchedule,
    pub seed: u64,
    pub threads: Option<usize>,
    pub trace: Option<PathBuf>,
    pub checkpoint_every: u32,
    pub view: bool,
}

#[derive(Debug, Clone)]
pub struct BenchParams {
    pub width: usize,
    pub height: usize,
    pub levels: u16,
    pub steps: u32,
    pub max_threads: Option<usize>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

fn check_levels(levels: u16) -> Result<u16, ConfigError> {
    if levels < 2 {
        return Err(ConfigError::Invalid(format!(
            "levels must be at least 2, got {levels}"
        )));
    }
    Ok(levels)
}

fn check_dims(width: usize, height: usize) -> Result<(), ConfigError> {
    if width == 0 || height == 0 {
        return Err(ConfigError::Invalid(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

impl GenerateFile {
    pub fn resolve(self) -> Result<GenerateParams, ConfigError> {
        let width = self.width.unwrap_or(256);
        let height = self.height.unwrap_or(256);
        check_dims(width, height)?;
        let levels = check_levels(self.levels.unwrap_or(5))?;
        let coupling = self.coupling_j.unwrap_or(DEFAULT_COUPLING);
        PriorParams::new(coupling)?;
        let d = default_generation_schedule(self.steps.unwrap_or(400));
        let schedule = AnnealSchedule::new(
            self.beta0.unwrap_or(d.beta0),
            self.increment.unwrap_or(d.increment),
            self.period.unwrap_or(d.period),
            d.total_steps,
        )?;
        Ok(GenerateParams {
            spec: MrfGenSpec {
                width,
                height,
                levels,
                coupling,
                schedule,
                seed: self.seed.unwrap_or(1),
            },
            output: self.output.unwrap_or_else(|| PathBuf::from("mrf.pgm")),
            view: self.view.unwrap_or(false),
        })
    }
}

impl DegradeFile {
    pub fn resolve(self) -> Result<DegradeParams, ConfigError> {
        let input = self
            .input
            .ok_or_else(|| ConfigError::Invalid("degrade requires an input image".into()))?;
        Ok(DegradeParams {
            input,
            output: self.output.unwrap_or_else(|| PathBuf::from("noisy.pgm")),
            noise: NoiseModel::new(self.sigma.unwrap_or(DEFAULT_SIGMA))?,
            seed: self.seed.unwrap_or(1),
            view: self.view.unwrap_or(false),
        })
    }
}

impl DenoiseFile {
    pub fn resolve(self) -> Result<DenoiseParams, ConfigError> {
        let input = self
            .input
            .ok_or_else(|| ConfigError::Invalid("denoise requires an input image".into()))?;
        let method = self
            .method
            .ok_or_else(|| ConfigError::Invalid("denoise requires a method (gibbs or pca)".into()))?;
        if let Some(s) = self.sigma {
            NoiseModel::new(s)?;
        }
        let prior = PriorParams::new(self.coupling_j.unwrap_or(DEFAULT_COUPLING))?;
        let norm_exponent = self.norm_exponent.unwrap_or(0.0);
        if norm_exponent != 0.0 {
            return Err(ConfigError::Invalid(format!(
                "inertial norm exponent p = {norm_exponent} is not supported (only p = 0)"
            )));
        }
        let pca = PcaParams::new(self.inertia_q.unwrap_or(DEFAULT_INERTIA), norm_exponent)?;
        let d = default_retrieval_schedule(self.steps.unwrap_or(1000));
        let schedule = AnnealSchedule::new(
            self.beta0.unwrap_or(d.beta0),
            self.increment.unwrap_or(d.increment),
            self.period.unwrap_or(d.period),
            d.total_steps,
        )?;
        Ok(DenoiseParams {
            input,
            output: self.output.unwrap_or_else(|| PathBuf::from("restored.pgm")),
            method,
            sigma: self.sigma,
            prior,
            pca,
            schedule,
            seed: self.seed.unwrap_or(1),
            threads: self.threads,
            trace: self.trace,
            checkpoint_every: self.checkpoint_every.unwrap_or(0),
            view: self.view.unwrap_or(false),
        })
    }
}

impl BenchFile {
    pub fn resolve(self) -> Result<BenchParams, ConfigError> {
        let width = self.width.unwrap_or(512);
        let height = self.height.unwrap_or(512);
        check_dims(width, height)?;
        Ok(BenchParams {
            width,
            height,
            levels: check_levels(self.levels.unwrap_or(5))?,
            steps: self.steps.unwrap_or(5).max(1),
            max_threads: self.max_threads,
            seed: self.seed.unwrap_or(1),
            output: self.output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_reference_protocol() {
        let p = DenoiseFile {
            input: Some(PathBuf::from("in.pgm")),
            method: Some(Method::Pca),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(p.schedule.total_steps, 1000);
        assert_eq!(p.schedule.beta0, 1.25);
        assert_eq!(p.schedule.increment, 0.25);
        assert_eq!(p.schedule.period, 250);
        assert_eq!(p.pca.inertia, 0.51);
        assert_eq!(p.prior.coupling, 1.0 / 3.0);
        assert_eq!(p.sigma, None);
    }

    #[test]
    fn single_level_generation_is_rejected() {
        let r = GenerateFile { levels: Some(1), ..Default::default() }.resolve();
        assert!(r.is_err());
    }

    #[test]
    fn nonzero_norm_exponent_is_rejected() {
        let r = DenoiseFile {
            input: Some(PathBuf::from("in.pgm")),
            method: Some(Method::Pca),
            norm_exponent: Some(1.0),
            ..Default::default()
        }
        .resolve();
        assert!(r.is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: Result<GenerateFile, _> = serde_json::from_str(r#"{"widht": 8}"#);
        assert!(r.is_err());
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("gibbs".parse::<Method>().unwrap(), Method::Gibbs);
        assert_eq!("PCA".parse::<Method>().unwrap(), Method::Pca);
        assert!("metropolis".parse::<Method>().is_err());
    }
}
