//! Experiment configuration: schema-validated TOML with unknown keys
//! rejected, so a typo fails loudly instead of silently running a
//! different experiment.

use fracwave::model::{DampingModel, Excitation, ExcitationKind};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub excitation: ExcitationConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub big_lambda: f64,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExcitationConfig {
    /// "displacement" | "velocity" | "acceleration" | "source"
    pub kind: String,
    pub mode_coefficient: f64,
    pub observation_weight: f64,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        ExcitationConfig {
            kind: "displacement".into(),
            mode_coefficient: 1.0,
            observation_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub grid: GridKind,
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Relative standard deviation of the multiplicative perturbation.
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { level: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Fulltime,
    Largetime,
    Smalltime,
    Peel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    #[serde(default)]
    pub initial_alpha: Vec<f64>,
    #[serde(default)]
    pub initial_b: Vec<f64>,
    /// Starting guess for Lambda (full-time only); defaults to the model value.
    pub initial_lambda: Option<f64>,
    #[serde(default)]
    pub fix_lambda: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Transform abscissa grid for the full-time method.
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_s_count")]
    pub s_count: usize,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    30
}
fn default_s_min() -> f64 {
    0.5
}
fn default_s_max() -> f64 {
    16.0
}
fn default_s_count() -> usize {
    24
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub trace: String,
    pub transform: String,
    pub report: String,
    /// When set, plot data is emitted alongside the main artifact.
    pub plot: Option<String>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            trace: "trace.csv".into(),
            transform: "transform.csv".into(),
            report: "report.txt".into(),
            plot: None,
        }
    }
}

/// A parsed configuration together with the digest of its source bytes;
/// every report records the digest so results stay traceable to the exact
/// configuration that produced them.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub cfg: ExperimentConfig,
    pub digest: String,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&raw)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        cfg.validate()?;
        let digest = hex::encode(Sha256::digest(raw.as_bytes()));
        Ok(LoadedConfig { cfg, digest })
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), String> {
        if self.model.alpha.len() != self.model.b.len() {
            return Err("model.alpha and model.b must have equal length".into());
        }
        if self.sampling.count < 2 {
            return Err("sampling.count must be at least 2".into());
        }
        if self.sampling.t_max <= self.sampling.t_min {
            return Err("sampling.t_max must exceed sampling.t_min".into());
        }
        if self.sampling.grid == GridKind::Geometric && self.sampling.t_min <= 0.0 {
            return Err("a geometric grid needs sampling.t_min > 0".into());
        }
        if self.noise.level < 0.0 {
            return Err("noise.level must be nonnegative".into());
        }
        if self.method.initial_alpha.len() != self.method.initial_b.len() {
            return Err("method.initial_alpha and method.initial_b must have equal length".into());
        }
        self.build_model()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<DampingModel, String> {
        DampingModel::with_unit_beta(self.model.big_lambda, &self.model.alpha, &self.model.b)
            .map_err(|e| format!("model: {e}"))
    }

    pub fn build_excitation(&self) -> Result<Excitation, String> {
        let kind = match self.excitation.kind.as_str() {
            "displacement" => ExcitationKind::InitialDisplacement,
            "velocity" => ExcitationKind::InitialVelocity,
            "acceleration" => ExcitationKind::InitialAcceleration,
            "source" => ExcitationKind::Source,
            other => return Err(format!("unknown excitation kind {other:?}")),
        };
        let exc = Excitation::new(
            kind,
            self.excitation.mode_coefficient,
            self.excitation.observation_weight,
        );
        let model = self.build_model()?;
        exc.validate(&model).map_err(|e| format!("excitation: {e}"))?;
        Ok(exc)
    }

    pub fn time_grid(&self) -> Vec<f64> {
        let s = &self.sampling;
        let n = s.count;
        match s.grid {
            GridKind::Uniform => (0..n)
                .map(|i| s.t_min + (s.t_max - s.t_min) * i as f64 / (n - 1) as f64)
                .collect(),
            GridKind::Geometric => {
                let ratio = (s.t_max / s.t_min).powf(1.0 / (n - 1) as f64);
                (0..n).map(|i| s.t_min * ratio.powi(i as i32)).collect()
            }
        }
    }
}
