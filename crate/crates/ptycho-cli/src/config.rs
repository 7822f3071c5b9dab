//! TOML run configuration: instance source (synthetic parameters or a saved
//! sidecar), solver hyperparameters, and benchmark settings.

use anyhow::{bail, Context, Result};
use ptycho_core::{SolverConfig, Variant};
use serde::Deserialize;
use std::path::Path;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub instance: InstanceConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// "simulate" builds a synthetic instance from the fields below;
    /// "files" loads a saved sidecar.
    #[serde(default = "default_source")]
    pub source: String,
    /// Path to an instance sidecar JSON (source = "files").
    pub sidecar: Option<String>,

    #[serde(default = "default_side")]
    pub side: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_probe_radius")]
    pub probe_radius: f64,
    #[serde(default = "default_probe_amplitude")]
    pub probe_amplitude: f64,
    /// Support radius of the probe constraint; defaults to 110% of the true
    /// probe radius. Values below the true radius model an over-restrictive
    /// pupil.
    pub pupil_radius: Option<f64>,
    #[serde(default = "default_amp_lo")]
    pub object_amp_lo: f64,
    #[serde(default = "default_amp_hi")]
    pub object_amp_hi: f64,
    /// Optional Poisson counting noise on the simulated intensities.
    pub noise: Option<NoiseConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Counts per unit intensity; the expected count at a pixel of
    /// magnitude b is `lambda_scale * b^2`.
    pub lambda_scale: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub variant: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub inner_rounds: usize,
    pub warmup_iters: usize,
    pub max_iters: usize,
    pub seq_tile: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::defaults(Variant::PhebieParallel);
        Self {
            variant: "phebie_parallel".into(),
            alpha: None,
            beta: None,
            gamma: d.gamma,
            eta_x: d.eta_x,
            eta_y: d.eta_y,
            inner_rounds: d.inner_rounds,
            warmup_iters: d.warmup_iters,
            max_iters: d.max_iters,
            seq_tile: d.seq_tile,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    pub trials: usize,
    pub variants: Vec<String>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            trials: 3,
            variants: vec![
                "phebie_whole".into(),
                "phebie_parallel".into(),
                "thibault_dm".into(),
                "maiden_rodenburg".into(),
            ],
        }
    }
}

fn default_source() -> String {
    "simulate".into()
}
fn default_side() -> usize {
    64
}
fn default_grid() -> usize {
    5
}
fn default_stride() -> usize {
    13
}
fn default_probe_radius() -> f64 {
    20.0
}
fn default_probe_amplitude() -> f64 {
    1.0
}
fn default_amp_lo() -> f64 {
    0.6
}
fn default_amp_hi() -> f64 {
    1.4
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        match self.instance.source.as_str() {
            "simulate" => {
                if self.instance.side == 0 || self.instance.grid == 0 {
                    bail!("instance.side and instance.grid must be positive");
                }
            }
            "files" => {
                if self.instance.sidecar.is_none() {
                    bail!("instance.source = \"files\" requires instance.sidecar");
                }
            }
            other => bail!("unknown instance.source {other:?} (expected \"simulate\" or \"files\")"),
        }
        if let Some(n) = &self.instance.noise {
            if !(n.lambda_scale > 0.0) {
                bail!("instance.noise.lambda_scale must be positive");
            }
        }
        Ok(())
    }

    pub fn pupil_radius(&self) -> f64 {
        self.instance
            .pupil_radius
            .unwrap_or(self.instance.probe_radius * 1.1)
    }

    /// Resolves the solver section into a full [`SolverConfig`], applying
    /// any command-line overrides.
    pub fn solver_config(
        &self,
        variant_override: Option<&str>,
        seed_override: Option<u64>,
    ) -> Result<SolverConfig> {
        let name = variant_override.unwrap_or(&self.solver.variant);
        let variant = Variant::parse(name)
            .with_context(|| format!("unknown solver variant {name:?}"))?;
        let mut cfg = SolverConfig::defaults(variant);
        if let Some(a) = self.solver.alpha {
            cfg.alpha = a;
        }
        if let Some(b) = self.solver.beta {
            cfg.beta = b;
        }
        cfg.gamma = self.solver.gamma;
        cfg.eta_x = self.solver.eta_x;
        cfg.eta_y = self.solver.eta_y;
        cfg.inner_rounds = self.solver.inner_rounds;
        cfg.warmup_iters = self.solver.warmup_iters;
        cfg.max_iters = self.solver.max_iters;
        cfg.seq_tile = self.solver.seq_tile;
        cfg.seed = seed_override.unwrap_or(self.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}
