//! Run configuration: a TOML file whose every key has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::FitConfig;
use crate::dft::DftConfig;
use crate::error::{KgError, Result};
use crate::scattering::KGridSpec;

/// Spectral and scattering grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub dx: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 40.0, dx: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub sample_stride: usize,
    /// Spacing of stored snapshots of the radiation.
    pub snapshot_interval: f64,
    /// Write `field_t####.csv` for each regular snapshot.
    pub write_fields: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { horizon: 150.0, dt: 0.04, sample_stride: 5, snapshot_interval: 5.0, write_fields: false }
    }
}

/// Grid of the time-dependent runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsGridConfig {
    pub dx: f64,
    /// Half width; `T + 20` when absent.
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

impl Default for DynamicsGridConfig {
    fn default() -> Self {
        Self { dx: 0.05, half_width: None }
    }
}

/// Free-data probe of the linear flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearConfig {
    pub t_max: f64,
    pub samples: usize,
    /// Width of the Gaussian datum.
    pub width: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self { t_max: 100.0, samples: 451, width: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaShape {
    Gaussian,
    CompactBump,
    CustomFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Coefficient of the stable direction.
    pub b: f64,
    pub zeta_shape: ZetaShape,
    pub zeta_amplitude: f64,
    /// CSV with columns `x, zeta1[, zeta2]`, used when `zeta_shape = "custom_file"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_file: Option<PathBuf>,
    pub epsilon0: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            b: 3e-4,
            zeta_shape: ZetaShape::Gaussian,
            zeta_amplitude: 6e-4,
            zeta_file: None,
            epsilon0: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootConfig {
    pub horizon: f64,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    /// Added to the shot value before the long run.
    pub s_offset: f64,
    /// Keep the long run on the stable manifold by periodic corrections.
    pub track: bool,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self { horizon: 60.0, tol: 1e-12, s_max: None, s_offset: 0.0, track: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub alpha: f64,
    /// Seed for randomized checks.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub dynamics: DynamicsGridConfig,
    pub k_grid: KGridSpec,
    pub dft: DftConfig,
    pub linear: LinearConfig,
    pub data: DataConfig,
    pub shoot: ShootConfig,
    pub fit: FitConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            seed: 20240611,
            output_dir: None,
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            dynamics: DynamicsGridConfig::default(),
            k_grid: KGridSpec::default(),
            dft: DftConfig::default(),
            linear: LinearConfig::default(),
            data: DataConfig::default(),
            shoot: ShootConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

fn bad(msg: String) -> KgError {
    KgError::Config(msg)
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the config embedded in a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
            let embedded = v
                .get("config")
                .and_then(|c| c.as_str())
                .ok_or_else(|| bad(format!("{} has no embedded config", path.display())))?;
            return Self::from_toml(embedded);
        }
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dynamics_half_width(&self) -> f64 {
        self.dynamics.half_width.unwrap_or(self.time.horizon + 20.0)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("{name} must be positive, got {v}")))
            }
        };
        pos("alpha", self.alpha)?;
        pos("grid.L", self.grid.half_width)?;
        pos("grid.dx", self.grid.dx)?;
        pos("time.T", self.time.horizon)?;
        pos("time.dt", self.time.dt)?;
        pos("time.snapshot_interval", self.time.snapshot_interval)?;
        pos("dynamics.dx", self.dynamics.dx)?;
        pos("dft.dk", self.dft.dk)?;
        pos("dft.k_max", self.dft.k_max)?;
        pos("linear.t_max", self.linear.t_max)?;
        pos("linear.width", self.linear.width)?;
        pos("data.epsilon0", self.data.epsilon0)?;
        pos("shoot.horizon", self.shoot.horizon)?;
        pos("shoot.tol", self.shoot.tol)?;
        pos("fit.t1", self.fit.t1)?;
        pos("fit.envelope_width", self.fit.envelope_width)?;
        if self.time.sample_stride == 0 {
            return Err(bad("time.sample_stride must be at least 1".into()));
        }
        if self.grid.half_width < 10.0 / self.alpha {
            return Err(bad(format!("grid.L must be at least 10 / alpha = {}", 10.0 / self.alpha)));
        }
        if self.time.dt > self.dynamics.dx {
            return Err(bad(format!(
                "CFL: time.dt = {} exceeds dynamics.dx = {}",
                self.time.dt, self.dynamics.dx
            )));
        }
        if self.time.dt > 0.9 * self.dynamics.dx {
            return Err(bad(format!(
                "CFL: time.dt = {} exceeds 0.9 dynamics.dx = {}",
                self.time.dt,
                0.9 * self.dynamics.dx
            )));
        }
        let l = self.dynamics_half_width();
        let reach = self.time.horizon.max(self.shoot.horizon) + 10.0;
        if l < reach {
            return Err(bad(format!("light cone: dynamics.L = {l} must be at least {reach}")));
        }
        if self.shoot.horizon > self.time.horizon {
            return Err(bad("shoot.horizon exceeds time.T".into()));
        }
        self.k_grid.points().map_err(|e| bad(format!("k_grid: {e}")))?;
        if let Some(s) = self.shoot.s_max {
            pos("shoot.s_max", s)?;
        }
        if !self.data.b.is_finite() || !self.data.zeta_amplitude.is_finite() || !self.shoot.s_offset.is_finite() {
            return Err(bad("data and offsets must be finite".into()));
        }
        if self.data.zeta_shape == ZetaShape::CustomFile && self.data.zeta_file.is_none() {
            return Err(bad("zeta_shape = \"custom_file\" needs data.zeta_file".into()));
        }
        let t2 = self.fit.t2.unwrap_or(0.8 * self.time.horizon);
        if !(t2 > self.fit.t1) || t2 > self.time.horizon {
            return Err(bad(format!("fit window [{}, {t2}] is not inside (0, T]", self.fit.t1)));
        }
        if self.linear.samples < 20 || self.linear.t_max <= self.fit.t1 {
            return Err(bad("linear probe needs >= 20 samples beyond fit.t1".into()));
        }
        Ok(())
    }
}
