//! Experiment configuration: TOML sections with defaults mirroring the
//! simulated-scenario constants. Unknown keys are rejected so typos fail
//! loudly, with line-precise diagnostics from the parser.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use srstap::harness::{Method, MismatchParameter, PriorSpec, StapSetup};
use srstap::l1solver::BpdnConfig;
use srstap::model::RadarParams;
use srstap::scenario::{ClutterScenario, TargetSpec};
use std::path::Path;
use std::str::FromStr;

use crate::commands::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarSection {
    pub n_sensors: usize,
    pub n_pulses: usize,
    pub velocity: f64,
    pub pri: f64,
    pub wavelength: f64,
    pub spacing: f64,
    pub crab_angle: f64,
    pub noise_power: f64,
}

impl Default for RadarSection {
    fn default() -> Self {
        Self {
            n_sensors: 8,
            n_pulses: 8,
            velocity: 300.0,
            pri: 0.25e-3,
            wavelength: 0.3,
            spacing: 0.15,
            crab_angle: 0.0,
            noise_power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClutterSection {
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    pub n_scatters: usize,
    pub cnr_db: f64,
}

impl Default for ClutterSection {
    fn default() -> Self {
        Self {
            azimuth_min: 30.0,
            azimuth_max: 50.0,
            n_scatters: 200,
            cnr_db: 35.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub rho_s: usize,
    pub rho_d: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { rho_s: 4, rho_d: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Absolute residual allowance; omit for the noise-scaled default
    /// `sqrt(NM δ²)`.
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub rho: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = BpdnConfig::new(0.0);
        Self {
            epsilon: None,
            max_iters: d.max_iters,
            tol: d.tol,
            rho: d.rho,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSection {
    /// Assumed platform velocity; defaults to the true value.
    pub velocity: Option<f64>,
    /// Assumed crab angle; defaults to the true value.
    pub crab_angle: Option<f64>,
    /// Assumed clutter extent; defaults to the true extent.
    pub azimuth_min: Option<f64>,
    pub azimuth_max: Option<f64>,
    pub n_scatters: Option<usize>,
    /// Sparsity override; omit to derive from the prior.
    pub sparsity: Option<usize>,
    /// Scale the prior covariance to the scenario CNR (unit scatter powers
    /// when false).
    pub scale_to_cnr: bool,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self {
            velocity: None,
            crab_angle: None,
            azimuth_min: None,
            azimuth_max: None,
            n_scatters: None,
            sparsity: None,
            scale_to_cnr: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorsSection {
    pub beta_d: f64,
    /// Diagonal loading; defaults to the noise power.
    pub beta_l: Option<f64>,
}

impl Default for EstimatorsSection {
    fn default() -> Self {
        Self {
            beta_d: 1.0,
            beta_l: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub azimuth: f64,
    pub radial_velocity: f64,
    pub amplitude: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            azimuth: 10.0,
            radial_velocity: 45.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub trials: usize,
    pub methods: Vec<String>,
    pub snapshot_counts: Vec<usize>,
    pub sweep_parameter: String,
    pub sweep_values: Vec<f64>,
    pub sweep_snapshots: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 42,
            trials: 100,
            methods: vec!["optimal".into(), "lsmi".into(), "cl".into(), "sr".into()],
            snapshot_counts: (1..=16).collect(),
            sweep_parameter: "velocity".into(),
            sweep_values: vec![250.0, 275.0, 300.0, 325.0, 350.0],
            sweep_snapshots: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub snapshots: usize,
    pub inject_target: bool,
    pub target_cell: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            snapshots: 40,
            inject_target: false,
            target_cell: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub methods: Vec<String>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            methods: vec!["capon".into(), "sr-joint".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangescanSection {
    pub methods: Vec<String>,
    pub window: usize,
    pub guards: usize,
}

impl Default for RangescanSection {
    fn default() -> Self {
        Self {
            methods: vec!["matched".into(), "lsmi".into(), "sr".into()],
            window: 12,
            guards: 4,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub radar: RadarSection,
    pub clutter: ClutterSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub prior: PriorSection,
    pub estimators: EstimatorsSection,
    pub target: TargetSection,
    pub experiment: ExperimentSection,
    pub simulate: SimulateSection,
    pub spectrum: SpectrumSection,
    pub rangescan: RangescanSection,
}

impl ExperimentConfig {
    pub fn params(&self) -> RadarParams {
        RadarParams {
            n_sensors: self.radar.n_sensors,
            n_pulses: self.radar.n_pulses,
            velocity: self.radar.velocity,
            pri: self.radar.pri,
            wavelength: self.radar.wavelength,
            spacing: self.radar.spacing,
            crab_angle_deg: self.radar.crab_angle,
            noise_power: self.radar.noise_power,
        }
    }

    pub fn scenario(&self) -> ClutterScenario {
        ClutterScenario::uniform(
            self.params(),
            (self.clutter.azimuth_min, self.clutter.azimuth_max),
            self.clutter.n_scatters,
            self.clutter.cnr_db,
        )
    }

    pub fn prior_spec(&self) -> PriorSpec {
        PriorSpec {
            velocity: self.prior.velocity.unwrap_or(self.radar.velocity),
            crab_angle_deg: self.prior.crab_angle.unwrap_or(self.radar.crab_angle),
            extent_deg: (
                self.prior.azimuth_min.unwrap_or(self.clutter.azimuth_min),
                self.prior.azimuth_max.unwrap_or(self.clutter.azimuth_max),
            ),
            n_scatters: self.prior.n_scatters.unwrap_or(self.clutter.n_scatters),
            sparsity_override: self.prior.sparsity,
            scale_to_cnr: self.prior.scale_to_cnr,
        }
    }

    pub fn target_spec(&self) -> TargetSpec {
        TargetSpec {
            azimuth_deg: self.target.azimuth,
            radial_velocity: self.target.radial_velocity,
            amplitude: num_complex::Complex64::new(self.target.amplitude, 0.0),
        }
    }

    pub fn bpdn(&self) -> BpdnConfig {
        let params = self.params();
        let epsilon = self
            .solver
            .epsilon
            .unwrap_or_else(|| (params.dim() as f64 * params.noise_power).sqrt());
        BpdnConfig {
            epsilon,
            max_iters: self.solver.max_iters,
            tol: self.solver.tol,
            rho: self.solver.rho,
        }
    }

    pub fn setup(&self) -> Result<StapSetup, CliError> {
        let scenario = self.scenario();
        scenario
            .params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        StapSetup::new(
            scenario,
            self.grid.rho_s,
            self.grid.rho_d,
            self.prior_spec(),
            &self.target_spec(),
            Some(self.bpdn()),
            self.estimators.beta_d,
            self.estimators.beta_l,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn methods(&self) -> Result<Vec<Method>, CliError> {
        self.experiment
            .methods
            .iter()
            .map(|m| Method::from_str(m).map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn sweep_parameter(&self) -> Result<MismatchParameter, CliError> {
        MismatchParameter::from_str(&self.experiment.sweep_parameter)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Hash of the fully resolved configuration, echoed into every output so
    /// results are self-describing.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("resolved config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Load and resolve a configuration. A missing path means full defaults.
pub fn load(path: Option<&Path>, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = match path {
        None => ExperimentConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("in {}: {e}", p.display())))?
        }
    };
    if let Some(seed) = seed_override {
        cfg.experiment.seed = seed;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let err = |msg: String| Err(CliError::Config(msg));
    if cfg.clutter.azimuth_min >= cfg.clutter.azimuth_max {
        return err(format!(
            "clutter extent is empty: [{}, {}]",
            cfg.clutter.azimuth_min, cfg.clutter.azimuth_max
        ));
    }
    if cfg.grid.rho_s < 1 || cfg.grid.rho_d < 1 {
        return err("grid scales must be at least 1".into());
    }
    if let Some(eps) = cfg.solver.epsilon {
        if eps.is_nan() || eps < 0.0 {
            return err(format!("solver epsilon must be non-negative, got {eps}"));
        }
    }
    if cfg.experiment.trials < 1 {
        return err("experiment.trials must be at least 1".into());
    }
    if cfg.experiment.snapshot_counts.iter().any(|&l| l < 1) {
        return err("experiment.snapshot_counts must all be at least 1".into());
    }
    if cfg.simulate.snapshots < 1 {
        return err("simulate.snapshots must be at least 1".into());
    }
    if cfg.simulate.inject_target && cfg.simulate.target_cell >= cfg.simulate.snapshots {
        return err(format!(
            "simulate.target_cell {} outside the {} simulated cells",
            cfg.simulate.target_cell, cfg.simulate.snapshots
        ));
    }
    if !cfg.rangescan.guards.is_multiple_of(2) {
        return err("rangescan.guards must be even".into());
    }
    if cfg.rangescan.window < 1 {
        return err("rangescan.window must be at least 1".into());
    }
    cfg.params()
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(())
}
