//! Experiment configuration: one JSON document, units spelled out in the keys.
//!
//! Rates are `_per_gamma` (units of the excited-state decay rate), times and
//! powers carry their SI prefix (`_us`, `_ns`, `_uW`). Every section may be
//! omitted; missing fields fall back to the 13.4 us packet parameter set.

use std::path::Path;

use biphoton_core::model::GAMMA_RAD_PER_S;
use biphoton_core::sim::{AcquisitionConfig, DetectorChain};
use biphoton_core::wavepacket::GridSpec;
use biphoton_core::{BeamGeometry, DecoherenceModel, DriveParams, MediumParams, PhysicalConstants};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub gamma_rad_per_s: f64,
    pub lambda_s_nm: f64,
    pub lambda_as_nm: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        let c = PhysicalConstants::default();
        Self {
            gamma_rad_per_s: GAMMA_RAD_PER_S,
            lambda_s_nm: c.lambda_s * 1e9,
            lambda_as_nm: c.lambda_as * 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    /// Optical depth averaged over the measurement window.
    pub alpha: f64,
    pub decoherence_per_gamma: f64,
    pub od_end_fraction: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        Self {
            alpha: 110.0,
            decoherence_per_gamma: 3.0e-4,
            od_end_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub omega_c_per_gamma: f64,
    pub omega_p_per_gamma: f64,
    pub delta_p_per_gamma: f64,
    #[serde(rename = "pump_power_uW")]
    pub pump_power_uw: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            omega_c_per_gamma: 0.42,
            omega_p_per_gamma: 0.32,
            delta_p_per_gamma: 33.3,
            pump_power_uw: 56.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceConfig {
    pub gamma0_per_gamma: f64,
    /// Coefficient of `(omega_c / Gamma)^2`, dimensionless.
    pub a_switch: f64,
}

impl Default for DecoherenceConfig {
    fn default() -> Self {
        let d = DecoherenceModel::CALIBRATED;
        Self {
            gamma0_per_gamma: d.gamma0,
            a_switch: d.a_switch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub theta_deg: f64,
    pub length_cm: f64,
    pub lambda_p_nm: f64,
    pub lambda_c_nm: f64,
    pub lambda_s_nm: f64,
    pub lambda_as_nm: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = BeamGeometry::default();
        Self {
            theta_deg: g.theta.to_degrees(),
            length_cm: g.length * 1e2,
            lambda_p_nm: g.lambda_p * 1e9,
            lambda_c_nm: g.lambda_c * 1e9,
            lambda_s_nm: g.lambda_s * 1e9,
            lambda_as_nm: g.lambda_as * 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub eta_s: f64,
    pub eta_as: f64,
    pub dark_s_cps: f64,
    pub dark_as_cps: f64,
    pub leak_s_cps: f64,
    pub leak_as_cps: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let d = DetectorChain::default();
        Self {
            eta_s: d.eta_s,
            eta_as: d.eta_as,
            dark_s_cps: d.dark_s,
            dark_as_cps: d.dark_as,
            leak_s_cps: d.leak_s,
            leak_as_cps: d.leak_as,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    pub window_us: f64,
    pub bin_width_ns: f64,
    pub n_trials: u64,
    pub duty_cycle: f64,
    pub rng_seed: u64,
    pub hist_span_us: f64,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self {
            window_us: 240.0,
            bin_width_ns: 51.2,
            n_trials: 105_000,
            duty_cycle: 0.008,
            rng_seed: 0,
            hist_span_us: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub delta_span_per_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Parameters `sweep` accepts.
pub const SWEEP_PARAMETERS: [&str; 6] = [
    "omega_c_per_gamma",
    "alpha",
    "decoherence_per_gamma",
    "omega_p_per_gamma",
    "delta_p_per_gamma",
    "pump_power_uW",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub constants: ConstantsConfig,
    pub medium: MediumConfig,
    pub drive: DriveConfig,
    pub decoherence: DecoherenceConfig,
    pub geometry: GeometryConfig,
    pub detector: DetectorConfig,
    pub acquisition: AcquisitionSection,
    /// `None` picks the grid automatically.
    pub grid: Option<GridConfig>,
    /// In-window pair generation rate at the configured point.
    pub pair_rate_per_s: f64,
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            constants: ConstantsConfig::default(),
            medium: MediumConfig::default(),
            drive: DriveConfig::default(),
            decoherence: DecoherenceConfig::default(),
            geometry: GeometryConfig::default(),
            detector: DetectorConfig::default(),
            acquisition: AcquisitionSection::default(),
            grid: None,
            pair_rate_per_s: 3340.0,
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form of the resolved config.
    pub fn sha256(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.constants().validate()?;
        self.medium().validate()?;
        self.drive().validate()?;
        self.decoherence().validate()?;
        self.geometry().validate()?;
        self.chain().validate()?;
        self.acquisition().validate()?;
        if let Some(g) = self.grid_spec() {
            g.validate()?;
        }
        if !(self.pair_rate_per_s.is_finite() && self.pair_rate_per_s >= 0.0) {
            return Err(CliError::Config(
                "pair_rate_per_s must be finite and >= 0".into(),
            ));
        }
        if let Some(s) = &self.sweep {
            validate_sweep(s)?;
        }
        Ok(())
    }

    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants {
            gamma_e: self.constants.gamma_rad_per_s,
            lambda_s: self.constants.lambda_s_nm * 1e-9,
            lambda_as: self.constants.lambda_as_nm * 1e-9,
        }
    }

    pub fn medium(&self) -> MediumParams {
        MediumParams {
            alpha: self.medium.alpha,
            gamma: self.medium.decoherence_per_gamma,
            od_end_fraction: self.medium.od_end_fraction,
        }
    }

    pub fn drive(&self) -> DriveParams {
        DriveParams {
            omega_c: self.drive.omega_c_per_gamma,
            omega_p: self.drive.omega_p_per_gamma,
            delta_p: self.drive.delta_p_per_gamma,
            pump_power: self.drive.pump_power_uw * 1e-6,
        }
    }

    pub fn decoherence(&self) -> DecoherenceModel {
        DecoherenceModel {
            gamma0: self.decoherence.gamma0_per_gamma,
            a_switch: self.decoherence.a_switch,
        }
    }

    pub fn geometry(&self) -> BeamGeometry {
        let g = &self.geometry;
        BeamGeometry {
            theta: g.theta_deg.to_radians(),
            length: g.length_cm * 1e-2,
            lambda_p: g.lambda_p_nm * 1e-9,
            lambda_c: g.lambda_c_nm * 1e-9,
            lambda_s: g.lambda_s_nm * 1e-9,
            lambda_as: g.lambda_as_nm * 1e-9,
        }
    }

    pub fn chain(&self) -> DetectorChain {
        let d = &self.detector;
        DetectorChain {
            eta_s: d.eta_s,
            eta_as: d.eta_as,
            dark_s: d.dark_s_cps,
            dark_as: d.dark_as_cps,
            leak_s: d.leak_s_cps,
            leak_as: d.leak_as_cps,
        }
    }

    pub fn acquisition(&self) -> AcquisitionConfig {
        let a = &self.acquisition;
        AcquisitionConfig {
            window: a.window_us * 1e-6,
            bin_width: a.bin_width_ns * 1e-9,
            n_trials: a.n_trials,
            duty_cycle: a.duty_cycle,
            rng_seed: a.rng_seed,
            hist_span: a.hist_span_us * 1e-6,
        }
    }

    pub fn grid_spec(&self) -> Option<GridSpec> {
        self.grid
            .map(|g| GridSpec::new(g.n_points, g.delta_span_per_gamma))
    }

    /// Configured grid, or the automatic one for the given point.
    pub fn grid_for(
        &self,
        medium: &MediumParams,
        drive: &DriveParams,
    ) -> Result<GridSpec, CliError> {
        match self.grid_spec() {
            Some(g) => Ok(g),
            None => Ok(GridSpec::auto(medium, drive)?),
        }
    }

    /// Copy with one sweepable field replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        match name {
            "omega_c_per_gamma" => c.drive.omega_c_per_gamma = value,
            "alpha" => c.medium.alpha = value,
            "decoherence_per_gamma" => c.medium.decoherence_per_gamma = value,
            "omega_p_per_gamma" => c.drive.omega_p_per_gamma = value,
            "delta_p_per_gamma" => c.drive.delta_p_per_gamma = value,
            "pump_power_uW" => c.drive.pump_power_uw = value,
            _ => return Err(unknown_parameter(name)),
        }
        Ok(c)
    }
}

fn unknown_parameter(name: &str) -> CliError {
    CliError::Config(format!(
        "unknown sweep parameter `{name}` (expected one of {})",
        SWEEP_PARAMETERS.join(", ")
    ))
}

fn validate_sweep(s: &SweepConfig) -> Result<(), CliError> {
    if !SWEEP_PARAMETERS.contains(&s.parameter.as_str()) {
        return Err(unknown_parameter(&s.parameter));
    }
    if s.values.is_empty() || s.values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config(
            "sweep values must be a nonempty list of finite numbers".into(),
        ));
    }
    Ok(())
}

/// Parse `name=v1,v2,...`.
pub fn parse_sweep(arg: &str) -> Result<SweepConfig, CliError> {
    let (name, list) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--sweep expects name=v1,v2,... (got `{arg}`)")))?;
    let values = list
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad sweep value `{v}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let s = SweepConfig {
        parameter: name.trim().to_string(),
        values,
    };
    validate_sweep(&s)?;
    Ok(s)
}
