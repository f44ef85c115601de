//! TOML run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};
use crate::integrator::StepControl;
use crate::units::{
    compute_cooperation_scale, dimensionless_params, dipole_from_decay_rate, CooperationScale, DimensionlessParams,
    GridSpec, PhysicalConfig,
};

/// Atomic sample geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub density_cm3: f64,
    pub length_m: f64,
    pub radius_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_mu: Option<f64>,
}

/// Decay rates in s⁻¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub gamma01: f64,
    pub gamma03: f64,
    pub gamma12: f64,
    pub gamma32: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionsSection {
    pub idler_wavelength_m: f64,
    pub signal_wavelength_m: f64,
    /// `g_s / g_i`.
    pub coupling_ratio: f64,
    /// Idler dipole moment in C·m; derived from γ03 and λ_i when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler_dipole_cm: Option<f64>,
    #[serde(default)]
    pub phase_mismatch_per_m: f64,
}

/// Pump amplitudes and detunings in units of γ03.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpsSection {
    pub omega_a: f64,
    pub omega_b: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub pulse_duration_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub ensemble: EnsembleSection,
    pub rates: RatesSection,
    pub transitions: TransitionsSection,
    pub pumps: PumpsSection,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: StepControl,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub physical: PhysicalConfig,
    pub grid: GridSpec,
    pub control: StepControl,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: RunFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        RunConfig::try_from(file)
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(format!("reading {}", path.display()), e))?;
        Ok(RunConfig::from_toml_str(&text)?)
    }

    /// Checks every field and that the grid resolves the pump.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.control.validate()?;
        self.dimensionless().map(|_| ())
    }

    pub fn dimensionless(&self) -> Result<(CooperationScale, DimensionlessParams), ConfigError> {
        let scale = compute_cooperation_scale(&self.physical)?;
        let params = dimensionless_params(&self.physical, &self.grid, &scale)?;
        Ok((scale, params))
    }

    pub fn to_file_format(&self) -> RunFile {
        let p = &self.physical;
        RunFile {
            ensemble: EnsembleSection {
                density_cm3: p.density_cm3,
                length_m: p.length_m,
                radius_m: p.radius_m,
                n_mu: p.n_mu,
            },
            rates: RatesSection {
                gamma01: p.gamma01,
                gamma03: p.gamma03,
                gamma12: p.gamma12,
                gamma32: p.gamma32,
            },
            transitions: TransitionsSection {
                idler_wavelength_m: p.idler_wavelength_m,
                signal_wavelength_m: p.signal_wavelength_m,
                coupling_ratio: p.coupling_ratio,
                idler_dipole_cm: Some(p.idler_dipole_cm),
                phase_mismatch_per_m: p.phase_mismatch_per_m,
            },
            pumps: PumpsSection {
                omega_a: p.omega_a,
                omega_b: p.omega_b,
                delta1: p.delta1,
                delta2: p.delta2,
                pulse_duration_ns: p.pulse_duration_ns,
            },
            grid: self.grid.clone(),
            solver: self.control,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file_format()).expect("configuration always serializes")
    }

    /// Same run at another density.
    pub fn with_density(&self, density_cm3: f64) -> Self {
        let mut c = self.clone();
        c.physical.density_cm3 = density_cm3;
        c
    }
}

impl TryFrom<RunFile> for RunConfig {
    type Error = ConfigError;

    fn try_from(f: RunFile) -> Result<Self, ConfigError> {
        let idler_dipole_cm = f
            .transitions
            .idler_dipole_cm
            .unwrap_or_else(|| dipole_from_decay_rate(f.rates.gamma03, f.transitions.idler_wavelength_m));
        let physical = PhysicalConfig {
            density_cm3: f.ensemble.density_cm3,
            length_m: f.ensemble.length_m,
            radius_m: f.ensemble.radius_m,
            gamma01: f.rates.gamma01,
            gamma03: f.rates.gamma03,
            gamma12: f.rates.gamma12,
            gamma32: f.rates.gamma32,
            delta1: f.pumps.delta1,
            delta2: f.pumps.delta2,
            omega_a: f.pumps.omega_a,
            omega_b: f.pumps.omega_b,
            pulse_duration_ns: f.pumps.pulse_duration_ns,
            idler_wavelength_m: f.transitions.idler_wavelength_m,
            signal_wavelength_m: f.transitions.signal_wavelength_m,
            coupling_ratio: f.transitions.coupling_ratio,
            phase_mismatch_per_m: f.transitions.phase_mismatch_per_m,
            idler_dipole_cm,
            n_mu: f.ensemble.n_mu,
        };
        let cfg = RunConfig {
            physical,
            grid: f.grid,
            control: f.solver,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_grid;

    const EXAMPLE: &str = include_str!("../../../configs/rb85_operating_point.toml");

    #[test]
    fn bundled_example_is_the_operating_point() {
        let cfg = RunConfig::from_toml_str(EXAMPLE).unwrap();
        let reference = PhysicalConfig::rubidium_cascade(1e10);
        let p = &cfg.physical;
        assert!((p.gamma03 - reference.gamma03).abs() / reference.gamma03 < 1e-6);
        assert!((p.gamma12 - reference.gamma12).abs() / reference.gamma12 < 1e-3);
        assert!((p.idler_dipole_cm - reference.idler_dipole_cm).abs() / reference.idler_dipole_cm < 1e-6);
        assert_eq!((p.omega_a, p.omega_b, p.delta1, p.delta2), (0.4, 1.0, 1.0, 0.0));
        assert_eq!(p.pulse_duration_ns, 50.0);
        assert_eq!(cfg.grid.time_points, reference_grid().time_points);
        assert_eq!(cfg.grid.space_points, reference_grid().space_points);
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = RunConfig::from_toml_str(EXAMPLE).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_are_configuration_errors() {
        let broken = EXAMPLE.replace("density_cm3 = 1.0e10", "density_cm3 = -1.0");
        assert!(matches!(
            RunConfig::from_toml_str(&broken),
            Err(ConfigError::NonPositive { field: "density_cm3", .. })
        ));
        let typo = EXAMPLE.replace("omega_b", "omegab");
        assert!(matches!(RunConfig::from_toml_str(&typo), Err(ConfigError::Parse(_))));
        let coarse = EXAMPLE.replace("time_points = 101", "time_points = 2");
        assert!(matches!(
            RunConfig::from_toml_str(&coarse),
            Err(ConfigError::PumpUnresolved { .. })
        ));
        let short = EXAMPLE.replace("total_time_ns = 140.0", "total_time_ns = 40.0");
        assert!(matches!(
            RunConfig::from_toml_str(&short),
            Err(ConfigError::WindowTooShort { .. })
        ));
        let solver = EXAMPLE.replace("max_iterations = 500", "max_iterations = 1");
        assert!(RunConfig::from_toml_str(&solver).is_err());
        let no_solver = &EXAMPLE[..EXAMPLE.find("[solver]").unwrap()];
        assert_eq!(RunConfig::from_toml_str(no_solver).unwrap().control, StepControl::default());
    }
}
