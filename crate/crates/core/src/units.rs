//! Laboratory inputs and the cooperation unit system.
//!
//! Every other module works in cooperation units: time in `T_c`, length in
//! `L_c = c T_c`, field in `E_c = ħ / (d_i T_c)`. This module owns the
//! conversion in both directions.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Laboratory description of the ensemble, the two pumps and the transitions.
///
/// Rates are in s⁻¹. Detunings and pump Rabi frequencies are in units of
/// `gamma03`, with the half-Rabi-frequency convention of the Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    pub density_cm3: f64,
    pub length_m: f64,
    pub radius_m: f64,
    pub gamma01: f64,
    pub gamma03: f64,
    pub gamma12: f64,
    pub gamma32: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub pulse_duration_ns: f64,
    pub idler_wavelength_m: f64,
    pub signal_wavelength_m: f64,
    /// `g_s / g_i`.
    pub coupling_ratio: f64,
    /// Δk in m⁻¹.
    #[serde(default)]
    pub phase_mismatch_per_m: f64,
    /// Idler transition dipole moment in C·m.
    pub idler_dipole_cm: f64,
    /// Superradiant enhancement factor `Nμ`, used only for the Dicke reference time.
    #[serde(default)]
    pub n_mu: Option<f64>,
}

impl PhysicalConfig {
    /// The operating point used throughout the documentation: ⁸⁵Rb cascade,
    /// ρ = 10¹⁰ cm⁻³, 3 mm long cigar of 0.25 mm radius,
    /// (Ω_a, Ω_b, Δ₁, Δ₂) = (0.4, 1, 1, 0) γ₀₃ and a 50 ns pump pulse.
    pub fn rubidium_cascade(density_cm3: f64) -> Self {
        let gamma03 = 1.0 / 26e-9;
        let idler_wavelength_m = 780e-9;
        PhysicalConfig {
            density_cm3,
            length_m: 3e-3,
            radius_m: 0.25e-3,
            gamma01: gamma03,
            gamma03,
            gamma12: 0.156 * gamma03,
            gamma32: 0.156 * gamma03,
            delta1: 1.0,
            delta2: 0.0,
            omega_a: 0.4,
            omega_b: 1.0,
            pulse_duration_ns: 50.0,
            idler_wavelength_m,
            signal_wavelength_m: 1.53e-6,
            coupling_ratio: 0.775,
            phase_mismatch_per_m: 0.0,
            idler_dipole_cm: dipole_from_decay_rate(gamma03, idler_wavelength_m),
            n_mu: None,
        }
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma12 + self.gamma32
    }

    pub fn density_m3(&self) -> f64 {
        self.density_cm3 * 1e6
    }

    pub fn atom_count(&self) -> f64 {
        self.density_m3() * std::f64::consts::PI * self.radius_m * self.radius_m * self.length_m
    }

    pub fn idler_angular_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.idler_wavelength_m
    }

    /// Signal-to-idler dipole ratio `d_s/d_i` implied by the coupling ratio,
    /// since `g ∝ d √ω`.
    pub fn signal_dipole_ratio(&self) -> f64 {
        self.coupling_ratio * (self.signal_wavelength_m / self.idler_wavelength_m).sqrt()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("density_cm3", self.density_cm3),
            ("length_m", self.length_m),
            ("radius_m", self.radius_m),
            ("gamma01", self.gamma01),
            ("gamma03", self.gamma03),
            ("gamma12", self.gamma12),
            ("gamma32", self.gamma32),
            ("pulse_duration_ns", self.pulse_duration_ns),
            ("idler_wavelength_m", self.idler_wavelength_m),
            ("signal_wavelength_m", self.signal_wavelength_m),
            ("coupling_ratio", self.coupling_ratio),
            ("idler_dipole_cm", self.idler_dipole_cm),
        ];
        for (field, value) in positive {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field, value });
            }
            if value <= 0.0 {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        let finite = [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("phase_mismatch_per_m", self.phase_mismatch_per_m),
        ];
        for (field, value) in finite {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field, value });
            }
        }
        if let Some(n_mu) = self.n_mu {
            if !(n_mu >= 0.0) {
                return Err(ConfigError::NegativeNMu(n_mu));
            }
        }
        Ok(())
    }
}

/// Wigner–Weisskopf dipole moment of a two-level transition with decay rate
/// `gamma` (s⁻¹) at `wavelength` (m): `d² = 3π ε₀ ħ c³ γ / ω³`.
pub fn dipole_from_decay_rate(gamma: f64, wavelength_m: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength_m;
    (3.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * HBAR * SPEED_OF_LIGHT.powi(3) * gamma
        / omega.powi(3))
    .sqrt()
}

/// Space-time grid and pump timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub time_points: usize,
    pub space_points: usize,
    pub total_time_ns: f64,
    /// Leading edge of the Ω_a pulse.
    #[serde(default)]
    pub pump_delay_ns: f64,
    /// Ramp the Ω_a edges linearly over one time step instead of switching.
    #[serde(default)]
    pub smooth_pump_edges: bool,
}

impl GridSpec {
    pub fn new(time_points: usize, space_points: usize, total_time_ns: f64) -> Self {
        GridSpec {
            time_points,
            space_points,
            total_time_ns,
            pump_delay_ns: 0.0,
            smooth_pump_edges: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.time_points < 2 {
            return Err(ConfigError::TooFewPoints {
                axis: "time",
                points: self.time_points,
            });
        }
        if self.space_points < 2 {
            return Err(ConfigError::TooFewPoints {
                axis: "space",
                points: self.space_points,
            });
        }
        if !self.total_time_ns.is_finite() {
            return Err(ConfigError::NonFinite {
                field: "total_time_ns",
                value: self.total_time_ns,
            });
        }
        if self.total_time_ns <= 0.0 {
            return Err(ConfigError::NonPositive {
                field: "total_time_ns",
                value: self.total_time_ns,
            });
        }
        if !(self.pump_delay_ns >= 0.0 && self.pump_delay_ns.is_finite()) {
            return Err(ConfigError::NonFinite {
                field: "pump_delay_ns",
                value: self.pump_delay_ns,
            });
        }
        Ok(())
    }

    pub fn time_step_ns(&self) -> f64 {
        self.total_time_ns / (self.time_points - 1) as f64
    }
}

/// Arecchi–Courtens cooperation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperationScale {
    /// `T_c` in seconds.
    pub time_s: f64,
    /// `L_c = c T_c` in metres.
    pub length_m: f64,
    /// `E_c = (1/T_c) / (d_i/ħ)` in V/m.
    pub field_v_per_m: f64,
    /// `N_c = N L_c / L`.
    pub cooperation_number: f64,
}

impl CooperationScale {
    pub fn time_ns(&self) -> f64 {
        self.time_s * 1e9
    }
}

/// `1/T_c = sqrt(d_i² n ω_i / (2 ħ ε₀))`.
pub fn compute_cooperation_scale(cfg: &PhysicalConfig) -> Result<CooperationScale, ConfigError> {
    cfg.validate()?;
    let rate = (cfg.idler_dipole_cm.powi(2) * cfg.density_m3() * cfg.idler_angular_frequency()
        / (2.0 * HBAR * VACUUM_PERMITTIVITY))
        .sqrt();
    let time_s = 1.0 / rate;
    let length_m = SPEED_OF_LIGHT * time_s;
    Ok(CooperationScale {
        time_s,
        length_m,
        field_v_per_m: rate / (cfg.idler_dipole_cm / HBAR),
        cooperation_number: cfg.atom_count() * length_m / cfg.length_m,
    })
}

/// Everything the dynamics needs, in cooperation units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub gamma01: f64,
    pub gamma03: f64,
    pub gamma12: f64,
    pub gamma32: f64,
    pub gamma2: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Peak Ω_a.
    pub omega_a: f64,
    pub omega_b: f64,
    pub phase_mismatch: f64,
    /// `|g_s|² / |g_i|²`.
    pub coupling_sq: f64,
    /// Ensemble length `L / L_c`.
    pub length: f64,
    pub cooperation_number: f64,
    pub dt: f64,
    pub dz: f64,
    pub time_points: usize,
    pub space_points: usize,
    /// Ω_a is on for step-aligned times `[pump_on_step·dt, pump_off_step·dt)`.
    pub pump_on_step: usize,
    pub pump_off_step: usize,
    pub smooth_pump_edges: bool,
    /// `(d_i/d_s)²`, applied to signal intensities.
    pub signal_unit_factor: f64,
    /// `T_c` in ns, for converting outputs.
    pub time_unit_ns: f64,
}

impl DimensionlessParams {
    pub fn time_at(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn time_ns_at(&self, step: usize) -> f64 {
        self.time_at(step) * self.time_unit_ns
    }

    pub fn z_at(&self, index: usize) -> f64 {
        index as f64 * self.dz
    }

    /// Ω_a at dimensionless time `t`.
    pub fn omega_a_at(&self, t: f64) -> f64 {
        let on = self.pump_on_step as f64 * self.dt;
        let off = self.pump_off_step as f64 * self.dt;
        if self.smooth_pump_edges {
            let rise = ((t - on) / self.dt + 0.5).clamp(0.0, 1.0);
            let fall = ((off - t) / self.dt + 0.5).clamp(0.0, 1.0);
            self.omega_a * rise.min(fall)
        } else if t >= on && t < off {
            self.omega_a
        } else {
            0.0
        }
    }

    /// Standard deviation factor for Langevin noises, `1/sqrt(N_c Δt Δz)`.
    pub fn noise_scale(&self) -> f64 {
        1.0 / (self.cooperation_number * self.dt * self.dz).sqrt()
    }

    /// Factor multiplying the closed-form Stratonovich drift corrections.
    pub fn correction_scale(&self) -> f64 {
        1.0 / (self.cooperation_number * self.dz)
    }

    /// Same parameters with both pumps switched off.
    pub fn pumps_off(&self) -> Self {
        DimensionlessParams {
            omega_a: 0.0,
            omega_b: 0.0,
            ..self.clone()
        }
    }

    /// Map back to laboratory rates (s⁻¹), detunings and Rabi frequencies
    /// (units of γ₀₃) and Δk (m⁻¹).
    pub fn to_laboratory(&self, scale: &CooperationScale) -> LaboratoryEcho {
        let gamma03 = self.gamma03 / scale.time_s;
        LaboratoryEcho {
            gamma01: self.gamma01 / scale.time_s,
            gamma03,
            gamma12: self.gamma12 / scale.time_s,
            gamma32: self.gamma32 / scale.time_s,
            delta1: self.delta1 / self.gamma03,
            delta2: self.delta2 / self.gamma03,
            omega_a: self.omega_a / self.gamma03,
            omega_b: self.omega_b / self.gamma03,
            phase_mismatch_per_m: self.phase_mismatch / scale.length_m,
            length_m: self.length * scale.length_m,
        }
    }
}

/// Laboratory values recovered from [`DimensionlessParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaboratoryEcho {
    pub gamma01: f64,
    pub gamma03: f64,
    pub gamma12: f64,
    pub gamma32: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub phase_mismatch_per_m: f64,
    pub length_m: f64,
}

pub fn dimensionless_params(
    cfg: &PhysicalConfig,
    grid: &GridSpec,
    scale: &CooperationScale,
) -> Result<DimensionlessParams, ConfigError> {
    cfg.validate()?;
    grid.validate()?;
    let t_c = scale.time_s;
    let gamma03 = cfg.gamma03 * t_c;
    let step_ns = grid.time_step_ns();
    if step_ns > cfg.pulse_duration_ns {
        return Err(ConfigError::PumpUnresolved {
            step_ns,
            pulse_ns: cfg.pulse_duration_ns,
        });
    }
    let pulse_end_ns = grid.pump_delay_ns + cfg.pulse_duration_ns;
    if grid.total_time_ns < pulse_end_ns {
        return Err(ConfigError::WindowTooShort {
            total_ns: grid.total_time_ns,
            pulse_end_ns,
        });
    }
    let pump_on_step = (grid.pump_delay_ns / step_ns).round() as usize;
    let pump_off_step = (pulse_end_ns / step_ns).round() as usize;
    let length = cfg.length_m / scale.length_m;
    Ok(DimensionlessParams {
        gamma01: cfg.gamma01 * t_c,
        gamma03,
        gamma12: cfg.gamma12 * t_c,
        gamma32: cfg.gamma32 * t_c,
        gamma2: cfg.gamma2() * t_c,
        delta1: cfg.delta1 * gamma03,
        delta2: cfg.delta2 * gamma03,
        omega_a: cfg.omega_a * gamma03,
        omega_b: cfg.omega_b * gamma03,
        phase_mismatch: cfg.phase_mismatch_per_m * scale.length_m,
        coupling_sq: cfg.coupling_ratio * cfg.coupling_ratio,
        length,
        cooperation_number: scale.cooperation_number,
        dt: step_ns * 1e-9 / t_c,
        dz: length / (grid.space_points - 1) as f64,
        time_points: grid.time_points,
        space_points: grid.space_points,
        pump_on_step,
        pump_off_step,
        smooth_pump_edges: grid.smooth_pump_edges,
        signal_unit_factor: cfg.signal_dipole_ratio().powi(-2),
        time_unit_ns: scale.time_ns(),
    })
}

/// Optical depth rows `(ρ in cm⁻³, opd)` reported for a 3 mm ensemble.
pub const REFERENCE_OPTICAL_DEPTHS: [(f64, f64); 6] = [
    (5e7, 0.01),
    (5e8, 0.11),
    (5e9, 1.09),
    (1e10, 2.18),
    (2e10, 4.35),
    (4e10, 8.71),
];
const REFERENCE_LENGTH_M: f64 = 3e-3;

/// Effective cross-section κ (cm²) in `opd = κ ρ L`, least-squares fit
/// through the origin over [`REFERENCE_OPTICAL_DEPTHS`].
pub fn optical_depth_coefficient() -> f64 {
    let length_cm = REFERENCE_LENGTH_M * 100.0;
    let (sxy, sxx) = REFERENCE_OPTICAL_DEPTHS
        .iter()
        .fold((0.0, 0.0), |(sxy, sxx), &(rho, opd)| {
            let x = rho * length_cm;
            (sxy + x * opd, sxx + x * x)
        });
    sxy / sxx
}

/// Optical depth label for reports. Not a dynamical input.
pub fn optical_depth_label(cfg: &PhysicalConfig) -> f64 {
    optical_depth_coefficient() * cfg.density_cm3 * cfg.length_m * 100.0
}
