//! The 19-variable positive-P state and the deterministic part of its
//! equations of motion.
//!
//! Slots follow the α numbering of the characteristic-function ordering,
//! shifted to zero-based indices:
//!
//! | slot | α  | variable | slot | α  | variable |
//! |------|----|----------|------|----|----------|
//! | 0    | 1  | E_i⁺     | 10   | 11 | π33      |
//! | 1    | 2  | E_i⁻     | 11   | 12 | π22      |
//! | 2    | 3  | E_s⁺     | 12   | 13 | π11      |
//! | 3    | 4  | E_s⁻     | 13   | 14 | π32†     |
//! | 4    | 5  | π01      | 14   | 15 | π03†     |
//! | 5    | 6  | π12      | 15   | 16 | π13†     |
//! | 6    | 7  | π02      | 16   | 17 | π02†     |
//! | 7    | 8  | π13      | 17   | 18 | π12†     |
//! | 8    | 9  | π03      | 18   | 19 | π01†     |
//! | 9    | 10 | π32      |      |    |          |
//!
//! The ground population π00 = 1 − π11 − π22 − π33 is never stored.
//!
//! Only nine atomic equations and two field equations are written out; the
//! daggered partners come from the conjugation rule (conjugate the equation,
//! then send π → π†, π† → π, E⁺ ↔ E⁻). With `reflect(s)_k = conj(s_{dag(k)})`
//! that rule reads `f_dag(s) = conj(f(reflect(s)))` with the parameters left
//! untouched, which is how the partners are evaluated here.

use num_complex::Complex64 as C64;

use crate::units::DimensionlessParams;

pub const STATE_LEN: usize = 19;
/// First atomic slot; slots below it are fields.
pub const ATOMIC_START: usize = 4;

pub const E_I_P: usize = 0;
pub const E_I_M: usize = 1;
pub const E_S_P: usize = 2;
pub const E_S_M: usize = 3;
pub const P01: usize = 4;
pub const P12: usize = 5;
pub const P02: usize = 6;
pub const P13: usize = 7;
pub const P03: usize = 8;
pub const P32: usize = 9;
pub const P33: usize = 10;
pub const P22: usize = 11;
pub const P11: usize = 12;
pub const P32_D: usize = 13;
pub const P03_D: usize = 14;
pub const P13_D: usize = 15;
pub const P02_D: usize = 16;
pub const P12_D: usize = 17;
pub const P01_D: usize = 18;

const I: C64 = C64::new(0.0, 1.0);

/// Slot of the positive-P partner of `slot` (populations are their own partner).
pub const fn dagger_index(slot: usize) -> usize {
    match slot {
        E_I_P => E_I_M,
        E_I_M => E_I_P,
        E_S_P => E_S_M,
        E_S_M => E_S_P,
        P33 | P22 | P11 => slot,
        s if s >= P01 && s <= P32 => P01 + P01_D - s,
        s => P01_D + P01 - s,
    }
}

/// Human-readable label of a slot.
pub fn slot_label(slot: usize) -> &'static str {
    const LABELS: [&str; STATE_LEN] = [
        "Ei+", "Ei-", "Es+", "Es-", "pi01", "pi12", "pi02", "pi13", "pi03", "pi32", "pi33",
        "pi22", "pi11", "pi32d", "pi03d", "pi13d", "pi02d", "pi12d", "pi01d",
    ];
    LABELS[slot]
}

/// All stochastic variables at one spatial grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSlice(pub [C64; STATE_LEN]);

impl Default for StateSlice {
    fn default() -> Self {
        StateSlice::vacuum()
    }
}

impl StateSlice {
    /// Every atom in |0⟩ and no field.
    pub fn vacuum() -> Self {
        StateSlice([C64::new(0.0, 0.0); STATE_LEN])
    }

    /// Variable by its one-based α index.
    pub fn alpha(&self, k: usize) -> C64 {
        self.0[k - 1]
    }

    pub fn ground_population(&self) -> C64 {
        C64::new(1.0, 0.0) - self.0[P11] - self.0[P22] - self.0[P33]
    }

    /// `reflect(s)_k = conj(s_{dag(k)})`.
    pub fn reflected(&self) -> Self {
        let mut out = [C64::new(0.0, 0.0); STATE_LEN];
        for (k, v) in out.iter_mut().enumerate() {
            *v = self.0[dagger_index(k)].conj();
        }
        StateSlice(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl std::ops::Index<usize> for StateSlice {
    type Output = C64;
    fn index(&self, slot: usize) -> &C64 {
        &self.0[slot]
    }
}

impl std::ops::IndexMut<usize> for StateSlice {
    fn index_mut(&mut self, slot: usize) -> &mut C64 {
        &mut self.0[slot]
    }
}

/// Pump amplitudes and propagation phase at one point of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteCouplings {
    pub omega_a: C64,
    pub omega_b: C64,
    /// `e^{iΔk z}`.
    pub phase: C64,
}

impl SiteCouplings {
    pub fn new(omega_a: f64, omega_b: f64, phase_mismatch: f64, z: f64) -> Self {
        SiteCouplings {
            omega_a: C64::new(omega_a, 0.0),
            omega_b: C64::new(omega_b, 0.0),
            phase: C64::from_polar(1.0, phase_mismatch * z),
        }
    }

    pub fn at(params: &DimensionlessParams, t: f64, z: f64) -> Self {
        SiteCouplings::new(params.omega_a_at(t), params.omega_b, params.phase_mismatch, z)
    }
}

/// Time or space derivatives for every slot, same order as [`StateSlice`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftVector(pub [C64; STATE_LEN]);

impl DriftVector {
    pub fn zero() -> Self {
        DriftVector([C64::new(0.0, 0.0); STATE_LEN])
    }
}

impl std::ops::Index<usize> for DriftVector {
    type Output = C64;
    fn index(&self, slot: usize) -> &C64 {
        &self.0[slot]
    }
}

/// The nine written-out atomic right-hand sides, in slot order
/// π01, π12, π02, π13, π03, π32†, π33, π22, π11.
fn written_atomic(s: &StateSlice, c: &SiteCouplings, p: &DimensionlessParams) -> [C64; 9] {
    let a = &s.0;
    let p00 = s.ground_population();
    let (wa, wb) = (c.omega_a, c.omega_b);
    let (wa_c, wb_c) = (wa.conj(), wb.conj());
    let ei_p = a[E_I_P];
    let ei_m = a[E_I_M];
    // E_s⁺ e^{-iΔkz} and E_s⁻ e^{iΔkz}
    let es_p = a[E_S_P] * c.phase.conj();
    let es_m = a[E_S_M] * c.phase;

    let d01 = C64::new(-p.gamma01 / 2.0, p.delta1) * a[P01] + I * wa * (p00 - a[P11])
        + I * wb_c * a[P02]
        - I * a[P13_D] * ei_p;
    let d12 = I * C64::new(p.delta2 - p.delta1, (p.gamma01 + p.gamma2) / 2.0) * a[P12]
        - I * wa_c * a[P02]
        + I * wb * (a[P11] - a[P22])
        + I * a[P13] * es_p;
    let d02 = C64::new(-p.gamma2 / 2.0, p.delta2) * a[P02] - I * wa * a[P12] + I * wb * a[P01]
        + I * a[P03] * es_p
        - I * a[P32] * ei_p;
    let d13 = -C64::new((p.gamma01 + p.gamma03) / 2.0, p.delta1) * a[P13] - I * wa_c * a[P03]
        - I * wb * a[P32_D]
        + I * a[P12] * es_m
        + I * a[P01_D] * ei_p;
    let d03 = -p.gamma03 / 2.0 * a[P03] - I * wa * a[P13]
        + I * a[P02] * es_m
        + I * (p00 - a[P33]) * ei_p;
    let d32_d = -C64::new((p.gamma03 + p.gamma2) / 2.0, p.delta2) * a[P32_D] - I * wb_c * a[P13]
        + I * (a[P22] - a[P33]) * es_m
        + I * a[P02_D] * ei_p;
    let d33 = -p.gamma03 * a[P33] + p.gamma32 * a[P22] - I * a[P32_D] * es_p + I * a[P32] * es_m
        + I * a[P03_D] * ei_p
        - I * a[P03] * ei_m;
    let d22 = -p.gamma2 * a[P22] + I * wb * a[P12_D] - I * wb_c * a[P12] + I * a[P32_D] * es_p
        - I * a[P32] * es_m;
    let d11 = -p.gamma01 * a[P11] + p.gamma12 * a[P22] + I * wa * a[P01_D] - I * wa_c * a[P01]
        - I * wb * a[P12_D]
        + I * wb_c * a[P12];
    [d01, d12, d02, d13, d03, d32_d, d33, d22, d11]
}

/// Ito drift of the 15 atomic variables (time derivatives). Field slots are zero.
pub fn atomic_drift(s: &StateSlice, c: &SiteCouplings, p: &DimensionlessParams) -> DriftVector {
    let direct = written_atomic(s, c, p);
    let mirror = written_atomic(&s.reflected(), c, p);
    let mut out = DriftVector::zero();
    let slots = [P01, P12, P02, P13, P03, P32_D, P33, P22, P11];
    for (k, &slot) in slots.iter().enumerate() {
        out.0[slot] = direct[k];
    }
    for (k, &slot) in slots[..6].iter().enumerate() {
        out.0[dagger_index(slot)] = mirror[k].conj();
    }
    out
}

/// Source part of the spatial field derivatives in the co-moving frame.
/// Atomic slots are zero; noise is added by the integrator.
pub fn field_spatial_drift(s: &StateSlice, c: &SiteCouplings, p: &DimensionlessParams) -> DriftVector {
    let signal = |s: &StateSlice| -I * s[P32] * c.phase * p.coupling_sq;
    let idler = |s: &StateSlice| I * s[P03];
    let mirror = s.reflected();
    let mut out = DriftVector::zero();
    out.0[E_S_P] = signal(s);
    out.0[E_S_M] = signal(&mirror).conj();
    out.0[E_I_P] = idler(s);
    out.0[E_I_M] = idler(&mirror).conj();
    out
}

/// Ito-to-Stratonovich drift shift, already multiplied by `scale`.
///
/// Only π01, π12, π03, π32 and the three populations (plus daggered partners)
/// pick up a correction. For the paired-column noise matrix these are the
/// closed forms of `-¼ Σ_b ∂D_ab/∂α_b`.
pub fn stratonovich_correction(s: &StateSlice, c: &SiteCouplings, p: &DimensionlessParams, scale: f64) -> DriftVector {
    let written = |s: &StateSlice| {
        [
            I * c.omega_a / 2.0,
            I * c.omega_b,
            I * s[E_I_P],
            I * s[E_S_P] * c.phase.conj() / 2.0,
        ]
    };
    let coherent = [P01, P12, P03, P32];
    let direct = written(s);
    let mirror = written(&s.reflected());
    let mut out = DriftVector::zero();
    for (k, &slot) in coherent.iter().enumerate() {
        out.0[slot] = direct[k] * scale;
        out.0[dagger_index(slot)] = mirror[k].conj() * scale;
    }
    out.0[P33] = C64::new((-3.0 * p.gamma03 + p.gamma32) / 4.0 * scale, 0.0);
    out.0[P22] = C64::new(-p.gamma2 / 4.0 * scale, 0.0);
    out.0[P11] = C64::new((-5.0 * p.gamma01 + p.gamma12) / 4.0 * scale, 0.0);
    out
}
