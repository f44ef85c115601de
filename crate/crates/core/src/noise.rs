//! State-dependent diffusion, its non-square square root and the Wiener
//! increments that drive every grid point.
//!
//! Thirty-nine coefficients are written out explicitly. The remaining ones are
//! their dagger images (α_a, α_b) → (α_dag(a), α_dag(b)), generated with the
//! same conjugation rule as the drift. Together they give 64 distinct
//! entries of the symmetric 19 × 19 matrix, 11 of them on the diagonal.
//!
//! The noise matrix B realises each diagonal entry with one real unit
//! Gaussian and each off-diagonal entry with a complex pair, so
//! K = 11 + 2·53 = 117 independent noises.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{dagger_index, SiteCouplings, StateSlice, STATE_LEN};
use crate::units::DimensionlessParams;

pub const DIFFUSION_ENTRY_COUNT: usize = 64;
pub const NOISE_COUNT: usize = 117;
const WRITTEN_COUNT: usize = 39;

const I: C64 = C64::new(0.0, 1.0);

/// One-based α pairs of the written-out coefficients, in listing order.
pub const WRITTEN_PAIRS: [(usize, usize); WRITTEN_COUNT] = [
    (5, 5), (5, 6), (5, 7), (5, 8), (5, 9), (5, 11), (5, 13), (5, 14), (5, 19),
    (6, 6), (6, 8), (6, 10), (6, 13), (6, 16), (6, 18),
    (7, 8), (7, 9),
    (8, 9), (8, 10), (8, 11), (8, 12), (8, 13), (8, 16), (8, 18),
    (9, 9), (9, 10), (9, 15),
    (10, 10), (10, 11), (10, 13), (10, 14), (10, 19),
    (11, 11), (11, 12),
    (12, 12), (12, 13),
    (13, 13),
    (3, 8), (3, 9),
];

fn written_diffusion(s: &StateSlice, c: &SiteCouplings, p: &DimensionlessParams) -> [C64; WRITTEN_COUNT] {
    let a = |k: usize| s.0[k - 1];
    let (wa, wb) = (c.omega_a, c.omega_b);
    let (wa_c, wb_c) = (wa.conj(), wb.conj());
    let ei_p = a(1);
    let ei_m = a(2);
    let es_p = a(3) * c.phase.conj();
    let es_m = a(4) * c.phase;
    let g = p.coupling_sq;
    [
        // (5, ·)
        -2.0 * I * wa * a(5),
        I * (wa * a(6) + a(10) * ei_p),
        -I * wa * a(7),
        I * (wa * a(8) + (a(11) - a(13)) * ei_p),
        -I * (wa * a(9) + a(5) * ei_p),
        -I * a(16) * ei_p,
        I * a(16) * ei_p,
        -I * a(18) * ei_p,
        p.gamma12 * a(12),
        // (6, ·)
        -2.0 * I * wb * a(6),
        -I * wb * a(8),
        -I * wb * a(10),
        -I * wa_c * a(7) + p.gamma01 * a(6),
        -I * a(7) * ei_m + p.gamma01 * a(10),
        p.gamma01 * a(12),
        // (7, ·)
        -I * a(6) * ei_p,
        -I * a(7) * ei_p,
        // (8, ·)
        -I * a(8) * ei_p,
        I * wb * (a(12) - a(11)),
        I * wb * a(14),
        -I * wb * a(14),
        -I * wa_c * a(9) + I * a(19) * ei_p + p.gamma01 * a(8),
        I * a(15) * ei_p - I * a(9) * ei_m + p.gamma01 * a(11) + p.gamma32 * a(12),
        I * a(17) * ei_p + p.gamma01 * a(14),
        // (9, ·)
        -2.0 * I * a(9) * ei_p,
        I * a(10) * ei_p,
        p.gamma32 * a(12),
        // (10, ·)
        -2.0 * I * a(10) * es_p,
        I * (wb * a(16) - a(7) * ei_m) + p.gamma03 * a(10),
        -I * wb * a(16),
        I * wb * a(18) - I * wb_c * a(6) + p.gamma03 * a(12),
        I * a(6) * ei_m,
        // (11, ·)
        I * a(14) * es_p - I * a(10) * es_m + I * a(15) * ei_p - I * a(9) * ei_m
            + p.gamma32 * a(12)
            + p.gamma03 * a(11),
        I * a(10) * es_m - I * a(14) * es_p - p.gamma32 * a(12),
        // (12, ·)
        I * wb * a(18) - I * wb_c * a(6) - I * a(10) * es_m + I * a(14) * es_p + p.gamma2 * a(12),
        -I * wb * a(18) + I * wb_c * a(6) - p.gamma12 * a(12),
        // (13, 13)
        I * wa * a(19) - I * wa_c * a(5) + I * wb * a(18) - I * wb_c * a(6)
            + p.gamma01 * a(13)
            + p.gamma12 * a(12),
        // fields
        g * I * a(6) * c.phase,
        g * I * a(7) * c.phase,
    ]
}

/// Where one distinct diffusion entry comes from and which noise columns it owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntrySpec {
    /// Zero-based slots with `row <= col`.
    pub row: usize,
    pub col: usize,
    /// Index into [`WRITTEN_PAIRS`].
    pub source: usize,
    /// Entry is the dagger image of its source rather than the source itself.
    pub mirrored: bool,
    /// First noise column; off-diagonal entries own two.
    pub first_noise: usize,
}

impl EntrySpec {
    pub fn is_diagonal(&self) -> bool {
        self.row == self.col
    }
}

#[derive(Debug)]
pub struct DiffusionLayout {
    pub entries: Vec<EntrySpec>,
    pub noise_count: usize,
    index: [[Option<u8>; STATE_LEN]; STATE_LEN],
}

impl DiffusionLayout {
    fn build() -> Self {
        let ordered = |a: usize, b: usize| if a <= b { (a, b) } else { (b, a) };
        let mut entries: Vec<EntrySpec> = Vec::with_capacity(DIFFUSION_ENTRY_COUNT);
        let mut index = [[None; STATE_LEN]; STATE_LEN];
        let mut noise_count = 0;
        let mut push = |row: usize, col: usize, source: usize, mirrored: bool, entries: &mut Vec<EntrySpec>| {
            let (row, col) = ordered(row, col);
            if index[row][col].is_some() {
                return;
            }
            index[row][col] = Some(entries.len() as u8);
            index[col][row] = Some(entries.len() as u8);
            entries.push(EntrySpec {
                row,
                col,
                source,
                mirrored,
                first_noise: noise_count,
            });
            noise_count += if row == col { 1 } else { 2 };
        };
        for (k, &(a, b)) in WRITTEN_PAIRS.iter().enumerate() {
            push(a - 1, b - 1, k, false, &mut entries);
        }
        for (k, &(a, b)) in WRITTEN_PAIRS.iter().enumerate() {
            push(dagger_index(a - 1), dagger_index(b - 1), k, true, &mut entries);
        }
        DiffusionLayout {
            entries,
            noise_count,
            index,
        }
    }

    pub fn position(&self, a: usize, b: usize) -> Option<usize> {
        self.index[a][b].map(usize::from)
    }
}

/// The fixed sparsity pattern. Panics at first use if the enumeration does
/// not give 64 entries and 117 noises.
pub fn layout() -> &'static DiffusionLayout {
    static LAYOUT: OnceLock<DiffusionLayout> = OnceLock::new();
    LAYOUT.get_or_init(|| {
        let layout = DiffusionLayout::build();
        assert_eq!(layout.entries.len(), DIFFUSION_ENTRY_COUNT, "diffusion entry count");
        assert_eq!(layout.noise_count, NOISE_COUNT, "noise count");
        layout
    })
}

/// Symmetric diffusion matrix, stored as the 64 distinct entries in layout order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionTable {
    pub values: [C64; DIFFUSION_ENTRY_COUNT],
}

impl DiffusionTable {
    pub fn zero() -> Self {
        DiffusionTable {
            values: [C64::new(0.0, 0.0); DIFFUSION_ENTRY_COUNT],
        }
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        layout()
            .position(a, b)
            .map_or(C64::new(0.0, 0.0), |k| self.values[k])
    }

    pub fn to_dense(&self) -> [[C64; STATE_LEN]; STATE_LEN] {
        let mut d = [[C64::new(0.0, 0.0); STATE_LEN]; STATE_LEN];
        for (spec, v) in layout().entries.iter().zip(self.values.iter()) {
            d[spec.row][spec.col] = *v;
            d[spec.col][spec.row] = *v;
        }
        d
    }

    /// Reads the upper triangle of `dense` at the layout positions.
    pub fn from_dense_upper(dense: &[[C64; STATE_LEN]; STATE_LEN]) -> Self {
        let mut t = DiffusionTable::zero();
        for (spec, v) in layout().entries.iter().zip(t.values.iter_mut()) {
            *v = dense[spec.row][spec.col];
        }
        t
    }
}

pub fn diffusion_coefficients(s: &StateSlice, c: &SiteCouplings, p: &DimensionlessParams) -> DiffusionTable {
    let direct = written_diffusion(s, c, p);
    let mirror = written_diffusion(&s.reflected(), c, p);
    let mut t = DiffusionTable::zero();
    for (spec, v) in layout().entries.iter().zip(t.values.iter_mut()) {
        *v = if spec.mirrored {
            mirror[spec.source].conj()
        } else {
            direct[spec.source]
        };
    }
    t
}

/// Non-square square root of a [`DiffusionTable`].
///
/// `factors[k]` is `sqrt(D_aa)` for a diagonal entry and `sqrt(D_ab / 2)` for
/// an off-diagonal one; the column structure is implied by the layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMatrix {
    pub factors: [C64; DIFFUSION_ENTRY_COUNT],
}

/// Principal square root without the polar round trip.
fn principal_sqrt(z: C64) -> C64 {
    if z.re == 0.0 && z.im == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let r = (z.re * z.re + z.im * z.im).sqrt();
    if z.re >= 0.0 {
        let a = (0.5 * (r + z.re)).sqrt();
        C64::new(a, 0.5 * z.im / a)
    } else {
        let b = (0.5 * (r - z.re)).sqrt().copysign(z.im);
        C64::new(0.5 * z.im / b, b)
    }
}

pub fn build_noise_matrix(d: &DiffusionTable) -> NoiseMatrix {
    let mut factors = [C64::new(0.0, 0.0); DIFFUSION_ENTRY_COUNT];
    for ((spec, v), f) in layout().entries.iter().zip(d.values.iter()).zip(factors.iter_mut()) {
        *f = if spec.is_diagonal() {
            principal_sqrt(*v)
        } else {
            principal_sqrt(*v * 0.5)
        };
    }
    NoiseMatrix { factors }
}

impl NoiseMatrix {
    pub fn is_zero(&self) -> bool {
        self.factors.iter().all(|f| f.re == 0.0 && f.im == 0.0)
    }

    /// Flip the sign of any factor pointing away from the matching factor of
    /// `reference`. Either sign is a valid square root; keeping the branch
    /// fixed while a step iterates stops entries near the negative real axis
    /// from jumping between roots.
    pub fn align_to(&mut self, reference: &NoiseMatrix) {
        for (f, r) in self.factors.iter_mut().zip(reference.factors.iter()) {
            if f.re * r.re + f.im * r.im < 0.0 {
                *f = -*f;
            }
        }
    }

    /// `B ξ` for one vector of real unit Gaussians.
    pub fn apply(&self, xi: &[f64; NOISE_COUNT]) -> [C64; STATE_LEN] {
        let mut out = [C64::new(0.0, 0.0); STATE_LEN];
        for (spec, f) in layout().entries.iter().zip(self.factors.iter()) {
            let k = spec.first_noise;
            if spec.is_diagonal() {
                out[spec.row] += *f * xi[k];
            } else {
                out[spec.row] += *f * C64::new(xi[k], xi[k + 1]);
                out[spec.col] += *f * C64::new(xi[k], -xi[k + 1]);
            }
        }
        out
    }

    /// Dense 19 × 117 matrix.
    pub fn to_dense(&self) -> Vec<[C64; NOISE_COUNT]> {
        let mut b = vec![[C64::new(0.0, 0.0); NOISE_COUNT]; STATE_LEN];
        for (spec, f) in layout().entries.iter().zip(self.factors.iter()) {
            let k = spec.first_noise;
            if spec.is_diagonal() {
                b[spec.row][k] = *f;
            } else {
                b[spec.row][k] = *f;
                b[spec.row][k + 1] = *f * I;
                b[spec.col][k] = *f;
                b[spec.col][k + 1] = -*f * I;
            }
        }
        b
    }

    /// `B Bᵀ` (plain transpose, no conjugation).
    pub fn reconstruct(&self) -> [[C64; STATE_LEN]; STATE_LEN] {
        let b = self.to_dense();
        let mut d = [[C64::new(0.0, 0.0); STATE_LEN]; STATE_LEN];
        for i in 0..STATE_LEN {
            for j in 0..STATE_LEN {
                d[i][j] = (0..NOISE_COUNT).map(|k| b[i][k] * b[j][k]).sum();
            }
        }
        d
    }
}

/// Langevin noise vector `B ξ / sqrt(N_c Δt Δz)`.
pub fn sample_noise(b: &NoiseMatrix, xi: &[f64; NOISE_COUNT], p: &DimensionlessParams) -> [C64; STATE_LEN] {
    let scale = p.noise_scale();
    let mut out = b.apply(xi);
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Counter-based Gaussian source: the draws for a given
/// `(seed, trajectory, step, site)` never depend on what was drawn before.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
    trajectory: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        NoiseStream { seed, trajectory }
    }

    fn generator(&self, step: u64, site: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trajectory.to_le_bytes());
        key[16..24].copy_from_slice(b"cascade\0");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((step << 24) ^ site);
        rng
    }

    /// Fill `out` with the unit Gaussians of `(step, site)`, column order.
    pub fn fill(&self, step: u64, site: u64, out: &mut [f64; NOISE_COUNT]) {
        let mut rng = self.generator(step, site);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }

    /// Arbitrary-length draw for auxiliary scalar tests.
    pub fn gaussians(&self, step: u64, site: u64, out: &mut [f64]) {
        let mut rng = self.generator(step, site);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::*;
    use crate::fixtures::{operating_params, random_state};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn enumeration_matches_expected_counts() {
        let l = layout();
        assert_eq!(l.entries.len(), 64);
        assert_eq!(l.noise_count, 117);
        assert_eq!(l.entries.iter().filter(|e| e.is_diagonal()).count(), 11);
        assert_eq!(l.entries.iter().filter(|e| !e.mirrored).count(), 39);
        // D5,19 is its own image, D5,14 and D10,19 are images of each other
        assert!(!l.entries.iter().any(|e| e.mirrored && (e.row, e.col) == (P01, P01_D)));
        assert!(!l.entries.iter().any(|e| e.mirrored && (e.row, e.col) == (P32, P01_D)));
    }

    #[test]
    fn vacuum_diffusion_vanishes() {
        let p = operating_params();
        let cpl = SiteCouplings::new(0.0, 0.0, 0.0, 0.0);
        let d = diffusion_coefficients(&StateSlice::vacuum(), &cpl, &p);
        assert!(d.values.iter().all(|v| v.norm() == 0.0));
        let b = build_noise_matrix(&d);
        let xi = [1.0; NOISE_COUNT];
        assert!(sample_noise(&b, &xi, &p).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn worked_coefficient_example() {
        let p = operating_params();
        let cpl = SiteCouplings::new(p.omega_a, p.omega_b, 0.0, 0.0);
        let mut s = StateSlice::vacuum();
        s[P12] = c(1.0, 0.0);
        let d = diffusion_coefficients(&s, &cpl, &p);
        assert_eq!(d.get(P12, P01), c(0.0, p.omega_a));
        assert_eq!(d.get(P01, P12), c(0.0, p.omega_a));
    }

    #[test]
    fn self_images_are_consistent() {
        // Entries that map to themselves (or to another written entry) under
        // the dagger map must agree with their conjugated image.
        let p = operating_params();
        let cpl = SiteCouplings::new(p.omega_a, p.omega_b, 0.3, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let s = random_state(&mut rng, 0.5);
            let direct = written_diffusion(&s, &cpl, &p);
            let mirror = written_diffusion(&s.reflected(), &cpl, &p);
            for (k, &(a, b)) in WRITTEN_PAIRS.iter().enumerate() {
                let (ia, ib) = (dagger_index(a - 1) + 1, dagger_index(b - 1) + 1);
                if let Some(j) = WRITTEN_PAIRS
                    .iter()
                    .position(|&(x, y)| (x, y) == (ia, ib) || (y, x) == (ia, ib))
                {
                    assert!(
                        (direct[j] - mirror[k].conj()).norm() < 1e-14,
                        "D{a},{b} image mismatch"
                    );
                }
            }
        }
    }

    #[test]
    fn single_diagonal_entry() {
        let mut t = DiffusionTable::zero();
        let k = layout().position(P01, P01).unwrap();
        t.values[k] = c(4.0, 0.0);
        let b = build_noise_matrix(&t).to_dense();
        let col = layout().entries[k].first_noise;
        assert_eq!(b[P01][col], c(2.0, 0.0));
        let nonzero = b.iter().flatten().filter(|v| v.norm() > 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn single_off_diagonal_pair() {
        let mut t = DiffusionTable::zero();
        let k = layout().position(P01, P12).unwrap();
        let d = c(-0.3, 1.7);
        t.values[k] = d;
        let r = build_noise_matrix(&t).reconstruct();
        assert!((r[P01][P12] - d).norm() < 1e-15);
        assert!((r[P12][P01] - d).norm() < 1e-15);
        assert!(r[P01][P01].norm() < 1e-15);
        assert!(r[P12][P12].norm() < 1e-15);
    }

    #[test]
    fn reconstruction_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut t = DiffusionTable::zero();
            for v in t.values.iter_mut() {
                if rng.random_bool(0.6) {
                    *v = c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                }
            }
            let r = build_noise_matrix(&t).reconstruct();
            let d = t.to_dense();
            for i in 0..STATE_LEN {
                for j in 0..STATE_LEN {
                    assert!((r[i][j] - d[i][j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn apply_matches_dense_product() {
        let p = operating_params();
        let cpl = SiteCouplings::new(p.omega_a, p.omega_b, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_state(&mut rng, 0.4);
        let b = build_noise_matrix(&diffusion_coefficients(&s, &cpl, &p));
        let mut xi = [0.0; NOISE_COUNT];
        NoiseStream::new(1, 2).fill(3, 4, &mut xi);
        let fast = b.apply(&xi);
        let dense = b.to_dense();
        for i in 0..STATE_LEN {
            let slow: C64 = (0..NOISE_COUNT).map(|k| dense[i][k] * xi[k]).sum();
            assert!((fast[i] - slow).norm() < 1e-13);
        }
    }

    #[test]
    fn algebraic_root_matches_polar_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let z = c(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            assert!((principal_sqrt(z) - z.sqrt()).norm() < 1e-14);
        }
        assert_eq!(principal_sqrt(c(-4.0, 0.0)), c(0.0, 2.0));
        assert_eq!(principal_sqrt(c(4.0, -0.0)), c(2.0, -0.0));
    }

    #[test]
    fn alignment_keeps_the_product() {
        let mut t = DiffusionTable::zero();
        t.values[0] = c(-1.0, 1e-300);
        t.values[5] = c(-2.0, -0.5);
        let reference = build_noise_matrix(&t);
        t.values[0] = c(-1.0, -1e-300);
        let mut b = build_noise_matrix(&t);
        assert!((b.factors[0] + reference.factors[0]).norm() < 1e-12);
        b.align_to(&reference);
        assert!((b.factors[0] - reference.factors[0]).norm() < 1e-12);
        assert_eq!(b.reconstruct(), build_noise_matrix(&t).reconstruct());
    }

    #[test]
    fn streams_are_keyed_by_position() {
        let s = NoiseStream::new(42, 7);
        let mut a = [0.0; NOISE_COUNT];
        let mut b = [0.0; NOISE_COUNT];
        s.fill(3, 5, &mut a);
        s.fill(3, 5, &mut b);
        assert_eq!(a, b);
        s.fill(3, 6, &mut b);
        assert_ne!(a, b);
        NoiseStream::new(42, 8).fill(3, 5, &mut b);
        assert_ne!(a, b);
        NoiseStream::new(43, 7).fill(3, 5, &mut b);
        assert_ne!(a, b);
    }
}
