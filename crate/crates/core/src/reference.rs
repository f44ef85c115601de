//! Independent noise-free solver used as an oracle for the stochastic
//! integrator: classical RK4 method of lines on a refined grid.
//!
//! Every one of the 19 equations is written out here by hand in the one-based
//! α numbering, rather than generated from the nine written atomic equations
//! through the conjugation rule as [`crate::dynamics`] does. Agreement between
//! the two therefore also checks that transcription.

use num_complex::Complex64 as C64;

use crate::units::DimensionlessParams;

const I: C64 = C64::new(0.0, 1.0);

/// Time series produced by [`solve`], one entry per coarse time index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    /// `E_s⁻ E_s⁺` at z = 0 (no unit factor).
    pub signal: Vec<C64>,
    /// `E_i⁻ E_i⁺` at z = L.
    pub idler: Vec<C64>,
    /// π11, π22, π33 at z = 0 and at z = L.
    pub populations_entry: Vec<[C64; 3]>,
    pub populations_exit: Vec<[C64; 3]>,
}

/// α[1..=19]; index 0 unused.
type Alpha = [C64; 20];

/// Right-hand side of the atomic equations at one site. `es_p` and `es_m`
/// already carry their e^{∓iΔkz} factors.
fn atomic_rhs(a: &Alpha, wa: f64, wb: f64, p: &DimensionlessParams, phase: C64) -> Alpha {
    let (g01, g03, g12, g32, g2) = (p.gamma01, p.gamma03, p.gamma12, p.gamma32, p.gamma2);
    let (d1, d2) = (p.delta1, p.delta2);
    let wa = C64::new(wa, 0.0);
    let wb = C64::new(wb, 0.0);
    let (wac, wbc) = (wa.conj(), wb.conj());
    let p00 = 1.0 - a[13] - a[12] - a[11];
    let esp = a[3] * phase.conj();
    let esm = a[4] * phase;
    let mut d = [C64::new(0.0, 0.0); 20];
    d[5] = (I * d1 - g01 / 2.0) * a[5] + I * wa * (p00 - a[13]) + I * wbc * a[7] - I * a[16] * a[1];
    d[6] = (I * (d2 - d1) - (g01 + g2) / 2.0) * a[6] - I * wac * a[7] + I * wb * (a[13] - a[12]) + I * a[8] * esp;
    d[7] = (I * d2 - g2 / 2.0) * a[7] - I * wa * a[6] + I * wb * a[5] + I * a[9] * esp - I * a[10] * a[1];
    d[8] = -(I * d1 + (g01 + g03) / 2.0) * a[8] - I * wac * a[9] - I * wb * a[14] + I * a[6] * esm + I * a[19] * a[1];
    d[9] = -(g03 / 2.0) * a[9] - I * wa * a[8] + I * a[7] * esm + I * (p00 - a[11]) * a[1];
    d[10] = (I * d2 - (g03 + g2) / 2.0) * a[10] + I * wb * a[16] - I * (a[12] - a[11]) * esp - I * a[7] * a[2];
    d[11] = -g03 * a[11] + g32 * a[12] - I * a[14] * esp + I * a[10] * esm + I * a[15] * a[1] - I * a[9] * a[2];
    d[12] = -g2 * a[12] + I * wb * a[18] - I * wbc * a[6] + I * a[14] * esp - I * a[10] * esm;
    d[13] = -g01 * a[13] + g12 * a[12] + I * wa * a[19] - I * wac * a[5] - I * wb * a[18] + I * wbc * a[6];
    d[14] = -(I * d2 + (g03 + g2) / 2.0) * a[14] - I * wbc * a[8] + I * (a[12] - a[11]) * esm + I * a[17] * a[1];
    d[15] = -(g03 / 2.0) * a[15] + I * wac * a[16] - I * a[17] * esp - I * (p00 - a[11]) * a[2];
    d[16] = (I * d1 - (g01 + g03) / 2.0) * a[16] + I * wa * a[15] + I * wbc * a[10] - I * a[18] * esp - I * a[5] * a[2];
    d[17] = (-I * d2 - g2 / 2.0) * a[17] + I * wac * a[18] - I * wbc * a[19] - I * a[15] * esm + I * a[14] * a[2];
    d[18] = (-I * (d2 - d1) - (g01 + g2) / 2.0) * a[18] + I * wa * a[17] - I * wbc * (a[13] - a[12]) - I * a[16] * esm;
    d[19] = (-I * d1 - g01 / 2.0) * a[19] - I * wac * (p00 - a[13]) - I * wb * a[17] + I * a[8] * a[2];
    d
}

/// Fields from the atomic profile: idler forward from z = 0, signal backward
/// from z = L, trapezoidal in z.
fn solve_fields(sites: &mut [Alpha], phases: &[C64], dz: f64, g2: f64) {
    let m = sites.len();
    let src: Vec<[C64; 4]> = sites
        .iter()
        .zip(phases)
        .map(|(a, ph)| {
            [
                I * a[9],
                -I * a[15],
                -I * a[10] * *ph * g2,
                I * a[14] * ph.conj() * g2,
            ]
        })
        .collect();
    sites[0][1] = C64::new(0.0, 0.0);
    sites[0][2] = C64::new(0.0, 0.0);
    for k in 1..m {
        sites[k][1] = sites[k - 1][1] + 0.5 * dz * (src[k - 1][0] + src[k][0]);
        sites[k][2] = sites[k - 1][2] + 0.5 * dz * (src[k - 1][1] + src[k][1]);
    }
    sites[m - 1][3] = C64::new(0.0, 0.0);
    sites[m - 1][4] = C64::new(0.0, 0.0);
    for k in (0..m - 1).rev() {
        sites[k][3] = sites[k + 1][3] - 0.5 * dz * (src[k][2] + src[k + 1][2]);
        sites[k][4] = sites[k + 1][4] - 0.5 * dz * (src[k][3] + src[k + 1][3]);
    }
}

/// Integrate the noise-free equations on a grid `refine` times finer than
/// `p` in both t and z, starting from the ground state with π03 = π03† =
/// `seed_coherence`, and sample at the coarse time indices.
pub fn solve(p: &DimensionlessParams, seed_coherence: f64, refine: usize) -> ReferenceSolution {
    let mz = refine * (p.space_points - 1) + 1;
    let dz = p.dz / refine as f64;
    let h = p.dt / refine as f64;
    let phases: Vec<C64> = (0..mz).map(|k| C64::from_polar(1.0, p.phase_mismatch * k as f64 * dz)).collect();
    let mut sites = vec![[C64::new(0.0, 0.0); 20]; mz];
    for a in sites.iter_mut() {
        a[9] = C64::new(seed_coherence, 0.0);
        a[15] = C64::new(seed_coherence, 0.0);
    }
    solve_fields(&mut sites, &phases, dz, p.coupling_sq);

    let mut out = ReferenceSolution {
        signal: Vec::with_capacity(p.time_points),
        idler: Vec::with_capacity(p.time_points),
        populations_entry: Vec::with_capacity(p.time_points),
        populations_exit: Vec::with_capacity(p.time_points),
    };
    let sample = |sites: &[Alpha], out: &mut ReferenceSolution| {
        let first = &sites[0];
        let last = &sites[mz - 1];
        out.signal.push(first[4] * first[3]);
        out.idler.push(last[2] * last[1]);
        out.populations_entry.push([first[13], first[12], first[11]]);
        out.populations_exit.push([last[13], last[12], last[11]]);
    };
    sample(&sites, &mut out);

    let rhs = |sites: &[Alpha], wa: f64| -> Vec<Alpha> {
        sites
            .iter()
            .zip(&phases)
            .map(|(a, ph)| atomic_rhs(a, wa, p.omega_b, p, *ph))
            .collect()
    };
    let stage = |base: &[Alpha], k: &[Alpha], factor: f64| -> Vec<Alpha> {
        let mut s: Vec<Alpha> = base.to_vec();
        for (a, d) in s.iter_mut().zip(k) {
            for j in 5..20 {
                a[j] += d[j] * factor;
            }
        }
        solve_fields(&mut s, &phases, dz, p.coupling_sq);
        s
    };
    for n in 0..refine * (p.time_points - 1) {
        // The pump is piecewise constant on the coarse grid and its edges
        // fall on step boundaries, so its mid-step value is exact for RK4.
        let wa = p.omega_a_at((n as f64 + 0.5) * h);
        let k1 = rhs(&sites, wa);
        let k2 = rhs(&stage(&sites, &k1, h / 2.0), wa);
        let k3 = rhs(&stage(&sites, &k2, h / 2.0), wa);
        let k4 = rhs(&stage(&sites, &k3, h), wa);
        for (i, a) in sites.iter_mut().enumerate() {
            for j in 5..20 {
                a[j] += (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]) * (h / 6.0);
            }
        }
        solve_fields(&mut sites, &phases, dz, p.coupling_sq);
        if (n + 1) % refine == 0 {
            sample(&sites, &mut out);
        }
    }
    out
}

/// `max |a − b| / max |b|` over a pair of series.
pub fn relative_linf(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().fold(0.0, |m: f64, z| m.max(z.norm()));
    let diff = a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).norm()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{atomic_drift, field_spatial_drift, SiteCouplings, StateSlice};
    use crate::fixtures::{operating_params, random_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_transcription_matches_conjugation_rule() {
        let mut p = operating_params();
        p.phase_mismatch = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let s = random_state(&mut rng, 0.5);
            let z = 0.011;
            let c = SiteCouplings::new(p.omega_a * 1.3, p.omega_b, p.phase_mismatch, z);
            let ours = atomic_drift(&s, &c, &p);
            let fields = field_spatial_drift(&s, &c, &p);
            let mut a = [C64::new(0.0, 0.0); 20];
            a[1..].copy_from_slice(&s.0);
            let theirs = atomic_rhs(&a, p.omega_a * 1.3, p.omega_b, &p, c.phase);
            for (k, t) in theirs.iter().enumerate().skip(5) {
                assert!((ours.0[k - 1] - t).norm() < 1e-14, "α{k}");
            }
            let mut sites = vec![a, a];
            solve_fields(&mut sites, &[c.phase, c.phase], 1.0, p.coupling_sq);
            // a constant profile integrates to rate × length
            assert!((sites[1][1] - fields.0[0]).norm() < 1e-14);
            assert!((sites[1][2] - fields.0[1]).norm() < 1e-14);
            assert!((sites[0][3] + fields.0[2]).norm() < 1e-14);
            assert!((sites[0][4] + fields.0[3]).norm() < 1e-14);
        }
        let _ = StateSlice::vacuum();
    }

    #[test]
    fn refinement_converges() {
        let mut p = operating_params();
        p.time_points = 41;
        let coarse = solve(&p, 1e-3, 1);
        let fine = solve(&p, 1e-3, 2);
        let finer = solve(&p, 1e-3, 4);
        let e1 = relative_linf(&coarse.signal, &finer.signal);
        let e2 = relative_linf(&fine.signal, &finer.signal);
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }
}
