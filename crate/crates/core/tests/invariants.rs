//! Property tests over the public API.

use cascade_core::dynamics::{
    atomic_drift, dagger_index, field_spatial_drift, SiteCouplings, StateSlice, P11, P22, P33, STATE_LEN,
};
use cascade_core::exact_sum::ExactSum;
use cascade_core::fixtures::operating_params;
use cascade_core::noise::{build_noise_matrix, diffusion_coefficients, NoiseStream, NOISE_COUNT};
use cascade_core::observables::{triangle_index, triangle_len};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn state() -> impl Strategy<Value = StateSlice> {
    prop::array::uniform19((-1.0f64..1.0, -1.0f64..1.0)).prop_map(|a| StateSlice(a.map(|(re, im)| C64::new(re, im))))
}

fn physical(s: &StateSlice) -> StateSlice {
    let mut r = *s;
    for k in 0..STATE_LEN {
        let d = dagger_index(k);
        if d == k {
            r.0[k] = C64::new(s.0[k].re, 0.0);
        } else if d > k {
            r.0[d] = s.0[k].conj();
        }
    }
    r
}

fn close(a: C64, b: C64, scale: f64) -> bool {
    (a - b).norm() <= 1e-12 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dagger_is_an_involution(k in 0..STATE_LEN) {
        prop_assert_eq!(dagger_index(dagger_index(k)), k);
        let fixed = [P11, P22, P33];
        prop_assert_eq!(dagger_index(k) == k, fixed.contains(&k));
    }

    #[test]
    fn drift_commutes_with_reflection(s in state(), z in 0.0f64..1.0, w in 0.1f64..3.0) {
        let p = operating_params();
        let c = SiteCouplings::new(p.omega_a * w, p.omega_b, 2.5, z);
        let direct = atomic_drift(&s.reflected(), &c, &p);
        let mirrored = atomic_drift(&s, &c, &p);
        for k in 4..STATE_LEN {
            let expect = mirrored.0[dagger_index(k)].conj();
            prop_assert!(close(direct.0[k], expect, expect.norm()), "slot {k}");
        }
        let fd = field_spatial_drift(&s.reflected(), &c, &p);
        let fm = field_spatial_drift(&s, &c, &p);
        for k in 0..4 {
            let expect = fm.0[dagger_index(k)].conj();
            prop_assert!(close(fd.0[k], expect, expect.norm()), "field slot {k}");
        }
    }

    #[test]
    fn physical_states_stay_physical_under_drift(s in state()) {
        let p = operating_params();
        let s = physical(&s);
        let c = SiteCouplings::new(p.omega_a, p.omega_b, 0.0, 0.3);
        let d = atomic_drift(&s, &c, &p);
        for k in [P11, P22, P33] {
            prop_assert!(d.0[k].im.abs() < 1e-12, "population slot {k} drifts off the real axis");
        }
    }

    #[test]
    fn noise_matrix_factorizes_diffusion(s in state(), z in 0.0f64..1.0) {
        let p = operating_params();
        let c = SiteCouplings::new(p.omega_a, p.omega_b, p.phase_mismatch, z);
        let d = diffusion_coefficients(&s, &c, &p);
        let b = build_noise_matrix(&d);
        let rebuilt = b.reconstruct();
        let dense = d.to_dense();
        let scale = dense.iter().flatten().fold(0.0f64, |m, v| m.max(v.norm()));
        for i in 0..STATE_LEN {
            for j in 0..STATE_LEN {
                prop_assert!((rebuilt[i][j] - dense[i][j]).norm() <= 1e-12 * scale.max(1.0), "({i},{j})");
            }
        }
    }

    #[test]
    fn diffusion_is_symmetric(s in state()) {
        let p = operating_params();
        let c = SiteCouplings::new(p.omega_a, p.omega_b, 0.0, 0.5);
        let dense = diffusion_coefficients(&s, &c, &p).to_dense();
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert_eq!(*v, dense[j][i]);
            }
        }
    }

    #[test]
    fn exact_sum_is_order_independent(xs in prop::collection::vec(-1e300f64..1e300, 0..200), split in 0usize..200) {
        let mut forward = ExactSum::new();
        xs.iter().for_each(|&x| forward.add(x));
        let mut backward = ExactSum::new();
        xs.iter().rev().for_each(|&x| backward.add(x));
        prop_assert_eq!(&forward, &backward);

        let cut = split.min(xs.len());
        let (mut a, mut b) = (ExactSum::new(), ExactSum::new());
        xs[..cut].iter().for_each(|&x| a.add(x));
        xs[cut..].iter().for_each(|&x| b.add(x));
        a.merge(&b);
        prop_assert_eq!(&a, &forward);
        prop_assert_eq!(a.value(), forward.value());
    }

    #[test]
    fn exact_sum_cancels_exactly(xs in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL, 1..100)) {
        let mut s = ExactSum::new();
        xs.iter().for_each(|&x| s.add(x));
        xs.iter().for_each(|&x| s.add(-x));
        prop_assert_eq!(s.value(), 0.0);
    }

    #[test]
    fn exact_sum_survives_serialization(xs in prop::collection::vec(-1e10f64..1e10, 0..50)) {
        let mut s = ExactSum::new();
        xs.iter().for_each(|&x| s.add(x));
        let back: ExactSum = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn triangle_indexing_is_a_bijection(m in 1usize..60) {
        let mut seen = vec![false; triangle_len(m)];
        for s in 0..m {
            for i in s..m {
                let k = triangle_index(m, s, i);
                prop_assert!(!seen[k]);
                seen[k] = true;
            }
        }
        prop_assert!(seen.iter().all(|&v| v));
    }

    #[test]
    fn noise_streams_are_counter_based(seed in any::<u64>(), traj in 0u64..1000, step in 0u64..1000, site in 0u64..100) {
        let a = NoiseStream::new(seed, traj);
        let b = NoiseStream::new(seed, traj);
        let (mut x, mut y) = ([0.0; NOISE_COUNT], [0.0; NOISE_COUNT]);
        // an unrelated draw in between must not shift the stream
        let mut junk = [0.0; NOISE_COUNT];
        a.fill(step + 1, site, &mut junk);
        a.fill(step, site, &mut x);
        b.fill(step, site, &mut y);
        prop_assert_eq!(x, y);
        b.fill(step, site + 1, &mut y);
        prop_assert_ne!(x, y);
    }
}
