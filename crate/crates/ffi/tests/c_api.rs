use std::ffi::{CStr, CString};
use std::ptr;

use cascade_ffi::*;

fn last_error() -> String {
    let p = cascade_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut CascadeConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(cascade_config_operating_point(1e10, &mut cfg), CascadeStatus::Ok);
        assert_eq!(cascade_config_set_grid(cfg, 41, 8, 140.0), CascadeStatus::Ok);
    }
    cfg
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        assert_eq!(cascade_config_from_toml(ptr::null(), ptr::null_mut()), CascadeStatus::NullPointer);
        let mut cfg = ptr::null_mut();
        assert_eq!(cascade_config_from_toml(ptr::null(), &mut cfg), CascadeStatus::NullPointer);
        assert!(last_error().contains("toml"));
        assert!(cfg.is_null());
        assert_eq!(cascade_ensemble_time_points(ptr::null()), 0);
        assert!(cascade_config_density(ptr::null()).is_nan());
        cascade_config_free(ptr::null_mut());
        cascade_ensemble_free(ptr::null_mut());
    }
}

#[test]
fn bad_configuration_maps_to_invalid_config() {
    let text = CString::new("[ensemble]\ndensity_cm3 = 1").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(cascade_config_from_toml(text.as_ptr(), &mut cfg), CascadeStatus::InvalidConfig);
        assert_eq!(cascade_config_operating_point(-1.0, &mut cfg), CascadeStatus::InvalidConfig);
        assert!(last_error().contains("density"));
        let good = small_config();
        assert_eq!(cascade_config_set_grid(good, 1, 8, 140.0), CascadeStatus::InvalidConfig);
        // A rejected grid leaves the handle unchanged.
        assert_eq!(cascade_config_density(good), 1e10);
        cascade_config_free(good);
    }
}

#[test]
fn bundled_example_parses() {
    let text = CString::new(include_str!("../../../configs/rb85_operating_point.toml")).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(cascade_config_from_toml(text.as_ptr(), &mut cfg), CascadeStatus::Ok);
        assert_eq!(cascade_config_density(cfg), 1e10);
        cascade_config_free(cfg);
    }
}

#[test]
fn ensemble_round_trip() {
    let cfg = small_config();
    let mut ens = ptr::null_mut();
    unsafe {
        assert_eq!(cascade_ensemble_run(cfg, 4, 7, 2, &mut ens), CascadeStatus::Ok);
        let n = cascade_ensemble_time_points(ens);
        assert_eq!(n, 41);
        let (mut done, mut dropped) = (0, 0);
        assert_eq!(cascade_ensemble_counts(ens, &mut done, &mut dropped), CascadeStatus::Ok);
        assert_eq!(done + dropped, 4);

        let mut cols = vec![vec![f64::NAN; n]; 5];
        let [t, sr, si, ir, ii] = &mut cols[..] else { unreachable!() };
        assert_eq!(
            cascade_ensemble_intensities(ens, t.as_mut_ptr(), sr.as_mut_ptr(), si.as_mut_ptr(), ir.as_mut_ptr(), ii.as_mut_ptr(), n - 1),
            CascadeStatus::BufferTooSmall
        );
        assert_eq!(
            cascade_ensemble_intensities(ens, t.as_mut_ptr(), sr.as_mut_ptr(), si.as_mut_ptr(), ir.as_mut_ptr(), ii.as_mut_ptr(), n),
            CascadeStatus::Ok
        );
        assert_eq!(t[0], 0.0);
        assert!((t[n - 1] - 140.0).abs() < 1e-9);
        assert!(cols.iter().flatten().all(|v| v.is_finite()));

        let mut fit = CascadeFit::default();
        assert_eq!(cascade_ensemble_fit(ens, 1.5, &mut fit), CascadeStatus::InvalidArgument);
        let status = cascade_ensemble_fit(ens, 0.05, &mut fit);
        // Four trajectories rarely give a clean decay; either outcome is well formed.
        match status {
            CascadeStatus::Ok => assert!(fit.t_f_ns > 0.0 && fit.ci_low_ns <= fit.t_f_ns),
            CascadeStatus::Observable => assert!(!last_error().is_empty()),
            other => panic!("unexpected status {other:?}"),
        }
        cascade_ensemble_free(ens);
        cascade_config_free(cfg);
    }
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let cfg = small_config();
    unsafe {
        assert_eq!(cascade_simulate_to_dir(cfg, 3, 1, 1, 2, path.as_ptr()), CascadeStatus::Ok);
        cascade_config_free(cfg);
    }
    for name in ["manifest.json", "checkpoint.json", "intensities.tsv", "g_grid.bin", "fit.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn dicke_reference_and_version() {
    let mut t = 0.0;
    unsafe {
        assert_eq!(cascade_dicke_reference(1.0 / 26e-9, 1.0, &mut t), CascadeStatus::Ok);
        assert!((t - 13.0).abs() < 1e-9);
        assert_eq!(cascade_dicke_reference(1.0 / 26e-9, -1.0, &mut t), CascadeStatus::InvalidConfig);
        assert_eq!(cascade_dicke_reference(1.0, 0.0, ptr::null_mut()), CascadeStatus::NullPointer);
    }
    let v = unsafe { CStr::from_ptr(cascade_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/cascade_sim.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler found; header not checked");
        return;
    };
    assert!(status.success());
}
