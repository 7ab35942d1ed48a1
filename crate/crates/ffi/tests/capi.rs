use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use nfbeam_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        nfb_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn small_config() -> *mut NfbConfig {
    let cfg = nfb_config_new();
    for (k, v) in [("mt_v", "4"), ("mt_h", "4"), ("trials", "2")] {
        let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
        assert_eq!(unsafe { nfb_config_set(cfg, k.as_ptr(), v.as_ptr()) }, NfbStatus::Ok);
    }
    cfg
}

#[test]
fn phase_split_round_trip() {
    let mut out = [0.0; 4];
    assert_eq!(unsafe { nfb_phase_split(1.5, -2.0, out.as_mut_ptr()) }, NfbStatus::Ok);
    assert!((out[0] + out[2] - 1.5 * (-2f64).cos()).abs() < 1e-12);
    assert!((out[1] + out[3] - 1.5 * (-2f64).sin()).abs() < 1e-12);
    assert_eq!(
        unsafe { nfb_phase_split(2.5, 0.0, out.as_mut_ptr()) },
        NfbStatus::InvalidArgument
    );
    assert!(last_error().contains("2.5"));
    assert_eq!(
        unsafe { nfb_phase_split(1.0, 0.0, ptr::null_mut()) },
        NfbStatus::NullPointer
    );
}

#[test]
fn hardware_power_matches_table_constants() {
    let mut w = 0.0;
    assert_eq!(unsafe { nfb_hardware_power(512, 1, 0.2, 0.01, &mut w) }, NfbStatus::Ok);
    assert!((w - 10.44).abs() < 1e-12);
}

#[test]
fn config_errors_keep_previous_state() {
    let cfg = nfb_config_new();
    let (k, v) = (CString::new("beta").unwrap(), CString::new("1.5").unwrap());
    assert_eq!(
        unsafe { nfb_config_set(cfg, k.as_ptr(), v.as_ptr()) },
        NfbStatus::Config
    );
    let (k, v) = (CString::new("nonsense").unwrap(), CString::new("1").unwrap());
    assert_eq!(
        unsafe { nfb_config_set(cfg, k.as_ptr(), v.as_ptr()) },
        NfbStatus::Config
    );
    assert!(last_error().contains("nonsense"));
    let mut out = ptr::null_mut();
    let path = CString::new("/no/such/file.cfg").unwrap();
    assert_eq!(unsafe { nfb_config_load(path.as_ptr(), &mut out) }, NfbStatus::Io);
    assert!(out.is_null());
    assert!(last_error().contains("/no/such/file.cfg"));
    unsafe { nfb_config_free(cfg) };
}

#[test]
fn trial_is_deterministic() {
    let cfg = small_config();
    let run = || unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(nfb_scenario_sample(cfg, 9, &mut sc), NfbStatus::Ok);
        assert_eq!(nfb_scenario_num_users(sc), 2);
        let mut r = ptr::null_mut();
        assert_eq!(nfb_trial_run(sc, cfg, &mut r), NfbStatus::Ok);
        let mut rates = [0.0; 2];
        assert_eq!(nfb_trial_rates(r, rates.as_mut_ptr(), 2), 2);
        let out = (
            nfb_trial_sum_rate(r),
            nfb_trial_objective(r),
            nfb_trial_streams(r),
            rates,
        );
        assert!((rates[0] + rates[1] - out.0).abs() < 1e-9);
        assert!(nfb_trial_hpc(r) > 0.0 && nfb_trial_tx_power(r) > 0.0);
        nfb_trial_free(r);
        nfb_scenario_free(sc);
        out
    };
    assert_eq!(run(), run());
    unsafe {
        assert_eq!(nfb_trial_sum_rate(ptr::null()), 0.0);
        nfb_config_free(cfg);
    }
}

#[test]
fn sweep_writes_both_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let cfg = small_config();
    let axis = CString::new("p_max_dbm").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let values = [5.0, 10.0];
    let st = unsafe { nfb_sweep_to_csv(cfg, axis.as_ptr(), values.as_ptr(), 2, p.as_ptr()) };
    assert_eq!(st, NfbStatus::Ok, "{}", last_error());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(dir.path().join("sweep_summary.csv").exists());
    let bad = CString::new("nope").unwrap();
    let st = unsafe { nfb_sweep_to_csv(cfg, bad.as_ptr(), values.as_ptr(), 2, p.as_ptr()) };
    assert_eq!(st, NfbStatus::Config);
    unsafe { nfb_config_free(cfg) };
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(nfb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libnfbeam_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("2 users"));
}
