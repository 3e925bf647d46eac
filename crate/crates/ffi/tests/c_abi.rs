use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hjsmooth_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hjs_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn objective(name: &str) -> *mut HjsObjective {
    let name = CString::new(name).unwrap();
    let mut obj = ptr::null_mut();
    let status = unsafe { hjs_objective_new(name.as_ptr(), &mut obj) };
    assert_eq!(status, HjsStatus::Ok, "{}", last_error());
    assert!(!obj.is_null());
    obj
}

#[test]
fn objective_value_and_gradient_match_core() {
    let obj = objective("double_well_a1");
    let core = hjsmooth::objective::lookup("double_well_a1").unwrap();
    unsafe {
        assert_eq!(hjs_objective_dim(obj), 1);
        let x = [0.3];
        let mut v = 0.0;
        assert_eq!(
            hjs_objective_value(obj, x.as_ptr(), 1, &mut v),
            HjsStatus::Ok
        );
        assert_eq!(v, core.value(&x));
        let mut g = [0.0];
        assert_eq!(
            hjs_objective_gradient(obj, x.as_ptr(), 1, g.as_mut_ptr()),
            HjsStatus::Ok
        );
        let mut expected = [0.0];
        core.gradient(&x, &mut expected);
        assert_eq!(g, expected);
        hjs_objective_free(obj);
    }
}

#[test]
fn errors_set_status_and_message() {
    let name = CString::new("no_such_objective").unwrap();
    let mut obj = ptr::null_mut();
    let status = unsafe { hjs_objective_new(name.as_ptr(), &mut obj) };
    assert_eq!(status, HjsStatus::UnknownObjective);
    assert!(obj.is_null());
    assert!(last_error().contains("no_such_objective"));

    let status = unsafe { hjs_objective_new(ptr::null(), &mut obj) };
    assert_eq!(status, HjsStatus::NullPointer);

    let obj = objective("double_well_a1");
    let x = [0.0, 1.0];
    let mut v = 0.0;
    let status = unsafe { hjs_objective_value(obj, x.as_ptr(), 2, &mut v) };
    assert_eq!(status, HjsStatus::DimensionMismatch);
    let mut v2 = 0.0;
    assert_eq!(
        unsafe { hjs_objective_value(obj, x.as_ptr(), 1, &mut v2) },
        HjsStatus::Ok
    );
    assert!(last_error().is_empty());
    unsafe { hjs_objective_free(obj) };
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        hjs_objective_free(ptr::null_mut());
        hjs_grid_free(ptr::null_mut());
        hjs_run_record_free(ptr::null_mut());
        assert_eq!(hjs_objective_dim(ptr::null()), 0);
        assert_eq!(hjs_grid_len(ptr::null()), 0);
        assert!(hjs_run_record_final_loss(ptr::null()).is_nan());
    }
}

#[test]
fn hopf_lax_grid_lies_below_initial_data() {
    let obj = objective("double_well_a1");
    let mut grid = ptr::null_mut();
    unsafe {
        let status = hjs_solve_pde(obj, HjsScheme::HopfLax, 0.0, 0.5, 257, &mut grid);
        assert_eq!(status, HjsStatus::Ok, "{}", last_error());
        assert_eq!(hjs_grid_dim(grid), 1);
        let n = hjs_grid_len(grid);
        assert_eq!(n, 257);
        let mut values = vec![0.0; n];
        assert_eq!(hjs_grid_values(grid, values.as_mut_ptr(), n), HjsStatus::Ok);
        let core = hjsmooth::objective::lookup("double_well_a1").unwrap();
        for i in (0..n).step_by(16) {
            let mut x = [0.0];
            assert_eq!(hjs_grid_point(grid, i, x.as_mut_ptr(), 1), HjsStatus::Ok);
            assert!(values[i] <= core.value(&x) + 1e-9);
            let mut u = 0.0;
            assert_eq!(
                hjs_grid_interpolate(grid, x.as_ptr(), 1, &mut u),
                HjsStatus::Ok
            );
            assert!((u - values[i]).abs() < 1e-12);
        }
        assert_eq!(
            hjs_grid_point(grid, n, [0.0].as_mut_ptr(), 1),
            HjsStatus::InvalidArgument
        );
        assert_eq!(
            hjs_grid_values(grid, values.as_mut_ptr(), n - 1),
            HjsStatus::DimensionMismatch
        );
        hjs_grid_free(grid);
        hjs_objective_free(obj);
    }
}

#[test]
fn optimizer_run_is_deterministic_and_accepts_json_overrides() {
    let obj = objective("quadratic_c1_n2");
    let config = CString::new(r#"{"eta": 0.05, "x0": [1.0, -1.0]}"#).unwrap();
    let run = |seed| {
        let mut rec = ptr::null_mut();
        let status = unsafe {
            hjs_optimize(
                obj,
                HjsAlgorithm::Sgd,
                config.as_ptr(),
                seed,
                2000,
                &mut rec,
            )
        };
        assert_eq!(status, HjsStatus::Ok, "{}", last_error());
        rec
    };
    let (a, b) = (run(7), run(7));
    unsafe {
        assert_eq!(hjs_run_record_aborted(a), 0);
        assert!(hjs_run_record_num_rows(a) > 1);
        assert_eq!(hjs_run_record_final_loss(a), hjs_run_record_final_loss(b));
        let mut first = HjsRunRow::default();
        assert_eq!(hjs_run_record_row(a, 0, &mut first), HjsStatus::Ok);
        let mut x = [0.0; 2];
        assert_eq!(
            hjs_run_record_terminal_x(a, x.as_mut_ptr(), 2),
            HjsStatus::Ok
        );
        assert!(hjs_run_record_final_loss(a) < first.loss);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(hjs_run_record_write_csv(a, cpath.as_ptr()), HjsStatus::Ok);
        assert!(std::fs::read_to_string(&path).unwrap().lines().count() > 2);

        hjs_run_record_free(a);
        hjs_run_record_free(b);

        let bad = CString::new(r#"{"etaa": 0.1}"#).unwrap();
        let mut rec = ptr::null_mut();
        let status = hjs_optimize(obj, HjsAlgorithm::Sgd, bad.as_ptr(), 0, 100, &mut rec);
        assert_eq!(status, HjsStatus::Config);
        assert!(last_error().contains("etaa"));
        hjs_objective_free(obj);
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/hjsmooth.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "hjs_last_error_message",
        "hjs_version",
        "hjs_objective_new",
        "hjs_objective_gradient",
        "hjs_solve_pde",
        "hjs_grid_values",
        "hjs_optimize",
        "hjs_run_record_row",
        "hjs_run_record_free",
        "typedef struct HjsObjective HjsObjective",
        "HJS_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a small C program against the shared library when a C compiler is present.
#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else {
        return;
    };
    let Some(target_dir) = exe.parent().and_then(|d| d.parent()) else {
        return;
    };
    let lib = target_dir.join("libhjsmooth_ffi.so");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or shared library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "hjsmooth.h"
int main(void) {
    HjsObjective *f = NULL;
    if (hjs_objective_new("double_well_a1", &f) != HJS_STATUS_OK) return 1;
    double x = 1.0, v = -1.0;
    if (hjs_objective_value(f, &x, 1, &v) != HJS_STATUS_OK) return 2;
    HjsGrid *g = NULL;
    if (hjs_solve_pde(f, HJS_SCHEME_HOPF_LAX, 0.0, 0.2, 65, &g) != HJS_STATUS_OK) return 3;
    if (hjs_grid_len(g) != 65) return 4;
    if (hjs_objective_new("missing", &f) != HJS_STATUS_UNKNOWN_OBJECTIVE) return 5;
    printf("%s %.6f\n", hjs_version(), v);
    hjs_grid_free(g);
    hjs_objective_free(f);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(target_dir)
        .arg("-lhjsmooth_ffi")
        .arg(format!("-Wl,-rpath,{}", target_dir.display()))
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")));
}
