use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use xaidrop_ffi::*;

fn last_error() -> String {
    let p = xaidrop_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/xaidrop.h")
}

#[test]
fn yeo_johnson_and_fit() {
    let mut y = f64::NAN;
    assert_eq!(unsafe { xaidrop_yeo_johnson(2.0, 1.0, &mut y) }, XaidropStatus::Ok);
    assert_eq!(y, 2.0);
    assert_eq!(unsafe { xaidrop_yeo_johnson(0.0, -3.0, &mut y) }, XaidropStatus::Ok);
    assert_eq!(y, 0.0);
    // λ = 0 on the positive side is log(1 + x)
    assert_eq!(unsafe { xaidrop_yeo_johnson(1.0, 0.0, &mut y) }, XaidropStatus::Ok);
    assert!((y - 2f64.ln()).abs() < 1e-15);
    assert_eq!(
        unsafe { xaidrop_yeo_johnson(f64::NAN, 1.0, &mut y) },
        XaidropStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { xaidrop_yeo_johnson(1.0, 1.0, ptr::null_mut()) },
        XaidropStatus::NullPointer
    );
    assert!(last_error().contains("out"));

    let xs = [0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 8.0];
    let (mut lambda, mut degenerate) = (f64::NAN, -1);
    assert_eq!(
        unsafe { xaidrop_fit_lambda(xs.as_ptr(), xs.len(), &mut lambda, &mut degenerate) },
        XaidropStatus::Ok
    );
    assert_eq!(lambda, xaidrop::drop::yeo_johnson::fit_lambda(&xs).lambda);
    assert_eq!(degenerate, 0);
    assert_eq!(
        unsafe { xaidrop_fit_lambda(ptr::null(), 0, &mut lambda, &mut degenerate) },
        XaidropStatus::Ok
    );
    assert_eq!((lambda, degenerate), (1.0, 1));
}

#[test]
fn mapping_matches_library_and_checks_inputs() {
    let fsuf = [0.9, 0.1, 0.5, 0.7, 0.3];
    let mut out = [0.0; 5];
    let params = xaidrop_mapping_params_default();
    for (m, lib) in [
        (
            XaidropMapping::GaussianYeoJohnson,
            xaidrop::drop::Mapping::GaussianYeoJohnson,
        ),
        (XaidropMapping::EmpiricalCdf, xaidrop::drop::Mapping::EmpiricalCdf),
        (XaidropMapping::Uniform, xaidrop::drop::Mapping::Uniform),
    ] {
        let st = unsafe { xaidrop_map_to_probabilities(fsuf.as_ptr(), 5, 0.4, m, &params, out.as_mut_ptr()) };
        assert_eq!(st, XaidropStatus::Ok);
        let expected = xaidrop::drop::map_to_probabilities(&fsuf, 0.4, lib, &Default::default());
        assert_eq!(out.to_vec(), expected);
    }
    let st = unsafe {
        xaidrop_map_to_probabilities(
            fsuf.as_ptr(),
            5,
            1.0,
            XaidropMapping::Uniform,
            ptr::null(),
            out.as_mut_ptr(),
        )
    };
    assert_eq!(st, XaidropStatus::InvalidArgument);
    assert!(last_error().contains("p must lie"));
    let bad = XaidropMappingParams {
        floor: 0.5,
        ceiling: 0.2,
        spread_divisor: 3.0,
    };
    let st =
        unsafe { xaidrop_map_to_probabilities(fsuf.as_ptr(), 5, 0.4, XaidropMapping::Uniform, &bad, out.as_mut_ptr()) };
    assert_eq!(st, XaidropStatus::Config);
    let st = unsafe {
        xaidrop_map_to_probabilities(
            fsuf.as_ptr(),
            5,
            0.4,
            XaidropMapping::Uniform,
            ptr::null(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, XaidropStatus::NullPointer);
}

#[test]
fn dataset_handles_and_runs() {
    let mut ds: *mut XaidropDataset = ptr::null_mut();
    assert_eq!(
        unsafe { xaidrop_dataset_ba_house(30, 2, 4, 0, &mut ds) },
        XaidropStatus::Ok
    );
    let (mut n, mut m, mut d, mut c) = (0, 0, 0, 0);
    assert_eq!(
        unsafe { xaidrop_dataset_sizes(ds, &mut n, &mut m, &mut d, &mut c) },
        XaidropStatus::Ok
    );
    assert_eq!((n, c), (30 + 4 * 5, 2));
    assert!(m > 0 && d > 0);

    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().join("run").to_str().unwrap()).unwrap();
    let cfg = CString::new("seeds = [0]\n[train]\nepochs = 3\n[drop]\nmethod = \"node\"\n").unwrap();
    assert_eq!(
        unsafe { xaidrop_run(ds, cfg.as_ptr(), out.as_ptr()) },
        XaidropStatus::Ok
    );
    assert!(dir.path().join("run/results.csv").exists());

    let bad = CString::new("[drop]\nnope = 1\n").unwrap();
    assert_eq!(
        unsafe { xaidrop_run(ds, bad.as_ptr(), out.as_ptr()) },
        XaidropStatus::Config
    );
    assert!(last_error().contains("nope"));
    unsafe { xaidrop_dataset_free(ds) };
    unsafe { xaidrop_dataset_free(ptr::null_mut()) };

    let missing = CString::new(dir.path().join("absent").to_str().unwrap()).unwrap();
    let mut ds: *mut XaidropDataset = ptr::null_mut();
    assert_eq!(
        unsafe { xaidrop_dataset_load(missing.as_ptr(), &mut ds) },
        XaidropStatus::Io
    );
    assert!(ds.is_null());
    assert_eq!(
        unsafe { xaidrop_dataset_load(ptr::null(), &mut ds) },
        XaidropStatus::NullPointer
    );
    let mut ds: *mut XaidropDataset = ptr::null_mut();
    assert_eq!(
        unsafe { xaidrop_dataset_ba_house(30, 0, 4, 0, &mut ds) },
        XaidropStatus::InvalidArgument
    );
}

#[test]
fn header_is_valid_c_and_cxx() {
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header())
            .status()
            .unwrap();
        assert!(status.success(), "{compiler} rejected the header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    // the test binary lives in target/<profile>/deps; the archive one level up
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    assert!(lib_dir.join("libxaidrop_ffi.a").exists(), "static library not built");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "xaidrop.h"
int main(void) {
    double y = 0.0;
    if (xaidrop_yeo_johnson(3.0, 1.0, &y) != XAIDROP_STATUS_OK || y != 3.0) return 1;
    if (xaidrop_yeo_johnson(1.0, 1.0, NULL) != XAIDROP_STATUS_NULL_POINTER) return 2;
    if (xaidrop_last_error_message() == NULL) return 3;
    XaidropDataset *ds = NULL;
    if (xaidrop_dataset_ba_house(20, 2, 3, 0, &ds) != XAIDROP_STATUS_OK) return 4;
    size_t n, m, d, c;
    if (xaidrop_dataset_sizes(ds, &n, &m, &d, &c) != XAIDROP_STATUS_OK) return 5;
    xaidrop_dataset_free(ds);
    printf("%zu\n", n);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(lib_dir.join("libxaidrop_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "35");
}
