use std::ffi::{c_char, CStr};
use std::path::Path;
use std::process::Command;

use dslt_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        dslt_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn covariance_and_error_codes() {
    let mut v = 0.0;
    assert_eq!(unsafe { dslt_fbm_cov(0.5, 0.3, 0.7, &mut v) }, DsltStatus::Ok);
    assert_eq!(v, 0.3);
    assert_eq!(unsafe { dslt_fbm_cov(1.0, 0.3, 0.7, &mut v) }, DsltStatus::Domain);
    assert!(last_error().contains("domain"), "{}", last_error());
    assert_eq!(unsafe { dslt_fbm_cov(0.5, 0.3, 0.7, std::ptr::null_mut()) }, DsltStatus::NullPointer);
    assert_eq!(unsafe { dslt_odd_series(1.0, &mut v) }, DsltStatus::Domain);
    assert_eq!(unsafe { dslt_bound_ratio(0.5, 3, 0.3, 0.2, 0.4, &mut v) }, DsltStatus::Ok);
    assert_eq!(v, 1.0);
    assert_eq!(unsafe { dslt_bound_ratio(0.5, 4, 0.3, 0.2, 0.4, &mut v) }, DsltStatus::Domain);
}

#[test]
fn sampler_handle_lifecycle() {
    let mut s: *mut DsltSampler = std::ptr::null_mut();
    assert_eq!(unsafe { dslt_sampler_new(0.3, 1.0, 64, DsltMethod::Circulant, &mut s) }, DsltStatus::Ok);
    let mut a = vec![0.0; 65];
    let mut b = vec![0.0; 65];
    unsafe {
        assert_eq!(dslt_sampler_sample(s, 9, 2, a.as_mut_ptr(), a.len()), DsltStatus::Ok);
        assert_eq!(dslt_sampler_sample(s, 9, 2, b.as_mut_ptr(), b.len()), DsltStatus::Ok);
        assert_eq!(dslt_sampler_sample(s, 9, 2, b.as_mut_ptr(), 10), DsltStatus::BufferTooSmall);
        let mut est = 0.0;
        assert_eq!(
            dslt_alpha_prime_estimate(0.3, 1.0, a.as_ptr(), a.len(), 1.0, 0.1, 0.0, &mut est),
            DsltStatus::Ok
        );
        assert!(est.is_finite());
        dslt_sampler_free(s);
        dslt_sampler_free(std::ptr::null_mut());
    }
    assert_eq!(a, b);
    assert_eq!(a[0], 0.0);
}

#[test]
fn quadrature_entry_points() {
    let (mut v, mut e, mut c) = (0.0, 0.0, 0);
    assert_eq!(unsafe { dslt_chaos_norm_integral(0.5, 1.0, 1e-6, &mut v, &mut e, &mut c) }, DsltStatus::Ok);
    assert!((v - 5.0 / 6.0).abs() < 1e-6 && c == 1);
    assert_eq!(unsafe { dslt_mean_alpha_eps(0.5, 1.0, 0.1, 0.0, &mut v) }, DsltStatus::Ok);
    assert_eq!(v, 0.0);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(dslt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("dslt.h");
    let text = std::fs::read_to_string(&header).expect("generated header");
    for sym in ["dslt_sampler_new", "dslt_last_error_message", "DSLT_STATUS_OK", "DsltSampler"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let src = std::env::temp_dir().join("dslt_header_check.c");
    std::fs::write(&src, format!("#include \"{}\"\nint main(void) {{ return 0; }}\n", header.display())).unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg(&src).status() {
        Ok(st) => assert!(st.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; skipped syntax check"),
    }
}
