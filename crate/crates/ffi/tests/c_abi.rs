use std::ffi::CString;
use std::ptr;

use kglab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { kg_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn soliton_handle_lifecycle() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { kg_soliton_new(1.5, 30.0, 0.02, &mut h) }, KgStatus::Ok);
    let (mut l0, mut om) = (0.0, 0.0);
    assert_eq!(unsafe { kg_soliton_constants(h, &mut l0, &mut om) }, KgStatus::Ok);
    assert_eq!(l0, -5.25);
    assert!((om - 21f64.sqrt() / 2.0).abs() < 1e-14);
    let q0 = unsafe { kg_soliton_profile(h, 0.0) };
    assert!((q0 - 2.5f64.powf(1.0 / 3.0)).abs() < 1e-14);
    let (mut lam, mut gaps, mut err) = (0.0, 9usize, 0.0);
    assert_eq!(unsafe { kg_soliton_spectrum(h, &mut lam, &mut gaps, &mut err) }, KgStatus::Ok);
    assert!((lam + 5.25).abs() < 1e-3 && gaps == 0 && err < 1e-3);
    let mut c = KgCoefficients::default();
    assert_eq!(unsafe { kg_scattering(h, 1.0, &mut c) }, KgStatus::Ok);
    let sum = c.t_re.powi(2) + c.t_im.powi(2) + c.r_plus_re.powi(2) + c.r_plus_im.powi(2);
    assert!((sum - 1.0).abs() < 1e-6);
    unsafe { kg_soliton_free(h) };
}

#[test]
fn errors_carry_status_and_message() {
    let status = unsafe { kg_soliton_new(1.5, 30.0, 0.02, ptr::null_mut()) };
    assert_eq!(status, KgStatus::InvalidArgument);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { kg_soliton_profile(ptr::null(), 0.0) }.is_nan(), true);
    let mut c = KgCoefficients::default();
    assert_eq!(unsafe { kg_scattering(ptr::null(), 1.0, &mut c) }, KgStatus::InvalidArgument);
}

#[test]
fn basis_round_trip_through_buffers() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { kg_soliton_new(1.5, 30.0, 0.05, &mut s) }, KgStatus::Ok);
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { kg_basis_new(s, 30.0, 0.05, 0.02, 10.0, &mut b) }, KgStatus::Ok);
    let n = unsafe { kg_basis_grid_len(b) };
    let nk = unsafe { kg_basis_freq_len(b) };
    let xs: Vec<f64> = (0..n).map(|i| -30.0 + 0.05 * i as f64).collect();
    let input: Vec<f64> = xs.iter().map(|x| (-(x / 2.0) * (x / 2.0)).exp() * (x * x - 3.0)).collect();
    let (mut re, mut im) = (vec![0.0; nk], vec![0.0; nk]);
    assert_eq!(unsafe { kg_basis_forward(b, input.as_ptr(), n, re.as_mut_ptr(), im.as_mut_ptr(), nk) }, KgStatus::Ok);
    let mut back = vec![0.0; n];
    assert_eq!(unsafe { kg_basis_inverse(b, re.as_ptr(), im.as_ptr(), nk, back.as_mut_ptr(), n) }, KgStatus::Ok);
    let twice: Vec<f64> = {
        let (mut r2, mut i2) = (vec![0.0; nk], vec![0.0; nk]);
        unsafe { kg_basis_forward(b, back.as_ptr(), n, r2.as_mut_ptr(), i2.as_mut_ptr(), nk) };
        r2.iter().zip(&re).map(|(a, b)| a - b).collect()
    };
    assert!(twice.iter().all(|d| d.abs() < 1e-4), "projection is idempotent");
    assert_eq!(
        unsafe { kg_basis_forward(b, input.as_ptr(), n - 1, re.as_mut_ptr(), im.as_mut_ptr(), nk) },
        KgStatus::InvalidArgument
    );
    unsafe {
        kg_basis_free(b);
        kg_soliton_free(s);
    }
}

#[test]
fn pipeline_rejects_bad_config_and_runs_a_stage() {
    let dir = std::env::temp_dir().join(format!("kglab_ffi_{}", std::process::id()));
    let cdir = CString::new(dir.to_str().unwrap()).unwrap();
    let bad = CString::new("[time]\ndt = 0.5\n").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { kg_pipeline_new(bad.as_ptr(), cdir.as_ptr(), &mut p) }, KgStatus::Config);
    assert!(last_error().contains("CFL"));
    assert_eq!(unsafe { kg_pipeline_new(ptr::null(), cdir.as_ptr(), &mut p) }, KgStatus::Ok);
    assert_eq!(unsafe { kg_pipeline_run(p, KgStage::Spectrum) }, KgStatus::Ok);
    let mut failed = 99;
    let total = unsafe { kg_pipeline_gates(p, &mut failed) };
    assert_eq!((total, failed), (3, 0));
    assert!(dir.join("spectrum.csv").exists() && dir.join("manifest.json").exists());
    unsafe { kg_pipeline_free(p) };
    std::fs::remove_dir_all(&dir).ok();
}
