//! C interface to `kglab`.
//!
//! Objects are opaque handles created by `kg_*_new` and released by the matching
//! `kg_*_free`. Every fallible call returns a [`KgStatus`]; the message of the most recent
//! failure on the calling thread is available from [`kg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kglab::config::Config;
use kglab::dft::{DftConfig, DistortedBasis};
use kglab::pipeline::{Pipeline, Stage};
use kglab::scattering;
use kglab::soliton::{self, SolitonModel};
use kglab::{GridSpec, KgError};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgStatus {
    Ok = 0,
    /// Null pointer, bad length or out-of-range argument.
    InvalidArgument = 1,
    /// Configuration or data rejected by validation.
    Config = 2,
    /// The shooting bracket did not straddle the stable manifold.
    Bracket = 3,
    /// A run expected to stay near the soliton escaped or blew up.
    BlowUp = 4,
    Threshold = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgStage {
    Spectrum = 0,
    Scattering = 1,
    DftCheck = 2,
    LinearDecay = 3,
    Shoot = 4,
    Evolve = 5,
    DecayReport = 6,
}

impl From<KgStage> for Stage {
    fn from(s: KgStage) -> Self {
        match s {
            KgStage::Spectrum => Stage::Spectrum,
            KgStage::Scattering => Stage::Scattering,
            KgStage::DftCheck => Stage::DftCheck,
            KgStage::LinearDecay => Stage::LinearDecay,
            KgStage::Shoot => Stage::Shoot,
            KgStage::Evolve => Stage::Evolve,
            KgStage::DecayReport => Stage::DecayReport,
        }
    }
}

/// Scattering coefficients at one frequency.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KgCoefficients {
    pub k: f64,
    pub t_re: f64,
    pub t_im: f64,
    pub r_plus_re: f64,
    pub r_plus_im: f64,
    pub r_minus_re: f64,
    pub r_minus_im: f64,
    pub unitarity_defect: f64,
}

/// Soliton profile and its linearized operator.
pub struct KgSoliton(SolitonModel);

/// Distorted Fourier basis on a grid.
pub struct KgBasis(DistortedBasis);

/// Stage driver writing into an output directory.
pub struct KgPipeline(Pipeline);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(err: &KgError) -> KgStatus {
    match err {
        KgError::InvalidParameter(_) => KgStatus::InvalidArgument,
        KgError::Config(_) | KgError::Budget(_) | KgError::Constraint(_) => KgStatus::Config,
        KgError::Bracket(_) => KgStatus::Bracket,
        KgError::BlowUp { .. } | KgError::Escaped { .. } => KgStatus::BlowUp,
        KgError::Threshold(_) => KgStatus::Threshold,
        KgError::Io(_) | KgError::Csv(_) | KgError::Json(_) => KgStatus::Io,
        _ => KgStatus::Numerical,
    }
}

fn guard<F: FnOnce() -> Result<(), KgError>>(f: F) -> KgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KgStatus::Ok,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            KgStatus::Panic
        }
    }
}

fn null(name: &str) -> KgError {
    KgError::InvalidParameter(format!("{name} is null"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, KgError> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| KgError::InvalidParameter(format!("{name} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
/// `len`) and returns the full message length without the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn kg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Builds the soliton of power `alpha` on `[-half_width, half_width]` with spacing `dx`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn kg_soliton_new(alpha: f64, half_width: f64, dx: f64, out: *mut *mut KgSoliton) -> KgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = GridSpec::from_spacing(half_width, dx)?;
        let m = soliton::build_soliton(alpha, g)?;
        *out = Box::into_raw(Box::new(KgSoliton(m)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`kg_soliton_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kg_soliton_free(h: *mut KgSoliton) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Negative eigenvalue and growth rate of the closed-form model.
///
/// # Safety
/// `h` must be a live soliton handle; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kg_soliton_constants(h: *const KgSoliton, lambda0: *mut f64, omega: *mut f64) -> KgStatus {
    guard(|| {
        let m = &h.as_ref().ok_or_else(|| null("soliton"))?.0;
        if lambda0.is_null() || omega.is_null() {
            return Err(null("output"));
        }
        *lambda0 = m.lambda0;
        *omega = m.omega;
        Ok(())
    })
}

/// Profile value at `x`; NaN for a null handle.
///
/// # Safety
/// `h` must be null or a live soliton handle.
#[no_mangle]
pub unsafe extern "C" fn kg_soliton_profile(h: *const KgSoliton, x: f64) -> f64 {
    h.as_ref().map_or(f64::NAN, |m| m.0.profile_at(x))
}

/// Discretized ground eigenvalue, number of eigenvalues in `(0, 1)` and the L2 error of
/// the computed ground state.
///
/// # Safety
/// `h` must be a live soliton handle; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kg_soliton_spectrum(
    h: *const KgSoliton,
    lambda0: *mut f64,
    gap_count: *mut usize,
    ground_state_error: *mut f64,
) -> KgStatus {
    guard(|| {
        let m = &h.as_ref().ok_or_else(|| null("soliton"))?.0;
        if lambda0.is_null() || gap_count.is_null() || ground_state_error.is_null() {
            return Err(null("output"));
        }
        let r = soliton::spectrum_report(m)?;
        *lambda0 = r.lambda0;
        *gap_count = r.gap_eigenvalues.len();
        *ground_state_error = r.ground_state_l2_error.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Scattering coefficients of the soliton potential at frequency `k > 0`.
///
/// # Safety
/// `h` must be a live soliton handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn kg_scattering(h: *const KgSoliton, k: f64, out: *mut KgCoefficients) -> KgStatus {
    guard(|| {
        let m = &h.as_ref().ok_or_else(|| null("soliton"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = scattering::scattering_coefficients(&m.potential, &m.grid, k)?;
        *out = KgCoefficients {
            k: c.k,
            t_re: c.t.re,
            t_im: c.t.im,
            r_plus_re: c.r_plus.re,
            r_plus_im: c.r_plus.im,
            r_minus_re: c.r_minus.re,
            r_minus_im: c.r_minus.im,
            unitarity_defect: c.unitarity_defect,
        };
        Ok(())
    })
}

/// Distorted Fourier basis of the soliton's linearized operator on
/// `[-half_width, half_width]`, with frequency step `dk` up to `k_max`.
///
/// # Safety
/// `h` must be a live soliton handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn kg_basis_new(
    h: *const KgSoliton,
    half_width: f64,
    dx: f64,
    dk: f64,
    k_max: f64,
    out: *mut *mut KgBasis,
) -> KgStatus {
    guard(|| {
        let m = &h.as_ref().ok_or_else(|| null("soliton"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = GridSpec::from_spacing(half_width, dx)?;
        let b = DistortedBasis::for_modes(&m.potential, &m.mode_basis(&g), DftConfig { dk, k_max })?;
        *out = Box::into_raw(Box::new(KgBasis(b)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`kg_basis_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kg_basis_free(h: *mut KgBasis) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of grid nodes; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live basis handle.
#[no_mangle]
pub unsafe extern "C" fn kg_basis_grid_len(h: *const KgBasis) -> usize {
    h.as_ref().map_or(0, |b| b.0.grid.len())
}

/// Number of frequencies (both signs); 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live basis handle.
#[no_mangle]
pub unsafe extern "C" fn kg_basis_freq_len(h: *const KgBasis) -> usize {
    h.as_ref().map_or(0, |b| 2 * b.0.nk_half())
}

/// Transform of the real samples `input[0..n]` (n = grid length) into `re`, `im`
/// (each of length `nk` = frequency count). Frequencies ascend from `-k_max`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn kg_basis_forward(
    h: *const KgBasis,
    input: *const f64,
    n: usize,
    re: *mut f64,
    im: *mut f64,
    nk: usize,
) -> KgStatus {
    guard(|| {
        let b = &h.as_ref().ok_or_else(|| null("basis"))?.0;
        if input.is_null() || re.is_null() || im.is_null() {
            return Err(null("buffer"));
        }
        if n != b.grid.len() || nk != 2 * b.nk_half() {
            return Err(KgError::InvalidParameter(format!(
                "expected n = {}, nk = {}",
                b.grid.len(),
                2 * b.nk_half()
            )));
        }
        let g = b.forward_real(std::slice::from_raw_parts(input, n));
        for (i, v) in g.iter().enumerate() {
            *re.add(i) = v.re;
            *im.add(i) = v.im;
        }
        Ok(())
    })
}

/// Real part of the inverse transform of `(re, im)` into `output[0..n]`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn kg_basis_inverse(
    h: *const KgBasis,
    re: *const f64,
    im: *const f64,
    nk: usize,
    output: *mut f64,
    n: usize,
) -> KgStatus {
    guard(|| {
        let b = &h.as_ref().ok_or_else(|| null("basis"))?.0;
        if output.is_null() || re.is_null() || im.is_null() {
            return Err(null("buffer"));
        }
        if n != b.grid.len() || nk != 2 * b.nk_half() {
            return Err(KgError::InvalidParameter("length mismatch".into()));
        }
        let re = std::slice::from_raw_parts(re, nk);
        let im = std::slice::from_raw_parts(im, nk);
        let input: Vec<Complex64> = re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        let out = b.inverse_real(&input);
        std::slice::from_raw_parts_mut(output, n).copy_from_slice(&out);
        Ok(())
    })
}

/// Pipeline from TOML text (null for defaults) writing into `output_dir`.
///
/// # Safety
/// Strings must be null or NUL-terminated; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn kg_pipeline_new(config_toml: *const c_char, output_dir: *const c_char, out: *mut *mut KgPipeline) -> KgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = if config_toml.is_null() { Config::default() } else { Config::from_toml(text(config_toml, "config")?)? };
        let dir = text(output_dir, "output_dir")?;
        *out = Box::into_raw(Box::new(KgPipeline(Pipeline::new(cfg, dir)?)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`kg_pipeline_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kg_pipeline_free(h: *mut KgPipeline) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Runs `stage` and its prerequisites, writing artifacts.
///
/// # Safety
/// `h` must be a live pipeline handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn kg_pipeline_run(h: *mut KgPipeline, stage: KgStage) -> KgStatus {
    guard(|| {
        let p = &mut h.as_mut().ok_or_else(|| null("pipeline"))?.0;
        p.run(stage.into())
    })
}

/// Number of evaluated gates and, via `failed`, how many of them failed.
///
/// # Safety
/// `h` must be a live pipeline handle; `failed` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn kg_pipeline_gates(h: *const KgPipeline, failed: *mut usize) -> usize {
    let Some(p) = h.as_ref() else { return 0 };
    if !failed.is_null() {
        *failed = p.0.failed_gates().len();
    }
    p.0.gates().len()
}
