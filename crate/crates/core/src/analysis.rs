//! Decay exponents, the bootstrap norm and integrated decay functionals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::{japanese, DistortedBasis, Profile};
use crate::dynamics::Trajectory;
use crate::error::{KgError, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// OLS standard error of the slope.
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_points: usize,
    pub dropped: usize,
    pub window: (f64, f64),
}

/// Running maximum over `|t_j - t_i| <= width / 2`.
pub fn envelope(t: &[f64], y: &[f64], width: f64) -> Vec<f64> {
    let n = t.len();
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..n {
        while t[i] - t[lo] > 0.5 * width {
            lo += 1;
        }
        while hi + 1 < n && t[hi + 1] - t[i] <= 0.5 * width {
            hi += 1;
        }
        out.push(y[lo..=hi.max(i)].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)));
    }
    out
}

/// Least squares of `log y` on `log t` over `window`, optionally on the running-maximum
/// envelope of `y`. Non-positive values are dropped and counted.
pub fn fit_decay(t: &[f64], y: &[f64], window: (f64, f64), envelope_width: Option<f64>) -> Result<DecayFit> {
    if t.len() != y.len() {
        return Err(KgError::Fit("series lengths differ".into()));
    }
    if !(window.0 > 0.0 && window.1 > window.0) {
        return Err(KgError::Fit(format!("degenerate window {window:?}")));
    }
    let yy: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let yy = match envelope_width {
        Some(w) => envelope(t, &yy, w),
        None => yy,
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for (ti, yi) in t.iter().zip(&yy) {
        if *ti < window.0 || *ti > window.1 {
            continue;
        }
        if *yi > 0.0 && yi.is_finite() {
            xs.push(ti.ln());
            ys.push(yi.ln());
        } else {
            dropped += 1;
        }
    }
    if xs.is_empty() && dropped > 0 {
        return Err(KgError::Fit("all-zero series".into()));
    }
    if xs.len() < 20 {
        return Err(KgError::Fit(format!("{} samples in window, need >= 20", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(KgError::Fit("window spans a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    const Z95: f64 = 1.96;
    Ok(DecayFit {
        slope,
        intercept,
        stderr,
        ci_low: slope - Z95 * stderr,
        ci_high: slope + Z95 * stderr,
        n_points: xs.len(),
        dropped,
        window,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct XNormPoint {
    pub t: f64,
    /// `<t>^2 |a(t)|`.
    pub a_weighted: f64,
    pub dk_profile: f64,
    pub weighted_profile: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct XNormSeries {
    pub points: Vec<XNormPoint>,
    pub sup: f64,
    /// Least-squares slope of the total over the final third, times that duration,
    /// relative to `sup`.
    pub final_third_trend: f64,
}

fn snapshot_profiles(traj: &Trajectory, basis: &DistortedBasis) -> Result<Vec<Profile>> {
    if basis.grid.len() != traj.window.len() {
        return Err(KgError::InvalidParameter(
            "basis grid does not match the trajectory window".into(),
        ));
    }
    traj.snapshots
        .iter()
        .map(|s| basis.profile_from_state(&s.chi, &s.chit, s.t))
        .collect()
}

/// Bootstrap norm `<t>^2 |a| + ||dk g~|| + ||<k>^2 g~||` at each snapshot.
pub fn x_norm(traj: &Trajectory, basis: &DistortedBasis) -> Result<XNormSeries> {
    let profiles = snapshot_profiles(traj, basis)?;
    Ok(x_norm_from_profiles(traj, &profiles))
}

fn x_norm_from_profiles(traj: &Trajectory, profiles: &[Profile]) -> XNormSeries {
    let points: Vec<XNormPoint> = traj
        .snapshots
        .iter()
        .zip(profiles)
        .map(|(s, p)| {
            let aw = (1.0 + s.t * s.t) * s.a.abs();
            let dk = p.dk_norm();
            let w = p.weighted_norm();
            XNormPoint { t: s.t, a_weighted: aw, dk_profile: dk, weighted_profile: w, total: aw + dk + w }
        })
        .collect();
    let sup = points.iter().map(|p| p.total).fold(0.0, f64::max);
    let final_third_trend = match (points.first(), points.last()) {
        (Some(first), Some(last)) if sup > 0.0 => {
            let cut = last.t - (last.t - first.t) / 3.0;
            let tail: Vec<&XNormPoint> = points.iter().filter(|p| p.t >= cut).collect();
            if tail.len() >= 2 {
                let n = tail.len() as f64;
                let mt = tail.iter().map(|p| p.t).sum::<f64>() / n;
                let my = tail.iter().map(|p| p.total).sum::<f64>() / n;
                let stt: f64 = tail.iter().map(|p| (p.t - mt).powi(2)).sum();
                let sty: f64 = tail.iter().map(|p| (p.t - mt) * (p.total - my)).sum();
                (sty / stt) * (last.t - cut) / sup
            } else {
                0.0
            }
        }
        _ => 0.0,
    };
    XNormSeries { points, sup, final_third_trend }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileDerivativePoint {
    pub t: f64,
    /// `||e^{it<k>} F~(P_c N(v))||`, the time derivative of the profile from the equation.
    pub direct: f64,
    /// Difference quotient between neighbouring snapshots, when their spacing allows.
    pub finite_difference: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileDerivativeSeries {
    pub points: Vec<ProfileDerivativePoint>,
    pub slope_direct: Option<DecayFit>,
    pub slope_finite_difference: Option<DecayFit>,
}

/// Largest snapshot spacing accepted for difference quotients.
pub const MAX_PAIR_SPACING: f64 = 0.5;

/// Decay of `||d_t g~||`, directly from the equation and by differences of snapshot
/// profiles. Slopes are fitted on the running-maximum envelope of width `envelope_width`.
pub fn profile_derivative_decay(
    traj: &Trajectory,
    basis: &DistortedBasis,
    window: (f64, f64),
    envelope_width: Option<f64>,
) -> Result<ProfileDerivativeSeries> {
    let profiles = snapshot_profiles(traj, basis)?;
    profile_derivative_from(traj, basis, &profiles, window, envelope_width)
}

fn profile_derivative_from(
    traj: &Trajectory,
    basis: &DistortedBasis,
    profiles: &[Profile],
    window: (f64, f64),
    envelope_width: Option<f64>,
) -> Result<ProfileDerivativeSeries> {
    let ks = basis.k_values();
    let mut points = Vec::with_capacity(profiles.len());
    let mut any_pair = false;
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let pn = basis.project(&snap.nonlinearity);
        let nt = basis.forward_real(&pn);
        let rotated: Vec<Complex64> = nt
            .iter()
            .zip(&ks)
            .map(|(v, &k)| Complex64::from_polar(1.0, snap.t * japanese(k)) * v)
            .collect();
        let direct = basis.norm_k(&rotated);
        let finite_difference = traj.snapshots.get(i + 1).and_then(|next| {
            let h = next.t - snap.t;
            (h > 0.0 && h <= MAX_PAIR_SPACING + 1e-9).then(|| {
                let d: Vec<Complex64> =
                    profiles[i + 1].g.iter().zip(&profiles[i].g).map(|(b, a)| (b - a) / h).collect();
                basis.norm_k(&d)
            })
        });
        any_pair |= finite_difference.is_some();
        points.push(ProfileDerivativePoint { t: snap.t, direct, finite_difference });
    }
    if !any_pair && points.len() > 1 {
        return Err(KgError::InvalidParameter(format!(
            "no snapshot pair is closer than {MAX_PAIR_SPACING}"
        )));
    }
    let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    let slope_direct =
        fit_decay(&ts, &points.iter().map(|p| p.direct).collect::<Vec<_>>(), window, envelope_width).ok();
    let (tf, yf): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.finite_difference.map(|v| (p.t, v)))
        .unzip();
    let slope_finite_difference = fit_decay(&tf, &yf, window, envelope_width).ok();
    Ok(ProfileDerivativeSeries { points, slope_direct, slope_finite_difference })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntegratedDecay {
    pub exponent: f64,
    pub half_time: f64,
    pub full_time: f64,
    /// `int_0^{T/2} y^p dt`.
    pub value_half: f64,
    /// `int_0^T y^p dt`.
    pub value_full: f64,
    pub relative_change: f64,
    /// Power-law exponent of the integrand over the second half.
    pub tail_exponent: Option<f64>,
    /// Set when the tail is not integrable or its extrapolation beyond `T` exceeds 5%.
    pub tail_flag: bool,
}

fn integrate(t: &[f64], y: &[f64], upto: f64) -> f64 {
    let mut s = 0.0;
    for i in 1..t.len() {
        if t[i] > upto + 1e-9 {
            break;
        }
        s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    }
    s
}

pub fn integrated_decay(t: &[f64], y: &[f64], exponent: f64) -> IntegratedDecay {
    let yp: Vec<f64> = y.iter().map(|v| v.abs().powf(exponent)).collect();
    let full_time = *t.last().unwrap_or(&0.0);
    let half_time = 0.5 * full_time;
    let value_half = integrate(t, &yp, half_time);
    let value_full = integrate(t, &yp, full_time);
    let relative_change = if value_half > 0.0 { (value_full - value_half) / value_half } else { 0.0 };
    let tail = fit_decay(t, &yp, (half_time.max(1e-9), full_time), None).ok();
    let tail_exponent = tail.map(|f| f.slope);
    let tail_flag = match tail {
        Some(f) if f.slope < -1.0 => {
            let y_end = (f.intercept + f.slope * full_time.ln()).exp();
            let rest = y_end * full_time / (-f.slope - 1.0);
            rest > 0.05 * value_full
        }
        _ => true,
    };
    IntegratedDecay {
        exponent,
        half_time,
        full_time,
        value_half,
        value_full,
        relative_change,
        tail_exponent,
        tail_flag,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub t1: f64,
    /// Upper end of the fit window; `None` means `0.8 T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    pub envelope_width: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { t1: 10.0, t2: None, envelope_width: 6.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub fit_window: (f64, f64),
    pub exponent_a: DecayFit,
    pub exponent_chi_sup: DecayFit,
    pub exponent_chi_local: DecayFit,
    pub x_norm: Option<XNormSeries>,
    pub profile_derivative: Option<ProfileDerivativeSeries>,
    /// `int ||chi||_inf^{2.1}` and `int ||<x>^{-2} chi||_inf^{1.1}` at `T/2` and `T`.
    pub integrated_sup: IntegratedDecay,
    pub integrated_local: IntegratedDecay,
    /// `||g~(t_2) - g~(t_1)||` between the last two regular snapshots (reported only).
    pub profile_cauchy: Option<f64>,
}

/// Assemble the report for a trajectory. `horizon` is the nominal `T` used for the
/// default fit window; the trajectory may extend beyond it for the integrated functionals.
pub fn decay_report(
    traj: &Trajectory,
    basis: Option<&DistortedBasis>,
    cfg: &FitConfig,
    horizon: f64,
) -> Result<DecayReport> {
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let span = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(0.0));
    let window = (cfg.t1, cfg.t2.unwrap_or(0.8 * horizon));
    if window.0 < span.0 || window.1 > span.1 {
        return Err(KgError::Fit(format!("fit window {window:?} outside trajectory span {span:?}")));
    }
    let col = |f: &dyn Fn(&crate::dynamics::Sample) -> f64| -> Vec<f64> {
        traj.samples.iter().map(f).collect()
    };
    let a = col(&|s| s.a);
    let sup = col(&|s| s.chi_sup);
    let local = col(&|s| s.chi_weighted_sup);
    let exponent_a = fit_decay(&t, &a, window, None)?;
    let exponent_chi_sup = fit_decay(&t, &sup, window, Some(cfg.envelope_width))?;
    let exponent_chi_local = fit_decay(&t, &local, window, Some(cfg.envelope_width))?;
    let integrated_sup = integrated_decay(&t, &sup, 2.1);
    let integrated_local = integrated_decay(&t, &local, 1.1);
    let (x_norm, profile_derivative, profile_cauchy) = match basis {
        Some(b) if !traj.snapshots.is_empty() => {
            let profiles = snapshot_profiles(traj, b)?;
            let xn = x_norm_from_profiles(traj, &profiles);
            let pd = profile_derivative_from(traj, b, &profiles, window, Some(cfg.envelope_width))
                .map_err(|e| log::warn!("profile derivative: {e}"))
                .ok();
            let regular: Vec<&Profile> = profiles
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    traj.snapshots.get(i + 1).is_none_or(|n| n.t - traj.snapshots[*i].t > MAX_PAIR_SPACING + 1e-9)
                        || *i == 0
                })
                .map(|(_, p)| p)
                .collect();
            let cauchy = (regular.len() >= 2).then(|| {
                let (p, q) = (regular[regular.len() - 2], regular[regular.len() - 1]);
                let d: Vec<Complex64> = q.g.iter().zip(&p.g).map(|(x, y)| x - y).collect();
                b.norm_k(&d)
            });
            (Some(xn), pd, cauchy)
        }
        _ => (None, None, None),
    };
    Ok(DecayReport {
        fit_window: window,
        exponent_a,
        exponent_chi_sup,
        exponent_chi_local,
        x_norm,
        profile_derivative,
        integrated_sup,
        integrated_local,
        profile_cauchy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let t: Vec<f64> = (0..200).map(|i| 10.0 + 90.0 * i as f64 / 199.0).collect();
        let y: Vec<f64> = t.iter().map(|t| t.powi(-2)).collect();
        let f = fit_decay(&t, &y, (10.0, 100.0), None).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-10);
    }

    #[test]
    fn envelope_of_oscillating_series() {
        let t: Vec<f64> = (0..4000).map(|i| 1.0 + 0.05 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| t.powf(-0.5) * t.cos().abs()).collect();
        let f = fit_decay(&t, &y, (10.0, 150.0), Some(6.0)).unwrap();
        assert!((f.slope + 0.5).abs() < 0.05, "{}", f.slope);
    }

    #[test]
    fn too_few_samples_and_zero_series() {
        let t: Vec<f64> = (1..10).map(|i| i as f64).collect();
        assert!(fit_decay(&t, &t, (1.0, 9.0), None).is_err());
        let t: Vec<f64> = (1..50).map(|i| i as f64).collect();
        let z = vec![0.0; t.len()];
        assert!(fit_decay(&t, &z, (1.0, 49.0), None).is_err());
    }

    #[test]
    fn integrable_tail_converges() {
        let t: Vec<f64> = (0..=3000).map(|i| 0.1 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| (1.0 + t).powi(-2)).collect();
        let d = integrated_decay(&t, &y, 1.0);
        assert!(d.relative_change < 0.01);
        assert!(!d.tail_flag);
    }
}
