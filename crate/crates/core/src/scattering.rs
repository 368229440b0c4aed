//! Jost solutions, transmission and reflection coefficients, and the
//! zero-energy genericity test.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::grid::GridSpec;
use crate::potential::Potential;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which end the Jost solution is normalized at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `m -> 1` as `x -> +inf`.
    Plus,
    /// `m -> 1` as `x -> -inf`.
    Minus,
}

/// `m(x, k) = e^{-ikx} f_+(x, k)` (or `e^{ikx} f_-` for `Side::Minus`) on the grid.
#[derive(Debug, Clone)]
pub struct JostSolution {
    pub side: Side,
    pub k: f64,
    pub m: Vec<Complex64>,
    pub dm: Vec<Complex64>,
}

/// RK4 substeps per grid cell so that `2 k h` stays below 0.1.
pub(crate) fn substeps(k: f64, dx: f64) -> usize {
    ((2.0 * k.abs() * dx / 0.1).ceil() as usize).max(1)
}

/// Integrate `m'' + 2ik m' = V m` inward from `+L` (or `m'' - 2ik m' = V m` from `-L`)
/// with unit data, storing `m` and `m'` at every node.
pub fn jost_solve(potential: &Potential, grid: &GridSpec, k: f64, side: Side) -> Result<JostSolution> {
    if !k.is_finite() {
        return Err(KgError::InvalidParameter("k must be finite".into()));
    }
    let n = grid.len();
    let dx = grid.dx();
    let sub = substeps(k, dx);
    let (h, sign) = match side {
        Side::Plus => (-dx / sub as f64, -1.0),
        Side::Minus => (dx / sub as f64, 1.0),
    };
    let twoik = I * (2.0 * k * sign);
    let rhs = |x: f64, m: Complex64, dm: Complex64| -> (Complex64, Complex64) {
        (dm, twoik * dm + potential.eval(x) * m)
    };
    let mut m = vec![Complex64::new(0.0, 0.0); n];
    let mut dm = vec![Complex64::new(0.0, 0.0); n];
    let order: Vec<usize> = match side {
        Side::Plus => (0..n).rev().collect(),
        Side::Minus => (0..n).collect(),
    };
    let mut y = Complex64::new(1.0, 0.0);
    let mut z = Complex64::new(0.0, 0.0);
    m[order[0]] = y;
    dm[order[0]] = z;
    let mut x = grid.x(order[0]);
    for &idx in &order[1..] {
        for s in 0..sub {
            let x0 = x + s as f64 * h;
            let (k1y, k1z) = rhs(x0, y, z);
            let (k2y, k2z) = rhs(x0 + 0.5 * h, y + 0.5 * h * k1y, z + 0.5 * h * k1z);
            let (k3y, k3z) = rhs(x0 + 0.5 * h, y + 0.5 * h * k2y, z + 0.5 * h * k2z);
            let (k4y, k4z) = rhs(x0 + h, y + h * k3y, z + h * k3z);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        }
        x = grid.x(idx);
        m[idx] = y;
        dm[idx] = z;
    }
    if !(y.re.is_finite() && y.im.is_finite()) {
        return Err(KgError::InvalidParameter(format!("Jost integration diverged at k = {k}")));
    }
    Ok(JostSolution { side, k, m, dm })
}

/// Transmission and reflection coefficients at one `k > 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Coefficients {
    pub k: f64,
    pub t: Complex64,
    pub r_plus: Complex64,
    pub r_minus: Complex64,
    /// `|T|^2 + |R_+|^2 - 1`.
    pub unitarity_defect: f64,
    /// Largest disagreement between the integral formulas and the asymptotic matching
    /// of the Jost solutions at the far edges.
    pub route_discrepancy: f64,
}

/// Coefficients from the two Jost solutions.
///
/// Primary route: `1/T = 1 - (2ik)^{-1} int V m_+`, `R_pm / T = (2ik)^{-1} int e^{-+2ikx} V m_-+`.
/// Second route: match `m_+ = A + B e^{-2ikx}` at the left edge and
/// `m_- = A' + B' e^{2ikx}` at the right edge.
pub fn coefficients_from_jost(
    potential: &Potential,
    grid: &GridSpec,
    plus: &JostSolution,
    minus: &JostSolution,
) -> Coefficients {
    let k = plus.k;
    let dx = grid.dx();
    let n = grid.len();
    let twoik = I * (2.0 * k);
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 * dx } else { dx };
    let mut int_plus = Complex64::new(0.0, 0.0);
    let mut int_minus = Complex64::new(0.0, 0.0);
    let mut refl_minus = Complex64::new(0.0, 0.0);
    let mut refl_plus = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let x = grid.x(i);
        let v = potential.eval(x) * w(i);
        if v == 0.0 {
            continue;
        }
        let e = Complex64::from_polar(1.0, 2.0 * k * x);
        int_plus += v * plus.m[i];
        int_minus += v * minus.m[i];
        refl_minus += v * e * plus.m[i];
        refl_plus += v * e.conj() * minus.m[i];
    }
    let inv_t = 1.0 - int_plus / twoik;
    let t = 1.0 / inv_t;
    let r_minus = refl_minus / twoik * t;
    let r_plus = refl_plus / twoik * t;

    let xl = grid.x(0);
    let b = -plus.dm[0] * Complex64::from_polar(1.0, 2.0 * k * xl) / twoik;
    let a = plus.m[0] - b * Complex64::from_polar(1.0, -2.0 * k * xl);
    let xr = grid.x(n - 1);
    let b2 = minus.dm[n - 1] * Complex64::from_polar(1.0, -2.0 * k * xr) / twoik;
    let a2 = minus.m[n - 1] - b2 * Complex64::from_polar(1.0, 2.0 * k * xr);
    let t_match = 1.0 / a;
    let t_match2 = 1.0 / a2;
    let r_minus_match = b / a;
    let r_plus_match = b2 / a2;
    let int_check = 1.0 - int_minus / twoik;
    let route_discrepancy = [
        (t - t_match).norm(),
        (t - t_match2).norm(),
        (r_minus - r_minus_match).norm(),
        (r_plus - r_plus_match).norm(),
        (inv_t - int_check).norm() * t.norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Coefficients {
        k,
        t,
        r_plus,
        r_minus,
        unitarity_defect: t.norm_sqr() + r_plus.norm_sqr() - 1.0,
        route_discrepancy,
    }
}

pub fn scattering_coefficients(potential: &Potential, grid: &GridSpec, k: f64) -> Result<Coefficients> {
    if !(k > 0.0) {
        return Err(KgError::InvalidParameter(format!(
            "coefficients need k > 0 (got {k}); use the small-k extrapolation"
        )));
    }
    let plus = jost_solve(potential, grid, k, Side::Plus)?;
    let minus = jost_solve(potential, grid, k, Side::Minus)?;
    Ok(coefficients_from_jost(potential, grid, &plus, &minus))
}

/// Positive frequencies: log-spaced on `[k_min, 0.5)` then uniform on `[0.5, k_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KGridSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub n_log: usize,
    pub n_lin: usize,
}

impl Default for KGridSpec {
    fn default() -> Self {
        Self { k_min: 1e-3, k_max: 40.0, n_log: 64, n_lin: 256 }
    }
}

impl KGridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        const SPLIT: f64 = 0.5;
        if !(self.k_min > 0.0 && self.k_min < SPLIT && self.k_max > SPLIT) {
            return Err(KgError::InvalidParameter(format!(
                "need 0 < k_min < {SPLIT} < k_max, got {self:?}"
            )));
        }
        if self.n_log < 3 || self.n_lin < 2 {
            return Err(KgError::InvalidParameter("k grid too small".into()));
        }
        let mut ks = Vec::with_capacity(self.n_log + self.n_lin);
        let (l0, l1) = (self.k_min.ln(), SPLIT.ln());
        for j in 0..self.n_log {
            ks.push((l0 + (l1 - l0) * j as f64 / self.n_log as f64).exp());
        }
        for j in 0..self.n_lin {
            ks.push(SPLIT + (self.k_max - SPLIT) * j as f64 / (self.n_lin - 1) as f64);
        }
        Ok(ks)
    }
}

/// Coefficients and Jost tables on a frequency grid.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub grid: GridSpec,
    pub k: Vec<f64>,
    pub coefficients: Vec<Coefficients>,
    pub m_plus: Vec<Vec<Complex64>>,
    pub m_minus: Vec<Vec<Complex64>>,
    pub genericity: GenericityReport,
}

impl ScatteringData {
    pub fn max_unitarity_defect(&self) -> f64 {
        self.coefficients.iter().map(|c| c.unitarity_defect.abs()).fold(0.0, f64::max)
    }

    pub fn max_route_discrepancy(&self) -> f64 {
        self.coefficients.iter().map(|c| c.route_discrepancy).fold(0.0, f64::max)
    }

    /// Coefficients at `-k` follow by conjugation for real potentials.
    pub fn at_negative(c: &Coefficients) -> Coefficients {
        Coefficients {
            k: -c.k,
            t: c.t.conj(),
            r_plus: c.r_plus.conj(),
            r_minus: c.r_minus.conj(),
            ..*c
        }
    }
}

pub fn compute_scattering(potential: &Potential, grid: &GridSpec, kspec: &KGridSpec) -> Result<ScatteringData> {
    let ks = kspec.points()?;
    let rows: Vec<(Coefficients, Vec<Complex64>, Vec<Complex64>)> = ks
        .par_iter()
        .map(|&k| {
            let plus = jost_solve(potential, grid, k, Side::Plus)?;
            let minus = jost_solve(potential, grid, k, Side::Minus)?;
            let c = coefficients_from_jost(potential, grid, &plus, &minus);
            Ok((c, plus.m, minus.m))
        })
        .collect::<Result<_>>()?;
    let genericity = genericity_classify(potential, grid, kspec.k_min)?;
    let mut coefficients = Vec::with_capacity(rows.len());
    let mut m_plus = Vec::with_capacity(rows.len());
    let mut m_minus = Vec::with_capacity(rows.len());
    for (c, p, m) in rows {
        coefficients.push(c);
        m_plus.push(p);
        m_minus.push(m);
    }
    Ok(ScatteringData { grid: *grid, k: ks, coefficients, m_plus, m_minus, genericity })
}

/// Complex linear least-squares fit `f(k) ~ intercept + slope * k`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extrapolation {
    pub intercept: Complex64,
    pub slope: Complex64,
    /// Largest residual of the fit over the samples.
    pub residual: f64,
}

pub fn small_k_extrapolation(samples: &[(f64, Complex64)]) -> Result<Extrapolation> {
    if samples.len() < 3 {
        return Err(KgError::InvalidParameter(format!(
            "extrapolation needs >= 3 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let sk: f64 = samples.iter().map(|s| s.0).sum();
    let skk: f64 = samples.iter().map(|s| s.0 * s.0).sum();
    let sf: Complex64 = samples.iter().map(|s| s.1).sum();
    let skf: Complex64 = samples.iter().map(|s| s.1 * s.0).sum();
    let det = n * skk - sk * sk;
    if det.abs() < 1e-300 {
        return Err(KgError::InvalidParameter("degenerate extrapolation samples".into()));
    }
    let slope = (n * skf - sk * sf) / det;
    let intercept = (sf - slope * sk) / n;
    let residual = samples
        .iter()
        .map(|(k, f)| (f - intercept - slope * *k).norm())
        .fold(0.0, f64::max);
    Ok(Extrapolation { intercept, slope, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Genericity {
    /// `T(0) = 0` and `R(0) = -1`: no zero-energy resonance.
    Generic,
    /// Bounded zero-energy solution; `T(0) != 0`.
    Resonant,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericityReport {
    pub verdict: Genericity,
    pub t0: Complex64,
    pub r_plus0: Complex64,
    pub r_minus0: Complex64,
    pub t_slope: Complex64,
    pub fit_residual: f64,
    /// `int V m_+(x, 0) dx`; nonzero for generic potentials.
    pub zero_energy_integral: f64,
    pub samples: usize,
}

const GENERIC_TOL: f64 = 1e-3;
const RESONANT_FLOOR: f64 = 0.1;

/// Classify the zero-energy behaviour by extrapolating the coefficients from
/// `k in [k_min, 10 k_min]` to `k = 0`.
pub fn genericity_classify(potential: &Potential, grid: &GridSpec, k_min: f64) -> Result<GenericityReport> {
    if !(k_min > 0.0) {
        return Err(KgError::InvalidParameter("k_min must be positive".into()));
    }
    let n = 6;
    let ks: Vec<f64> = (0..n).map(|j| k_min * 10f64.powf(j as f64 / (n - 1) as f64)).collect();
    let coeffs: Vec<Coefficients> = ks
        .par_iter()
        .map(|&k| scattering_coefficients(potential, grid, k))
        .collect::<Result<_>>()?;
    let fit = |f: &dyn Fn(&Coefficients) -> Complex64| {
        small_k_extrapolation(&coeffs.iter().map(|c| (c.k, f(c))).collect::<Vec<_>>())
    };
    let t = fit(&|c| c.t)?;
    let rp = fit(&|c| c.r_plus)?;
    let rm = fit(&|c| c.r_minus)?;
    let zero = jost_solve(potential, grid, 0.0, Side::Plus)?;
    let dx = grid.dx();
    let zero_energy_integral: f64 = (0..grid.len())
        .map(|i| {
            let w = if i == 0 || i == grid.len() - 1 { 0.5 * dx } else { dx };
            w * potential.eval(grid.x(i)) * zero.m[i].re
        })
        .sum();
    let t0 = t.intercept.norm();
    let verdict = if t0 <= GENERIC_TOL
        && (rp.intercept + 1.0).norm() <= GENERIC_TOL
        && (rm.intercept + 1.0).norm() <= GENERIC_TOL
    {
        Genericity::Generic
    } else if t0 >= RESONANT_FLOOR {
        Genericity::Resonant
    } else {
        Genericity::Inconclusive
    };
    Ok(GenericityReport {
        verdict,
        t0: t.intercept,
        r_plus0: rp.intercept,
        r_minus0: rm.intercept,
        t_slope: t.slope,
        fit_residual: t.residual.max(rp.residual).max(rm.residual),
        zero_energy_integral,
        samples: n,
    })
}
