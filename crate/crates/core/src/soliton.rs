//! Ground-state soliton, its linearized operator and the discrete spectrum.

use serde::Serialize;

use crate::error::{KgError, Result};
use crate::grid::{self, GridSpec};
use crate::potential::Potential;
use crate::tridiag::SymTridiag;

/// Focusing power nonlinearity `|u|^{2 alpha} u`.
#[inline]
pub fn power_nonlinearity(u: f64, alpha: f64) -> f64 {
    if alpha == 1.5 {
        u * u * u * u
    } else {
        u.abs().powf(2.0 * alpha) * u
    }
}

/// Closed-form soliton data for a given power `alpha`.
#[derive(Debug, Clone)]
pub struct SolitonModel {
    pub alpha: f64,
    pub grid: GridSpec,
    /// Profile sampled on `grid`.
    pub profile: Vec<f64>,
    pub potential: Potential,
    /// Negative eigenvalue of the linearized operator.
    pub lambda0: f64,
    /// Exponential growth rate `sqrt(-lambda0)`.
    pub omega: f64,
    /// Normalization constant of the ground state.
    pub c0: f64,
    /// Normalized ground state sampled on `grid`.
    pub ground_state: Vec<f64>,
    /// Derivative of the profile (the odd zero mode), sampled on `grid`.
    pub translation_mode: Vec<f64>,
}

pub fn build_soliton(alpha: f64, grid: GridSpec) -> Result<SolitonModel> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(KgError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if grid.half_width() < 10.0 / alpha {
        return Err(KgError::InvalidParameter(format!(
            "grid half width {} is below 10/alpha = {}",
            grid.half_width(),
            10.0 / alpha
        )));
    }
    let c0 = ground_state_constant(alpha);
    let mut model = SolitonModel {
        alpha,
        grid,
        profile: Vec::new(),
        potential: Potential::soliton(alpha),
        lambda0: -alpha * (alpha + 2.0),
        omega: (alpha * (alpha + 2.0)).sqrt(),
        c0,
        ground_state: Vec::new(),
        translation_mode: Vec::new(),
    };
    model.profile = grid.sample(|x| model.profile_at(x));
    model.ground_state = grid.sample(|x| model.ground_state_at(x));
    model.translation_mode = grid.sample(|x| model.translation_mode_at(x));
    Ok(model)
}

/// `1 / sqrt(int sech^{2(alpha+1)/alpha}(alpha x) dx)`, by Simpson on a wide fine grid.
fn ground_state_constant(alpha: f64) -> f64 {
    let g = GridSpec::from_spacing(60.0 / alpha, 0.0025 / alpha).expect("valid grid");
    let p = 2.0 * (alpha + 1.0) / alpha;
    let vals = g.sample(|x| sech(alpha * x).powf(p));
    1.0 / grid::simpson(&vals, g.dx()).sqrt()
}

#[inline]
fn sech(x: f64) -> f64 {
    // Avoid overflow of cosh for large arguments.
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

impl SolitonModel {
    fn amplitude(&self) -> f64 {
        (self.alpha + 1.0).powf(0.5 / self.alpha)
    }

    pub fn profile_at(&self, x: f64) -> f64 {
        self.amplitude() * sech(self.alpha * x).powf(1.0 / self.alpha)
    }

    pub fn translation_mode_at(&self, x: f64) -> f64 {
        -self.profile_at(x) * (self.alpha * x).tanh()
    }

    pub fn ground_state_at(&self, x: f64) -> f64 {
        self.c0 * sech(self.alpha * x).powf((self.alpha + 1.0) / self.alpha)
    }

    /// Mode data sampled on another grid, normalized with that grid's quadrature.
    pub fn mode_basis(&self, grid: &GridSpec) -> ModeBasis {
        ModeBasis::new(
            *grid,
            grid.sample(|x| self.profile_at(x)),
            grid.sample(|x| self.ground_state_at(x)),
            grid.sample(|x| self.translation_mode_at(x)),
            self.omega,
        )
    }
}

/// Second-order finite-difference matrix of `-d^2/dx^2 + 1 + V` with Dirichlet ends.
pub fn discretize_operator(potential: &Potential, grid: &GridSpec) -> SymTridiag {
    let dx = grid.dx();
    let inv = 1.0 / (dx * dx);
    let diag = grid.sample(|x| 2.0 * inv + 1.0 + potential.eval(x));
    SymTridiag::new(diag, vec![-inv; grid.len() - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub index: usize,
    pub value: f64,
    pub parity: Parity,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Eigenvalues below the continuum threshold `1`, ascending.
    pub eigenvalues: Vec<Eigenpair>,
    pub lambda0: f64,
    pub lambda0_expected: Option<f64>,
    /// Trapezoid L2 distance between the computed and closed-form ground states.
    pub ground_state_l2_error: Option<f64>,
    /// Eigenvalues found in `(0, 1)`; empty when the soliton has no internal mode.
    pub gap_eigenvalues: Vec<f64>,
    pub zero_mode: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub ground_state: Vec<f64>,
}

impl SpectrumReport {
    pub fn has_internal_mode(&self) -> bool {
        !self.gap_eigenvalues.is_empty()
    }
}

fn parity_of(v: &[f64]) -> Parity {
    let scale = grid::sup_norm(v);
    let n = v.len();
    let even = (0..n / 2).map(|i| (v[i] - v[n - 1 - i]).abs()).fold(0.0, f64::max);
    let odd = (0..n / 2).map(|i| (v[i] + v[n - 1 - i]).abs()).fold(0.0, f64::max);
    if even < 1e-6 * scale {
        Parity::Even
    } else if odd < 1e-6 * scale {
        Parity::Odd
    } else {
        Parity::Mixed
    }
}

/// Discrete spectrum of the linearized operator of `model` on its own grid.
pub fn spectrum_report(model: &SolitonModel) -> Result<SpectrumReport> {
    let mut report = spectrum_of(&model.potential, &model.grid)?;
    report.lambda0_expected = Some(model.lambda0);
    let mut gs = report.ground_state.clone();
    let dot = grid::inner(&gs, &model.ground_state, model.grid.dx());
    if dot < 0.0 {
        gs.iter_mut().for_each(|v| *v = -*v);
    }
    let diff: Vec<f64> = gs.iter().zip(&model.ground_state).map(|(a, b)| a - b).collect();
    report.ground_state_l2_error = Some(grid::l2_norm(&diff, model.grid.dx()));
    report.ground_state = gs;
    Ok(report)
}

/// Discrete spectrum below the continuum for an arbitrary potential.
pub fn spectrum_of(potential: &Potential, grid: &GridSpec) -> Result<SpectrumReport> {
    if grid.dx() > 0.05 + 1e-12 {
        return Err(KgError::GridTooCoarse(format!(
            "dx = {} exceeds 0.05 for spectral work",
            grid.dx()
        )));
    }
    let op = discretize_operator(potential, grid);
    let values = op.eigenvalues_below(1.0);
    if values.is_empty() {
        return Err(KgError::Eigen("no eigenvalue below the continuum".into()));
    }
    let dx = grid.dx();
    let start: Vec<f64> = grid.sample(|x| (-0.5 * x * x).exp() * (1.0 + 0.3 * x));
    let mut eigenvalues = Vec::with_capacity(values.len());
    let mut ground_state = Vec::new();
    for (index, &value) in values.iter().enumerate() {
        let mut v = op.eigenvector(value, &start)?;
        let parity = parity_of(&v);
        if index == 0 {
            let n = grid::l2_norm(&v, dx);
            let sign = if v[grid.center()] < 0.0 { -1.0 } else { 1.0 };
            v.iter_mut().for_each(|a| *a *= sign / n);
            ground_state = v;
        }
        eigenvalues.push(Eigenpair { index, value, parity });
    }
    let gap_eigenvalues: Vec<f64> =
        values.iter().copied().filter(|&v| v > 1e-3 && v < 1.0).collect();
    let zero_mode = values.iter().copied().find(|v| v.abs() <= 1e-3);
    let mut warnings = Vec::new();
    for g in &gap_eigenvalues {
        warnings.push(format!("eigenvalue {g:.6} lies in the gap (0, 1)"));
    }
    Ok(SpectrumReport {
        lambda0: values[0],
        eigenvalues,
        lambda0_expected: None,
        ground_state_l2_error: None,
        gap_eigenvalues,
        zero_mode,
        warnings,
        ground_state,
    })
}

/// Profile, ground state and translation mode on a particular grid, all normalized
/// with that grid's trapezoid rule.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub grid: GridSpec,
    pub profile: Vec<f64>,
    pub ground_state: Vec<f64>,
    /// Unit-norm odd zero mode.
    pub translation: Vec<f64>,
    pub omega: f64,
}

impl ModeBasis {
    pub fn new(
        grid: GridSpec,
        profile: Vec<f64>,
        mut ground_state: Vec<f64>,
        mut translation: Vec<f64>,
        omega: f64,
    ) -> Self {
        let dx = grid.dx();
        let n = grid::l2_norm(&ground_state, dx);
        ground_state.iter_mut().for_each(|v| *v /= n);
        let m = grid::l2_norm(&translation, dx);
        translation.iter_mut().for_each(|v| *v /= m);
        Self { grid, profile, ground_state, translation, omega }
    }
}

/// Newton-refined soliton of the finite-difference equation and the ground state of the
/// discrete linearized operator around it.
#[derive(Debug, Clone)]
pub struct DiscreteSoliton {
    pub alpha: f64,
    pub grid: GridSpec,
    pub profile: Vec<f64>,
    pub ground_state: Vec<f64>,
    pub lambda0: f64,
    pub omega: f64,
    /// Sup norm of the discrete stationary residual after the final Newton step.
    pub residual: f64,
    /// Translation mode of the closed-form soliton on the same grid (unit norm).
    pub translation: Vec<f64>,
}

impl DiscreteSoliton {
    pub fn new(model: &SolitonModel, grid: GridSpec) -> Result<Self> {
        let alpha = model.alpha;
        let dx = grid.dx();
        let inv = 1.0 / (dx * dx);
        let n = grid.len();
        let mut q = grid.sample(|x| model.profile_at(x));
        let residual_of = |q: &[f64]| -> Vec<f64> {
            let d2 = grid::second_derivative(q, dx);
            (0..n).map(|i| d2[i] - q[i] + power_nonlinearity(q[i], alpha)).collect()
        };
        let p = 2.0 * alpha + 1.0;
        let mut res = residual_of(&q);
        for _ in 0..40 {
            let diag: Vec<f64> =
                q.iter().map(|&u| 2.0 * inv + 1.0 - p * u.abs().powf(2.0 * alpha)).collect();
            let op = SymTridiag::new(diag, vec![-inv; n - 1]);
            let mut d = op.solve_shifted(0.0, &res)?;
            symmetrize(&mut d);
            let step = grid::sup_norm(&d);
            q.iter_mut().zip(&d).for_each(|(u, du)| *u += du);
            symmetrize(&mut q);
            res = residual_of(&q);
            if step < 1e-15 {
                break;
            }
        }
        let residual = grid::sup_norm(&res);
        if residual > 1e-9 {
            return Err(KgError::Eigen(format!("discrete soliton residual {residual:e}")));
        }
        let diag: Vec<f64> =
            q.iter().map(|&u| 2.0 * inv + 1.0 - p * u.abs().powf(2.0 * alpha)).collect();
        let op = SymTridiag::new(diag, vec![-inv; n - 1]);
        let lambda0 = op.eigenvalue(0);
        if lambda0 >= 0.0 {
            return Err(KgError::Eigen("discrete operator has no negative eigenvalue".into()));
        }
        let start = grid.sample(|x| model.ground_state_at(x));
        let mut rho = op.eigenvector(lambda0, &start)?;
        symmetrize(&mut rho);
        let norm = grid::l2_norm(&rho, dx);
        let sign = if rho[grid.center()] < 0.0 { -1.0 } else { 1.0 };
        rho.iter_mut().for_each(|v| *v *= sign / norm);
        let mut translation = grid.sample(|x| model.translation_mode_at(x));
        let tn = grid::l2_norm(&translation, dx);
        translation.iter_mut().for_each(|v| *v /= tn);
        Ok(Self {
            alpha,
            grid,
            profile: q,
            ground_state: rho,
            lambda0,
            omega: (-lambda0).sqrt(),
            residual,
            translation,
        })
    }

    pub fn mode_basis(&self) -> ModeBasis {
        ModeBasis::new(
            self.grid,
            self.profile.clone(),
            self.ground_state.clone(),
            self.translation.clone(),
            self.omega,
        )
    }
}

fn symmetrize(v: &mut [f64]) {
    let n = v.len();
    for i in 0..n / 2 {
        let m = 0.5 * (v[i] + v[n - 1 - i]);
        v[i] = m;
        v[n - 1 - i] = m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SolitonModel {
        build_soliton(1.5, GridSpec::from_spacing(40.0, 0.02).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let m = model();
        assert!((m.profile_at(0.0) - 2.5_f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert!((m.lambda0 + 5.25).abs() < 1e-14);
        assert!((m.omega - 21f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn profile_solves_stationary_equation() {
        let m = model();
        let h = 1e-4;
        for x in [-2.0, -0.3, 0.0, 0.8, 3.1] {
            let d2 = (m.profile_at(x + h) - 2.0 * m.profile_at(x) + m.profile_at(x - h)) / (h * h);
            let q = m.profile_at(x);
            assert!((d2 - q + power_nonlinearity(q, 1.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn spectrum_has_one_negative_even_and_one_odd_zero() {
        let m = model();
        let r = spectrum_report(&m).unwrap();
        assert_eq!(r.eigenvalues[0].parity, Parity::Even);
        assert!((r.lambda0 + 5.25).abs() < 1e-3);
        assert!(r.zero_mode.is_some());
        assert!(!r.has_internal_mode());
        assert!(r.ground_state_l2_error.unwrap() < 1e-3);
    }

    #[test]
    fn coarse_grid_rejected() {
        let m = build_soliton(1.5, GridSpec::from_spacing(40.0, 0.1).unwrap()).unwrap();
        assert!(matches!(spectrum_report(&m), Err(KgError::GridTooCoarse(_))));
    }

    #[test]
    fn discrete_soliton_is_close_to_closed_form() {
        let m = model();
        let g = GridSpec::from_spacing(30.0, 0.05).unwrap();
        let d = DiscreteSoliton::new(&m, g).unwrap();
        assert!(d.residual < 1e-10);
        let diff = d
            .profile
            .iter()
            .zip(g.sample(|x| m.profile_at(x)))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 5e-3 && diff > 0.0);
        assert!((d.omega - m.omega).abs() < 5e-3);
    }
}
