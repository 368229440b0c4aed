//! Distorted Fourier transform of `H = -d^2/dx^2 + V`, the continuous-spectrum
//! projector, spectral multipliers and the linear Klein-Gordon propagator.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::grid::{self, GridSpec};
use crate::potential::Potential;
use crate::scattering::{jost_solve, Side};
use crate::soliton::ModeBasis;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Frequency grid of the transform: midpoints `(j + 1/2) dk` of `[0, k_max]` and their mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DftConfig {
    pub dk: f64,
    pub k_max: f64,
}

impl Default for DftConfig {
    fn default() -> Self {
        Self { dk: 0.01, k_max: 12.0 }
    }
}

/// `<k> = sqrt(1 + k^2)`.
#[inline]
pub fn japanese(k: f64) -> f64 {
    (1.0 + k * k).sqrt()
}

/// Generalized eigenfunctions `psi(x, k)` of `H`, stored as Jost tables on the support of
/// `V` and closed-form plane waves outside it.
#[derive(Debug, Clone)]
pub struct DistortedBasis {
    pub grid: GridSpec,
    pub config: DftConfig,
    /// Positive frequencies `k_j`.
    k_pos: Vec<f64>,
    pub transmission: Vec<Complex64>,
    pub r_plus: Vec<Complex64>,
    pub r_minus: Vec<Complex64>,
    /// Nodes `interior.start..interior.end` use the tables; others use the closed forms.
    interior: std::ops::Range<usize>,
    /// `T m_+ / sqrt(2 pi)`, row-major `[node][k]`.
    table_plus: Vec<Complex64>,
    /// `T m_- / sqrt(2 pi)`, row-major `[node][k]`.
    table_minus: Vec<Complex64>,
    /// Orthonormal bound states removed by the projector.
    pub bound_states: Vec<Vec<f64>>,
}

impl DistortedBasis {
    /// `bound_states` must be sampled on `grid`; they are orthonormalized here.
    pub fn new(
        potential: &Potential,
        bound_states: Vec<Vec<f64>>,
        grid: GridSpec,
        config: DftConfig,
    ) -> Result<Self> {
        if !(config.dk > 0.0 && config.k_max > config.dk) {
            return Err(KgError::InvalidParameter(format!("bad transform k grid {config:?}")));
        }
        let nk = (config.k_max / config.dk).round() as usize;
        let k_pos: Vec<f64> = (0..nk).map(|j| (j as f64 + 0.5) * config.dk).collect();
        let radius = potential.support_radius(&grid, 1e-17);
        let interior = grid.core_range(radius);
        let m = (interior.len() - 1) / 2;
        let core = GridSpec::new((m as f64 * grid.dx()).max(grid.dx()), 2 * m.max(1) + 1)?;
        let interior = if m == 0 { grid.center()..grid.center() + 1 } else { interior };
        let norm = 1.0 / (2.0 * PI).sqrt();
        let columns: Vec<_> = k_pos
            .par_iter()
            .map(|&k| -> Result<_> {
                let plus = jost_solve(potential, &core, k, Side::Plus)?;
                let minus = jost_solve(potential, &core, k, Side::Minus)?;
                let twoik = Complex64::new(0.0, 2.0 * k);
                let n = core.len();
                let xl = core.x(0);
                let b = -plus.dm[0] * Complex64::from_polar(1.0, 2.0 * k * xl) / twoik;
                let a = plus.m[0] - b * Complex64::from_polar(1.0, -2.0 * k * xl);
                let xr = core.x(n - 1);
                let b2 = minus.dm[n - 1] * Complex64::from_polar(1.0, -2.0 * k * xr) / twoik;
                let a2 = minus.m[n - 1] - b2 * Complex64::from_polar(1.0, 2.0 * k * xr);
                let t = 1.0 / a;
                let cp: Vec<Complex64> = plus.m.iter().map(|v| v * t * norm).collect();
                let cm: Vec<Complex64> = minus.m.iter().map(|v| v * t * norm).collect();
                Ok((t, b2 / a2, b / a, cp, cm))
            })
            .collect::<Result<_>>()?;
        let n_int = interior.len();
        let mut table_plus = vec![ZERO; n_int * nk];
        let mut table_minus = vec![ZERO; n_int * nk];
        let mut transmission = Vec::with_capacity(nk);
        let mut r_plus = Vec::with_capacity(nk);
        let mut r_minus = Vec::with_capacity(nk);
        for (j, (t, rp, rm, cp, cm)) in columns.into_iter().enumerate() {
            transmission.push(t);
            r_plus.push(rp);
            r_minus.push(rm);
            for i in 0..n_int {
                table_plus[i * nk + j] = cp[i];
                table_minus[i * nk + j] = cm[i];
            }
        }
        let bound_states = orthonormalize(bound_states, grid.dx())?;
        Ok(Self {
            grid,
            config,
            k_pos,
            transmission,
            r_plus,
            r_minus,
            interior,
            table_plus,
            table_minus,
            bound_states,
        })
    }

    /// Basis for the soliton's linearized operator with its ground state and
    /// translation mode as the discrete spectrum.
    pub fn for_modes(potential: &Potential, modes: &ModeBasis, config: DftConfig) -> Result<Self> {
        Self::new(
            potential,
            vec![modes.ground_state.clone(), modes.translation.clone()],
            modes.grid,
            config,
        )
    }

    pub fn nk_half(&self) -> usize {
        self.k_pos.len()
    }

    /// Signed frequency grid, ascending: `-k_{N-1}, ..., -k_0, k_0, ..., k_{N-1}`.
    pub fn k_values(&self) -> Vec<f64> {
        let n = self.nk_half();
        (0..2 * n).map(|s| self.k_at(s)).collect()
    }

    #[inline]
    fn k_at(&self, s: usize) -> f64 {
        (s as f64 - self.nk_half() as f64 + 0.5) * self.config.dk
    }

    pub fn radius(&self) -> f64 {
        self.grid.x(self.interior.end - 1)
    }

    /// `psi(x_i, k_s)`, with `phase = e^{i k_s x_i}`.
    #[inline]
    fn psi_with_phase(&self, i: usize, s: usize, phase: Complex64) -> Complex64 {
        let n = self.nk_half();
        let norm = 1.0 / (2.0 * PI).sqrt();
        let (j, positive) = if s >= n { (s - n, true) } else { (n - 1 - s, false) };
        if self.interior.contains(&i) {
            let row = (i - self.interior.start) * n;
            let table = if positive { &self.table_plus } else { &self.table_minus };
            return table[row + j] * phase;
        }
        let right = i >= self.interior.end;
        match (positive, right) {
            (true, true) | (false, false) => self.transmission[j] * phase * norm,
            (true, false) => (phase + self.r_minus[j] * phase.conj()) * norm,
            (false, true) => (phase + self.r_plus[j] * phase.conj()) * norm,
        }
    }

    /// `psi(x_i, k_s)` for diagnostics.
    pub fn psi(&self, i: usize, s: usize) -> Complex64 {
        let phase = Complex64::from_polar(1.0, self.k_at(s) * self.grid.x(i));
        self.psi_with_phase(i, s, phase)
    }

    fn x_weight(&self, i: usize) -> f64 {
        let dx = self.grid.dx();
        if i == 0 || i + 1 == self.grid.len() {
            0.5 * dx
        } else {
            dx
        }
    }

    /// `h~(k) = int conj(psi(x, k)) h(x) dx` by the trapezoid rule.
    pub fn forward(&self, h: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(h.len(), self.grid.len());
        (0..2 * self.nk_half())
            .into_par_iter()
            .map(|s| {
                let k = self.k_at(s);
                let x0 = self.grid.x(0);
                let step = Complex64::from_polar(1.0, k * self.grid.dx());
                let mut phase = Complex64::from_polar(1.0, k * x0);
                let mut acc = ZERO;
                for (i, hi) in h.iter().enumerate() {
                    if i % 256 == 0 {
                        phase = Complex64::from_polar(1.0, k * self.grid.x(i));
                    }
                    if *hi != ZERO {
                        acc += self.psi_with_phase(i, s, phase).conj() * hi * self.x_weight(i);
                    }
                    phase *= step;
                }
                acc
            })
            .collect()
    }

    pub fn forward_real(&self, h: &[f64]) -> Vec<Complex64> {
        self.forward(&to_complex(h))
    }

    /// `(F~^{-1} g)(x) = int psi(x, k) g(k) dk` by the midpoint rule.
    pub fn inverse(&self, g: &[Complex64]) -> Vec<Complex64> {
        let nk = 2 * self.nk_half();
        assert_eq!(g.len(), nk);
        let dk = self.config.dk;
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let x = self.grid.x(i);
                let step = Complex64::from_polar(1.0, dk * x);
                let mut phase = Complex64::from_polar(1.0, self.k_at(0) * x);
                let mut acc = ZERO;
                for (s, gs) in g.iter().enumerate() {
                    if s % 256 == 0 {
                        phase = Complex64::from_polar(1.0, self.k_at(s) * x);
                    }
                    acc += self.psi_with_phase(i, s, phase) * gs;
                    phase *= step;
                }
                acc * dk
            })
            .collect()
    }

    /// Real part of the inverse transform.
    pub fn inverse_real(&self, g: &[Complex64]) -> Vec<f64> {
        self.inverse(g).into_iter().map(|c| c.re).collect()
    }

    /// Midpoint-rule `L^2` norm over the frequency grid.
    pub fn norm_k(&self, g: &[Complex64]) -> f64 {
        (g.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.config.dk).sqrt()
    }

    pub fn inner_k(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.config.dk
    }

    /// Remove the bound-state components of `h`.
    pub fn project(&self, h: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut out = h.to_vec();
        for b in &self.bound_states {
            let c = grid::inner(&out, b, dx);
            out.iter_mut().zip(b).for_each(|(o, bi)| *o -= c * bi);
        }
        out
    }

    /// `F~^{-1} (m(k) F~ h)`.
    pub fn apply_multiplier<M: Fn(f64) -> Complex64 + Sync>(&self, m: M, h: &[Complex64]) -> Vec<Complex64> {
        let mut g = self.forward(h);
        let ks = self.k_values();
        g.iter_mut().zip(&ks).for_each(|(v, &k)| *v *= m(k));
        self.inverse(&g)
    }

    pub fn apply_real_multiplier<M: Fn(f64) -> f64 + Sync>(&self, m: M, h: &[f64]) -> Vec<f64> {
        self.apply_multiplier(|k| Complex64::new(m(k), 0.0), &to_complex(h))
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Exact-in-time solution of `chi_tt + (H + 1) chi = 0` for continuous-spectrum data.
    pub fn linear_propagate(&self, chi0: &[f64], chi1: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let g0 = self.forward_real(chi0);
        let g1 = self.forward_real(chi1);
        let ks = self.k_values();
        let mut pos = Vec::with_capacity(ks.len());
        let mut vel = Vec::with_capacity(ks.len());
        for ((a, b), &k) in g0.iter().zip(&g1).zip(&ks) {
            let w = japanese(k);
            let (s, c) = (w * t).sin_cos();
            pos.push(a * c + b * (s / w));
            vel.push(-a * (w * s) + b * c);
        }
        (self.inverse_real(&pos), self.inverse_real(&vel))
    }

    /// `g~(t, k) = e^{i t <k>} (chi_t~ - i <k> chi~)`.
    pub fn profile_from_state(&self, chi: &[f64], chi_t: &[f64], t: f64) -> Result<Profile> {
        let a = self.forward_real(chi);
        let b = self.forward_real(chi_t);
        let ks = self.k_values();
        let g: Vec<Complex64> = a
            .iter()
            .zip(&b)
            .zip(&ks)
            .map(|((a, b), &k)| {
                let w = japanese(k);
                Complex64::from_polar(1.0, t * w) * (b - Complex64::new(0.0, w) * a)
            })
            .collect();
        Profile::new(t, ks, g, self.config.dk)
    }

    /// Recover `(chi, chi_t)` from a profile. Complex conjugation is applied in
    /// physical space, where the real structure of the solution lives.
    pub fn state_from_profile(&self, p: &Profile) -> (Vec<f64>, Vec<f64>) {
        let rotated: Vec<Complex64> = p
            .g
            .iter()
            .zip(&p.k)
            .map(|(g, &k)| Complex64::from_polar(1.0, -p.t * japanese(k)) * g)
            .collect();
        let scaled: Vec<Complex64> =
            rotated.iter().zip(&p.k).map(|(g, &k)| g / japanese(k)).collect();
        let w = self.inverse(&scaled);
        let chi: Vec<f64> = w
            .iter()
            .map(|w| ((w.conj() - w) / Complex64::new(0.0, 2.0)).re)
            .collect();
        (chi, self.inverse_real(&rotated))
    }

    /// Sup norms of `<D>^{-1} e^{it<D>} P_c f` and of its `<x>^{-2}`-weighted version.
    pub fn linear_decay_probe(&self, f: &[f64], times: &[f64]) -> Result<Vec<LinearDecaySample>> {
        if grid::odd_part_sup(f) > 1e-8 * grid::sup_norm(f).max(1e-300) {
            return Err(KgError::InvalidParameter("decay probe data must be even".into()));
        }
        let g = self.forward_real(f);
        let ks = self.k_values();
        let edge = self.grid.half_width() - 2.0;
        let xs = self.grid.nodes();
        let edge_idx: Vec<usize> = (0..xs.len()).filter(|&i| xs[i].abs() >= edge).collect();
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let gt: Vec<Complex64> = g
                .iter()
                .zip(&ks)
                .map(|(g, &k)| Complex64::from_polar(1.0 / japanese(k), t * japanese(k)) * g)
                .collect();
            let u = self.inverse(&gt);
            let sup = u.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let weighted = u
                .iter()
                .zip(&xs)
                .map(|(c, x)| c.norm() / (1.0 + x * x))
                .fold(0.0, f64::max);
            let edge_amp = edge_idx.iter().map(|&i| u[i].norm()).fold(0.0, f64::max);
            let truncated = edge_amp > 1e-3 * sup;
            if truncated {
                log::warn!("decay probe: wave train reaches the grid edge at t = {t}");
            }
            out.push(LinearDecaySample { t, sup_norm: sup, weighted_sup_norm: weighted, truncated });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearDecaySample {
    pub t: f64,
    pub sup_norm: f64,
    pub weighted_sup_norm: f64,
    pub truncated: bool,
}

/// Profile `g~(t, k)` with its frequency derivative and `<k>^2 g~`.
#[derive(Debug, Clone)]
pub struct Profile {
    pub t: f64,
    pub k: Vec<f64>,
    pub g: Vec<Complex64>,
    pub dk_g: Vec<Complex64>,
    pub weighted: Vec<Complex64>,
    pub dk: f64,
}

impl Profile {
    pub fn new(t: f64, k: Vec<f64>, g: Vec<Complex64>, dk: f64) -> Result<Self> {
        if g.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(KgError::Regularity("profile has non-finite values".into()));
        }
        let dk_g = derivative_across_gap(&k, &g);
        let weighted = g.iter().zip(&k).map(|(v, &k)| v * (1.0 + k * k)).collect();
        Ok(Self { t, k, g, dk_g, weighted, dk })
    }

    pub fn norm(&self) -> f64 {
        l2k(&self.g, self.dk)
    }

    pub fn dk_norm(&self) -> f64 {
        l2k(&self.dk_g, self.dk)
    }

    pub fn weighted_norm(&self) -> f64 {
        l2k(&self.weighted, self.dk)
    }

    /// `|g~(+-k_min)|` against `5 k_min max|dk g~|`: small for generic potentials.
    pub fn small_k_defect(&self) -> (f64, f64) {
        let n = self.k.len() / 2;
        let kmin = self.k[n].abs();
        let at_min = self.g[n].norm().max(self.g[n - 1].norm());
        let bound = 5.0 * kmin * self.dk_g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        (at_min, bound)
    }
}

fn l2k(v: &[Complex64], dk: f64) -> f64 {
    (v.iter().map(|c| c.norm_sqr()).sum::<f64>() * dk).sqrt()
}

/// Second-order differences on each half-line separately, one-sided at the ends and on
/// either side of the `k = 0` gap.
fn derivative_across_gap(k: &[f64], g: &[Complex64]) -> Vec<Complex64> {
    let n = g.len();
    let half = n / 2;
    let mut d = vec![ZERO; n];
    for (lo, hi) in [(0, half), (half, n)] {
        let m = hi - lo;
        if m < 3 {
            continue;
        }
        for i in lo + 1..hi - 1 {
            d[i] = (g[i + 1] - g[i - 1]) / (k[i + 1] - k[i - 1]);
        }
        let h = k[lo + 1] - k[lo];
        d[lo] = (-3.0 * g[lo] + 4.0 * g[lo + 1] - g[lo + 2]) / (2.0 * h);
        let h = k[hi - 1] - k[hi - 2];
        d[hi - 1] = (3.0 * g[hi - 1] - 4.0 * g[hi - 2] + g[hi - 3]) / (2.0 * h);
    }
    d
}

pub fn to_complex(h: &[f64]) -> Vec<Complex64> {
    h.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn orthonormalize(mut states: Vec<Vec<f64>>, dx: f64) -> Result<Vec<Vec<f64>>> {
    for i in 0..states.len() {
        for j in 0..i {
            let c = grid::inner(&states[i], &states[j], dx);
            let prev = states[j].clone();
            states[i].iter_mut().zip(&prev).for_each(|(a, b)| *a -= c * b);
        }
        let n = grid::l2_norm(&states[i], dx);
        if !(n > 1e-12) {
            return Err(KgError::InvalidParameter("degenerate bound state".into()));
        }
        states[i].iter_mut().for_each(|v| *v /= n);
    }
    Ok(states)
}

/// Remove the ground-state component from a position/velocity pair.
///
/// Inputs must be even; the odd translation mode is then absent by parity, which is
/// asserted rather than projected out.
pub fn project_continuous(
    h: &[f64],
    h_t: &[f64],
    modes: &ModeBasis,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dx = modes.grid.dx();
    let mut out = Vec::with_capacity(2);
    for v in [h, h_t] {
        let scale = grid::sup_norm(v).max(1.0);
        if grid::odd_part_sup(v) > 1e-8 * scale {
            return Err(KgError::Constraint("input is not even".into()));
        }
        let tr = grid::inner(v, &modes.translation, dx).abs();
        if tr > 1e-8 * scale {
            return Err(KgError::Constraint(format!("translation-mode component {tr:e}")));
        }
        let c = grid::inner(v, &modes.ground_state, dx);
        out.push(v.iter().zip(&modes.ground_state).map(|(a, r)| a - c * r).collect::<Vec<f64>>());
    }
    let ht = out.pop().unwrap_or_default();
    let h = out.pop().unwrap_or_default();
    Ok((h, ht))
}
