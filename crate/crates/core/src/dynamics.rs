//! Time evolution of even perturbations of the soliton: a full-field Stormer-Verlet
//! solver and a mode-decomposed solver sharing one discretization.

use std::ops::Range;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{KgError, Result};
use crate::grid::{self, GridSpec};
use crate::soliton::{power_nonlinearity, DiscreteSoliton, ModeBasis};

/// Node radius beyond which the ground state is below double precision.
const CORE_RADIUS: f64 = 25.0;

/// Discrete linearization around the Newton-refined soliton. All solvers evolve the
/// perturbation `v = u - Q_h`, which keeps roundoff at the size of `v`, not of `Q`.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    pub soliton: DiscreteSoliton,
    pub grid: GridSpec,
    pub alpha: f64,
    /// `f'(Q_h)`.
    linear: Vec<f64>,
    quadratic: Vec<f64>,
    cubic: Vec<f64>,
    core: Range<usize>,
}

impl DynamicsModel {
    pub fn new(soliton: DiscreteSoliton) -> Arc<Self> {
        let grid = soliton.grid;
        let alpha = soliton.alpha;
        let q = &soliton.profile;
        let p = 2.0 * alpha;
        let linear = q.iter().map(|&u| (p + 1.0) * u.abs().powf(p)).collect();
        let quadratic = q.iter().map(|&u| 6.0 * u * u).collect();
        let cubic = q.iter().map(|&u| 4.0 * u).collect();
        let core = grid.core_range(CORE_RADIUS);
        Arc::new(Self { soliton, grid, alpha, linear, quadratic, cubic, core })
    }

    pub fn omega(&self) -> f64 {
        self.soliton.omega
    }

    pub fn ground_state(&self) -> &[f64] {
        &self.soliton.ground_state
    }

    pub fn profile(&self) -> &[f64] {
        &self.soliton.profile
    }

    pub fn mode_basis(&self) -> ModeBasis {
        self.soliton.mode_basis()
    }

    /// Nonlinear remainder `f(Q + v) - f(Q) - f'(Q) v` at global node `g`.
    #[inline]
    fn remainder(&self, g: usize, v: f64) -> f64 {
        if self.alpha == 1.5 {
            v * v * (self.quadratic[g] + v * (self.cubic[g] + v))
        } else {
            let q = self.soliton.profile[g];
            power_nonlinearity(q + v, self.alpha)
                - power_nonlinearity(q, self.alpha)
                - self.linear[g] * v
        }
    }

    /// Effective growth rate of the Verlet recursion `a_{n+1} - 2a_n + a_{n-1} = dt^2 Omega^2 a_n`.
    pub fn discrete_rate(&self, dt: f64) -> f64 {
        let w = self.omega() * dt;
        (1.0 + 0.5 * w * w).acosh() / dt
    }
}

/// Position and velocity of the full field on the model grid.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

impl FieldState {
    pub fn asymmetry(&self) -> f64 {
        grid::odd_part_sup(&self.u).max(grid::odd_part_sup(&self.ut))
    }
}

/// `u = Q + a rho + chi` with `chi` orthogonal to `rho`.
#[derive(Debug, Clone)]
pub struct ModalState {
    pub t: f64,
    pub a: f64,
    pub adot: f64,
    pub chi: Vec<f64>,
    pub chit: Vec<f64>,
}

/// `H(u, u_t) = int u_t^2/2 + (D_+ u)^2/2 + u^2/2 - F(u)` with `F' = f`; uses the forward
/// difference so that it is conserved by the semi-discrete flow.
pub fn hamiltonian(state: &FieldState, grid: &GridSpec, alpha: f64) -> f64 {
    let dx = grid.dx();
    let n = state.u.len();
    let p = 2.0 * alpha + 2.0;
    let mut h = 0.0;
    for i in 0..n {
        let u = state.u[i];
        let du = if i + 1 < n { (state.u[i + 1] - u) / dx } else { -u / dx };
        let pot = if alpha == 1.5 { u * u * u * u * u / 5.0 } else { u.abs().powf(p) / p };
        h += 0.5 * state.ut[i] * state.ut[i] + 0.5 * du * du + 0.5 * u * u - pot;
    }
    let du0 = state.u[0] / dx;
    (h + 0.5 * du0 * du0) * dx
}

/// `a = <u - Q, rho>`, `chi = u - Q - a rho`, and likewise for the velocity.
pub fn mode_extract(state: &FieldState, modes: &ModeBasis) -> Result<ModalState> {
    let scale = grid::sup_norm(&state.u).max(1.0);
    if state.asymmetry() > 1e-8 * scale {
        return Err(KgError::Constraint("state is not even".into()));
    }
    let dx = modes.grid.dx();
    let v: Vec<f64> = state.u.iter().zip(&modes.profile).map(|(u, q)| u - q).collect();
    let a = grid::inner(&v, &modes.ground_state, dx);
    let adot = grid::inner(&state.ut, &modes.ground_state, dx);
    let chi = v.iter().zip(&modes.ground_state).map(|(v, r)| v - a * r).collect();
    let chit = state.ut.iter().zip(&modes.ground_state).map(|(v, r)| v - adot * r).collect();
    Ok(ModalState { t: state.t, a, adot, chi, chit })
}

/// One explicit scheme advancing an even perturbation of the soliton.
pub trait Stepper: Clone + Send + Sync {
    fn model(&self) -> &Arc<DynamicsModel>;
    fn time(&self) -> f64;
    fn dt(&self) -> f64;
    fn step(&mut self);
    /// `(a, a_dot)`.
    fn modes(&self) -> (f64, f64);
    /// `F[v] = <N(v), rho>` at the current state.
    fn forcing(&self) -> f64;
    /// Shift the state by `delta` along the unstable direction `(rho, Omega rho)`.
    fn kick(&mut self, delta: f64);
    /// Largest `|u|` on the soliton core.
    fn core_sup(&self) -> f64;
    /// Continuous part and its velocity on the stepper's window.
    fn continuous_part(&self) -> (Vec<f64>, Vec<f64>);
    /// Nonlinear remainder `N(v)` on the window.
    fn nonlinearity(&self) -> Vec<f64>;
    fn energy(&self) -> f64;
    /// Copy restricted to `|x| <= radius` (Dirichlet outside).
    fn restrict(&self, radius: f64) -> Self;
    /// Global grid index of the first window node.
    fn offset(&self) -> usize;
    fn len(&self) -> usize;
}

fn dot_core(model: &DynamicsModel, lo: usize, len: usize, v: &[f64]) -> f64 {
    let rho = model.ground_state();
    let start = model.core.start.max(lo);
    let end = model.core.end.min(lo + len);
    let mut s = 0.0;
    for g in start..end {
        s += v[g - lo] * rho[g];
    }
    s * model.grid.dx()
}

/// Full-field velocity Verlet on `v = u - Q_h`.
#[derive(Debug, Clone)]
pub struct FullStepper {
    model: Arc<DynamicsModel>,
    lo: usize,
    v: Vec<f64>,
    vt: Vec<f64>,
    acc: Vec<f64>,
    t: f64,
    dt: f64,
    nonlinear: bool,
}

impl FullStepper {
    pub fn new(model: Arc<DynamicsModel>, state: &FieldState, dt: f64, nonlinear: bool) -> Result<Self> {
        let n = model.grid.len();
        if state.u.len() != n || state.ut.len() != n {
            return Err(KgError::InvalidParameter("state does not match the model grid".into()));
        }
        let v = state.u.iter().zip(model.profile()).map(|(u, q)| u - q).collect();
        let mut s = Self {
            model,
            lo: 0,
            v,
            vt: state.ut.clone(),
            acc: vec![0.0; n],
            t: state.t,
            dt,
            nonlinear,
        };
        s.update_acc();
        Ok(s)
    }

    fn update_acc(&mut self) {
        let m = &*self.model;
        let inv = 1.0 / (m.grid.dx() * m.grid.dx());
        let n = self.v.len();
        let v = &self.v;
        for i in 0..n {
            let g = self.lo + i;
            let l = if i > 0 { v[i - 1] } else { 0.0 };
            let r = if i + 1 < n { v[i + 1] } else { 0.0 };
            let mut a = (l - 2.0 * v[i] + r) * inv - v[i] + m.linear[g] * v[i];
            if self.nonlinear {
                a += m.remainder(g, v[i]);
            }
            self.acc[i] = a;
        }
    }

    pub fn field_state(&self) -> FieldState {
        let q = &self.model.profile()[self.lo..self.lo + self.v.len()];
        FieldState {
            t: self.t,
            u: self.v.iter().zip(q).map(|(v, q)| v + q).collect(),
            ut: self.vt.clone(),
        }
    }
}

impl Stepper for FullStepper {
    fn model(&self) -> &Arc<DynamicsModel> {
        &self.model
    }
    fn time(&self) -> f64 {
        self.t
    }
    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self) {
        let h = 0.5 * self.dt;
        for i in 0..self.v.len() {
            self.vt[i] += h * self.acc[i];
            self.v[i] += self.dt * self.vt[i];
        }
        self.update_acc();
        for i in 0..self.v.len() {
            self.vt[i] += h * self.acc[i];
        }
        self.t += self.dt;
    }

    fn modes(&self) -> (f64, f64) {
        let n = self.v.len();
        (dot_core(&self.model, self.lo, n, &self.v), dot_core(&self.model, self.lo, n, &self.vt))
    }

    fn forcing(&self) -> f64 {
        if !self.nonlinear {
            return 0.0;
        }
        let m = &*self.model;
        let rho = m.ground_state();
        let start = m.core.start.max(self.lo);
        let end = m.core.end.min(self.lo + self.v.len());
        let mut s = 0.0;
        for g in start..end {
            s += m.remainder(g, self.v[g - self.lo]) * rho[g];
        }
        s * m.grid.dx()
    }

    fn kick(&mut self, delta: f64) {
        let omega = self.model.omega();
        let rho = &self.model.soliton.ground_state[self.lo..self.lo + self.v.len()];
        for (i, r) in rho.iter().enumerate() {
            self.v[i] += delta * r;
            self.vt[i] += omega * delta * r;
        }
        self.update_acc();
    }

    fn core_sup(&self) -> f64 {
        let m = &*self.model;
        let start = m.core.start.max(self.lo);
        let end = m.core.end.min(self.lo + self.v.len());
        (start..end)
            .map(|g| (self.v[g - self.lo] + m.profile()[g]).abs())
            .fold(0.0, f64::max)
    }

    fn continuous_part(&self) -> (Vec<f64>, Vec<f64>) {
        let (a, ad) = self.modes();
        let rho = &self.model.ground_state()[self.lo..self.lo + self.v.len()];
        (
            self.v.iter().zip(rho).map(|(v, r)| v - a * r).collect(),
            self.vt.iter().zip(rho).map(|(v, r)| v - ad * r).collect(),
        )
    }

    fn nonlinearity(&self) -> Vec<f64> {
        (0..self.v.len()).map(|i| self.model.remainder(self.lo + i, self.v[i])).collect()
    }

    fn energy(&self) -> f64 {
        let fs = self.field_state();
        let g = GridSpec::new(self.model.grid.dx() * (self.v.len() / 2) as f64, self.v.len())
            .expect("window grid");
        hamiltonian(&fs, &g, self.model.alpha)
    }

    fn restrict(&self, radius: f64) -> Self {
        let r = self.model.grid.core_range(radius);
        let lo = r.start.max(self.lo);
        let hi = r.end.min(self.lo + self.v.len());
        let mut s = Self {
            model: Arc::clone(&self.model),
            lo,
            v: self.v[lo - self.lo..hi - self.lo].to_vec(),
            vt: self.vt[lo - self.lo..hi - self.lo].to_vec(),
            acc: vec![0.0; hi - lo],
            t: self.t,
            dt: self.dt,
            nonlinear: self.nonlinear,
        };
        s.update_acc();
        s
    }

    fn offset(&self) -> usize {
        self.lo
    }
    fn len(&self) -> usize {
        self.v.len()
    }
}

/// Verlet step of `a'' = Omega^2 a + F[v]` coupled to `chi'' = -L chi + P_c N(v)`.
#[derive(Debug, Clone)]
pub struct ModalStepper {
    model: Arc<DynamicsModel>,
    lo: usize,
    a: f64,
    adot: f64,
    chi: Vec<f64>,
    chit: Vec<f64>,
    acc_a: f64,
    acc_chi: Vec<f64>,
    t: f64,
    dt: f64,
    nonlinear: bool,
}

impl ModalStepper {
    pub fn new(model: Arc<DynamicsModel>, state: &ModalState, dt: f64, nonlinear: bool) -> Result<Self> {
        let n = model.grid.len();
        if state.chi.len() != n || state.chit.len() != n {
            return Err(KgError::InvalidParameter("state does not match the model grid".into()));
        }
        let dx = model.grid.dx();
        let tol = 1e-8;
        for c in [&state.chi, &state.chit] {
            let d = grid::inner(c, model.ground_state(), dx).abs();
            if d > tol {
                return Err(KgError::Constraint(format!("continuous part has rho component {d:e}")));
            }
        }
        let mut s = Self {
            model,
            lo: 0,
            a: state.a,
            adot: state.adot,
            chi: state.chi.clone(),
            chit: state.chit.clone(),
            acc_a: 0.0,
            acc_chi: vec![0.0; n],
            t: state.t,
            dt,
            nonlinear,
        };
        s.update_acc();
        Ok(s)
    }

    fn rho(&self) -> &[f64] {
        &self.model.soliton.ground_state[self.lo..self.lo + self.chi.len()]
    }

    fn remainder_field(&self) -> Vec<f64> {
        let rho = self.rho();
        (0..self.chi.len())
            .map(|i| self.model.remainder(self.lo + i, self.a * rho[i] + self.chi[i]))
            .collect()
    }

    fn update_acc(&mut self) {
        let m = Arc::clone(&self.model);
        let inv = 1.0 / (m.grid.dx() * m.grid.dx());
        let n = self.chi.len();
        let nl = if self.nonlinear { self.remainder_field() } else { vec![0.0; n] };
        let f = dot_core(&m, self.lo, n, &nl);
        self.acc_a = m.omega() * m.omega() * self.a + f;
        let rho = &m.soliton.ground_state[self.lo..self.lo + n];
        let c = &self.chi;
        for i in 0..n {
            let l = if i > 0 { c[i - 1] } else { 0.0 };
            let r = if i + 1 < n { c[i + 1] } else { 0.0 };
            self.acc_chi[i] = (l - 2.0 * c[i] + r) * inv - c[i] + m.linear[self.lo + i] * c[i]
                + nl[i]
                - f * rho[i];
        }
    }

    fn reproject(&mut self) {
        let n = self.chi.len();
        let ca = dot_core(&self.model, self.lo, n, &self.chi);
        let cb = dot_core(&self.model, self.lo, n, &self.chit);
        let rho = self.model.soliton.ground_state[self.lo..self.lo + n].to_vec();
        for i in 0..n {
            self.chi[i] -= ca * rho[i];
            self.chit[i] -= cb * rho[i];
        }
    }

    pub fn modal_state(&self) -> ModalState {
        ModalState {
            t: self.t,
            a: self.a,
            adot: self.adot,
            chi: self.chi.clone(),
            chit: self.chit.clone(),
        }
    }
}

impl Stepper for ModalStepper {
    fn model(&self) -> &Arc<DynamicsModel> {
        &self.model
    }
    fn time(&self) -> f64 {
        self.t
    }
    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self) {
        let h = 0.5 * self.dt;
        self.adot += h * self.acc_a;
        self.a += self.dt * self.adot;
        for i in 0..self.chi.len() {
            self.chit[i] += h * self.acc_chi[i];
            self.chi[i] += self.dt * self.chit[i];
        }
        self.reproject();
        self.update_acc();
        self.adot += h * self.acc_a;
        for i in 0..self.chi.len() {
            self.chit[i] += h * self.acc_chi[i];
        }
        self.reproject();
        self.t += self.dt;
    }

    fn modes(&self) -> (f64, f64) {
        (self.a, self.adot)
    }

    fn forcing(&self) -> f64 {
        if !self.nonlinear {
            return 0.0;
        }
        dot_core(&self.model, self.lo, self.chi.len(), &self.remainder_field())
    }

    fn kick(&mut self, delta: f64) {
        self.a += delta;
        self.adot += self.model.omega() * delta;
        self.update_acc();
    }

    fn core_sup(&self) -> f64 {
        let m = &*self.model;
        let start = m.core.start.max(self.lo);
        let end = m.core.end.min(self.lo + self.chi.len());
        let rho = m.ground_state();
        (start..end)
            .map(|g| (m.profile()[g] + self.a * rho[g] + self.chi[g - self.lo]).abs())
            .fold(0.0, f64::max)
    }

    fn continuous_part(&self) -> (Vec<f64>, Vec<f64>) {
        (self.chi.clone(), self.chit.clone())
    }

    fn nonlinearity(&self) -> Vec<f64> {
        self.remainder_field()
    }

    fn energy(&self) -> f64 {
        let rho = self.rho();
        let q = &self.model.profile()[self.lo..self.lo + self.chi.len()];
        let fs = FieldState {
            t: self.t,
            u: (0..self.chi.len()).map(|i| q[i] + self.a * rho[i] + self.chi[i]).collect(),
            ut: (0..self.chi.len()).map(|i| self.adot * rho[i] + self.chit[i]).collect(),
        };
        let g = GridSpec::new(self.model.grid.dx() * (self.chi.len() / 2) as f64, self.chi.len())
            .expect("window grid");
        hamiltonian(&fs, &g, self.model.alpha)
    }

    fn restrict(&self, radius: f64) -> Self {
        let r = self.model.grid.core_range(radius);
        let lo = r.start.max(self.lo);
        let hi = r.end.min(self.lo + self.chi.len());
        let mut s = Self {
            model: Arc::clone(&self.model),
            lo,
            a: self.a,
            adot: self.adot,
            chi: self.chi[lo - self.lo..hi - self.lo].to_vec(),
            chit: self.chit[lo - self.lo..hi - self.lo].to_vec(),
            acc_a: 0.0,
            acc_chi: vec![0.0; hi - lo],
            t: self.t,
            dt: self.dt,
            nonlinear: self.nonlinear,
        };
        s.update_acc();
        s
    }

    fn offset(&self) -> usize {
        self.lo
    }
    fn len(&self) -> usize {
        self.chi.len()
    }
}

/// Manifold tracking: periodically re-impose the stability condition so that roundoff
/// and residual shooting error, which grow like `e^{Omega t}`, never leave the
/// perturbative regime.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrackingOptions {
    /// Time between corrections.
    pub interval: f64,
    /// Horizon of each escape probe.
    pub probe_horizon: f64,
    /// `|a_+|` at which a probe is classified.
    pub probe_threshold: f64,
    /// Initial half width of the correction bracket.
    pub bracket: f64,
    /// Bisection stops at this bracket width.
    pub tol: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self { interval: 2.0, probe_horizon: 20.0, probe_threshold: 1e-3, bracket: 1e-8, tol: 1e-18 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Steps between recorded samples.
    pub sample_stride: usize,
    /// Time between stored snapshots of the continuous part, if any.
    pub snapshot_interval: Option<f64>,
    /// Extra snapshot this long after each regular one, for time differences.
    pub snapshot_pair: Option<f64>,
    /// Stop once `|a_+|` exceeds this value.
    pub escape_threshold: Option<f64>,
    /// Blow-up: `||u||_inf` on the core above this value.
    pub blowup_sup: f64,
    /// Blow-up: `|a|` above this value.
    pub blowup_a: f64,
    pub nonlinear: bool,
    pub tracking: Option<TrackingOptions>,
    /// Radius of the window a run may be restricted to; `None` uses the full grid.
    pub window: Option<f64>,
}

impl EvolveOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            sample_stride: 5,
            snapshot_interval: None,
            snapshot_pair: None,
            escape_threshold: None,
            blowup_sup: 5.0,
            blowup_a: 2.0,
            nonlinear: true,
            tracking: None,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Sample {
    pub t: f64,
    pub a: f64,
    pub adot: f64,
    /// `(a + a_dot / Omega) / 2`.
    pub a_plus: f64,
    pub chi_sup: f64,
    /// `||<x>^{-2} chi||_inf`.
    pub chi_weighted_sup: f64,
    pub energy: f64,
    /// `F[v] = <N(v), rho>`.
    pub forcing: f64,
    /// Running value of the discrete stability functional up to this time.
    pub stability: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub a: f64,
    pub adot: f64,
    /// Continuous part and velocity, on the trajectory's window.
    pub chi: Vec<f64>,
    pub chit: Vec<f64>,
    /// `N(v)` on the same window.
    pub nonlinearity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    Horizon,
    Escape { t: f64, a_plus: f64 },
    BlowUp { t: f64, a_plus: f64 },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    /// `(t, delta)` corrections applied by the manifold tracker.
    pub kicks: Vec<(f64, f64)>,
    pub dt: f64,
    /// Growth rate of the discrete model and of its Verlet recursion.
    pub omega: f64,
    pub discrete_rate: f64,
    /// Grid of the snapshot arrays.
    pub window: GridSpec,
    /// Largest `|F|` over the linear regime of the run, sampled every step.
    pub forcing_sup: f64,
    /// Time of the first step with `|a_+|` above the linear-regime cap, if any.
    pub linear_exit: Option<f64>,
    /// Running stability functional at `linear_exit` (or at the final time).
    pub stability_at_exit: f64,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn escaped(&self) -> bool {
        !matches!(self.termination, Termination::Horizon)
    }
}

/// `|a_+|` above this fraction of the escape threshold ends the linear regime used by
/// the truncated stability functional.
const LINEAR_CAP: f64 = 0.05;

/// Advance `stepper` to the horizon, recording samples, the stability functional and
/// optional snapshots; applies manifold tracking when requested.
pub fn drive<S: Stepper>(mut stepper: S, opts: &EvolveOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.horizon >= 0.0) {
        return Err(KgError::InvalidParameter("dt and horizon must be positive".into()));
    }
    if let Some(r) = opts.window {
        stepper = stepper.restrict(r);
    }
    let model = Arc::clone(stepper.model());
    let dt = opts.dt;
    let omega = model.omega();
    let rate = model.discrete_rate(dt);
    let n_steps = (opts.horizon / dt).round() as usize;
    let stride = opts.sample_stride.max(1);
    let snap_every = opts.snapshot_interval.map(|s| ((s / dt).round() as usize).max(1));
    let pair_steps = opts.snapshot_pair.map(|s| ((s / dt + 1e-9).floor() as usize).max(1));
    let t0 = stepper.time();
    let window = GridSpec::new(model.grid.dx() * (stepper.len() / 2) as f64, stepper.len())?;
    let track_every = opts.tracking.map(|t| ((t.interval / dt).round() as usize).max(1));

    let (a0, ad0) = stepper.modes();
    let f0 = stepper.forcing();
    let mut stability_sum = ad0 + (rate * dt).sinh() / dt * a0 + 0.5 * dt * f0;
    let mut forcing = f0;
    let mut forcing_sup = f0.abs();
    let mut linear_exit = None;
    let mut stability_at_exit = stability_sum;
    let exit_cap = LINEAR_CAP * opts.escape_threshold.unwrap_or(0.5);

    let mut samples = Vec::with_capacity(n_steps / stride + 2);
    let mut snapshots = Vec::new();
    let mut kicks = Vec::new();
    let record = |s: &S, forcing: f64, stability: f64| -> Sample {
        let (a, adot) = s.modes();
        let (chi, _) = s.continuous_part();
        let off = s.offset();
        let mut sup: f64 = 0.0;
        let mut wsup: f64 = 0.0;
        for (i, c) in chi.iter().enumerate() {
            let x = model.grid.x(off + i);
            sup = sup.max(c.abs());
            wsup = wsup.max(c.abs() / (1.0 + x * x));
        }
        Sample {
            t: s.time(),
            a,
            adot,
            a_plus: 0.5 * (a + adot / omega),
            chi_sup: sup,
            chi_weighted_sup: wsup,
            energy: s.energy(),
            forcing,
            stability,
        }
    };
    let snapshot = |s: &S| -> Snapshot {
        let (a, adot) = s.modes();
        let (chi, chit) = s.continuous_part();
        Snapshot { t: s.time(), a, adot, chi, chit, nonlinearity: s.nonlinearity() }
    };
    samples.push(record(&stepper, forcing, stability_sum));
    if snap_every.is_some() {
        snapshots.push(snapshot(&stepper));
    }
    let mut forcing_open = true;

    let mut termination = Termination::Horizon;
    for step in 1..=n_steps {
        stepper.step();
        let (a, ad) = stepper.modes();
        forcing = stepper.forcing();
        if forcing_open {
            forcing_sup = forcing_sup.max(forcing.abs());
        }
        let tj = stepper.time() - t0;
        stability_sum += dt * (-rate * tj).exp() * forcing;
        let a_plus = 0.5 * (a + ad / omega);
        if linear_exit.is_none() {
            if a_plus.abs() > exit_cap {
                linear_exit = Some(stepper.time());
                forcing_open = false;
            } else {
                stability_at_exit = stability_sum;
            }
        }
        let blown = !a.is_finite() || a.abs() > opts.blowup_a || stepper.core_sup() > opts.blowup_sup;
        let escaped = opts.escape_threshold.is_some_and(|th| a_plus.abs() > th);
        if blown || escaped || step == n_steps || step % stride == 0 {
            samples.push(record(&stepper, forcing, stability_sum));
        }
        if let Some(every) = snap_every {
            if step % every == 0 || pair_steps.is_some_and(|p| p < every && step % every == p) {
                snapshots.push(snapshot(&stepper));
            }
        }
        if blown {
            termination = Termination::BlowUp { t: stepper.time(), a_plus };
            break;
        }
        if escaped {
            termination = Termination::Escape { t: stepper.time(), a_plus };
            break;
        }
        if let (Some(track), Some(every)) = (opts.tracking, track_every) {
            if step % every == 0 && step < n_steps {
                let delta = crate::manifold::stabilizing_kick(&stepper, &track)?;
                if delta != 0.0 {
                    stepper.kick(delta);
                    kicks.push((stepper.time(), delta));
                }
            }
        }
    }
    Ok(Trajectory {
        samples,
        snapshots,
        termination,
        kicks,
        dt,
        omega,
        discrete_rate: rate,
        window,
        forcing_sup,
        linear_exit,
        stability_at_exit,
    })
}

fn check_cfl_and_domain(grid: &GridSpec, opts: &EvolveOptions) -> Result<()> {
    if opts.dt > 0.9 * grid.dx() + 1e-15 {
        return Err(KgError::InvalidParameter(format!(
            "dt = {} violates dt <= 0.9 dx = {}",
            opts.dt,
            0.9 * grid.dx()
        )));
    }
    let reach = opts.window.unwrap_or(grid.half_width()).min(grid.half_width());
    if reach < opts.horizon + 10.0 - 1e-9 {
        return Err(KgError::InvalidParameter(format!(
            "domain half width {reach} is below T + 10 = {}",
            opts.horizon + 10.0
        )));
    }
    Ok(())
}

/// Full-field evolution of an even state.
pub fn evolve_full(state0: &FieldState, model: &Arc<DynamicsModel>, opts: &EvolveOptions) -> Result<Trajectory> {
    check_cfl_and_domain(&model.grid, opts)?;
    let scale = grid::sup_norm(&state0.u).max(1.0);
    if state0.asymmetry() > 1e-8 * scale {
        return Err(KgError::Constraint("initial state is not even".into()));
    }
    drive(FullStepper::new(Arc::clone(model), state0, opts.dt, opts.nonlinear)?, opts)
}

/// Mode-decomposed evolution.
pub fn evolve_modal(state0: &ModalState, model: &Arc<DynamicsModel>, opts: &EvolveOptions) -> Result<Trajectory> {
    check_cfl_and_domain(&model.grid, opts)?;
    drive(ModalStepper::new(Arc::clone(model), state0, opts.dt, opts.nonlinear)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::build_soliton;

    fn model(half_width: f64) -> Arc<DynamicsModel> {
        let m = build_soliton(1.5, GridSpec::from_spacing(40.0, 0.02).unwrap()).unwrap();
        let g = GridSpec::from_spacing(half_width, 0.05).unwrap();
        DynamicsModel::new(DiscreteSoliton::new(&m, g).unwrap())
    }

    #[test]
    fn soliton_is_static() {
        let m = model(30.0);
        let s = FieldState { t: 0.0, u: m.profile().to_vec(), ut: vec![0.0; m.grid.len()] };
        let traj = evolve_full(&s, &m, &EvolveOptions::new(0.04, 10.0)).unwrap();
        let last = traj.final_sample();
        assert!(last.a.abs() < 1e-12 && last.chi_sup < 1e-12);
    }

    #[test]
    fn zero_modal_state_stays_zero() {
        let m = model(30.0);
        let n = m.grid.len();
        let s = ModalState { t: 0.0, a: 0.0, adot: 0.0, chi: vec![0.0; n], chit: vec![0.0; n] };
        let traj = evolve_modal(&s, &m, &EvolveOptions::new(0.04, 5.0)).unwrap();
        assert_eq!(traj.final_sample().a, 0.0);
    }

    #[test]
    fn hamiltonian_kinetic_scaling() {
        let g = GridSpec::from_spacing(10.0, 0.05).unwrap();
        let z = vec![0.0; g.len()];
        assert_eq!(hamiltonian(&FieldState { t: 0.0, u: z.clone(), ut: z.clone() }, &g, 1.5), 0.0);
        let ut = g.sample(|x| (-x * x).exp());
        let k1 = hamiltonian(&FieldState { t: 0.0, u: z.clone(), ut: ut.clone() }, &g, 1.5);
        let ut2: Vec<f64> = ut.iter().map(|v| 2.0 * v).collect();
        let k2 = hamiltonian(&FieldState { t: 0.0, u: z, ut: ut2 }, &g, 1.5);
        assert!((k2 - 4.0 * k1).abs() < 1e-14);
    }

    #[test]
    fn cfl_violation_rejected() {
        let m = model(30.0);
        let s = FieldState { t: 0.0, u: m.profile().to_vec(), ut: vec![0.0; m.grid.len()] };
        assert!(evolve_full(&s, &m, &EvolveOptions::new(0.06, 5.0)).is_err());
    }
}
