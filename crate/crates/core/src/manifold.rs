//! Well-prepared initial data and the shooting method for the stable manifold.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dft::{japanese, DistortedBasis};
use crate::dynamics::{
    drive, DynamicsModel, EvolveOptions, FieldState, FullStepper, Stepper, Termination,
    TrackingOptions, Trajectory,
};
use crate::error::{KgError, Result};
use crate::grid::{self, GridSpec};
use crate::soliton::ModeBasis;

/// Fraction of `epsilon0` allowed for the data norms.
pub const BUDGET_FRACTION: f64 = 0.1;
/// `|a_+|` beyond which a trajectory is classified as escaping.
pub const GROWTH_THRESHOLD: f64 = 0.5;

/// Norms entering the smallness condition on the data.
#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct Budget {
    pub b: f64,
    /// `||(sqrt(H+1) zeta1, zeta2)||_{H^2}`.
    pub sobolev: f64,
    /// `||<x> (sqrt(H+1) zeta1, zeta2)||_{L^2}`.
    pub weighted: f64,
    pub total: f64,
    pub limit: f64,
}

/// Data `gamma = (b rho + zeta1, -Omega b rho + zeta2)` with `zeta_j` orthogonal to `rho`.
#[derive(Debug, Clone)]
pub struct DataSpec {
    pub b: f64,
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
    pub epsilon0: f64,
    pub budget: Budget,
}

fn h2_norm(f: &[f64], dx: f64) -> f64 {
    let d1 = grid::derivative(f, dx);
    let d2 = grid::derivative(&d1, dx);
    (grid::inner(f, f, dx) + grid::inner(&d1, &d1, dx) + grid::inner(&d2, &d2, dx)).sqrt()
}

fn weighted_norm(f: &[f64], grid: &GridSpec) -> f64 {
    let w: Vec<f64> = f.iter().enumerate().map(|(i, v)| v * japanese(grid.x(i))).collect();
    grid::l2_norm(&w, grid.dx())
}

impl DataSpec {
    /// Validates orthogonality and computes the budget norms; `basis` is needed only
    /// when the `zeta` components are nonzero.
    pub fn new(
        b: f64,
        zeta1: Vec<f64>,
        zeta2: Vec<f64>,
        epsilon0: f64,
        modes: &ModeBasis,
        basis: Option<&DistortedBasis>,
    ) -> Result<Self> {
        let g = modes.grid;
        let dx = g.dx();
        if zeta1.len() != g.len() || zeta2.len() != g.len() {
            return Err(KgError::InvalidParameter("zeta arrays do not match the grid".into()));
        }
        for (name, z) in [("zeta1", &zeta1), ("zeta2", &zeta2)] {
            let c = grid::inner(z, &modes.ground_state, dx).abs();
            if c >= 1e-8 {
                return Err(KgError::Constraint(format!("<rho, {name}> = {c:e}")));
            }
            if grid::odd_part_sup(z) > 1e-8 * grid::sup_norm(z).max(1.0) {
                return Err(KgError::Constraint(format!("{name} is not even")));
            }
        }
        let zero = grid::sup_norm(&zeta1) == 0.0 && grid::sup_norm(&zeta2) == 0.0;
        let (sobolev, weighted) = if zero {
            (0.0, 0.0)
        } else {
            let basis = basis.ok_or_else(|| {
                KgError::InvalidParameter("a distorted basis is needed for nonzero zeta".into())
            })?;
            let bz = basis.apply_real_multiplier(japanese, &zeta1);
            (
                h2_norm(&bz, dx).hypot(h2_norm(&zeta2, dx)),
                weighted_norm(&bz, &g).hypot(weighted_norm(&zeta2, &g)),
            )
        };
        let total = b.abs() + sobolev + weighted;
        let budget = Budget { b: b.abs(), sobolev, weighted, total, limit: BUDGET_FRACTION * epsilon0 };
        Ok(Self { b, zeta1, zeta2, epsilon0, budget })
    }

    pub fn zero(modes: &ModeBasis, epsilon0: f64) -> Self {
        let n = modes.grid.len();
        Self::new(0.0, vec![0.0; n], vec![0.0; n], epsilon0, modes, None).expect("zero data is valid")
    }

    pub fn pure_unstable_free(b: f64, modes: &ModeBasis, epsilon0: f64) -> Self {
        let n = modes.grid.len();
        Self::new(b, vec![0.0; n], vec![0.0; n], epsilon0, modes, None).expect("valid data")
    }

    pub fn within_budget(&self) -> bool {
        self.budget.total <= self.budget.limit
    }

    /// `||gamma||_{H^1 x L^2}`.
    pub fn gamma_norm(&self, modes: &ModeBasis) -> f64 {
        let dx = modes.grid.dx();
        let g1: Vec<f64> =
            modes.ground_state.iter().zip(&self.zeta1).map(|(r, z)| self.b * r + z).collect();
        let g2: Vec<f64> = modes
            .ground_state
            .iter()
            .zip(&self.zeta2)
            .map(|(r, z)| -modes.omega * self.b * r + z)
            .collect();
        let d1 = grid::derivative(&g1, dx);
        (grid::inner(&g1, &g1, dx) + grid::inner(&d1, &d1, dx) + grid::inner(&g2, &g2, dx)).sqrt()
    }
}

/// `(u0, u1) = (Q + a0 rho + zeta1, a1 rho + zeta2)` with `a0 = b + s`, `a1 = Omega (s - b)`.
pub fn prepare_data(spec: &DataSpec, s: f64, modes: &ModeBasis) -> Result<FieldState> {
    if !spec.within_budget() {
        return Err(KgError::Budget(format!(
            "data norms {:.3e} exceed {:.3e} = {} * epsilon0",
            spec.budget.total, spec.budget.limit, BUDGET_FRACTION
        )));
    }
    Ok(prepare_unchecked(spec, s, modes))
}

fn prepare_unchecked(spec: &DataSpec, s: f64, modes: &ModeBasis) -> FieldState {
    let a0 = spec.b + s;
    let a1 = modes.omega * (s - spec.b);
    let rho = &modes.ground_state;
    FieldState {
        t: 0.0,
        u: (0..rho.len()).map(|i| modes.profile[i] + a0 * rho[i] + spec.zeta1[i]).collect(),
        ut: (0..rho.len()).map(|i| a1 * rho[i] + spec.zeta2[i]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EscapeSide {
    GrowPlus,
    GrowMinus,
    Undetermined,
}

/// Sign of `a_+` once it exceeded the growth threshold, if it did.
pub fn classify_escape(traj: &Trajectory) -> EscapeSide {
    classify_with(traj, GROWTH_THRESHOLD)
}

fn classify_with(traj: &Trajectory, threshold: f64) -> EscapeSide {
    let side = |x: f64| if x > 0.0 { EscapeSide::GrowPlus } else { EscapeSide::GrowMinus };
    match traj.termination {
        Termination::Escape { a_plus, .. } | Termination::BlowUp { a_plus, .. } => side(a_plus),
        Termination::Horizon => traj
            .samples
            .iter()
            .find(|s| s.a_plus.abs() > threshold)
            .map_or(EscapeSide::Undetermined, |s| side(s.a_plus)),
    }
}

/// Truncated stability functional of a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityResidual {
    pub value: f64,
    /// Time at which the functional was truncated.
    pub truncated_at: f64,
    /// `e^{-Omega t_stop} sup|F|`.
    pub truncation_error: f64,
}

/// `a_dot(0) + Omega a(0) + int_0^T e^{-Omega s} F[v](s) ds`, evaluated with the
/// scheme's effective rate so that it vanishes exactly on the discrete stable manifold,
/// and truncated where the solution leaves the linear regime.
pub fn stability_residual(traj: &Trajectory) -> StabilityResidual {
    let t0 = traj.samples.first().map_or(0.0, |s| s.t);
    let t_stop = traj.linear_exit.unwrap_or_else(|| traj.final_sample().t);
    StabilityResidual {
        value: traj.stability_at_exit,
        truncated_at: t_stop,
        truncation_error: (-traj.omega * (t_stop - t0)).exp() * traj.forcing_sup,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BracketStep {
    pub s: f64,
    pub side: EscapeSide,
    /// Bracket after this evaluation.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootOptions {
    pub horizon: f64,
    pub tol: f64,
    /// Half width of the initial bracket; defaults to `||gamma||`.
    pub s_max: Option<f64>,
    pub dt: f64,
    /// Evaluations per bisection round, run in parallel.
    pub fan_out: usize,
    pub tracking: TrackingOptions,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            horizon: 60.0,
            tol: 1e-12,
            s_max: None,
            dt: 0.04,
            fan_out: 1,
            tracking: TrackingOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShootResult {
    pub s_star: f64,
    pub bracket_history: Vec<BracketStep>,
    pub horizon: f64,
    /// Stability functional of the untracked run at `s_star`.
    pub residual: StabilityResidual,
    /// Untracked run at `s_star` (escapes once roundoff has grown).
    pub probe: Trajectory,
    /// Tracked run at `s_star` up to the horizon.
    pub trajectory: Trajectory,
    pub monotone: bool,
    pub final_width: f64,
}

/// Radius that keeps Dirichlet truncation outside the light cone of the core.
fn probe_radius(horizon: f64, grid: &GridSpec) -> f64 {
    (horizon + 25.0).min(grid.half_width())
}

fn escape_run(
    model: &Arc<DynamicsModel>,
    state: &FieldState,
    opts: &ShootOptions,
) -> Result<Trajectory> {
    let mut ev = EvolveOptions::new(opts.dt, opts.horizon);
    ev.sample_stride = 25;
    ev.escape_threshold = Some(GROWTH_THRESHOLD);
    ev.window = Some(probe_radius(opts.horizon, &model.grid));
    drive(FullStepper::new(Arc::clone(model), state, opts.dt, true)?, &ev)
}

/// Bisection on the unstable coefficient `s` for data on the stable manifold.
pub fn shoot_stable(spec: &DataSpec, model: &Arc<DynamicsModel>, opts: &ShootOptions) -> Result<ShootResult> {
    let modes = model.mode_basis();
    if !spec.within_budget() {
        return Err(KgError::Budget(format!(
            "data norms {:.3e} exceed {:.3e}",
            spec.budget.total, spec.budget.limit
        )));
    }
    let s_max = opts.s_max.unwrap_or_else(|| spec.gamma_norm(&modes)).max(1e-6);
    let classify = |s: f64| -> Result<EscapeSide> {
        let st = prepare_unchecked(spec, s, &modes);
        Ok(classify_escape(&escape_run(model, &st, opts)?))
    };
    let ends: Vec<EscapeSide> =
        [-s_max, s_max].par_iter().map(|&s| classify(s)).collect::<Result<_>>()?;
    let mut history = vec![
        BracketStep { s: -s_max, side: ends[0], lo: -s_max, hi: s_max },
        BracketStep { s: s_max, side: ends[1], lo: -s_max, hi: s_max },
    ];
    let (side_lo, side_hi) = (ends[0], ends[1]);
    if side_lo == side_hi || side_lo == EscapeSide::Undetermined || side_hi == EscapeSide::Undetermined {
        return Err(KgError::Bracket(format!(
            "s = -{s_max:e} gives {side_lo:?} and s = +{s_max:e} gives {side_hi:?}"
        )));
    }
    let (mut lo, mut hi) = (-s_max, s_max);
    let fan = opts.fan_out.max(1);
    while hi - lo > opts.tol {
        let pts: Vec<f64> =
            (1..=fan).map(|j| lo + (hi - lo) * j as f64 / (fan + 1) as f64).collect();
        let sides: Vec<EscapeSide> = pts.par_iter().map(|&s| classify(s)).collect::<Result<_>>()?;
        let (mut new_lo, mut new_hi) = (lo, hi);
        let mut settled = false;
        for (&s, &side) in pts.iter().zip(&sides) {
            if side == EscapeSide::Undetermined {
                new_lo = s;
                new_hi = s;
                settled = true;
                break;
            }
            if side == side_lo {
                new_lo = s;
            }
        }
        if !settled {
            new_hi = pts.iter().zip(&sides).find(|(_, &sd)| sd == side_hi).map_or(hi, |(s, _)| *s);
        }
        if new_hi - new_lo >= hi - lo {
            break;
        }
        lo = new_lo;
        hi = new_hi;
        for (&s, &side) in pts.iter().zip(&sides) {
            history.push(BracketStep { s, side, lo, hi });
        }
        if settled {
            break;
        }
    }
    let s_star = 0.5 * (lo + hi);
    let monotone = {
        let lows = history.iter().filter(|h| h.side == side_lo).map(|h| h.s).fold(f64::MIN, f64::max);
        let highs = history.iter().filter(|h| h.side == side_hi).map(|h| h.s).fold(f64::MAX, f64::min);
        if side_lo == EscapeSide::GrowMinus { lows < highs } else { highs < lows }
    };
    let st = prepare_unchecked(spec, s_star, &modes);
    let probe = escape_run(model, &st, opts)?;
    let residual = stability_residual(&probe);
    let mut ev = EvolveOptions::new(opts.dt, opts.horizon);
    ev.tracking = Some(opts.tracking);
    ev.window = Some(probe_radius(opts.horizon, &model.grid));
    let trajectory = drive(FullStepper::new(Arc::clone(model), &st, opts.dt, true)?, &ev)?;
    Ok(ShootResult {
        s_star,
        bracket_history: history,
        horizon: opts.horizon,
        residual,
        probe,
        trajectory,
        monotone,
        final_width: hi - lo,
    })
}

/// Correction `delta` along `(rho, Omega rho)` that puts the current state of `stepper`
/// back on the stable manifold, located by bisection on short windowed probes.
pub fn stabilizing_kick<S: Stepper>(stepper: &S, track: &TrackingOptions) -> Result<f64> {
    let model = Arc::clone(stepper.model());
    let radius = probe_radius(track.probe_horizon, &model.grid);
    let base = stepper.restrict(radius);
    let (a, ad) = base.modes();
    let a_plus = 0.5 * (a + ad / model.omega());
    let threshold = track.probe_threshold.max(20.0 * (a.abs() + a_plus.abs()));
    let mut ev = EvolveOptions::new(stepper.dt(), track.probe_horizon);
    ev.sample_stride = usize::MAX;
    ev.escape_threshold = Some(threshold);
    let probe = |delta: f64| -> Result<EscapeSide> {
        let mut s = base.clone();
        if delta != 0.0 {
            s.kick(delta);
        }
        Ok(classify_with(&drive(s, &ev)?, threshold))
    };
    let center = probe(0.0)?;
    if center == EscapeSide::Undetermined {
        return Ok(0.0);
    }
    // The correction opposes the escape direction.
    let sign = if center == EscapeSide::GrowPlus { -1.0 } else { 1.0 };
    let mut far = sign * track.bracket;
    let mut grew = 0;
    loop {
        match probe(far)? {
            EscapeSide::Undetermined => return Ok(far),
            side if side != center => break,
            _ => {
                grew += 1;
                if grew > 12 {
                    return Err(KgError::Bracket(format!(
                        "tracking correction not bracketed at t = {}",
                        stepper.time()
                    )));
                }
                far *= 10.0;
            }
        }
    }
    let (mut near, mut far) = (0.0_f64, far);
    while (far - near).abs() > track.tol {
        let mid = 0.5 * (near + far);
        if mid == near || mid == far {
            break;
        }
        match probe(mid)? {
            EscapeSide::Undetermined => return Ok(mid),
            side if side == center => near = mid,
            _ => far = mid,
        }
    }
    Ok(0.5 * (near + far))
}

/// Tracked evolution of the data at `s` to `opts.horizon`.
pub fn evolve_on_manifold(
    spec: &DataSpec,
    s: f64,
    model: &Arc<DynamicsModel>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let modes = model.mode_basis();
    let st = prepare_data(spec, s, &modes)?;
    crate::dynamics::evolve_full(&st, model, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{build_soliton, DiscreteSoliton};

    fn model() -> Arc<DynamicsModel> {
        let m = build_soliton(1.5, GridSpec::from_spacing(40.0, 0.02).unwrap()).unwrap();
        let g = GridSpec::from_spacing(40.0, 0.05).unwrap();
        DynamicsModel::new(DiscreteSoliton::new(&m, g).unwrap())
    }

    #[test]
    fn prepare_pure_stable_direction() {
        let m = model();
        let modes = m.mode_basis();
        let spec = DataSpec::pure_unstable_free(0.01, &modes, 1.0);
        let st = prepare_data(&spec, 0.0, &modes).unwrap();
        let ms = crate::dynamics::mode_extract(&st, &modes).unwrap();
        assert!((ms.a - 0.01).abs() < 1e-14);
        assert!((ms.adot + 0.01 * modes.omega).abs() < 1e-14);
    }

    #[test]
    fn budget_violation_is_reported() {
        let m = model();
        let modes = m.mode_basis();
        let spec = DataSpec::pure_unstable_free(0.01, &modes, 0.05);
        assert!(matches!(prepare_data(&spec, 0.0, &modes), Err(KgError::Budget(_))));
    }

    #[test]
    fn escape_sides_follow_unstable_loading() {
        let m = model();
        let modes = m.mode_basis();
        let spec = DataSpec::zero(&modes, 1.0);
        let opts = ShootOptions { horizon: 20.0, ..Default::default() };
        for (s, want) in [(0.1, EscapeSide::GrowPlus), (-0.1, EscapeSide::GrowMinus)] {
            let st = prepare_data(&spec, s, &modes).unwrap();
            assert_eq!(classify_escape(&escape_run(&m, &st, &opts).unwrap()), want);
        }
        let st = prepare_data(&spec, 0.0, &modes).unwrap();
        let short = ShootOptions { horizon: 5.0, ..Default::default() };
        assert_eq!(classify_escape(&escape_run(&m, &st, &short).unwrap()), EscapeSide::Undetermined);
    }
}
