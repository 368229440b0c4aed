//! Stage driver behind the command line: runs stages in dependency order and writes
//! their artifacts, acceptance gates and a manifest into one output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{self, DecayReport};
use crate::config::{Config, ZetaShape};
use crate::dft::{project_continuous, DistortedBasis};
use crate::dynamics::{DynamicsModel, EvolveOptions, Termination, TrackingOptions, Trajectory};
use crate::error::{KgError, Result};
use crate::grid::{self, GridSpec};
use crate::manifold::{self, DataSpec, ShootOptions, ShootResult, GROWTH_THRESHOLD};
use crate::scattering::{self, Genericity};
use crate::soliton::{self, DiscreteSoliton, SolitonModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Spectrum,
    Scattering,
    DftCheck,
    LinearDecay,
    Shoot,
    Evolve,
    DecayReport,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Spectrum,
        Stage::Scattering,
        Stage::DftCheck,
        Stage::LinearDecay,
        Stage::Shoot,
        Stage::Evolve,
        Stage::DecayReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Scattering => "scattering",
            Stage::DftCheck => "dft-check",
            Stage::LinearDecay => "linear-decay",
            Stage::Shoot => "shoot",
            Stage::Evolve => "evolve",
            Stage::DecayReport => "decay-report",
        }
    }
}

/// One acceptance threshold evaluated on a stage's output.
#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub stage: &'static str,
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
struct StageRecord {
    stage: &'static str,
    wall_seconds: f64,
    files: Vec<String>,
}

/// Number of random inputs in the transform check.
const DFT_SAMPLES: usize = 20;
/// Spacing of the extra snapshot used for time differences of the profile.
const SNAPSHOT_PAIR: f64 = 0.5;

pub struct Pipeline {
    cfg: Config,
    out: PathBuf,
    gates: Vec<Gate>,
    records: Vec<StageRecord>,
    started: Instant,
    soliton: Option<SolitonModel>,
    model: Option<Arc<DynamicsModel>>,
    basis: Option<Arc<DistortedBasis>>,
    data: Option<Arc<DataSpec>>,
    shot: Option<ShootResult>,
    trajectory: Option<Trajectory>,
    decay: Option<DecayReport>,
    done: Vec<Stage>,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn band(value: f64, target: f64, tol: f64) -> (bool, String) {
    ((value - target).abs() <= tol, format!("{target} +- {tol}"))
}

fn below(value: f64, limit: f64) -> (bool, String) {
    (value < limit, format!("< {limit}"))
}

fn bump(y: f64) -> f64 {
    if y.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

/// Linear interpolation of `(xs, ys)` at `x`, zero outside the table.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let j = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    ys[j - 1] * (1.0 - w) + ys[j] * w
}

fn read_zeta_file(path: &Path, grid: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let (mut xs, mut z1, mut z2) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let val = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("0")
                .trim()
                .parse()
                .map_err(|e| KgError::Config(format!("{}: {e}", path.display())))
        };
        xs.push(val(0)?);
        z1.push(val(1)?);
        z2.push(if rec.len() > 2 { val(2)? } else { 0.0 });
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KgError::Config(format!("{}: x column must increase", path.display())));
    }
    Ok((grid.sample(|x| interpolate(&xs, &z1, x)), grid.sample(|x| interpolate(&xs, &z2, x))))
}

impl Pipeline {
    pub fn new(cfg: Config, out: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let out = out.into();
        fs::create_dir_all(&out)?;
        Ok(Self {
            cfg,
            out,
            gates: Vec::new(),
            records: Vec::new(),
            started: Instant::now(),
            soliton: None,
            model: None,
            basis: None,
            data: None,
            shot: None,
            trajectory: None,
            decay: None,
            done: Vec::new(),
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn failed_gates(&self) -> Vec<&Gate> {
        self.gates.iter().filter(|g| !g.pass).collect()
    }

    pub fn shoot_result(&self) -> Option<&ShootResult> {
        self.shot.as_ref()
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.trajectory.as_ref()
    }

    pub fn decay_report(&self) -> Option<&DecayReport> {
        self.decay.as_ref()
    }

    fn gate(&mut self, stage: Stage, name: &str, value: f64, (pass, bound): (bool, String)) {
        self.gates.push(Gate { stage: stage.name(), name: name.into(), value, bound, pass: pass && value.is_finite() });
    }

    fn soliton(&mut self) -> Result<&SolitonModel> {
        if self.soliton.is_none() {
            let g = GridSpec::from_spacing(self.cfg.grid.half_width, self.cfg.grid.dx)?;
            self.soliton = Some(soliton::build_soliton(self.cfg.alpha, g)?);
        }
        Ok(self.soliton.as_ref().expect("set above"))
    }

    fn dynamics_grid(&self) -> Result<GridSpec> {
        GridSpec::from_spacing(self.cfg.dynamics_half_width(), self.cfg.dynamics.dx)
    }

    fn model(&mut self) -> Result<Arc<DynamicsModel>> {
        if self.model.is_none() {
            let g = self.dynamics_grid()?;
            let ds = DiscreteSoliton::new(self.soliton()?, g)?;
            self.model = Some(DynamicsModel::new(ds));
        }
        Ok(Arc::clone(self.model.as_ref().expect("set above")))
    }

    fn basis(&mut self) -> Result<Arc<DistortedBasis>> {
        if self.basis.is_none() {
            let modes = self.model()?.mode_basis();
            let potential = self.soliton()?.potential.clone();
            self.basis = Some(Arc::new(DistortedBasis::for_modes(&potential, &modes, self.cfg.dft)?));
        }
        Ok(Arc::clone(self.basis.as_ref().expect("set above")))
    }

    fn data(&mut self) -> Result<Arc<DataSpec>> {
        if self.data.is_none() {
            let model = self.model()?;
            let modes = model.mode_basis();
            let g = modes.grid;
            let d = self.cfg.data.clone();
            let (raw1, raw2) = match d.zeta_shape {
                ZetaShape::Gaussian => (g.sample(|x| (-x * x).exp()), vec![0.0; g.len()]),
                ZetaShape::CompactBump => (g.sample(|x| bump(x / 2.0)), vec![0.0; g.len()]),
                ZetaShape::CustomFile => {
                    let path = d.zeta_file.as_ref().ok_or_else(|| KgError::Config("missing data.zeta_file".into()))?;
                    read_zeta_file(path, &g)?
                }
            };
            let (z1, z2) = project_continuous(&raw1, &raw2, &modes)?;
            let scale = |v: Vec<f64>| v.into_iter().map(|x| x * d.zeta_amplitude).collect::<Vec<_>>();
            let (z1, z2) = (scale(z1), scale(z2));
            let basis = if d.zeta_amplitude != 0.0 { Some(self.basis()?) } else { None };
            let spec = DataSpec::new(d.b, z1, z2, d.epsilon0, &modes, basis.as_deref())?;
            self.data = Some(Arc::new(spec));
        }
        Ok(Arc::clone(self.data.as_ref().expect("set above")))
    }

    /// Run `stage`, running the stages it depends on first.
    pub fn run(&mut self, stage: Stage) -> Result<()> {
        if self.done.contains(&stage) {
            return Ok(());
        }
        match stage {
            Stage::Evolve => self.run(Stage::Shoot)?,
            Stage::DecayReport => self.run(Stage::Evolve)?,
            _ => {}
        }
        let t0 = Instant::now();
        log::info!("stage {}", stage.name());
        let result = match stage {
            Stage::Spectrum => self.spectrum(),
            Stage::Scattering => self.scattering(),
            Stage::DftCheck => self.dft_check(),
            Stage::LinearDecay => self.linear_decay(),
            Stage::Shoot => self.shoot(),
            Stage::Evolve => self.evolve(),
            Stage::DecayReport => self.decay(),
        };
        let (files, err) = match result {
            Ok(f) => (f, None),
            Err((f, e)) => (f, Some(e)),
        };
        self.records.push(StageRecord { stage: stage.name(), wall_seconds: t0.elapsed().as_secs_f64(), files });
        self.done.push(stage);
        self.write_manifest()?;
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn write_manifest(&self) -> Result<()> {
        let manifest = json!({
            "tool": "kglab",
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.cfg.hash(),
            "config": self.cfg.to_toml(),
            "stages": self.records,
            "gates": self.gates,
            "wall_seconds": self.started.elapsed().as_secs_f64(),
        });
        write_json(&self.out.join("manifest.json"), &manifest)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

type StageResult = std::result::Result<Vec<String>, (Vec<String>, KgError)>;

fn plain<T>(r: Result<T>) -> std::result::Result<T, (Vec<String>, KgError)> {
    r.map_err(|e| (Vec::new(), e))
}

impl Pipeline {
    fn spectrum(&mut self) -> StageResult {
        let report = plain(self.soliton().and_then(soliton::spectrum_report))?;
        let mut w = plain(csv::Writer::from_path(self.path("spectrum.csv")).map_err(KgError::from))?;
        let rows: Result<()> = (|| {
            w.write_record(["index", "eigenvalue", "parity"])?;
            for e in &report.eigenvalues {
                w.write_record([e.index.to_string(), fmt(e.value), format!("{:?}", e.parity).to_lowercase()])?;
            }
            w.flush()?;
            Ok(())
        })();
        plain(rows)?;
        plain(write_json(&self.path("spectrum.json"), &report))?;
        let st = Stage::Spectrum;
        if let Some(expected) = report.lambda0_expected {
            self.gate(st, "lambda0_error", (report.lambda0 - expected).abs(), below((report.lambda0 - expected).abs(), 1e-3));
        }
        if let Some(err) = report.ground_state_l2_error {
            self.gate(st, "ground_state_l2_error", err, below(err, 1e-3));
        }
        let n = report.gap_eigenvalues.len() as f64;
        self.gate(st, "gap_eigenvalues", n, (n == 0.0, "= 0".into()));
        Ok(vec!["spectrum.csv".into(), "spectrum.json".into()])
    }

    fn scattering(&mut self) -> StageResult {
        let kspec = self.cfg.k_grid;
        let data = plain(self.soliton().and_then(|m| scattering::compute_scattering(&m.potential, &m.grid, &kspec)))?;
        plain(write_csv(
            &self.path("scattering.csv"),
            &["k", "ReT", "ImT", "ReR+", "ImR+", "ReR-", "ImR-", "unitarity_defect"],
            data.coefficients.iter().map(|c| {
                vec![c.k, c.t.re, c.t.im, c.r_plus.re, c.r_plus.im, c.r_minus.re, c.r_minus.im, c.unitarity_defect]
            }),
        ))?;
        let g = &data.genericity;
        let verdict = json!({
            "genericity": g,
            "max_unitarity_defect": data.max_unitarity_defect(),
            "max_route_discrepancy": data.max_route_discrepancy(),
        });
        plain(write_json(&self.path("genericity.json"), &verdict))?;
        let st = Stage::Scattering;
        let (t0, r0) = (g.t0.norm(), (g.r_plus0 + 1.0).norm());
        let generic = g.verdict == Genericity::Generic;
        self.gate(st, "max_unitarity_defect", data.max_unitarity_defect(), below(data.max_unitarity_defect(), 1e-6));
        self.gate(st, "verdict_generic", f64::from(u8::from(generic)), (generic, "= 1".into()));
        self.gate(st, "abs_t0", t0, below(t0, 0.05));
        self.gate(st, "abs_r_plus0_plus_1", r0, below(r0, 0.1));
        Ok(vec!["scattering.csv".into(), "genericity.json".into()])
    }

    fn dft_check(&mut self) -> StageResult {
        let (potential, g) = {
            let m = plain(self.soliton())?;
            (m.potential.clone(), m.grid)
        };
        let modes = plain(self.soliton())?.mode_basis(&g);
        let basis = plain(DistortedBasis::for_modes(&potential, &modes, self.cfg.dft))?;
        let dx = g.dx();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut isometry = 0.0f64;
        let mut round_trip = 0.0f64;
        let mut rows = Vec::with_capacity(DFT_SAMPLES);
        for j in 0..DFT_SAMPLES {
            let bumps: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..5.0), rng.gen_range(0.5..2.0)))
                .collect();
            let h = g.sample(|x| {
                bumps
                    .iter()
                    .map(|(c, c0, w)| c * ((-((x - c0) / w).powi(2)).exp() + (-((x + c0) / w).powi(2)).exp()))
                    .sum()
            });
            let pc = basis.project(&h);
            let ft = basis.forward_real(&pc);
            let ratio = basis.norm_k(&ft) / grid::l2_norm(&pc, dx);
            let back = basis.inverse_real(&basis.forward_real(&h));
            let diff: Vec<f64> = back.iter().zip(&pc).map(|(a, b)| a - b).collect();
            let rt = grid::l2_norm(&diff, dx) / grid::l2_norm(&h, dx);
            isometry = isometry.max((ratio - 1.0).abs());
            round_trip = round_trip.max(rt);
            rows.push(json!({"sample": j, "isometry_ratio": ratio, "round_trip_defect": rt}));
        }
        let ground = basis.norm_k(&basis.forward_real(&modes.ground_state));
        let report = json!({
            "grid": {"L": g.half_width(), "dx": dx},
            "dft": self.cfg.dft,
            "seed": self.cfg.seed,
            "max_isometry_defect": isometry,
            "ground_state_transform_norm": ground,
            "max_round_trip_defect": round_trip,
            "samples": rows,
        });
        plain(write_json(&self.path("dft_report.json"), &report))?;
        let st = Stage::DftCheck;
        self.gate(st, "max_isometry_defect", isometry, below(isometry, 1e-3));
        self.gate(st, "ground_state_transform_norm", ground, below(ground, 1e-3));
        self.gate(st, "max_round_trip_defect", round_trip, below(round_trip, 1e-4));
        Ok(vec!["dft_report.json".into()])
    }

    fn linear_decay(&mut self) -> StageResult {
        let lc = self.cfg.linear;
        let g = plain(GridSpec::from_spacing(lc.t_max + 20.0, self.cfg.dynamics.dx))?;
        let modes = plain(self.soliton())?.mode_basis(&g);
        let potential = plain(self.soliton())?.potential.clone();
        let basis = plain(DistortedBasis::for_modes(&potential, &modes, self.cfg.dft))?;
        let f = g.sample(|x| (-(x / lc.width).powi(2)).exp());
        let times: Vec<f64> = (0..lc.samples).map(|j| lc.t_max * j as f64 / (lc.samples - 1) as f64).collect();
        let samples = plain(basis.linear_decay_probe(&f, &times))?;
        plain(write_csv(
            &self.path("linear_decay.csv"),
            &["t", "sup_norm", "weighted_sup_norm"],
            samples.iter().map(|s| vec![s.t, s.sup_norm, s.weighted_sup_norm]),
        ))?;
        let window = (self.cfg.fit.t1, lc.t_max);
        let ew = Some(self.cfg.fit.envelope_width);
        let sup: Vec<f64> = samples.iter().map(|s| s.sup_norm).collect();
        let wsup: Vec<f64> = samples.iter().map(|s| s.weighted_sup_norm).collect();
        let fit_sup = plain(analysis::fit_decay(&times, &sup, window, ew))?;
        let fit_w = plain(analysis::fit_decay(&times, &wsup, window, ew))?;
        let truncated = samples.iter().any(|s| s.truncated);
        plain(write_json(
            &self.path("linear_decay.json"),
            &json!({"sup_fit": fit_sup, "weighted_fit": fit_w, "truncated": truncated}),
        ))?;
        let st = Stage::LinearDecay;
        self.gate(st, "sup_slope", fit_sup.slope, band(fit_sup.slope, -0.5, 0.1));
        self.gate(st, "weighted_slope", fit_w.slope, band(fit_w.slope, -1.0, 0.15));
        Ok(vec!["linear_decay.csv".into(), "linear_decay.json".into()])
    }

    fn shoot_options(&self) -> ShootOptions {
        let sc = self.cfg.shoot;
        ShootOptions {
            horizon: sc.horizon,
            tol: sc.tol,
            s_max: sc.s_max,
            dt: self.cfg.time.dt,
            fan_out: 1,
            tracking: TrackingOptions::default(),
        }
    }

    fn shoot(&mut self) -> StageResult {
        let model = plain(self.model())?;
        let spec = plain(self.data())?;
        let opts = self.shoot_options();
        let r = plain(manifold::shoot_stable(&spec, &model, &opts))?;
        let modes = model.mode_basis();
        let report = json!({
            "s_star": r.s_star,
            "final_width": r.final_width,
            "residual": r.residual,
            "monotone": r.monotone,
            "horizon": r.horizon,
            "gamma_norm": spec.gamma_norm(&modes),
            "budget": spec.budget,
            "probe_termination": r.probe.termination,
            "tracked_termination": r.trajectory.termination,
            "bracket_history": r.bracket_history,
        });
        plain(write_json(&self.path("shoot.json"), &report))?;
        let st = Stage::Shoot;
        let tol = opts.tol;
        self.gate(st, "bracket_width", r.final_width, (r.final_width <= tol.max(1e-12), format!("<= {}", tol.max(1e-12))));
        let floor = 10.0 * (tol + r.residual.truncation_error);
        self.gate(st, "stability_residual", r.residual.value.abs(), (r.residual.value.abs() <= floor, format!("<= {floor:e}")));
        self.shot = Some(r);
        Ok(vec!["shoot.json".into()])
    }

    fn evolve(&mut self) -> StageResult {
        let model = plain(self.model())?;
        let spec = plain(self.data())?;
        let s_star = self.shot.as_ref().map(|r| r.s_star).unwrap_or(0.0);
        let s = s_star + self.cfg.shoot.s_offset;
        let tc = self.cfg.time;
        let mut opts = EvolveOptions::new(tc.dt, tc.horizon);
        opts.sample_stride = tc.sample_stride;
        opts.snapshot_interval = Some(tc.snapshot_interval);
        opts.snapshot_pair = Some(SNAPSHOT_PAIR.min(0.5 * tc.snapshot_interval));
        opts.escape_threshold = Some(GROWTH_THRESHOLD);
        opts.tracking = self.cfg.shoot.track.then(TrackingOptions::default);
        let traj = plain(manifold::evolve_on_manifold(&spec, s, &model, &opts))?;
        let mut files = vec!["trajectory.csv".to_string()];
        plain(write_csv(
            &self.path("trajectory.csv"),
            &["t", "a", "adot", "chi_sup", "chi_weighted_sup", "energy", "F_v"],
            traj.samples.iter().map(|p| vec![p.t, p.a, p.adot, p.chi_sup, p.chi_weighted_sup, p.energy, p.forcing]),
        ))?;
        if tc.write_fields {
            let w = traj.window;
            for snap in traj.snapshots.iter().filter(|p| {
                let r = p.t / tc.snapshot_interval;
                (r - r.round()).abs() < 1e-6
            }) {
                let name = format!("field_t{:04}.csv", snap.t.round() as i64);
                plain(write_csv(
                    &self.path(&name),
                    &["x", "chi", "chi_t"],
                    (0..w.len()).map(|i| vec![w.x(i), snap.chi[i], snap.chit[i]]),
                ))?;
                files.push(name);
            }
        }
        let e0 = traj.samples[0].energy;
        let drift = traj.samples.iter().map(|p| (p.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1e-300);
        let st = Stage::Evolve;
        self.gate(st, "relative_energy_drift", drift, below(drift, 1e-6));
        let termination = traj.termination;
        self.trajectory = Some(traj);
        match termination {
            Termination::Horizon => Ok(files),
            Termination::Escape { t, a_plus } | Termination::BlowUp { t, a_plus } => Err((
                files,
                KgError::BlowUp { t, reason: format!("left the stable manifold with a_+ = {a_plus:e} at s = {s:e}") },
            )),
        }
    }

    fn decay(&mut self) -> StageResult {
        let basis = plain(self.basis())?;
        let traj = self.trajectory.as_ref().ok_or_else(|| (Vec::new(), KgError::InvalidParameter("no trajectory".into())))?;
        let report: DecayReport = plain(analysis::decay_report(traj, Some(&basis), &self.cfg.fit, self.cfg.time.horizon))?;
        let t: Vec<f64> = traj.samples.iter().map(|p| p.t).collect();
        let sup: Vec<f64> = traj.samples.iter().map(|p| p.chi_sup).collect();
        let local: Vec<f64> = traj.samples.iter().map(|p| p.chi_weighted_sup).collect();
        let ew = self.cfg.fit.envelope_width;
        let (env_sup, env_local) = (analysis::envelope(&t, &sup, ew), analysis::envelope(&t, &local, ew));
        plain(write_csv(
            &self.path("decay_series.csv"),
            &["t", "abs_a", "chi_sup", "chi_weighted_sup", "chi_sup_envelope", "chi_weighted_envelope"],
            traj.samples.iter().enumerate().map(|(i, p)| vec![p.t, p.a.abs(), p.chi_sup, p.chi_weighted_sup, env_sup[i], env_local[i]]),
        ))?;
        let st = Stage::DecayReport;
        let mut gates = Vec::new();
        let mut add = |name: &str, value: f64, check: (bool, String)| {
            gates.push(Gate { stage: st.name(), name: name.into(), value, bound: check.1, pass: check.0 && value.is_finite() });
        };
        add("exponent_a", report.exponent_a.slope, band(report.exponent_a.slope, -2.0, 0.3));
        add("exponent_chi_sup", report.exponent_chi_sup.slope, band(report.exponent_chi_sup.slope, -0.5, 0.1));
        add("exponent_chi_local", report.exponent_chi_local.slope, band(report.exponent_chi_local.slope, -1.0, 0.2));
        if self.cfg.data.zeta_shape == ZetaShape::CompactBump {
            let v = report.exponent_chi_local.slope;
            add("exponent_chi_local_compact", v, (v <= -1.3, "<= -1.3".into()));
        }
        for (name, d) in [("integral_sup_2.1", report.integrated_sup), ("integral_local_1.1", report.integrated_local)] {
            add(name, d.relative_change.abs(), below(d.relative_change.abs(), 0.05));
        }
        if let Some(x) = &report.x_norm {
            let limit = 20.0 * self.cfg.data.epsilon0;
            add("x_norm_sup", x.sup, (x.sup <= limit, format!("<= {limit}")));
            add("x_norm_final_third_trend", x.final_third_trend, (x.final_third_trend <= 0.05, "<= 0.05".into()));
        }
        if let Some(fit) = report.profile_derivative.as_ref().and_then(|p| p.slope_direct) {
            add("profile_derivative_slope", fit.slope, (fit.slope <= -1.3, "<= -1.3".into()));
        }
        let passed = gates.iter().all(|g| g.pass);
        plain(write_json(&self.path("decay_report.json"), &json!({"report": report, "gates": gates, "pass": passed})))?;
        self.gates.extend(gates);
        self.decay = Some(report);
        Ok(vec!["decay_report.json".into(), "decay_series.csv".into()])
    }
}

/// Run `stages` (plus their dependencies). With `check`, any failed gate turns into a
/// threshold error after all stages have run.
pub fn run_pipeline(cfg: Config, out: &Path, stages: &[Stage], check: bool) -> Result<Pipeline> {
    let mut p = Pipeline::new(cfg, out)?;
    for &s in stages {
        p.run(s)?;
    }
    if check {
        let failed: Vec<String> = p.failed_gates().iter().map(|g| format!("{}.{}", g.stage, g.name)).collect();
        if !failed.is_empty() {
            return Err(KgError::Threshold(failed.join(", ")));
        }
    }
    Ok(p)
}
