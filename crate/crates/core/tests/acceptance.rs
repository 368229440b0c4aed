//! Acceptance suite: one PASS/FAIL line per criterion at its stated tolerance.
//!
//! Exits 0 after reporting so that known shortfalls stay visible without breaking the
//! test run; set `KGLAB_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kglab::analysis::fit_decay;
use kglab::config::{Config, ZetaShape};
use kglab::dft::{project_continuous, DftConfig, DistortedBasis};
use kglab::dynamics::{
    evolve_full, evolve_modal, mode_extract, DynamicsModel, EvolveOptions, FieldState,
};
use kglab::grid::{self, GridSpec};
use kglab::manifold::{prepare_data, shoot_stable, DataSpec, ShootOptions, GROWTH_THRESHOLD};
use kglab::pipeline::{Pipeline, Stage};
use kglab::scattering::{compute_scattering, genericity_classify, jost_solve, Genericity, KGridSpec, Side};
use kglab::soliton::{build_soliton, spectrum_report, DiscreteSoliton, SolitonModel};
use kglab::Potential;

struct Suite {
    results: Vec<(String, bool)>,
}

impl Suite {
    fn check(&mut self, id: &str, what: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {what}: {detail}");
        self.results.push((id.to_string(), pass));
    }
}

fn soliton(half_width: f64, dx: f64) -> SolitonModel {
    build_soliton(1.5, GridSpec::from_spacing(half_width, dx).unwrap()).unwrap()
}

fn dynamics(half_width: f64) -> Arc<DynamicsModel> {
    let m = soliton(40.0, 0.02);
    DynamicsModel::new(DiscreteSoliton::new(&m, GridSpec::from_spacing(half_width, 0.05).unwrap()).unwrap())
}

fn spectral(s: &mut Suite) {
    let m = soliton(40.0, 0.02);
    let r = spectrum_report(&m).unwrap();
    let err = (r.lambda0 + 5.25).abs();
    s.check("1a", "ground eigenvalue -5.25 at dx = 0.02", err < 1e-3, format!("lambda0 = {:.6}, error {err:.2e} < 1e-3", r.lambda0));
    let l2 = r.ground_state_l2_error.unwrap();
    s.check("1b", "ground state vs closed form", l2 < 1e-3, format!("L2 error {l2:.2e} < 1e-3"));
    s.check("1c", "no eigenvalue in (0, 1)", r.gap_eigenvalues.is_empty(), format!("gap eigenvalues {:?}", r.gap_eigenvalues));
}

fn scattering(s: &mut Suite) {
    let m = soliton(40.0, 0.02);
    let data = compute_scattering(&m.potential, &m.grid, &KGridSpec::default()).unwrap();
    let u = data.max_unitarity_defect();
    s.check("2a", "unitarity over the k grid", u < 1e-6, format!("max defect {u:.2e} < 1e-6"));
    let g = &data.genericity;
    let (t0, r0) = (g.t0.norm(), (g.r_plus0 + 1.0).norm());
    let pass = g.verdict == Genericity::Generic && t0 < 0.05 && r0 < 0.1;
    s.check("2b", "soliton potential is generic", pass, format!("{:?}, |T(0)| = {t0:.2e} < 0.05, |R+(0) + 1| = {r0:.2e} < 0.1", g.verdict));
    let pt = Potential::Sech2 { depth: 2.0, width: 1.0 };
    let pg = GridSpec::from_spacing(30.0, 0.02).unwrap();
    let verdict = genericity_classify(&pt, &pg, 1e-3).unwrap().verdict;
    let i = Complex64::new(0.0, 1.0);
    let mut jost_err: f64 = 0.0;
    for k in [0.01, 0.1, 1.0, 5.0] {
        let plus = jost_solve(&pt, &pg, k, Side::Plus).unwrap();
        for (n, m) in plus.m.iter().enumerate() {
            let exact = (i * k - pg.x(n).tanh()) / (i * k - 1.0);
            jost_err = jost_err.max((m - exact).norm());
        }
    }
    let pass = verdict == Genericity::Resonant && jost_err < 1e-6;
    s.check("2c", "Poschl-Teller resonant, Jost closed form", pass, format!("{verdict:?}, Jost error {jost_err:.2e} < 1e-6"));
}

fn transform(s: &mut Suite) {
    let g = GridSpec::from_spacing(40.0, 0.05).unwrap();
    let m = soliton(40.0, 0.02);
    let modes = m.mode_basis(&g);
    let b = DistortedBasis::for_modes(&m.potential, &modes, DftConfig::default()).unwrap();
    let dx = g.dx();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut iso, mut rt): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let bumps: Vec<(f64, f64, f64)> =
            (0..3).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..5.0), rng.gen_range(0.5..2.0))).collect();
        let h = g.sample(|x| {
            bumps.iter().map(|(c, x0, w)| c * ((-((x - x0) / w).powi(2)).exp() + (-((x + x0) / w).powi(2)).exp())).sum()
        });
        let pc = b.project(&h);
        iso = iso.max((b.norm_k(&b.forward_real(&pc)) / grid::l2_norm(&pc, dx) - 1.0).abs());
        let back = b.inverse_real(&b.forward_real(&h));
        let d: Vec<f64> = back.iter().zip(&pc).map(|(x, y)| x - y).collect();
        rt = rt.max(grid::l2_norm(&d, dx) / grid::l2_norm(&h, dx));
    }
    s.check("3a", "isometry over 20 random even inputs", iso < 1e-3, format!("max |ratio - 1| = {iso:.2e} < 1e-3"));
    let fr = b.norm_k(&b.forward_real(&modes.ground_state));
    s.check("3b", "transform of the ground state", fr < 1e-3, format!("norm {fr:.2e} < 1e-3"));
    s.check("3c", "round trip equals P_c", rt < 1e-4, format!("relative defect {rt:.2e} < 1e-4"));
}

fn linear_decay(s: &mut Suite) {
    let g = GridSpec::from_spacing(120.0, 0.05).unwrap();
    let m = soliton(40.0, 0.02);
    let b = DistortedBasis::for_modes(&m.potential, &m.mode_basis(&g), DftConfig::default()).unwrap();
    let f = g.sample(|x| (-x * x).exp());
    let times: Vec<f64> = (0..451).map(|j| 100.0 * j as f64 / 450.0).collect();
    let samples = b.linear_decay_probe(&f, &times).unwrap();
    let sup: Vec<f64> = samples.iter().map(|p| p.sup_norm).collect();
    let w: Vec<f64> = samples.iter().map(|p| p.weighted_sup_norm).collect();
    let fs = fit_decay(&times, &sup, (10.0, 100.0), Some(6.0)).unwrap().slope;
    let fw = fit_decay(&times, &w, (10.0, 100.0), Some(6.0)).unwrap().slope;
    s.check("4a", "linear sup-norm slope", (fs + 0.5).abs() <= 0.1, format!("{fs:.4} in -0.5 +- 0.1"));
    s.check("4b", "linear weighted slope", (fw + 1.0).abs() <= 0.15, format!("{fw:.4} in -1 +- 0.15"));
}

fn growth_rate(s: &mut Suite) {
    let model = dynamics(60.0);
    let modes = model.mode_basis();
    let st = prepare_data(&DataSpec::zero(&modes, 1.0), 1e-10, &modes).unwrap();
    let mut opts = EvolveOptions::new(0.04, 40.0);
    opts.sample_stride = 1;
    opts.escape_threshold = Some(GROWTH_THRESHOLD);
    let traj = evolve_full(&st, &model, &opts).unwrap();
    let (t, y): (Vec<f64>, Vec<f64>) = traj
        .samples
        .iter()
        .filter(|p| p.a_plus.abs() > 1e-8 && p.a_plus.abs() < 1e-3)
        .map(|p| (p.t, p.a_plus.abs().ln()))
        .unzip();
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let rate = t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum::<f64>()
        / t.iter().map(|a| (a - mt).powi(2)).sum::<f64>();
    let omega = 21f64.sqrt() / 2.0;
    let rel = (rate / omega - 1.0).abs();
    s.check("5", "unstable growth rate", rel < 0.02, format!("rate {rate:.5} vs {omega:.5}, relative {rel:.2e} < 2e-2"));
}

fn shooting(s: &mut Suite, p: &Pipeline) {
    let r = p.shoot_result().unwrap();
    s.check("6a", "bisection converges", r.final_width <= 1e-12, format!("bracket {:.2e} <= 1e-12 (s* = {:.4e})", r.final_width, r.s_star));
    let floor = 10.0 * (1e-12 + r.residual.truncation_error);
    let v = r.residual.value.abs();
    s.check("6b", "a-posteriori stability residual", v <= floor, format!("{v:.2e} <= {floor:.2e}"));

    let model = dynamics(85.0);
    let modes = model.mode_basis();
    let mut pts = Vec::new();
    let mut widths: f64 = 0.0;
    for b in [0.005, 0.01, 0.02, 0.04] {
        let spec = DataSpec::pure_unstable_free(b, &modes, 20.0 * b);
        let r = shoot_stable(&spec, &model, &ShootOptions::default()).unwrap();
        widths = widths.max(r.final_width);
        pts.push((spec.gamma_norm(&modes).ln(), r.s_star.abs().ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    s.check("6c", "|s*| vs ||gamma|| log-log slope", slope >= 1.4, format!("{slope:.3} >= 1.4 (widths <= {widths:.1e})"));
}

fn decay(s: &mut Suite, p: &Pipeline, eps0: f64) {
    let r = p.decay_report().unwrap();
    let a = r.exponent_a.slope;
    s.check("7a", "exponent_a at T = 150", (a + 2.0).abs() <= 0.3, format!("{a:.3} in -2 +- 0.3"));
    let sup = r.exponent_chi_sup.slope;
    s.check("7b", "exponent_chi_sup", (sup + 0.5).abs() <= 0.1, format!("{sup:.3} in -0.5 +- 0.1"));
    let loc = r.exponent_chi_local.slope;
    s.check("7c", "exponent_chi_local", (loc + 1.0).abs() <= 0.2, format!("{loc:.3} in -1 +- 0.2"));
    for (id, d) in [("7d", r.integrated_sup), ("7e", r.integrated_local)] {
        let c = d.relative_change.abs();
        s.check(
            id,
            &format!("integral of power {} under doubling", d.exponent),
            c < 0.05,
            format!("I({:.0}) -> I({:.0}) changes {:.2}% < 5%", d.half_time, d.full_time, 100.0 * c),
        );
    }
    let x = r.x_norm.as_ref().unwrap();
    s.check("8a", "X-norm bounded", x.sup <= 20.0 * eps0, format!("sup {:.3e} <= {:.2}", x.sup, 20.0 * eps0));
    s.check("8b", "X-norm has no upward trend", x.final_third_trend <= 0.05, format!("final-third trend {:.2e} <= 0.05", x.final_third_trend));
}

fn integrity(s: &mut Suite, p: &Pipeline) {
    let traj = p.trajectory().unwrap();
    let e0 = traj.samples[0].energy;
    let drift = traj.samples.iter().filter(|q| q.t <= 100.0 + 1e-9).map(|q| (q.energy - e0).abs()).fold(0.0, f64::max) / e0.abs();
    s.check("9a", "energy drift over T = 100", drift < 1e-6, format!("relative {drift:.2e} < 1e-6"));

    let model = dynamics(40.0);
    let modes = model.mode_basis();
    let g = modes.grid;
    let raw = g.sample(|x| 1e-3 * (-x * x).exp());
    let (z1, z2) = project_continuous(&raw, &vec![0.0; g.len()], &modes).unwrap();
    let mut st = FieldState { t: 0.0, u: model.profile().to_vec(), ut: z2 };
    st.u.iter_mut().zip(&z1).for_each(|(u, z)| *u += z);
    let mut opts = EvolveOptions::new(0.04, 5.0);
    opts.snapshot_interval = Some(1.0);
    let full = evolve_full(&st, &model, &opts).unwrap();
    let modal = evolve_modal(&mode_extract(&st, &modes).unwrap(), &model, &opts).unwrap();
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in full.snapshots.iter().zip(&modal.snapshots) {
        let dchi = a.chi.iter().zip(&b.chi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        diff = diff.max((a.a - b.a).abs() + dchi);
        scale = scale.max(a.a.abs() + grid::sup_norm(&a.chi));
    }
    let rel = diff / scale;
    let bound = 20.0 * (0.04f64.powi(2) + 0.05f64.powi(2));
    s.check("9b", "full vs modal solver", rel < bound, format!("relative {rel:.2e} < {bound:.3}"));

    let still = FieldState { t: 0.0, u: model.profile().to_vec(), ut: vec![0.0; g.len()] };
    let traj = evolve_full(&still, &model, &EvolveOptions::new(0.04, 10.0)).unwrap();
    let drift = traj.samples.iter().map(|q| q.a.abs().max(q.chi_sup)).fold(0.0, f64::max);
    s.check("9c", "static soliton preserved over T = 10", drift < 1e-12, format!("max perturbation {drift:.2e} < 1e-12"));

    let small = dynamics(40.0);
    let large = dynamics(60.0);
    let run = |m: &Arc<DynamicsModel>| {
        let md = m.mode_basis();
        let gg = md.grid;
        let raw = gg.sample(|x| 1e-3 * (-x * x).exp());
        let (z1, z2) = project_continuous(&raw, &vec![0.0; gg.len()], &md).unwrap();
        let mut st = FieldState { t: 0.0, u: m.profile().to_vec(), ut: z2 };
        st.u.iter_mut().zip(&z1).for_each(|(u, z)| *u += z);
        let mut o = EvolveOptions::new(0.04, 10.0);
        o.snapshot_interval = Some(10.0);
        let t = evolve_full(&st, m, &o).unwrap();
        let last = t.snapshots.last().unwrap().clone();
        (gg, last.chi)
    };
    let (gs, cs) = run(&small);
    let (gl, cl) = run(&large);
    let mut d: f64 = 0.0;
    for i in 0..gs.len() {
        let x = gs.x(i);
        if x.abs() <= 10.0 {
            d = d.max((cs[i] - cl[gl.index_of(x)]).abs());
        }
    }
    s.check("9d", "light-cone invariance on |x| <= 10", d < 1e-10, format!("L = 40 vs 60 at t = 10: {d:.2e} < 1e-10"));
}

fn main() {
    let started = Instant::now();
    let mut s = Suite { results: Vec::new() };
    spectral(&mut s);
    scattering(&mut s);
    transform(&mut s);
    linear_decay(&mut s);
    growth_rate(&mut s);

    let cfg = Config::default();
    let eps0 = cfg.data.epsilon0;
    let out = std::env::temp_dir().join(format!("kglab_acceptance_{}", std::process::id()));
    let mut p = Pipeline::new(cfg, &out).unwrap();
    p.run(Stage::DecayReport).unwrap();
    shooting(&mut s, &p);
    decay(&mut s, &p, eps0);
    integrity(&mut s, &p);

    let mut compact = Config::default();
    compact.data.zeta_shape = ZetaShape::CompactBump;
    compact.data.zeta_amplitude = 2e-4;
    let mut q = Pipeline::new(compact, out.join("compact")).unwrap();
    q.run(Stage::DecayReport).unwrap();
    let loc = q.decay_report().unwrap().exponent_chi_local.slope;
    s.check("10", "compact data local decay", loc <= -1.3, format!("exponent_chi_local {loc:.3} <= -1.3"));
    std::fs::remove_dir_all(&out).ok();

    let failed: Vec<&str> = s.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    println!(
        "acceptance: {} checks, {} passed, {} failed {:?} in {:.0} s",
        s.results.len(),
        s.results.len() - failed.len(),
        failed.len(),
        failed,
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() && std::env::var_os("KGLAB_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
