//! Independent reference computations for the spectral, scattering and transform layers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::gamma::gamma;

use kglab::dft::{DftConfig, DistortedBasis};
use kglab::scattering::{jost_solve, scattering_coefficients, Side};
use kglab::soliton::{build_soliton, spectrum_report};
use kglab::{GridSpec, Potential};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Lanczos approximation (g = 7) with reflection for `Re z < 1/2`.
fn cgamma(z: Complex64) -> Complex64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z.re < 0.5 {
        return PI / ((PI * z).sin() * cgamma(1.0 - z));
    }
    let z = z - 1.0;
    let mut x = Complex64::new(C[0], 0.0);
    for (i, c) in C.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// Transmission of `-d^2/dy^2 - nu (nu + 1) sech^2 y` at frequency `k`.
fn sech2_transmission(nu: f64, k: f64) -> Complex64 {
    let ik = I * k;
    cgamma(-nu - ik) * cgamma(1.0 + nu - ik) / (cgamma(-ik) * cgamma(1.0 - ik))
}

#[test]
fn lanczos_matches_real_gamma() {
    for x in [0.3, 1.0, 2.5, 4.7] {
        assert!((cgamma(Complex64::new(x, 0.0)).re - gamma(x)).abs() < 1e-12 * gamma(x));
    }
}

#[test]
fn ground_state_constant_from_beta_function() {
    for alpha in [1.0, 1.5, 2.0] {
        let p = (alpha + 1.0) / alpha;
        let integral = PI.sqrt() * gamma(p) / (alpha * gamma(p + 0.5));
        let m = build_soliton(alpha, GridSpec::from_spacing(30.0, 0.02).unwrap()).unwrap();
        assert!((m.c0 - integral.powf(-0.5)).abs() < 1e-10, "alpha {alpha}");
    }
}

#[test]
fn ground_eigenvalue_across_powers() {
    for alpha in [1.0, 1.5, 2.0] {
        let m = build_soliton(alpha, GridSpec::from_spacing(40.0, 0.02).unwrap()).unwrap();
        let r = spectrum_report(&m).unwrap();
        assert!((r.lambda0 + alpha * (alpha + 2.0)).abs() < 2e-3, "alpha {alpha}: {}", r.lambda0);
        assert!(r.ground_state_l2_error.unwrap() < 1e-3);
        assert!(!r.has_internal_mode());
    }
}

#[test]
fn soliton_transmission_matches_gamma_formula() {
    // -d^2/dx^2 - 10 sech^2(3x/2) rescales to nu = 5/3 in y = 3x/2.
    let g = GridSpec::from_spacing(40.0, 0.02).unwrap();
    let v = Potential::soliton(1.5);
    for k in [0.05, 0.3, 1.0, 2.7, 6.0] {
        let c = scattering_coefficients(&v, &g, k).unwrap();
        let exact = sech2_transmission(5.0 / 3.0, k / 1.5);
        assert!((c.t - exact).norm() < 1e-6, "k {k}: {} vs {exact}", c.t);
    }
}

#[test]
fn poschl_teller_jost_closed_form() {
    let g = GridSpec::from_spacing(30.0, 0.02).unwrap();
    let v = Potential::Sech2 { depth: 2.0, width: 1.0 };
    for k in [0.1, 1.0, 3.0] {
        let plus = jost_solve(&v, &g, k, Side::Plus).unwrap();
        let minus = jost_solve(&v, &g, k, Side::Minus).unwrap();
        let ik = I * k;
        for i in (0..g.len()).step_by(97) {
            let th = g.x(i).tanh();
            let mp = (ik - th) / (ik - 1.0);
            let mm = (ik + th) / (ik - 1.0);
            assert!((plus.m[i] - mp).norm() < 1e-6);
            assert!((minus.m[i] - mm).norm() < 1e-6);
        }
    }
}

/// Trapezoid Nystrom solution of `m(x) = 1 + int_x^L D_k(y - x) V(y) m(y) dy`.
fn volterra_plus(v: &Potential, g: &GridSpec, k: f64) -> Vec<Complex64> {
    let n = g.len();
    let dx = g.dx();
    let vs = v.sample(g);
    let twoik = I * (2.0 * k);
    let kernel = |s: f64| ((twoik * s).exp() - 1.0) / twoik;
    let mut m = vec![Complex64::new(1.0, 0.0); n];
    for i in (0..n - 1).rev() {
        let mut s = Complex64::new(0.0, 0.0);
        for j in i + 1..n {
            let w = if j == n - 1 { 0.5 * dx } else { dx };
            s += w * kernel(g.x(j) - g.x(i)) * vs[j] * m[j];
        }
        m[i] = 1.0 + s;
    }
    m
}

#[test]
fn jost_matches_volterra_nystrom() {
    let fine = GridSpec::from_spacing(20.0, 0.01).unwrap();
    let coarse = GridSpec::from_spacing(20.0, 0.02).unwrap();
    let v = Potential::soliton(1.5);
    for k in [0.4, 2.0, 5.0] {
        let mf = volterra_plus(&v, &fine, k);
        let mc = volterra_plus(&v, &coarse, k);
        let ode = jost_solve(&v, &fine, k, Side::Plus).unwrap();
        let mut err: f64 = 0.0;
        for (ic, i) in (0..fine.len()).step_by(2).enumerate() {
            if fine.x(i).abs() > 5.0 {
                continue;
            }
            let richardson = (4.0 * mf[i] - mc[ic]) / 3.0;
            err = err.max((ode.m[i] - richardson).norm());
        }
        assert!(err < 1e-6, "k {k}: {err}");
    }
}

#[test]
fn free_propagator_matches_fft() {
    let g = GridSpec::from_spacing(40.0, 0.05).unwrap();
    let basis = DistortedBasis::new(&Potential::Zero, vec![], g, DftConfig::default()).unwrap();
    let u0 = g.sample(|x| (-x * x).exp());
    let u1 = g.sample(|x| x * x * (-x * x).exp());
    let t = 5.0;
    let (u, _) = basis.linear_propagate(&u0, &u1, t);

    let n = 1 << 14;
    let l = 409.6;
    let h = l / n as f64;
    let xs: Vec<f64> = (0..n).map(|j| -0.5 * l + j as f64 * h).collect();
    let mut a: Vec<Complex64> = xs.iter().map(|x| Complex64::new((-x * x).exp(), 0.0)).collect();
    let mut b: Vec<Complex64> = xs.iter().map(|x| Complex64::new(x * x * (-x * x).exp(), 0.0)).collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for j in 0..n {
        let kj = if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * 2.0 * PI / l;
        let w = (1.0 + kj * kj).sqrt();
        a[j] = a[j] * (w * t).cos() + b[j] * (w * t).sin() / w;
    }
    inv.process(&mut a);
    let mut err: f64 = 0.0;
    for i in 0..g.len() {
        let x = g.x(i);
        if x.abs() > 20.0 {
            continue;
        }
        let j = ((x + 0.5 * l) / h).round() as usize;
        assert!((xs[j] - x).abs() < 1e-9);
        err = err.max((u[i] - a[j].re / n as f64).abs());
    }
    assert!(err < 1e-8, "{err}");
}
