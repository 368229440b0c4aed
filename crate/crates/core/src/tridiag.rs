//! Symmetric tridiagonal matrices: Sturm counts, bisection, inverse iteration.

use crate::error::{KgError, Result};

#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - lambda - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + lambda.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based) by bisection on the Sturm count.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues below `upper`, ascending.
    pub fn eigenvalues_below(&self, upper: f64) -> Vec<f64> {
        (0..self.count_below(upper)).map(|i| self.eigenvalue(i)).collect()
    }

    /// Solve `(A - shift I) x = rhs` with the Thomas algorithm (partial pivoting-free).
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let tiny = 1e-300;
        let mut b = self.diag[0] - shift;
        if b == 0.0 {
            b = tiny;
        }
        c[0] = if n > 1 { self.off[0] / b } else { 0.0 };
        d[0] = rhs[0] / b;
        for i in 1..n {
            let a = self.off[i - 1];
            let mut m = self.diag[i] - shift - a * c[i - 1];
            if m == 0.0 {
                m = tiny;
            }
            c[i] = if i + 1 < n { self.off[i] / m } else { 0.0 };
            d[i] = (rhs[i] - a * d[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(KgError::Eigen("tridiagonal solve produced non-finite values".into()));
        }
        Ok(d)
    }

    /// Eigenvector for an (accurate) eigenvalue by inverse iteration, unit Euclidean norm.
    pub fn eigenvector(&self, lambda: f64, start: &[f64]) -> Result<Vec<f64>> {
        let scale = lambda.abs().max(1.0);
        let shift = lambda + 1e-10 * scale;
        let mut x = start.to_vec();
        normalize(&mut x)?;
        for _ in 0..6 {
            let mut y = self.solve_shifted(shift, &x)?;
            normalize(&mut y)?;
            let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            if dot < 0.0 {
                y.iter_mut().for_each(|v| *v = -*v);
            }
            let change = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = y;
            if change < 1e-15 {
                break;
            }
        }
        Ok(x)
    }
}

fn normalize(x: &mut [f64]) -> Result<()> {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(KgError::Eigen("cannot normalize a zero vector".into()));
    }
    x.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let a = laplacian(n);
        for j in [0, 1, 7, 49] {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (j + 1) as f64 / (n + 1) as f64).cos();
            assert!((a.eigenvalue(j) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_iteration_recovers_sine_mode() {
        let n = 40;
        let a = laplacian(n);
        let lam = a.eigenvalue(0);
        let v = a.eigenvector(lam, &vec![1.0; n]).unwrap();
        let av = a.apply(&v);
        let res = av.iter().zip(&v).map(|(x, y)| (x - lam * y).abs()).fold(0.0, f64::max);
        assert!(res < 1e-12);
    }

    #[test]
    fn thomas_matches_apply() {
        let a = SymTridiag::new(vec![4.0, 5.0, 6.0, 7.0], vec![1.0, -2.0, 0.5]);
        let x = [1.0, -1.0, 2.0, 0.25];
        let b = a.apply(&x);
        let y = a.solve_shifted(0.0, &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
