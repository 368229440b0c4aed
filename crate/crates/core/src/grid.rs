//! Uniform symmetric grids on `[-L, L]` and quadrature helpers.

use crate::error::{KgError, Result};

/// Symmetric uniform grid with an odd number of nodes, so that `x = 0` is a node
/// and node `i` mirrors node `n - 1 - i` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    half_width: f64,
    n_points: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(KgError::InvalidParameter(format!(
                "grid half width must be positive, got {half_width}"
            )));
        }
        if n_points < 3 || n_points % 2 == 0 {
            return Err(KgError::InvalidParameter(format!(
                "grid needs an odd node count >= 3, got {n_points}"
            )));
        }
        Ok(Self { half_width, n_points })
    }

    /// Grid with spacing exactly `dx`; the half width is rounded to a multiple of `dx`.
    pub fn from_spacing(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(KgError::InvalidParameter(format!("dx must be positive, got {dx}")));
        }
        let half = (half_width / dx).round().max(1.0) as usize;
        Self::new(half as f64 * dx, 2 * half + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node at `x = 0`.
    pub fn center(&self) -> usize {
        self.n_points / 2
    }

    pub fn dx(&self) -> f64 {
        self.half_width / self.center() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.n_points - 1 - i
    }

    /// Nearest node index to `x`, clamped to the grid.
    pub fn index_of(&self, x: f64) -> usize {
        let j = (x / self.dx()).round() + self.center() as f64;
        j.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Index range of the nodes with `|x| <= radius`.
    pub fn core_range(&self, radius: f64) -> std::ops::Range<usize> {
        let c = self.center();
        let m = ((radius / self.dx()).floor() as usize).min(c);
        (c - m)..(c + m + 1)
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_points).map(|i| f(self.x(i))).collect()
    }
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Composite Simpson rule; requires an odd number of samples.
pub fn simpson(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    assert!(n % 2 == 1 && n >= 3, "simpson needs an odd sample count >= 3");
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * dx / 3.0
}

/// Trapezoid inner product.
pub fn inner(a: &[f64], b: &[f64], dx: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = a[1..n - 1].iter().zip(&b[1..n - 1]).map(|(x, y)| x * y).sum();
    dx * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

pub fn l2_norm(a: &[f64], dx: f64) -> f64 {
    inner(a, a, dx).sqrt()
}

pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `max |f(x) - f(-x)|` over a symmetric grid.
pub fn odd_part_sup(a: &[f64]) -> f64 {
    let n = a.len();
    (0..n / 2).fold(0.0_f64, |m, i| m.max((a[i] - a[n - 1 - i]).abs()))
}

/// Second-order centered first derivative, one-sided at the ends.
pub fn derivative(a: &[f64], dx: f64) -> Vec<f64> {
    let n = a.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for i in 1..n - 1 {
        d[i] = (a[i + 1] - a[i - 1]) / (2.0 * dx);
    }
    d[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * a[n - 1] - 4.0 * a[n - 2] + a[n - 3]) / (2.0 * dx);
    d
}

/// Three-point second derivative with zero Dirichlet data outside the grid.
pub fn second_derivative(a: &[f64], dx: f64) -> Vec<f64> {
    let n = a.len();
    let inv = 1.0 / (dx * dx);
    (0..n)
        .map(|i| {
            let l = if i > 0 { a[i - 1] } else { 0.0 };
            let r = if i + 1 < n { a[i + 1] } else { 0.0 };
            (l - 2.0 * a[i] + r) * inv
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_mirror_symmetric() {
        let g = GridSpec::from_spacing(7.3, 0.1).unwrap();
        assert_eq!(g.len() % 2, 1);
        assert_eq!(g.x(g.center()), 0.0);
        for i in 0..g.len() {
            assert_eq!(g.x(i), -g.x(g.mirror(i)));
        }
    }

    #[test]
    fn rejects_even_counts() {
        assert!(GridSpec::new(1.0, 10).is_err());
        assert!(GridSpec::new(-1.0, 11).is_err());
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let g = GridSpec::new(2.0, 9).unwrap();
        let v = g.sample(|x| x * x * x + 2.0 * x * x - 1.0);
        let exact = 2.0 * (2.0 * 8.0 / 3.0 - 2.0);
        assert!((simpson(&v, g.dx()) - exact).abs() < 1e-12);
    }

    #[test]
    fn core_range_is_centered() {
        let g = GridSpec::from_spacing(10.0, 0.5).unwrap();
        let r = g.core_range(2.0);
        assert_eq!(g.x(r.start), -2.0);
        assert_eq!(g.x(r.end - 1), 2.0);
    }
}
