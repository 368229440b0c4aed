//! Real potentials `V(x)` for the linearized operator `-d^2/dx^2 + 1 + V`.

use std::fmt;
use std::sync::Arc;

use crate::grid::GridSpec;

/// A potential that can be evaluated anywhere, which the Jost integrator needs
/// at half steps between grid nodes.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `-depth * sech^2(x / width)`.
    Sech2 { depth: f64, width: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Sech2 { depth, width } => {
                write!(f, "Sech2 {{ depth: {depth}, width: {width} }}")
            }
            Potential::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Potential {
    /// Potential of the linearization around the power-`alpha` soliton:
    /// `-(alpha + 1)(2 alpha + 1) sech^2(alpha x)`.
    pub fn soliton(alpha: f64) -> Self {
        Potential::Sech2 {
            depth: (alpha + 1.0) * (2.0 * alpha + 1.0),
            width: 1.0 / alpha,
        }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Potential::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Sech2 { depth, width } => {
                let s = 1.0 / (x / width).cosh();
                -depth * s * s
            }
            Potential::Custom(f) => f(x),
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        grid.sample(|x| self.eval(x))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    /// Smallest radius `X` on the grid such that `|V(x)| <= tol` for all grid nodes with
    /// `|x| >= X`. Returns `0` for the zero potential.
    pub fn support_radius(&self, grid: &GridSpec, tol: f64) -> f64 {
        let mut radius: f64 = 0.0;
        for i in 0..grid.len() {
            let x = grid.x(i);
            if self.eval(x).abs() > tol {
                radius = radius.max(x.abs() + grid.dx());
            }
        }
        radius.min(grid.half_width())
    }

    /// Largest `|V(x) - V(-x)|` over the grid.
    pub fn parity_defect(&self, grid: &GridSpec) -> f64 {
        (0..grid.center())
            .map(|i| {
                let x = grid.x(i);
                (self.eval(x) - self.eval(-x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soliton_potential_depth() {
        let v = Potential::soliton(1.5);
        assert!((v.eval(0.0) + 10.0).abs() < 1e-14);
        let x: f64 = 0.7;
        let s = 1.0 / (1.5 * x).cosh();
        assert!((v.eval(x) + 10.0 * s * s).abs() < 1e-14);
    }

    #[test]
    fn support_radius_brackets_tail() {
        let g = GridSpec::from_spacing(40.0, 0.05).unwrap();
        let v = Potential::soliton(1.5);
        let r = v.support_radius(&g, 1e-17);
        assert!(r > 12.0 && r < 16.0, "{r}");
        assert!(v.eval(r).abs() <= 1e-17);
    }
}
