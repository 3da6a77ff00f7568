//! Exponent maps `p(x)`, `q(x)` sampled at triangle centroids.

pub mod expr;

pub use expr::{parse, Expr};

use crate::error::{Error, Result};
use crate::grid::TriGrid;

#[derive(Clone, Debug)]
pub struct ExponentField {
    pub ast: Expr,
    pub scale: u32,
    /// `scale * p(c_T)` per triangle.
    pub samples: Vec<f64>,
    /// Gradient of the scaled exponent at each centroid.
    pub grad_samples: Vec<[f64; 2]>,
    pub p_minus: f64,
    pub p_plus: f64,
    /// `sum_T area_T / p(c_T)` for the unscaled exponent.
    pub alpha: f64,
    /// Finite-difference step used for gradients.
    pub fd_step: f64,
}

impl ExponentField {
    pub fn sample(ast: &Expr, grid: &TriGrid, scale: u32) -> Result<Self> {
        if scale == 0 {
            return Err(Error::InvalidArgument("exponent scale must be at least 1".into()));
        }
        let [x0, y0, x1, y1] = grid.spec.shape.bbox();
        let fd_step = 1e-6 * (x1 - x0).hypot(y1 - y0);
        let k = f64::from(scale);
        let mut samples = Vec::with_capacity(grid.triangle_count());
        let mut grad_samples = Vec::with_capacity(grid.triangle_count());
        let mut alpha = 0.0;
        for (c, &area) in grid.tri_centroid.iter().zip(&grid.tri_area) {
            let base = ast.eval(c[0], c[1]);
            if !base.is_finite() {
                return Err(Error::NonAdmissibleExponent(format!(
                    "`{ast}` is not finite at ({}, {})",
                    c[0], c[1]
                )));
            }
            let s = k * base;
            if s <= 1.0 {
                return Err(Error::NonAdmissibleExponent(format!(
                    "{s} <= 1 at ({}, {}); the exponent must exceed 1 everywhere",
                    c[0], c[1]
                )));
            }
            samples.push(s);
            alpha += area / base;
            let g = central_gradient(ast, c[0], c[1], fd_step);
            grad_samples.push([k * g[0], k * g[1]]);
        }
        let p_minus = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let p_plus = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { ast: ast.clone(), scale, samples, grad_samples, p_minus, p_plus, alpha, fd_step })
    }

    pub fn parse_and_sample(text: &str, grid: &TriGrid, scale: u32) -> Result<Self> {
        Self::sample(&parse(text)?, grid, scale)
    }

    pub fn constant(value: f64, grid: &TriGrid) -> Result<Self> {
        Self::sample(&Expr::Num(value), grid, 1)
    }

    /// Same expression at a different scale.
    pub fn rescaled(&self, grid: &TriGrid, scale: u32) -> Result<Self> {
        Self::sample(&self.ast, grid, scale)
    }

    /// Scaled exponent at an arbitrary point.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        f64::from(self.scale) * self.ast.eval(x, y)
    }

    /// Gradient of the scaled exponent at an arbitrary point.
    pub fn grad_at(&self, x: f64, y: f64) -> [f64; 2] {
        let g = central_gradient(&self.ast, x, y, self.fd_step);
        let k = f64::from(self.scale);
        [k * g[0], k * g[1]]
    }

    pub fn is_constant(&self) -> bool {
        self.ast.is_constant()
    }
}

fn central_gradient(ast: &Expr, x: f64, y: f64, h: f64) -> [f64; 2] {
    [
        (ast.eval(x + h, y) - ast.eval(x - h, y)) / (2.0 * h),
        (ast.eval(x, y + h) - ast.eval(x, y - h)) / (2.0 * h),
    ]
}

/// Counts centroids where `q` reaches the Sobolev exponent
/// `p* = 2p/(2-p)` (only finite for `p < 2`). Violations are logged, not fatal.
pub fn check_subcritical(p: &ExponentField, q: &ExponentField) -> usize {
    let bad = p
        .samples
        .iter()
        .zip(&q.samples)
        .filter(|(&p, &q)| p < 2.0 && q >= 2.0 * p / (2.0 - p))
        .count();
    if bad > 0 {
        log::warn!(
            "q(x) = `{}` is not subcritical for p(x) = `{}` at {bad} of {} centroids",
            q.ast,
            p.ast,
            p.samples.len()
        );
    }
    bad
}
