//! Modular functions and Luxemburg norms evaluated in the log domain.
//!
//! With exponents near 100 the individual terms `|u/γ|^p` leave the range
//! of `f64` long before the modular itself does, so every sum is a
//! log-sum-exp with a running maximum and the norm is found by a root
//! search in `ln γ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentField;
use crate::grid::{sup_and_argmax, ScalarField, TriGrid};

/// `Weighted`: `ρ(u) = ∫ |u|^p dx/p`. `Classical`: `ρ(u) = ∫ |u|^p dx`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormVariant {
    #[default]
    Weighted,
    Classical,
}

/// `ln ρ`, with `-inf` standing for `ρ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModularValue {
    pub log_value: f64,
}

impl ModularValue {
    pub fn value(self) -> f64 {
        self.log_value.exp()
    }
}

/// The nonzero cells of a modular sum `Σ w_T |a_T|^{p_T}`, stored as
/// `ln w_T`, `ln |a_T|` and `p_T`.
#[derive(Clone, Debug)]
pub struct PowerSum {
    ln_w: Vec<f64>,
    ln_a: Vec<f64>,
    p: Vec<f64>,
    p_min: f64,
    p_max: f64,
}

impl PowerSum {
    pub fn new(area: &[f64], values: &[f64], exps: &[f64], variant: NormVariant) -> Self {
        debug_assert!(area.len() == values.len() && values.len() == exps.len());
        let mut s = Self {
            ln_w: Vec::new(),
            ln_a: Vec::new(),
            p: Vec::new(),
            p_min: f64::INFINITY,
            p_max: f64::NEG_INFINITY,
        };
        for ((&w, &a), &p) in area.iter().zip(values).zip(exps) {
            if a == 0.0 || w == 0.0 {
                continue;
            }
            let lw = match variant {
                NormVariant::Weighted => w.ln() - p.ln(),
                NormVariant::Classical => w.ln(),
            };
            s.ln_w.push(lw);
            s.ln_a.push(a.abs().ln());
            s.p.push(p);
            s.p_min = s.p_min.min(p);
            s.p_max = s.p_max.max(p);
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_empty()
    }

    /// `ln Σ w |a/γ|^p` at `ln γ = s`.
    pub fn log_modular(&self, s: f64) -> f64 {
        self.log_modular_and_slope(s).0
    }

    /// Value and `d/ds` of the log-modular; the slope is minus the
    /// term-weighted mean exponent, so it lies in `[-p_max, -p_min]`.
    fn log_modular_and_slope(&self, s: f64) -> (f64, f64) {
        if self.is_zero() {
            return (f64::NEG_INFINITY, 0.0);
        }
        let term = |i: usize| self.ln_w[i] + self.p[i] * (self.ln_a[i] - s);
        let m = (0..self.p.len()).map(term).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut psum = 0.0;
        for i in 0..self.p.len() {
            let e = (term(i) - m).exp();
            sum += e;
            psum += self.p[i] * e;
        }
        (m + sum.ln(), -psum / sum)
    }

    /// The unique `γ` with `ρ(a/γ) = 1`; 0 for an empty sum.
    pub fn norm(&self) -> f64 {
        self.log_norm().exp()
    }

    pub fn log_norm(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let mut s = self.ln_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (f, _) = self.log_modular_and_slope(s);
        if f == 0.0 {
            return s;
        }
        // the slope bounds give an exact bracket from a single evaluation
        let (mut lo, mut hi) = if f > 0.0 {
            (s + f / self.p_max, s + f / self.p_min)
        } else {
            (s + f / self.p_min, s + f / self.p_max)
        };
        let tol = 1e-15 * (1.0 + s.abs());
        s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (f, slope) = self.log_modular_and_slope(s);
            if f == 0.0 {
                return s;
            }
            if f > 0.0 {
                lo = lo.max(s);
            } else {
                hi = hi.min(s);
            }
            let step = -f / slope;
            let newton = s + step;
            if step.abs() <= tol || hi - lo <= tol {
                return newton.clamp(lo, hi);
            }
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        s
    }
}

fn check_len(grid: &TriGrid, u: &[f64]) -> Result<()> {
    if u.len() != grid.node_count() {
        return Err(Error::Dimension { expected: grid.node_count(), got: u.len() });
    }
    Ok(())
}

fn abs_gradients(grid: &TriGrid, u: &[f64]) -> Vec<f64> {
    grid.gradient_of(u).iter().map(|g| g[0].hypot(g[1])).collect()
}

/// Modular of `u/γ` with `u` sampled at centroids.
pub fn modular(grid: &TriGrid, u: &ScalarField, p: &ExponentField, gamma: f64, variant: NormVariant) -> ModularValue {
    let vals = grid.centroid_values(u);
    let sum = PowerSum::new(&grid.tri_area, &vals, &p.samples, variant);
    ModularValue { log_value: sum.log_modular(gamma.ln()) }
}

/// Modular of `|∇u|/γ`.
pub fn gradient_modular(
    grid: &TriGrid,
    u: &ScalarField,
    p: &ExponentField,
    gamma: f64,
    variant: NormVariant,
) -> ModularValue {
    let vals = abs_gradients(grid, &u.values);
    let sum = PowerSum::new(&grid.tri_area, &vals, &p.samples, variant);
    ModularValue { log_value: sum.log_modular(gamma.ln()) }
}

pub fn luxemburg_norm(grid: &TriGrid, u: &ScalarField, p: &ExponentField, variant: NormVariant) -> f64 {
    norm_of_values(grid, &u.values, p, variant)
}

/// Luxemburg norm of `|∇u|`.
pub fn gradient_norm(grid: &TriGrid, u: &ScalarField, p: &ExponentField, variant: NormVariant) -> f64 {
    gradient_norm_of_values(grid, &u.values, p, variant)
}

pub(crate) fn norm_of_values(grid: &TriGrid, u: &[f64], p: &ExponentField, variant: NormVariant) -> f64 {
    let vals = grid.centroid_values_of(u);
    PowerSum::new(&grid.tri_area, &vals, &p.samples, variant).norm()
}

pub(crate) fn gradient_norm_of_values(grid: &TriGrid, u: &[f64], p: &ExponentField, variant: NormVariant) -> f64 {
    let vals = abs_gradients(grid, u);
    PowerSum::new(&grid.tri_area, &vals, &p.samples, variant).norm()
}

/// Checked slice entry point used by the FFI layer.
pub fn luxemburg_norm_slice(
    grid: &TriGrid,
    u: &[f64],
    p: &ExponentField,
    variant: NormVariant,
    of_gradient: bool,
) -> Result<f64> {
    check_len(grid, u)?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("field has non-finite values".into()));
    }
    Ok(if of_gradient {
        gradient_norm_of_values(grid, u, p, variant)
    } else {
        norm_of_values(grid, u, p, variant)
    })
}

/// One-sided derivative of the sup norm: `max { sgn(u(x)) η(x) : x ∈ Γ_u }`.
pub fn sup_directional_derivative(u: &ScalarField, eta: &ScalarField, tie_tol: f64) -> Result<f64> {
    if u.len() != eta.len() {
        return Err(Error::Dimension { expected: u.len(), got: eta.len() });
    }
    let (sup, gamma) = sup_and_argmax(&u.values, tie_tol);
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(gamma
        .into_iter()
        .map(|i| u.values[i].signum() * eta.values[i])
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, Shape};
    use crate::grid::DEFAULT_TIE_TOL;

    fn square(n: u32) -> TriGrid {
        TriGrid::build(&DomainSpec::new(Shape::Rectangle { w: 1.0, h: 1.0 }, n).unwrap()).unwrap()
    }

    fn constant(g: &TriGrid, v: f64) -> ScalarField {
        g.interpolate(|_, _| v, false)
    }

    #[test]
    fn modular_closed_forms() {
        let g = square(16);
        let p2 = ExponentField::constant(2.0, &g).unwrap();
        let m = modular(&g, &constant(&g, 1.0), &p2, 1.0, NormVariant::Weighted);
        assert!((m.value() - 0.5).abs() < 1e-14);
        let m = modular(&g, &constant(&g, 2f64.sqrt()), &p2, 1.0, NormVariant::Weighted);
        assert!((m.value() - 1.0).abs() < 1e-14);

        let p100 = ExponentField::constant(100.0, &g).unwrap();
        let m = modular(&g, &constant(&g, 1.0), &p100, 0.5, NormVariant::Weighted);
        let exact = 100.0 * 2f64.ln() - 100f64.ln();
        assert!((m.log_value - exact).abs() < 1e-12, "{} vs {exact}", m.log_value);
        assert!((exact - 64.71).abs() < 0.01);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = square(8);
        let p = ExponentField::constant(3.0, &g).unwrap();
        let z = ScalarField::zeros(&g);
        assert_eq!(modular(&g, &z, &p, 1.0, NormVariant::Weighted).log_value, f64::NEG_INFINITY);
        assert_eq!(luxemburg_norm(&g, &z, &p, NormVariant::Weighted), 0.0);
        assert_eq!(gradient_norm(&g, &z, &p, NormVariant::Classical), 0.0);
    }

    #[test]
    fn luxemburg_constant_field() {
        let g = square(16);
        let p2 = ExponentField::constant(2.0, &g).unwrap();
        let one = constant(&g, 1.0);
        let w = luxemburg_norm(&g, &one, &p2, NormVariant::Weighted);
        assert!((w - 0.5f64.sqrt()).abs() < 1e-14);
        let c = luxemburg_norm(&g, &one, &p2, NormVariant::Classical);
        assert!((c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn luxemburg_linear_field_cubic_exponent() {
        // centroid quadrature of ∫ x^3 on the mesh, then the closed form
        let g = square(32);
        let p3 = ExponentField::constant(3.0, &g).unwrap();
        let u = g.interpolate(|x, _| x, false);
        let quad: f64 = g.tri_centroid.iter().zip(&g.tri_area).map(|(c, a)| a * c[0].powi(3)).sum();
        let exact = 3f64.powf(-1.0 / 3.0) * quad.cbrt();
        let got = luxemburg_norm(&g, &u, &p3, NormVariant::Weighted);
        assert!((got / exact - 1.0).abs() < 1e-13);
        // and the continuum value 3^{-1/3} (1/4)^{1/3}
        assert!((got - 0.4368).abs() < 1e-3);
    }

    #[test]
    fn norm_is_the_modular_root_at_extreme_exponents() {
        let g = square(16);
        for e in [1.01, 2.0, 40.0, 256.0] {
            let p = ExponentField::constant(e, &g).unwrap();
            let u = g.interpolate(|x, y| 1e-3 + 1e3 * x * y * (1.0 - x), false);
            let n = luxemburg_norm(&g, &u, &p, NormVariant::Weighted);
            let m = modular(&g, &u, &p, n, NormVariant::Weighted);
            assert!(m.log_value.abs() < 1e-12, "p = {e}: {}", m.log_value);
        }
    }

    #[test]
    fn sup_derivative_on_tied_maxima() {
        let g = square(8);
        let mut u = ScalarField::zeros(&g);
        let mut eta = ScalarField::zeros(&g);
        u.values[10] = 2.0;
        u.values[20] = -2.0;
        u.values[30] = 1.0;
        eta.values[10] = 0.3;
        eta.values[20] = -0.7;
        eta.values[30] = 5.0;
        let d = sup_directional_derivative(&u, &eta, DEFAULT_TIE_TOL).unwrap();
        assert_eq!(d, 0.7);
        u.values[20] = 0.0;
        assert_eq!(sup_directional_derivative(&u, &eta, DEFAULT_TIE_TOL).unwrap(), 0.3);
        assert!(matches!(
            sup_directional_derivative(&ScalarField::zeros(&g), &eta, DEFAULT_TIE_TOL),
            Err(Error::ZeroField)
        ));
    }
}
