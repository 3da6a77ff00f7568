mod common;

use common::*;
use varexp::exponents::ExponentField;
use varexp::geometry::Shape;
use varexp::grid::{ScalarField, TriGrid};
use varexp::modular::{gradient_norm, luxemburg_norm, NormVariant};
use varexp::rayleigh::{evaluate_quotient, minimize_quotient, Init, MinimizeOptions};

/// `(∫|∇v|^p)^{1/p}` from vertex coordinates, without the library's element data.
fn lp_gradient(g: &TriGrid, v: &ScalarField, p: f64) -> f64 {
    let mut s = 0.0;
    for t in &g.triangles {
        let [a, b, c] = t.map(|i| g.nodes[i]);
        let (e1, e2) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        let (d1, d2) = (v.values[t[1]] - v.values[t[0]], v.values[t[2]] - v.values[t[0]]);
        let gx = (d1 * e2[1] - d2 * e1[1]) / det;
        let gy = (d2 * e1[0] - d1 * e2[0]) / det;
        s += 0.5 * det.abs() * gx.hypot(gy).powf(p);
    }
    s.powf(1.0 / p)
}

fn lp_value(g: &TriGrid, v: &ScalarField, p: f64) -> f64 {
    let s: f64 = centroid_values(g, v).iter().zip(&g.tri_area).map(|(c, a)| a * c.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

#[test]
fn constant_exponents_reduce_to_classical_quotient() {
    let g = unit_square(24);
    let p = ExponentField::constant(3.0, &g).unwrap();
    let q = ExponentField::constant(2.0, &g).unwrap();
    let r = minimize_quotient(&g, &p, &q, &MinimizeOptions::default()).unwrap();
    assert!(r.converged);
    let v = &r.minimizer;
    let want = 2f64.powf(0.5) / 3f64.powf(1.0 / 3.0) * lp_gradient(&g, v, 3.0) / lp_value(&g, v, 2.0);
    assert!(rel(r.lambda, want) < 1e-6, "{} vs {want}", r.lambda);
    // minimality against explicit competitors
    for u in [
        g.interpolate(|x, y| x.min(1.0 - x).min(y).min(1.0 - y), true),
        g.interpolate(|x, y| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin(), true),
        g.interpolate(|x, y| x * (1.0 - x) * y * (1.0 - y), true),
    ] {
        assert!(r.lambda <= evaluate_quotient(&g, &u, &p, &q).unwrap().quotient);
    }
}

#[test]
fn weighted_and_classical_quotients_are_comparable() {
    let g = grid(Shape::Disk { r: 1.0 }, 20);
    let p = exponent("2 + x", &g);
    let q = exponent("1.5 + y^2", &g);
    let r = minimize_quotient(&g, &p, &q, &MinimizeOptions::default()).unwrap();
    let u = &r.minimizer;
    let classical = gradient_norm(&g, u, &p, NormVariant::Classical) / luxemburg_norm(&g, u, &q, NormVariant::Classical);
    assert!(classical / p.p_plus <= r.lambda && r.lambda <= q.p_plus * classical);
    // the extremal is sign-constant with its maximum inside
    assert!(u.values.iter().all(|v| *v >= 0.0));
    assert!(r.sign_undershoot < 1e-6);
}

#[test]
fn trace_is_monotone_and_runs_are_reproducible() {
    let g = unit_square(16);
    let p = exponent("2 + x*y", &g);
    let q = exponent("3 + sin(3*x)*cos(2*y)", &g);
    let opts = MinimizeOptions { init: Init::Random, restarts: 2, seed: 42, ..Default::default() };
    let a = minimize_quotient(&g, &p, &q, &opts).unwrap();
    assert!(a.trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert_eq!(a.restart_lambdas.len(), 3);
    let b = minimize_quotient(&g, &p, &q, &opts).unwrap();
    assert_eq!(a.minimizer, b.minimizer);
    assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    assert_eq!(a.trace, b.trace);
    // other seeds reach the same minimum
    let c = minimize_quotient(&g, &p, &q, &MinimizeOptions { seed: 7, ..opts }).unwrap();
    assert!(rel(c.lambda, a.lambda) < 1e-4, "{} vs {}", c.lambda, a.lambda);
    for l in &a.restart_lambdas {
        assert!(rel(*l, a.lambda) < 1e-4);
    }
}

#[test]
fn minimizer_is_positive_on_nonconvex_domains() {
    let g = grid(Shape::Lshape { w: 1.0, h: 1.0, notch_w: 0.5, notch_h: 0.5 }, 16);
    let p = ExponentField::constant(2.0, &g).unwrap();
    let r = minimize_quotient(&g, &p, &p, &MinimizeOptions::default()).unwrap();
    assert!(r.converged);
    assert!(r.el_residual < 1e-3);
    let interior_min = g.interior_nodes().iter().map(|&i| r.minimizer.values[i]).fold(f64::INFINITY, f64::min);
    assert!(interior_min > 0.0);
}
