mod common;

use common::*;
use varexp::asymptotics::{direct_mu, sweep_j, sweep_l, MuOptions};
use varexp::error::Error;
use varexp::exponents::ExponentField;
use varexp::geometry::Shape;
use varexp::rayleigh::MinimizeOptions;

#[test]
fn j_sweep_rows_respect_their_bounds() {
    let g = grid(Shape::Rectangle { w: 2.0, h: 1.0 }, 12);
    let p = exponent("2 + x/4", &g);
    let q = ExponentField::constant(2.0, &g).unwrap();
    let rep = sweep_j(&g, 3, &p, &q, &[1, 2, 4, 8], &MinimizeOptions::default(), &MuOptions::default()).unwrap();
    assert_eq!(rep.rows.len(), 4);
    for r in &rep.rows {
        assert!(r.converged, "j = {}", r.index);
        assert!(r.lower_bound <= r.eigenvalue_estimate, "j = {}: {} > {}", r.index, r.lower_bound, r.eigenvalue_estimate);
        assert!(r.eigenvalue_estimate <= r.upper_bound * (1.0 + 1e-9));
        assert!(rel(r.gap_to_limit, (r.eigenvalue_estimate - rep.limit_value).abs()) < 1e-12);
    }
    // the q-norm grows with j on a domain of area 2, so the estimates fall
    assert!(rep.rows.windows(2).all(|w| w[1].eigenvalue_estimate <= w[0].eigenvalue_estimate * (1.0 + 1e-6)));
    assert!(rep.last_extremal.is_some());
}

#[test]
fn l_sweep_approaches_the_inverse_distance_maximum() {
    let g = grid(Shape::Disk { r: 1.0 }, 16);
    let p = exponent("2 + (x^2+y^2)/2", &g);
    let rep = sweep_l(&g, &p, &[2, 4, 8], &MuOptions::default()).unwrap();
    assert_eq!(rep.limit_value, 1.0);
    for r in &rep.rows {
        assert!(r.converged);
        assert!(r.eigenvalue_estimate <= r.upper_bound * (1.0 + 1e-9));
        assert!(r.el_residual < 1e-2);
        assert!(r.sign_undershoot < 1e-6);
    }
    let gaps: Vec<f64> = rep.rows.iter().map(|r| r.gap_to_limit).collect();
    assert!(gaps[2] < gaps[0], "{gaps:?}");
}

#[test]
fn direct_mu_satisfies_the_dirac_identity() {
    for shape in [Shape::Rectangle { w: 1.0, h: 1.0 }, Shape::Ellipse { a: 1.0, b: 0.6 }] {
        let g = grid(shape, 16);
        let lp = exponent("2 + x*y", &g).rescaled(&g, 6).unwrap();
        let r = direct_mu(&g, &lp, &MuOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.dirac_residual < 1e-2);
        assert!(rel(r.mu_from_identity, r.mu) < 1e-6);
        assert!((r.w.values[r.x0] - 1.0).abs() < 1e-12);
        assert!(r.w.values.iter().all(|v| *v <= 1.0 + 1e-12));
    }
}

#[test]
fn invalid_lists_and_exponent_cap_are_rejected() {
    let g = unit_square(8);
    let p = exponent("2", &g);
    let (mo, mu) = (MinimizeOptions::default(), MuOptions::default());
    fn bad<T>(r: Result<T, Error>) -> bool {
        matches!(r, Err(Error::InvalidArgument(_)))
    }
    assert!(bad(sweep_l(&g, &p, &[], &mu)));
    assert!(bad(sweep_l(&g, &p, &[4, 4], &mu)));
    assert!(bad(sweep_l(&g, &p, &[1, 4], &mu)));
    assert!(bad(sweep_l(&g, &p, &[64, 200], &mu)));
    assert!(bad(sweep_j(&g, 1, &p, &p, &[1, 2], &mo, &mu)));
    assert!(bad(sweep_j(&g, 4, &p, &p, &[2, 1], &mo, &mu)));
    assert!(bad(sweep_j(&g, 4, &p, &p, &[1, 200], &mo, &mu)));
    assert!(bad(direct_mu(&g, &p.rescaled(&g, 129).unwrap(), &mu)));
}
