//! Distance to the boundary, `Λ_∞ = 1/‖d‖_∞`, ridge detection and the
//! eikonal check.

use serde::Serialize;

use crate::geometry::dist2;
use crate::grid::{sup_and_argmax, ScalarField, TriGrid, DEFAULT_TIE_TOL};

pub const DEFAULT_ANGLE_TOL_DEG: f64 = 30.0;
pub const DEFAULT_DIST_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct DistanceResult {
    #[serde(skip)]
    pub d: ScalarField,
    pub d_max: f64,
    pub lambda_inf: f64,
    pub argmax_nodes: Vec<usize>,
    pub ridge_nodes: Vec<usize>,
    pub ridge_is_singleton: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ridge {
    pub nodes: Vec<usize>,
    pub singleton: bool,
}

/// Analytic boundary distance at the interior nodes, 0 on Dirichlet nodes.
pub fn distance_field(grid: &TriGrid) -> DistanceResult {
    let shape = &grid.spec.shape;
    let d = grid.interpolate(|x, y| shape.distance([x, y]), true);
    let (d_max, argmax_nodes) = sup_and_argmax(&d.values, DEFAULT_TIE_TOL);
    let ridge = detect_ridge(grid, DEFAULT_ANGLE_TOL_DEG, DEFAULT_DIST_TOL);
    DistanceResult {
        d,
        d_max,
        lambda_inf: 1.0 / d_max,
        argmax_nodes,
        ridge_nodes: ridge.nodes,
        ridge_is_singleton: ridge.singleton,
    }
}

/// Nodes with two nearest boundary points (up to `dist_tol`) seen under an
/// angle above `angle_tol_deg`, together with the maximizers of `d`.
pub fn detect_ridge(grid: &TriGrid, angle_tol_deg: f64, dist_tol: f64) -> Ridge {
    let shape = &grid.spec.shape;
    let features = shape.features();
    let cos_tol = angle_tol_deg.to_radians().cos();
    let mut flags = vec![false; grid.node_count()];
    let mut d_max: f64 = 0.0;
    let mut dvals = vec![0.0; grid.node_count()];
    for (i, &x) in grid.nodes.iter().enumerate() {
        if !grid.interior[i] {
            continue;
        }
        let d = shape.distance(x);
        dvals[i] = d;
        d_max = d_max.max(d);
        if d <= 0.0 {
            continue;
        }
        let near: Vec<[f64; 2]> = features
            .iter()
            .map(|f| f.project(x))
            .filter(|&y| dist2(x, y).sqrt() <= (1.0 + dist_tol) * d + 1e-14)
            .map(|y| [(y[0] - x[0]) / d, (y[1] - x[1]) / d])
            .collect();
        'pairs: for a in 0..near.len() {
            for b in a + 1..near.len() {
                let (u, v) = (near[a], near[b]);
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                if cos < cos_tol {
                    flags[i] = true;
                    break 'pairs;
                }
            }
        }
    }
    for (i, &d) in dvals.iter().enumerate() {
        if d_max > 0.0 && d >= d_max * (1.0 - DEFAULT_TIE_TOL) {
            flags[i] = true;
        }
    }
    let nodes: Vec<usize> = (0..flags.len()).filter(|&i| flags[i]).collect();
    let mut diam2: f64 = 0.0;
    for (k, &a) in nodes.iter().enumerate() {
        for &b in &nodes[k + 1..] {
            diam2 = diam2.max(dist2(grid.nodes[a], grid.nodes[b]));
            if diam2.sqrt() >= 3.0 * grid.h {
                break;
            }
        }
    }
    let singleton = !nodes.is_empty() && diam2.sqrt() < 3.0 * grid.h;
    Ridge { nodes, singleton }
}

/// Max of `||∇d| − 1|` over triangles with all vertices interior and at
/// least `exclusion` away from every ridge node (`exclusion = 3h` by default).
pub fn eikonal_check(grid: &TriGrid, d: &ScalarField, ridge: &[usize], exclusion: f64) -> f64 {
    let far = far_from(grid, ridge, exclusion);
    grid.gradient(d)
        .iter()
        .zip(&grid.triangles)
        .filter(|(_, t)| t.iter().all(|&k| grid.interior[k] && far[k]))
        .map(|(g, _)| (g[0].hypot(g[1]) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Discrete `‖∇d‖_∞ / ‖d‖_∞` for the interpolant of the analytic distance,
/// over the triangles whose vertices lie in the closed shape and at least
/// `exclusion` away from the ridge (where `d` has kinks).
pub fn discrete_lipschitz_quotient(grid: &TriGrid, ridge: &[usize], exclusion: f64) -> f64 {
    let shape = &grid.spec.shape;
    let tol = 1e-9 * grid.h;
    let far = far_from(grid, ridge, exclusion);
    let d = grid.interpolate(|x, y| shape.distance([x, y]), false);
    let gmax = grid
        .gradient(&d)
        .iter()
        .zip(&grid.triangles)
        .filter(|(_, t)| t.iter().all(|&k| far[k] && shape.contains(grid.nodes[k], tol)))
        .map(|(g, _)| g[0].hypot(g[1]))
        .fold(0.0, f64::max);
    let (sup, _) = grid.sup_norm_and_argmax(&d, DEFAULT_TIE_TOL);
    gmax / sup
}

fn far_from(grid: &TriGrid, ridge: &[usize], radius: f64) -> Vec<bool> {
    grid.nodes
        .iter()
        .map(|&x| ridge.iter().all(|&r| dist2(x, grid.nodes[r]) >= radius * radius))
        .collect()
}
