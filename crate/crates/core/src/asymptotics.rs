//! The sup-norm problem `μ_l = min ‖∇u‖_{lp(x)} / ‖u‖_∞` and the two
//! exponent sweeps `Λ_{l,j} → μ_l` (j → ∞) and `μ_l → 1/‖d‖_∞` (l → ∞).

use serde::Serialize;

use crate::distance::distance_field;
use crate::error::{Error, Result};
use crate::exponents::ExponentField;
use crate::grid::{sup_and_argmax, ScalarField, TriGrid, DEFAULT_TIE_TOL};
use crate::modular::{gradient_norm_of_values, norm_of_values, NormVariant};
use crate::rayleigh::{
    canonical_sign, gradient_dual, lattice_neighbors, middle_of, minimize_with, probe_nodes, stalled, Init,
    MinimizeOptions, Workspace,
};
use crate::subproblem::NewtonOptions;

/// Largest scaled exponent accepted by the sweeps.
pub const MAX_EXPONENT: f64 = 256.0;

#[derive(Clone, Debug)]
pub struct MuOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub dirac_tol: f64,
    /// Start field; `Init::Random` is treated as the distance start.
    pub init: Init,
    /// Try lattice neighbours of the max point after convergence.
    pub refine_max_point: bool,
    pub newton: NewtonOptions,
}

impl Default for MuOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            dirac_tol: 1e-2,
            init: Init::Distance,
            refine_max_point: true,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MuResult {
    #[serde(skip)]
    pub w: ScalarField,
    pub mu: f64,
    pub x0: usize,
    pub x0_coords: [f64; 2],
    /// `Σ_T area |∇w/K|^{lp}` (the factor in front of the Dirac mass).
    pub s_l: f64,
    pub dirac_residual: f64,
    /// `μ` recovered from the weak equation tested with `η = w`.
    pub mu_from_identity: f64,
    pub max_set_size: usize,
    pub singleton: bool,
    pub sign_undershoot: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

fn check_cap(p: &ExponentField) -> Result<()> {
    if p.p_plus > MAX_EXPONENT {
        return Err(Error::InvalidArgument(format!(
            "scaled exponent reaches {} (cap {MAX_EXPONENT})",
            p.p_plus
        )));
    }
    Ok(())
}

/// Dirac-form residual `max_φ |dK(w; φ) − μ φ(x0)| / μ` over the probe hats
/// plus the hat at `x0`; returns `(residual, S_l, μ from η = w)`.
fn dirac_check(grid: &TriGrid, w: &[f64], lp: &ExponentField, x0: usize) -> (f64, f64, f64) {
    let gd = gradient_dual(grid, w, lp, NormVariant::Weighted);
    let big_k = gd.parts.norm;
    let wmax = w[x0];
    let mu = big_k / wmax;
    let dk = gd.nodal(grid);
    let mut probes = probe_nodes(grid);
    if !probes.contains(&x0) {
        probes.push(x0);
    }
    let res = probes
        .iter()
        .map(|&i| (dk[i] - if i == x0 { mu } else { 0.0 }).abs())
        .fold(0.0, f64::max)
        / mu;
    let s_l = gd.parts.shift.exp() * gd.parts.denom;
    // testing with η = w: ∫|∇w/K|^{p-2}(∇w/K)·∇w = μ S_l w(x0)
    let lhs = gd.directional(grid, w) * s_l;
    let mu_id = lhs / (s_l * wmax);
    (res, s_l, mu_id)
}

/// Minimizes `‖∇u‖_{lp(x)}` over zero-trace fields with `‖u‖_∞ = 1`.
pub fn direct_mu(grid: &TriGrid, lp: &ExponentField, opts: &MuOptions) -> Result<MuResult> {
    direct_mu_with(&Workspace::new(grid), lp, opts)
}

pub fn direct_mu_with(ws: &Workspace, lp: &ExponentField, opts: &MuOptions) -> Result<MuResult> {
    check_cap(lp)?;
    let grid = ws.grid;
    if ws.dofs.is_empty() {
        return Err(Error::InvalidDomain("grid has no interior nodes".into()));
    }
    let mut u = match &opts.init {
        Init::Given(f) => {
            if f.len() != grid.node_count() {
                return Err(Error::Dimension { expected: grid.node_count(), got: f.len() });
            }
            grid.zero_trace(f).values
        }
        _ => ws.distance_start().values,
    };
    canonical_sign(&mut u);
    let (sup, set) = sup_and_argmax(&u, DEFAULT_TIE_TOL);
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    let mut x0 = middle_of(grid, &set);
    u.iter_mut().for_each(|v| *v /= sup);
    let mut trace = vec![gradient_norm_of_values(grid, &u, lp, NormVariant::Weighted) / u[x0]];
    let mut iterations = 0;
    let mut converged = false;

    // one constrained solve with v(y) = 1, warm-started from u
    let solve = |u: &[f64], y: usize, gamma: f64| -> Result<Vec<f64>> {
        let mut c = vec![0.0; ws.dofs.len()];
        c[ws.dofs.of_node[y]] = 1.0;
        let v0: Vec<f64> = ws.dofs.gather(u).iter().map(|v| v / u[y]).collect();
        let out = ws.problem(&lp.samples, gamma).minimize(&c, v0, opts.newton)?;
        Ok(ws.dofs.scatter(&out.v, grid.node_count()))
    };
    // normalized candidate and its quotient
    let finish = |mut v: Vec<f64>| -> (Vec<f64>, usize, f64) {
        let (sup, set) = sup_and_argmax(&v, DEFAULT_TIE_TOL);
        let x = middle_of(grid, &set);
        v.iter_mut().for_each(|a| *a /= sup);
        let q = gradient_norm_of_values(grid, &v, lp, NormVariant::Weighted);
        (v, x, q)
    };

    'outer: loop {
        while iterations < opts.max_iter {
            iterations += 1;
            let gamma = gradient_norm_of_values(grid, &u, lp, NormVariant::Weighted);
            let (v, x_new, q) = finish(solve(&u, x0, gamma)?);
            if q > *trace.last().unwrap() * (1.0 + 1e-12) {
                break;
            }
            u = v;
            x0 = x_new;
            trace.push(q);
            let dirac = dirac_check(grid, &u, lp, x0).0;
            if stalled(&trace, opts.tol) && dirac < opts.dirac_tol {
                converged = true;
                break;
            }
        }
        if !opts.refine_max_point || iterations >= opts.max_iter {
            break;
        }
        let gamma = gradient_norm_of_values(grid, &u, lp, NormVariant::Weighted);
        let current = *trace.last().unwrap();
        let mut best: Option<(Vec<f64>, usize, f64)> = None;
        for y in lattice_neighbors(grid, ws, x0) {
            if u[y] <= 0.0 {
                continue;
            }
            let cand = finish(solve(&u, y, gamma)?);
            if cand.2 < current * (1.0 - 1e-9) && best.as_ref().is_none_or(|b| cand.2 < b.2) {
                best = Some(cand);
            }
        }
        match best {
            Some((v, x, q)) => {
                log::debug!("max point moved to node {x}: {current} -> {q}");
                u = v;
                x0 = x;
                trace.push(q);
                converged = false;
                continue 'outer;
            }
            None => break,
        }
    }

    let sign_undershoot = canonical_sign(&mut u);
    let (sup, set) = sup_and_argmax(&u, DEFAULT_TIE_TOL);
    u.iter_mut().for_each(|v| *v /= sup);
    x0 = middle_of(grid, &set);
    let (dirac, s_l, mu_id) = dirac_check(grid, &u, lp, x0);
    let mu = gradient_norm_of_values(grid, &u, lp, NormVariant::Weighted);
    Ok(MuResult {
        w: ScalarField { values: u, zero_trace: true },
        mu,
        x0,
        x0_coords: grid.nodes[x0],
        s_l,
        dirac_residual: dirac,
        mu_from_identity: mu_id,
        max_set_size: set.len(),
        singleton: set.len() == 1,
        sign_undershoot,
        iterations,
        converged,
        trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    MuL,
    LambdaInfinity,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub index: u32,
    pub eigenvalue_estimate: f64,
    pub sup_norm_of_extremal: f64,
    pub argmax: [f64; 2],
    pub gap_to_limit: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// j-sweep: `μ_l |Ω|^{−α_j}`; l-sweep: unused (NaN is not serialized, so 0).
    pub lower_bound: f64,
    /// j-sweep: quotient of the distance function; l-sweep: `‖∇d‖_{lp}/‖d‖_∞`.
    pub upper_bound: f64,
    /// l-sweep only: `‖w_l − d/‖d‖_∞‖_∞`.
    pub dist_to_distance: f64,
    /// l-sweep only: `max(w_l − d/‖d‖_∞, 0)`.
    pub bound_violation: f64,
    pub singleton: bool,
    pub sign_undershoot: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub limit_value: f64,
    pub limit_kind: LimitKind,
    /// Extremal of the last row.
    #[serde(skip)]
    pub last_extremal: Option<ScalarField>,
}

fn check_increasing(list: &[u32], min: u32, what: &str) -> Result<()> {
    if list.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    if list[0] < min {
        return Err(Error::InvalidArgument(format!("{what} must start at {min} or above")));
    }
    if list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

/// `α_j`: `1/(j q⁺)` when `|Ω| ≤ 1`, else `1/(j q⁻)` (with `jq` already scaled).
pub fn alpha_j(area: f64, jq: &ExponentField) -> f64 {
    if area <= 1.0 {
        1.0 / jq.p_plus
    } else {
        1.0 / jq.p_minus
    }
}

/// `Λ_{l,j}` for each `j`, warm-started down the list, against `μ_l` from [`direct_mu`].
pub fn sweep_j(
    grid: &TriGrid,
    l: u32,
    p: &ExponentField,
    q: &ExponentField,
    j_list: &[u32],
    min_opts: &MinimizeOptions,
    mu_opts: &MuOptions,
) -> Result<SweepReport> {
    if l < 2 {
        return Err(Error::InvalidArgument("l must be at least 2".into()));
    }
    check_increasing(j_list, 1, "j_list")?;
    let ws = Workspace::new(grid);
    let lp = p.rescaled(grid, l * p.scale)?;
    check_cap(&lp)?;
    let mu = direct_mu_with(&ws, &lp, mu_opts)?;
    let area = grid.total_area();
    let d = ws.distance_start();
    let mut rows = Vec::new();
    let mut warm: Option<ScalarField> = None;
    for &j in j_list {
        let jq = q.rescaled(grid, j * q.scale)?;
        check_cap(&jq)?;
        let mut opts = min_opts.clone();
        if let Some(w) = &warm {
            opts.init = Init::Given(w.clone());
            opts.restarts = 0;
        }
        let r = minimize_with(&ws, &lp, &jq, &opts)?;
        if !r.converged {
            log::warn!("j = {j}: minimization did not converge in {} iterations", r.iterations);
        }
        let (sup, _) = sup_and_argmax(&r.minimizer.values, DEFAULT_TIE_TOL);
        let upper = gradient_norm_of_values(grid, &d.values, &lp, NormVariant::Weighted)
            / norm_of_values(grid, &d.values, &jq, NormVariant::Weighted);
        rows.push(SweepRow {
            index: j,
            eigenvalue_estimate: r.lambda,
            sup_norm_of_extremal: sup,
            argmax: r.argmax,
            gap_to_limit: (r.lambda - mu.mu).abs(),
            el_residual: r.el_residual,
            iterations: r.iterations,
            converged: r.converged,
            lower_bound: mu.mu * area.powf(-alpha_j(area, &jq)),
            upper_bound: upper,
            dist_to_distance: 0.0,
            bound_violation: 0.0,
            singleton: r.minimizer.values.iter().filter(|v| **v >= sup * (1.0 - DEFAULT_TIE_TOL)).count() == 1,
            sign_undershoot: r.sign_undershoot,
        });
        warm = Some(r.minimizer);
    }
    Ok(SweepReport { rows, limit_value: mu.mu, limit_kind: LimitKind::MuL, last_extremal: warm })
}

/// `μ_l` for each `l`, warm-started down the list, against `Λ_∞ = 1/‖d‖_∞`.
pub fn sweep_l(grid: &TriGrid, p: &ExponentField, l_list: &[u32], mu_opts: &MuOptions) -> Result<SweepReport> {
    check_increasing(l_list, 2, "l_list")?;
    let ws = Workspace::new(grid);
    let dist = distance_field(grid);
    let d_hat: Vec<f64> = grid.zero_trace(&dist.d).values.iter().map(|v| v / dist.d_max).collect();
    let mut rows = Vec::new();
    let mut warm: Option<ScalarField> = None;
    for &l in l_list {
        let lp = p.rescaled(grid, l * p.scale)?;
        check_cap(&lp)?;
        let mut opts = mu_opts.clone();
        if let Some(w) = &warm {
            opts.init = Init::Given(w.clone());
        }
        let r = direct_mu_with(&ws, &lp, &opts)?;
        if !r.converged {
            log::warn!("l = {l}: sup-norm problem did not converge in {} iterations", r.iterations);
        }
        let diff = r.w.values.iter().zip(&d_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let viol = r.w.values.iter().zip(&d_hat).map(|(a, b)| a - b).fold(0.0, f64::max);
        let upper = gradient_norm_of_values(grid, &d_hat, &lp, NormVariant::Weighted);
        rows.push(SweepRow {
            index: l,
            eigenvalue_estimate: r.mu,
            sup_norm_of_extremal: 1.0,
            argmax: r.x0_coords,
            gap_to_limit: (r.mu - dist.lambda_inf).abs(),
            el_residual: r.dirac_residual,
            iterations: r.iterations,
            converged: r.converged,
            lower_bound: 0.0,
            upper_bound: upper,
            dist_to_distance: diff,
            bound_violation: viol,
            singleton: r.singleton,
            sign_undershoot: r.sign_undershoot,
        });
        warm = Some(r.w);
    }
    Ok(SweepReport { rows, limit_value: dist.lambda_inf, limit_kind: LimitKind::LambdaInfinity, last_extremal: warm })
}
