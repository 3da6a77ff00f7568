//! Damped Newton solver for `min ρ(∇v/γ)` over zero-trace `v` subject to a
//! single linear constraint `⟨c, v⟩ = 1`.
//!
//! This is the inner step of the nonlinear inverse iteration used for both
//! the Rayleigh quotient and the sup-norm problem.

use crate::banded::BandMatrix;
use crate::error::Result;
use crate::grid::TriGrid;

/// Numbering of the interior (free) nodes in lattice order.
#[derive(Clone, Debug)]
pub struct Dofs {
    pub nodes: Vec<usize>,
    /// `usize::MAX` for Dirichlet nodes.
    pub of_node: Vec<usize>,
    pub bandwidth: usize,
}

pub const NO_DOF: usize = usize::MAX;

impl Dofs {
    pub fn new(grid: &TriGrid) -> Self {
        let nodes = grid.interior_nodes();
        let mut of_node = vec![NO_DOF; grid.node_count()];
        for (k, &n) in nodes.iter().enumerate() {
            of_node[n] = k;
        }
        let mut bandwidth = 0;
        for t in &grid.triangles {
            for a in t {
                for b in t {
                    let (da, db) = (of_node[*a], of_node[*b]);
                    if da != NO_DOF && db != NO_DOF && da > db {
                        bandwidth = bandwidth.max(da - db);
                    }
                }
            }
        }
        Self { nodes, of_node, bandwidth }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&n| full[n]).collect()
    }

    pub fn scatter(&self, x: &[f64], node_count: usize) -> Vec<f64> {
        let mut out = vec![0.0; node_count];
        for (&n, &v) in self.nodes.iter().zip(x) {
            out[n] = v;
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub max_steps: usize,
    /// Stop once the Newton decrement falls below `rel_tol * ρ`.
    pub rel_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_steps: 40, rel_tol: 1e-13 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    /// Minimizer on the free nodes.
    pub v: Vec<f64>,
    /// `ln ρ(∇v/γ)` at the returned point.
    pub log_objective: f64,
    pub steps: usize,
}

/// Problem data shared by the Newton steps.
pub struct ModularProblem<'a> {
    pub grid: &'a TriGrid,
    pub dofs: &'a Dofs,
    /// Exponent per triangle.
    pub exps: &'a [f64],
    pub gamma: f64,
    /// Stiffness matrix of the Laplacian, used as a regularizer.
    pub laplacian: &'a BandMatrix,
}

pub fn laplacian(grid: &TriGrid, dofs: &Dofs) -> BandMatrix {
    let mut a = BandMatrix::zeros(dofs.len(), dofs.bandwidth);
    for ((t, g), &area) in grid.triangles.iter().zip(&grid.tri_hat_grad).zip(&grid.tri_area) {
        for i in 0..3 {
            let di = dofs.of_node[t[i]];
            if di == NO_DOF {
                continue;
            }
            for j in 0..=i {
                let dj = dofs.of_node[t[j]];
                if dj == NO_DOF {
                    continue;
                }
                a.add(di, dj, area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
            }
        }
    }
    a
}

struct Local {
    grads: Vec<[f64; 2]>,
    log_f: f64,
}

impl ModularProblem<'_> {
    fn local(&self, v: &[f64]) -> Local {
        let full = self.dofs.scatter(v, self.grid.node_count());
        let grads = self.grid.gradient_of(&full);
        let lg = self.gamma.ln();
        // ln(a/p) + p ln(|g|/γ) per triangle, -inf where g = 0
        let terms: Vec<f64> = grads
            .iter()
            .zip(&self.grid.tri_area)
            .zip(self.exps)
            .map(|((g, &a), &p)| {
                let s = g[0].hypot(g[1]);
                if s == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (a / p).ln() + p * (s.ln() - lg)
                }
            })
            .collect();
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_f = if m == f64::NEG_INFINITY {
            m
        } else {
            m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
        };
        Local { grads, log_f }
    }

    pub fn log_objective(&self, v: &[f64]) -> f64 {
        self.local(v).log_f
    }

    /// Minimizes from a feasible start `v0` (`⟨c, v0⟩ = 1`).
    pub fn minimize(&self, c: &[f64], v0: Vec<f64>, opts: NewtonOptions) -> Result<NewtonOutcome> {
        let n = self.dofs.len();
        let mut v = v0;
        let mut cur = self.local(&v);
        let mut steps = 0;
        let diag_l = self.laplacian.diagonal().into_iter().fold(0.0, f64::max);
        while steps < opts.max_steps {
            if cur.log_f == f64::NEG_INFINITY {
                break;
            }
            // everything below is scaled by exp(-log_f), so ρ itself is 1
            let m = cur.log_f;
            let mut grad = vec![0.0; n];
            let mut hess = BandMatrix::zeros(n, self.dofs.bandwidth);
            let s_max = cur
                .grads
                .iter()
                .map(|g| g[0].hypot(g[1]))
                .fold(0.0, f64::max)
                / self.gamma;
            let s_floor = 1e-6 * s_max;
            for (k, t) in self.grid.triangles.iter().enumerate() {
                let p = self.exps[k];
                let a = self.grid.tri_area[k];
                let g = cur.grads[k];
                let s = g[0].hypot(g[1]) / self.gamma;
                let hg = &self.grid.tri_hat_grad[k];
                let n_vec = if s > 0.0 { [g[0] / (s * self.gamma), g[1] / (s * self.gamma)] } else { [0.0, 0.0] };
                // (a/p) s^p e^{-m} has derivative a s^{p-1} e^{-m} n / γ
                let gcoef = if s > 0.0 { (a.ln() + (p - 1.0) * s.ln() - m).exp() / self.gamma } else { 0.0 };
                let se = s.max(s_floor);
                if se == 0.0 {
                    continue;
                }
                let hcoef = (a.ln() + (p - 2.0) * se.ln() - m).exp() / (self.gamma * self.gamma);
                let pm2 = if s > 0.0 { p - 2.0 } else { 0.0 };
                for i in 0..3 {
                    let di = self.dofs.of_node[t[i]];
                    if di == NO_DOF {
                        continue;
                    }
                    let ndi = n_vec[0] * hg[i][0] + n_vec[1] * hg[i][1];
                    grad[di] += gcoef * ndi;
                    for j in 0..=i {
                        let dj = self.dofs.of_node[t[j]];
                        if dj == NO_DOF {
                            continue;
                        }
                        let ndj = n_vec[0] * hg[j][0] + n_vec[1] * hg[j][1];
                        let dot = hg[i][0] * hg[j][0] + hg[i][1] * hg[j][1];
                        hess.add(di, dj, hcoef * (dot + pm2 * ndi * ndj));
                    }
                }
            }
            let diag_h = hess.diagonal().into_iter().fold(0.0, f64::max);
            let tau = if diag_h > 0.0 && diag_l > 0.0 { 1e-9 * diag_h / diag_l } else { 1.0 };
            hess.add_scaled(tau, self.laplacian);
            let chol = hess.cholesky()?;
            let z1 = chol.solve(&grad);
            let z2 = chol.solve(c);
            let cz1: f64 = c.iter().zip(&z1).map(|(a, b)| a * b).sum();
            let cz2: f64 = c.iter().zip(&z2).map(|(a, b)| a * b).sum();
            let lambda = cz1 / cz2;
            let d: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| lambda * b - a).collect();
            let decrement: f64 = -grad.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
            if !(decrement > opts.rel_tol) {
                break;
            }
            steps += 1;
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let loc = self.local(&trial);
                // ρ_trial/ρ_cur <= 1 - c1 t δ   (everything relative to ρ_cur)
                let ratio = (loc.log_f - m).exp();
                if ratio <= 1.0 - 1e-4 * t * decrement {
                    accepted = Some((trial, loc));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, loc)) => {
                    v = trial;
                    cur = loc;
                }
                None => break,
            }
        }
        // re-impose the constraint exactly against rounding drift
        let cv: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
        if cv.is_finite() && cv > 0.0 {
            for x in &mut v {
                *x /= cv;
            }
            cur = self.local(&v);
        }
        Ok(NewtonOutcome { v, log_objective: cur.log_f, steps })
    }
}
