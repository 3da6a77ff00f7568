//! Masked structured triangulations and piecewise-linear field calculus.
//!
//! The bounding box of the shape is covered by a uniform lattice; every cell
//! is cut along its rising diagonal into two right triangles. A triangle is
//! kept when its centroid lies in the closed shape. Nodes inside the shape
//! whose full six-triangle star is kept carry unknowns; every other node is
//! a Dirichlet node with value 0.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

/// Default relative tie tolerance for discrete max-point sets.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct TriGrid {
    pub spec: DomainSpec,
    /// Number of lattice cells in x and y.
    pub cells: [usize; 2],
    pub origin: [f64; 2],
    pub hx: f64,
    pub hy: f64,
    /// Largest cell side.
    pub h: f64,
    pub nodes: Vec<[f64; 2]>,
    pub interior: Vec<bool>,
    pub triangles: Vec<[usize; 3]>,
    pub tri_area: Vec<f64>,
    pub tri_centroid: Vec<[f64; 2]>,
    /// Gradient of each vertex hat function, per triangle.
    pub tri_hat_grad: Vec<[[f64; 2]; 3]>,
}

/// Nodal values of a piecewise-linear function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    /// Set when the field is an element of the zero-trace space.
    pub zero_trace: bool,
}

impl ScalarField {
    pub fn new(grid: &TriGrid, values: Vec<f64>, zero_trace: bool) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Dimension { expected: grid.node_count(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite field value at node {i}")));
        }
        if zero_trace {
            if let Some(i) = (0..values.len()).find(|&i| !grid.interior[i] && values[i] != 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "zero-trace field is nonzero at Dirichlet node {i}"
                )));
            }
        }
        Ok(Self { values, zero_trace })
    }

    pub fn zeros(grid: &TriGrid) -> Self {
        Self { values: vec![0.0; grid.node_count()], zero_trace: true }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * t).collect(), zero_trace: self.zero_trace }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TriGrid {
    pub fn build(spec: &DomainSpec) -> Result<Self> {
        spec.validate()?;
        let shape = &spec.shape;
        let [x0, y0, x1, y1] = shape.bbox();
        let n = f64::from(spec.resolution);
        let nx = (((x1 - x0) * n).round() as usize).max(1);
        let ny = (((y1 - y0) * n).round() as usize).max(1);
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let h = hx.max(hy);
        let tol = 1e-9 * h;

        let coord = |i: usize, lo: f64, hi: f64, step: f64, count: usize| {
            if i == count {
                hi
            } else {
                lo + i as f64 * step
            }
        };
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([coord(i, x0, x1, hx, nx), coord(j, y0, y1, hy, ny)]);
            }
        }
        let inside: Vec<bool> = nodes.iter().map(|&p| shape.contains(p, tol)).collect();

        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::new();
        let mut star = vec![0u8; nodes.len()];
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                for tri in [[a, b, c], [a, c, d]] {
                    let centroid = [
                        (nodes[tri[0]][0] + nodes[tri[1]][0] + nodes[tri[2]][0]) / 3.0,
                        (nodes[tri[0]][1] + nodes[tri[1]][1] + nodes[tri[2]][1]) / 3.0,
                    ];
                    if shape.contains(centroid, tol) {
                        for &k in &tri {
                            star[k] += 1;
                        }
                        triangles.push(tri);
                    }
                }
            }
        }
        if triangles.is_empty() {
            return Err(Error::InvalidDomain(
                "no lattice triangle fits inside the shape; increase the resolution".into(),
            ));
        }
        let interior: Vec<bool> = star.iter().zip(&inside).map(|(&s, &inside)| s == 6 && inside).collect();
        if !interior.iter().any(|&b| b) {
            return Err(Error::InvalidDomain("grid has no interior nodes".into()));
        }

        let mut tri_area = Vec::with_capacity(triangles.len());
        let mut tri_centroid = Vec::with_capacity(triangles.len());
        let mut tri_hat_grad = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let [p0, p1, p2] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            debug_assert!(det > 0.0);
            tri_area.push(0.5 * det);
            tri_centroid.push([(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]);
            // grad phi_k = rot90(opposite edge) / det
            let g = |pa: [f64; 2], pb: [f64; 2]| [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det];
            tri_hat_grad.push([g(p1, p2), g(p2, p0), g(p0, p1)]);
        }

        Ok(Self {
            spec: spec.clone(),
            cells: [nx, ny],
            origin: [x0, y0],
            hx,
            hy,
            h,
            nodes,
            interior,
            triangles,
            tri_area,
            tri_centroid,
            tri_hat_grad,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Lattice row length (nodes per row).
    pub fn row_len(&self) -> usize {
        self.cells[0] + 1
    }

    pub fn lattice_index(&self, i: usize, j: usize) -> usize {
        j * self.row_len() + i
    }

    pub fn lattice_coords(&self, node: usize) -> (usize, usize) {
        (node % self.row_len(), node / self.row_len())
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.interior[i]).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.tri_area.iter().sum()
    }

    /// Interpolates `f` at the nodes; with `zero_trace` the Dirichlet nodes are set to 0.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64, zero_trace: bool) -> ScalarField {
        let values = self
            .nodes
            .iter()
            .zip(&self.interior)
            .map(|(p, &inside)| if zero_trace && !inside { 0.0 } else { f(p[0], p[1]) })
            .collect();
        ScalarField { values, zero_trace }
    }

    /// Copy of `u` with every Dirichlet node set to 0.
    pub fn zero_trace(&self, u: &ScalarField) -> ScalarField {
        let values = u
            .values
            .iter()
            .zip(&self.interior)
            .map(|(&v, &inside)| if inside { v } else { 0.0 })
            .collect();
        ScalarField { values, zero_trace: true }
    }

    /// Constant gradient of `u` on every triangle.
    pub fn gradient(&self, u: &ScalarField) -> Vec<[f64; 2]> {
        self.gradient_of(&u.values)
    }

    pub(crate) fn gradient_of(&self, u: &[f64]) -> Vec<[f64; 2]> {
        self.triangles
            .iter()
            .zip(&self.tri_hat_grad)
            .map(|(t, g)| {
                let mut out = [0.0; 2];
                for k in 0..3 {
                    out[0] += u[t[k]] * g[k][0];
                    out[1] += u[t[k]] * g[k][1];
                }
                out
            })
            .collect()
    }

    /// Value of the piecewise-linear interpolant at each triangle centroid.
    pub fn centroid_values(&self, u: &ScalarField) -> Vec<f64> {
        self.centroid_values_of(&u.values)
    }

    pub(crate) fn centroid_values_of(&self, u: &[f64]) -> Vec<f64> {
        self.triangles.iter().map(|t| (u[t[0]] + u[t[1]] + u[t[2]]) / 3.0).collect()
    }

    /// `(||u||_inf, Gamma_u)`: the nodal sup norm and every node with
    /// `|u| >= (1 - tie_tol) ||u||_inf`. A zero field returns all nodes.
    pub fn sup_norm_and_argmax(&self, u: &ScalarField, tie_tol: f64) -> (f64, Vec<usize>) {
        sup_and_argmax(&u.values, tie_tol)
    }

    /// Lattice node nearest to `p`.
    pub fn nearest_node(&self, p: [f64; 2]) -> usize {
        let i = ((p[0] - self.origin[0]) / self.hx).round().clamp(0.0, self.cells[0] as f64);
        let j = ((p[1] - self.origin[1]) / self.hy).round().clamp(0.0, self.cells[1] as f64);
        self.lattice_index(i as usize, j as usize)
    }

    /// Writes `node_id,x,y,interior`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "node_id,x,y,interior")?;
        for (i, (p, &inside)) in self.nodes.iter().zip(&self.interior).enumerate() {
            writeln!(out, "{i},{},{},{}", p[0], p[1], u8::from(inside))?;
        }
        Ok(())
    }
}

pub(crate) fn sup_and_argmax(values: &[f64], tie_tol: f64) -> (f64, Vec<usize>) {
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup == 0.0 {
        return (0.0, (0..values.len()).collect());
    }
    let cut = sup * (1.0 - tie_tol);
    let set = values.iter().enumerate().filter(|(_, v)| v.abs() >= cut).map(|(i, _)| i).collect();
    (sup, set)
}

/// Writes `node_id,value`.
pub fn write_field_csv(u: &ScalarField, out: &mut impl Write) -> Result<()> {
    writeln!(out, "node_id,value")?;
    for (i, v) in u.values.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    Ok(())
}

/// Reads a `node_id,value` file written by [`write_field_csv`].
pub fn read_field_csv(grid: &TriGrid, path: &Path) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)?;
    let mut values = vec![f64::NAN; grid.node_count()];
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "node_id,value" => {}
        _ => return Err(Error::Config(format!("{}: expected header `node_id,value`", path.display()))),
    }
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("{}:{}: malformed row `{line}`", path.display(), ln + 2));
        let (id, v) = line.split_once(',').ok_or_else(bad)?;
        let id: usize = id.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        *values.get_mut(id).ok_or_else(bad)? = v;
    }
    let zero_trace = (0..values.len()).all(|i| grid.interior[i] || values[i] == 0.0);
    ScalarField::new(grid, values, zero_trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn grid(shape: Shape, n: u32) -> TriGrid {
        TriGrid::build(&DomainSpec::new(shape, n).unwrap()).unwrap()
    }

    #[test]
    fn unit_square_is_covered_exactly() {
        let g = grid(Shape::Rectangle { w: 1.0, h: 1.0 }, 16);
        assert!((g.total_area() - 1.0).abs() < 1e-12);
        assert_eq!(g.triangle_count(), 2 * 16 * 16);
        assert_eq!(g.interior_nodes().len(), 15 * 15);
        assert!(g.tri_area.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn disk_area_converges() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = grid(Shape::Disk { r: 1.0 }, n);
            errs.push((g.total_area() - std::f64::consts::PI).abs());
        }
        // centroid masking: the staircase error is bounded by perimeter * h
        for (e, n) in errs.iter().zip([16.0, 32.0, 64.0]) {
            assert!(*e < 2.0 * std::f64::consts::PI / n, "{errs:?}");
        }
        assert!(errs[2] < 0.05);
    }

    #[test]
    fn rejects_coarse_and_degenerate_specs() {
        assert!(DomainSpec::new(Shape::Rectangle { w: 1.0, h: 1.0 }, 4).is_err());
        assert!(DomainSpec::new(Shape::Rectangle { w: 0.0, h: 1.0 }, 16).is_err());
        assert!(DomainSpec::new(Shape::Annulus { r_in: 0.5, r_out: 0.4 }, 16).is_err());
    }

    #[test]
    fn affine_gradients_are_exact() {
        for shape in [Shape::Rectangle { w: 1.0, h: 1.0 }, Shape::Disk { r: 1.0 }, Shape::Annulus { r_in: 0.3, r_out: 1.0 }] {
            let g = grid(shape, 16);
            let u = g.interpolate(|x, y| 3.0 * x - 2.0 * y, false);
            for gr in g.gradient(&u) {
                assert!((gr[0] - 3.0).abs() < 1e-12 && (gr[1] + 2.0).abs() < 1e-12);
            }
            let c = g.interpolate(|_, _| 4.5, false);
            assert!(g.gradient(&c).iter().all(|gr| gr[0].abs() < 1e-12 && gr[1].abs() < 1e-12));
        }
    }

    #[test]
    fn quadratic_gradient_error_is_first_order() {
        let err = |n| {
            let g = grid(Shape::Rectangle { w: 1.0, h: 1.0 }, n);
            let u = g.interpolate(|x, _| x * x, false);
            g.gradient(&u)
                .iter()
                .zip(&g.tri_centroid)
                .map(|(gr, c)| (gr[0] - 2.0 * c[0]).abs())
                .fold(0.0, f64::max)
        };
        let (e32, e64) = (err(32), err(64));
        assert!(e64 < 2.0 / 64.0);
        assert!((e32 / e64 - 2.0).abs() < 0.2, "{e32} {e64}");
    }

    #[test]
    fn sup_norm_sets() {
        let g = grid(Shape::Rectangle { w: 1.0, h: 1.0 }, 16);
        let u = g.interpolate(|x, _| x.min(1.0 - x), false);
        let (s, set) = g.sup_norm_and_argmax(&u, DEFAULT_TIE_TOL);
        assert!((s - 0.5).abs() < 1e-15);
        assert_eq!(set.len(), 17);
        assert!(set.iter().all(|&i| (g.nodes[i][0] - 0.5).abs() < 1e-15));

        let mut v = ScalarField::zeros(&g);
        let (s0, all) = g.sup_norm_and_argmax(&v, DEFAULT_TIE_TOL);
        assert_eq!(s0, 0.0);
        assert_eq!(all.len(), g.node_count());

        v.values[40] = -2.0;
        v.values[41] = 1.0;
        assert_eq!(g.sup_norm_and_argmax(&v, DEFAULT_TIE_TOL), (2.0, vec![40]));
    }

    #[test]
    fn build_is_deterministic() {
        let spec = DomainSpec::new(Shape::Ellipse { a: 1.0, b: 0.6 }, 24).unwrap();
        let a = TriGrid::build(&spec).unwrap();
        let b = TriGrid::build(&spec).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.triangles, b.triangles);
        assert_eq!(a.tri_area, b.tri_area);
    }

    #[test]
    fn field_csv_round_trip() {
        let g = grid(Shape::Disk { r: 1.0 }, 8);
        let u = g.interpolate(|x, y| 1.0 - x * x - y * y, true);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        write_field_csv(&u, &mut f).unwrap();
        drop(f);
        let back = read_field_csv(&g, &path).unwrap();
        assert_eq!(back, u);
    }
}
