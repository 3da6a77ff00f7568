//! Analytic planar shapes: containment, distance to the boundary and the
//! boundary pieces (segments, quarter arcs) used for ridge detection.

use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// A primitive planar domain. Rectangles and L-shapes have their lower-left
/// corner at the origin; disks, ellipses and annuli are centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Rectangle { w: f64, h: f64 },
    Disk { r: f64 },
    Ellipse { a: f64, b: f64 },
    /// Rectangle `[0,w]x[0,h]` with the top-right `notch_w x notch_h` corner removed.
    Lshape { w: f64, h: f64, notch_w: f64, notch_h: f64 },
    Annulus { r_in: f64, r_out: f64 },
}

/// Shape plus lattice resolution (nodes per unit length).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(rename = "n")]
    pub resolution: u32,
}

pub const MIN_RESOLUTION: u32 = 8;

impl DomainSpec {
    pub fn new(shape: Shape, resolution: u32) -> Result<Self> {
        let spec = Self { shape, resolution };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::InvalidDomain(format!(
                "resolution {} is below the minimum of {MIN_RESOLUTION}",
                self.resolution
            )));
        }
        self.shape.validate()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!("{name} must be a positive finite length, got {v}")))
    }
}

/// A boundary piece with a closed-form (or robustly computed) projection.
#[derive(Clone, Copy, Debug)]
pub enum Feature {
    Segment { a: [f64; 2], b: [f64; 2] },
    /// Quarter of the ellipse `(rx cos t, ry sin t)` for `t` in
    /// `[quadrant*pi/2, (quadrant+1)*pi/2]`, centred at the origin.
    QuarterArc { rx: f64, ry: f64, quadrant: u8 },
}

impl Feature {
    /// Nearest point of the feature to `p`.
    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Feature::Segment { a, b } => {
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2;
                let t = t.clamp(0.0, 1.0);
                [a[0] + t * d[0], a[1] + t * d[1]]
            }
            Feature::QuarterArc { rx, ry, quadrant } => project_quarter_arc(rx, ry, quadrant, p),
        }
    }
}

fn arc_point(rx: f64, ry: f64, t: f64) -> [f64; 2] {
    [rx * t.cos(), ry * t.sin()]
}

fn project_quarter_arc(rx: f64, ry: f64, quadrant: u8, p: [f64; 2]) -> [f64; 2] {
    let t0 = f64::from(quadrant) * FRAC_PI_2;
    let t1 = t0 + FRAC_PI_2;
    if rx == ry {
        let r = p[0].hypot(p[1]);
        if r <= 1e-12 * rx {
            // every arc point is equidistant from the centre
            return arc_point(rx, ry, t0 + 0.5 * FRAC_PI_2);
        }
        let mut phi = p[1].atan2(p[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= t0 && phi <= t1 {
            return [rx * p[0] / r, rx * p[1] / r];
        }
        if quadrant == 0 && phi > 1.5 * PI {
            // wrapped angle next to t = 0
            return arc_point(rx, ry, t0);
        }
        let e0 = arc_point(rx, ry, t0);
        let e1 = arc_point(rx, ry, t1);
        return if dist2(e0, p) <= dist2(e1, p) { e0 } else { e1 };
    }
    // Ellipse: coarse scan then golden-section refinement of the squared
    // distance around the best sample.
    const SAMPLES: usize = 256;
    let f = |t: f64| dist2(arc_point(rx, ry, t), p);
    let dt = FRAC_PI_2 / SAMPLES as f64;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for k in 0..=SAMPLES {
        let v = f(t0 + k as f64 * dt);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let mut lo = t0 + (best.saturating_sub(1)) as f64 * dt;
    let mut hi = (t0 + (best + 1) as f64 * dt).min(t1);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if hi - lo < 1e-15 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    arc_point(rx, ry, 0.5 * (lo + hi))
}

pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn quarter_arcs(rx: f64, ry: f64) -> impl Iterator<Item = Feature> {
    (0..4u8).map(move |quadrant| Feature::QuarterArc { rx, ry, quadrant })
}

/// Distance from an interior point of the first quadrant to the ellipse
/// `x^2/a^2 + y^2/b^2 = 1`, `a >= b`, by bisection on the Lagrange parameter.
fn ellipse_distance_first_quadrant(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if y > 0.0 {
        if x > 0.0 {
            let z0 = x / a;
            let z1 = y / b;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (a / b) * (a / b);
            let sbar = bisect_root(r0, z0, z1, g);
            let px = r0 * x / (sbar + r0);
            let py = y / (sbar + 1.0);
            return (px - x).hypot(py - y);
        }
        return (b - y).abs();
    }
    let numer = a * x;
    let denom = a * a - b * b;
    if numer < denom {
        let xde = numer / denom;
        let px = a * xde;
        let py = b * (1.0 - xde * xde).max(0.0).sqrt();
        (px - x).hypot(py)
    } else {
        (x - a).abs()
    }
}

fn bisect_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::Rectangle { w, h } => {
                positive("w", w)?;
                positive("h", h)
            }
            Shape::Disk { r } => positive("r", r),
            Shape::Ellipse { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            Shape::Lshape { w, h, notch_w, notch_h } => {
                positive("w", w)?;
                positive("h", h)?;
                positive("notch_w", notch_w)?;
                positive("notch_h", notch_h)?;
                if notch_w >= w || notch_h >= h {
                    return Err(Error::InvalidDomain(
                        "L-shape notch must be strictly smaller than the rectangle".into(),
                    ));
                }
                Ok(())
            }
            Shape::Annulus { r_in, r_out } => {
                positive("r_in", r_in)?;
                positive("r_out", r_out)?;
                if r_in >= r_out {
                    return Err(Error::InvalidDomain(format!(
                        "annulus requires r_in < r_out, got r_in = {r_in}, r_out = {r_out}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Rectangle { .. } => "rectangle",
            Shape::Disk { .. } => "disk",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Lshape { .. } => "lshape",
            Shape::Annulus { .. } => "annulus",
        }
    }

    /// `(xmin, ymin, xmax, ymax)`.
    pub fn bbox(&self) -> [f64; 4] {
        match *self {
            Shape::Rectangle { w, h } | Shape::Lshape { w, h, .. } => [0.0, 0.0, w, h],
            Shape::Disk { r } => [-r, -r, r, r],
            Shape::Ellipse { a, b } => [-a, -b, a, b],
            Shape::Annulus { r_out, .. } => [-r_out, -r_out, r_out, r_out],
        }
    }

    /// Analytic area.
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Rectangle { w, h } => w * h,
            Shape::Disk { r } => PI * r * r,
            Shape::Ellipse { a, b } => PI * a * b,
            Shape::Lshape { w, h, notch_w, notch_h } => w * h - notch_w * notch_h,
            Shape::Annulus { r_in, r_out } => PI * (r_out * r_out - r_in * r_in),
        }
    }

    /// Closed-set membership with absolute slack `tol`.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let [x, y] = p;
        match *self {
            Shape::Rectangle { w, h } => x >= -tol && x <= w + tol && y >= -tol && y <= h + tol,
            Shape::Disk { r } => x.hypot(y) <= r + tol,
            Shape::Ellipse { a, b } => {
                let s = (x / (a + tol)).powi(2) + (y / (b + tol)).powi(2);
                s <= 1.0
            }
            Shape::Lshape { w, h, notch_w, notch_h } => {
                let in_rect = x >= -tol && x <= w + tol && y >= -tol && y <= h + tol;
                let in_notch = x > w - notch_w + tol && y > h - notch_h + tol;
                in_rect && !in_notch
            }
            Shape::Annulus { r_in, r_out } => {
                let r = x.hypot(y);
                r >= r_in - tol && r <= r_out + tol
            }
        }
    }

    /// Distance to the boundary for points of the closed shape; 0 outside.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        if !self.contains(p, 0.0) {
            return 0.0;
        }
        let [x, y] = p;
        match *self {
            Shape::Rectangle { w, h } => x.min(w - x).min(y).min(h - y).max(0.0),
            Shape::Disk { r } => (r - x.hypot(y)).max(0.0),
            Shape::Annulus { r_in, r_out } => {
                let r = x.hypot(y);
                (r - r_in).min(r_out - r).max(0.0)
            }
            Shape::Ellipse { a, b } => {
                let (ax, ay) = (x.abs(), y.abs());
                if a >= b {
                    ellipse_distance_first_quadrant(a, b, ax, ay)
                } else {
                    ellipse_distance_first_quadrant(b, a, ay, ax)
                }
            }
            Shape::Lshape { .. } => self
                .features()
                .iter()
                .map(|f| dist2(f.project(p), p))
                .fold(f64::INFINITY, f64::min)
                .sqrt(),
        }
    }

    /// Boundary pieces; curved boundaries are split into quarter arcs so that
    /// symmetric double projections show up as two distinct features.
    pub fn features(&self) -> Vec<Feature> {
        let seg = |a: [f64; 2], b: [f64; 2]| Feature::Segment { a, b };
        match *self {
            Shape::Rectangle { w, h } => vec![
                seg([0.0, 0.0], [w, 0.0]),
                seg([w, 0.0], [w, h]),
                seg([w, h], [0.0, h]),
                seg([0.0, h], [0.0, 0.0]),
            ],
            Shape::Lshape { w, h, notch_w, notch_h } => {
                let cx = w - notch_w;
                let cy = h - notch_h;
                vec![
                    seg([0.0, 0.0], [w, 0.0]),
                    seg([w, 0.0], [w, cy]),
                    seg([w, cy], [cx, cy]),
                    seg([cx, cy], [cx, h]),
                    seg([cx, h], [0.0, h]),
                    seg([0.0, h], [0.0, 0.0]),
                ]
            }
            Shape::Disk { r } => quarter_arcs(r, r).collect(),
            Shape::Ellipse { a, b } => quarter_arcs(a, b).collect(),
            Shape::Annulus { r_in, r_out } => {
                quarter_arcs(r_in, r_in).chain(quarter_arcs(r_out, r_out)).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_distance_matches_features_and_circle_limit() {
        let e = Shape::Ellipse { a: 1.0, b: 0.6 };
        for &p in &[[0.1, 0.2], [-0.5, 0.1], [0.3, -0.45], [0.0, 0.0], [0.9, 0.0]] {
            let via_features = e
                .features()
                .iter()
                .map(|f| dist2(f.project(p), p))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            assert!((e.distance(p) - via_features).abs() < 1e-9, "{p:?}");
        }
        let c = Shape::Ellipse { a: 1.0, b: 1.0 };
        assert!((c.distance([0.3, 0.4]) - 0.5).abs() < 1e-12);
        // centre of a 1 x 0.6 ellipse is 0.6 from the boundary
        assert!((e.distance([0.0, 0.0]) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn annulus_rejects_inverted_radii() {
        assert!(Shape::Annulus { r_in: 0.5, r_out: 0.4 }.validate().is_err());
        assert!(Shape::Annulus { r_in: 0.4, r_out: 0.5 }.validate().is_ok());
    }

    #[test]
    fn lshape_distance_near_reentrant_corner() {
        let l = Shape::Lshape { w: 1.0, h: 1.0, notch_w: 0.5, notch_h: 0.5 };
        // the reentrant corner (0.5, 0.5) is the nearest boundary point
        let d = l.distance([0.4, 0.4]);
        assert!((d - 0.1 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(l.distance([0.75, 0.75]), 0.0);
    }
}
