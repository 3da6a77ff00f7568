#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varexp::exponents::ExponentField;
use varexp::geometry::{DomainSpec, Shape};
use varexp::grid::{ScalarField, TriGrid};

/// Exponent families used by the randomized suites.
pub const FAMILIES: [&str; 5] = ["2", "1.5 + x^2", "2 + x*y", "3 + sin(3*x)*cos(2*y)", "1.2 + 4*(x^2+y^2)"];

pub fn grid(shape: Shape, n: u32) -> TriGrid {
    TriGrid::build(&DomainSpec::new(shape, n).unwrap()).unwrap()
}

pub fn unit_square(n: u32) -> TriGrid {
    grid(Shape::Rectangle { w: 1.0, h: 1.0 }, n)
}

pub fn exponent(text: &str, g: &TriGrid) -> ExponentField {
    ExponentField::parse_and_sample(text, g, 1).unwrap()
}

/// Smooth zero-trace field `d^a (c0 + Σ c_k sin(..) cos(..))` with a random
/// overall amplitude between 1e-2 and 1e2.
pub fn smooth_field(g: &TriGrid, rng: &mut ChaCha8Rng) -> ScalarField {
    let a: f64 = rng.gen_range(0.5..1.5);
    let c0: f64 = rng.gen_range(0.5..1.5);
    let modes: Vec<[f64; 5]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(-0.4..0.4),
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.0..6.3),
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.0..6.3),
            ]
        })
        .collect();
    let amp = 10f64.powf(rng.gen_range(-2.0..2.0));
    let shape = g.spec.shape.clone();
    g.interpolate(
        |x, y| {
            let s: f64 = modes.iter().map(|m| m[0] * (m[1] * x + m[2]).sin() * (m[3] * y + m[4]).cos()).sum();
            amp * shape.distance([x, y]).powf(a) * (c0 + s)
        },
        true,
    )
}

/// Independent random nodal values on the interior, zero elsewhere.
pub fn rough_field(g: &TriGrid, rng: &mut ChaCha8Rng) -> ScalarField {
    let values = (0..g.node_count()).map(|i| if g.interior[i] { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
    ScalarField::new(g, values, true).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Centroid values computed directly from the triangle list.
pub fn centroid_values(g: &TriGrid, u: &ScalarField) -> Vec<f64> {
    g.triangles.iter().map(|t| (u.values[t[0]] + u.values[t[1]] + u.values[t[2]]) / 3.0).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
