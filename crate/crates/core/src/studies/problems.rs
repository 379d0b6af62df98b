//! Benchmark data: the lid-driven cavity and a manufactured solution.

use std::f64::consts::PI;

use crate::error::MeshError;
use crate::mesh::{generate_unstructured, Mesh, Point, Rect};

/// Coarsest cavity mesh size; about 170 elements on `[-1, 1]²`.
pub const CAVITY_TARGET_H: f64 = 0.25;

/// Nested cavity meshes: an unstructured coarse mesh and `levels - 1`
/// uniform refinements of it.
pub fn cavity_meshes(levels: usize, target_h: f64, seed: u64) -> Result<Vec<Mesh>, MeshError> {
    nested(Rect::cavity(), levels, target_h, seed)
}

pub fn unit_square_meshes(levels: usize, target_h: f64, seed: u64) -> Result<Vec<Mesh>, MeshError> {
    nested(Rect::unit_square(), levels, target_h, seed)
}

fn nested(domain: Rect, levels: usize, target_h: f64, seed: u64) -> Result<Vec<Mesh>, MeshError> {
    let mut out = vec![generate_unstructured(domain, target_h, seed)?];
    for _ in 1..levels {
        let next = out.last().map(Mesh::refine_uniform).expect("nonempty");
        out.push(next);
    }
    Ok(out)
}

/// Lid velocity `(1 - x⁴, 0)` on `y = 1`, zero on the other walls.
pub fn cavity_lid(x: Point) -> [f64; 2] {
    if (x[1] - 1.0).abs() < 1e-12 {
        [1.0 - x[0].powi(4), 0.0]
    } else {
        [0.0, 0.0]
    }
}

pub fn zero_field(_: Point) -> [f64; 2] {
    [0.0, 0.0]
}

/// Solution on the unit square derived from the stream function
/// `sin(πx) sin(πy)`, with a zero-mean pressure.
pub mod mms {
    use super::*;

    pub fn velocity(x: Point) -> [f64; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [PI * sx * cy, -PI * cx * sy]
    }

    pub fn pressure(x: Point) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin() - 4.0 / (PI * PI)
    }

    /// `-Δu + ∇p`
    pub fn force(x: Point) -> [f64; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let p3 = PI.powi(3);
        [
            2.0 * p3 * sx * cy + PI * cx * sy,
            -2.0 * p3 * cx * sy + PI * sx * cy,
        ]
    }
}
