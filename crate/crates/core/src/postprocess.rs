//! Norms of element fields and point-value export.

use std::path::Path;

use serde::Serialize;

use crate::assembly::{Assembler, VectorField};
use crate::fespace::DofLayout;
use crate::mesh::Point;

pub type ScalarField<'a> = &'a (dyn Fn(Point) -> f64 + Sync);

/// Global L² quantities of a discrete solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FieldNorms {
    /// `‖u - u_h‖` (or `‖u_h‖` without a reference).
    pub velocity_error: f64,
    pub pressure_error: f64,
    /// `‖∇·u_h‖`
    pub divergence: f64,
    /// `‖u_h‖`
    pub velocity: f64,
}

fn element_values(coef: &[f64], phi: &[f64]) -> f64 {
    coef.iter().zip(phi).map(|(c, v)| c * v).sum()
}

/// L² norms over the mesh; `exact_u`/`exact_p` turn the first two entries
/// into errors.
pub fn field_norms(
    asm: &Assembler,
    u: &[f64],
    p: &[f64],
    exact_u: Option<VectorField>,
    exact_p: Option<ScalarField>,
) -> FieldNorms {
    let layout = asm.layout;
    let d = asm.element_basis().dim();
    let dq = layout.local_pressure();
    let mut out = FieldNorms::default();
    for e in 0..layout.num_elements() {
        let ue = &u[layout.element_velocity_range(e)];
        let pe = &p[layout.element_pressure_range(e)];
        for qp in asm.volume_quadrature(e) {
            let uh = [element_values(&ue[..d], &qp.values), element_values(&ue[d..], &qp.values)];
            let ph = element_values(pe, &qp.values[..dq]);
            let div: f64 = (0..d)
                .map(|i| ue[i] * qp.gradients[i][0] + ue[d + i] * qp.gradients[i][1])
                .sum();
            let ur = exact_u.map_or([0.0; 2], |f| f(qp.x));
            let pr = exact_p.map_or(0.0, |f| f(qp.x));
            out.velocity_error += qp.weight * ((uh[0] - ur[0]).powi(2) + (uh[1] - ur[1]).powi(2));
            out.pressure_error += qp.weight * (ph - pr).powi(2);
            out.divergence += qp.weight * div * div;
            out.velocity += qp.weight * (uh[0] * uh[0] + uh[1] * uh[1]);
        }
    }
    FieldNorms {
        velocity_error: out.velocity_error.sqrt(),
        pressure_error: out.pressure_error.sqrt(),
        divergence: out.divergence.sqrt(),
        velocity: out.velocity.sqrt(),
    }
}

/// L² projection of a vector field onto the element velocity space
/// (the basis is orthonormal, so this is a set of moments).
pub fn project_velocity(asm: &Assembler, g: VectorField) -> Vec<f64> {
    let layout: &DofLayout = asm.layout;
    let d = asm.element_basis().dim();
    let mut u = vec![0.0; layout.num_velocity()];
    for e in 0..layout.num_elements() {
        let r = layout.element_velocity_range(e);
        for qp in asm.volume_quadrature(e) {
            let gx = g(qp.x);
            for i in 0..d {
                u[r.start + i] += qp.weight * gx[0] * qp.values[i];
                u[r.start + d + i] += qp.weight * gx[1] * qp.values[i];
            }
        }
    }
    u
}

/// L² projection of a scalar onto the element pressure space.
pub fn project_pressure(asm: &Assembler, q: ScalarField) -> Vec<f64> {
    let layout = asm.layout;
    let dq = layout.local_pressure();
    let mut p = vec![0.0; layout.num_pressure()];
    for e in 0..layout.num_elements() {
        let r = layout.element_pressure_range(e);
        for qp in asm.volume_quadrature(e) {
            let v = q(qp.x);
            for i in 0..dq {
                p[r.start + i] += qp.weight * v * qp.values[i];
            }
        }
    }
    p
}

#[derive(Serialize)]
struct PointRow {
    element: usize,
    x: f64,
    y: f64,
    ux: f64,
    uy: f64,
    p: f64,
}

/// Writes `element,x,y,ux,uy,p` at the vertices and centroid of every
/// element. Values are taken from the element's own polynomial, so vertex
/// rows repeat with possibly different values across elements.
pub fn write_point_values(
    path: impl AsRef<Path>,
    asm: &Assembler,
    u: &[f64],
    p: &[f64],
) -> std::io::Result<()> {
    let layout = asm.layout;
    let d = asm.element_basis().dim();
    let dq = layout.local_pressure();
    let mut w = csv::Writer::from_path(path)?;
    for e in 0..layout.num_elements() {
        let map = asm.element_map(e);
        let v = asm.mesh.element_vertices(e);
        let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
        let ue = &u[layout.element_velocity_range(e)];
        let pe = &p[layout.element_pressure_range(e)];
        for x in [v[0], v[1], v[2], c] {
            let phi = asm.element_basis().physical(&map, x).values;
            w.serialize(PointRow {
                element: e,
                x: x[0],
                y: x[1],
                ux: element_values(&ue[..d], &phi),
                uy: element_values(&ue[d..], &phi),
                p: element_values(pe, &phi[..dq]),
            })?;
        }
    }
    w.flush()
}
