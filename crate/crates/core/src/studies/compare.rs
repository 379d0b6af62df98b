use serde::Serialize;

use super::mms::total_time;
use super::problems::{mms, unit_square_meshes};
use super::{write_outputs, StudySpec};
use crate::condensation::SystemKind;
use crate::error::Result;
use crate::fespace::Variant;
use crate::krylov::{PreconFamily, VelocityChoice};
use crate::postprocess::field_norms;
use crate::problem::Discretization;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub variant: String,
    pub level: usize,
    pub elements: usize,
    pub precon: String,
    pub gamma: f64,
    /// Unknowns of the iterated system.
    pub dofs: usize,
    pub velocity_error: f64,
    pub pressure_error: f64,
    pub divergence: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cpu_time: f64,
    /// `cpu_time` over that of HDG with `ℙ_3×3` on the same level, when
    /// the baseline is part of the run.
    pub cpu_normalized: Option<f64>,
}

/// Every variant against every preconditioner on the manufactured solution.
pub fn run_compare(spec: &StudySpec) -> Result<Vec<CompareRow>> {
    spec.validate()?;
    let meshes = unit_square_meshes(spec.levels, spec.target_h, spec.seed)?;
    let opts = spec.minres_options();
    let mut rows = Vec::new();
    for (level, mesh) in meshes.iter().enumerate() {
        let start = rows.len();
        for &variant in &spec.variants {
            let (space, cfg) = spec.space(variant)?;
            let disc = Discretization::new(mesh.clone(), space, cfg, &mms::force, &mms::velocity)?;
            let asm = disc.assembler();
            for pc in &spec.precons {
                let kind = pc.family.system_kind();
                let solve = disc.solve(kind, pc, &opts)?;
                let s = &solve.solution;
                let n = field_norms(&asm, &s.u, &s.p, Some(&mms::velocity), Some(&mms::pressure));
                rows.push(CompareRow {
                    variant: variant.to_string(),
                    level,
                    elements: mesh.num_elements(),
                    precon: pc.label(),
                    gamma: match pc.velocity {
                        VelocityChoice::Agamma => pc.gamma,
                        VelocityChoice::Ad => 0.0,
                    },
                    dofs: match kind {
                        SystemKind::TwoField => disc.layout.num_two_field(),
                        SystemKind::ThreeField => disc.layout.num_three_field(),
                    },
                    velocity_error: n.velocity_error,
                    pressure_error: n.pressure_error,
                    divergence: n.divergence,
                    iterations: solve.report.iterations,
                    converged: solve.report.converged,
                    cpu_time: total_time(&solve.report.timings),
                    cpu_normalized: None,
                });
            }
        }
        let hdg = Variant::Hdg.to_string();
        let p3 = format!("{}/", PreconFamily::P3x3);
        let base = rows[start..]
            .iter()
            .find(|r| r.variant == hdg && r.precon.starts_with(&p3))
            .map(|r| r.cpu_time);
        if let Some(b) = base.filter(|&b| b > 0.0) {
            for r in &mut rows[start..] {
                r.cpu_normalized = Some(r.cpu_time / b);
            }
        }
    }
    write_outputs(spec, "compare", &rows, &[])?;
    Ok(rows)
}
