use serde::Serialize;

use super::problems::{cavity_lid, cavity_meshes, zero_field};
use super::{write_outputs, StudySpec};
use crate::assembly::VectorField;
use crate::condensation::SystemKind;
use crate::error::Result;
use crate::postprocess::write_point_values;
use crate::problem::Discretization;

/// One cavity solve; timing columns are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CavityRow {
    pub variant: String,
    pub level: usize,
    pub elements: usize,
    pub h_max: f64,
    pub precon: String,
    /// Unknowns of the iterated system, constrained boundary DOFs included.
    pub dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub setup_time: f64,
    pub solve_time: f64,
}

/// Lid-driven cavity on `[-1, 1]²`, one row per variant, level and
/// preconditioner.
pub fn run_cavity(spec: &StudySpec) -> Result<Vec<CavityRow>> {
    run_cavity_with(spec, &cavity_lid)
}

/// Cavity study with boundary data `g` and zero body force.
pub fn run_cavity_with(spec: &StudySpec, g: VectorField) -> Result<Vec<CavityRow>> {
    spec.validate()?;
    let meshes = cavity_meshes(spec.levels, spec.target_h, spec.seed)?;
    let opts = spec.minres_options();
    let mut rows = Vec::new();
    let mut fields = Vec::new();
    for &variant in &spec.variants {
        let (space, cfg) = spec.space(variant)?;
        for (level, mesh) in meshes.iter().enumerate() {
            let disc = Discretization::new(mesh.clone(), space, cfg, &zero_field, g)?;
            let mut last = None;
            for pc in &spec.precons {
                let kind = pc.family.system_kind();
                let solve = disc.solve(kind, pc, &opts)?;
                let r = &solve.report;
                rows.push(CavityRow {
                    variant: variant.to_string(),
                    level,
                    elements: mesh.num_elements(),
                    h_max: mesh.h_max(),
                    precon: pc.label(),
                    dofs: match kind {
                        SystemKind::TwoField => disc.layout.num_two_field_with_boundary(),
                        SystemKind::ThreeField => disc.layout.num_three_field_with_boundary(),
                    },
                    iterations: r.iterations,
                    converged: r.converged,
                    final_residual: r.final_true_residual(),
                    setup_time: r.timings.precon_setup,
                    solve_time: r.timings.iterations,
                });
                last = Some(solve.solution);
            }
            if spec.export_fields && level + 1 == meshes.len() {
                if let (Some(sol), Some(dir)) = (last, spec.out_dir.as_deref()) {
                    std::fs::create_dir_all(dir)?;
                    let name = format!("cavity_fields_{variant}.csv");
                    write_point_values(dir.join(&name), &disc.assembler(), &sol.u, &sol.p)?;
                    fields.push(name);
                }
            }
        }
    }
    write_outputs(spec, "cavity", &rows, &fields)?;
    Ok(rows)
}
