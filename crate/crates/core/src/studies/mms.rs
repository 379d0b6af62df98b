use serde::Serialize;

use super::problems::{mms, unit_square_meshes};
use super::{write_outputs, StudySpec};
use crate::condensation::SystemKind;
use crate::error::Result;
use crate::krylov::PhaseTimings;
use crate::postprocess::{field_norms, write_point_values};
use crate::problem::Discretization;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsRow {
    pub variant: String,
    pub level: usize,
    pub elements: usize,
    pub h_max: f64,
    pub precon: String,
    pub fields: usize,
    pub dofs: usize,
    pub velocity_error: f64,
    pub pressure_error: f64,
    /// `‖∇·u_h‖` over the domain.
    pub divergence: f64,
    /// `‖u_h‖`, the scale for `divergence`.
    pub velocity_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Condensation, setup, iterations and recovery, in seconds.
    pub cpu_time: f64,
}

pub(crate) fn total_time(t: &PhaseTimings) -> f64 {
    t.condensation + t.precon_setup + t.iterations + t.back_substitution
}

/// Manufactured solution on the unit square, one row per variant, level and
/// preconditioner.
pub fn run_mms(spec: &StudySpec) -> Result<Vec<MmsRow>> {
    spec.validate()?;
    let meshes = unit_square_meshes(spec.levels, spec.target_h, spec.seed)?;
    let opts = spec.minres_options();
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for &variant in &spec.variants {
        let (space, cfg) = spec.space(variant)?;
        for (level, mesh) in meshes.iter().enumerate() {
            let disc = Discretization::new(mesh.clone(), space, cfg, &mms::force, &mms::velocity)?;
            let asm = disc.assembler();
            for pc in &spec.precons {
                let kind = pc.family.system_kind();
                let solve = disc.solve(kind, pc, &opts)?;
                let s = &solve.solution;
                let n = field_norms(&asm, &s.u, &s.p, Some(&mms::velocity), Some(&mms::pressure));
                rows.push(MmsRow {
                    variant: variant.to_string(),
                    level,
                    elements: mesh.num_elements(),
                    h_max: mesh.h_max(),
                    precon: pc.label(),
                    fields: match kind {
                        SystemKind::TwoField => 2,
                        SystemKind::ThreeField => 3,
                    },
                    dofs: match kind {
                        SystemKind::TwoField => disc.layout.num_two_field(),
                        SystemKind::ThreeField => disc.layout.num_three_field(),
                    },
                    velocity_error: n.velocity_error,
                    pressure_error: n.pressure_error,
                    divergence: n.divergence,
                    velocity_norm: n.velocity,
                    iterations: solve.report.iterations,
                    converged: solve.report.converged,
                    cpu_time: total_time(&solve.report.timings),
                });
                if spec.export_fields && level + 1 == meshes.len() {
                    if let Some(dir) = spec.out_dir.as_deref() {
                        std::fs::create_dir_all(dir)?;
                        let name = format!("mms_fields_{variant}_{}.csv", pc.family);
                        write_point_values(dir.join(&name), &asm, &s.u, &s.p)?;
                        files.push(name);
                    }
                }
            }
        }
    }
    write_outputs(spec, "mms", &rows, &files)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::Variant;
    use crate::studies::StudyKind;

    #[test]
    fn errors_decrease_at_the_expected_rate() {
        let mut s = StudySpec::new(StudyKind::Mms);
        s.levels = 3;
        s.target_h = 0.5;
        s.tol = 1e-12;
        let rows = run_mms(&s).unwrap();
        for v in Variant::ALL {
            for fields in [2, 3] {
                let r: Vec<&MmsRow> = rows
                    .iter()
                    .filter(|r| r.variant == v.to_string() && r.fields == fields)
                    .collect();
                assert_eq!(r.len(), 3);
                for w in r.windows(2) {
                    assert!(w[1].velocity_error < w[0].velocity_error, "{v}");
                    assert!(w[1].pressure_error < w[0].pressure_error, "{v}");
                }
                // velocity converges at order k + 1 = 3 under halving
                let rate = (r[1].velocity_error / r[2].velocity_error).log2();
                assert!((rate - 3.0).abs() <= 0.3, "{v}: rate {rate}");
            }
        }
    }
}
