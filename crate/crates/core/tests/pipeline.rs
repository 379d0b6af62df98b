//! End-to-end runs through the public API.

use hdg_stokes::assembly::AssemblyConfig;
use hdg_stokes::condensation::SystemKind;
use hdg_stokes::fespace::{SpaceConfig, Variant};
use hdg_stokes::krylov::{InnerSettings, MinresOptions, PreconConfig, PreconFamily};
use hdg_stokes::mesh::{generate_unstructured, Mesh, Rect};
use hdg_stokes::postprocess::field_norms;
use hdg_stokes::problem::Discretization;
use hdg_stokes::sparse::CsrMatrix;
use hdg_stokes::studies::problems::mms;
use proptest::prelude::*;

fn mms_disc(mesh: Mesh, v: Variant) -> Discretization {
    let s = SpaceConfig::new(2, v).unwrap();
    Discretization::new(mesh, s, AssemblyConfig::defaults_for(&s), &mms::force, &mms::velocity).unwrap()
}

#[test]
fn saved_mesh_gives_the_same_solution() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_unstructured(Rect::unit_square(), 0.3, 9).unwrap();
    let path = dir.path().join("m.mesh");
    m.save(&path).unwrap();
    let back = Mesh::load(&path).unwrap();
    let a = mms_disc(m, Variant::EdgHdg).solve_condensed_direct(SystemKind::TwoField).unwrap();
    let b = mms_disc(back, Variant::EdgHdg).solve_condensed_direct(SystemKind::TwoField).unwrap();
    assert!(a.relative_difference(&b) < 1e-13);
}

#[test]
fn every_preconditioner_reaches_the_direct_solution() {
    let m = generate_unstructured(Rect::unit_square(), 0.3, 2).unwrap();
    let d = mms_disc(m, Variant::Hdg);
    let opts = MinresOptions {
        tol: 1e-11,
        ..MinresOptions::default()
    };
    for f in PreconFamily::ALL {
        let direct = d.solve_condensed_direct(f.system_kind()).unwrap();
        for inner in [
            InnerSettings::Exact,
            InnerSettings::Sgs { cycles: 2, sweeps: 1 },
            InnerSettings::TwoLevel { cycles: 2, sweeps: 1 },
            InnerSettings::Aggregation { cycles: 2, sweeps: 1 },
        ] {
            let pc = PreconConfig::new(f).with_inner(inner);
            let s = d.solve(f.system_kind(), &pc, &opts).unwrap();
            assert!(s.report.converged, "{}", pc.label());
            // field-wise error is the residual tolerance times a condition number
            let diff = s.solution.relative_difference(&direct);
            assert!(diff < 1e-6, "{}: {diff:e}", pc.label());
        }
    }
}

#[test]
fn condensed_matrix_survives_matrix_market() {
    let m = generate_unstructured(Rect::unit_square(), 0.5, 1).unwrap();
    let sys = mms_disc(m, Variant::Edg).system(SystemKind::TwoField);
    let text = sys.matrix.to_matrix_market();
    let back = CsrMatrix::from_matrix_market(&text).unwrap();
    assert!(back.add_scaled(1.0, &sys.matrix, -1.0).max_abs() <= 1e-15 * sys.matrix.max_abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // Two- and three-field recovery give the same fields for any seed.
    #[test]
    fn condensation_paths_agree(seed in 0u64..1000, h in 0.3f64..0.6) {
        let m = generate_unstructured(Rect::unit_square(), h, seed).unwrap();
        let d = mms_disc(m, Variant::Hdg);
        let a = d.solve_condensed_direct(SystemKind::TwoField).unwrap();
        let b = d.solve_condensed_direct(SystemKind::ThreeField).unwrap();
        prop_assert!(a.relative_difference(&b) < 1e-9);
        let n = field_norms(&d.assembler(), &a.u, &a.p, None, None);
        prop_assert!(n.divergence < 1e-11 * n.velocity);
    }
}
