use super::problems::{cavity_lid, cavity_meshes, zero_field};
use super::{write_manifest, StudySpec};
use crate::error::Result;
use crate::krylov::PreconFamily;
use crate::problem::Discretization;
use crate::spectral::{
    agamma_equivalence, generalized_eigenvalues, preconditioned_spectrum, sbar_spectra,
    write_reports_csv, write_reports_json, SpectrumReport,
};

/// Grad-div parameter of the `(Ā_γ, Ā_0)` rows.
const GAMMA: f64 = 0.1;

/// Dense spectra on the cavity meshes: a `(M̄, M̄)` control, `(S̄, M̄)`,
/// `(S̄, BAB)`, the two-field operator under `ℙ_M̄` and `ℙ_BAB`, and
/// `(Ā_0.1, Ā_0)`. Fails when a matrix exceeds the dense size caps.
pub fn run_spectrum(spec: &StudySpec) -> Result<Vec<SpectrumReport>> {
    spec.validate()?;
    let meshes = cavity_meshes(spec.levels, spec.target_h, spec.seed)?;
    let mut out = Vec::new();
    for &variant in &spec.variants {
        let (space, cfg) = spec.space(variant)?;
        for (level, mesh) in meshes.iter().enumerate() {
            let disc = Discretization::new(mesh.clone(), space, cfg, &zero_field, &cavity_lid)?;
            let ne = mesh.num_elements();
            let m = disc.trace_mass().to_dense();
            let ones = vec![1.0; m.nrows()];
            let mut reports = vec![SpectrumReport::from_eigenvalues(
                "M̄/M̄",
                level,
                ne,
                generalized_eigenvalues(&m, &m, Some(&ones))?,
            )];
            reports.extend(sbar_spectra(&disc, level)?);
            for f in [PreconFamily::PMbar, PreconFamily::PBab] {
                reports.push(preconditioned_spectrum(&disc, f, level)?);
            }
            reports.push(agamma_equivalence(&disc, GAMMA, level)?);
            for mut r in reports {
                r.variant = variant.to_string();
                out.push(r);
            }
        }
    }
    if let Some(dir) = spec.out_dir.as_deref() {
        std::fs::create_dir_all(dir)?;
        write_reports_csv(dir.join("spectrum.csv"), &out)?;
        write_reports_json(dir.join("spectrum_reports.json"), &out)?;
        let files = ["spectrum.csv".to_string(), "spectrum_reports.json".to_string()];
        write_manifest(spec, dir, "spectrum", &files)?;
    }
    Ok(out)
}
