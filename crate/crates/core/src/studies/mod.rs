//! Reproducible numerical studies and their tabular output.
//!
//! Each `run_*` function takes a [`StudySpec`] and returns its rows. With
//! `out_dir` set it also writes them as CSV next to a JSON manifest holding
//! the full study settings and the crate version.

mod cavity;
mod compare;
mod mms;
pub mod problems;
mod spectrum;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use cavity::{run_cavity, run_cavity_with, CavityRow};
pub use compare::{run_compare, CompareRow};
pub use mms::{run_mms, MmsRow};
pub use spectrum::run_spectrum;

use crate::assembly::{default_alpha, AssemblyConfig};
use crate::error::{ConfigError, Result};
use crate::fespace::{SpaceConfig, Variant};
use crate::krylov::{InnerSettings, MinresOptions, PreconConfig, PreconFamily, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Cavity,
    Mms,
    Spectrum,
    Compare,
}

impl StudyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cavity => "cavity",
            Self::Mms => "mms",
            Self::Spectrum => "spectrum",
            Self::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub kind: StudyKind,
    /// Number of mesh levels: a coarse mesh plus `levels - 1` refinements.
    pub levels: usize,
    pub k: usize,
    pub variants: Vec<Variant>,
    /// Penalty override; `None` uses the per-variant default.
    pub alpha: Option<f64>,
    pub precons: Vec<PreconConfig>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Size parameter of the coarse unstructured mesh.
    pub target_h: f64,
    pub out_dir: Option<PathBuf>,
    /// Write point values of the finest solution per variant.
    pub export_fields: bool,
}

impl StudySpec {
    /// Defaults of the experiments: `k = 2`, tolerance `1e-8`, 500 iterations.
    pub fn new(kind: StudyKind) -> Self {
        let exact = |f| PreconConfig::exact_ad(f);
        let (levels, target_h, precons) = match kind {
            StudyKind::Cavity => (
                4,
                problems::CAVITY_TARGET_H,
                vec![
                    exact(PreconFamily::PMbar),
                    exact(PreconFamily::PBab),
                    PreconConfig::new(PreconFamily::P3x3),
                ],
            ),
            StudyKind::Mms => (
                3,
                0.25,
                vec![PreconConfig::new(PreconFamily::P3x3), exact(PreconFamily::PMbar)],
            ),
            StudyKind::Spectrum => (3, 1.0, vec![]),
            StudyKind::Compare => {
                let mut v = Vec::new();
                for gamma in [0.0, 0.1] {
                    for f in PreconFamily::ALL {
                        v.push(PreconConfig::exact_agamma(f, gamma));
                    }
                }
                (1, 0.125, v)
            }
        };
        Self {
            kind,
            levels,
            k: 2,
            variants: Variant::ALL.to_vec(),
            alpha: None,
            precons,
            tol: 1e-8,
            max_iter: 500,
            seed: 1,
            target_h,
            out_dir: None,
            export_fields: false,
        }
    }

    /// Replaces the velocity inner solver of every preconditioner.
    pub fn with_inner(mut self, inner: InnerSettings) -> Self {
        for p in &mut self.precons {
            *p = p.with_inner(inner);
        }
        self
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::InvalidParameter(m));
        if self.levels == 0 {
            return bad("at least one mesh level is required".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        if self.variants.is_empty() {
            return bad("no discretization variant selected".into());
        }
        if !(self.target_h > 0.0 && self.target_h.is_finite()) {
            return bad(format!("target_h must be positive, got {}", self.target_h));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if let Some(a) = self.alpha {
            AssemblyConfig::new(a, 0.0)?;
        }
        SpaceConfig::new(self.k, Variant::Hdg)?;
        Ok(())
    }

    pub fn space(&self, variant: Variant) -> Result<(SpaceConfig, AssemblyConfig)> {
        let space = SpaceConfig::new(self.k, variant)?;
        let alpha = self.alpha.unwrap_or_else(|| default_alpha(self.k, variant));
        Ok((space, AssemblyConfig::new(alpha, 0.0)?))
    }

    pub fn minres_options(&self) -> MinresOptions {
        MinresOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            stop: StopRule::TrueResidual,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    study: &'static str,
    version: &'static str,
    spec: &'a StudySpec,
    files: &'a [String],
}

/// Writes `rows` to `<out>/<name>.csv` and the manifest to
/// `<out>/<name>.json`; a no-op without an output directory.
pub(crate) fn write_outputs<T: Serialize>(spec: &StudySpec, name: &str, rows: &[T], extra: &[String]) -> Result<()> {
    let Some(dir) = spec.out_dir.as_deref() else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    let csv_name = format!("{name}.csv");
    write_csv(&dir.join(&csv_name), rows)?;
    let mut files = vec![csv_name];
    files.extend_from_slice(extra);
    write_manifest(spec, dir, name, &files)
}

pub(crate) fn write_manifest(spec: &StudySpec, dir: &Path, name: &str, files: &[String]) -> Result<()> {
    let manifest = Manifest {
        study: spec.kind.as_str(),
        version: env!("CARGO_PKG_VERSION"),
        spec,
        files,
    };
    std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for kind in [StudyKind::Cavity, StudyKind::Mms, StudyKind::Spectrum, StudyKind::Compare] {
            let s = StudySpec::new(kind);
            s.validate().unwrap();
            assert_eq!(s.k, 2);
            assert_eq!(s.tol, 1e-8);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = StudySpec::new(StudyKind::Mms);
        let mut s = base.clone();
        s.levels = 0;
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.tol = 1.0;
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.alpha = Some(-1.0);
        assert!(s.validate().is_err());
        let mut s = base;
        s.k = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn alpha_follows_the_variant() {
        let s = StudySpec::new(StudyKind::Cavity);
        assert_eq!(s.space(Variant::Hdg).unwrap().1.alpha, 24.0);
        assert_eq!(s.space(Variant::Edg).unwrap().1.alpha, 16.0);
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let s = StudySpec::new(StudyKind::Compare).with_inner(InnerSettings::Jacobi);
        let t: StudySpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, t);
    }
}
