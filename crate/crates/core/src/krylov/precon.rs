use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::inner::{build_inner_solver, p1_prolongation, InnerSettings, SpdSolver};
use super::LinearOperator;
use crate::condensation::{CondensedSystem, SystemKind};
use crate::error::{ConfigError, SolverError};
use crate::problem::Discretization;

/// Block-diagonal preconditioner shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconFamily {
    /// Two-field, `diag(R̄⁻¹, M̄⁻¹)`.
    PMbar,
    /// Two-field, `diag(R̄⁻¹, (B_p̄u A_uu⁻¹ B_p̄uᵀ)⁻¹)`.
    PBab,
    /// Three-field, `diag(R̄⁻¹, M⁻¹, M̄⁻¹)`.
    P3x3,
}

impl PreconFamily {
    pub const ALL: [PreconFamily; 3] = [PreconFamily::P3x3, PreconFamily::PMbar, PreconFamily::PBab];

    pub fn system_kind(self) -> SystemKind {
        match self {
            Self::PMbar | Self::PBab => SystemKind::TwoField,
            Self::P3x3 => SystemKind::ThreeField,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PMbar => "pmbar",
            Self::PBab => "pbab",
            Self::P3x3 => "p3x3",
        }
    }
}

impl fmt::Display for PreconFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PreconFamily {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pmbar" | "mbar" => Ok(Self::PMbar),
            "pbab" | "bab" => Ok(Self::PBab),
            "p3x3" | "3x3" => Ok(Self::P3x3),
            _ => Err(ConfigError::UnknownVariant(s.to_string())),
        }
    }
}

/// Matrix standing in for the trace-velocity block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityChoice {
    /// `Ā^d`, the two-field velocity block itself.
    Ad,
    /// The grad-div augmented `Ā_γ`.
    Agamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassTreatment {
    Exact,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreconConfig {
    pub family: PreconFamily,
    pub velocity: VelocityChoice,
    pub gamma: f64,
    pub velocity_inner: InnerSettings,
    /// Applies to the pressure blocks (`M̄`, `BAB`, `M`).
    pub mass: MassTreatment,
}

impl PreconConfig {
    /// Exact `Ā^d` for two-field families, exact `Ā_0` for `P3x3`.
    pub fn new(family: PreconFamily) -> Self {
        let velocity = match family {
            PreconFamily::P3x3 => VelocityChoice::Agamma,
            _ => VelocityChoice::Ad,
        };
        Self {
            family,
            velocity,
            gamma: 0.0,
            velocity_inner: InnerSettings::Exact,
            mass: MassTreatment::Exact,
        }
    }

    pub fn exact_ad(family: PreconFamily) -> Self {
        Self {
            velocity: VelocityChoice::Ad,
            ..Self::new(family)
        }
    }

    pub fn exact_agamma(family: PreconFamily, gamma: f64) -> Self {
        Self {
            velocity: VelocityChoice::Agamma,
            gamma,
            ..Self::new(family)
        }
    }

    pub fn with_inner(self, inner: InnerSettings) -> Self {
        Self {
            velocity_inner: inner,
            ..self
        }
    }

    /// Short identifier such as `pmbar/agamma0.1/exact`.
    pub fn label(&self) -> String {
        let v = match self.velocity {
            VelocityChoice::Ad => "ad".to_string(),
            VelocityChoice::Agamma => format!("agamma{}", self.gamma),
        };
        let mut s = format!("{}/{v}/{}", self.family, self.velocity_inner);
        if self.mass == MassTreatment::Diagonal {
            s.push_str("/diagmass");
        }
        s
    }
}

/// Block-diagonal SPD preconditioner for a condensed system.
pub struct BlockPreconditioner {
    n: usize,
    blocks: Vec<(std::ops::Range<usize>, Box<dyn SpdSolver>)>,
}

impl BlockPreconditioner {
    pub fn build(
        disc: &Discretization,
        system: &CondensedSystem,
        cfg: &PreconConfig,
    ) -> Result<Self, SolverError> {
        if cfg.family.system_kind() != system.kind {
            return Err(SolverError::IncompatiblePreconditioner(format!(
                "{} on a {:?} system",
                cfg.family, system.kind
            )));
        }
        if !(cfg.gamma >= 0.0 && cfg.gamma.is_finite()) {
            return Err(SolverError::Setup(format!("invalid gamma {}", cfg.gamma)));
        }
        let vel = match (cfg.velocity, system.kind) {
            (VelocityChoice::Ad, SystemKind::TwoField) => system.velocity_block(),
            (VelocityChoice::Ad, SystemKind::ThreeField) => disc.ad(),
            (VelocityChoice::Agamma, _) => disc.agamma(cfg.gamma),
        };
        let prolong = match cfg.velocity_inner {
            InnerSettings::TwoLevel { .. } => Some(p1_prolongation(&disc.mesh, &disc.layout)),
            _ => None,
        };
        let mass_inner = match cfg.mass {
            MassTreatment::Exact => InnerSettings::Exact,
            MassTreatment::Diagonal => InnerSettings::Jacobi,
        };

        let nu = system.n_trace_velocity;
        let nq = system.n_pressure;
        let mut blocks = vec![(
            0..nu,
            build_inner_solver(
                &vel,
                cfg.velocity_inner,
                prolong.as_ref(),
                "velocity block (an indefinite block means alpha is too small for this mesh)",
            )?,
        )];
        if system.kind == SystemKind::ThreeField {
            let m = disc.pressure_mass();
            blocks.push((nu..nu + nq, build_inner_solver(&m, mass_inner, None, "M")?));
        }
        let (pmat, what) = match cfg.family {
            PreconFamily::PBab => (disc.bab(), "B_p̄u A_uu⁻¹ B_p̄uᵀ"),
            _ => (disc.trace_mass(), "M̄"),
        };
        blocks.push((
            nu + nq..system.dim(),
            build_inner_solver(&pmat, mass_inner, None, what)?,
        ));
        Ok(Self {
            n: system.dim(),
            blocks,
        })
    }
}

impl LinearOperator for BlockPreconditioner {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, s) in &self.blocks {
            s.solve(&x[r.clone()], &mut y[r.clone()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::AssemblyConfig;
    use crate::fespace::{SpaceConfig, Variant};
    use crate::mesh::{generate_unstructured, Point, Rect};
    use crate::sparse::{norm, CsrMatrix};

    fn disc(v: Variant) -> Discretization {
        let m = generate_unstructured(Rect::unit_square(), 0.3, 3).unwrap();
        let s = SpaceConfig::new(2, v).unwrap();
        let f = |x: Point| [x[1], 1.0];
        let g = |x: Point| [x[0] * (1.0 - x[0]), 0.0];
        Discretization::new(m, s, AssemblyConfig::defaults_for(&s), &f, &g).unwrap()
    }

    #[test]
    fn family_must_match_system() {
        let d = disc(Variant::Hdg);
        let two = d.system(SystemKind::TwoField);
        let three = d.system(SystemKind::ThreeField);
        assert!(BlockPreconditioner::build(&d, &two, &PreconConfig::new(PreconFamily::P3x3)).is_err());
        assert!(BlockPreconditioner::build(&d, &three, &PreconConfig::new(PreconFamily::PMbar)).is_err());
        assert!(BlockPreconditioner::build(&d, &three, &PreconConfig::new(PreconFamily::P3x3)).is_ok());
    }

    #[test]
    fn zero_maps_to_zero() {
        let d = disc(Variant::EdgHdg);
        let sys = d.system(SystemKind::TwoField);
        let pc = BlockPreconditioner::build(&d, &sys, &PreconConfig::new(PreconFamily::PBab)).unwrap();
        let mut y = vec![1.0; sys.dim()];
        pc.apply(&vec![0.0; sys.dim()], &mut y);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_ad_inverts_the_velocity_block() {
        let d = disc(Variant::Edg);
        let sys = d.system(SystemKind::TwoField);
        let pc = BlockPreconditioner::build(&d, &sys, &PreconConfig::exact_ad(PreconFamily::PMbar)).unwrap();
        let ad = sys.velocity_block();
        let nu = sys.n_trace_velocity;
        let r: Vec<f64> = (0..sys.dim()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut z = vec![0.0; sys.dim()];
        pc.apply(&r, &mut z);
        let az = ad.mul_vec(&z[..nu]);
        let res: Vec<f64> = az.iter().zip(&r[..nu]).map(|(a, b)| a - b).collect();
        assert!(norm(&res) <= 1e-12 * norm(&r[..nu]));
        // the pressure block applies M̄⁻¹
        let mz = d.trace_mass().mul_vec(&z[nu..]);
        let res: Vec<f64> = mz.iter().zip(&r[nu..]).map(|(a, b)| a - b).collect();
        assert!(norm(&res) <= 1e-12 * norm(&r[nu..]));
    }

    #[test]
    fn ad_matches_the_two_field_block() {
        let d = disc(Variant::Hdg);
        let a = d.ad();
        let b = d.system(SystemKind::TwoField).velocity_block();
        let diff = a.add_scaled(1.0, &b, -1.0);
        assert!(diff.max_abs() <= 1e-12 * b.max_abs());
    }

    #[test]
    fn agamma_zero_is_the_three_field_block() {
        let d = disc(Variant::Hdg);
        let a0 = d.agamma(0.0);
        let three: CsrMatrix = d.system(SystemKind::ThreeField).velocity_block();
        let diff = a0.add_scaled(1.0, &three, -1.0);
        assert!(diff.max_abs() <= 1e-12 * three.max_abs());
    }

    #[test]
    fn labels_and_parsing() {
        assert_eq!(PreconConfig::new(PreconFamily::PMbar).label(), "pmbar/ad/exact");
        let c = PreconConfig::exact_agamma(PreconFamily::PBab, 0.1)
            .with_inner(InnerSettings::TwoLevel { cycles: 4, sweeps: 1 });
        assert_eq!(c.label(), "pbab/agamma0.1/twolevel:4:1");
        for f in PreconFamily::ALL {
            assert_eq!(f.as_str().parse::<PreconFamily>().unwrap(), f);
        }
    }
}
