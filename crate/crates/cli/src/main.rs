use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use hdg_stokes::fespace::Variant;
use hdg_stokes::krylov::{InnerSettings, PreconConfig, PreconFamily};
use hdg_stokes::studies::{self, StudyKind, StudySpec};

#[derive(Parser)]
#[command(name = "hdg-stokes", version, about = "Hybridized Stokes solver studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lid-driven cavity iteration counts under refinement.
    Cavity(Common),
    /// Manufactured-solution errors and divergence.
    Mms(Common),
    /// Dense generalized eigenvalue extremes on coarse meshes.
    Spectrum(Common),
    /// All variants against all preconditioners.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Mesh levels (coarse mesh plus uniform refinements).
    #[arg(long)]
    levels: Option<usize>,
    /// hdg, edg or edg-hdg; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// pmbar, pbab or p3x3; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    precon: Vec<PreconFamily>,
    /// Use `Ā_γ` with this γ in the velocity block instead of `Ā^d`.
    #[arg(long)]
    gamma: Option<f64>,
    /// Velocity inner solver: exact, jacobi, sgs:C:S, twolevel:C:S, agg:C:S.
    #[arg(long)]
    inner: Option<InnerSettings>,
    /// Penalty parameter; defaults to 6k² (HDG) or 4k².
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, short)]
    k: Option<usize>,
    /// Relative true-residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Size parameter of the coarse mesh.
    #[arg(long)]
    target_h: Option<f64>,
    /// Output directory for CSV and JSON files.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write point values of the finest solutions.
    #[arg(long)]
    export_fields: bool,
}

impl Common {
    fn spec(self, kind: StudyKind) -> Result<StudySpec> {
        let mut s = StudySpec::new(kind);
        if let Some(v) = self.levels {
            s.levels = v;
        }
        if !self.variant.is_empty() {
            s.variants = self.variant;
        }
        if !self.precon.is_empty() || self.gamma.is_some() {
            if kind == StudyKind::Spectrum {
                bail!("the spectrum study has a fixed set of pencils");
            }
            let families = if self.precon.is_empty() {
                let mut f: Vec<PreconFamily> = s.precons.iter().map(|p| p.family).collect();
                f.dedup();
                f
            } else {
                self.precon
            };
            s.precons = families
                .into_iter()
                .map(|f| match self.gamma {
                    Some(g) => PreconConfig::exact_agamma(f, g),
                    None => PreconConfig::new(f),
                })
                .collect();
        }
        if let Some(i) = self.inner {
            s = s.with_inner(i);
        }
        s.alpha = self.alpha;
        if let Some(v) = self.k {
            s.k = v;
        }
        if let Some(v) = self.tol {
            s.tol = v;
        }
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.target_h {
            s.target_h = v;
        }
        s.out_dir = self.out;
        s.export_fields = self.export_fields;
        s.validate()?;
        Ok(s)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Cavity(c) => {
            let spec = c.spec(StudyKind::Cavity)?;
            println!("variant  level  elements  dofs     precon                      its  conv");
            for r in studies::run_cavity(&spec)? {
                println!(
                    "{:<8} {:>5} {:>9} {:>8}  {:<26} {:>4}  {}",
                    r.variant, r.level, r.elements, r.dofs, r.precon, r.iterations, r.converged
                );
            }
        }
        Command::Mms(c) => {
            let spec = c.spec(StudyKind::Mms)?;
            println!("variant  level  h         precon                 |u-uh|     |p-ph|     |div uh|   its");
            for r in studies::run_mms(&spec)? {
                println!(
                    "{:<8} {:>5}  {:<8.4} {:<22} {:.3e}  {:.3e}  {:.3e}  {:>3}",
                    r.variant,
                    r.level,
                    r.h_max,
                    r.precon,
                    r.velocity_error,
                    r.pressure_error,
                    r.divergence,
                    r.iterations
                );
            }
        }
        Command::Spectrum(c) => {
            let spec = c.spec(StudyKind::Spectrum)?;
            println!("variant  level  elements  pair            lambda_min   lambda_max");
            for r in studies::run_spectrum(&spec)? {
                println!(
                    "{:<8} {:>5} {:>9}  {:<14} {:>11.4e}  {:>11.4e}",
                    r.variant, r.level, r.elements, r.pair, r.lambda_min, r.lambda_max
                );
            }
        }
        Command::Compare(c) => {
            let spec = c.spec(StudyKind::Compare)?;
            println!("variant  precon                  dofs    |u-uh|     |div uh|   its  cpu/base");
            for r in studies::run_compare(&spec)? {
                let norm = r.cpu_normalized.map_or("-".to_string(), |x| format!("{x:.3}"));
                println!(
                    "{:<8} {:<22} {:>6}  {:.3e}  {:.3e}  {:>3}  {norm}",
                    r.variant, r.precon, r.dofs, r.velocity_error, r.divergence, r.iterations
                );
            }
        }
    }
    Ok(())
}
