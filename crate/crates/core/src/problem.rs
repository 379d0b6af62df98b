//! A discretized Stokes problem: mesh, layout, element blocks and their
//! condensed factors, plus the solve pipeline built on top of them.

use std::time::Instant;

use serde::Serialize;

use crate::assembly::{Assembler, AssemblyConfig, GlobalMatrices, LocalBlocks, VectorField};
use crate::condensation::{
    back_substitute, build_ad, build_agamma, build_bab, build_three_field, build_two_field,
    condense_all, element_pressure_ones, normalize_pressure, CondensedSystem, LocalCondensed,
    SystemKind,
};
use crate::direct::solve_direct;
use crate::error::Result;
use crate::fespace::{DofLayout, SpaceConfig};
use crate::krylov::{minres, BlockPreconditioner, MinresOptions, PhaseTimings, PreconConfig, SolveReport};
use crate::mesh::Mesh;
use crate::sparse::{norm, CsrMatrix, TripletBuilder};

/// All unknowns of a discrete solution, pressure shifted to zero mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSolution {
    pub u: Vec<f64>,
    /// Free trace-velocity DOFs.
    pub ubar: Vec<f64>,
    pub p: Vec<f64>,
    pub pbar: Vec<f64>,
}

impl DiscreteSolution {
    /// Largest relative difference over the four fields.
    pub fn relative_difference(&self, other: &Self) -> f64 {
        [
            (&self.u, &other.u),
            (&self.ubar, &other.ubar),
            (&self.p, &other.p),
            (&self.pbar, &other.pbar),
        ]
        .iter()
        .map(|(a, b)| {
            let d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
            norm(&d) / norm(a).max(norm(b)).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct IterativeSolve {
    pub solution: DiscreteSolution,
    pub report: SolveReport,
    /// Raw MINRES iterate before back-substitution.
    pub trace_solution: Vec<f64>,
}

pub struct Discretization {
    pub mesh: Mesh,
    pub layout: DofLayout,
    pub cfg: AssemblyConfig,
    pub blocks: Vec<LocalBlocks>,
    pub locals: Vec<LocalCondensed>,
    /// Assembly and local condensation times.
    pub timings: PhaseTimings,
}

impl Discretization {
    pub fn new(
        mesh: Mesh,
        space: SpaceConfig,
        cfg: AssemblyConfig,
        f: VectorField,
        g: VectorField,
    ) -> Result<Self> {
        let layout = DofLayout::build(&mesh, space)?;
        let mut timings = PhaseTimings::default();
        let t = Instant::now();
        let blocks = Assembler::new(&mesh, &layout, cfg).all_blocks(f, g);
        timings.assembly = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let locals = condense_all(&blocks)?;
        timings.condensation = t.elapsed().as_secs_f64();
        Ok(Self {
            mesh,
            layout,
            cfg,
            blocks,
            locals,
            timings,
        })
    }

    pub fn assembler(&self) -> Assembler<'_> {
        Assembler::new(&self.mesh, &self.layout, self.cfg)
    }

    pub fn system(&self, kind: SystemKind) -> CondensedSystem {
        match kind {
            SystemKind::TwoField => build_two_field(&self.layout, &self.blocks, &self.locals),
            SystemKind::ThreeField => {
                build_three_field(&self.mesh, &self.layout, &self.blocks, &self.locals)
            }
        }
    }

    pub fn global(&self) -> GlobalMatrices {
        GlobalMatrices::assemble(&self.layout, &self.blocks)
    }

    /// `M̄`
    pub fn trace_mass(&self) -> CsrMatrix {
        self.assembler().trace_mass()
    }

    /// Element pressure mass matrix `M`.
    pub fn pressure_mass(&self) -> CsrMatrix {
        let asm = self.assembler();
        let n = self.layout.num_pressure();
        let mut t = TripletBuilder::new(n, n);
        for e in 0..self.mesh.num_elements() {
            let d: Vec<usize> = self.layout.element_pressure_range(e).collect();
            crate::assembly::scatter(&mut t, &asm.local_pressure_mass(e), &d, &d);
        }
        t.build()
    }

    pub fn ad(&self) -> CsrMatrix {
        build_ad(&self.layout, &self.blocks, &self.locals)
    }

    pub fn agamma(&self, gamma: f64) -> CsrMatrix {
        build_agamma(&self.layout, &self.blocks, &self.locals, gamma)
    }

    pub fn bab(&self) -> CsrMatrix {
        build_bab(&self.layout, &self.blocks, &self.locals)
    }

    /// Recovers the element fields from a condensed solution and normalizes
    /// the pressure.
    pub fn recover(&self, system: &CondensedSystem, x: &[f64]) -> DiscreteSolution {
        let fields = back_substitute(system, &self.layout, &self.blocks, &self.locals, x);
        let (ub, _, qb) = system.split(x);
        let mut sol = DiscreteSolution {
            u: fields.u,
            ubar: ub.to_vec(),
            p: fields.p,
            pbar: qb.to_vec(),
        };
        normalize_pressure(&self.mesh, &self.layout, &mut sol.p, &mut sol.pbar);
        sol
    }

    /// Sparse direct solve of the full hybridized system, the reference for
    /// both condensed paths.
    pub fn solve_full_direct(&self) -> Result<DiscreteSolution> {
        let g = self.global();
        let (k, rhs) = g.full_system();
        let (nu, nub, nq, nqb) = g.sizes();
        let mut null = vec![0.0; k.nrows()];
        null[nu + nub..nu + nub + nq].copy_from_slice(&element_pressure_ones(&self.mesh, &self.layout));
        null[nu + nub + nq..].iter_mut().for_each(|v| *v = 1.0);
        let s = norm(&null);
        null.iter_mut().for_each(|v| *v /= s);
        let x = solve_direct(&k, &rhs, Some(&null))?;
        let mut sol = DiscreteSolution {
            u: x[..nu].to_vec(),
            ubar: x[nu..nu + nub].to_vec(),
            p: x[nu + nub..nu + nub + nq].to_vec(),
            pbar: x[nu + nub + nq..nu + nub + nq + nqb].to_vec(),
        };
        normalize_pressure(&self.mesh, &self.layout, &mut sol.p, &mut sol.pbar);
        Ok(sol)
    }

    /// Sparse direct solve of a condensed system followed by recovery.
    pub fn solve_condensed_direct(&self, kind: SystemKind) -> Result<DiscreteSolution> {
        let sys = self.system(kind);
        let x = solve_direct(&sys.matrix, &sys.rhs, Some(&sys.null_vector))?;
        Ok(self.recover(&sys, &x))
    }

    /// Condense, precondition, iterate and recover, timing each phase.
    pub fn solve(
        &self,
        kind: SystemKind,
        precon: &PreconConfig,
        opts: &MinresOptions,
    ) -> Result<IterativeSolve> {
        let t = Instant::now();
        let system = self.system(kind);
        let condense = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let pc = BlockPreconditioner::build(self, &system, precon)?;
        let setup = t.elapsed().as_secs_f64();
        let (x, mut report) = minres(
            &system.matrix,
            &system.rhs,
            &pc,
            std::slice::from_ref(&system.null_vector),
            opts,
        )?;
        let t = Instant::now();
        let solution = self.recover(&system, &x);
        report.timings = PhaseTimings {
            assembly: self.timings.assembly,
            condensation: self.timings.condensation + condense,
            precon_setup: setup,
            iterations: report.timings.iterations,
            back_substitution: t.elapsed().as_secs_f64(),
        };
        Ok(IterativeSolve {
            solution,
            report,
            trace_solution: x,
        })
    }
}
