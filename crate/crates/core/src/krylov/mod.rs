//! MINRES with null-space deflation, SPD inner solvers and the block
//! preconditioners for the condensed systems.

mod inner;
mod minres;
mod precon;

pub use inner::{
    CholeskySolver, InnerSettings, JacobiSolver, SgsCycles, SpdSolver, TwoLevelCycles,
    aggregation_prolongation, build_inner_solver, p1_prolongation, AGGREGATION_THETA,
};
pub use minres::{minres, IterationRecord, MinresOptions, PhaseTimings, SolveReport, StopRule};
pub use precon::{
    BlockPreconditioner, MassTreatment, PreconConfig, PreconFamily, VelocityChoice,
};

use crate::sparse::CsrMatrix;

/// Symmetric linear map `y = A x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }
}

/// `y = x`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Removes the components along an orthonormal set.
pub(crate) fn deflate(basis: &[Vec<f64>], x: &mut [f64]) {
    for n in basis {
        let c = crate::sparse::dot(n, x);
        crate::sparse::axpy(-c, n, x);
    }
}
