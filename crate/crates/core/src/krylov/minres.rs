use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::{deflate, LinearOperator};
use crate::error::SolverError;
use crate::sparse::{axpy, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum StopRule {
    /// `‖b - Ax‖ / ‖b‖`, recomputed every iteration.
    TrueResidual,
    /// The recurrence estimate of the preconditioned residual norm.
    PreconditionedResidual,
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
pub struct MinresOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub stop: StopRule,
}

impl Default for MinresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            stop: StopRule::TrueResidual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub true_residual: f64,
    pub preconditioned_residual: f64,
}

/// Wall-clock seconds per phase. The solver only fills `iterations`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub assembly: f64,
    pub condensation: f64,
    pub precon_setup: f64,
    pub iterations: f64,
    pub back_substitution: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub timings: PhaseTimings,
}

impl SolveReport {
    pub fn final_true_residual(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.true_residual)
    }

    pub fn write_history_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.history {
            w.serialize(r)?;
        }
        w.flush()
    }
}

/// Preconditioned MINRES for a symmetric `op` and SPD `precon`.
///
/// `deflation` must be orthonormal. Its span is projected out of the
/// right-hand side, every operator and preconditioner output, and the
/// returned iterate.
pub fn minres(
    op: &dyn LinearOperator,
    b: &[f64],
    precon: &dyn LinearOperator,
    deflation: &[Vec<f64>],
    opts: &MinresOptions,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let n = op.dim();
    for got in [b.len(), precon.dim()] {
        if got != n {
            return Err(SolverError::DimensionMismatch { expected: n, got });
        }
    }
    let start = Instant::now();
    let mut report = SolveReport {
        iterations: 0,
        converged: true,
        history: Vec::new(),
        timings: PhaseTimings::default(),
    };

    let mut rhs = b.to_vec();
    deflate(deflation, &mut rhs);
    let bnorm = norm(&rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, report));
    }

    let mut r1 = rhs.clone();
    let mut y = vec![0.0; n];
    precon.apply(&r1, &mut y);
    deflate(deflation, &mut y);
    let beta1 = dot(&r1, &y);
    if beta1 <= 0.0 {
        return Err(SolverError::Breakdown("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1.sqrt();

    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);
    report.converged = false;

    for itn in 1..=opts.max_iter {
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = s * yi);
        op.apply(&v, &mut y);
        deflate(deflation, &mut y);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precon.apply(&r2, &mut y);
        deflate(deflation, &mut y);
        oldb = beta;
        let b2 = dot(&r2, &y);
        if b2 < 0.0 {
            return Err(SolverError::Breakdown("preconditioner is not positive definite".into()));
        }
        beta = b2.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);

        op.apply(&x, &mut ax);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        deflate(deflation, &mut r);
        let rec = IterationRecord {
            iteration: itn,
            true_residual: norm(&r) / bnorm,
            preconditioned_residual: phibar / beta1,
        };
        report.history.push(rec);
        report.iterations = itn;
        let measure = match opts.stop {
            StopRule::TrueResidual => rec.true_residual,
            StopRule::PreconditionedResidual => rec.preconditioned_residual,
        };
        if measure <= opts.tol {
            report.converged = true;
            break;
        }
        if beta == 0.0 {
            // Krylov space exhausted; the iterate is as good as it gets.
            break;
        }
    }
    deflate(deflation, &mut x);
    report.timings.iterations = start.elapsed().as_secs_f64();
    Ok((x, report))
}
