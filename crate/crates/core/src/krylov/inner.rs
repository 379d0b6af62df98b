use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::LinearOperator;
use crate::error::{ConfigError, SolverError};
use crate::fespace::{DofLayout, TraceDof};
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Approximate or exact inverse of an SPD matrix. Every implementation is a
/// fixed linear map, so it can sit inside a MINRES preconditioner.
pub trait SpdSolver: Send + Sync {
    fn dim(&self) -> usize;
    fn solve(&self, b: &[f64], x: &mut [f64]);
}

impl LinearOperator for dyn SpdSolver + '_ {
    fn dim(&self) -> usize {
        SpdSolver::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve(x, y);
    }
}

/// How an SPD block is inverted inside a preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerSettings {
    /// Sparse Cholesky factorization.
    Exact,
    /// Diagonal scaling.
    Jacobi,
    /// `cycles` applications of `sweeps` symmetric Gauss-Seidel sweeps,
    /// started from zero.
    Sgs { cycles: usize, sweeps: usize },
    /// Symmetric two-level cycles: Gauss-Seidel smoothing around an exact
    /// correction on continuous piecewise linears over the mesh vertices.
    TwoLevel { cycles: usize, sweeps: usize },
    /// Symmetric two-level cycles whose coarse space is built from the
    /// matrix alone by plain aggregation over strong connections.
    Aggregation { cycles: usize, sweeps: usize },
}

impl fmt::Display for InnerSettings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => write!(f, "exact"),
            Self::Jacobi => write!(f, "jacobi"),
            Self::Sgs { cycles, sweeps } => write!(f, "sgs:{cycles}:{sweeps}"),
            Self::TwoLevel { cycles, sweeps } => write!(f, "twolevel:{cycles}:{sweeps}"),
            Self::Aggregation { cycles, sweeps } => write!(f, "agg:{cycles}:{sweeps}"),
        }
    }
}

impl FromStr for InnerSettings {
    type Err = ConfigError;

    /// `exact`, `jacobi`, `sgs[:cycles[:sweeps]]`, `twolevel[:cycles[:sweeps]]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let mut num = |default: usize| -> Result<usize, ConfigError> {
            match parts.next() {
                None => Ok(default),
                Some(t) => t.parse().ok().filter(|&v| v > 0).ok_or_else(|| {
                    ConfigError::InvalidParameter(format!("bad count `{t}` in `{s}`"))
                }),
            }
        };
        let out = match head.as_str() {
            "exact" => Self::Exact,
            "jacobi" => Self::Jacobi,
            "sgs" => Self::Sgs { cycles: num(4)?, sweeps: num(1)? },
            "twolevel" | "two-level" => Self::TwoLevel { cycles: num(4)?, sweeps: num(1)? },
            "agg" | "aggregation" => Self::Aggregation { cycles: num(4)?, sweeps: num(1)? },
            _ => return Err(ConfigError::UnknownVariant(s.to_string())),
        };
        if parts.next().is_some() {
            return Err(ConfigError::InvalidParameter(format!("trailing fields in `{s}`")));
        }
        Ok(out)
    }
}

pub struct CholeskySolver {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl CholeskySolver {
    pub fn new(a: &CsrMatrix, what: &str) -> Result<Self, SolverError> {
        let llt = a.to_faer().sp_cholesky(Side::Lower).map_err(|e| SolverError::Factorization {
            what: what.to_string(),
            msg: format!("{e:?}"),
        })?;
        Ok(Self { n: a.nrows(), llt })
    }
}

impl SpdSolver for CholeskySolver {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let sol = self.llt.solve(Mat::from_fn(self.n, 1, |i, _| b[i]));
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = sol[(i, 0)];
        }
    }
}

pub struct JacobiSolver {
    inv_diag: Vec<f64>,
}

impl JacobiSolver {
    pub fn new(a: &CsrMatrix, what: &str) -> Result<Self, SolverError> {
        Ok(Self {
            inv_diag: positive_diagonal(a, what)?.iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl SpdSolver for JacobiSolver {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        for ((xi, bi), d) in x.iter_mut().zip(b).zip(&self.inv_diag) {
            *xi = bi * d;
        }
    }
}

fn positive_diagonal(a: &CsrMatrix, what: &str) -> Result<Vec<f64>, SolverError> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(SolverError::Factorization {
            what: what.to_string(),
            msg: format!("nonpositive diagonal entry {} at row {i}", d[i]),
        });
    }
    Ok(d)
}

fn gs_row(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64], i: usize) {
    let (cols, vals) = a.row(i);
    let mut s = b[i];
    for (&j, &v) in cols.iter().zip(vals) {
        if j != i {
            s -= v * x[j];
        }
    }
    x[i] = s / diag[i];
}

/// One forward plus one backward Gauss-Seidel sweep on `x`.
fn sgs_sweep(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    for i in 0..x.len() {
        gs_row(a, diag, b, x, i);
    }
    for i in (0..x.len()).rev() {
        gs_row(a, diag, b, x, i);
    }
}

pub struct SgsCycles {
    a: CsrMatrix,
    diag: Vec<f64>,
    cycles: usize,
    sweeps: usize,
}

impl SgsCycles {
    pub fn new(a: &CsrMatrix, cycles: usize, sweeps: usize, what: &str) -> Result<Self, SolverError> {
        Ok(Self {
            diag: positive_diagonal(a, what)?,
            a: a.clone(),
            cycles,
            sweeps,
        })
    }
}

impl SpdSolver for SgsCycles {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for _ in 0..self.cycles * self.sweeps {
            sgs_sweep(&self.a, &self.diag, b, x);
        }
    }
}

pub struct TwoLevelCycles {
    a: CsrMatrix,
    diag: Vec<f64>,
    p: CsrMatrix,
    coarse: CholeskySolver,
    cycles: usize,
    sweeps: usize,
}

impl TwoLevelCycles {
    /// `p` maps coarse coefficients to fine ones; the coarse operator is the
    /// Galerkin product `pᵀ a p`.
    pub fn new(
        a: &CsrMatrix,
        p: CsrMatrix,
        cycles: usize,
        sweeps: usize,
        what: &str,
    ) -> Result<Self, SolverError> {
        if p.nrows() != a.nrows() {
            return Err(SolverError::DimensionMismatch {
                expected: a.nrows(),
                got: p.nrows(),
            });
        }
        let ac = p.transpose().matmul(&a.matmul(&p));
        Ok(Self {
            diag: positive_diagonal(a, what)?,
            coarse: CholeskySolver::new(&ac, &format!("coarse {what}"))?,
            a: a.clone(),
            p,
            cycles,
            sweeps,
        })
    }
}

impl SpdSolver for TwoLevelCycles {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        let n = x.len();
        let mut r = vec![0.0; n];
        let mut ec = vec![0.0; self.p.ncols()];
        for _ in 0..self.cycles {
            for _ in 0..self.sweeps {
                sgs_sweep(&self.a, &self.diag, b, x);
            }
            self.a.mul_vec_into(x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            self.coarse.solve(&self.p.tr_mul_vec(&r), &mut ec);
            for (xi, ci) in x.iter_mut().zip(self.p.mul_vec(&ec)) {
                *xi += ci;
            }
            for _ in 0..self.sweeps {
                sgs_sweep(&self.a, &self.diag, b, x);
            }
        }
    }
}

/// Interpolation of continuous piecewise-linear vector fields (on interior
/// vertices, zero on the boundary) into the free trace-velocity DOFs.
pub fn p1_prolongation(mesh: &Mesh, layout: &DofLayout) -> CsrMatrix {
    let boundary = mesh.boundary_vertices();
    let mut coarse = vec![usize::MAX; mesh.num_vertices()];
    let mut nc = 0;
    for (v, &b) in boundary.iter().enumerate() {
        if !b {
            coarse[v] = nc;
            nc += 1;
        }
    }
    let nodes = layout.cfg.velocity_facet_basis().nodes().to_vec();
    let n = layout.num_trace_velocity();
    let mut seen = vec![false; n / 2];
    let mut t = TripletBuilder::new(n, 2 * nc);
    for (fi, f) in mesh.facets().iter().enumerate() {
        for (j, node) in layout.facet_velocity_nodes(fi).iter().enumerate() {
            let TraceDof::Free(id) = *node else { continue };
            if std::mem::replace(&mut seen[id], true) {
                continue;
            }
            let s = nodes[j];
            for (v, w) in [(f.vertices[0], 1.0 - s), (f.vertices[1], s)] {
                if coarse[v] != usize::MAX && w != 0.0 {
                    for c in 0..2 {
                        t.push(2 * id + c, 2 * coarse[v] + c, w);
                    }
                }
            }
        }
    }
    t.build()
}

/// Strength threshold of the aggregation coarse space.
pub const AGGREGATION_THETA: f64 = 0.08;

/// Piecewise-constant prolongation over aggregates of strongly connected
/// unknowns, `|a_ij| ≥ θ sqrt(a_ii a_jj)`. Built in three passes: seed
/// aggregates from untouched neighborhoods, attach leftovers to the most
/// strongly connected aggregate, then group whatever remains.
pub fn aggregation_prolongation(a: &CsrMatrix, theta: f64) -> CsrMatrix {
    let n = a.nrows();
    let d = a.diagonal();
    let strong: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter()
                .zip(vals)
                .filter(|&(&j, &v)| j != i && v.abs() >= theta * (d[i] * d[j]).abs().sqrt())
                .map(|(&j, &v)| (j, v.abs()))
                .collect()
        })
        .collect();
    const NONE: usize = usize::MAX;
    let mut agg = vec![NONE; n];
    let mut na = 0;
    for i in 0..n {
        if agg[i] == NONE && strong[i].iter().all(|&(j, _)| agg[j] == NONE) {
            agg[i] = na;
            for &(j, _) in &strong[i] {
                agg[j] = na;
            }
            na += 1;
        }
    }
    let snapshot = agg.clone();
    for i in 0..n {
        if agg[i] == NONE {
            let best = strong[i]
                .iter()
                .filter(|&&(j, _)| snapshot[j] != NONE)
                .max_by(|x, y| x.1.total_cmp(&y.1));
            if let Some(&(j, _)) = best {
                agg[i] = snapshot[j];
            }
        }
    }
    for i in 0..n {
        if agg[i] == NONE {
            agg[i] = na;
            for &(j, _) in &strong[i] {
                if agg[j] == NONE {
                    agg[j] = na;
                }
            }
            na += 1;
        }
    }
    let t: Vec<(usize, usize, f64)> = agg.iter().enumerate().map(|(i, &g)| (i, g, 1.0)).collect();
    CsrMatrix::from_triplets(n, na, &t)
}

/// Builds the inner solver for an SPD block. `TwoLevel` needs the
/// prolongation, which only exists for trace-velocity blocks.
pub fn build_inner_solver(
    a: &CsrMatrix,
    settings: InnerSettings,
    prolongation: Option<&CsrMatrix>,
    what: &str,
) -> Result<Box<dyn SpdSolver>, SolverError> {
    Ok(match settings {
        InnerSettings::Exact => Box::new(CholeskySolver::new(a, what)?),
        InnerSettings::Jacobi => Box::new(JacobiSolver::new(a, what)?),
        InnerSettings::Sgs { cycles, sweeps } => Box::new(SgsCycles::new(a, cycles, sweeps, what)?),
        InnerSettings::TwoLevel { cycles, sweeps } => {
            let p = prolongation.ok_or_else(|| {
                SolverError::Setup(format!("two-level cycles need a coarse space for {what}"))
            })?;
            Box::new(TwoLevelCycles::new(a, p.clone(), cycles, sweeps, what)?)
        }
        InnerSettings::Aggregation { cycles, sweeps } => {
            let p = aggregation_prolongation(a, AGGREGATION_THETA);
            Box::new(TwoLevelCycles::new(a, p, cycles, sweeps, what)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{SpaceConfig, Variant};
    use crate::mesh::{generate_unstructured, Rect};
    use crate::sparse::{dot, norm};

    fn laplace_2d(m: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, m * m, &t)
    }

    fn apply(s: &dyn SpdSolver, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        s.solve(b, &mut x);
        x
    }

    #[test]
    fn identity_is_returned_unchanged() {
        let id = CsrMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        for s in [InnerSettings::Exact, InnerSettings::Jacobi, InnerSettings::Sgs { cycles: 2, sweeps: 1 }] {
            let x = apply(build_inner_solver(&id, s, None, "I").unwrap().as_ref(), &b);
            assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14), "{s}");
        }
    }

    #[test]
    fn cholesky_is_exact() {
        let a = laplace_2d(9);
        let b: Vec<f64> = (0..81).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let x = apply(&CholeskySolver::new(&a, "L").unwrap(), &b);
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) <= 1e-12 * norm(&b));
    }

    #[test]
    fn stationary_cycles_are_symmetric_and_positive() {
        let a = laplace_2d(6);
        let n = 36;
        let s = SgsCycles::new(&a, 3, 2, "L").unwrap();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                apply(&s, &e)
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                assert!((cols[j][i] - cols[i][j]).abs() < 1e-13);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        assert!(dot(&x, &apply(&s, &x)) > 0.0);
    }

    #[test]
    fn more_cycles_reduce_the_error() {
        let a = laplace_2d(10);
        let b = vec![1.0; 100];
        let exact = apply(&CholeskySolver::new(&a, "L").unwrap(), &b);
        let err = |c: usize| {
            let x = apply(&SgsCycles::new(&a, c, 1, "L").unwrap(), &b);
            norm(&x.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>())
        };
        assert!(err(8) < 0.5 * err(2));
    }

    #[test]
    fn parse_settings() {
        assert_eq!("exact".parse::<InnerSettings>().unwrap(), InnerSettings::Exact);
        assert_eq!(
            "sgs:3".parse::<InnerSettings>().unwrap(),
            InnerSettings::Sgs { cycles: 3, sweeps: 1 }
        );
        assert_eq!(
            "twolevel:2:3".parse::<InnerSettings>().unwrap(),
            InnerSettings::TwoLevel { cycles: 2, sweeps: 3 }
        );
        for s in [InnerSettings::Jacobi, InnerSettings::TwoLevel { cycles: 5, sweeps: 2 }] {
            assert_eq!(s.to_string().parse::<InnerSettings>().unwrap(), s);
        }
        assert!("sgs:0".parse::<InnerSettings>().is_err());
        assert!("amg".parse::<InnerSettings>().is_err());
    }

    #[test]
    fn prolongation_reproduces_linear_fields() {
        let m = generate_unstructured(Rect::unit_square(), 0.3, 1).unwrap();
        for v in Variant::ALL {
            let l = DofLayout::build(&m, SpaceConfig::new(2, v).unwrap()).unwrap();
            let p = p1_prolongation(&m, &l);
            // every interior vertex carries (1, -2)
            let bnd = m.boundary_vertices();
            let nc = bnd.iter().filter(|b| !**b).count();
            assert_eq!(p.ncols(), 2 * nc);
            let xc: Vec<f64> = (0..2 * nc).map(|i| if i % 2 == 0 { 1.0 } else { -2.0 }).collect();
            let xf = p.mul_vec(&xc);
            // on facets with two interior vertices the result is constant
            let nodes = l.cfg.velocity_facet_basis().nodes().to_vec();
            for (fi, f) in m.facets().iter().enumerate() {
                if bnd[f.vertices[0]] || bnd[f.vertices[1]] {
                    continue;
                }
                for (j, node) in l.facet_velocity_nodes(fi).iter().enumerate() {
                    if let TraceDof::Free(id) = node {
                        assert!((xf[2 * id] - 1.0).abs() < 1e-14, "node {j} at {}", nodes[j]);
                        assert!((xf[2 * id + 1] + 2.0).abs() < 1e-14);
                    }
                }
            }
        }
    }
}
