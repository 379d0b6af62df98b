//! Element-local elimination of the element unknowns.
//!
//! The two-field system keeps `(ū, p̄)` and eliminates `u` and `p` through the
//! oblique projector `𝒫 = I - A_uu⁻¹ B_puᵀ S_pp⁻¹ B_pu` onto the kernel of
//! `B_pu`; the three-field system keeps `(ū, p, p̄)` and eliminates `u` only.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::assembly::{free_trace_velocity, scatter, scatter_sub, LocalBlocks};
use crate::error::AssemblyError;
use crate::fespace::DofLayout;
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Cached per-element inverses and projector.
#[derive(Debug, Clone)]
pub struct LocalCondensed {
    pub a_inv: Mat<f64>,
    /// `S_pp⁻¹ = (B_pu A_uu⁻¹ B_puᵀ)⁻¹`
    pub s_inv: Mat<f64>,
    pub pi: Mat<f64>,
    pub proj: Mat<f64>,
    /// `𝒫 A_uu⁻¹`, symmetric.
    pub pa_inv: Mat<f64>,
}

fn symmetrized(m: Mat<f64>) -> Mat<f64> {
    let t = m.transpose().to_owned();
    (&m + &t) * 0.5
}

/// Inverse of a small SPD matrix through its Cholesky factor; `None` if the
/// matrix is not numerically positive definite.
pub fn spd_inverse(m: &Mat<f64>) -> Option<Mat<f64>> {
    let llt = m.llt(Side::Lower).ok()?;
    let l = llt.L();
    let n = m.nrows();
    let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let d = l[(i, i)] * l[(i, i)];
        (lo.min(d), hi.max(d))
    });
    if !(lo > 1e-14 * hi) {
        return None;
    }
    Some(symmetrized(llt.solve(Mat::<f64>::identity(n, n))))
}

/// `(Π, 𝒫)` for one element.
pub fn build_local_projector(
    element: usize,
    blocks: &LocalBlocks,
) -> Result<(Mat<f64>, Mat<f64>), AssemblyError> {
    let l = LocalCondensed::new(element, blocks)?;
    Ok((l.pi, l.proj))
}

impl LocalCondensed {
    pub fn new(element: usize, b: &LocalBlocks) -> Result<Self, AssemblyError> {
        let n = b.a_uu.nrows();
        let a_inv = spd_inverse(&b.a_uu).ok_or(AssemblyError::NotPositiveDefinite {
            element,
            what: "A_uu",
        })?;
        let ainv_bt = &a_inv * b.b_pu.transpose();
        let s = &b.b_pu * &ainv_bt;
        let s_inv = spd_inverse(&s).ok_or(AssemblyError::RankDeficientDivergence { element })?;
        let pi = &ainv_bt * &s_inv * &b.b_pu;
        let proj = Mat::<f64>::identity(n, n) - &pi;
        let pa_inv = symmetrized(&proj * &a_inv);
        Ok(Self {
            a_inv,
            s_inv,
            pi,
            proj,
            pa_inv,
        })
    }

    /// `Â_γ⁻¹ = (A_uu + γ B_puᵀ B_pu)⁻¹` by the Woodbury identity (`M = I`).
    pub fn agamma_inv(&self, b: &LocalBlocks, gamma: f64) -> Mat<f64> {
        if gamma == 0.0 {
            return self.a_inv.clone();
        }
        let ainv_bt = &self.a_inv * b.b_pu.transpose();
        let s = b.b_pu.as_ref() * &ainv_bt;
        let nq = s.nrows();
        let inner = Mat::<f64>::identity(nq, nq) * (1.0 / gamma) + s;
        let inner_inv = spd_inverse(&inner).expect("γ⁻¹I + S_pp is SPD");
        symmetrized(&self.a_inv - &ainv_bt * inner_inv * ainv_bt.transpose())
    }
}

pub fn condense_all(blocks: &[LocalBlocks]) -> Result<Vec<LocalCondensed>, AssemblyError> {
    blocks
        .par_iter()
        .enumerate()
        .map(|(e, b)| LocalCondensed::new(e, b))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SystemKind {
    TwoField,
    ThreeField,
}

/// Globally assembled reduced system.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub kind: SystemKind,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Unit-norm constant-pressure mode.
    pub null_vector: Vec<f64>,
    pub n_trace_velocity: usize,
    /// Element pressure unknowns (zero for the two-field system).
    pub n_pressure: usize,
    pub n_trace_pressure: usize,
}

impl CondensedSystem {
    pub fn dim(&self) -> usize {
        self.n_trace_velocity + self.n_pressure + self.n_trace_pressure
    }

    /// Splits a solution vector into `(ū, p, p̄)`; `p` is empty for two-field.
    pub fn split<'v>(&self, x: &'v [f64]) -> (&'v [f64], &'v [f64], &'v [f64]) {
        let a = self.n_trace_velocity;
        let b = a + self.n_pressure;
        (&x[..a], &x[a..b], &x[b..])
    }

    /// Diagonal block of the first (trace velocity) field.
    pub fn velocity_block(&self) -> CsrMatrix {
        let idx: Vec<usize> = (0..self.n_trace_velocity).collect();
        self.matrix.principal_submatrix(&idx)
    }

    /// Null-vector residual `‖K n‖ / ‖K‖_max`.
    pub fn null_residual(&self) -> f64 {
        let r = self.matrix.mul_vec(&self.null_vector);
        crate::sparse::norm(&r) / self.matrix.max_abs()
    }
}

/// Coefficients of the constant function 1 in the element pressure basis.
pub fn element_pressure_ones(mesh: &Mesh, layout: &DofLayout) -> Vec<f64> {
    let mut one = vec![0.0; layout.num_pressure()];
    for e in 0..mesh.num_elements() {
        one[layout.element_pressure_range(e).start] = mesh.area(e).sqrt();
    }
    one
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = crate::sparse::norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

fn mat_tr_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)] * x[i]).sum())
        .collect()
}

struct LocalTwoField {
    k: Mat<f64>,
    rhs: Vec<f64>,
}

pub fn build_two_field(
    layout: &DofLayout,
    blocks: &[LocalBlocks],
    locals: &[LocalCondensed],
) -> CondensedSystem {
    let ntu = layout.num_trace_velocity();
    let ntq = layout.num_trace_pressure();
    let n = ntu + ntq;
    let local: Vec<LocalTwoField> = blocks
        .par_iter()
        .zip(locals)
        .map(|(b, l)| {
            // rows/cols: local trace velocity, then local trace pressure
            let mut g = Mat::<f64>::zeros(b.a_bu.nrows() + b.b_qu.nrows(), b.a_uu.nrows());
            let nt = b.a_bu.nrows();
            for i in 0..nt {
                for j in 0..g.ncols() {
                    g[(i, j)] = b.a_bu[(i, j)];
                }
            }
            for i in 0..b.b_qu.nrows() {
                for j in 0..g.ncols() {
                    g[(nt + i, j)] = b.b_qu[(i, j)];
                }
            }
            let mut k = -(&g * &l.pa_inv * g.transpose());
            for i in 0..nt {
                for j in 0..nt {
                    k[(i, j)] += b.a_bb[(i, j)];
                }
            }
            let y = mat_vec(&l.pa_inv, &b.load);
            let mut rhs: Vec<f64> = mat_vec(&g, &y).iter().map(|v| -v).collect();
            for (r, lt) in rhs.iter_mut().zip(&b.load_trace) {
                *r += lt;
            }
            LocalTwoField { k, rhs }
        })
        .collect();

    let mut t = TripletBuilder::with_capacity(n, n, local.len() * local[0].k.nrows().pow(2));
    let mut rhs = vec![0.0; n];
    for (e, lk) in local.iter().enumerate() {
        let (lt, gt) = free_trace_velocity(layout, e);
        let nt = layout.local_trace_velocity();
        let (mut lrow, mut grow) = (lt, gt);
        for (j, g) in layout.element_trace_pressure(e).into_iter().enumerate() {
            lrow.push(nt + j);
            grow.push(ntu + g);
        }
        scatter_sub(&mut t, &lk.k, (&lrow, &grow), (&lrow, &grow));
        for (&l, &g) in lrow.iter().zip(&grow) {
            rhs[g] += lk.rhs[l];
        }
    }
    let mut null = vec![0.0; n];
    null[ntu..].iter_mut().for_each(|v| *v = 1.0);
    CondensedSystem {
        kind: SystemKind::TwoField,
        matrix: t.build(),
        rhs,
        null_vector: normalized(null),
        n_trace_velocity: ntu,
        n_pressure: 0,
        n_trace_pressure: ntq,
    }
}

pub fn build_three_field(
    mesh: &Mesh,
    layout: &DofLayout,
    blocks: &[LocalBlocks],
    locals: &[LocalCondensed],
) -> CondensedSystem {
    let ntu = layout.num_trace_velocity();
    let nq = layout.num_pressure();
    let ntq = layout.num_trace_pressure();
    let n = ntu + nq + ntq;
    let local: Vec<LocalTwoField> = blocks
        .par_iter()
        .zip(locals)
        .map(|(b, l)| {
            let (nt, np, nb) = (b.a_bu.nrows(), b.b_pu.nrows(), b.b_qu.nrows());
            let mut g = Mat::<f64>::zeros(nt + np + nb, b.a_uu.nrows());
            for j in 0..g.ncols() {
                for i in 0..nt {
                    g[(i, j)] = b.a_bu[(i, j)];
                }
                for i in 0..np {
                    g[(nt + i, j)] = b.b_pu[(i, j)];
                }
                for i in 0..nb {
                    g[(nt + np + i, j)] = b.b_qu[(i, j)];
                }
            }
            let mut k = -(&g * &l.a_inv * g.transpose());
            for i in 0..nt {
                for j in 0..nt {
                    k[(i, j)] += b.a_bb[(i, j)];
                }
            }
            let y = mat_vec(&l.a_inv, &b.load);
            let mut rhs: Vec<f64> = mat_vec(&g, &y).iter().map(|v| -v).collect();
            for (r, lt) in rhs.iter_mut().zip(&b.load_trace) {
                *r += lt;
            }
            LocalTwoField { k, rhs }
        })
        .collect();

    let mut t = TripletBuilder::with_capacity(n, n, local.len() * local[0].k.nrows().pow(2));
    let mut rhs = vec![0.0; n];
    let nt = layout.local_trace_velocity();
    let np = layout.local_pressure();
    for (e, lk) in local.iter().enumerate() {
        let (mut lrow, mut grow) = free_trace_velocity(layout, e);
        for (j, g) in layout.element_pressure_range(e).enumerate() {
            lrow.push(nt + j);
            grow.push(ntu + g);
        }
        for (j, g) in layout.element_trace_pressure(e).into_iter().enumerate() {
            lrow.push(nt + np + j);
            grow.push(ntu + nq + g);
        }
        scatter_sub(&mut t, &lk.k, (&lrow, &grow), (&lrow, &grow));
        for (&l, &g) in lrow.iter().zip(&grow) {
            rhs[g] += lk.rhs[l];
        }
    }
    let mut null = vec![0.0; n];
    null[ntu..ntu + nq].copy_from_slice(&element_pressure_ones(mesh, layout));
    null[ntu + nq..].iter_mut().for_each(|v| *v = 1.0);
    CondensedSystem {
        kind: SystemKind::ThreeField,
        matrix: t.build(),
        rhs,
        null_vector: normalized(null),
        n_trace_velocity: ntu,
        n_pressure: nq,
        n_trace_pressure: ntq,
    }
}

/// Element velocity and pressure recovered from a trace solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementFields {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

/// Local recovery. For the two-field system `u = 𝒫A⁻¹r` and
/// `p = S_pp⁻¹ B_pu A⁻¹ r` with `r = L_u - A_ūuᵀū - B_p̄uᵀp̄`; for the
/// three-field system `u = A⁻¹(r - B_puᵀp)` with `p` taken from the solution.
pub fn back_substitute(
    system: &CondensedSystem,
    layout: &DofLayout,
    blocks: &[LocalBlocks],
    locals: &[LocalCondensed],
    x: &[f64],
) -> ElementFields {
    let (ub, p_glob, qb) = system.split(x);
    let per: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks.len())
        .into_par_iter()
        .map(|e| {
            let b = &blocks[e];
            let l = &locals[e];
            let mut ub_loc = vec![0.0; layout.local_trace_velocity()];
            let (lt, gt) = free_trace_velocity(layout, e);
            for (&li, &gi) in lt.iter().zip(&gt) {
                ub_loc[li] = ub[gi];
            }
            let qb_loc: Vec<f64> = layout
                .element_trace_pressure(e)
                .iter()
                .map(|&g| qb[g])
                .collect();
            let mut r = b.load.clone();
            for (ri, (x1, x2)) in r
                .iter_mut()
                .zip(mat_tr_vec(&b.a_bu, &ub_loc).iter().zip(mat_tr_vec(&b.b_qu, &qb_loc)))
            {
                *ri -= x1 + x2;
            }
            match system.kind {
                SystemKind::TwoField => {
                    let u = mat_vec(&l.pa_inv, &r);
                    let ar = mat_vec(&l.a_inv, &r);
                    let p = mat_vec(&l.s_inv, &mat_vec(&b.b_pu, &ar));
                    (u, p)
                }
                SystemKind::ThreeField => {
                    let p: Vec<f64> = p_glob[layout.element_pressure_range(e)].to_vec();
                    for (ri, bp) in r.iter_mut().zip(mat_tr_vec(&b.b_pu, &p)) {
                        *ri -= bp;
                    }
                    (mat_vec(&l.a_inv, &r), p)
                }
            }
        })
        .collect();
    let mut u = Vec::with_capacity(layout.num_velocity());
    let mut p = Vec::with_capacity(layout.num_pressure());
    for (ue, pe) in per {
        u.extend(ue);
        p.extend(pe);
    }
    ElementFields { u, p }
}

/// Grad-div augmented trace operator
/// `Ā_γ = A_ūū - A_ūu (A_uu + γ B_puᵀ M⁻¹ B_pu)⁻¹ A_ūuᵀ` on free trace DOFs.
pub fn build_agamma(
    layout: &DofLayout,
    blocks: &[LocalBlocks],
    locals: &[LocalCondensed],
    gamma: f64,
) -> CsrMatrix {
    let local: Vec<Mat<f64>> = blocks
        .par_iter()
        .zip(locals)
        .map(|(b, l)| &b.a_bb - &b.a_bu * l.agamma_inv(b, gamma) * b.a_bu.transpose())
        .collect();
    let n = layout.num_trace_velocity();
    let mut t = TripletBuilder::new(n, n);
    for (e, m) in local.iter().enumerate() {
        let (lt, gt) = free_trace_velocity(layout, e);
        scatter_sub(&mut t, m, (&lt, &gt), (&lt, &gt));
    }
    t.build()
}

/// `Ā^d = A_ūū - A_ūu 𝒫 A_uu⁻¹ A_ūuᵀ`, the velocity block of the two-field
/// system, on free trace DOFs.
pub fn build_ad(layout: &DofLayout, blocks: &[LocalBlocks], locals: &[LocalCondensed]) -> CsrMatrix {
    let local: Vec<Mat<f64>> = blocks
        .par_iter()
        .zip(locals)
        .map(|(b, l)| &b.a_bb - &b.a_bu * &l.pa_inv * b.a_bu.transpose())
        .collect();
    let n = layout.num_trace_velocity();
    let mut t = TripletBuilder::new(n, n);
    for (e, m) in local.iter().enumerate() {
        let (lt, gt) = free_trace_velocity(layout, e);
        scatter_sub(&mut t, m, (&lt, &gt), (&lt, &gt));
    }
    t.build()
}

/// `B_p̄u A_uu⁻¹ B_p̄uᵀ`
pub fn build_bab(layout: &DofLayout, blocks: &[LocalBlocks], locals: &[LocalCondensed]) -> CsrMatrix {
    let local: Vec<Mat<f64>> = blocks
        .par_iter()
        .zip(locals)
        .map(|(b, l)| &b.b_qu * &l.a_inv * b.b_qu.transpose())
        .collect();
    let n = layout.num_trace_pressure();
    let mut t = TripletBuilder::new(n, n);
    for (e, m) in local.iter().enumerate() {
        let d = layout.element_trace_pressure(e);
        scatter(&mut t, m, &d, &d);
    }
    t.build()
}

/// Shifts `(p, p̄)` by a constant so that the element pressure has zero mean.
pub fn normalize_pressure(mesh: &Mesh, layout: &DofLayout, p: &mut [f64], pbar: &mut [f64]) {
    let ones = element_pressure_ones(mesh, layout);
    let mean = crate::sparse::dot(&ones, p) / mesh.total_area();
    for (pi, oi) in p.iter_mut().zip(&ones) {
        *pi -= mean * oi;
    }
    pbar.iter_mut().for_each(|v| *v -= mean);
}
