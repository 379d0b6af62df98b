//! Dense diagnostics on small meshes: the trace-pressure Schur complement,
//! generalized eigenvalue extremes of matrix pencils and the mesh-dependent
//! norms of trace and element fields.

use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::Serialize;

use crate::assembly::{free_trace_velocity, scatter_sub};
use crate::condensation::{CondensedSystem, SystemKind};
use crate::error::{SolverError, SpectralError};
use crate::fespace::SegmentRule;
use crate::krylov::{CholeskySolver, PreconFamily, SpdSolver};
use crate::problem::Discretization;
use crate::sparse::{norm, CsrMatrix, TripletBuilder};

/// Largest trace-pressure space for which `S̄` is formed densely.
pub const SCHUR_CAP: usize = 2000;
/// Largest dense pencil.
pub const PENCIL_CAP: usize = 4000;

fn check_cap(size: usize, cap: usize) -> Result<(), SpectralError> {
    if size > cap {
        Err(SpectralError::SizeCap { size, cap })
    } else {
        Ok(())
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `H A H` with the Householder reflector `H = I - τ v vᵀ`, then the first
/// row and column dropped. When `H w ∥ e₀` this restricts `A` to an
/// orthonormal basis of `w⊥`.
fn reflect_and_drop(a: &Mat<f64>, v: &[f64], tau: f64) -> Mat<f64> {
    let n = a.nrows();
    let p: Vec<f64> = (0..n)
        .map(|i| tau * (0..n).map(|j| a[(i, j)] * v[j]).sum::<f64>())
        .collect();
    let vp: f64 = v.iter().zip(&p).map(|(x, y)| x * y).sum();
    let w: Vec<f64> = p.iter().zip(v).map(|(pi, vi)| pi - 0.5 * tau * vp * vi).collect();
    Mat::from_fn(n - 1, n - 1, |i, j| {
        let (i, j) = (i + 1, j + 1);
        a[(i, j)] - v[i] * w[j] - w[i] * v[j]
    })
}

fn householder(w: &[f64]) -> (Vec<f64>, f64) {
    let nw = norm(w);
    let mut v: Vec<f64> = w.iter().map(|x| x / nw).collect();
    v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let vv: f64 = v.iter().map(|x| x * x).sum();
    (v, 2.0 / vv)
}

/// Orthonormal basis (as columns) of the complement of `w`.
pub fn complement_basis(w: &[f64]) -> Mat<f64> {
    let n = w.len();
    let (v, tau) = householder(w);
    Mat::from_fn(n, n - 1, |i, j| {
        let j = j + 1;
        f64::from(u8::from(i == j)) - tau * v[i] * v[j]
    })
}

/// Eigenvalues of the pencil `(A, B)` with `B` symmetric positive definite,
/// ascending. With a null vector `n` of `A`, the pencil is restricted to the
/// `B`-orthogonal complement of `n`, which removes the zero eigenvalue and
/// leaves the others untouched.
pub fn generalized_eigenvalues(
    a: &Mat<f64>,
    b: &Mat<f64>,
    null: Option<&[f64]>,
) -> Result<Vec<f64>, SpectralError> {
    let n = a.nrows();
    if b.nrows() != n || a.ncols() != n || b.ncols() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: b.nrows() }.into());
    }
    check_cap(n, PENCIL_CAP)?;
    let (mut ar, mut br) = match null {
        Some(nv) => {
            let bn: Vec<f64> = (0..n).map(|i| (0..n).map(|j| b[(i, j)] * nv[j]).sum()).collect();
            let (v, tau) = householder(&bn);
            (reflect_and_drop(a, &v, tau), reflect_and_drop(b, &v, tau))
        }
        None => (a.clone(), b.clone()),
    };
    symmetrize(&mut ar);
    symmetrize(&mut br);
    let evd = br.self_adjoint_eigen(Side::Lower).map_err(|_| SpectralError::Eigen)?;
    let s = evd.S().column_vector();
    let m = br.nrows();
    let smax = (0..m).map(|i| s[i].abs()).fold(0.0, f64::max);
    if (0..m).any(|i| !(s[i] > 1e-13 * smax)) {
        return Err(SpectralError::IndefiniteWeight);
    }
    // B^{-1/2} = U S^{-1/2} Uᵀ
    let u = evd.U();
    let us = Mat::from_fn(m, m, |i, j| u[(i, j)] / s[j].sqrt());
    let half = &us * u.transpose();
    let mut c = &half * &ar * &half;
    symmetrize(&mut c);
    c.self_adjoint_eigenvalues(Side::Lower).map_err(|_| SpectralError::Eigen)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Discretization variant, filled in by the studies.
    pub variant: String,
    pub pair: String,
    pub level: usize,
    pub elements: usize,
    pub dim: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `(min, max)` of the negative eigenvalues, if any.
    pub negative: Option<(f64, f64)>,
    /// `(min, max)` of the positive eigenvalues, if any.
    pub positive: Option<(f64, f64)>,
    /// Full spectrum when it has at most 500 entries.
    pub eigenvalues: Option<Vec<f64>>,
}

impl SpectrumReport {
    pub fn from_eigenvalues(pair: &str, level: usize, elements: usize, eig: Vec<f64>) -> Self {
        let range = |it: Vec<f64>| {
            (!it.is_empty()).then(|| {
                (
                    it.iter().copied().fold(f64::INFINITY, f64::min),
                    it.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            })
        };
        Self {
            variant: String::new(),
            pair: pair.to_string(),
            level,
            elements,
            dim: eig.len(),
            lambda_min: eig.iter().copied().fold(f64::INFINITY, f64::min),
            lambda_max: eig.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            negative: range(eig.iter().copied().filter(|&x| x < 0.0).collect()),
            positive: range(eig.iter().copied().filter(|&x| x > 0.0).collect()),
            eigenvalues: (eig.len() <= 500).then_some(eig),
        }
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    variant: &'a str,
    pair: &'a str,
    level: usize,
    elements: usize,
    dim: usize,
    lambda_min: f64,
    lambda_max: f64,
    neg_min: Option<f64>,
    neg_max: Option<f64>,
    pos_min: Option<f64>,
    pos_max: Option<f64>,
}

pub fn write_reports_csv(path: impl AsRef<Path>, reports: &[SpectrumReport]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(ReportRow {
            variant: &r.variant,
            pair: &r.pair,
            level: r.level,
            elements: r.elements,
            dim: r.dim,
            lambda_min: r.lambda_min,
            lambda_max: r.lambda_max,
            neg_min: r.negative.map(|x| x.0),
            neg_max: r.negative.map(|x| x.1),
            pos_min: r.positive.map(|x| x.0),
            pos_max: r.positive.map(|x| x.1),
        })?;
    }
    w.flush()
}

pub fn write_reports_json(path: impl AsRef<Path>, reports: &[SpectrumReport]) -> std::io::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(reports)?)
}

/// Element-wise assembly of `Σ_K Lᵀ X_K R` style blocks: each element gives
/// a local matrix over (local trace pressure, local trace velocity).
fn assemble_qb_ub(disc: &Discretization, local: impl Fn(usize) -> Mat<f64>) -> Mat<f64> {
    let nq = disc.layout.num_trace_pressure();
    let nu = disc.layout.num_trace_velocity();
    let mut t = TripletBuilder::new(nq, nu);
    for e in 0..disc.mesh.num_elements() {
        let m = local(e);
        let rows = disc.layout.element_trace_pressure(e);
        let lrows: Vec<usize> = (0..rows.len()).collect();
        let (lc, gc) = free_trace_velocity(&disc.layout, e);
        scatter_sub(&mut t, &m, (&lrows, &rows), (&lc, &gc));
    }
    t.build().to_dense()
}

/// `S̄ = B_p̄u 𝒫 (A_uu⁻¹ + A_uu⁻¹ A_ūuᵀ (Ā^d)⁻¹ A_ūu A_uu⁻¹) 𝒫ᵀ B_p̄uᵀ`,
/// built from the element projectors and inverses.
pub fn schur_sbar_formula(disc: &Discretization) -> Result<Mat<f64>, SpectralError> {
    let nq = disc.layout.num_trace_pressure();
    check_cap(nq, SCHUR_CAP)?;
    let mut first = TripletBuilder::new(nq, nq);
    for (e, (b, l)) in disc.blocks.iter().zip(&disc.locals).enumerate() {
        let y = &b.b_qu * &l.proj;
        let m = &y * &l.a_inv * y.transpose();
        let d = disc.layout.element_trace_pressure(e);
        crate::assembly::scatter(&mut first, &m, &d, &d);
    }
    let z = assemble_qb_ub(disc, |e| {
        let (b, l) = (&disc.blocks[e], &disc.locals[e]);
        &b.b_qu * &l.proj * &l.a_inv * b.a_bu.transpose()
    });
    let ad = CholeskySolver::new(&disc.ad(), "Ā^d")?;
    let nu = z.ncols();
    let mut s = first.build().to_dense();
    let mut col = vec![0.0; nu];
    let mut sol = vec![0.0; nu];
    // S̄ += Z (Ā^d)⁻¹ Zᵀ, one row of Z at a time
    let mut w = Mat::<f64>::zeros(nu, nq);
    for j in 0..nq {
        for (i, c) in col.iter_mut().enumerate() {
            *c = z[(j, i)];
        }
        ad.solve(&col, &mut sol);
        for (i, v) in sol.iter().enumerate() {
            w[(i, j)] = *v;
        }
    }
    s += &z * &w;
    symmetrize(&mut s);
    Ok(s)
}

/// `S̄ = -(K_qq - K_qu K_uu⁻¹ K_uq)` from the assembled two-field matrix.
pub fn schur_sbar_elimination(system: &CondensedSystem) -> Result<Mat<f64>, SpectralError> {
    if system.kind != SystemKind::TwoField {
        return Err(SolverError::IncompatiblePreconditioner("S̄ needs the two-field system".into()).into());
    }
    let (nu, nq) = (system.n_trace_velocity, system.n_trace_pressure);
    check_cap(nq, SCHUR_CAP)?;
    check_cap(nu + nq, 3 * PENCIL_CAP)?;
    let k = system.matrix.to_dense();
    let kuu = k.submatrix(0, 0, nu, nu).to_owned();
    let kuq = k.submatrix(0, nu, nu, nq).to_owned();
    let kqq = k.submatrix(nu, nu, nq, nq).to_owned();
    let llt = kuu.llt(Side::Lower).map_err(|_| SpectralError::IndefiniteWeight)?;
    let x = llt.solve(&kuq);
    let mut s = kuq.transpose() * &x - &kqq;
    symmetrize(&mut s);
    Ok(s)
}

/// Eigenvalue spectra of `(S̄, M̄)` and `(S̄, B_p̄u A_uu⁻¹ B_p̄uᵀ)` with the
/// constant trace pressure deflated.
pub fn sbar_spectra(disc: &Discretization, level: usize) -> Result<[SpectrumReport; 2], SpectralError> {
    let s = schur_sbar_formula(disc)?;
    let ones = vec![1.0; s.nrows()];
    let ne = disc.mesh.num_elements();
    let m = disc.trace_mass().to_dense();
    let bab = disc.bab().to_dense();
    Ok([
        SpectrumReport::from_eigenvalues("S̄/M̄", level, ne, generalized_eigenvalues(&s, &m, Some(&ones))?),
        SpectrumReport::from_eigenvalues("S̄/BAB", level, ne, generalized_eigenvalues(&s, &bab, Some(&ones))?),
    ])
}

/// Spectrum of the two-field matrix preconditioned by `diag(Ā^d, M̄)` or
/// `diag(Ā^d, BAB)`, null vector deflated.
pub fn preconditioned_spectrum(
    disc: &Discretization,
    family: PreconFamily,
    level: usize,
) -> Result<SpectrumReport, SpectralError> {
    let sys = disc.system(SystemKind::TwoField);
    check_cap(sys.dim(), PENCIL_CAP)?;
    let nu = sys.n_trace_velocity;
    let pq = match family {
        PreconFamily::PMbar => disc.trace_mass(),
        PreconFamily::PBab => disc.bab(),
        PreconFamily::P3x3 => {
            return Err(SolverError::IncompatiblePreconditioner(family.to_string()).into())
        }
    };
    let ad = sys.velocity_block().to_dense();
    let pq = pq.to_dense();
    let n = sys.dim();
    let p = Mat::from_fn(n, n, |i, j| match (i < nu, j < nu) {
        (true, true) => ad[(i, j)],
        (false, false) => pq[(i - nu, j - nu)],
        _ => 0.0,
    });
    let eig = generalized_eigenvalues(&sys.matrix.to_dense(), &p, Some(&sys.null_vector))?;
    Ok(SpectrumReport::from_eigenvalues(
        &format!("K/{family}"),
        level,
        disc.mesh.num_elements(),
        eig,
    ))
}

/// Rayleigh-quotient extremes of `(Ā_γ, Ā_0)`.
pub fn agamma_equivalence(disc: &Discretization, gamma: f64, level: usize) -> Result<SpectrumReport, SpectralError> {
    let a0 = disc.agamma(0.0);
    check_cap(a0.nrows(), PENCIL_CAP)?;
    let ag = disc.agamma(gamma);
    let eig = generalized_eigenvalues(&ag.to_dense(), &a0.to_dense(), None)?;
    Ok(SpectrumReport::from_eigenvalues(
        &format!("Ā_{gamma}/Ā_0"),
        level,
        disc.mesh.num_elements(),
        eig,
    ))
}

/// Global block-diagonal `𝒫` over the element velocity DOFs.
pub fn projector_matrix(disc: &Discretization) -> CsrMatrix {
    let n = disc.layout.num_velocity();
    let mut t = TripletBuilder::new(n, n);
    for (e, l) in disc.locals.iter().enumerate() {
        let d: Vec<usize> = disc.layout.element_velocity_range(e).collect();
        crate::assembly::scatter(&mut t, &l.proj, &d, &d);
    }
    t.build()
}

fn block2(a11: &CsrMatrix, a12: &CsrMatrix, a21: &CsrMatrix, a22: &CsrMatrix) -> CsrMatrix {
    let (n1, n2) = (a11.nrows(), a22.nrows());
    let mut t = TripletBuilder::new(n1 + n2, n1 + n2);
    for (m, r0, c0) in [(a11, 0, 0), (a12, 0, n1), (a21, n1, 0), (a22, n1, n1)] {
        for (i, j, v) in m.triplets() {
            t.push(r0 + i, c0 + j, v);
        }
    }
    t.build()
}

/// Velocity block `A` of the full system over `(u, ū)`.
pub fn velocity_operator(disc: &Discretization) -> CsrMatrix {
    let g = disc.global();
    block2(&g.a_uu, &g.a_bu.transpose(), &g.a_bu, &g.a_bb)
}

/// `A_𝒫 = [A_uu, 𝒫ᵀA_ūuᵀ; A_ūu𝒫, A_ūū]`.
pub fn projected_velocity_operator(disc: &Discretization) -> CsrMatrix {
    let g = disc.global();
    let p = projector_matrix(disc);
    let a21 = g.a_bu.matmul(&p);
    block2(&g.a_uu, &a21.transpose(), &a21, &g.a_bb)
}

/// Mesh-dependent norms as assembled quadratic forms.
///
/// Trace-velocity vectors hold the free DOFs only; constrained boundary
/// values are taken as zero.
pub struct DiscreteNorms {
    /// `Σ h_K ‖v̄‖²_∂K`
    pub facet_l2: CsrMatrix,
    /// `Σ h_K⁻¹ ‖v̄ - m_K(v̄)‖²_∂K`
    pub facet_h1: CsrMatrix,
    /// `Σ ‖∇v‖²_K + α h_K⁻¹ ‖v̄ - v‖²_∂K` over `(v, v̄)`.
    pub stability: CsrMatrix,
    /// `Σ h_K ‖q̄‖²_∂K`
    pub trace_pressure: CsrMatrix,
    /// `‖q‖²_Ω + ‖q̄‖²_p` over `(q, q̄)`.
    pub full_pressure: CsrMatrix,
}

impl DiscreteNorms {
    pub fn new(disc: &Discretization) -> Self {
        let layout = &disc.layout;
        let nub = layout.num_trace_velocity();
        let nu = layout.num_velocity();
        let mut l2 = TripletBuilder::new(nub, nub);
        let mut h1 = TripletBuilder::new(nub, nub);
        let mut st = TripletBuilder::new(nu + nub, nu + nub);
        for e in 0..disc.mesh.num_elements() {
            let (ml2, mh1) = local_facet_norms(disc, e);
            let (lt, gt) = free_trace_velocity(layout, e);
            scatter_sub(&mut l2, &ml2, (&lt, &gt), (&lt, &gt));
            scatter_sub(&mut h1, &mh1, (&lt, &gt), (&lt, &gt));
            let ms = local_stability(disc, e);
            let nl = layout.local_velocity();
            let mut lrow: Vec<usize> = (0..nl).collect();
            let mut grow: Vec<usize> = layout.element_velocity_range(e).collect();
            lrow.extend(lt.iter().map(|&l| nl + l));
            grow.extend(gt.iter().map(|&g| nu + g));
            scatter_sub(&mut st, &ms, (&lrow, &grow), (&lrow, &grow));
        }
        let trace_pressure = disc.trace_mass();
        let pm = disc.pressure_mass();
        let full_pressure = block2(
            &pm,
            &CsrMatrix::zeros(pm.nrows(), trace_pressure.nrows()),
            &CsrMatrix::zeros(trace_pressure.nrows(), pm.nrows()),
            &trace_pressure,
        );
        Self {
            facet_l2: l2.build(),
            facet_h1: h1.build(),
            stability: st.build(),
            trace_pressure,
            full_pressure,
        }
    }

    fn eval(m: &CsrMatrix, x: &[f64]) -> Result<f64, SpectralError> {
        if x.len() != m.nrows() {
            return Err(SpectralError::LayoutMismatch {
                expected: m.nrows(),
                got: x.len(),
            });
        }
        let y = m.mul_vec(x);
        Ok(crate::sparse::dot(x, &y).max(0.0).sqrt())
    }

    pub fn facet_l2_norm(&self, ubar: &[f64]) -> Result<f64, SpectralError> {
        Self::eval(&self.facet_l2, ubar)
    }

    pub fn facet_h1_norm(&self, ubar: &[f64]) -> Result<f64, SpectralError> {
        Self::eval(&self.facet_h1, ubar)
    }

    pub fn stability_norm(&self, u: &[f64], ubar: &[f64]) -> Result<f64, SpectralError> {
        let mut x = u.to_vec();
        x.extend_from_slice(ubar);
        Self::eval(&self.stability, &x)
    }

    pub fn trace_pressure_norm(&self, pbar: &[f64]) -> Result<f64, SpectralError> {
        Self::eval(&self.trace_pressure, pbar)
    }

    pub fn full_pressure_norm(&self, p: &[f64], pbar: &[f64]) -> Result<f64, SpectralError> {
        let mut x = p.to_vec();
        x.extend_from_slice(pbar);
        Self::eval(&self.full_pressure, &x)
    }
}

/// Facet geometry of local facet `lf`: end points and length.
fn facet_ends(disc: &Discretization, e: usize, lf: usize) -> ([f64; 2], [f64; 2], f64) {
    let f = disc.mesh.element_facets(e)[lf];
    let [a, b] = disc.mesh.facets()[f].vertices.map(|v| disc.mesh.vertices()[v]);
    (a, b, disc.mesh.facet_length(f))
}

/// Local `(Σ h ⟨λ, λ⟩, h⁻¹(⟨λ, λ⟩ - m m ᵀ |∂K|))` over the local trace
/// velocity DOFs of element `e`.
pub fn local_facet_norms(disc: &Discretization, e: usize) -> (Mat<f64>, Mat<f64>) {
    let k = disc.layout.k();
    let nf = k + 1;
    let n = disc.layout.local_trace_velocity();
    let basis = disc.layout.cfg.velocity_facet_basis();
    let rule = SegmentRule::new(2 * k + 1);
    let h = disc.mesh.h(e);
    let mut mass = Mat::<f64>::zeros(n, n);
    let mut mean = vec![0.0; n];
    let mut perimeter = 0.0;
    for lf in 0..3 {
        let (_, _, len) = facet_ends(disc, e, lf);
        perimeter += len;
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let lam = basis.values(t);
            for c in 0..2 {
                let off = (lf * 2 + c) * nf;
                for i in 0..nf {
                    mean[off + i] += w * len * lam[i];
                    for j in 0..nf {
                        mass[(off + i, off + j)] += w * len * lam[i] * lam[j];
                    }
                }
            }
        }
    }
    let l2 = &mass * h;
    // only same-component DOFs share a mean
    let h1 = Mat::from_fn(n, n, |i, j| {
        let same = (i / nf) % 2 == (j / nf) % 2;
        let corr = if same { mean[i] * mean[j] / perimeter } else { 0.0 };
        (mass[(i, j)] - corr) / h
    });
    (l2, h1)
}

/// Local stability form over `(v_K, v̄ on ∂K)`.
pub fn local_stability(disc: &Discretization, e: usize) -> Mat<f64> {
    let asm = disc.assembler();
    let k = disc.layout.k();
    let nf = k + 1;
    let d = asm.element_basis().dim();
    let nl = 2 * d;
    let n = nl + disc.layout.local_trace_velocity();
    let mut m = Mat::<f64>::zeros(n, n);
    for qp in asm.volume_quadrature(e) {
        for i in 0..d {
            for j in 0..d {
                let g = qp.gradients[i][0] * qp.gradients[j][0] + qp.gradients[i][1] * qp.gradients[j][1];
                for c in 0..2 {
                    m[(c * d + i, c * d + j)] += qp.weight * g;
                }
            }
        }
    }
    let map = asm.element_map(e);
    let basis = disc.layout.cfg.velocity_facet_basis();
    let rule = SegmentRule::new(2 * k + 1);
    let scale = disc.cfg.alpha / disc.mesh.h(e);
    for lf in 0..3 {
        let (a, b, len) = facet_ends(disc, e, lf);
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let phi = asm.element_basis().physical(&map, x).values;
            let lam = basis.values(t);
            for c in 0..2 {
                // jump functional: v̄ - v
                let mut idx = Vec::with_capacity(d + nf);
                let mut val = Vec::with_capacity(d + nf);
                for (i, p) in phi.iter().enumerate() {
                    idx.push(c * d + i);
                    val.push(-p);
                }
                for (j, l) in lam.iter().enumerate() {
                    idx.push(nl + (lf * 2 + c) * nf + j);
                    val.push(*l);
                }
                for (ii, vi) in idx.iter().zip(&val) {
                    for (jj, vj) in idx.iter().zip(&val) {
                        m[(*ii, *jj)] += scale * w * len * vi * vj;
                    }
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::AssemblyConfig;
    use crate::fespace::{SpaceConfig, Variant};
    use crate::mesh::{generate_unstructured, Mesh, Point, Rect};
    use rand::{Rng, SeedableRng};

    fn two_triangles() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    fn disc_on(m: Mesh, v: Variant) -> Discretization {
        let s = SpaceConfig::new(2, v).unwrap();
        let f = |x: Point| [x[1].cos(), x[0]];
        let g = |x: Point| [x[1] * (1.0 - x[1]), 0.0];
        Discretization::new(m, s, AssemblyConfig::defaults_for(&s), &f, &g).unwrap()
    }

    fn small(v: Variant) -> Discretization {
        disc_on(generate_unstructured(Rect::unit_square(), 0.4, 2).unwrap(), v)
    }

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    fn max_abs(m: &Mat<f64>) -> f64 {
        let mut x: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                x = x.max(m[(i, j)].abs());
            }
        }
        x
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let w = rand_vec(9, 3);
        let q = complement_basis(&w);
        let qtq = q.transpose() * &q;
        for i in 0..8 {
            for j in 0..8 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - e).abs() < 1e-14);
            }
            let d: f64 = (0..9).map(|r| q[(r, i)] * w[r]).sum();
            assert!(d.abs() < 1e-14);
        }
    }

    #[test]
    fn reflection_matches_explicit_basis() {
        let n = 7;
        let g = Mat::from_fn(n, n, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let a = &g + g.transpose();
        let w = rand_vec(n, 5);
        let q = complement_basis(&w);
        let direct = q.transpose() * &a * &q;
        let (v, tau) = householder(&w);
        let fast = reflect_and_drop(&a, &v, tau);
        assert!(max_abs(&(&direct - &fast)) < 1e-13);
    }

    #[test]
    fn mass_against_itself_is_one() {
        let d = small(Variant::Hdg);
        let m = d.trace_mass().to_dense();
        let ones = vec![1.0; m.nrows()];
        let eig = generalized_eigenvalues(&m, &m, Some(&ones)).unwrap();
        assert!(eig.iter().all(|&x| (x - 1.0).abs() < 1e-10));
        let eig = generalized_eigenvalues(&m, &m, None).unwrap();
        assert!(eig.iter().all(|&x| (x - 1.0).abs() < 1e-10));
    }

    #[test]
    fn indefinite_weight_is_rejected() {
        let a = Mat::<f64>::identity(3, 3);
        let mut b = Mat::<f64>::identity(3, 3);
        b[(1, 1)] = -1.0;
        assert!(matches!(
            generalized_eigenvalues(&a, &b, None),
            Err(SpectralError::IndefiniteWeight)
        ));
    }

    #[test]
    fn size_cap_refuses() {
        assert!(matches!(check_cap(2001, SCHUR_CAP), Err(SpectralError::SizeCap { .. })));
    }

    #[test]
    fn sbar_two_routes_agree_on_two_triangles() {
        let d = disc_on(two_triangles(), Variant::Hdg);
        let s1 = schur_sbar_formula(&d).unwrap();
        let s2 = schur_sbar_elimination(&d.system(SystemKind::TwoField)).unwrap();
        assert_eq!(s1.nrows(), 15);
        assert!(max_abs(&(&s1 - &s2)) <= 1e-10 * max_abs(&s1));
        assert!(max_abs(&(&s1 - s1.transpose())) <= 1e-12 * max_abs(&s1));
        let eig = s1.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let tol = 1e-10 * eig[14];
        assert!(eig[0].abs() < tol, "{eig:?}");
        assert!(eig[1] > tol, "rank must be 14: {eig:?}");
        let ones = Mat::from_fn(15, 1, |_, _| 1.0);
        assert!(max_abs(&(&s1 * &ones)) < 1e-11 * max_abs(&s1));
    }

    #[test]
    fn sbar_two_routes_agree_on_a_mesh() {
        for v in Variant::ALL {
            let d = small(v);
            let s1 = schur_sbar_formula(&d).unwrap();
            let s2 = schur_sbar_elimination(&d.system(SystemKind::TwoField)).unwrap();
            assert!(max_abs(&(&s1 - &s2)) <= 1e-10 * max_abs(&s1), "{v}");
        }
    }

    #[test]
    fn sbar_spectra_are_positive() {
        let d = small(Variant::Hdg);
        for r in sbar_spectra(&d, 0).unwrap() {
            assert!(r.lambda_min > 0.0 && r.lambda_min <= r.lambda_max, "{r:?}");
        }
    }

    #[test]
    fn preconditioned_spectrum_has_two_signed_intervals() {
        let d = small(Variant::EdgHdg);
        let r = preconditioned_spectrum(&d, PreconFamily::PMbar, 0).unwrap();
        let (nmin, nmax) = r.negative.unwrap();
        let (pmin, pmax) = r.positive.unwrap();
        assert!(nmin < nmax && nmax < 0.0 && 0.0 < pmin && pmin < pmax);
    }

    #[test]
    fn agamma_extremes() {
        let d = small(Variant::Hdg);
        let r0 = agamma_equivalence(&d, 0.0, 0).unwrap();
        assert!((r0.lambda_min - 1.0).abs() < 1e-10 && (r0.lambda_max - 1.0).abs() < 1e-10);
        let r1 = agamma_equivalence(&d, 0.1, 0).unwrap();
        assert!(r1.lambda_min >= 1.0 - 1e-10);
        let r10 = agamma_equivalence(&d, 10.0, 0).unwrap();
        assert!(r10.lambda_max > r1.lambda_max);
    }

    #[test]
    fn projected_operator_identities() {
        let d = small(Variant::Hdg);
        let a = velocity_operator(&d);
        let ap = projected_velocity_operator(&d);
        let p = projector_matrix(&d);
        let nu = d.layout.num_velocity();
        let n = a.nrows();
        assert!(ap.symmetry_error() < 1e-12 * ap.max_abs());
        for seed in 0..5 {
            let w = rand_vec(n, seed);
            // v = (𝒫w, w̄) has element part in Ker B_pu
            let mut v = p.mul_vec(&w[..nu]);
            v.extend_from_slice(&w[nu..]);
            let qa = crate::sparse::dot(&v, &a.mul_vec(&v));
            let qp = crate::sparse::dot(&v, &ap.mul_vec(&v));
            assert!((qa - qp).abs() <= 1e-11 * qa.abs());
            // ⟨A_𝒫 ℛw, ℛw⟩ ≤ ⟨A_𝒫 w, w⟩
            let qw = crate::sparse::dot(&w, &ap.mul_vec(&w));
            assert!(qp <= qw + 1e-11 * qw.abs());
        }
        let eig = ap.to_dense().self_adjoint_eigenvalues(Side::Lower).unwrap();
        assert!(eig[0] > 0.0);
    }

    #[test]
    fn norms_of_zero_and_constants() {
        let d = small(Variant::Hdg);
        let nrm = DiscreteNorms::new(&d);
        let l = &d.layout;
        let z = vec![0.0; l.num_trace_velocity()];
        assert_eq!(nrm.facet_l2_norm(&z).unwrap(), 0.0);
        assert_eq!(nrm.facet_h1_norm(&z).unwrap(), 0.0);
        assert_eq!(nrm.stability_norm(&vec![0.0; l.num_velocity()], &z).unwrap(), 0.0);
        assert_eq!(nrm.trace_pressure_norm(&vec![0.0; l.num_trace_pressure()]).unwrap(), 0.0);
        assert_eq!(
            nrm.full_pressure_norm(&vec![0.0; l.num_pressure()], &vec![0.0; l.num_trace_pressure()]).unwrap(),
            0.0
        );
        assert!(matches!(nrm.facet_l2_norm(&[1.0]), Err(SpectralError::LayoutMismatch { .. })));
        for e in 0..3 {
            let (l2, h1) = local_facet_norms(&d, e);
            let n = l2.nrows();
            let c = Mat::from_fn(n, 1, |i, _| if (i / 3) % 2 == 0 { 2.0 } else { -0.5 });
            let q = (c.transpose() * &h1 * &c)[(0, 0)];
            assert!(q.abs() < 1e-13, "{q}");
            assert!((c.transpose() * &l2 * &c)[(0, 0)] > 0.0);
        }
    }

    #[test]
    fn stability_norm_of_matching_constants_is_zero() {
        let d = small(Variant::Hdg);
        let s = local_stability(&d, 0);
        let dim = d.assembler().element_basis().dim();
        let area = d.mesh.area(0);
        let n = s.nrows();
        // u ≡ (1, 0): element coefficient sqrt|K| on the constant, trace 1
        let x = Mat::from_fn(n, 1, |i, _| {
            if i == 0 {
                area.sqrt()
            } else if i < 2 * dim {
                0.0
            } else {
                let j = i - 2 * dim;
                if (j / 3) % 2 == 0 { 1.0 } else { 0.0 }
            }
        });
        assert!((x.transpose() * &s * &x)[(0, 0)].abs() < 1e-12);
    }
}
