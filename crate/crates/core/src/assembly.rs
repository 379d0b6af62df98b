//! Element matrices of the hybridized Stokes forms and their global assembly.
//!
//! Local blocks follow the row = test function convention:
//!
//! * `a_uu`  element velocity x element velocity
//! * `a_bu`  trace velocity (rows) x element velocity
//! * `a_bb`  trace velocity x trace velocity
//! * `b_pu`  element pressure x element velocity, `-(q, div v)`
//! * `b_qu`  trace pressure x element velocity, `<v.n, q̄>`

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::fespace::{
    DofLayout, ElementBasis, ElementMap, FacetBasis, SegmentRule, SpaceConfig, TraceDof,
    TriangleRule, Variant,
};
use crate::mesh::{Mesh, Point};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Vector field on the plane, used for body forces and boundary data.
pub type VectorField<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

/// Interior penalty default: `6k²` for HDG, `4k²` for the continuous-trace
/// variants.
pub fn default_alpha(k: usize, variant: Variant) -> f64 {
    let k2 = (k * k) as f64;
    match variant {
        Variant::Hdg => 6.0 * k2,
        Variant::Edg | Variant::EdgHdg => 4.0 * k2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub alpha: f64,
    /// Grad-div parameter; only used by the augmented velocity operator.
    pub gamma: f64,
}

impl AssemblyConfig {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, ConfigError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ConfigError::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(ConfigError::InvalidParameter(format!(
                "gamma must be finite and nonnegative, got {gamma}"
            )));
        }
        Ok(Self { alpha, gamma })
    }

    pub fn defaults_for(space: &SpaceConfig) -> Self {
        Self {
            alpha: default_alpha(space.k, space.variant),
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalBlocks {
    pub a_uu: Mat<f64>,
    pub a_bu: Mat<f64>,
    pub a_bb: Mat<f64>,
    pub b_pu: Mat<f64>,
    pub b_qu: Mat<f64>,
    /// Element load `(f, v)` minus the Dirichlet lift `A_ūuᵀ g`.
    pub load: Vec<f64>,
    /// Trace-velocity load `-A_ūū g` (only its free rows are ever used).
    pub load_trace: Vec<f64>,
}

/// Evaluates element matrices on one mesh and layout.
pub struct Assembler<'a> {
    pub mesh: &'a Mesh,
    pub layout: &'a DofLayout,
    pub cfg: AssemblyConfig,
    basis: ElementBasis,
    vbasis: FacetBasis,
    pbasis: FacetBasis,
    erule: TriangleRule,
    frule: SegmentRule,
    ref_values: Vec<Vec<f64>>,
    ref_grads: Vec<Vec<[f64; 2]>>,
}

/// Physical element quadrature point with the element basis evaluated there.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub x: Point,
    pub weight: f64,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

/// Element quantities at one facet quadrature point.
struct FacetPoint {
    weight: f64,
    normal: Point,
    phi: Vec<f64>,
    dn_phi: Vec<f64>,
    lam: Vec<f64>,
    mu: Vec<f64>,
}

impl<'a> Assembler<'a> {
    pub fn new(mesh: &'a Mesh, layout: &'a DofLayout, cfg: AssemblyConfig) -> Self {
        let k = layout.k();
        let basis = ElementBasis::new(k);
        let erule = TriangleRule::new(2 * k + 2);
        let ref_values = erule.points.iter().map(|&p| basis.values(p)).collect();
        let ref_grads = erule.points.iter().map(|&p| basis.gradients(p)).collect();
        Self {
            mesh,
            layout,
            cfg,
            vbasis: layout.cfg.velocity_facet_basis(),
            pbasis: layout.cfg.pressure_facet_basis(),
            basis,
            erule,
            frule: SegmentRule::new(2 * k + 1),
            ref_values,
            ref_grads,
        }
    }

    pub fn element_basis(&self) -> &ElementBasis {
        &self.basis
    }

    pub fn velocity_facet_basis(&self) -> &FacetBasis {
        &self.vbasis
    }

    pub fn pressure_facet_basis(&self) -> &FacetBasis {
        &self.pbasis
    }

    pub fn element_map(&self, e: usize) -> ElementMap {
        ElementMap::new(self.mesh.element_vertices(e))
    }

    /// Physical quadrature points, weights, scaled values and gradients.
    fn volume_points(&self, e: usize) -> (ElementMap, Vec<(Point, f64, Vec<f64>, Vec<[f64; 2]>)>) {
        let map = self.element_map(e);
        let s = map.scale();
        let pts = self
            .erule
            .points
            .iter()
            .enumerate()
            .map(|(q, &r)| {
                let vals = self.ref_values[q].iter().map(|v| v * s).collect();
                let grads = self.ref_grads[q]
                    .iter()
                    .map(|&g| {
                        let p = map.push_gradient(g);
                        [p[0] * s, p[1] * s]
                    })
                    .collect();
                (map.to_physical(r), self.erule.weights[q] * map.det, vals, grads)
            })
            .collect();
        (map, pts)
    }

    /// Element quadrature of degree `2k + 2` in physical coordinates.
    pub fn volume_quadrature(&self, e: usize) -> Vec<QuadPoint> {
        self.volume_points(e)
            .1
            .into_iter()
            .map(|(x, weight, values, gradients)| QuadPoint {
                x,
                weight,
                values,
                gradients,
            })
            .collect()
    }

    fn facet_points(&self, map: &ElementMap, e: usize, lf: usize) -> Vec<FacetPoint> {
        let f = self.mesh.element_facets(e)[lf];
        let [a, b] = self.mesh.facets()[f].vertices.map(|v| self.mesh.vertices()[v]);
        let len = self.mesh.facet_length(f);
        let normal = self.mesh.outward_normal(e, lf);
        self.frule
            .points
            .iter()
            .zip(&self.frule.weights)
            .map(|(&t, &w)| {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let pv = self.basis.physical(map, x);
                FacetPoint {
                    weight: w * len,
                    normal,
                    dn_phi: pv
                        .gradients
                        .iter()
                        .map(|g| g[0] * normal[0] + g[1] * normal[1])
                        .collect(),
                    phi: pv.values,
                    lam: self.vbasis.values(t),
                    mu: self.pbasis.values(t),
                }
            })
            .collect()
    }

    /// `(A_uu, A_ūu, A_ūū)` of element `e`.
    pub fn local_a(&self, e: usize) -> (Mat<f64>, Mat<f64>, Mat<f64>) {
        let d = self.basis.dim();
        let nf = self.layout.k() + 1;
        let nt = 6 * nf;
        let ah = self.cfg.alpha / self.mesh.h(e);
        let (map, vol) = self.volume_points(e);

        let mut s = Mat::<f64>::zeros(d, d);
        for (_, w, _, g) in &vol {
            for i in 0..d {
                for j in 0..d {
                    s[(i, j)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        let mut a_bu = Mat::<f64>::zeros(nt, 2 * d);
        let mut a_bb = Mat::<f64>::zeros(nt, nt);
        for lf in 0..3 {
            for fp in self.facet_points(&map, e, lf) {
                let w = fp.weight;
                for i in 0..d {
                    for j in 0..d {
                        s[(i, j)] += w
                            * (ah * fp.phi[i] * fp.phi[j]
                                - fp.phi[j] * fp.dn_phi[i]
                                - fp.dn_phi[j] * fp.phi[i]);
                    }
                }
                for c in 0..2 {
                    for jt in 0..nf {
                        let row = (lf * 2 + c) * nf + jt;
                        for i in 0..d {
                            a_bu[(row, c * d + i)] +=
                                w * fp.lam[jt] * (fp.dn_phi[i] - ah * fp.phi[i]);
                        }
                        for it in 0..nf {
                            a_bb[(row, (lf * 2 + c) * nf + it)] += w * ah * fp.lam[jt] * fp.lam[it];
                        }
                    }
                }
            }
        }
        let mut a_uu = Mat::<f64>::zeros(2 * d, 2 * d);
        for c in 0..2 {
            for i in 0..d {
                for j in 0..d {
                    a_uu[(c * d + i, c * d + j)] = s[(i, j)];
                }
            }
        }
        (a_uu, a_bu, a_bb)
    }

    /// `(B_pu, B_p̄u)` of element `e`.
    pub fn local_b(&self, e: usize) -> (Mat<f64>, Mat<f64>) {
        let d = self.basis.dim();
        let dq = self.layout.local_pressure();
        let nf = self.layout.k() + 1;
        let (map, vol) = self.volume_points(e);
        let mut b_pu = Mat::<f64>::zeros(dq, 2 * d);
        for (_, w, v, g) in &vol {
            for m in 0..dq {
                for c in 0..2 {
                    for i in 0..d {
                        b_pu[(m, c * d + i)] -= w * v[m] * g[i][c];
                    }
                }
            }
        }
        let mut b_qu = Mat::<f64>::zeros(3 * nf, 2 * d);
        for lf in 0..3 {
            for fp in self.facet_points(&map, e, lf) {
                for jt in 0..nf {
                    for c in 0..2 {
                        for i in 0..d {
                            b_qu[(lf * nf + jt, c * d + i)] +=
                                fp.weight * fp.mu[jt] * fp.phi[i] * fp.normal[c];
                        }
                    }
                }
            }
        }
        (b_pu, b_qu)
    }

    /// `(f, v)_K` for the element velocity basis.
    pub fn local_load(&self, e: usize, f: VectorField) -> Vec<f64> {
        let d = self.basis.dim();
        let (_, vol) = self.volume_points(e);
        let mut l = vec![0.0; 2 * d];
        for (x, w, v, _) in &vol {
            let fx = f(*x);
            for c in 0..2 {
                for i in 0..d {
                    l[c * d + i] += w * fx[c] * v[i];
                }
            }
        }
        l
    }

    /// `h_K <q̄, r̄>_∂K` for the trace pressure basis of element `e`.
    pub fn local_trace_mass(&self, e: usize) -> Mat<f64> {
        let nf = self.layout.k() + 1;
        let map = self.element_map(e);
        let h = self.mesh.h(e);
        let mut m = Mat::<f64>::zeros(3 * nf, 3 * nf);
        for lf in 0..3 {
            for fp in self.facet_points(&map, e, lf) {
                for i in 0..nf {
                    for j in 0..nf {
                        m[(lf * nf + i, lf * nf + j)] += h * fp.weight * fp.mu[i] * fp.mu[j];
                    }
                }
            }
        }
        m
    }

    /// Element pressure mass matrix; the identity for the orthonormal basis,
    /// computed by quadrature so that tests can confirm it.
    pub fn local_pressure_mass(&self, e: usize) -> Mat<f64> {
        let dq = self.layout.local_pressure();
        let (_, vol) = self.volume_points(e);
        let mut m = Mat::<f64>::zeros(dq, dq);
        for (_, w, v, _) in &vol {
            for i in 0..dq {
                for j in 0..dq {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        m
    }

    /// `γ B_puᵀ M⁻¹ B_pu` with `M = I`.
    pub fn local_graddiv(&self, b_pu: &Mat<f64>) -> Mat<f64> {
        b_pu.transpose() * b_pu * self.cfg.gamma
    }

    /// Local Dirichlet values at the trace-velocity DOFs of element `e`
    /// (zero at free DOFs).
    pub fn local_dirichlet(&self, e: usize, fixed_values: &[f64]) -> Vec<f64> {
        self.layout
            .element_trace_velocity(e)
            .iter()
            .map(|d| match *d {
                TraceDof::Fixed(j) => fixed_values[j],
                TraceDof::Free(_) => 0.0,
            })
            .collect()
    }

    pub fn local_blocks(&self, e: usize, f: VectorField, fixed_values: &[f64]) -> LocalBlocks {
        let (a_uu, a_bu, a_bb) = self.local_a(e);
        let (b_pu, b_qu) = self.local_b(e);
        let g = self.local_dirichlet(e, fixed_values);
        let mut load = self.local_load(e, f);
        let mut load_trace = vec![0.0; g.len()];
        if g.iter().any(|&v| v != 0.0) {
            for (r, &gr) in g.iter().enumerate() {
                if gr == 0.0 {
                    continue;
                }
                for (j, l) in load.iter_mut().enumerate() {
                    *l -= a_bu[(r, j)] * gr;
                }
                for (i, l) in load_trace.iter_mut().enumerate() {
                    *l -= a_bb[(i, r)] * gr;
                }
            }
        }
        LocalBlocks {
            a_uu,
            a_bu,
            a_bb,
            b_pu,
            b_qu,
            load,
            load_trace,
        }
    }

    /// Local blocks of every element, computed in parallel.
    pub fn all_blocks(&self, f: VectorField, g: VectorField) -> Vec<LocalBlocks> {
        let fixed = self.layout.interpolate_dirichlet(g);
        (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|e| self.local_blocks(e, f, &fixed))
            .collect()
    }

    /// Trace pressure mass matrix `M̄`.
    pub fn trace_mass(&self) -> CsrMatrix {
        let locals: Vec<Mat<f64>> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|e| self.local_trace_mass(e))
            .collect();
        let n = self.layout.num_trace_pressure();
        let nl = self.layout.local_trace_pressure();
        let mut t = TripletBuilder::with_capacity(n, n, locals.len() * nl * nl);
        for (e, m) in locals.iter().enumerate() {
            let dofs = self.layout.element_trace_pressure(e);
            scatter(&mut t, m, &dofs, &dofs);
        }
        t.build()
    }
}

/// Adds a dense block at global rows `rows` and columns `cols`.
pub fn scatter(t: &mut TripletBuilder, m: &Mat<f64>, rows: &[usize], cols: &[usize]) {
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let v = m[(i, j)];
            if v != 0.0 {
                t.push(r, c, v);
            }
        }
    }
}

/// Local positions and global free indices of the unconstrained trace-velocity
/// DOFs of an element.
pub fn free_trace_velocity(layout: &DofLayout, e: usize) -> (Vec<usize>, Vec<usize>) {
    layout
        .element_trace_velocity(e)
        .iter()
        .enumerate()
        .filter_map(|(l, d)| match *d {
            TraceDof::Free(g) => Some((l, g)),
            TraceDof::Fixed(_) => None,
        })
        .unzip()
}

/// Scatter restricted to local rows/cols `lr`, `lc` mapped to `gr`, `gc`.
pub fn scatter_sub(
    t: &mut TripletBuilder,
    m: &Mat<f64>,
    (lr, gr): (&[usize], &[usize]),
    (lc, gc): (&[usize], &[usize]),
) {
    for (&i, &r) in lr.iter().zip(gr) {
        for (&j, &c) in lc.iter().zip(gc) {
            let v = m[(i, j)];
            if v != 0.0 {
                t.push(r, c, v);
            }
        }
    }
}

/// Globally assembled (uncondensed) operators; Dirichlet trace DOFs removed.
#[derive(Debug, Clone)]
pub struct GlobalMatrices {
    pub a_uu: CsrMatrix,
    pub a_bu: CsrMatrix,
    pub a_bb: CsrMatrix,
    pub b_pu: CsrMatrix,
    pub b_qu: CsrMatrix,
    pub load: Vec<f64>,
    pub load_trace: Vec<f64>,
}

impl GlobalMatrices {
    pub fn assemble(layout: &DofLayout, blocks: &[LocalBlocks]) -> Self {
        let (nu, nq) = (layout.num_velocity(), layout.num_pressure());
        let (ntu, ntq) = (layout.num_trace_velocity(), layout.num_trace_pressure());
        let mut a_uu = TripletBuilder::new(nu, nu);
        let mut a_bu = TripletBuilder::new(ntu, nu);
        let mut a_bb = TripletBuilder::new(ntu, ntu);
        let mut b_pu = TripletBuilder::new(nq, nu);
        let mut b_qu = TripletBuilder::new(ntq, nu);
        let mut load = vec![0.0; nu];
        let mut load_trace = vec![0.0; ntu];
        for (e, b) in blocks.iter().enumerate() {
            let u: Vec<usize> = layout.element_velocity_range(e).collect();
            let p: Vec<usize> = layout.element_pressure_range(e).collect();
            let qb = layout.element_trace_pressure(e);
            let (lt, gt) = free_trace_velocity(layout, e);
            let all_u: Vec<usize> = (0..u.len()).collect();
            scatter(&mut a_uu, &b.a_uu, &u, &u);
            scatter_sub(&mut a_bu, &b.a_bu, (&lt, &gt), (&all_u, &u));
            scatter_sub(&mut a_bb, &b.a_bb, (&lt, &gt), (&lt, &gt));
            scatter(&mut b_pu, &b.b_pu, &p, &u);
            scatter(&mut b_qu, &b.b_qu, &qb, &u);
            for (l, &g) in u.iter().enumerate() {
                load[g] += b.load[l];
            }
            for (&l, &g) in lt.iter().zip(&gt) {
                load_trace[g] += b.load_trace[l];
            }
        }
        Self {
            a_uu: a_uu.build(),
            a_bu: a_bu.build(),
            a_bb: a_bb.build(),
            b_pu: b_pu.build(),
            b_qu: b_qu.build(),
            load,
            load_trace,
        }
    }

    /// Full saddle-point matrix over `(u, ū, p, p̄)` and its right-hand side.
    pub fn full_system(&self) -> (CsrMatrix, Vec<f64>) {
        let (nu, ntu) = (self.a_uu.nrows(), self.a_bb.nrows());
        let (nq, ntq) = (self.b_pu.nrows(), self.b_qu.nrows());
        let n = nu + ntu + nq + ntq;
        let (ou, ob, op, oq) = (0, nu, nu + ntu, nu + ntu + nq);
        let mut t = TripletBuilder::new(n, n);
        let mut put = |m: &CsrMatrix, r0: usize, c0: usize, sym: bool| {
            for (i, j, v) in m.triplets() {
                t.push(r0 + i, c0 + j, v);
                if sym {
                    t.push(c0 + j, r0 + i, v);
                }
            }
        };
        put(&self.a_uu, ou, ou, false);
        put(&self.a_bb, ob, ob, false);
        put(&self.a_bu, ob, ou, true);
        put(&self.b_pu, op, ou, true);
        put(&self.b_qu, oq, ou, true);
        let mut rhs = vec![0.0; n];
        rhs[..nu].copy_from_slice(&self.load);
        rhs[ob..ob + ntu].copy_from_slice(&self.load_trace);
        (t.build(), rhs)
    }

    /// Sizes `(n_u, n̄_u, n_q, n̄_q)`.
    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (
            self.a_uu.nrows(),
            self.a_bb.nrows(),
            self.b_pu.nrows(),
            self.b_qu.nrows(),
        )
    }
}
