use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::basis::{dim_pk, FacetBasis, FacetNodes};
use crate::error::ConfigError;
use crate::mesh::{Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Discontinuous trace velocity and trace pressure.
    Hdg,
    /// Continuous trace velocity and trace pressure.
    Edg,
    /// Continuous trace velocity, discontinuous trace pressure.
    EdgHdg,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Hdg, Variant::Edg, Variant::EdgHdg];

    pub fn continuous_velocity(self) -> bool {
        !matches!(self, Variant::Hdg)
    }

    pub fn continuous_pressure(self) -> bool {
        matches!(self, Variant::Edg)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Hdg => "hdg",
            Variant::Edg => "edg",
            Variant::EdgHdg => "edg-hdg",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "hdg" => Ok(Variant::Hdg),
            "edg" => Ok(Variant::Edg),
            "edg-hdg" | "edghdg" => Ok(Variant::EdgHdg),
            other => Err(ConfigError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub k: usize,
    pub variant: Variant,
}

impl SpaceConfig {
    pub fn new(k: usize, variant: Variant) -> Result<Self, ConfigError> {
        if k == 0 {
            return Err(ConfigError::InvalidDegree(k));
        }
        Ok(Self { k, variant })
    }

    /// Scalar element velocity basis size, `dim P_k`.
    pub fn dim_velocity(&self) -> usize {
        dim_pk(self.k)
    }

    /// Element pressure basis size, `dim P_{k-1}`.
    pub fn dim_pressure(&self) -> usize {
        dim_pk(self.k - 1)
    }

    /// Nodes per facet for each trace field.
    pub fn facet_dim(&self) -> usize {
        self.k + 1
    }

    pub fn velocity_facet_basis(&self) -> FacetBasis {
        FacetBasis::new(self.k, node_kind(self.variant.continuous_velocity()))
    }

    pub fn pressure_facet_basis(&self) -> FacetBasis {
        FacetBasis::new(self.k, node_kind(self.variant.continuous_pressure()))
    }
}

fn node_kind(continuous: bool) -> FacetNodes {
    if continuous {
        FacetNodes::Lobatto
    } else {
        FacetNodes::Legendre
    }
}

/// Global reference of one local trace-velocity DOF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDof {
    Free(usize),
    /// Dirichlet-constrained; index into [`DofLayout::fixed_points`] times two
    /// plus the component.
    Fixed(usize),
}

/// Degree-of-freedom numbering for element and trace spaces.
///
/// Element DOFs are numbered element by element; within an element the
/// velocity is stored component-major (`c * dim_velocity + i`). Local trace
/// DOFs of an element are ordered by local facet, then (for velocity)
/// component, then facet node: `(lf * 2 + c) * (k + 1) + j` for velocity and
/// `lf * (k + 1) + j` for pressure. Facet nodes run from the lower to the
/// higher global vertex index of the facet.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub cfg: SpaceConfig,
    num_elements: usize,
    element_facets: Vec<[usize; 3]>,
    /// `facet * (k + 1) + j` -> velocity trace node reference (per node, not
    /// per component).
    vel_nodes: Vec<TraceDof>,
    fixed_points: Vec<Point>,
    num_free_vel_nodes: usize,
    /// `facet * (k + 1) + j` -> trace pressure DOF.
    pres_dofs: Vec<usize>,
    num_trace_pressure: usize,
}

/// Raw node ids per facet: discontinuous spaces get fresh nodes per facet,
/// continuous ones share vertex nodes.
fn facet_node_ids(mesh: &Mesh, k: usize, continuous: bool) -> (Vec<usize>, usize) {
    let n = k + 1;
    let mut ids = Vec::with_capacity(mesh.num_facets() * n);
    if continuous {
        let mut next = mesh.num_vertices();
        for f in mesh.facets() {
            for j in 0..n {
                if j == 0 {
                    ids.push(f.vertices[0]);
                } else if j == k {
                    ids.push(f.vertices[1]);
                } else {
                    ids.push(next);
                    next += 1;
                }
            }
        }
        (ids, next)
    } else {
        ids.extend(0..mesh.num_facets() * n);
        (ids, mesh.num_facets() * n)
    }
}

impl DofLayout {
    pub fn build(mesh: &Mesh, cfg: SpaceConfig) -> Result<Self, ConfigError> {
        let cfg = SpaceConfig::new(cfg.k, cfg.variant)?;
        let k = cfg.k;
        let n = k + 1;

        // velocity: mark nodes on boundary facets as fixed
        let vbasis = cfg.velocity_facet_basis();
        let (ids, num_ids) = facet_node_ids(mesh, k, cfg.variant.continuous_velocity());
        let mut on_boundary = vec![false; num_ids];
        let mut point = vec![[0.0; 2]; num_ids];
        for (fi, f) in mesh.facets().iter().enumerate() {
            let [a, b] = f.vertices.map(|v| mesh.vertices()[v]);
            for j in 0..n {
                let id = ids[fi * n + j];
                let t = vbasis.nodes()[j];
                point[id] = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                if f.is_boundary() {
                    on_boundary[id] = true;
                }
            }
        }
        let mut used = vec![false; num_ids];
        ids.iter().for_each(|&i| used[i] = true);
        let mut map = vec![TraceDof::Free(usize::MAX); num_ids];
        let mut fixed_points = Vec::new();
        let mut num_free = 0;
        for id in 0..num_ids {
            if !used[id] {
                continue;
            }
            if on_boundary[id] {
                map[id] = TraceDof::Fixed(fixed_points.len());
                fixed_points.push(point[id]);
            } else {
                map[id] = TraceDof::Free(num_free);
                num_free += 1;
            }
        }
        let vel_nodes = ids.iter().map(|&i| map[i]).collect();

        let (pids, num_pids) = facet_node_ids(mesh, k, cfg.variant.continuous_pressure());
        let mut compact = vec![usize::MAX; num_pids];
        let mut next = 0;
        let pres_dofs = pids
            .iter()
            .map(|&i| {
                if compact[i] == usize::MAX {
                    compact[i] = next;
                    next += 1;
                }
                compact[i]
            })
            .collect();

        Ok(Self {
            cfg,
            num_elements: mesh.num_elements(),
            element_facets: (0..mesh.num_elements())
                .map(|e| mesh.element_facets(e))
                .collect(),
            vel_nodes,
            fixed_points,
            num_free_vel_nodes: num_free,
            pres_dofs,
            num_trace_pressure: next,
        })
    }

    pub fn k(&self) -> usize {
        self.cfg.k
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    /// Element velocity DOFs per element, `2 dim P_k`.
    pub fn local_velocity(&self) -> usize {
        2 * self.cfg.dim_velocity()
    }

    pub fn local_pressure(&self) -> usize {
        self.cfg.dim_pressure()
    }

    pub fn local_trace_velocity(&self) -> usize {
        6 * (self.cfg.k + 1)
    }

    pub fn local_trace_pressure(&self) -> usize {
        3 * (self.cfg.k + 1)
    }

    /// `n_u`
    pub fn num_velocity(&self) -> usize {
        self.num_elements * self.local_velocity()
    }

    /// `n_q`
    pub fn num_pressure(&self) -> usize {
        self.num_elements * self.local_pressure()
    }

    /// `n̄_u`, free trace-velocity DOFs.
    pub fn num_trace_velocity(&self) -> usize {
        2 * self.num_free_vel_nodes
    }

    /// `n̄_q`
    pub fn num_trace_pressure(&self) -> usize {
        self.num_trace_pressure
    }

    /// Dirichlet-constrained trace-velocity DOFs.
    pub fn num_fixed_velocity(&self) -> usize {
        2 * self.fixed_points.len()
    }

    /// Positions of the constrained trace-velocity nodes; fixed DOF `2 j + c`
    /// is component `c` at `fixed_points()[j]`.
    pub fn fixed_points(&self) -> &[Point] {
        &self.fixed_points
    }

    /// Size of the two-field system.
    pub fn num_two_field(&self) -> usize {
        self.num_trace_velocity() + self.num_trace_pressure()
    }

    /// Size of the three-field system.
    pub fn num_three_field(&self) -> usize {
        self.num_two_field() + self.num_pressure()
    }

    /// Two-field count with constrained trace-velocity DOFs included, the
    /// convention of tabulated counts that keep boundary unknowns.
    pub fn num_two_field_with_boundary(&self) -> usize {
        self.num_two_field() + self.num_fixed_velocity()
    }

    pub fn num_three_field_with_boundary(&self) -> usize {
        self.num_three_field() + self.num_fixed_velocity()
    }

    pub fn element_velocity_range(&self, e: usize) -> std::ops::Range<usize> {
        let n = self.local_velocity();
        e * n..(e + 1) * n
    }

    pub fn element_pressure_range(&self, e: usize) -> std::ops::Range<usize> {
        let n = self.local_pressure();
        e * n..(e + 1) * n
    }

    /// Global references of the local trace-velocity DOFs of element `e`.
    pub fn element_trace_velocity(&self, e: usize) -> Vec<TraceDof> {
        let n = self.cfg.k + 1;
        let mut out = Vec::with_capacity(self.local_trace_velocity());
        for &f in &self.element_facets[e] {
            for c in 0..2 {
                for j in 0..n {
                    out.push(match self.vel_nodes[f * n + j] {
                        TraceDof::Free(i) => TraceDof::Free(2 * i + c),
                        TraceDof::Fixed(i) => TraceDof::Fixed(2 * i + c),
                    });
                }
            }
        }
        out
    }

    /// Global indices of the local trace-pressure DOFs of element `e`.
    pub fn element_trace_pressure(&self, e: usize) -> Vec<usize> {
        let n = self.cfg.k + 1;
        let mut out = Vec::with_capacity(self.local_trace_pressure());
        for &f in &self.element_facets[e] {
            out.extend_from_slice(&self.pres_dofs[f * n..(f + 1) * n]);
        }
        out
    }

    /// Trace-velocity node references of facet `f` (one per node).
    pub fn facet_velocity_nodes(&self, f: usize) -> &[TraceDof] {
        let n = self.cfg.k + 1;
        &self.vel_nodes[f * n..(f + 1) * n]
    }

    pub fn facet_pressure_dofs(&self, f: usize) -> &[usize] {
        let n = self.cfg.k + 1;
        &self.pres_dofs[f * n..(f + 1) * n]
    }

    /// Nodal interpolation of `g` at the constrained trace-velocity nodes.
    pub fn interpolate_dirichlet(&self, g: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        self.fixed_points
            .iter()
            .flat_map(|&p| {
                let v = g(p);
                [v[0], v[1]]
            })
            .collect()
    }
}
