//! Polynomial bases on the reference triangle and reference segment.

use super::quadrature::{gauss_legendre, gauss_lobatto_nodes, TriangleRule};
use crate::mesh::Point;

/// Dimension of `P_k` on a triangle.
pub fn dim_pk(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

fn monomial_exponents(k: usize) -> Vec<(i32, i32)> {
    let mut e = Vec::with_capacity(dim_pk(k));
    for d in 0..=k as i32 {
        for b in 0..=d {
            e.push((d - b, b));
        }
    }
    e
}

/// `L^2`-orthonormal basis of `P_k` on the reference triangle, obtained by
/// Gram–Schmidt on monomials ordered by total degree. The ordering is
/// hierarchical: the first `dim_pk(j)` functions span `P_j` for every `j <= k`,
/// and function 0 is the constant `sqrt(2)`.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    degree: usize,
    exponents: Vec<(i32, i32)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: Vec<Vec<f64>>,
}

impl ElementBasis {
    pub fn new(degree: usize) -> Self {
        let exponents = monomial_exponents(degree);
        let n = exponents.len();
        let rule = TriangleRule::new(2 * degree);
        // monomial values at quadrature points
        let mono: Vec<Vec<f64>> = rule
            .points
            .iter()
            .map(|p| {
                exponents
                    .iter()
                    .map(|&(a, b)| p[0].powi(a) * p[1].powi(b))
                    .collect()
            })
            .collect();
        let inner = |u: &[f64], v: &[f64]| -> f64 {
            mono.iter()
                .zip(&rule.weights)
                .map(|(m, w)| {
                    let fu: f64 = u.iter().zip(m).map(|(c, x)| c * x).sum();
                    let fv: f64 = v.iter().zip(m).map(|(c, x)| c * x).sum();
                    w * fu * fv
                })
                .sum()
        };

        let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for q in &coeffs {
                    let r = inner(&c, q);
                    for (ci, qi) in c.iter_mut().zip(q) {
                        *ci -= r * qi;
                    }
                }
            }
            let nrm = inner(&c, &c).sqrt();
            c.iter_mut().for_each(|x| *x /= nrm);
            coeffs.push(c);
        }
        Self {
            degree,
            exponents,
            coeffs,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn values(&self, p: Point) -> Vec<f64> {
        let m: Vec<f64> = self
            .exponents
            .iter()
            .map(|&(a, b)| p[0].powi(a) * p[1].powi(b))
            .collect();
        self.coeffs
            .iter()
            .map(|c| c.iter().zip(&m).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Reference gradients of all basis functions at `p`.
    pub fn gradients(&self, p: Point) -> Vec<[f64; 2]> {
        let dm: Vec<[f64; 2]> = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 {
                    a as f64 * p[0].powi(a - 1) * p[1].powi(b)
                } else {
                    0.0
                };
                let dy = if b > 0 {
                    b as f64 * p[0].powi(a) * p[1].powi(b - 1)
                } else {
                    0.0
                };
                [dx, dy]
            })
            .collect();
        self.coeffs
            .iter()
            .map(|c| {
                c.iter().zip(&dm).fold([0.0, 0.0], |acc, (ci, d)| {
                    [acc[0] + ci * d[0], acc[1] + ci * d[1]]
                })
            })
            .collect()
    }
}

/// Values and reference gradients of the degree-`k` element basis at the
/// given reference points: `(values[point][fn], gradients[point][fn])`.
pub fn eval_basis_element(k: usize, points: &[Point]) -> (Vec<Vec<f64>>, Vec<Vec<[f64; 2]>>) {
    let b = ElementBasis::new(k);
    (
        points.iter().map(|&p| b.values(p)).collect(),
        points.iter().map(|&p| b.gradients(p)).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetNodes {
    /// Interior Gauss–Legendre points; no node sits on a facet endpoint.
    Legendre,
    /// Gauss–Lobatto points; nodes 0 and k sit on the facet endpoints.
    Lobatto,
}

/// Lagrange basis of `P_k` on the reference segment `[0, 1]`.
#[derive(Debug, Clone)]
pub struct FacetBasis {
    pub kind: FacetNodes,
    nodes: Vec<f64>,
}

impl FacetBasis {
    pub fn new(k: usize, kind: FacetNodes) -> Self {
        let nodes = match (kind, k) {
            (_, 0) => vec![0.5],
            (FacetNodes::Legendre, _) => gauss_legendre(k + 1).0,
            (FacetNodes::Lobatto, _) => gauss_lobatto_nodes(k + 1),
        };
        Self {
            kind,
            nodes: nodes.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Node positions in `[0, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        (0..self.nodes.len())
            .map(|i| {
                self.nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &xj)| (t - xj) / (self.nodes[i] - xj))
                    .product()
            })
            .collect()
    }
}

/// Values of the degree-`k` Gauss–Legendre nodal facet basis at `points`.
pub fn eval_basis_facet(k: usize, points: &[f64]) -> Vec<Vec<f64>> {
    let b = FacetBasis::new(k, FacetNodes::Legendre);
    points.iter().map(|&t| b.values(t)).collect()
}

/// Affine map from the reference triangle onto a mesh element, together with
/// the scaling that makes the mapped basis orthonormal on the element.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    pub inv_jac: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementMap {
    pub fn new(v: [Point; 3]) -> Self {
        let jac = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_jac = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Self {
            origin: v[0],
            jac,
            inv_jac,
            det,
        }
    }

    pub fn to_physical(&self, r: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv_jac[0][0] * d[0] + self.inv_jac[0][1] * d[1],
            self.inv_jac[1][0] * d[0] + self.inv_jac[1][1] * d[1],
        ]
    }

    /// Factor applied to reference basis values so that the physical basis is
    /// orthonormal on the element.
    pub fn scale(&self) -> f64 {
        1.0 / self.det.sqrt()
    }

    /// Physical gradient from a reference gradient (`J^{-T} g`), unscaled.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jac[0][0] * g[0] + self.inv_jac[1][0] * g[1],
            self.inv_jac[0][1] * g[0] + self.inv_jac[1][1] * g[1],
        ]
    }
}

/// Orthonormal element basis evaluated at a physical point of element `map`.
pub struct PhysicalValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl ElementBasis {
    pub fn physical(&self, map: &ElementMap, x: Point) -> PhysicalValues {
        let r = map.to_reference(x);
        let s = map.scale();
        PhysicalValues {
            values: self.values(r).into_iter().map(|v| v * s).collect(),
            gradients: self
                .gradients(r)
                .into_iter()
                .map(|g| {
                    let p = map.push_gradient(g);
                    [p[0] * s, p[1] * s]
                })
                .collect(),
        }
    }
}
