//! Two-dimensional simplicial meshes with full facet (edge) topology.
//!
//! Elements are stored counter-clockwise. Local facet `i` of an element is the
//! edge opposite local vertex `i`, i.e. it joins local vertices `i+1` and `i+2`
//! (mod 3). Facets are stored with their vertex pair sorted, which fixes the
//! facet parametrisation used by the trace spaces.

mod generate;
mod io;

use std::collections::HashMap;

pub use generate::{generate_unstructured, Rect, MESH_SIZE_FACTOR};
pub use io::{read_mesh, read_triangle, write_mesh};

use crate::error::MeshError;

pub type Point = [f64; 2];

/// Tag given to every boundary facet unless the caller says otherwise.
pub const DEFAULT_BOUNDARY_TAG: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub element: usize,
    pub local: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Sorted vertex pair `[a, b]` with `a < b`.
    pub vertices: [usize; 2],
    pub plus: FacetSide,
    /// `None` on the domain boundary.
    pub minus: Option<FacetSide>,
    pub boundary_tag: Option<u32>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetGeometry {
    /// Outward unit normal of the `plus` element.
    pub normal_plus: Point,
    /// Outward unit normal of the `minus` element, when it exists.
    pub normal_minus: Option<Point>,
    pub length: f64,
    pub midpoint: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    element_facets: Vec<[usize; 3]>,
    h: Vec<f64>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and counter-clockwise triangles.
    /// Every boundary facet receives [`DEFAULT_BOUNDARY_TAG`].
    pub fn new(vertices: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        Self::with_boundary_tags(vertices, elements, |_| DEFAULT_BOUNDARY_TAG)
    }

    /// Like [`Mesh::new`] but lets the caller pick the tag of each boundary
    /// facet from its sorted vertex pair.
    pub fn with_boundary_tags(
        vertices: Vec<Point>,
        elements: Vec<[usize; 3]>,
        tag: impl Fn([usize; 2]) -> u32,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (k, el) in elements.iter().enumerate() {
            for &v in el {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { index: v, count: nv });
                }
            }
            let area = signed_area(vertices[el[0]], vertices[el[1]], vertices[el[2]]);
            if !(area > 0.0) {
                return Err(MeshError::DegenerateElement(k));
            }
        }

        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(elements.len() * 2);
        let mut facets: Vec<Facet> = Vec::with_capacity(elements.len() * 3 / 2 + 8);
        let mut element_facets = vec![[usize::MAX; 3]; elements.len()];
        for (k, el) in elements.iter().enumerate() {
            for i in 0..3 {
                let a = el[(i + 1) % 3];
                let b = el[(i + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let side = FacetSide { element: k, local: i };
                match lookup.get(&key) {
                    Some(&f) => {
                        if facets[f].minus.is_some() {
                            return Err(MeshError::NonManifoldEdge(key[0], key[1]));
                        }
                        facets[f].minus = Some(side);
                        element_facets[k][i] = f;
                    }
                    None => {
                        lookup.insert(key, facets.len());
                        element_facets[k][i] = facets.len();
                        facets.push(Facet {
                            vertices: key,
                            plus: side,
                            minus: None,
                            boundary_tag: None,
                        });
                    }
                }
            }
        }
        for f in facets.iter_mut() {
            if f.minus.is_none() {
                f.boundary_tag = Some(tag(f.vertices));
            }
        }

        let h = elements
            .iter()
            .map(|el| {
                let [a, b, c] = el.map(|v| vertices[v]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .collect();

        Ok(Self {
            vertices,
            elements,
            facets,
            element_facets,
            h,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Facet ids of element `k`, indexed by local facet.
    pub fn element_facets(&self, k: usize) -> [usize; 3] {
        self.element_facets[k]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.is_boundary()).count()
    }

    pub fn num_interior_facets(&self) -> usize {
        self.num_facets() - self.num_boundary_facets()
    }

    /// Element diameter (longest edge).
    pub fn h(&self, k: usize) -> f64 {
        self.h[k]
    }

    pub fn h_per_element(&self) -> &[f64] {
        &self.h
    }

    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn element_vertices(&self, k: usize) -> [Point; 3] {
        self.elements[k].map(|v| self.vertices[v])
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.element_vertices(k);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|k| self.area(k)).sum()
    }

    /// Perimeter of element `k`.
    pub fn boundary_length(&self, k: usize) -> f64 {
        self.element_facets[k]
            .iter()
            .map(|&f| self.facet_length(f))
            .sum()
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.facets[f].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    /// Marks vertices lying on the boundary of the domain.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for f in self.facets.iter().filter(|f| f.is_boundary()) {
            on[f.vertices[0]] = true;
            on[f.vertices[1]] = true;
        }
        on
    }

    /// Outward unit normal of local facet `local` of element `k`.
    pub fn outward_normal(&self, k: usize, local: usize) -> Point {
        let el = self.elements[k];
        let a = self.vertices[el[(local + 1) % 3]];
        let b = self.vertices[el[(local + 2) % 3]];
        // counter-clockwise traversal a -> b keeps the element on the left
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = t[0].hypot(t[1]);
        [t[1] / len, -t[0] / len]
    }

    pub fn facet_geometry(&self, f: usize) -> Result<FacetGeometry, MeshError> {
        let facet = self.facets.get(f).ok_or(MeshError::FacetOutOfRange {
            index: f,
            count: self.facets.len(),
        })?;
        let [a, b] = facet.vertices.map(|v| self.vertices[v]);
        Ok(FacetGeometry {
            normal_plus: self.outward_normal(facet.plus.element, facet.plus.local),
            normal_minus: facet
                .minus
                .map(|s| self.outward_normal(s.element, s.local)),
            length: dist(a, b),
            midpoint: [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
        })
    }

    /// Splits every triangle into four similar children through its edge
    /// midpoints. Boundary tags are inherited from the parent facet.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.facets.iter().map(|f| {
            let [a, b] = f.vertices.map(|v| self.vertices[v]);
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        }));
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for (k, el) in self.elements.iter().enumerate() {
            let m = self.element_facets[k].map(|f| nv + f);
            let [v0, v1, v2] = *el;
            elements.push([v0, m[2], m[1]]);
            elements.push([m[2], v1, m[0]]);
            elements.push([m[1], m[0], v2]);
            elements.push([m[0], m[1], m[2]]);
        }
        let parent_tags: Vec<u32> = self
            .facets
            .iter()
            .map(|f| f.boundary_tag.unwrap_or(DEFAULT_BOUNDARY_TAG))
            .collect();
        Mesh::with_boundary_tags(vertices, elements, |[a, b]| {
            // every child boundary facet joins an old vertex and a midpoint
            let mid = a.max(b);
            if mid >= nv {
                parent_tags[mid - nv]
            } else {
                DEFAULT_BOUNDARY_TAG
            }
        })
        .expect("uniform refinement of a valid mesh is valid")
    }

    /// Applies `refine_uniform` `levels` times.
    pub fn refined(&self, levels: usize) -> Mesh {
        let mut m = self.clone();
        for _ in 0..levels {
            m = m.refine_uniform();
        }
        m
    }
}
