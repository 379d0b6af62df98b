use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spade::{DelaunayTriangulation, Point2, Triangulation};

use super::{signed_area, Mesh, Point};
use crate::error::MeshError;

/// Guaranteed bound `max h_K <= MESH_SIZE_FACTOR * target_h` for
/// [`generate_unstructured`].
pub const MESH_SIZE_FACTOR: f64 = 2.0;

/// Relative amplitude of the random displacement applied to interior points.
const JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Result<Self, MeshError> {
        let ok = min
            .iter()
            .chain(max.iter())
            .all(|v| v.is_finite())
            && max[0] > min[0]
            && max[1] > min[1];
        if !ok {
            return Err(MeshError::DegenerateDomain(format!(
                "[{}, {}] x [{}, {}]",
                min[0], max[0], min[1], max[1]
            )));
        }
        Ok(Self { min, max })
    }

    pub fn unit_square() -> Self {
        Self {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        }
    }

    /// The lid-driven cavity domain `[-1, 1]^2`.
    pub fn cavity() -> Self {
        Self {
            min: [-1.0, -1.0],
            max: [1.0, 1.0],
        }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// Delaunay triangulation of a jittered, row-staggered point lattice.
///
/// Horizontal sides are split into `ceil(W / target_h)` equal segments and
/// vertical sides into rows of height about `target_h * sqrt(3) / 2`; interior
/// rows alternate between aligned and half-shifted points and every interior
/// point is displaced by up to 10% of the spacing using a generator seeded
/// with `seed`. The result is deterministic for fixed
/// arguments and satisfies `max h_K <= MESH_SIZE_FACTOR * target_h`.
pub fn generate_unstructured(domain: Rect, target_h: f64, seed: u64) -> Result<Mesh, MeshError> {
    let domain = Rect::new(domain.min, domain.max)?;
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(MeshError::InvalidMeshSize(target_h));
    }
    let nx = (domain.width() / target_h).ceil().max(1.0) as usize;
    // rows spaced for near-equilateral triangles
    let row_h = target_h * 3f64.sqrt() / 2.0;
    let ny = (domain.height() / row_h).ceil().max(1.0) as usize;
    let dx = domain.width() / nx as f64;
    let dy = domain.height() / ny as f64;
    let [x0, y0] = domain.min;
    let [x1, y1] = domain.max;

    let mut points: Vec<Point> = Vec::with_capacity((nx + 1) * (ny + 1) + nx);
    for i in 0..nx {
        points.push([x0 + i as f64 * dx, y0]);
        points.push([x1 - i as f64 * dx, y1]);
    }
    for j in 0..ny {
        points.push([x1, y0 + j as f64 * dy]);
        points.push([x0, y1 - j as f64 * dy]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = JITTER * dx.min(dy);
    for j in 1..ny {
        let y = y0 + j as f64 * dy;
        let shifted = j % 2 == 1;
        let xs: Vec<f64> = if shifted {
            (0..nx).map(|i| x0 + (i as f64 + 0.5) * dx).collect()
        } else {
            (1..nx).map(|i| x0 + i as f64 * dx).collect()
        };
        let last = xs.len().saturating_sub(1);
        for (i, x) in xs.into_iter().enumerate() {
            let jx: f64 = rng.gen_range(-amp..=amp);
            let jy: f64 = rng.gen_range(-amp..=amp);
            // half-spaced points next to the side walls stay put so that the
            // wall triangles remain right-angled
            if shifted && (i == 0 || i == last) {
                points.push([x, y]);
            } else {
                points.push([x + jx, y + jy]);
            }
        }
    }

    let tri = DelaunayTriangulation::<Point2<f64>>::bulk_load_stable(
        points.iter().map(|p| Point2::new(p[0], p[1])).collect(),
    )
    .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
    if tri.num_vertices() != points.len() {
        return Err(MeshError::Triangulation("duplicate points".into()));
    }

    let mut elements = Vec::with_capacity(tri.num_inner_faces());
    for face in tri.inner_faces() {
        let mut v = face.vertices().map(|h| h.fix().index());
        let area = signed_area(points[v[0]], points[v[1]], points[v[2]]);
        if area < 0.0 {
            v.swap(1, 2);
        }
        elements.push(v);
    }
    Mesh::new(points, elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_domain_rejected() {
        let r = Rect::new([0.0, 0.0], [1.0, 0.0]);
        assert!(matches!(r, Err(MeshError::DegenerateDomain(_))));
        let bad = Rect {
            min: [0.0, 0.0],
            max: [0.0, 1.0],
        };
        assert!(generate_unstructured(bad, 0.1, 0).is_err());
    }

    #[test]
    fn invalid_target_h_rejected() {
        assert!(matches!(
            generate_unstructured(Rect::unit_square(), 0.0, 0),
            Err(MeshError::InvalidMeshSize(_))
        ));
        assert!(generate_unstructured(Rect::unit_square(), f64::NAN, 0).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_unstructured(Rect::unit_square(), 0.2, 11).unwrap();
        let b = generate_unstructured(Rect::unit_square(), 0.2, 11).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.elements(), b.elements());
        let c = generate_unstructured(Rect::unit_square(), 0.2, 12).unwrap();
        assert_ne!(a.vertices(), c.vertices());
    }

    #[test]
    fn size_bound_and_area() {
        for &h in &[0.5, 0.21, 0.1] {
            let m = generate_unstructured(Rect::unit_square(), h, 3).unwrap();
            assert!(m.h_max() <= MESH_SIZE_FACTOR * h);
            assert!((m.total_area() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn cavity_coarse_mesh_scale() {
        let m = generate_unstructured(Rect::cavity(), 0.25, 0).unwrap();
        let e = m.num_elements() as f64;
        assert!((e - 176.0).abs() / 176.0 < 0.1, "elements = {e}");
    }
}
