//! Bases, quadrature and DOF layouts for element and trace spaces.

pub mod basis;
pub mod layout;
pub mod quadrature;

pub use basis::{
    dim_pk, eval_basis_element, eval_basis_facet, ElementBasis, ElementMap, FacetBasis, FacetNodes,
};
pub use layout::{DofLayout, SpaceConfig, TraceDof, Variant};
pub use quadrature::{SegmentRule, TriangleRule};
