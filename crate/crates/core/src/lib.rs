//! Spatial computing on maximal planar graph media.

pub mod blobs;
pub mod compiler;
pub mod fields;
pub mod geometry;
pub mod lang;
pub mod locus;
pub mod medium;
pub mod runtime;
pub mod voronoi;

pub use locus::{Class, Locus};
pub use medium::{MediumKind, SimplexId, SimplicialMedium, Topology};
