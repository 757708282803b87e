//! Landmark-free geometric distances between disk-type surfaces.
//!
//! Surfaces are conformally flattened to the unit disk; distances are then
//! computed by searching over disk-preserving Möbius maps and comparing the
//! conformal factors with optimal transport (`cW`, `cWn`) or by aligning the
//! surfaces through an area-preserving correspondence (`cP`).

pub mod analysis;
pub mod distances;
pub mod error;
pub mod flatten;
pub mod hyperbolic;
pub mod linalg;
pub mod locate;
pub mod mesh;
pub mod params;
pub mod synth;
pub mod transport;

pub use error::{Error, Result};
pub use flatten::{flatten, FlatMap};
pub use hyperbolic::MobiusTransform;
pub use mesh::{LandmarkSet, TriMesh};
