//! Meshes, P1 assembly, sparse SPD algebra and discrete spectral constants.

mod assembly;
mod fields;
pub mod linalg;
mod mesh;
pub mod spectral;

pub use assembly::{assemble, coercivity_constant, trace_norm, DiscreteOperators, FunctionSpace, MassKind};
pub use fields::{BoundaryControl, Frames, TimeField, TimeGrid};
pub use linalg::{solve_spd, CsrMatrix, SpdSolver};
pub use mesh::{build_interval_mesh, build_rect_mesh, BoundaryTag, Facet, Mesh, Side};
