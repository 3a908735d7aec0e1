pub mod cover;
pub mod criterion;
pub mod error;
pub mod fixed_point;
pub mod gauss;
pub mod h4;
pub mod invariants;
pub mod linalg;
pub mod mesh;
pub mod poisson;
pub mod ray;
pub mod sections;
pub mod spectral;
pub mod surface;
pub mod systole;

pub use error::{Error, Result};
pub use mesh::{load_mesh, MeshFormat, TriangleMesh};
pub use surface::{HyperbolicSurface, ScalarField, SurfaceId};
