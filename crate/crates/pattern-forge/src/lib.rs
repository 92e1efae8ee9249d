pub mod error;
pub mod kernels;
pub mod krylov;
pub mod lamellae;
pub mod lattice_patterns;
pub mod periodic_field;
pub mod quadrature;
pub mod slab_branch;
pub mod slab_operator;
pub mod slab_spectrum;

pub use error::{Error, Result};
