//! Star-shaped lattice patterns for the TN-energy in ℝ^N, N ∈ {2, 3}.
//! The planar case stands for cylinders over a lattice, through the kernel 2K₀.

pub mod geometry;
pub mod harmonics;
pub mod interaction;
pub mod lattice;
pub mod solve;
pub mod spectrum;

pub use geometry::{area, area_variation_density, star_mean_curvature, StarShape};
pub use harmonics::HarmonicBasis;
pub use interaction::{lattice_interaction, self_interaction, self_interaction_derivative, SelfQuadSpec};
pub use lattice::{
    first_order_field, first_order_shape, harmonic_inverse, nonconstancy_metrics, BravaisLattice, NonconstancyReport,
    Verdict,
};
pub use solve::{newton_lattice_solve, LatticeParams, LatticeSolution, LatticeSolveConfig, LatticeSolver};
pub use spectrum::{gamma_n, mu_k, sigma_lattice, LatticeSpectrum};
