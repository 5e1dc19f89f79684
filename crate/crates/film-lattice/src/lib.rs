//! Discrete film/substrate lattice energies on a triangular reference
//! lattice, their continuum limit, and the approximation toolbox connecting
//! the two scales.
//!
//! The discrete side models an epitaxial film deposited on a substrate strip
//! with lateral periodicity: integer column heights with a parity rule,
//! missing-bond surface energy, and harmonic (or renormalized Lennard-Jones)
//! nearest-neighbor elasticity with a film/substrate equilibrium mismatch.
//! The continuum side carries the anisotropic surface tension of the lattice
//! (with cut doubling and wetting) and a linearized elastic density with
//! mismatch strain. In between sit rotation fitting and rigidity probes,
//! Yosida transforms, exact volume rebalancing, recovery sequences, lattice
//! volume matching, Hausdorff distances of complements, and relaxation /
//! annealing drivers.

pub mod approx;
pub mod continuum;
pub mod energy;
pub mod error;
pub mod lattice;
pub mod relax;
pub mod rigidity;
pub mod serialize;

pub use error::{Error, Result};
