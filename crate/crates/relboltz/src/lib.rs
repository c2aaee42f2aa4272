//! Spatially homogeneous special-relativistic Boltzmann equation with
//! hard-ball scattering: collision operator in the center-of-momentum and
//! Carleman representations, Jüttner equilibria, deterministic time
//! evolution on a momentum grid, and a randomized verification suite.
//!
//! Units: c = 1, rest mass = 1, k_B = 1. Metric signature (−,+,+,+).

pub mod carleman;
pub mod collision;
pub mod equilibrium;
pub mod grid;
pub mod io;
pub mod kinematics;
pub mod linalg;
pub mod scenario;
pub mod solver;
pub mod verify;

pub use grid::{GridFunction, MomentumGrid};
pub use kinematics::{EnergyMomentum, FourVector, LorentzMatrix};
