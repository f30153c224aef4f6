//! Numerical laboratory for the half Ginzburg-Landau-Kuramoto equation
//! `i u_t + D u = i |u|^{p-1} u`, where `D` is the square root of the
//! divergence-form Hamiltonian `-(a u')' + V u` on a periodic 1-D grid.
//!
//! Modules follow the pipeline: [`grid`] samples and transforms, [`operator`]
//! assembles the Hamiltonian and checks its standing assumptions,
//! [`spectral`] computes fractional powers two independent ways, [`besov`]
//! measures dyadic regularity, [`commutator`] probes the commutator bounds,
//! and [`evolve`] integrates the flow up to blow-up. [`app`] wires these into
//! the `hglk` command-line tool.

pub mod app;
pub mod besov;
pub mod commutator;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod par;
pub mod quadrature;
pub mod random;
pub mod spectral;
pub mod suite;

pub use error::{LabError, Result};
pub use grid::{Field, Grid};
