//! Numerical realization of equilibrium states of Anosov maps of the
//! 2-torus: periodic-orbit pressure, Lyapunov exponents, leafwise measures,
//! pointwise dimension, and the arithmetic of measure-preserving symmetries.

pub mod cones;
pub mod conjugacy;
pub mod dimension;
pub mod equilibrium;
pub mod error;
pub mod export;
pub mod lattice;
pub mod leaves;
pub mod map;
pub mod periodic;
pub mod potential;
pub mod product;
pub mod rigidity;
pub mod splitting;
pub mod sum;
pub mod torus;

pub use error::{Error, Result};
