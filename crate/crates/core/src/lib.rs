//! Centre-manifold reduction and invariant-manifold dynamics around the
//! saddle points of a rotating triaxial logarithmic potential.

pub mod connections;
pub mod convergence;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod ode;
pub mod poly;
pub mod reduction;
pub mod store;

pub use equilibria::{LagrangePoint, Linearization, SaddlePoint};
pub use error::{Error, Result};
pub use model::{ModelParams, PhaseState};
