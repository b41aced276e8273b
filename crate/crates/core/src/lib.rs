//! Volume growth versus topological entropy on smooth maps of tori.
//!
//! Two independent estimators of the entropy of a partially hyperbolic map:
//! the growth rate of `∫ max_V |det Df^n_x|_V| dx` ([`volume`]) and counts of
//! Bowen balls in spanning/separated sets ([`bowen`]). The supporting
//! machinery lives in [`cocycle`] (factored derivative products, Lyapunov
//! exponents) and [`splitting`] (invariant splittings, cones, Grassmannian
//! gap checks). [`cli`] wires everything to configs and JSON/CSV reports.

pub mod bowen;
pub mod cli;
pub mod cocycle;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod splitting;
pub mod system;
pub mod volume;

pub use error::{Error, Result};
pub use system::{torus_distance, SystemKind, SystemSpec, TorusPoint};
