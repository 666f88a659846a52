//! Simulation suite for multi-agent coverage control on grid graphs under an
//! unknown reward density.
//!
//! Agents learn the density online with a Gaussian process, plan coverage
//! destinations through a submodular oracle on an optimistic reward map, and
//! terminate episodes with a sample-count doubling rule. Baselines (a
//! shortest-path variant and a Voronoi heuristic), two safety-constrained
//! variants, and empirical checks for the supporting regret analysis are
//! included.

pub mod error;
pub mod gp;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod policy;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
