//! Uniform attachment trees with freezing.
//!
//! A choice sequence of attach (`+`) and freeze (`-`) steps drives the
//! growth of a random rooted tree. This crate builds those trees forward and
//! by a time-reversed growth-coalescent, couples pairs of constructions,
//! computes exact height laws on small instances, and runs reproducible
//! Monte Carlo experiments on large ones.

pub mod arena;
pub mod coupling;
pub mod error;
pub mod exact;
pub mod forward;
pub mod montecarlo;
pub mod reverse;
pub mod rng;
pub mod sequence;

pub use arena::{Status, TreeArena, VertexRecord};
pub use coupling::{CoupledSample, ReducedSequence};
pub use error::{Error, Result};
pub use exact::{EmpiricalLaw, ExactLaw, HeightDistribution};
pub use montecarlo::{BennettQuery, SimulationReport};
pub use rng::{Chooser, Enumerator, RngStream};
pub use sequence::{parse_sequence, ChoiceSequence, Step};
