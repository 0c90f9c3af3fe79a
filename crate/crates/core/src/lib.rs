//! Random walks driven by dynamic random environments.
//!
//! The environment is either a symmetric exclusion process or a Poisson
//! cloud of lazy random walks. The walk steps right with probability `p•`
//! from an occupied site and `p∘` from an empty one. All randomness is a
//! pure function of a seed and coordinates, so walks, environments and
//! couplings at different parameters can share their noise.

pub mod couplings;
pub mod driver;
pub mod env;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod finite_range;
pub mod pcrw;
pub mod rng;
pub mod sep;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
