//! Bayesian hierarchical mixture clustering.
//!
//! Observations descend an infinitely branching tree chosen by a nested
//! Chinese restaurant process. Every node carries mixing proportions over one
//! global book of Gaussian components, and the proportions along a path are
//! tied by a multilevel hierarchical Dirichlet process. Inference is a
//! Metropolis-Hastings-within-Gibbs sampler.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, PCA and the
//! command-line driver live in the `bhmc` companion crate.
//!
//! Module map:
//! - [`stochastic`]: seeded RNG, Beta/Dirichlet/Gaussian draws, stick breaking
//! - [`hierarchy`]: the tree with per-node counts and the nCRP tree prior
//! - [`ncrp`]: path proposals and their densities
//! - [`hdp`]: creation, extension and resampling of node mixing weights
//! - [`model`]: hyperparameters, densities, the generative process
//! - [`inference`]: the sampler
//! - [`evaluation`]: level-wise labels and purity / NMI / ARI / F-measure
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod evaluation;
pub mod hdp;
pub mod hierarchy;
pub mod inference;
pub mod model;
pub mod ncrp;
pub mod stochastic;

pub use error::{Error, Result};
pub use hierarchy::{Hierarchy, Node, NodeId, PathStep};
pub use inference::{run_sampler, Hyperpriors, Sampler, SamplerConfig, Trace};
pub use model::{ComponentBook, Dataset, Hyperparams, MixingMode, PathAssignment, State};
pub use stochastic::{Rng, StickWeights};
