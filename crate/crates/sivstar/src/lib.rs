//! Networked SI*V* spreading models.
//!
//! This crate builds heterogeneous compartmental spreading models on directed
//! contact graphs — one susceptible state, `m` infectious states, `n`
//! vigilant states per node — and provides four views of their dynamics:
//!
//! * [`meanfield`]: the deterministic mean-field ODE system and a fixed-step
//!   integrator;
//! * [`stability`]: Metzler/Hurwitz analysis of the disease-free equilibrium
//!   (block matrix assembly, vigilant equilibrium, spectral abscissas);
//! * [`stochastic`]: exact continuous-time simulation of the underlying
//!   Markov process, plus a semi-Markov reference simulator for
//!   non-exponential holding times;
//! * [`phasetype`]: phase-type distributions — evaluation, sampling, EM
//!   fitting, densification, and expansion of a non-exponential transition
//!   into extra Markovian states.
//!
//! The `sivstar` CLI (separate crate) wraps these modules behind subcommands;
//! the guide under `book/` walks through the concepts chapter by chapter.

pub mod error;
pub mod graph;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod phasetype;
pub mod stability;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use graph::Graph;
pub use model::{Model, NodeParams, ParamRanges, ValidationReport};

// Public linear-algebra types appear in this crate's signatures.
pub use nalgebra;
pub use rand;

#[cfg(doctest)]
mod book_doctests;
