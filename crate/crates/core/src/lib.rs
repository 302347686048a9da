//! Node-level prediction on graphs with message passing decoupled from training.
//!
//! The crate separates a network's feed-forward weights from the non-parametric
//! message-passing (MP) steps that a graph model wraps around them. The same
//! trained weights can then be run as a plain MLP, as a PMLP (MP inserted only
//! at inference), or as a full GNN (MP in training and inference). Alongside
//! the finite-width models it provides the matching infinite-width machinery:
//! node-level neural tangent kernels, min-norm kernel regression, and
//! numerical probes for extrapolation behavior far from the training support.
//!
//! The crate is `no_std`-compatible (with `alloc`); all IO, file formats, and
//! the command-line interface live in the companion `pmlp-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod extrapolation;
pub(crate) mod fmath;
pub mod gntk;
pub mod graph;
pub mod matrix;
pub mod models;
pub mod nn;
pub mod rng;

pub use error::Error;
pub use graph::{Graph, InductiveSplit, Scheme, TransitionMatrix};
pub use matrix::DenseMatrix;
pub use nn::{Activation, MpMode, MpPlacement, Network};
pub use rng::Rng;
