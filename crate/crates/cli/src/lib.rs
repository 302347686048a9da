//! IO companion for `pmlp-core`: text formats for matrices, graphs, labels
//! and splits, dataset manifests with checksums, experiment runners, and the
//! machine-readable result schemas the `pmlp` binary writes.

pub mod bench;
pub mod error;
pub mod extrapolate;
pub mod formats;
pub mod manifest;
pub mod ntk;
pub mod run;
pub mod sweep;

pub use error::CliError;
