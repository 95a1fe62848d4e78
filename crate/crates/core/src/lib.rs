//! Layerwise, backpropagation-free spectral feature learning.
//!
//! Each layer estimates the label-weighted second-moment operator
//! `Ĉ = (1/n) Σ y zzᵀ` of the current representation, keeps its top-`k`
//! eigendirections by `|λ|`, and re-expands the projected coordinates through
//! a fixed Gaussian lift followed by a pointwise nonlinearity. A ridge readout
//! on the last representation gives the predictor.
//!
//! Beyond the finite-width pipeline ([`lofi`]) the crate provides its kernel
//! limit ([`kernel`]), a sample-complexity predictor for individual
//! eigendirections ([`emergence`]), a solvable hierarchical teacher
//! ([`synth`]), a small layerwise gradient-descent reference used to check the
//! spectral approximation of early training ([`gd`]), input-importance maps
//! ([`importance`]) and the command drivers behind the `lofi` binary
//! ([`cli`]).
//!
//! Runnable walkthroughs live in `examples/`, one per capability.

pub mod activation;
pub mod cli;
pub mod dataio;
pub mod emergence;
pub mod error;
pub mod gd;
pub mod importance;
pub mod kernel;
pub mod linalg;
pub mod lofi;
pub mod report;
pub mod rng;
pub mod synth;

pub use activation::Activation;
pub use dataio::Dataset;
pub use error::{LofiError, Result};
pub use linalg::{DenseMatrix, EigMethod, SymEigResult};
pub use lofi::{FittedLayer, LayerKind, LayerSpec, LofiModel, ReadoutConfig, Task};
pub use rng::Rng;

/// Library version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
