//! Distribution regression networks.
//!
//! Every node of a [`DrnModel`] carries a whole probability distribution over a
//! shared bounded [`Support`]. A connection propagates distributions through a
//! Boltzmann factor `exp(-E)` of a quadratic-plus-absolute energy, and the
//! network is trained by gradient descent on the Jensen-Shannon divergence
//! between predicted and label distributions.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the file formats and the
//! command-line tool use.
//!
//! - [`dist`]: discretized distributions, KDE, divergences and metrics
//! - [`net`]: topology, parameters, forward propagation
//! - [`grad`]: cost, analytic backpropagation and finite-difference checks
//! - [`train`]: initialization, gradient descent, evaluation
//! - [`datagen`]: Ornstein-Uhlenbeck and Fokker-Planck dataset generators
//! - [`dataset`]: the dataset file format

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// numerical kernels index several parallel arrays by bin
#![allow(clippy::needless_range_loop)]

pub mod datagen;
pub mod dataset;
pub mod dist;
pub mod error;
pub mod grad;
pub mod net;
pub mod scalar;
pub mod seed;
pub mod train;

pub use error::{DrnError, Result};
pub use net::{param_count, NodeParams, Topology};
pub use scalar::Scalar;

pub type Support = dist::Support<f64>;
pub type Distribution = dist::DiscreteDistribution<f64>;
pub type DrnModel = net::DrnModel<f64>;
pub type ModelParams = net::ModelParams<f64>;
pub type ForwardCache = net::ForwardCache<f64>;
pub type Gradients = grad::Gradients<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type Record = dataset::Record<f64>;
pub type TrainConfig = train::TrainConfig<f64>;
pub type TrainReport = train::TrainReport<f64>;

pub type Support32 = dist::Support<f32>;
pub type Distribution32 = dist::DiscreteDistribution<f32>;
pub type DrnModel32 = net::DrnModel<f32>;
pub type Gradients32 = grad::Gradients<f32>;
