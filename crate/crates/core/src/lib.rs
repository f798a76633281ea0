//! Hyperdimensional classification with accuracy-constrained model
//! compression.
//!
//! The crate covers bit-packed hypervector algebra ([`hv`]), ID-level and
//! random-projection encoders ([`encoders`]), class-hypervector training and
//! inference ([`model`]), a closed-form resource model ([`cost`]), the
//! greedy binary-search optimizer ([`optimizer`]), dataset loading
//! ([`data`]) and a binary model format ([`model_file`]).

pub mod cost;
pub mod data;
pub mod encoders;
pub mod error;
pub mod hv;
pub mod model;
pub mod model_file;
pub mod optimizer;
pub mod rng;

pub use cost::{memory_bits, savings, ResourceReport, Savings};
pub use data::{Dataset, Normalization};
pub use encoders::{Encoder, IdLevelCodebook, ProjectionMatrix};
pub use error::{Error, Result};
pub use hv::{BipolarHv, IntegerHv};
pub use model::{EncoderKind, HdcConfig, TrainOptions, TrainedModel};
pub use optimizer::{optimize, OptTrace, OptimizerOptions, ParamSpace, Workload};
pub use rng::{HdRng, Seeds};
