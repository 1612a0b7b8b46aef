//! Exact Gibbs measures on finite product spaces, their gradient-covering
//! decompositions into near-product pieces, and the accompanying
//! information-theoretic, transport and mean-field bounds.
//!
//! Every quantity is computed by full enumeration of the configuration
//! space, so the library is meant for spaces of up to about a million
//! configurations.

pub mod cover;
pub mod decompose;
pub mod error;
pub mod gibbs;
pub mod infotheory;
pub mod meanfield;
pub mod models;
pub mod report;
pub mod potential;
pub mod space;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use gibbs::{gibbs, product_gibbs, GibbsMeasure, ProductMeasure};
pub use infotheory::{kl, PartitionOfSpace};
pub use potential::{gradient, sep_sup_norm, GradientTable, Potential, SeparableFunction};
pub use space::{Config, Distribution, Measure, ProductSpace};
