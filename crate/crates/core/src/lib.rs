//! Explicit ReLU generator networks for two-dimensional targets.
//!
//! The pipeline quantizes a Lipschitz density on `[0,1]^2` onto a uniform
//! histogram, builds a transport map `[0,1] -> [0,1]^2` whose pushforward of
//! `U[0,1]` matches the histogram cell by cell, and lowers that map onto a
//! deep ReLU network with known depth and connectivity.
//!
//! - [`histogram`]: densities, histogram distributions, TV distance.
//! - [`pwl`]: continuous piecewise-linear calculus and inverse CDFs.
//! - [`sawtooth`]: the tent map, its compositions and rescaled teeth.
//! - [`relunet`]: dense ReLU networks and their composition calculus.
//! - [`transport`]: the transport maps, their lowering and exact mass queries.
//! - [`metrics`]: Wasserstein distances and exact discrete optimal transport.
//! - [`sampler`]: counter-based uniform noise and pushforward sampling.

pub mod error;
pub mod histogram;
pub mod metrics;
mod numeric;
pub mod pwl;
pub mod relunet;
pub mod sampler;
pub mod sawtooth;
pub mod transport;

pub use error::{Error, Result};
pub use histogram::{Cell, DensitySpec, GeneralHistogram1D, HistogramD, Law};
pub use pwl::{Interval, PwlFunction};
pub use relunet::{AffineLayer, NetworkFile, NetworkMeta, ReluNetwork};
pub use sampler::{NoiseSource, Pushforward, Samples};
pub use transport::{Method, SnakeIndex, TransportMap1to2};
