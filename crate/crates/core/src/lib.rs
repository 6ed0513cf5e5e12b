//! Hybrid analog/digital precoder design for cache-enabled mmWave radio
//! access networks.
//!
//! eRRHs serve user requests from local caches and, for uncached content,
//! over capacity-limited fronthaul links, either as hard bits (HFIT) or as
//! quantized baseband signals precoded at the BBU (SFIT). The optimizers
//! maximize the minimum per-user delivery rate by alternating between
//! digital (WMMSE + conic subproblem) and analog (phase-increment trust
//! region) stages.
//!
//! The channel, cache and rate kernels are generic over [`scalar::Real`];
//! the optimizers and the conic backend run in `f64`, and the aliases below
//! fix that choice.

use openblas_src as _;

pub mod cache;
pub mod channel;
pub mod config;
pub mod conic;
pub mod error;
pub mod harness;
pub mod hfit;
pub mod linalg;
pub mod optim;
pub mod rates;
pub mod scalar;
pub mod scenario;
pub mod sfit;
pub mod trace;
pub mod wmmse;

pub use config::{SystemConfig, TransferRule};
pub use error::{Error, Result};
pub use scenario::{PrecoderMode, Strategy};

pub type Channel = channel::NetworkChannel<f64>;
pub type Geometry = channel::Geometry<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type Precoder = scenario::HybridPrecoder<f64>;
pub type Analog = scenario::AnalogPrecoder<f64>;
pub type Link = wmmse::Link<f64>;
pub type Matrix = scalar::CMat<f64>;
