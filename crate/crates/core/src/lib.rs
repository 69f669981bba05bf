//! Virtual cluster embedding and pricing on three-layer fat-tree datacenters.
//!
//! A virtual cluster `VC(n, c, b)` asks for `n` VMs, each using a fraction `c`
//! of one host's compute and a fraction `b` of one host's access link, all
//! connected to a virtual switch (hose model). This crate provides:
//!
//! * the substrate ([`topology`]) with exact rational residual accounting,
//! * hose-model cut demands ([`hose`]),
//! * two online embedders: the dense level-traversal baseline
//!   ([`embed::Oktopus`]) and the balance-aware [`embed::Tetris`],
//! * ideal, dominant-resource and demand-specific pricing ([`pricing`]),
//! * a Poisson workload generator ([`workload`]) and a discrete-event
//!   simulator ([`simulator`]) that measures time-weighted resource sums,
//! * experiment grids with CSV output ([`experiment`]).

pub mod embed;
pub mod error;
pub mod experiment;
pub mod frac;
pub mod hose;
pub mod pricing;
pub mod request;
pub mod simulator;
pub mod topology;
pub mod workload;

pub use embed::{Embedder, EmbedderKind, Level, Oktopus, Tetris};
pub use error::{Error, Result};
pub use frac::Rational;
pub use pricing::{LambdaParams, PriceQuote, Scheme, UnitPrices};
pub use request::{TemplateSet, VcId, VcRequest};
pub use simulator::{MetricsReport, Scenario};
pub use topology::{FatTree, FatTreeSpec, Placement};
pub use workload::WorkloadConfig;
