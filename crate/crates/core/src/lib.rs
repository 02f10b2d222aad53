//! Co-design exploration of DNN models and tile-pipelined FPGA accelerators.
//!
//! The crate is organised along the flow it implements:
//!
//! - [`ip_catalog`]: IP templates, configured instances and their per-invocation
//!   latency/resource characterization.
//! - [`bundle`]: bundle enumeration and the bundle-level latency/resource model.
//! - [`dnn`]: DNNs built by replicating a bundle, the whole-network model and
//!   initialization under a device budget.
//! - [`sim`]: a discrete-event simulator of the tile pipeline, used as the
//!   latency oracle, and calibration of the analytical constants against it.
//! - [`evaluation`]: coarse/fine bundle evaluation and Pareto selection.
//! - [`scd`]: stochastic coordinate descent over replication count, channel
//!   expansion and down-sampling.
//! - [`hls`]: code planning, C source emission and estimation reports.
//! - [`pipeline`]: end-to-end orchestration driven by a JSON run config.

pub mod bundle;
pub mod device;
pub mod dnn;
pub mod error;
pub mod evaluation;
pub mod hls;
pub mod ip_catalog;
pub mod pipeline;
pub mod scd;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};

/// Version tag written into every JSON document this crate produces.
pub const SCHEMA_VERSION: u32 = 1;
