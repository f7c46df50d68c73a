//! Transaction-level simulator for analog photonic INT8 GEMM accelerators.
//!
//! The crate models the SPOGA dot-product dataflow (bit-sliced INT8 operands whose
//! radix weights are applied during optical-to-electrical transduction) next to
//! the MAW and AMW bit-sliced baselines, and turns mapped workloads into
//! latency, energy, area and frame-rate figures.
//!
//! Module map:
//! - [`bitslice`]: exact INT8 reference arithmetic and nibble slicing
//! - [`photonic`]: OAME / aggregation lane / BPCA / PWAB functional model and baselines
//! - [`arch`]: core organizations, bundled scalability table, link-budget estimator
//! - [`mapper`]: im2col lowering, spatio-temporal GEMM plans, plan execution
//! - [`perf`]: cost tables, latency/energy/area accounting, architecture comparison
//! - [`workload`]: layer manifest format and bundled CNN manifests
//! - [`verify`]: oracle sweeps used by the `verify` command
//! - [`report`]: CSV and SVG emitters
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and runs sequentially otherwise.

pub mod arch;
pub mod bitslice;
pub mod error;
pub mod mapper;
pub mod par;
pub mod perf;
pub mod photonic;
pub mod report;
pub mod verify;
pub mod workload;

pub use error::{Error, Result};
