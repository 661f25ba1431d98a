//! Cost model and discrete-event simulator for running a distributed-computing
//! production site on commercial cloud resources.
//!
//! The crate is organised bottom-up:
//!
//! * [`pricing`]: pure cost arithmetic (compute, storage, tiered egress,
//!   interconnect, break-even, subscription comparison).
//! * [`topology`]: sites, storage elements, distances and link classes.
//! * [`datamgmt`]: datasets, replication rules, replica classification,
//!   deletion and consolidation.
//! * [`workload`]: workflow templates, fairshare brokering, slot ramps,
//!   preemption, tape carousel and analysis arrivals.
//! * [`engine`]: the deterministic event loop tying everything together.
//! * [`accounting`]: the billing ledger and the reports built on it.
//! * [`scenario`], [`output`] and [`cli`]: scenario files, validation, run
//!   artifacts, orchestration and report emission.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example burst`
//! is a good starting point.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod cli;
pub mod datamgmt;
pub mod engine;
mod error;
pub mod output;
pub mod pricing;
pub mod scenario;
pub mod time;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};
