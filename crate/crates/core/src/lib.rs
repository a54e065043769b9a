//! Mixed-criticality, temporally partitioned scheduling.
//!
//! The crate covers the whole pipeline: checking and generating major
//! frames ([`frame`]), the per-node scheduler with CPU caps and online
//! reconfiguration ([`sched`]), a deterministic discrete-event simulator
//! ([`sim`]) and its multi-node composition ([`cluster`]), trace
//! post-processing ([`analysis`]) and the text formats used on disk
//! ([`format`]).

pub mod analysis;
pub mod cluster;
pub mod format;
pub mod frame;
pub mod model;
pub mod scenario;
pub mod sched;
pub mod sim;
pub mod trace;
