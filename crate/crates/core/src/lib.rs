//! Streaming-aware scheduling of task graphs on abstract dataflow devices.
//!
//! The device model is `P` homogeneous processing elements attached to a
//! global memory. Tasks form a canonical DAG; communication between
//! co-scheduled tasks is pipelined element by element, everything else goes
//! through memory. The crate provides:
//!
//! - [`graph`]: canonical task graphs, validation, buffer splitting, JSON.
//! - [`analysis`]: steady-state streaming intervals, work/levels, streaming
//!   depth via the component DAG.
//! - [`partition`]: spatial-block partitioners (greedy strict/relaxed and
//!   the level-order / work-order special cases).
//! - [`schedule`]: streaming schedule (start / first-out / last-out times)
//!   and a non-streaming list-scheduling baseline.
//! - [`buffers`]: FIFO capacities that make the streaming schedule
//!   deadlock-free.
//! - [`sim`]: element-granularity discrete-event simulation used as the
//!   correctness oracle, plus error sweeps.
//! - [`generators`]: synthetic topologies and a small pattern library.
//! - [`metrics`]: speedup, streaming SLR, PE utilization.

pub mod analysis;
pub mod buffers;
pub mod error;
pub mod generators;
pub mod graph;
pub mod metrics;
pub mod partition;
pub mod rational;
pub mod schedule;
pub mod sim;

pub use error::CoreError;
pub use graph::{
    split_buffers, topological_order, Edge, EdgeIdx, NodeIdx, NodeKind, SplitGraph, TaskGraph,
    ValidationReport,
};
pub use rational::{Q, Rate};
