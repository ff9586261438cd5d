//! Schedule quality metrics.

use crate::analysis::streaming_depth;
use crate::error::CoreError;
use crate::graph::TaskGraph;
use crate::rational::{q, Q};
use crate::schedule::{sequential_time, Schedule, ScheduleKind};

/// Metrics of one schedule against its graph.
#[derive(Clone, Debug)]
pub struct Metrics {
    pub t1: u64,
    pub makespan: u64,
    pub p: u32,
    pub kind: ScheduleKind,
    /// `t1 / makespan`.
    pub speedup: Q,
    /// `makespan / streaming_depth`; 1 is optimal.
    pub sslr: Q,
    /// `t1 / (p * makespan)`, in (0, 1].
    pub pe_utilization: Q,
}

pub fn compute_metrics(graph: &TaskGraph, schedule: &Schedule) -> Result<Metrics, CoreError> {
    if schedule.makespan == 0 {
        return Err(CoreError::ZeroMakespan);
    }
    let t1 = sequential_time(graph)?;
    let depth = streaming_depth(graph)?;
    if depth == 0 {
        return Err(CoreError::Invariant("zero streaming depth".into()));
    }
    let makespan = q(schedule.makespan);
    Ok(Metrics {
        t1,
        makespan: schedule.makespan,
        p: schedule.p,
        kind: schedule.kind,
        speedup: q(t1) / makespan,
        sslr: makespan / q(depth),
        pe_utilization: q(t1) / (q(schedule.p as u64) * makespan),
    })
}
