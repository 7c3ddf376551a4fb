use alloc::vec::Vec;
use core::fmt;

use nalgebra::DVector;

use crate::diagnostics::dist_to_targets_raw;
use crate::models::TargetSet;
use crate::sphere::UnitVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIters,
    SubproblemFail,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::SubproblemFail => "subproblem_fail",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub dist: Option<f64>,
    pub elapsed_ms: f64,
}

/// Per-iteration records, plus the iterates themselves when requested.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub iterates: Vec<DVector<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Number of iterations performed (iter of the final record).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub q_final: UnitVector,
    pub status: Status,
    pub trace: Trace,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.trace.iterations()
    }

    pub fn final_f(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn final_dist(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.dist)
    }
}

/// Wall-clock source; the core crate has none of its own.
pub trait Clock {
    fn elapsed_ms(&self) -> f64;
}

/// What a solve records into its trace beyond objective and gradient norm.
#[derive(Clone, Copy, Default)]
pub struct Monitor<'a> {
    pub targets: Option<&'a TargetSet>,
    pub clock: Option<&'a dyn Clock>,
    pub record_iterates: bool,
    /// Stop (as converged) once the tracked distance is at most this.
    pub stop_dist: Option<f64>,
}

impl fmt::Debug for Monitor<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Monitor")
            .field("targets", &self.targets.is_some())
            .field("clock", &self.clock.is_some())
            .field("record_iterates", &self.record_iterates)
            .field("stop_dist", &self.stop_dist)
            .finish()
    }
}

impl<'a> Monitor<'a> {
    pub fn new() -> Self {
        Monitor::default()
    }

    pub fn with_targets(mut self, targets: &'a TargetSet) -> Self {
        self.targets = Some(targets);
        self
    }

    pub fn with_targets_opt(mut self, targets: Option<&'a TargetSet>) -> Self {
        self.targets = targets;
        self
    }

    pub fn with_clock(mut self, clock: &'a dyn Clock) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn recording_iterates(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    /// Ends the solve as soon as a recorded distance is at most `tol`
    /// (needs targets).
    pub fn stopping_at_dist(mut self, tol: f64) -> Self {
        self.stop_dist = Some(tol);
        self
    }

    pub(crate) fn start(&self) -> Recorder<'a> {
        Recorder {
            monitor: *self,
            start_ms: self.clock.map_or(0.0, |c| c.elapsed_ms()),
            trace: Trace::default(),
        }
    }
}

pub(crate) struct Recorder<'a> {
    monitor: Monitor<'a>,
    start_ms: f64,
    trace: Trace,
}

impl Recorder<'_> {
    /// Appends a record; returns whether the distance stop was hit.
    pub(crate) fn record(&mut self, iter: usize, q: &DVector<f64>, f: f64, grad_norm: f64) -> bool {
        let dist = self.monitor.targets.map(|t| dist_to_targets_raw(q, t));
        let elapsed_ms = self
            .monitor
            .clock
            .map_or(0.0, |c| (c.elapsed_ms() - self.start_ms).max(0.0));
        self.trace.records.push(TraceRecord {
            iter,
            f,
            grad_norm,
            dist,
            elapsed_ms,
        });
        if self.monitor.record_iterates {
            self.trace.iterates.push(q.clone());
        }
        matches!((dist, self.monitor.stop_dist), (Some(d), Some(tol)) if d <= tol)
    }

    pub(crate) fn finish(self, q: DVector<f64>, status: Status) -> SolveResult {
        SolveResult {
            q_final: UnitVector::from_normalized(q),
            status,
            trace: self.trace,
        }
    }
}
