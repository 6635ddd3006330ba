//! Planning time budgets.
//!
//! Planners measure time through a [`Budget`]. On the wall clock the budget
//! reads `Instant`; on the work clock it counts charged work units (one per
//! collision-checked configuration plus a small fixed charge per search
//! step), which makes every run reproducible to the byte regardless of
//! machine load.

use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Nominal duration of one work unit, chosen so that work-clock seconds
/// roughly track wall seconds on a desktop core.
pub const WORK_UNIT_SECONDS: f64 = 1.5e-6;

/// Work units charged per search iteration, on top of collision checks.
pub const ITERATION_UNITS: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    Wall,
    Work,
}

#[derive(Clone, Debug)]
pub struct Budget {
    kind: ClockKind,
    limit: f64,
    start: Instant,
    units: u64,
}

impl Budget {
    pub fn new(kind: ClockKind, limit_s: f64) -> Self {
        Budget {
            kind,
            limit: limit_s.max(0.0),
            start: Instant::now(),
            units: 0,
        }
    }

    pub fn wall(limit_s: f64) -> Self {
        Self::new(ClockKind::Wall, limit_s)
    }

    pub fn work(limit_s: f64) -> Self {
        Self::new(ClockKind::Work, limit_s)
    }

    pub fn kind(&self) -> ClockKind {
        self.kind
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn charge(&mut self, units: u64) {
        self.units += units;
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    /// Seconds spent so far on this budget's clock.
    pub fn elapsed(&self) -> f64 {
        match self.kind {
            ClockKind::Wall => self.start.elapsed().as_secs_f64(),
            ClockKind::Work => self.units as f64 * WORK_UNIT_SECONDS,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.elapsed() >= self.limit
    }

    pub fn remaining(&self) -> f64 {
        (self.limit - self.elapsed()).max(0.0)
    }

    /// A budget on the same clock capped at `limit_s` and at what is left
    /// here. Hand it back with [`Budget::absorb`].
    pub fn child(&self, limit_s: f64) -> Budget {
        Budget::new(self.kind, limit_s.min(self.remaining()))
    }

    /// Charges the work done under a child budget.
    pub fn absorb(&mut self, child: Budget) {
        self.units += child.units;
    }
}

/// Snapshot reported to observers on every improvement and at a fixed
/// period while a planner runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub time_s: f64,
    pub best_cost: Option<f64>,
    pub tree_size: usize,
    pub modes_expanded: usize,
}

/// Period of the regular progress reports (s).
pub const PROGRESS_PERIOD: f64 = 0.1;

/// Receives progress snapshots; returning `Break` stops the planner early.
pub type Observer<'a> = dyn FnMut(&Progress) -> std::ops::ControlFlow<()> + 'a;

/// Rate-limits periodic reports and forwards improvements immediately.
pub(crate) struct Reporter<'o, 'a> {
    observer: Option<&'o mut Observer<'a>>,
    next_tick: f64,
    last_cost: Option<f64>,
}

impl<'o, 'a> Reporter<'o, 'a> {
    pub(crate) fn new(observer: Option<&'o mut Observer<'a>>) -> Self {
        Reporter {
            observer,
            next_tick: 0.0,
            last_cost: None,
        }
    }

    /// Returns `true` when the observer asked to stop.
    pub(crate) fn report(&mut self, p: Progress) -> bool {
        let improved = p.best_cost.is_some() && p.best_cost != self.last_cost;
        if !improved && p.time_s < self.next_tick {
            return false;
        }
        while self.next_tick <= p.time_s {
            self.next_tick += PROGRESS_PERIOD;
        }
        self.last_cost = p.best_cost;
        match self.observer.as_mut() {
            Some(obs) => obs(&p).is_break(),
            None => false,
        }
    }
}
