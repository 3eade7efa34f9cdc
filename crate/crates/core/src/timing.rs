//! Wall-clock attribution of method cost to micro, macro and overhead work.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Seconds spent per category, summed over worker threads.
///
/// `t_total` is the sum of the three categories, so fractions add up to one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub t_total: f64,
    pub t_micro: f64,
    pub t_macro: f64,
    pub t_overhead: f64,
    pub micro_fraction: f64,
    pub macro_fraction: f64,
    pub overhead_fraction: f64,
}

impl TimingBreakdown {
    pub fn from_seconds(t_micro: f64, t_macro: f64, t_overhead: f64) -> Self {
        let t_total = t_micro + t_macro + t_overhead;
        let frac = |t: f64| if t_total > 0.0 { (t / t_total).clamp(0.0, 1.0) } else { 0.0 };
        Self {
            t_total,
            t_micro,
            t_macro,
            t_overhead,
            micro_fraction: frac(t_micro),
            macro_fraction: frac(t_macro),
            overhead_fraction: frac(t_overhead),
        }
    }

    /// `baseline.t_total / self.t_total`.
    pub fn speedup_over(&self, baseline: &TimingBreakdown) -> f64 {
        if self.t_total > 0.0 {
            baseline.t_total / self.t_total
        } else {
            f64::INFINITY
        }
    }
}

/// Running totals while a method executes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Clock {
    pub micro: Duration,
    pub macro_: Duration,
    pub overhead: Duration,
}

impl Clock {
    pub fn merge(&mut self, other: &Clock) {
        self.micro += other.micro;
        self.macro_ += other.macro_;
        self.overhead += other.overhead;
    }

    /// Books `wall` so that anything not already attributed becomes overhead.
    pub fn close_sample(&mut self, wall: Duration, micro: Duration, macro_: Duration) {
        self.micro += micro;
        self.macro_ += macro_;
        self.overhead += wall.saturating_sub(micro + macro_);
    }

    pub fn overhead<R>(&mut self, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.overhead += t.elapsed();
        r
    }

    pub fn breakdown(&self) -> TimingBreakdown {
        TimingBreakdown::from_seconds(self.micro.as_secs_f64(), self.macro_.as_secs_f64(), self.overhead.as_secs_f64())
    }
}
