//! Per-kernel wall-clock accounting.
//!
//! Tags mirror the hot-spot categories of the benchmark profiles. Scopes are
//! non-overlapping leaves; anything untagged lands in `Other` when a report
//! is assembled. Timers can be disabled to remove measurement overhead.

use serde::Serialize;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum KernelTag {
    DistTable,
    J1,
    J2,
    BsplineV,
    BsplineVgh,
    SpoVgl,
    DetUpdate,
    Nlpp,
    Other,
}

pub const ALL_TAGS: [KernelTag; 9] = [
    KernelTag::DistTable,
    KernelTag::J1,
    KernelTag::J2,
    KernelTag::BsplineV,
    KernelTag::BsplineVgh,
    KernelTag::SpoVgl,
    KernelTag::DetUpdate,
    KernelTag::Nlpp,
    KernelTag::Other,
];

impl KernelTag {
    pub fn label(self) -> &'static str {
        match self {
            KernelTag::DistTable => "DistTable",
            KernelTag::J1 => "J1",
            KernelTag::J2 => "J2",
            KernelTag::BsplineV => "Bspline-v",
            KernelTag::BsplineVgh => "Bspline-vgh",
            KernelTag::SpoVgl => "SPO-vgl",
            KernelTag::DetUpdate => "DetUpdate",
            KernelTag::Nlpp => "NLPP",
            KernelTag::Other => "Other",
        }
    }

    fn index(self) -> usize {
        match self {
            KernelTag::DistTable => 0,
            KernelTag::J1 => 1,
            KernelTag::J2 => 2,
            KernelTag::BsplineV => 3,
            KernelTag::BsplineVgh => 4,
            KernelTag::SpoVgl => 5,
            KernelTag::DetUpdate => 6,
            KernelTag::Nlpp => 7,
            KernelTag::Other => 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelTimers {
    enabled: bool,
    acc: [Duration; 9],
}

impl Default for KernelTimers {
    fn default() -> Self {
        Self::new(true)
    }
}

impl KernelTimers {
    pub fn new(enabled: bool) -> Self {
        Self { enabled, acc: [Duration::ZERO; 9] }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// Run `f` inside a scope accounted to `tag`.
    #[inline]
    pub fn time<R>(&mut self, tag: KernelTag, f: impl FnOnce() -> R) -> R {
        if !self.enabled {
            return f();
        }
        let start = Instant::now();
        let out = f();
        self.acc[tag.index()] += start.elapsed();
        out
    }

    pub fn add(&mut self, tag: KernelTag, dur: Duration) {
        self.acc[tag.index()] += dur;
    }

    pub fn merge(&mut self, other: &KernelTimers) {
        for i in 0..self.acc.len() {
            self.acc[i] += other.acc[i];
        }
    }

    pub fn seconds(&self, tag: KernelTag) -> f64 {
        self.acc[tag.index()].as_secs_f64()
    }

    /// Sum over all tags except `Other`.
    pub fn tagged_total(&self) -> f64 {
        ALL_TAGS
            .iter()
            .filter(|&&t| t != KernelTag::Other)
            .map(|&t| self.seconds(t))
            .sum()
    }

    /// Fold untagged time into `Other` given the enclosing wall time.
    pub fn set_other_from_total(&mut self, total_seconds: f64) {
        let rest = self.tagged_total();
        let other = (total_seconds - rest).max(0.0);
        self.acc[KernelTag::Other.index()] = Duration::from_secs_f64(other);
    }
}
