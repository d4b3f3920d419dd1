//! Minute-resolution time axis shared by telemetry, windows, and alarms.
//!
//! Timestamps are whole minutes since a fixed epoch and durations are whole
//! minutes. Sub-minute precision is deliberately unsupported: resampling
//! bins, window arithmetic, and fault scripts all work on minute boundaries,
//! and integer arithmetic keeps window enumeration exact.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

pub const MINUTES_PER_HOUR: i64 = 60;
pub const MINUTES_PER_DAY: i64 = 24 * MINUTES_PER_HOUR;

/// A point on the shared time axis, in whole minutes since the epoch.
///
/// The epoch is arbitrary but fixed per dataset; only differences matter.
/// Timestamps are never negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(i64);

impl Timestamp {
    /// Wraps a minute count. Panics if `minutes` is negative.
    pub fn from_minutes(minutes: i64) -> Self {
        assert!(minutes >= 0, "timestamp must be non-negative, got {minutes}");
        Timestamp(minutes)
    }

    pub fn minutes(self) -> i64 {
        self.0
    }

    /// Largest multiple of `grid` that is `<= self`.
    pub fn align_down(self, grid: Duration) -> Self {
        Timestamp(self.0 - self.0.rem_euclid(grid.minutes()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}m", self.0)
    }
}

/// A signed span of whole minutes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(i64);

impl Duration {
    pub const fn minutes(self) -> i64 {
        self.0
    }

    pub const fn from_minutes(minutes: i64) -> Self {
        Duration(minutes)
    }

    pub const fn from_hours(hours: i64) -> Self {
        Duration(hours * MINUTES_PER_HOUR)
    }

    pub const fn from_days(days: i64) -> Self {
        Duration(days * MINUTES_PER_DAY)
    }

    pub const fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}m", self.0)
    }
}

impl Add<Duration> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Duration) -> Timestamp {
        Timestamp::from_minutes(self.0 + rhs.0)
    }
}

impl AddAssign<Duration> for Timestamp {
    fn add_assign(&mut self, rhs: Duration) {
        *self = *self + rhs;
    }
}

impl Sub<Duration> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: Duration) -> Timestamp {
        Timestamp::from_minutes(self.0 - rhs.0)
    }
}

impl Sub<Timestamp> for Timestamp {
    type Output = Duration;
    fn sub(self, rhs: Timestamp) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl Add<Duration> for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

impl Sub<Duration> for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

/// Half-open interval `[start, end)` on the time axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeRange {
    /// Panics if `end < start`.
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        assert!(
            end >= start,
            "time range end {end} precedes start {start}"
        );
        TimeRange { start, end }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    pub fn duration(&self) -> Duration {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for TimeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}
