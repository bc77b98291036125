use std::fmt;
use std::ops::{Add, Sub};

/// Simulated time in microseconds since the start of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

pub const MICROS_PER_MS: u64 = 1_000;
pub const MICROS_PER_SEC: u64 = 1_000_000;
pub const MICROS_PER_MIN: u64 = 60 * MICROS_PER_SEC;

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_millis(ms: u64) -> SimTime {
        SimTime(ms * MICROS_PER_MS)
    }

    pub fn from_secs(s: u64) -> SimTime {
        SimTime(s * MICROS_PER_SEC)
    }

    pub fn from_minutes(m: u64) -> SimTime {
        SimTime(m * MICROS_PER_MIN)
    }

    /// Rounds to the nearest microsecond.
    pub fn from_minutes_f64(m: f64) -> SimTime {
        SimTime((m * MICROS_PER_MIN as f64).round() as u64)
    }

    pub fn as_minutes(self) -> f64 {
        self.0 as f64 / MICROS_PER_MIN as f64
    }

    pub fn micros(self) -> u64 {
        self.0
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for SimTime {
    /// Minutes, shortest decimal form (`120`, `12.5`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_minutes())
    }
}
