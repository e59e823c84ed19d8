//! Stamp sources for generated ECL messages.

use chrono::{Local, NaiveDateTime};

/// Produces `<stamp>` text in the `D/M/YYYY hh:mm:ss(AM|PM)` layout.
pub trait Clock: Send + Sync {
    fn stamp(&self) -> String;
}

pub fn format_stamp(at: NaiveDateTime) -> String {
    at.format("%-d/%-m/%Y %I:%M:%S%p").to_string()
}

/// Wall-clock local time.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn stamp(&self) -> String {
        format_stamp(Local::now().naive_local())
    }
}

/// Always returns the same stamp.
#[derive(Debug, Clone)]
pub struct FixedClock(pub String);

impl Clock for FixedClock {
    fn stamp(&self) -> String {
        self.0.clone()
    }
}
