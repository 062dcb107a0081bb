use std::time::Instant;

use crate::config::ClockMode;

/// Charges time to episode phases: measured seconds, or a fixed simulated
/// cost per action so logs are reproducible.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    pub mode: ClockMode,
}

impl Clock {
    pub fn new(mode: ClockMode) -> Self {
        Clock { mode }
    }

    /// Runs `f` and returns its value with the seconds to charge.
    pub fn measure<T>(&self, virtual_s: f64, f: impl FnOnce() -> T) -> (T, f64) {
        let start = Instant::now();
        let v = f();
        (v, self.charge(virtual_s, start))
    }

    /// Like [`Clock::measure`], but `f` may report its own duration (a
    /// backend's latency), which the virtual clock prefers.
    pub fn measure_reported<T>(
        &self,
        virtual_s: f64,
        f: impl FnOnce() -> (T, Option<f64>),
    ) -> (T, f64) {
        let start = Instant::now();
        let (v, reported) = f();
        let secs = match self.mode {
            ClockMode::Virtual => reported.unwrap_or(virtual_s),
            ClockMode::Wall => start.elapsed().as_secs_f64(),
        };
        (v, secs)
    }

    fn charge(&self, virtual_s: f64, start: Instant) -> f64 {
        match self.mode {
            ClockMode::Virtual => virtual_s,
            ClockMode::Wall => start.elapsed().as_secs_f64(),
        }
    }
}
