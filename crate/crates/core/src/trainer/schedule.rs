use crate::error::{FpmdError, Result};

/// Exploration noise scale decaying linearly from `start` to `end` over
/// `horizon` iterations, then held at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    start: f64,
    end: f64,
    horizon: u64,
}

impl NoiseSchedule {
    pub fn new(start: f64, end: f64, horizon: u64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end < 0.0 || start < end {
            return Err(FpmdError::InvalidArgument(format!(
                "noise schedule needs start >= end >= 0, got {start} -> {end}"
            )));
        }
        Ok(NoiseSchedule { start, end, horizon })
    }

    pub fn sigma(&self, iter: u64) -> f64 {
        if iter >= self.horizon {
            return self.end;
        }
        let frac = iter as f64 / self.horizon as f64;
        self.start + (self.end - self.start) * frac
    }
}
