//! One-cycle learning-rate schedule with cosine phases: rise from
//! `max_lr / div_factor` to `max_lr` over the first `pct_start` of the
//! run, then anneal down to `max_lr / final_div_factor`.

use crate::error::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneCycle {
    pub max_lr: f64,
    pub total_steps: usize,
    pub pct_start: f64,
    pub div_factor: f64,
    pub final_div_factor: f64,
}

impl OneCycle {
    pub fn new(max_lr: f64, total_steps: usize) -> Result<OneCycle> {
        OneCycle::with_shape(max_lr, total_steps, 0.3, 25.0, 1e4)
    }

    pub fn with_shape(
        max_lr: f64,
        total_steps: usize,
        pct_start: f64,
        div_factor: f64,
        final_div_factor: f64,
    ) -> Result<OneCycle> {
        if max_lr <= 0.0 || div_factor <= 1.0 || final_div_factor <= 1.0 {
            return Err(TrainError::Config(format!(
                "one-cycle needs max_lr > 0 and div factors > 1 \
                 (got max_lr={max_lr}, div={div_factor}, final_div={final_div_factor})"
            )));
        }
        if !(0.0..1.0).contains(&pct_start) || pct_start == 0.0 {
            return Err(TrainError::Config(format!(
                "pct_start must lie strictly inside (0, 1), got {pct_start}"
            )));
        }
        if total_steps == 0 {
            return Err(TrainError::Config("total_steps must be >= 1".into()));
        }
        Ok(OneCycle {
            max_lr,
            total_steps,
            pct_start,
            div_factor,
            final_div_factor,
        })
    }

    /// Cosine interpolation from `a` (f=0) to `b` (f=1), exact at the
    /// endpoints.
    fn cos_interp(a: f64, b: f64, f: f64) -> f64 {
        if f <= 0.0 {
            return a;
        }
        if f >= 1.0 {
            return b;
        }
        b + (a - b) * (1.0 + (std::f64::consts::PI * f).cos()) / 2.0
    }

    /// Learning rate at a (0-based) optimizer step. Steps past the end
    /// hold the final value.
    pub fn lr(&self, step: usize) -> f64 {
        let total = self.total_steps as f64;
        let boundary = self.pct_start * total;
        let s = (step as f64).min(total);
        let initial = self.max_lr / self.div_factor;
        let last = self.max_lr / self.final_div_factor;
        if s <= boundary {
            Self::cos_interp(initial, self.max_lr, s / boundary)
        } else {
            Self::cos_interp(self.max_lr, last, (s - boundary) / (total - boundary))
        }
    }
}
