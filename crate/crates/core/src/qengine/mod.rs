//! Integer-only inference, activation memory planning and budget checks.

mod engine;
mod plan;

pub use engine::{qforward, qforward_tensor, Engine, QOutput};
pub use plan::{
    check_budget, plan_memory, plan_memory_float, Budget, BudgetReport, BufferPlan, Margins,
    MemoryPlan, DEFAULT_FLASH_BUDGET, DEFAULT_RAM_BUDGET, RAM_NOTE,
};

use crate::error::{Error, Result};

/// Maps an int32 accumulator at scale `s_in·s_w` onto an int8 boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequantParams {
    /// `s_in · s_w / s_out`.
    pub multiplier: f64,
    pub zero_point: i32,
}

impl RequantParams {
    pub fn new(multiplier: f64, zero_point: i32) -> Result<Self> {
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "requantization multiplier must be positive, got {multiplier}"
            )));
        }
        Ok(Self {
            multiplier,
            zero_point,
        })
    }
}

/// `clamp(round_half_even(acc · M) + zp, −128, 127)`.
#[inline]
pub fn requantize(acc: i32, p: RequantParams) -> i8 {
    ((acc as f64 * p.multiplier).round_ties_even() + p.zero_point as f64).clamp(-128.0, 127.0) as i8
}
