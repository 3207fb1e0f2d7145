//! Continuous motor and reachability margins and their sign discretization.

use serde::{Deserialize, Serialize};

use super::state::{MotorMargin, ReachMargin};
use crate::error::{CmaError, Result};

/// Motor prognosis: flight time and per-fault-type remaining useful life.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorPrognosis {
    pub t_flight_time: f64,
    pub t_rul: Vec<f64>,
    pub fault_weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryPrognosis {
    pub t_flight_time: f64,
    pub t_eod: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CmaError::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl MotorPrognosis {
    pub fn validate(&self) -> Result<()> {
        check_positive("t_flight_time", self.t_flight_time)?;
        if self.t_rul.is_empty() || self.t_rul.len() != self.fault_weights.len() {
            return Err(CmaError::Domain(format!(
                "t_rul ({}) and fault_weights ({}) must be non-empty and equally long",
                self.t_rul.len(),
                self.fault_weights.len()
            )));
        }
        for &t in &self.t_rul {
            check_positive("t_rul", t)?;
        }
        let total: f64 = self.fault_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.fault_weights.iter().any(|w| *w < 0.0) {
            return Err(CmaError::Domain(format!(
                "fault_weights must be nonnegative and sum to 1, sum = {total}"
            )));
        }
        Ok(())
    }
}

/// `1 - Σ w_i · t_flight / t_rul_i`. Negative when the motor is not expected
/// to last the remaining flight.
pub fn motor_margin(prog: &MotorPrognosis) -> Result<f64> {
    prog.validate()?;
    let consumed: f64 = prog
        .t_rul
        .iter()
        .zip(&prog.fault_weights)
        .map(|(rul, w)| w * prog.t_flight_time / rul)
        .sum();
    Ok(1.0 - consumed)
}

/// `1 - t_flight / t_eod`.
pub fn reachability_margin(prog: &BatteryPrognosis) -> Result<f64> {
    check_positive("t_flight_time", prog.t_flight_time)?;
    check_positive("t_eod", prog.t_eod)?;
    Ok(1.0 - prog.t_flight_time / prog.t_eod)
}

/// Zero belongs to the nonnegative bin.
pub fn discretize_margins(mm: f64, rm: f64) -> (MotorMargin, ReachMargin) {
    let mm = if mm < 0.0 { MotorMargin::Negative } else { MotorMargin::NonNegative };
    let rm = if rm < 0.0 { ReachMargin::Negative } else { ReachMargin::NonNegative };
    (mm, rm)
}
