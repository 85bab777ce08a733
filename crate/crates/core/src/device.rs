//! Two-state hysteretic resistor.
//!
//! The device is metallic (low resistance) or insulating (high resistance) and
//! switches on the voltage across its own terminals: insulating -> metallic once
//! the terminal voltage rises to `v_high`, metallic -> insulating once it falls
//! to `v_low` (both inclusive). Between the thresholds the state is memory: the
//! open interval `(v_low, v_high)` is the hysteresis window.
//!
//! Resistances and voltages are normalized (R0, V0). `r_high` may be
//! `f64::INFINITY` to model a perfectly blocking insulating state; its
//! conductance is then exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Conduction state of a hysteretic device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceState {
    Insulating,
    Metallic,
}

impl DeviceState {
    /// Stable numeric encoding used in CSV output: insulating = 0, metallic = 1.
    pub fn code(self) -> u8 {
        match self {
            DeviceState::Insulating => 0,
            DeviceState::Metallic => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DeviceState::Insulating),
            1 => Some(DeviceState::Metallic),
            _ => None,
        }
    }
}

/// Static parameters of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Insulating-state resistance [R0]; may be infinite.
    pub r_high: f64,
    /// Metallic-state resistance [R0].
    pub r_low: f64,
    /// Metallic -> insulating threshold [V0].
    pub v_low: f64,
    /// Insulating -> metallic threshold [V0].
    pub v_high: f64,
}

impl Default for DeviceParams {
    /// 1T-TaS2-like values: R_H = 2.73 R0, R_L = 0.67 R0, thresholds 1 and 2 V0.
    fn default() -> Self {
        DeviceParams {
            r_high: 2.73,
            r_low: 0.67,
            v_low: 1.0,
            v_high: 2.0,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.r_low > 0.0 && self.r_low.is_finite()) {
            return Err(Error::validation("device.r_low must be finite and > 0"));
        }
        if !(self.r_high > self.r_low) {
            return Err(Error::validation("device.r_high must exceed r_low"));
        }
        if self.r_high.is_nan() {
            return Err(Error::validation("device.r_high must not be NaN"));
        }
        if !(self.v_low.is_finite() && self.v_high.is_finite()) {
            return Err(Error::validation("device thresholds must be finite"));
        }
        if !(self.v_low < self.v_high) {
            return Err(Error::validation("device.v_low must be below v_high"));
        }
        Ok(())
    }

    /// Conductance in the given state [1/R0]; exactly 0 for an infinite r_high.
    pub fn conductance(&self, state: DeviceState) -> f64 {
        match state {
            DeviceState::Metallic => 1.0 / self.r_low,
            DeviceState::Insulating => {
                if self.r_high.is_infinite() {
                    0.0
                } else {
                    1.0 / self.r_high
                }
            }
        }
    }

    /// Next state after the terminal voltage `v` is applied in `state`.
    /// Thresholds are inclusive; inside the window the state is unchanged.
    pub fn transition(&self, state: DeviceState, v: f64) -> DeviceState {
        match state {
            DeviceState::Insulating if v >= self.v_high => DeviceState::Metallic,
            DeviceState::Metallic if v <= self.v_low => DeviceState::Insulating,
            _ => state,
        }
    }

    /// Ohmic terminal current at voltage `v` in `state` [V0/R0].
    pub fn current(&self, state: DeviceState, v: f64) -> f64 {
        v * self.conductance(state)
    }
}
