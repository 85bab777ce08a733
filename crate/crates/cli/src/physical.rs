//! Physical-unit calibration: pick the real capacitance that makes the
//! normalized oscillator run at a measured frequency.

use oscnet_core::cell::DdConfig;
use oscnet_core::Error;

/// Result of matching the normalized cell to a physical frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Capacitance unit in farads that realizes the target frequency.
    pub c_phys_farads: f64,
    /// Closed-form cycle period of the configured cell [t0].
    pub period_normalized: f64,
    /// Physical period implied by the calibration; equals 1/frequency.
    pub period_seconds: f64,
    pub frequency_hz: f64,
    pub r0_ohms: f64,
}

/// Solves f = 1 / (P_n · R0 · C) for C. The configured cell must
/// self-oscillate, since P_n comes from its closed-form cycle.
pub fn calibrate(r0_ohms: f64, frequency_hz: f64, cell: &DdConfig) -> Result<Calibration, Error> {
    if !(r0_ohms.is_finite() && r0_ohms > 0.0) {
        return Err(Error::validation("r0_ohms must be finite and > 0"));
    }
    if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
        return Err(Error::validation("frequency must be finite and > 0"));
    }
    let period_normalized = cell.analytic_period()?.period();
    let c_phys_farads = 1.0 / (frequency_hz * period_normalized * r0_ohms);
    Ok(Calibration {
        c_phys_farads,
        period_normalized,
        period_seconds: period_normalized * r0_ohms * c_phys_farads,
        frequency_hz,
        r0_ohms,
    })
}
