//! Phase extraction and collective-behavior metrics.
//!
//! Phase is defined by switching events, not by waveform interpolation: a
//! cycle onset is the insulating-to-metallic toggle of the bottom device (the
//! discharge-to-charge handover), and the instantaneous phase grows linearly
//! from 0 to 2*pi between consecutive onsets. Within-cycle nonuniformity
//! (charge and discharge segments differ in general) is accepted; lock
//! metrics always compare like-for-like events.
//!
//! Two phase views are provided. [`PhaseSeries`] interpolates between known
//! onsets and is exact for post-hoc analysis inside the recorded window.
//! [`CausalPhase`] extrapolates from the last two onsets and is what in-run
//! drivers (condition triggers, the life layer) use, since the next onset is
//! not known yet at decision time.

use std::f64::consts::PI;

use crate::cell::{CellTrace, DeviceSlot};
use crate::device::DeviceState;
use crate::error::Error;
use crate::lattice::Lattice;
use crate::netsim::NetEvent;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Anti-phase classification: the wrapped difference lies in the half-circle
/// around pi, i.e. `cos(dphi) < 0`.
pub fn is_anti_phase(phi: f64, phi_ref: f64) -> bool {
    (phi - phi_ref).cos() < 0.0
}

/// Onset times of one cell with interpolated phase in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    onsets: Vec<f64>,
}

impl PhaseSeries {
    pub fn new(onsets: Vec<f64>) -> Result<Self, Error> {
        if onsets.len() < 2 {
            return Err(Error::validation(
                "phase extraction needs at least two cycle onsets",
            ));
        }
        if onsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("onset times must be strictly increasing"));
        }
        Ok(PhaseSeries { onsets })
    }

    /// Onsets of `cell` in a network event log.
    pub fn from_events(events: &[NetEvent], cell: u32) -> Result<Self, Error> {
        Self::new(onset_times(events, cell))
    }

    /// Onsets recorded in a single-cell trace.
    pub fn from_cell_trace(trace: &CellTrace) -> Result<Self, Error> {
        Self::new(trace.onsets())
    }

    pub fn onsets(&self) -> &[f64] {
        &self.onsets
    }

    /// Instantaneous phase in `[0, 2*pi)`; `None` outside the covered window
    /// `[first onset, last onset)`.
    pub fn phase_at(&self, t: f64) -> Option<f64> {
        let k = match self
            .onsets
            .binary_search_by(|o| o.partial_cmp(&t).expect("finite onset times"))
        {
            Ok(k) => k,
            Err(0) => return None,
            Err(k) => k - 1,
        };
        if k + 1 >= self.onsets.len() {
            return None;
        }
        let (a, b) = (self.onsets[k], self.onsets[k + 1]);
        Some(2.0 * PI * (t - a) / (b - a))
    }

    /// Mean onset spacing, skipping the first `skip` intervals.
    pub fn mean_period(&self, skip: usize) -> Option<f64> {
        if self.onsets.len() < skip + 2 {
            return None;
        }
        let first = self.onsets[skip];
        let last = *self.onsets.last().unwrap();
        Some((last - first) / (self.onsets.len() - 1 - skip) as f64)
    }
}

/// Onset times (bottom-device insulating-to-metallic toggles) of one cell.
pub fn onset_times(events: &[NetEvent], cell: u32) -> Vec<f64> {
    events
        .iter()
        .filter(|e| e.cell == cell && e.slot == DeviceSlot::Bottom && e.to == DeviceState::Metallic)
        .map(|e| e.t)
        .collect()
}

/// Wrapped phase difference `a - b` at time `t`.
pub fn phase_difference(a: &PhaseSeries, b: &PhaseSeries, t: f64) -> Result<f64, Error> {
    match (a.phase_at(t), b.phase_at(t)) {
        (Some(pa), Some(pb)) => Ok(wrap_angle(pa - pb)),
        _ => Err(Error::validation(format!(
            "phase undefined at t = {t}: outside an onset window"
        ))),
    }
}

/// Kuramoto coherence: magnitude of the mean unit phasor.
pub fn order_parameter(phases: &[f64]) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let (mut s, mut c) = (0.0, 0.0);
    for &p in phases {
        s += p.sin();
        c += p.cos();
    }
    (s * s + c * c).sqrt() / phases.len() as f64
}

/// Circular mean angle of the given phases, in `(-pi, pi]`.
pub fn mean_phase(phases: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &p in phases {
        s += p.sin();
        c += p.cos();
    }
    s.atan2(c)
}

/// Streaming per-cell phase estimator fed by step events. The phase at `t`
/// extrapolates the last observed cycle: `2*pi * (t - last) / (last - prev)`,
/// reduced mod 2*pi.
#[derive(Debug, Clone)]
pub struct CausalPhase {
    last: Vec<f64>,
    prev: Vec<f64>,
    count: Vec<u32>,
}

impl CausalPhase {
    pub fn new(n_cells: usize) -> Self {
        CausalPhase {
            last: vec![0.0; n_cells],
            prev: vec![0.0; n_cells],
            count: vec![0; n_cells],
        }
    }

    pub fn absorb(&mut self, events: &[NetEvent]) {
        for e in events {
            if e.slot == DeviceSlot::Bottom && e.to == DeviceState::Metallic {
                let i = e.cell as usize;
                self.prev[i] = self.last[i];
                self.last[i] = e.t;
                self.count[i] += 1;
            }
        }
    }

    /// Number of completed onsets seen for a cell.
    pub fn onset_count(&self, cell: usize) -> u32 {
        self.count[cell]
    }

    /// Extrapolated phase in `[0, 2*pi)`; `None` before the second onset.
    pub fn phase_at(&self, cell: usize, t: f64) -> Option<f64> {
        if self.count[cell] < 2 {
            return None;
        }
        let period = self.last[cell] - self.prev[cell];
        Some((2.0 * PI * (t - self.last[cell]) / period).rem_euclid(2.0 * PI))
    }

    /// All-cell phases at `t`; `None` if any cell is still undefined.
    pub fn phases_at(&self, t: f64) -> Option<Vec<f64>> {
        (0..self.last.len()).map(|i| self.phase_at(i, t)).collect()
    }
}

/// Target relation for lock detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockTarget {
    InPhase,
    AntiPhase,
}

/// Number of full reference-cell cycles until the pair relation holds within
/// `tol` and keeps holding for 3 consecutive reference cycles; `None` when
/// the run ends first.
pub fn sync_time(
    events: &[NetEvent],
    reference: u32,
    other: u32,
    target: LockTarget,
    tol: f64,
) -> Result<Option<usize>, Error> {
    let ref_series = PhaseSeries::from_events(events, reference)?;
    let other_series = PhaseSeries::from_events(events, other)?;
    let checks: Vec<bool> = ref_series
        .onsets()
        .iter()
        .map(|&t| {
            phase_difference(&other_series, &ref_series, t)
                .map(|d| {
                    let err = match target {
                        LockTarget::InPhase => wrap_angle(d).abs(),
                        LockTarget::AntiPhase => wrap_angle(d - PI).abs(),
                    };
                    err <= tol
                })
                .unwrap_or(false)
        })
        .collect();
    for k in 0..checks.len() {
        if k + 2 < checks.len() && checks[k] && checks[k + 1] && checks[k + 2] {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Time-averaged supply-side current of one cell over the whole onsets window
/// (an integer number of periods by construction). Integrand:
/// `(v_dd - v) * g_top(state)`, integrated by trapezoid on the samples with
/// the window and every state toggle split at its exact time.
pub fn supply_current<G>(trace: &CellTrace, v_dd: f64, g_top: G) -> Result<f64, Error>
where
    G: Fn(DeviceState) -> f64,
{
    let onsets = trace.onsets();
    if onsets.len() < 2 {
        return Err(Error::validation(
            "supply-current averaging needs at least one full period",
        ));
    }
    let (w_lo, w_hi) = (onsets[0], *onsets.last().unwrap());

    // value of v at an arbitrary time by linear interpolation of the samples
    let v_at = |t: f64| -> f64 {
        let k = ((t / trace.dt).floor() as usize).min(trace.times.len() - 2);
        let (t0, t1) = (trace.times[k], trace.times[k + 1]);
        let a = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        trace.v[k] * (1.0 - a) + trace.v[k + 1] * a
    };

    // breakpoints: window ends, sample times inside, top-device toggles inside
    let mut points: Vec<(f64, Option<DeviceState>)> = vec![(w_lo, None), (w_hi, None)];
    for &t in &trace.times {
        if t > w_lo && t < w_hi {
            points.push((t, None));
        }
    }
    for e in &trace.events {
        if e.slot == DeviceSlot::Top && e.t > w_lo && e.t < w_hi {
            points.push((e.t, Some(e.to)));
        }
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));

    // top-device state entering the window
    let mut state = *trace
        .top
        .first()
        .ok_or_else(|| Error::validation("empty trace"))?;
    for e in &trace.events {
        if e.slot == DeviceSlot::Top && e.t <= w_lo {
            state = e.to;
        }
    }

    let mut integral = 0.0;
    for w in points.windows(2) {
        let (t0, _) = w[0];
        let (t1, toggle) = w[1];
        if t1 > t0 {
            // state is constant on (t0, t1); integrand linear in v
            let i0 = (v_dd - v_at(t0)) * g_top(state);
            let i1 = (v_dd - v_at(t1)) * g_top(state);
            integral += 0.5 * (i0 + i1) * (t1 - t0);
        }
        if let Some(s) = toggle {
            state = s;
        }
    }
    Ok(integral / (w_hi - w_lo))
}

/// Net winding number of a phase map along a closed loop of adjacent cells:
/// the sum of wrapped successive differences divided by 2*pi.
pub fn phase_winding(lattice: &Lattice, phases: &[f64], cell_loop: &[usize]) -> Result<i64, Error> {
    if cell_loop.len() < 3 {
        return Err(Error::validation("winding loop needs at least 3 cells"));
    }
    if phases.len() != lattice.n() {
        return Err(Error::validation("phase map size does not match the grid"));
    }
    let m = cell_loop.len();
    let mut total = 0.0;
    for k in 0..m {
        let (i, j) = (cell_loop[k], cell_loop[(k + 1) % m]);
        if i >= lattice.n() || j >= lattice.n() {
            return Err(Error::validation("winding loop cell out of range"));
        }
        if lattice.edge_between(i, j).is_none() {
            return Err(Error::validation(format!(
                "winding loop cells {i} and {j} are not adjacent"
            )));
        }
        total += wrap_angle(phases[j] - phases[i]);
    }
    Ok((total / (2.0 * PI)).round() as i64)
}
