//! Single relaxation-oscillator cells built from hysteretic devices.
//!
//! Two circuit families are supported, both biased from `v_dd` with the cell
//! capacitance `cap` hanging on the output node `v`:
//!
//! * device-resistor (D-R): hysteretic device between `v_dd` and the node,
//!   series resistor `r_series` from the node to ground;
//! * device-device (D-D): two hysteretic devices in series, device 1 on top
//!   (sees `v_dd - v`), device 2 on the bottom (sees `v`).
//!
//! Within a fixed pair of device states the node obeys a linear ODE
//! `cap * dv/dt = (v_dd - v) * g_top - v * g_bot`, so every branch relaxes
//! exponentially toward `v* = v_dd * g_top / (g_top + g_bot)`. A cycle happens
//! when each branch's equilibrium lies beyond the voltage at which the devices
//! switch, so the trajectory keeps exiting one branch into the other.
//!
//! Two right-hand-side models are provided. `Exact` keeps every conductance.
//! `Ideal` drops the insulating-side leak on the cycle branches
//! (charging: `cap v' = (v_dd - v) g_top_metallic - v g_series`; discharging
//! D-R: `cap v' = -v g_series`; D-D charging: `cap v' = (v_dd - v) g_1,metallic`;
//! D-D discharging: `cap v' = -v g_2,metallic`); same-state D-D combinations,
//! reached only in transients, keep the exact form. The two models agree
//! exactly when the insulating resistance is infinite.
//!
//! The simulator advances the closed-form branch solution and locates every
//! threshold crossing by bisection on that solution, toggling the device(s)
//! at the crossing and resuming, so measured periods are limited by the
//! crossing tolerance rather than the sample spacing.

use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, DeviceState};
use crate::error::Error;

/// Bisection tolerance for threshold-crossing times [t0].
pub const CROSSING_TOL: f64 = 1e-10;
/// Crossings closer together than this are treated as simultaneous [t0].
const GROUP_TOL: f64 = 2.0 * CROSSING_TOL;
/// Hard cap on state toggles inside one sample step; exceeding it means the
/// configuration chatters instead of oscillating.
const MAX_EVENTS_PER_STEP: usize = 64;

/// Which right-hand side the integrator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RhsModel {
    /// Piecewise branch forms with the insulating-side leak dropped.
    Ideal,
    /// All conductances kept on every branch.
    #[default]
    Exact,
}

/// Position of a device inside a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceSlot {
    /// Connected between `v_dd` and the node; sees `v_dd - v`.
    Top,
    /// Connected between the node and ground; sees `v`.
    Bottom,
}

/// One recorded state toggle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEvent {
    pub t: f64,
    pub slot: DeviceSlot,
    pub to: DeviceState,
}

/// Device-resistor oscillator configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrConfig {
    pub device: DeviceParams,
    /// Series resistance to ground [R0].
    pub r_series: f64,
    /// Supply voltage [V0].
    pub v_dd: f64,
    /// Cell capacitance [C0].
    pub cap: f64,
    pub rhs_model: RhsModel,
}

impl Default for DrConfig {
    /// Stated parameters (r_series = 1 R0). This configuration is trapped on
    /// the metallic branch and does not self-oscillate; see [`DrConfig::demo`].
    fn default() -> Self {
        DrConfig {
            device: DeviceParams::default(),
            r_series: 1.0,
            v_dd: 3.0,
            cap: 1.0,
            rhs_model: RhsModel::Ideal,
        }
    }
}

impl DrConfig {
    /// Oscillating demo: r_series raised to 2 R0 so the metallic-branch
    /// equilibrium clears the switching level. Uses the piecewise model; with
    /// the exact model the insulating leak re-traps the discharge branch.
    pub fn demo() -> Self {
        DrConfig {
            r_series: 2.0,
            ..DrConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.device.validate()?;
        if !(self.r_series > 0.0 && self.r_series.is_finite()) {
            return Err(Error::validation("cell.r_series must be finite and > 0"));
        }
        validate_common(self.v_dd, self.cap)
    }

    fn view(&self) -> CircuitView<'_> {
        CircuitView {
            v_dd: self.v_dd,
            cap: self.cap,
            model: self.rhs_model,
            top: &self.device,
            bottom: BottomElement::Resistor(1.0 / self.r_series),
        }
    }

    /// dv/dt at node voltage `v` with the device in `state`.
    pub fn rhs(&self, v: f64, state: DeviceState) -> f64 {
        let b = self.view().branch(state, None);
        b.derivative(v)
    }

    /// Per-branch equilibria of the cycle branches.
    pub fn fixed_points(&self) -> Vec<FixedPoint> {
        cycle(&self.view()).fixed_points()
    }

    /// Checks whether each cycle branch exits through its switching level.
    pub fn oscillation_report(&self) -> OscillationReport {
        cycle(&self.view()).report()
    }

    /// Closed-form charge/discharge durations; errors on trapped configs.
    pub fn analytic_period(&self) -> Result<CyclePeriods, Error> {
        cycle(&self.view()).analytic_period()
    }

    /// On-cycle state a fraction `frac` in [0,1) past the charge onset.
    pub fn cycle_state(&self, frac: f64) -> Result<(f64, DeviceState), Error> {
        let (v, top, _) = cycle(&self.view()).state_at_fraction(frac)?;
        Ok((v, top))
    }

    /// Default device state consistent with node voltage `v`: outside the
    /// hysteresis window the forced state, inside it the charging phase.
    pub fn consistent_state(&self, v: f64) -> DeviceState {
        let u = self.v_dd - v;
        if u >= self.device.v_high {
            DeviceState::Metallic
        } else if u <= self.device.v_low {
            DeviceState::Insulating
        } else {
            DeviceState::Metallic
        }
    }

    /// Conductance of the supply-side element in the given state [1/R0].
    pub fn supply_conductance(&self, state: DeviceState) -> f64 {
        self.device.conductance(state)
    }

    /// Integrates from `(v0, state)` (state defaulted if `None`) for
    /// `duration`, sampling every `dt`.
    pub fn simulate(
        &self,
        v0: f64,
        state: Option<DeviceState>,
        dt: f64,
        duration: f64,
    ) -> Result<CellTrace, Error> {
        self.validate()?;
        let s = state.unwrap_or_else(|| self.consistent_state(v0));
        simulate(&self.view(), v0, s, None, dt, duration)
    }
}

/// Device-device oscillator configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdConfig {
    /// Top device, between `v_dd` and the node.
    pub device1: DeviceParams,
    /// Bottom device, between the node and ground.
    pub device2: DeviceParams,
    pub v_dd: f64,
    pub cap: f64,
    pub rhs_model: RhsModel,
}

impl Default for DdConfig {
    fn default() -> Self {
        DdConfig {
            device1: DeviceParams::default(),
            device2: DeviceParams::default(),
            v_dd: 3.0,
            cap: 1.0,
            rhs_model: RhsModel::Exact,
        }
    }
}

impl DdConfig {
    pub fn ideal() -> Self {
        DdConfig {
            rhs_model: RhsModel::Ideal,
            ..DdConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.device1.validate()?;
        self.device2.validate()?;
        validate_common(self.v_dd, self.cap)
    }

    fn view(&self) -> CircuitView<'_> {
        CircuitView {
            v_dd: self.v_dd,
            cap: self.cap,
            model: self.rhs_model,
            top: &self.device1,
            bottom: BottomElement::Device(&self.device2),
        }
    }

    /// dv/dt at node voltage `v` with devices in `(s1, s2)`.
    pub fn rhs(&self, v: f64, s1: DeviceState, s2: DeviceState) -> f64 {
        self.view().branch(s1, Some(s2)).derivative(v)
    }

    /// Net current the device stack injects into the node (cap * dv/dt).
    pub fn branch_current(&self, v: f64, s1: DeviceState, s2: DeviceState) -> f64 {
        let b = self.view().branch(s1, Some(s2));
        (self.v_dd - v) * b.g_top - v * b.g_bot
    }

    pub fn fixed_points(&self) -> Vec<FixedPoint> {
        cycle(&self.view()).fixed_points()
    }

    pub fn oscillation_report(&self) -> OscillationReport {
        cycle(&self.view()).report()
    }

    pub fn analytic_period(&self) -> Result<CyclePeriods, Error> {
        cycle(&self.view()).analytic_period()
    }

    /// On-cycle state a fraction `frac` in [0,1) past the charge onset.
    pub fn cycle_state(&self, frac: f64) -> Result<(f64, DeviceState, DeviceState), Error> {
        let (v, top, bottom) = cycle(&self.view()).state_at_fraction(frac)?;
        Ok((v, top, bottom.expect("d-d cell has a bottom device")))
    }

    /// Default device states consistent with node voltage `v`; inside the
    /// hysteresis window the charging pair (metallic, insulating).
    pub fn consistent_states(&self, v: f64) -> (DeviceState, DeviceState) {
        let u1 = self.v_dd - v;
        // Inside the hysteresis band the charging convention applies: the
        // supply-side device reads metallic, the ground-side insulating.
        let s1 = if u1 <= self.device1.v_low {
            DeviceState::Insulating
        } else {
            DeviceState::Metallic
        };
        let s2 = if v >= self.device2.v_high {
            DeviceState::Metallic
        } else {
            DeviceState::Insulating
        };
        (s1, s2)
    }

    /// Conductance of the supply-side device in state `s1` [1/R0].
    pub fn supply_conductance(&self, s1: DeviceState) -> f64 {
        self.device1.conductance(s1)
    }

    /// Worst-case total node conductance over all state pairs [1/R0].
    pub fn max_branch_conductance(&self) -> f64 {
        self.device1.conductance(DeviceState::Metallic)
            + self.device2.conductance(DeviceState::Metallic)
    }

    pub fn simulate(
        &self,
        v0: f64,
        states: Option<(DeviceState, DeviceState)>,
        dt: f64,
        duration: f64,
    ) -> Result<CellTrace, Error> {
        self.validate()?;
        let (s1, s2) = states.unwrap_or_else(|| self.consistent_states(v0));
        simulate(&self.view(), v0, s1, Some(s2), dt, duration)
    }
}

fn validate_common(v_dd: f64, cap: f64) -> Result<(), Error> {
    if !(v_dd.is_finite() && v_dd > 0.0) {
        return Err(Error::validation("cell.v_dd must be finite and > 0"));
    }
    if !(cap.is_finite() && cap > 0.0) {
        return Err(Error::validation("cell.cap must be finite and > 0"));
    }
    Ok(())
}

/// Cycle branch labels: device states for D-R, phase names for D-D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchLabel {
    Metallic,
    Insulating,
    Charging,
    Discharging,
}

impl std::fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BranchLabel::Metallic => "metallic",
            BranchLabel::Insulating => "insulating",
            BranchLabel::Charging => "charging",
            BranchLabel::Discharging => "discharging",
        };
        f.write_str(s)
    }
}

/// Equilibrium of one cycle branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub branch: BranchLabel,
    /// Node voltage the branch relaxes toward [V0].
    pub v_star: f64,
    /// True when the equilibrium sits inside the branch's operating region,
    /// so the trajectory settles there instead of exiting through a device
    /// threshold. Any trapping branch kills self-oscillation.
    pub trapping: bool,
}

/// Per-branch exit diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchDiagnostic {
    pub branch: BranchLabel,
    pub v_star: f64,
    /// Node voltage at which the branch hands over [V0].
    pub exit_level: f64,
    /// True when the branch exits by the node voltage rising to the level.
    pub exit_rising: bool,
    /// True when the equilibrium lies strictly beyond the exit level.
    pub passes: bool,
}

/// Outcome of the self-oscillation check over the two cycle branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationReport {
    pub oscillates: bool,
    pub branches: Vec<BranchDiagnostic>,
}

impl OscillationReport {
    pub fn trapping(&self) -> Vec<BranchLabel> {
        self.branches
            .iter()
            .filter(|b| !b.passes)
            .map(|b| b.branch)
            .collect()
    }
}

/// Closed-form durations of the two cycle branches [t0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CyclePeriods {
    pub t_charge: f64,
    pub t_discharge: f64,
}

impl CyclePeriods {
    pub fn period(&self) -> f64 {
        self.t_charge + self.t_discharge
    }
}

/// Sampled trajectory of one cell. Samples sit on the uniform `dt` grid;
/// state toggles between samples are in `events` with exact times.
#[derive(Debug, Clone)]
pub struct CellTrace {
    pub dt: f64,
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub top: Vec<DeviceState>,
    /// Present for D-D cells only.
    pub bottom: Option<Vec<DeviceState>>,
    pub events: Vec<CellEvent>,
}

impl CellTrace {
    /// Cycle-onset times: insulating -> metallic toggles of the discharge-side
    /// device (bottom for D-D, the sole device for D-R).
    pub fn onsets(&self) -> Vec<f64> {
        let marker = if self.bottom.is_some() {
            DeviceSlot::Bottom
        } else {
            DeviceSlot::Top
        };
        self.events
            .iter()
            .filter(|e| e.slot == marker && e.to == DeviceState::Metallic)
            .map(|e| e.t)
            .collect()
    }

    /// Mean spacing of consecutive cycle onsets, skipping the first
    /// `skip_cycles` intervals.
    pub fn measured_period(&self, skip_cycles: usize) -> Option<f64> {
        let on = self.onsets();
        if on.len() < skip_cycles + 2 {
            return None;
        }
        let first = on[skip_cycles];
        let last = *on.last().unwrap();
        Some((last - first) / (on.len() - 1 - skip_cycles) as f64)
    }
}

// ---------------------------------------------------------------------------
// shared engine
// ---------------------------------------------------------------------------

enum BottomElement<'a> {
    Resistor(f64),
    Device(&'a DeviceParams),
}

struct CircuitView<'a> {
    v_dd: f64,
    cap: f64,
    model: RhsModel,
    top: &'a DeviceParams,
    bottom: BottomElement<'a>,
}

/// One linear branch: cap * v' = (v_dd - v) g_top - v g_bot.
#[derive(Debug, Clone, Copy)]
struct Branch {
    g_top: f64,
    g_bot: f64,
    v_dd: f64,
    cap: f64,
}

impl Branch {
    fn rate(&self) -> f64 {
        (self.g_top + self.g_bot) / self.cap
    }

    fn target(&self) -> f64 {
        self.v_dd * self.g_top / (self.g_top + self.g_bot)
    }

    fn derivative(&self, v: f64) -> f64 {
        ((self.v_dd - v) * self.g_top - v * self.g_bot) / self.cap
    }

    /// Branch solution a time `t` after the voltage was `v0`.
    fn value(&self, v0: f64, t: f64) -> f64 {
        let k = self.rate();
        if k == 0.0 {
            v0
        } else {
            let vs = self.target();
            vs + (v0 - vs) * (-k * t).exp()
        }
    }

    /// Time for the branch solution to travel `v0 -> v1`; requires both to be
    /// on the same side of the equilibrium with `v1` strictly between `v0`
    /// and the equilibrium (or equal to `v0`).
    fn travel_time(&self, v0: f64, v1: f64) -> f64 {
        let vs = self.target();
        (self.cap / (self.g_top + self.g_bot)) * ((vs - v0) / (vs - v1)).ln()
    }
}

impl<'a> CircuitView<'a> {
    fn branch(&self, s1: DeviceState, s2: Option<DeviceState>) -> Branch {
        use DeviceState::*;
        let (g_top, g_bot) = match &self.bottom {
            BottomElement::Resistor(g_s) => {
                let g_d = self.top.conductance(s1);
                match (self.model, s1) {
                    (RhsModel::Ideal, Insulating) => (0.0, *g_s),
                    _ => (g_d, *g_s),
                }
            }
            BottomElement::Device(dev2) => {
                let s2 = s2.expect("d-d branch requires a bottom state");
                let g1 = self.top.conductance(s1);
                let g2 = dev2.conductance(s2);
                match (self.model, s1, s2) {
                    (RhsModel::Ideal, Metallic, Insulating) => (g1, 0.0),
                    (RhsModel::Ideal, Insulating, Metallic) => (0.0, g2),
                    _ => (g1, g2),
                }
            }
        };
        Branch {
            g_top,
            g_bot,
            v_dd: self.v_dd,
            cap: self.cap,
        }
    }

    fn has_bottom_device(&self) -> bool {
        matches!(self.bottom, BottomElement::Device(_))
    }

    /// Worst-case total node conductance over device states.
    fn max_conductance(&self) -> f64 {
        let g1 = self.top.conductance(DeviceState::Metallic);
        match &self.bottom {
            BottomElement::Resistor(g_s) => g1 + g_s,
            BottomElement::Device(d2) => g1 + d2.conductance(DeviceState::Metallic),
        }
    }
}

/// Node-voltage level at which a device in `state` switches, and whether the
/// node must rise (`true`) or fall to reach it.
pub(crate) fn exit_rule(
    slot: DeviceSlot,
    dev: &DeviceParams,
    state: DeviceState,
    v_dd: f64,
) -> (f64, bool, DeviceState) {
    use DeviceState::*;
    match (slot, state) {
        (DeviceSlot::Top, Insulating) => (v_dd - dev.v_high, false, Metallic),
        (DeviceSlot::Top, Metallic) => (v_dd - dev.v_low, true, Insulating),
        (DeviceSlot::Bottom, Insulating) => (dev.v_high, true, Metallic),
        (DeviceSlot::Bottom, Metallic) => (dev.v_low, false, Insulating),
    }
}

struct CycleSpec {
    charge: Branch,
    discharge: Branch,
    charge_label: BranchLabel,
    discharge_label: BranchLabel,
    /// Node window of the cycle: discharge hands over at v_down (falling),
    /// charge hands over at v_up (rising).
    v_down: f64,
    v_up: f64,
    charge_states: (DeviceState, Option<DeviceState>),
    discharge_states: (DeviceState, Option<DeviceState>),
}

fn cycle(view: &CircuitView<'_>) -> CycleSpec {
    use DeviceState::*;
    if view.has_bottom_device() {
        let dev2 = match &view.bottom {
            BottomElement::Device(d) => *d,
            _ => unreachable!(),
        };
        let v_up = (view.v_dd - view.top.v_low).min(dev2.v_high);
        let v_down = (view.v_dd - view.top.v_high).max(dev2.v_low);
        CycleSpec {
            charge: view.branch(Metallic, Some(Insulating)),
            discharge: view.branch(Insulating, Some(Metallic)),
            charge_label: BranchLabel::Charging,
            discharge_label: BranchLabel::Discharging,
            v_down,
            v_up,
            charge_states: (Metallic, Some(Insulating)),
            discharge_states: (Insulating, Some(Metallic)),
        }
    } else {
        CycleSpec {
            charge: view.branch(Metallic, None),
            discharge: view.branch(Insulating, None),
            charge_label: BranchLabel::Metallic,
            discharge_label: BranchLabel::Insulating,
            v_down: view.v_dd - view.top.v_high,
            v_up: view.v_dd - view.top.v_low,
            charge_states: (Metallic, None),
            discharge_states: (Insulating, None),
        }
    }
}

impl CycleSpec {
    fn report(&self) -> OscillationReport {
        let up = BranchDiagnostic {
            branch: self.charge_label,
            v_star: self.charge.target(),
            exit_level: self.v_up,
            exit_rising: true,
            passes: self.charge.target() > self.v_up,
        };
        let down = BranchDiagnostic {
            branch: self.discharge_label,
            v_star: self.discharge.target(),
            exit_level: self.v_down,
            exit_rising: false,
            passes: self.discharge.target() < self.v_down,
        };
        OscillationReport {
            oscillates: up.passes && down.passes,
            branches: vec![up, down],
        }
    }

    fn fixed_points(&self) -> Vec<FixedPoint> {
        self.report()
            .branches
            .iter()
            .map(|b| FixedPoint {
                branch: b.branch,
                v_star: b.v_star,
                trapping: !b.passes,
            })
            .collect()
    }

    fn analytic_period(&self) -> Result<CyclePeriods, Error> {
        if !(self.v_down < self.v_up) {
            return Err(Error::validation(
                "cycle window is empty: the switch-down level is not below the switch-up level",
            ));
        }
        let report = self.report();
        if !report.oscillates {
            let names: Vec<String> = report.trapping().iter().map(|b| b.to_string()).collect();
            return Err(Error::NotOscillating(names.join(", ")));
        }
        Ok(CyclePeriods {
            t_charge: self.charge.travel_time(self.v_down, self.v_up),
            t_discharge: self.discharge.travel_time(self.v_up, self.v_down),
        })
    }

    fn state_at_fraction(
        &self,
        frac: f64,
    ) -> Result<(f64, DeviceState, Option<DeviceState>), Error> {
        if !(0.0..1.0).contains(&frac) {
            return Err(Error::validation("cycle fraction must lie in [0, 1)"));
        }
        let p = self.analytic_period()?;
        let t = frac * p.period();
        if t < p.t_charge {
            let v = self.charge.value(self.v_down, t);
            Ok((v, self.charge_states.0, self.charge_states.1))
        } else {
            let v = self.discharge.value(self.v_up, t - p.t_charge);
            Ok((v, self.discharge_states.0, self.discharge_states.1))
        }
    }
}

/// First time in `[0, window]` at which the branch solution reaches `level`
/// (from `v0`, rising if `fires_high`), located by bisection; `None` if the
/// level is not reached inside the window.
fn crossing_time(b: &Branch, v0: f64, level: f64, fires_high: bool, window: f64) -> Option<f64> {
    let hit = |v: f64| {
        if fires_high {
            v >= level
        } else {
            v <= level
        }
    };
    if hit(v0) {
        return Some(0.0);
    }
    if !hit(b.value(v0, window)) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, window);
    while hi - lo > CROSSING_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hit(b.value(v0, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn simulate(
    view: &CircuitView<'_>,
    v0: f64,
    s1: DeviceState,
    s2: Option<DeviceState>,
    dt: f64,
    duration: f64,
) -> Result<CellTrace, Error> {
    if !v0.is_finite() {
        return Err(Error::validation("initial voltage must be finite"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt must be finite and > 0"));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::validation("duration must be finite and >= 0"));
    }
    let bound = 2.0 * view.cap / view.max_conductance();
    if dt >= bound {
        return Err(Error::validation(format!(
            "dt = {dt} is at or above the stability bound 2*cap/g_max = {bound}"
        )));
    }

    let mut v = v0;
    let mut top = s1;
    let mut bottom = s2;
    let mut events: Vec<CellEvent> = Vec::new();

    // Settle inconsistent initial states immediately (counts as t = 0 events).
    {
        let next_top = view.top.transition(top, view.v_dd - v);
        if next_top != top {
            top = next_top;
            events.push(CellEvent {
                t: 0.0,
                slot: DeviceSlot::Top,
                to: top,
            });
        }
        if let (BottomElement::Device(d2), Some(s)) = (&view.bottom, bottom) {
            let next = d2.transition(s, v);
            if next != s {
                bottom = Some(next);
                events.push(CellEvent {
                    t: 0.0,
                    slot: DeviceSlot::Bottom,
                    to: next,
                });
            }
        }
    }

    let n_steps = (duration / dt).round() as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut vs = Vec::with_capacity(n_steps + 1);
    let mut tops = Vec::with_capacity(n_steps + 1);
    let mut bottoms = bottom.map(|_| Vec::with_capacity(n_steps + 1));

    let mut push_sample = |t: f64, v: f64, top: DeviceState, bottom: Option<DeviceState>| {
        times.push(t);
        vs.push(v);
        tops.push(top);
        if let (Some(col), Some(s)) = (bottoms.as_mut(), bottom) {
            col.push(s);
        }
    };
    push_sample(0.0, v, top, bottom);

    for step in 1..=n_steps {
        let t_start = (step - 1) as f64 * dt;
        let mut offset = 0.0;
        let mut events_this_step = 0usize;
        loop {
            let branch = view.branch(top, bottom);
            let window = dt - offset;

            // earliest pending crossing among the devices
            let mut earliest: Option<f64> = None;
            let mut hits: Vec<(DeviceSlot, DeviceState)> = Vec::new();
            let mut consider = |slot: DeviceSlot, dev: &DeviceParams, state: DeviceState| {
                let (level, fires_high, to) = exit_rule(slot, dev, state, view.v_dd);
                if let Some(tc) = crossing_time(&branch, v, level, fires_high, window) {
                    match earliest {
                        None => {
                            earliest = Some(tc);
                            hits.clear();
                            hits.push((slot, to));
                        }
                        Some(best) if tc < best - GROUP_TOL => {
                            earliest = Some(tc);
                            hits.clear();
                            hits.push((slot, to));
                        }
                        Some(best) if tc <= best + GROUP_TOL => {
                            if tc < best {
                                earliest = Some(tc);
                            }
                            hits.push((slot, to));
                        }
                        _ => {}
                    }
                }
            };
            consider(DeviceSlot::Top, view.top, top);
            if let (BottomElement::Device(d2), Some(s)) = (&view.bottom, bottom) {
                consider(DeviceSlot::Bottom, d2, s);
            }

            match earliest {
                None => {
                    v = branch.value(v, window);
                    break;
                }
                Some(tc) => {
                    events_this_step += 1;
                    if events_this_step > MAX_EVENTS_PER_STEP {
                        return Err(Error::numeric(format!(
                            "more than {MAX_EVENTS_PER_STEP} state toggles within one dt step \
                             at t = {t_start}; the configuration chatters"
                        )));
                    }
                    v = branch.value(v, tc);
                    offset += tc;
                    let t_event = t_start + offset;
                    for (slot, to) in hits {
                        match slot {
                            DeviceSlot::Top => top = to,
                            DeviceSlot::Bottom => bottom = Some(to),
                        }
                        events.push(CellEvent {
                            t: t_event,
                            slot,
                            to,
                        });
                    }
                    if offset >= dt {
                        break;
                    }
                }
            }
        }
        if !v.is_finite() {
            return Err(Error::numeric(format!(
                "node voltage became non-finite at t = {}",
                step as f64 * dt
            )));
        }
        push_sample(step as f64 * dt, v, top, bottom);
    }

    Ok(CellTrace {
        dt,
        times,
        v: vs,
        top: tops,
        bottom: bottoms,
        events,
    })
}
