//! Network time integration: explicit stepping of `M v' = f(v, states)` with
//! threshold-event detection.
//!
//! Each step solves the capacitance-matrix system for `v'`, advances every
//! node explicitly, and scans all devices for threshold crossings on the
//! linear trial `v_i(theta) = v_i + theta * v_i'`. The earliest crossing is
//! localized by bisection; crossings within [`EVENT_GROUP_TOL`] of it toggle
//! together (atomic groups keep complementary device pairs and symmetric cell
//! groups from being split by round-off), the network advances exactly to the
//! crossing, and the remainder of the step is re-integrated with a fresh
//! solve. Everything runs sequentially with fixed accumulation order, so a
//! given configuration reproduces bit-identical trajectories.

use serde::Serialize;

use crate::capmat::{CapMatrix, SolveWorkspace};
use crate::cell::{exit_rule, DeviceSlot};
use crate::device::DeviceState;
use crate::error::Error;
use crate::lattice::{Lattice, NetworkState};

/// Bisection resolution for crossing times [t0]; the accuracy contract is
/// 1e-8, this resolves far below it so that event timing never dominates the
/// per-step error budget.
pub const EVENT_TOL: f64 = 1e-13;
/// Crossings closer together than this toggle as one atomic group [t0].
pub const EVENT_GROUP_TOL: f64 = 1e-9;
/// Per-step relative residual contract for the implicit solve.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

/// One device toggle in the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetEvent {
    pub t: f64,
    pub cell: u32,
    pub slot: DeviceSlot,
    pub to: DeviceState,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub solves: usize,
    pub cg_iterations: usize,
    pub max_rel_residual: f64,
}

impl StepStats {
    fn absorb(&mut self, s: crate::capmat::SolveStats) {
        self.solves += 1;
        self.cg_iterations += s.iterations;
        if s.rel_residual > self.max_rel_residual {
            self.max_rel_residual = s.rel_residual;
        }
    }
}

/// A lattice with its assembled capacitance matrix and step workspaces.
#[derive(Debug)]
pub struct Network {
    lattice: Lattice,
    m: CapMatrix,
    dt_bound: f64,
    ws: SolveWorkspace,
    f: Vec<f64>,
    vp: Vec<f64>,
}

impl Network {
    pub fn new(lattice: Lattice) -> Result<Self, Error> {
        let m = lattice.cap_matrix()?;
        // Explicit stepping of M v' = -G v + b is stable for
        // dt < 2 * lambda_min(M) / lambda_max(G); lambda_min(M) = c_cell
        // (uniform mode) and the Gershgorin row bound caps lambda_max(G).
        let dt_bound = 2.0 * lattice.cell.cap / lattice.max_node_conductance();
        let n = lattice.n();
        Ok(Network {
            lattice,
            m,
            dt_bound,
            ws: SolveWorkspace::default(),
            f: vec![0.0; n],
            vp: vec![0.0; n],
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Mutable lattice access for edge-mode changes between steps. The
    /// capacitance matrix stays valid: coupling capacitors are fixed,
    /// only edge resistances toggle.
    pub fn lattice_mut(&mut self) -> &mut Lattice {
        &mut self.lattice
    }

    pub fn cap_matrix(&self) -> &CapMatrix {
        &self.m
    }

    /// Largest stable step size for this topology [t0].
    pub fn dt_bound(&self) -> f64 {
        self.dt_bound
    }

    pub fn check_dt(&self, dt: f64) -> Result<(), Error> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt must be finite and > 0"));
        }
        if dt >= self.dt_bound {
            return Err(Error::validation(format!(
                "dt = {dt} is at or above the stability bound {}",
                self.dt_bound
            )));
        }
        Ok(())
    }

    /// Advances the network by one step of `dt`, appending any state toggles
    /// to `events` in causal order.
    pub fn step(
        &mut self,
        state: &mut NetworkState,
        dt: f64,
        events: &mut Vec<NetEvent>,
    ) -> Result<StepStats, Error> {
        self.step_inner(state, dt, Some(events))
    }

    /// One step with device transitions disabled: pure continuous dynamics
    /// under the current states (charge-accounting support).
    pub fn step_frozen(&mut self, state: &mut NetworkState, dt: f64) -> Result<StepStats, Error> {
        self.step_inner(state, dt, None)
    }

    fn step_inner(
        &mut self,
        state: &mut NetworkState,
        dt: f64,
        mut events: Option<&mut Vec<NetEvent>>,
    ) -> Result<StepStats, Error> {
        self.check_dt(dt)?;
        let n = self.lattice.n();
        debug_assert_eq!(state.v.len(), n);
        let t_start = state.t;
        let mut offset = 0.0f64;
        let mut stats = StepStats::default();
        let mut hits: Vec<(u32, DeviceSlot, DeviceState)> = Vec::new();
        let max_rounds = 4 * n + 16;
        let mut rounds = 0usize;

        while offset < dt {
            let remaining = dt - offset;
            self.lattice.network_rhs(state, &mut self.f);
            let solve = self.m.solve(&self.f, &mut self.vp, &mut self.ws)?;
            if solve.rel_residual > RESIDUAL_LIMIT {
                return Err(Error::numeric(format!(
                    "solve residual {} above {RESIDUAL_LIMIT:e}",
                    solve.rel_residual
                )));
            }
            stats.absorb(solve);

            let mut theta_min = f64::INFINITY;
            hits.clear();
            if events.is_some() {
                let v_dd = self.lattice.cell.v_dd;
                for i in 0..n {
                    let (vi, si) = (state.v[i], state.states[i]);
                    let slope = self.vp[i];
                    for (slot, dev, s) in [
                        (DeviceSlot::Top, &self.lattice.cell.device1, si.0),
                        (DeviceSlot::Bottom, &self.lattice.cell.device2, si.1),
                    ] {
                        let (level, fires_high, to) = exit_rule(slot, dev, s, v_dd);
                        let Some(theta) = linear_crossing(vi, slope, level, fires_high, remaining)
                        else {
                            continue;
                        };
                        if theta < theta_min - EVENT_GROUP_TOL {
                            theta_min = theta;
                            hits.clear();
                            hits.push((i as u32, slot, to));
                        } else if theta <= theta_min + EVENT_GROUP_TOL {
                            theta_min = theta_min.min(theta);
                            hits.push((i as u32, slot, to));
                        }
                    }
                }
            }

            if hits.is_empty() {
                for i in 0..n {
                    state.v[i] += remaining * self.vp[i];
                }
                offset = dt;
            } else {
                rounds += 1;
                if rounds > max_rounds {
                    return Err(Error::numeric(format!(
                        "{rounds} toggle groups within one step at t = {t_start}; \
                         the network chatters"
                    )));
                }
                for i in 0..n {
                    state.v[i] += theta_min * self.vp[i];
                }
                offset += theta_min;
                let t_event = t_start + offset;
                let out = events.as_deref_mut().expect("hits imply event scanning");
                for &(cell, slot, to) in &hits {
                    let s = &mut state.states[cell as usize];
                    match slot {
                        DeviceSlot::Top => s.0 = to,
                        DeviceSlot::Bottom => s.1 = to,
                    }
                    out.push(NetEvent {
                        t: t_event,
                        cell,
                        slot,
                        to,
                    });
                }
            }
        }

        for &v in state.v.iter() {
            if !v.is_finite() {
                return Err(Error::numeric(format!(
                    "node voltage became non-finite at t = {}",
                    t_start + dt
                )));
            }
        }
        state.t = t_start + dt;
        Ok(stats)
    }
}

/// First time in `[0, window]` at which the linear trial `v0 + theta * slope`
/// reaches `level` (rising if `fires_high`), bisected to [`EVENT_TOL`].
fn linear_crossing(v0: f64, slope: f64, level: f64, fires_high: bool, window: f64) -> Option<f64> {
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
    if !hit(v0 + window * slope) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, window);
    while hi - lo > EVENT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hit(v0 + mid * slope) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// What a run records, beyond the final state.
#[derive(Debug, Clone)]
pub struct ObserverConfig {
    /// Voltage-map snapshot cadence [t0]; `None` disables snapshots.
    pub snapshot_cadence: Option<f64>,
    /// Storage indices of cells traced at every step boundary.
    pub trace_cells: Vec<usize>,
    /// Record the total supply current at every step boundary.
    pub record_supply: bool,
    /// Keep the full transition-event log.
    pub record_events: bool,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        ObserverConfig {
            snapshot_cadence: Some(0.05),
            trace_cells: Vec::new(),
            record_supply: false,
            record_events: true,
        }
    }
}

/// Voltage map at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub v: Vec<f64>,
}

/// Per-step samples of one cell.
#[derive(Debug, Clone)]
pub struct NetTrace {
    pub cell: usize,
    pub v: Vec<f64>,
    pub s1: Vec<DeviceState>,
    pub s2: Vec<DeviceState>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutputs {
    /// Step-boundary times; filled when traces or supply are recorded.
    pub sample_times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub traces: Vec<NetTrace>,
    /// Total supply current per sample time [I0].
    pub supply: Vec<f64>,
    pub events: Vec<NetEvent>,
    pub n_steps: usize,
    pub cg_iterations: usize,
    pub max_rel_residual: f64,
}

/// Runs `n = round(duration / dt)` steps, invoking observers at their
/// cadences and `hook` after every step (and once at t = 0 before anything is
/// recorded, so the hook can apply start-of-run actions). The hook receives
/// the toggles of the step just taken.
pub fn run_network<H>(
    net: &mut Network,
    state: &mut NetworkState,
    dt: f64,
    duration: f64,
    obs: &ObserverConfig,
    mut hook: H,
) -> Result<RunOutputs, Error>
where
    H: FnMut(&mut Network, &mut NetworkState, &[NetEvent], &mut RunOutputs) -> Result<(), Error>,
{
    net.check_dt(dt)?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::validation("duration must be finite and >= 0"));
    }
    if let Some(c) = obs.snapshot_cadence {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::validation("snapshot cadence must be finite and > 0"));
        }
    }
    for &c in &obs.trace_cells {
        if c >= net.lattice.n() {
            return Err(Error::validation(format!(
                "trace cell index {c} out of range"
            )));
        }
    }

    let n_steps = (duration / dt).round() as usize;
    let mut out = RunOutputs::default();
    for &cell in &obs.trace_cells {
        out.traces.push(NetTrace {
            cell,
            v: Vec::with_capacity(n_steps + 1),
            s1: Vec::with_capacity(n_steps + 1),
            s2: Vec::with_capacity(n_steps + 1),
        });
    }

    hook(net, state, &[], &mut out)?;

    let mut next_snap = 0usize;
    let mut observe = |net: &Network, state: &NetworkState, out: &mut RunOutputs| {
        if !obs.trace_cells.is_empty() || obs.record_supply {
            out.sample_times.push(state.t);
            for tr in &mut out.traces {
                tr.v.push(state.v[tr.cell]);
                let (s1, s2) = state.states[tr.cell];
                tr.s1.push(s1);
                tr.s2.push(s2);
            }
            if obs.record_supply {
                let lat = net.lattice();
                let v_dd = lat.cell.v_dd;
                let mut total = 0.0;
                for i in 0..lat.n() {
                    total += (v_dd - state.v[i]) * lat.cell.supply_conductance(state.states[i].0);
                }
                out.supply.push(total);
            }
        }
        if let Some(cadence) = obs.snapshot_cadence {
            // half-step tolerance absorbs cadences that are not exact
            // multiples of dt
            if state.t + 0.5 * dt >= next_snap as f64 * cadence {
                out.snapshots.push(Snapshot {
                    t: state.t,
                    v: state.v.clone(),
                });
                next_snap += 1;
            }
        }
    };
    observe(net, state, &mut out);

    let mut step_events: Vec<NetEvent> = Vec::new();
    for k in 1..=n_steps {
        step_events.clear();
        let stats = net.step(state, dt, &mut step_events)?;
        state.t = k as f64 * dt;
        out.n_steps += 1;
        out.cg_iterations += stats.cg_iterations;
        if stats.max_rel_residual > out.max_rel_residual {
            out.max_rel_residual = stats.max_rel_residual;
        }
        hook(net, state, &step_events, &mut out)?;
        if obs.record_events {
            out.events.extend_from_slice(&step_events);
        }
        observe(net, state, &mut out);
    }
    Ok(out)
}

/// Convenience wrapper: run with no between-step hook.
pub fn run_plain(
    net: &mut Network,
    state: &mut NetworkState,
    dt: f64,
    duration: f64,
    obs: &ObserverConfig,
) -> Result<RunOutputs, Error> {
    run_network(net, state, dt, duration, obs, |_, _, _, _| Ok(()))
}
