//! Declarative experiments: coupling templates, initial conditions, timed and
//! conditional reconfiguration events, and the Game-of-Life driver.
//!
//! A scenario owns a fully built lattice (edge modes applied), a concrete
//! initial state, an event list and optional life-driver settings. Running it
//! wires those into the network loop: timed events apply at the first step
//! boundary past their trigger time, condition events are evaluated at the
//! snapshot cadence, the life driver acts at generation boundaries, and every
//! application lands atomically between integration steps and is logged.
//!
//! The in-phase preparation used by the templates is exact voltage equality,
//! and perturbations are cycle reflections (`v -> v_low + v_high - v` with
//! the device states swapped), which move a cell half a period along the
//! limit cycle without leaving it. Both choices keep runs deterministic.

use crate::analysis::{mean_phase, CausalPhase};
use crate::cell::DdConfig;
use crate::error::Error;
use crate::lattice::{Boundary, CouplingParams, EdgeMode, Lattice, NetworkState};
use crate::netsim::{run_network, Network, ObserverConfig, RunOutputs};

/// Default snapshot (and condition-evaluation) cadence [t0].
pub const DEFAULT_SNAPSHOT_CADENCE: f64 = 0.05;
/// Default integration step [t0].
pub const DEFAULT_DT: f64 = 1e-3;

/// A set of cells addressed in 1-based grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Cells within Euclidean distance `radius` of `center` (inclusive).
    Disk {
        center: (u32, u32),
        radius: f64,
    },
    /// Inclusive rectangle from `(x0, y0)` to `(x1, y1)`.
    Rect {
        x0: u32,
        y0: u32,
        x1: u32,
        y1: u32,
    },
    /// Explicit cell list; every entry must be on the grid.
    Cells(Vec<(u32, u32)>),
    All,
}

impl Region {
    /// Resolves to sorted, deduplicated storage indices. Disk and Rect clip
    /// to the grid (possibly to nothing); explicit cells must be in range.
    pub fn cells(&self, lattice: &Lattice) -> Result<Vec<usize>, Error> {
        let (w, h) = (lattice.width(), lattice.height());
        let mut out = Vec::new();
        match self {
            Region::Disk { center, radius } => {
                if *radius < 0.0 || !radius.is_finite() {
                    return Err(Error::validation("disk radius must be finite and >= 0"));
                }
                let r2 = radius * radius;
                for y in 1..=h {
                    for x in 1..=w {
                        let dx = x as f64 - center.0 as f64;
                        let dy = y as f64 - center.1 as f64;
                        if dx * dx + dy * dy <= r2 {
                            out.push(lattice.index(x, y)?);
                        }
                    }
                }
            }
            Region::Rect { x0, y0, x1, y1 } => {
                if x0 > x1 || y0 > y1 {
                    return Err(Error::validation("rectangle corners are inverted"));
                }
                for y in (*y0).max(1)..=(*y1).min(h) {
                    for x in (*x0).max(1)..=(*x1).min(w) {
                        out.push(lattice.index(x, y)?);
                    }
                }
            }
            Region::Cells(list) => {
                for &(x, y) in list {
                    out.push(lattice.index(x, y)?);
                }
            }
            Region::All => out.extend(0..lattice.n()),
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// When an event fires.
#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    /// At the first step boundary reaching time `t`.
    At(f64),
    /// When the fraction of region cells classified anti-phase (against the
    /// whole-grid circular-mean reference) exceeds `threshold`. Evaluated at
    /// the snapshot cadence; cells without a defined phase count as in-phase.
    AntiPhaseFraction { region: Region, threshold: f64 },
}

/// What an event does.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Sets every edge with both endpoints inside the region.
    SetRegionEdges { region: Region, mode: EdgeMode },
    /// Forces the node voltage of every region cell; inconsistent device
    /// states settle through immediate transitions on the next step.
    SetCellVoltage { region: Region, v: f64 },
    /// Cycle reflection of every region cell (half-period phase flip).
    FlipPhase { region: Region },
}

/// One fire-at-most-once reconfiguration.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub trigger: Trigger,
    pub action: Action,
    pub label: String,
}

/// Log entry for an applied event or life generation.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedEvent {
    pub t: f64,
    pub label: String,
}

/// Game-of-Life driver settings.
///
/// Each generation boundary classifies every cell by phase, so the run
/// errors if any cell has not completed two oscillation cycles by then.
/// With the default couplings this is the norm, not the exception: a
/// resistively linked region bordering a counter-phase cluster stalls
/// mid-toggle onto a fixed point inside the hysteresis band (the
/// discharging branch overpowers the charging one roughly 3.4:1), after
/// which its cells never oscillate again. The driver is therefore usable
/// only with couplings weak enough for the whole lattice to keep cycling.
#[derive(Debug, Clone, PartialEq)]
pub struct LifeConfig {
    /// Time between generations [t0]; must cover at least one oscillation
    /// period or classification is undefined.
    pub generation_period: f64,
    /// Storage indices alive at generation 0 (already actuated into the
    /// scenario's initial state and edges by the builder).
    pub initial_alive: Vec<usize>,
}

/// Record of one driver generation.
#[derive(Debug, Clone, PartialEq)]
pub struct LifeGeneration {
    pub t: f64,
    /// Alive set read back from the phase classifier at this boundary.
    pub classified: Vec<usize>,
    /// Alive set actuated for the next generation (after the Conway rules).
    pub actuated: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub lattice: Lattice,
    pub initial: NetworkState,
    pub events: Vec<Event>,
    pub life: Option<LifeConfig>,
    pub dt: f64,
    pub duration: f64,
    pub observers: ObserverConfig,
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutputs {
    pub net: RunOutputs,
    pub applied: Vec<AppliedEvent>,
    pub generations: Vec<LifeGeneration>,
    /// Edge modes at the end of the run.
    pub final_edge_modes: Vec<EdgeMode>,
}

impl Scenario {
    /// Structural validation: regions resolvable, life period long enough.
    pub fn validate(&self) -> Result<(), Error> {
        if self.initial.v.len() != self.lattice.n() {
            return Err(Error::validation(
                "initial state size does not match the grid",
            ));
        }
        for e in &self.events {
            match &e.trigger {
                Trigger::At(t) => {
                    if !(t.is_finite() && *t >= 0.0) {
                        return Err(Error::validation(format!(
                            "event '{}' trigger time must be finite and >= 0",
                            e.label
                        )));
                    }
                }
                Trigger::AntiPhaseFraction { region, threshold } => {
                    region.cells(&self.lattice)?;
                    if !(0.0..=1.0).contains(threshold) {
                        return Err(Error::validation(format!(
                            "event '{}' threshold must lie in [0, 1]",
                            e.label
                        )));
                    }
                }
            }
            match &e.action {
                Action::SetRegionEdges { region, .. } => {
                    let _ = region.cells(&self.lattice)?;
                }
                Action::SetCellVoltage { region, v } => {
                    let _ = region.cells(&self.lattice)?;
                    if !v.is_finite() {
                        return Err(Error::validation("event voltage must be finite"));
                    }
                }
                Action::FlipPhase { region } => {
                    let _ = region.cells(&self.lattice)?;
                }
            }
        }
        if let Some(life) = &self.life {
            let period = self.lattice.cell.analytic_period()?.period();
            if life.generation_period < period {
                return Err(Error::validation(format!(
                    "life.generation_period = {} is below one oscillation period ({period}); \
                     phase classification would be undefined",
                    life.generation_period
                )));
            }
        }
        Ok(())
    }
}

/// One Conway step (birth on 3, survival on 2 or 3 Moore-8 neighbors, dead
/// boundary).
pub fn conway_step(width: u32, height: u32, alive: &[bool]) -> Vec<bool> {
    let (w, h) = (width as i64, height as i64);
    debug_assert_eq!(alive.len(), (w * h) as usize);
    let mut next = vec![false; alive.len()];
    for y in 0..h {
        for x in 0..w {
            let mut n = 0;
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && nx < w && ny >= 0 && ny < h && alive[(ny * w + nx) as usize] {
                        n += 1;
                    }
                }
            }
            let i = (y * w + x) as usize;
            next[i] = if alive[i] { n == 2 || n == 3 } else { n == 3 };
        }
    }
    next
}

/// Classifies each phase as anti-phase against the circular-mean reference
/// of the whole map: alive when the wrapped difference lies in the
/// half-circle around pi.
pub fn classify_anti_phase(phases: &[f64]) -> Vec<bool> {
    let reference = mean_phase(phases);
    phases
        .iter()
        .map(|&p| (p - reference).cos() < 0.0)
        .collect()
}

fn indices_of(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &a)| a.then_some(i))
        .collect()
}

fn apply_action(net: &mut Network, state: &mut NetworkState, action: &Action) -> Result<(), Error> {
    match action {
        Action::SetRegionEdges { region, mode } => {
            let cells = region.cells(net.lattice())?;
            let member = |i: usize| cells.binary_search(&i).is_ok();
            net.lattice_mut().set_edges_within(member, *mode);
        }
        Action::SetCellVoltage { region, v } => {
            for i in region.cells(net.lattice())? {
                state.v[i] = *v;
            }
        }
        Action::FlipPhase { region } => {
            for i in region.cells(net.lattice())? {
                net.lattice().reflect_cell(state, i);
            }
        }
    }
    Ok(())
}

/// Runs a scenario to completion.
pub fn run_scenario(scenario: &Scenario) -> Result<(NetworkState, ScenarioOutputs), Error> {
    scenario.validate()?;
    let mut net = Network::new(scenario.lattice.clone())?;
    let mut state = scenario.initial.clone();
    state.t = 0.0;

    let n = net.lattice().n();
    let mut causal = CausalPhase::new(n);
    let mut fired = vec![false; scenario.events.len()];
    let mut applied: Vec<AppliedEvent> = Vec::new();
    let mut generations: Vec<LifeGeneration> = Vec::new();

    // life bookkeeping: generation 0 was actuated by the builder
    let mut alive_mask: Option<Vec<bool>> = scenario.life.as_ref().map(|life| {
        let mut mask = vec![false; n];
        for &i in &life.initial_alive {
            mask[i] = true;
        }
        mask
    });
    let mut next_generation = 1usize;

    let check_cadence = scenario
        .observers
        .snapshot_cadence
        .unwrap_or(DEFAULT_SNAPSHOT_CADENCE);
    let mut next_check = 0usize;

    // first step boundary at or after the requested time, with float fuzz
    let time_due = |t: f64, due: f64| t >= due - 1e-12 * (1.0 + due.abs());

    let dt = scenario.dt;
    let out = run_network(
        &mut net,
        &mut state,
        dt,
        scenario.duration,
        &scenario.observers,
        |net, state, step_events, _out| {
            causal.absorb(step_events);
            let t = state.t;

            // timed events
            for (k, event) in scenario.events.iter().enumerate() {
                if fired[k] {
                    continue;
                }
                if let Trigger::At(due) = event.trigger {
                    if time_due(t, due) {
                        apply_action(net, state, &event.action)?;
                        fired[k] = true;
                        applied.push(AppliedEvent {
                            t,
                            label: event.label.clone(),
                        });
                    }
                }
            }

            // condition events, at the snapshot cadence
            if time_due(t, next_check as f64 * check_cadence) {
                next_check += 1;
                for (k, event) in scenario.events.iter().enumerate() {
                    if fired[k] {
                        continue;
                    }
                    let Trigger::AntiPhaseFraction { region, threshold } = &event.trigger else {
                        continue;
                    };
                    let cells = region.cells(net.lattice())?;
                    if cells.is_empty() {
                        continue;
                    }
                    // reference over every cell with a defined phase; region
                    // cells without one count as in-phase
                    let defined: Vec<f64> = (0..n).filter_map(|i| causal.phase_at(i, t)).collect();
                    if defined.is_empty() {
                        continue;
                    }
                    let reference = mean_phase(&defined);
                    let anti = cells
                        .iter()
                        .filter(|&&i| {
                            causal
                                .phase_at(i, t)
                                .map(|p| (p - reference).cos() < 0.0)
                                .unwrap_or(false)
                        })
                        .count();
                    if anti as f64 > threshold * cells.len() as f64 {
                        apply_action(net, state, &event.action)?;
                        fired[k] = true;
                        applied.push(AppliedEvent {
                            t,
                            label: event.label.clone(),
                        });
                    }
                }
            }

            // life generations
            if let (Some(life), Some(alive)) = (&scenario.life, alive_mask.as_mut()) {
                if time_due(t, next_generation as f64 * life.generation_period) {
                    let phases = causal.phases_at(t).ok_or_else(|| {
                        let lat = net.lattice();
                        let stuck: Vec<String> = (0..n)
                            .filter(|&i| causal.onset_count(i) < 2)
                            .take(8)
                            .map(|i| {
                                let (x, y) = lat.coords(i);
                                format!("({x}, {y})")
                            })
                            .collect();
                        Error::numeric(format!(
                            "life classification at t = {t}: some cells have not completed \
                             two oscillation cycles (first: {}); a stalled cell has no \
                             defined phase",
                            stuck.join(", ")
                        ))
                    })?;
                    let classified = classify_anti_phase(&phases);
                    let lat = net.lattice();
                    let next = conway_step(lat.width(), lat.height(), &classified);
                    for i in 0..n {
                        if next[i] != classified[i] {
                            net.lattice().reflect_cell(state, i);
                        }
                    }
                    let next_ref = &next;
                    net.lattice_mut().partition_edges_incident(
                        |i| next_ref[i],
                        EdgeMode::Off,
                        EdgeMode::On,
                    );
                    generations.push(LifeGeneration {
                        t,
                        classified: indices_of(&classified),
                        actuated: indices_of(&next),
                    });
                    *alive = next;
                    next_generation += 1;
                }
            }
            Ok(())
        },
    )?;

    let final_edge_modes = (0..net.lattice().edges().len())
        .map(|k| net.lattice().edge_mode(k))
        .collect();
    Ok((
        state,
        ScenarioOutputs {
            net: out,
            applied,
            generations,
            final_edge_modes,
        },
    ))
}

// ---------------------------------------------------------------------------
// templates
// ---------------------------------------------------------------------------

fn base_lattice(width: u32, height: u32) -> Result<Lattice, Error> {
    Lattice::build(
        width,
        height,
        DdConfig::default(),
        CouplingParams::default(),
        Boundary::Open,
    )
}

fn standard_observers(lattice: &Lattice, trace_coords: &[(u32, u32)]) -> ObserverConfig {
    let trace_cells = trace_coords
        .iter()
        .filter_map(|&(x, y)| lattice.index(x, y).ok())
        .collect();
    ObserverConfig {
        snapshot_cadence: Some(DEFAULT_SNAPSHOT_CADENCE),
        trace_cells,
        record_supply: true,
        record_events: true,
    }
}

/// Capacitive disk in a resistive sea, seeded with a small antisymmetric
/// voltage pattern inside the disk.
pub fn template_vortex(
    width: u32,
    height: u32,
    center: (u32, u32),
    radius: f64,
) -> Result<Scenario, Error> {
    template_vortex_on(base_lattice(width, height)?, center, radius)
}

/// [`template_vortex`] over a caller-configured lattice (cell, coupling, and
/// boundary taken as given; edge modes are overwritten by the disk map).
pub fn template_vortex_on(
    mut lattice: Lattice,
    center: (u32, u32),
    radius: f64,
) -> Result<Scenario, Error> {
    lattice.index(center.0, center.1)?;
    let disk = Region::Disk { center, radius };
    let cells = disk.cells(&lattice)?;
    let member = |i: usize| cells.binary_search(&i).is_ok();
    lattice.set_edges_within(member, EdgeMode::Off);

    let mut initial = lattice.uniform_cycle_state(0.25)?;
    // antisymmetric in x about the disk center, zero-mean over symmetric
    // disks; strong enough to desynchronize within a few cycles
    let eps = 0.01;
    for &i in &cells {
        let (x, _) = lattice.coords(i);
        initial.v[i] += eps * (x as f64 - center.0 as f64) / radius.max(1.0);
    }

    let observers = standard_observers(&lattice, &[center, (1, 1)]);
    Ok(Scenario {
        lattice,
        initial,
        events: Vec::new(),
        life: None,
        dt: DEFAULT_DT,
        duration: 10.0,
        observers,
    })
}

/// In-phase metastable grid (exact equality) with the vortex coupling map;
/// one optional seed cell reflected to the opposite cycle phase.
pub fn template_wave(
    width: u32,
    height: u32,
    center: (u32, u32),
    radius: f64,
    seed: Option<(u32, u32)>,
) -> Result<Scenario, Error> {
    template_wave_on(base_lattice(width, height)?, center, radius, seed)
}

/// [`template_wave`] over a caller-configured lattice.
pub fn template_wave_on(
    mut lattice: Lattice,
    center: (u32, u32),
    radius: f64,
    seed: Option<(u32, u32)>,
) -> Result<Scenario, Error> {
    let disk = Region::Disk { center, radius };
    let cells = disk.cells(&lattice)?;
    let member = |i: usize| cells.binary_search(&i).is_ok();
    lattice.set_edges_within(member, EdgeMode::Off);

    let mut initial = lattice.uniform_cycle_state(0.25)?;
    let mut trace_coords = vec![center, (1, 1)];
    if let Some((sx, sy)) = seed {
        let i = lattice.index(sx, sy)?;
        lattice.reflect_cell(&mut initial, i);
        trace_coords.insert(0, (sx, sy));
    }

    let observers = standard_observers(&lattice, &trace_coords);
    Ok(Scenario {
        lattice,
        initial,
        events: Vec::new(),
        life: None,
        dt: DEFAULT_DT,
        duration: 40.0,
        observers,
    })
}

/// Game-of-Life scenario: uniform in-phase grid with the given cells brought
/// alive (anti-phase) at t = 0 and the Conway driver running every
/// `generation_period` (default: three oscillation periods) for
/// `generations` generations.
pub fn template_life(
    width: u32,
    height: u32,
    alive_region: &Region,
    generation_period: Option<f64>,
    generations: u32,
) -> Result<Scenario, Error> {
    template_life_on(
        base_lattice(width, height)?,
        alive_region,
        generation_period,
        generations,
    )
}

/// [`template_life`] over a caller-configured lattice.
pub fn template_life_on(
    mut lattice: Lattice,
    alive_region: &Region,
    generation_period: Option<f64>,
    generations: u32,
) -> Result<Scenario, Error> {
    let alive = alive_region.cells(&lattice)?;
    if alive.is_empty() {
        return Err(Error::validation(
            "life template needs a nonempty alive region",
        ));
    }
    let period = lattice.cell.analytic_period()?.period();
    let generation_period = generation_period.unwrap_or(3.0 * period);

    let mut initial = lattice.uniform_cycle_state(0.25)?;
    for &i in &alive {
        lattice.reflect_cell(&mut initial, i);
    }
    let member = |i: usize| alive.binary_search(&i).is_ok();
    lattice.partition_edges_incident(member, EdgeMode::Off, EdgeMode::On);

    let observers = standard_observers(&lattice, &[(1, 1)]);
    Ok(Scenario {
        lattice,
        initial,
        events: Vec::new(),
        life: Some(LifeConfig {
            generation_period,
            initial_alive: alive,
        }),
        dt: DEFAULT_DT,
        duration: generations as f64 * generation_period,
        observers,
    })
}

/// The corner-colony narrative: a still-life block near the origin corner
/// plus a glider launched toward the far corner. When the far corner region
/// turns substantially anti-phase (the glider arriving), one-shot events
/// reflect the block back in phase and restore its resistive coupling: the
/// colony's origin dies on the messenger's arrival.
pub fn template_life_corner(width: u32, height: u32) -> Result<Scenario, Error> {
    if width < 14 || height < 14 {
        return Err(Error::validation(
            "corner life template needs at least 14x14",
        ));
    }
    let block = [(2u32, 2u32), (3, 2), (2, 3), (3, 3)];
    // glider that translates one cell toward (+x, +y) every four generations
    let glider = [(8u32, 7u32), (9, 8), (7, 9), (8, 9), (9, 9)];
    let alive = Region::Cells(block.iter().chain(glider.iter()).copied().collect());
    // enough generations for the glider to cross the grid
    let generations = 4 * (width.max(height) + 4);
    let mut scenario = template_life(width, height, &alive, None, generations)?;
    let corner = Region::Rect {
        x0: width - 2,
        y0: height - 2,
        x1: width,
        y1: height,
    };
    scenario.events.push(Event {
        trigger: Trigger::AntiPhaseFraction {
            region: corner.clone(),
            threshold: 0.3,
        },
        action: Action::FlipPhase {
            region: Region::Cells(block.to_vec()),
        },
        label: "arrival-kills-origin".into(),
    });
    scenario.events.push(Event {
        trigger: Trigger::AntiPhaseFraction {
            region: corner,
            threshold: 0.3,
        },
        action: Action::SetRegionEdges {
            region: Region::Rect {
                x0: 1,
                y0: 1,
                x1: 4,
                y1: 4,
            },
            mode: EdgeMode::On,
        },
        label: "arrival-rewires-origin".into(),
    });
    Ok(scenario)
}
