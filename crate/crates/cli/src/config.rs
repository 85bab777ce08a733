//! Run configuration files.
//!
//! The format is strict TOML: every key below is optional and defaults to the
//! values shown by `SimConfig::default()`, unknown keys are rejected rather
//! than ignored, and validation errors name the offending key path. A parsed
//! and resolved config echoes back (`echo`) with every default spelled out;
//! `parse(echo(c)) == c` holds for any resolved config.

use serde::{Deserialize, Serialize};

use oscnet_core::cell::{DdConfig, RhsModel};
use oscnet_core::device::DeviceParams;
use oscnet_core::lattice::{Boundary, CouplingParams, Lattice};
use oscnet_core::netsim::ObserverConfig;
use oscnet_core::scenario::{
    template_life_on, template_vortex_on, template_wave_on, Region, Scenario, DEFAULT_DT,
    DEFAULT_SNAPSHOT_CADENCE,
};
use oscnet_core::Error;

/// Right-hand-side choice as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsChoice {
    /// Branch forms with the insulating-side leak dropped.
    Ideal,
    /// All conductances kept on every branch.
    Exact,
}

impl RhsChoice {
    pub fn to_model(self) -> RhsModel {
        match self {
            RhsChoice::Ideal => RhsModel::Ideal,
            RhsChoice::Exact => RhsModel::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryChoice {
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Step size [t0].
    pub dt: f64,
    /// Run length [t0]; 0 = the template's default (10 without a template).
    pub duration: f64,
    /// Output directory.
    pub out: String,
    pub rhs: RhsChoice,
    /// Reserved; every default is deterministic so nothing consumes it yet.
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            dt: DEFAULT_DT,
            duration: 0.0,
            out: "out".into(),
            rhs: RhsChoice::Exact,
            seed: 0,
        }
    }
}

/// Physical meaning of the normalized units, for reporting and calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitsSection {
    pub r0_ohms: f64,
    pub v0_volts: f64,
    /// Physical cell capacitance in farads; 0 = not specified (use
    /// `calibrate` to derive one from a target frequency).
    pub c0_farads: f64,
}

impl Default for UnitsSection {
    fn default() -> Self {
        UnitsSection {
            r0_ohms: 1000.0,
            v0_volts: 1.0,
            c0_farads: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub width: u32,
    pub height: u32,
    pub boundary: BoundaryChoice,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            width: 30,
            height: 30,
            boundary: BoundaryChoice::Open,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    pub r_high: f64,
    pub r_low: f64,
    pub v_low: f64,
    pub v_high: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        let d = DeviceParams::default();
        DeviceSection {
            r_high: d.r_high,
            r_low: d.r_low,
            v_low: d.v_low,
            v_high: d.v_high,
        }
    }
}

impl DeviceSection {
    pub fn to_params(&self) -> DeviceParams {
        DeviceParams {
            r_high: self.r_high,
            r_low: self.r_low,
            v_low: self.v_low,
            v_high: self.v_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSection {
    pub v_dd: f64,
    pub cap: f64,
    pub device1: DeviceSection,
    pub device2: DeviceSection,
}

impl Default for CellSection {
    fn default() -> Self {
        CellSection {
            v_dd: 3.0,
            cap: 1.0,
            device1: DeviceSection::default(),
            device2: DeviceSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub r_on: f64,
    pub r_off: f64,
    pub c_couple: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        let c = CouplingParams::default();
        CouplingSection {
            r_on: c.r_on,
            r_off: c.r_off,
            c_couple: c.c_couple,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserversSection {
    /// Voltage-map frame cadence [t0]; 0 disables frames.
    pub snapshot_cadence: f64,
    /// 1-based (x, y) coordinates of cells traced every step.
    pub trace_cells: Vec<(u32, u32)>,
    pub record_events: bool,
    pub record_supply: bool,
}

impl Default for ObserversSection {
    fn default() -> Self {
        ObserversSection {
            snapshot_cadence: DEFAULT_SNAPSHOT_CADENCE,
            trace_cells: Vec::new(),
            record_events: true,
            record_supply: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    /// "" (plain grid run), "vortex", "wave", or "life".
    pub template: String,
    /// Disk center for vortex/wave; (0, 0) resolves to the grid center.
    pub center: (u32, u32),
    /// Disk radius for vortex/wave.
    pub radius: f64,
    /// Input cell for wave; resolves to the middle of the second column
    /// ((2, 15) on the default grid) when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_cell: Option<(u32, u32)>,
    /// Alive cells at generation 0 for life.
    pub alive: Vec<(u32, u32)>,
    /// Time between generations [t0]; 0 = three oscillation periods.
    pub generation_period: f64,
    pub generations: u32,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            template: String::new(),
            center: (0, 0),
            radius: 7.0,
            seed_cell: None,
            alive: vec![(2, 2), (3, 2), (2, 3), (3, 3)],
            generation_period: 0.0,
            generations: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub run: RunSection,
    pub units: UnitsSection,
    pub grid: GridSection,
    pub cell: CellSection,
    pub coupling: CouplingSection,
    pub observers: ObserversSection,
    pub scenario: ScenarioSection,
}

/// Re-scopes a validation message under a config section name.
fn scoped(section: &str, r: Result<(), Error>) -> Result<(), Error> {
    r.map_err(|e| match e {
        Error::Validation(m) => Error::validation(format!("{section}: {m}")),
        other => other,
    })
}

impl SimConfig {
    /// Parses and validates config text. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<SimConfig, Error> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| Error::parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<SimConfig, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse(format!("cannot read config {}: {e}", path.display())))?;
        SimConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.run.dt.is_finite() && self.run.dt > 0.0) {
            return Err(Error::validation("run.dt must be finite and > 0"));
        }
        if !(self.run.duration.is_finite() && self.run.duration >= 0.0) {
            return Err(Error::validation("run.duration must be finite and >= 0"));
        }
        if !(self.units.r0_ohms.is_finite() && self.units.r0_ohms > 0.0) {
            return Err(Error::validation("units.r0_ohms must be finite and > 0"));
        }
        if !(self.units.v0_volts.is_finite() && self.units.v0_volts > 0.0) {
            return Err(Error::validation("units.v0_volts must be finite and > 0"));
        }
        if !(self.units.c0_farads.is_finite() && self.units.c0_farads >= 0.0) {
            return Err(Error::validation("units.c0_farads must be finite and >= 0"));
        }
        if self.grid.width == 0 || self.grid.height == 0 {
            return Err(Error::validation("grid.width and grid.height must be >= 1"));
        }
        scoped("cell.device1", self.cell.device1.to_params().validate())?;
        scoped("cell.device2", self.cell.device2.to_params().validate())?;
        self.dd_config().validate()?;
        self.coupling_params().validate()?;
        if !(self.observers.snapshot_cadence.is_finite() && self.observers.snapshot_cadence >= 0.0)
        {
            return Err(Error::validation(
                "observers.snapshot_cadence must be finite and >= 0 (0 disables frames)",
            ));
        }
        match self.scenario.template.as_str() {
            "" | "vortex" | "wave" | "life" => {}
            other => {
                return Err(Error::validation(format!(
                    "scenario.template must be \"vortex\", \"wave\", \"life\", or empty, \
                     got \"{other}\""
                )))
            }
        }
        if !(self.scenario.radius.is_finite() && self.scenario.radius >= 0.0) {
            return Err(Error::validation("scenario.radius must be finite and >= 0"));
        }
        if !(self.scenario.generation_period.is_finite() && self.scenario.generation_period >= 0.0)
        {
            return Err(Error::validation(
                "scenario.generation_period must be finite and >= 0 (0 = automatic)",
            ));
        }
        if self.scenario.template == "life" {
            if self.scenario.generations == 0 {
                return Err(Error::validation("scenario.generations must be >= 1"));
            }
            if self.scenario.alive.is_empty() {
                return Err(Error::validation("scenario.alive must be nonempty"));
            }
        }
        Ok(())
    }

    /// Fills every context-dependent default in place: run duration, wave
    /// seed cell, and the life generation period. Idempotent; the result
    /// echoes fully explicit.
    pub fn resolve(&mut self) -> Result<(), Error> {
        if self.scenario.center == (0, 0) {
            self.scenario.center = ((self.grid.width / 2).max(1), (self.grid.height / 2).max(1));
        }
        if self.scenario.template == "wave" && self.scenario.seed_cell.is_none() {
            // Second column, middle row: (2, 15) on the default 30x30 grid.
            let x = self.grid.width.min(2);
            let y = (self.grid.height / 2).max(1);
            self.scenario.seed_cell = Some((x, y));
        }
        if self.scenario.template == "life" && self.scenario.generation_period == 0.0 {
            let period = self.dd_config().analytic_period()?.period();
            self.scenario.generation_period = 3.0 * period;
        }
        if self.run.duration == 0.0 {
            self.run.duration = match self.scenario.template.as_str() {
                "vortex" => 10.0,
                "wave" => 40.0,
                "life" => self.scenario.generations as f64 * self.scenario.generation_period,
                _ => 10.0,
            };
        }
        Ok(())
    }

    /// The config with every default written out, in the input format.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn dd_config(&self) -> DdConfig {
        DdConfig {
            device1: self.cell.device1.to_params(),
            device2: self.cell.device2.to_params(),
            v_dd: self.cell.v_dd,
            cap: self.cell.cap,
            rhs_model: self.run.rhs.to_model(),
        }
    }

    pub fn coupling_params(&self) -> CouplingParams {
        CouplingParams {
            r_on: self.coupling.r_on,
            r_off: self.coupling.r_off,
            c_couple: self.coupling.c_couple,
        }
    }

    pub fn boundary(&self) -> Boundary {
        match self.grid.boundary {
            BoundaryChoice::Open => Boundary::Open,
            BoundaryChoice::Periodic => Boundary::Periodic,
        }
    }

    /// A lattice with this config's cell, coupling, and boundary; all edges
    /// start resistive.
    pub fn lattice(&self) -> Result<Lattice, Error> {
        Lattice::build(
            self.grid.width,
            self.grid.height,
            self.dd_config(),
            self.coupling_params(),
            self.boundary(),
        )
    }

    pub fn observer_config(&self, lattice: &Lattice) -> Result<ObserverConfig, Error> {
        let mut trace_cells = Vec::with_capacity(self.observers.trace_cells.len());
        for &(x, y) in &self.observers.trace_cells {
            let i = scoped_idx("observers.trace_cells", lattice.index(x, y))?;
            trace_cells.push(i);
        }
        Ok(ObserverConfig {
            snapshot_cadence: if self.observers.snapshot_cadence > 0.0 {
                Some(self.observers.snapshot_cadence)
            } else {
                None
            },
            trace_cells,
            record_events: self.observers.record_events,
            record_supply: self.observers.record_supply,
        })
    }

    /// Builds the configured template scenario, or `None` for a plain grid
    /// run. Requires a resolved config.
    pub fn scenario(&self) -> Result<Option<Scenario>, Error> {
        let lattice = self.lattice()?;
        let sc = &self.scenario;
        let mut s = match sc.template.as_str() {
            "" => return Ok(None),
            "vortex" => {
                scoped_idx("scenario.center", lattice.index(sc.center.0, sc.center.1))?;
                template_vortex_on(lattice, sc.center, sc.radius)?
            }
            "wave" => {
                scoped_idx("scenario.center", lattice.index(sc.center.0, sc.center.1))?;
                let seed = match sc.seed_cell {
                    Some((x, y)) => {
                        scoped_idx("scenario.seed_cell", lattice.index(x, y))?;
                        Some((x, y))
                    }
                    None => Some((self.grid.width.min(2), (self.grid.height / 2).max(1))),
                };
                template_wave_on(lattice, sc.center, sc.radius, seed)?
            }
            "life" => {
                let region = Region::Cells(sc.alive.clone());
                let gp = if sc.generation_period > 0.0 {
                    Some(sc.generation_period)
                } else {
                    None
                };
                template_life_on(lattice, &region, gp, sc.generations)?
            }
            other => {
                return Err(Error::validation(format!(
                    "scenario.template must be \"vortex\", \"wave\", \"life\", or empty, \
                     got \"{other}\""
                )))
            }
        };
        s.dt = self.run.dt;
        if self.run.duration > 0.0 {
            s.duration = self.run.duration;
        }
        // Template observers pre-trace the cells of interest (seed, center,
        // a far corner); an explicit trace list in the config replaces them.
        let template_traces = std::mem::take(&mut s.observers.trace_cells);
        s.observers = self.observer_config(&s.lattice)?;
        if self.observers.trace_cells.is_empty() {
            s.observers.trace_cells = template_traces;
        }
        Ok(Some(s))
    }
}

fn scoped_idx(section: &str, r: Result<usize, Error>) -> Result<usize, Error> {
    r.map_err(|e| match e {
        Error::Validation(m) => Error::validation(format!("{section}: {m}")),
        other => other,
    })
}
