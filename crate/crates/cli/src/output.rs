//! Run artifacts: CSV traces, voltage-map frames, the transition-event log,
//! the supply record, and the JSON run summary.
//!
//! Every float is written as decimal scientific notation with 17 significant
//! digits, so each value round-trips to the exact bit pattern. Artifacts are
//! byte-deterministic for a given config; the one exception is the summary's
//! `wall_clock_seconds` line, which comparisons must strip.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use oscnet_core::cell::{CellTrace, DeviceSlot};
use oscnet_core::lattice::Lattice;
use oscnet_core::netsim::{NetEvent, RunOutputs, Snapshot};
use oscnet_core::scenario::{AppliedEvent, LifeGeneration};
use oscnet_core::Error;

/// 17 significant digits: exact round-trip for every f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::numeric(format!("cannot write {}: {e}", path.display()))
}

/// Creates `dir` (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// FNV-1a 64-bit content digest; stable and dependency-free.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Single-cell trace CSV: `t,v,state1,state2`, states 0 = insulating,
/// 1 = metallic. Single-device cells leave `state2` empty.
pub fn write_cell_trace(path: &Path, trace: &CellTrace) -> Result<(), Error> {
    let mut out = String::with_capacity(trace.times.len() * 48 + 32);
    out.push_str("t,v,state1,state2\n");
    for k in 0..trace.times.len() {
        let s2 = trace
            .bottom
            .as_ref()
            .map(|b| b[k].code().to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{s2}",
            format_float(trace.times[k]),
            format_float(trace.v[k]),
            trace.top[k].code(),
        );
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Per-traced-cell network CSVs named `trace_<x>_<y>.csv`, same schema as
/// [`write_cell_trace`].
pub fn write_net_traces(
    dir: &Path,
    lattice: &Lattice,
    outputs: &RunOutputs,
) -> Result<Vec<PathBuf>, Error> {
    let mut written = Vec::new();
    for trace in &outputs.traces {
        let (x, y) = lattice.coords(trace.cell);
        let path = dir.join(format!("trace_{x}_{y}.csv"));
        let mut out = String::with_capacity(trace.v.len() * 48 + 32);
        out.push_str("t,v,state1,state2\n");
        for k in 0..trace.v.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_float(outputs.sample_times[k]),
                format_float(trace.v[k]),
                trace.s1[k].code(),
                trace.s2[k].code(),
            );
        }
        fs::write(&path, out).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Frame label: fixed six decimals, trailing zeros trimmed.
fn frame_time_label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

/// Voltage-map frames `frame_<index>_<time>.csv`: one row per y line (y = 1
/// first), one column per x position, no header.
pub fn write_frames(
    dir: &Path,
    width: u32,
    height: u32,
    snapshots: &[Snapshot],
) -> Result<Vec<PathBuf>, Error> {
    let mut written = Vec::new();
    for (idx, snap) in snapshots.iter().enumerate() {
        let path = dir.join(format!("frame_{idx:04}_{}.csv", frame_time_label(snap.t)));
        let mut out = String::with_capacity(snap.v.len() * 24 + 16);
        for y in 0..height as usize {
            for x in 0..width as usize {
                if x > 0 {
                    out.push(',');
                }
                out.push_str(&format_float(snap.v[y * width as usize + x]));
            }
            out.push('\n');
        }
        fs::write(&path, out).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Transition-event CSV: `t,cell_x,cell_y,device,new_state` with device 1 =
/// top (supply side), 2 = bottom (ground side).
pub fn render_events(lattice: &Lattice, events: &[NetEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 40 + 32);
    out.push_str("t,cell_x,cell_y,device,new_state\n");
    for e in events {
        let (x, y) = lattice.coords(e.cell as usize);
        let device = match e.slot {
            DeviceSlot::Top => 1,
            DeviceSlot::Bottom => 2,
        };
        let _ = writeln!(
            out,
            "{},{x},{y},{device},{}",
            format_float(e.t),
            e.to.code()
        );
    }
    out
}

pub fn write_events(path: &Path, lattice: &Lattice, events: &[NetEvent]) -> Result<u64, Error> {
    let text = render_events(lattice, events);
    let digest = fnv1a64(text.as_bytes());
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    Ok(digest)
}

/// Supply-current record `t,i_supply` [I0].
pub fn write_supply(path: &Path, times: &[f64], supply: &[f64]) -> Result<(), Error> {
    let mut out = String::with_capacity(supply.len() * 40 + 16);
    out.push_str("t,i_supply\n");
    for (t, i) in times.iter().zip(supply) {
        let _ = writeln!(out, "{},{}", format_float(*t), format_float(*i));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// run summary
// ---------------------------------------------------------------------------

/// Period measurement for one traced cell, from its onset events.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPeriod {
    pub cell: (u32, u32),
    pub n_onsets: usize,
    /// Mean onset spacing, first interval skipped; absent below 3 onsets.
    pub mean_period: Option<f64>,
}

/// Lock measurement for two-cell runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LockReport {
    pub cells: ((u32, u32), (u32, u32)),
    /// "in-phase" or "anti-phase", from the pair's edge mode.
    pub target: String,
    /// Reference-cell cycles until the phase difference stays within
    /// 0.05 of a turn; absent when the run never locks.
    pub cycles: Option<usize>,
}

/// End-of-run collective phase measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary {
    /// Cells with a defined phase at the end (two or more onsets).
    pub n_defined: usize,
    pub n_cells: usize,
    /// Kuramoto order parameter over the defined phases; absent when none.
    pub order_parameter: Option<f64>,
}

/// Machine-readable account of one run. Every metric is recomputable from
/// the emitted CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub command: String,
    pub grid: (u32, u32),
    pub dt: f64,
    pub duration: f64,
    pub n_steps: usize,
    pub n_events: usize,
    /// FNV-1a 64 over the bytes of events.csv.
    pub events_digest: u64,
    pub periods: Vec<CellPeriod>,
    pub phase: Option<PhaseSummary>,
    /// Present only for two-cell runs.
    pub lock: Option<LockReport>,
    /// Raw mean of the supply samples [I0]; absent when not recorded.
    pub supply_mean: Option<f64>,
    pub cg_iterations: usize,
    pub max_rel_residual: f64,
    pub applied_events: Vec<AppliedEvent>,
    pub generations: Vec<LifeGeneration>,
    pub wall_clock_seconds: f64,
    /// Fully resolved config echo (TOML).
    pub config: String,
}

pub fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn json_opt_f64(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_else(|| "null".into())
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut o = String::with_capacity(2048);
        o.push_str("{\n");
        let _ = writeln!(o, "  \"schema\": \"oscnet-run-summary/1\",");
        let _ = writeln!(o, "  \"command\": \"{}\",", json_escape(&self.command));
        let _ = writeln!(o, "  \"grid\": [{}, {}],", self.grid.0, self.grid.1);
        let _ = writeln!(o, "  \"dt\": {},", format_float(self.dt));
        let _ = writeln!(o, "  \"duration\": {},", format_float(self.duration));
        let _ = writeln!(o, "  \"n_steps\": {},", self.n_steps);
        let _ = writeln!(o, "  \"n_events\": {},", self.n_events);
        let _ = writeln!(o, "  \"events_digest\": \"{:016x}\",", self.events_digest);
        o.push_str("  \"periods\": [");
        for (k, p) in self.periods.iter().enumerate() {
            if k > 0 {
                o.push(',');
            }
            let _ = write!(
                o,
                "\n    {{\"cell\": [{}, {}], \"n_onsets\": {}, \"mean_period\": {}}}",
                p.cell.0,
                p.cell.1,
                p.n_onsets,
                json_opt_f64(p.mean_period)
            );
        }
        o.push_str(if self.periods.is_empty() {
            "],\n"
        } else {
            "\n  ],\n"
        });
        match &self.phase {
            Some(ph) => {
                let _ = writeln!(
                    o,
                    "  \"phase\": {{\"n_defined\": {}, \"n_cells\": {}, \"order_parameter\": {}}},",
                    ph.n_defined,
                    ph.n_cells,
                    json_opt_f64(ph.order_parameter)
                );
            }
            None => {
                let _ = writeln!(o, "  \"phase\": null,");
            }
        }
        match &self.lock {
            Some(l) => {
                let cycles = l
                    .cycles
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "null".into());
                let _ = writeln!(
                    o,
                    "  \"lock\": {{\"cells\": [[{}, {}], [{}, {}]], \"target\": \"{}\", \
                     \"cycles\": {cycles}}},",
                    l.cells.0 .0,
                    l.cells.0 .1,
                    l.cells.1 .0,
                    l.cells.1 .1,
                    json_escape(&l.target)
                );
            }
            None => {
                let _ = writeln!(o, "  \"lock\": null,");
            }
        }
        let _ = writeln!(o, "  \"supply_mean\": {},", json_opt_f64(self.supply_mean));
        let _ = writeln!(o, "  \"cg_iterations\": {},", self.cg_iterations);
        let _ = writeln!(
            o,
            "  \"max_rel_residual\": {},",
            format_float(self.max_rel_residual)
        );
        o.push_str("  \"applied_events\": [");
        for (k, a) in self.applied_events.iter().enumerate() {
            if k > 0 {
                o.push(',');
            }
            let _ = write!(
                o,
                "\n    {{\"t\": {}, \"label\": \"{}\"}}",
                format_float(a.t),
                json_escape(&a.label)
            );
        }
        o.push_str(if self.applied_events.is_empty() {
            "],\n"
        } else {
            "\n  ],\n"
        });
        o.push_str("  \"generations\": [");
        for (k, g) in self.generations.iter().enumerate() {
            if k > 0 {
                o.push(',');
            }
            let _ = write!(
                o,
                "\n    {{\"t\": {}, \"n_classified\": {}, \"n_actuated\": {}}}",
                format_float(g.t),
                g.classified.len(),
                g.actuated.len()
            );
        }
        o.push_str(if self.generations.is_empty() {
            "],\n"
        } else {
            "\n  ],\n"
        });
        let _ = writeln!(
            o,
            "  \"wall_clock_seconds\": {},",
            format_float(self.wall_clock_seconds)
        );
        let _ = writeln!(o, "  \"config\": \"{}\"", json_escape(&self.config));
        o.push('}');
        o
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        fs::write(path, self.to_json()).map_err(|e| io_err(path, e))
    }
}
