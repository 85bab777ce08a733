//! Subcommand implementations. Each produces its artifacts, prints any
//! human-readable diagnostics, and returns the machine-readable status line
//! that must be the final line on stdout.

use std::path::Path;
use std::time::Instant;

use oscnet_core::analysis::{order_parameter, supply_current, sync_time, CausalPhase, LockTarget};
use oscnet_core::cell::{CellTrace, DeviceSlot, DrConfig, OscillationReport};
use oscnet_core::lattice::{EdgeMode, Lattice};
use oscnet_core::netsim::{run_plain, Network, RunOutputs};
use oscnet_core::scenario::{run_scenario, AppliedEvent, LifeGeneration};
use oscnet_core::Error;

use crate::config::SimConfig;
use crate::output::{
    self, format_float, json_escape, CellPeriod, LockReport, PhaseSummary, RunSummary,
};
use crate::physical;

/// Which single-cell circuit `check` diagnoses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitKind {
    /// Two devices in series.
    Dd,
    /// One device over a series resistor.
    Dr,
}

fn print_report(report: &OscillationReport) {
    println!("oscillates: {}", report.oscillates);
    for b in &report.branches {
        println!(
            "  branch {}: settles toward v* = {:.6}, hands over at {:.6} ({}), {}",
            b.branch,
            b.v_star,
            b.exit_level,
            if b.exit_rising { "rising" } else { "falling" },
            if b.passes {
                "clears it"
            } else {
                "trapped short of it"
            },
        );
    }
}

/// Self-oscillation diagnostics for the configured cell. Reports trapping
/// branches; a non-oscillating configuration is a finding, not an error.
pub fn run_check(
    cfg: &SimConfig,
    circuit: CircuitKind,
    r_series: Option<f64>,
) -> Result<String, Error> {
    let (name, report) = match circuit {
        CircuitKind::Dd => {
            let cell = cfg.dd_config();
            cell.validate()?;
            ("dd", cell.oscillation_report())
        }
        CircuitKind::Dr => {
            let cell = DrConfig {
                device: cfg.cell.device1.to_params(),
                r_series: r_series.unwrap_or(1.0),
                v_dd: cfg.cell.v_dd,
                cap: cfg.cell.cap,
                rhs_model: cfg.run.rhs.to_model(),
            };
            cell.validate()?;
            ("dr", cell.oscillation_report())
        }
    };
    print_report(&report);
    let trapping: Vec<String> = report
        .trapping()
        .iter()
        .map(|b| format!("\"{b}\""))
        .collect();
    Ok(format!(
        "{{\"status\":\"ok\",\"command\":\"check\",\"circuit\":\"{name}\",\
         \"oscillates\":{},\"trapping\":[{}]}}",
        report.oscillates,
        trapping.join(",")
    ))
}

fn cell_events_csv(trace: &CellTrace) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("t,cell_x,cell_y,device,new_state\n");
    for e in &trace.events {
        let device = match e.slot {
            DeviceSlot::Top => 1,
            DeviceSlot::Bottom => 2,
        };
        let _ = writeln!(out, "{},1,1,{device},{}", format_float(e.t), e.to.code());
    }
    out
}

/// Single-cell run: trace, event log, and summary in `out`.
pub fn run_cell(cfg: &SimConfig, out: &Path) -> Result<String, Error> {
    let started = Instant::now();
    let cell = cfg.dd_config();
    cell.validate()?;
    // start at the cycle onset when the cell oscillates, otherwise relax
    // from zero so trapped configurations still produce a trace
    let (v0, states) = match cell.cycle_state(0.0) {
        Ok((v, s1, s2)) => (v, Some((s1, s2))),
        Err(Error::NotOscillating(_)) => (0.0, None),
        Err(e) => return Err(e),
    };
    let trace = cell.simulate(v0, states, cfg.run.dt, cfg.run.duration)?;

    output::ensure_dir(out)?;
    output::write_cell_trace(&out.join("trace.csv"), &trace)?;
    let events_text = cell_events_csv(&trace);
    let events_path = out.join("events.csv");
    std::fs::write(&events_path, &events_text)
        .map_err(|e| Error::numeric(format!("cannot write {}: {e}", events_path.display())))?;

    let onsets = trace.onsets();
    let supply_mean = if cfg.observers.record_supply {
        supply_current(&trace, cell.v_dd, |s| cell.supply_conductance(s)).ok()
    } else {
        None
    };
    let summary = RunSummary {
        command: "cell".into(),
        grid: (1, 1),
        dt: cfg.run.dt,
        duration: cfg.run.duration,
        n_steps: trace.times.len().saturating_sub(1),
        n_events: trace.events.len(),
        events_digest: output::fnv1a64(events_text.as_bytes()),
        periods: vec![CellPeriod {
            cell: (1, 1),
            n_onsets: onsets.len(),
            mean_period: trace.measured_period(1),
        }],
        phase: None,
        lock: None,
        supply_mean,
        cg_iterations: 0,
        max_rel_residual: 0.0,
        applied_events: Vec::new(),
        generations: Vec::new(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        config: cfg.echo(),
    };
    summary.write(&out.join("summary.json"))?;
    Ok(status_line("cell", out, &summary, 0))
}

fn phase_summary(
    events_on: bool,
    n: usize,
    outputs: &RunOutputs,
    t_end: f64,
) -> Option<PhaseSummary> {
    if !events_on {
        return None;
    }
    let mut causal = CausalPhase::new(n);
    causal.absorb(&outputs.events);
    let phases: Vec<f64> = (0..n).filter_map(|i| causal.phase_at(i, t_end)).collect();
    Some(PhaseSummary {
        n_defined: phases.len(),
        n_cells: n,
        order_parameter: if phases.is_empty() {
            None
        } else {
            Some(order_parameter(&phases))
        },
    })
}

fn lock_report(lattice: &Lattice, outputs: &RunOutputs) -> Option<LockReport> {
    if lattice.n() != 2 || lattice.edges().is_empty() || outputs.events.is_empty() {
        return None;
    }
    let (target, name) = match lattice.edge_mode(0) {
        EdgeMode::On => (LockTarget::InPhase, "in-phase"),
        EdgeMode::Off => (LockTarget::AntiPhase, "anti-phase"),
    };
    let cycles = sync_time(&outputs.events, 0, 1, target, 0.05 * std::f64::consts::TAU)
        .ok()
        .flatten();
    Some(LockReport {
        cells: (lattice.coords(0), lattice.coords(1)),
        target: name.into(),
        cycles,
    })
}

fn write_network_artifacts(
    cfg: &SimConfig,
    lattice: &Lattice,
    outputs: &RunOutputs,
    out: &Path,
) -> Result<(u64, usize), Error> {
    output::ensure_dir(out)?;
    output::write_net_traces(out, lattice, outputs)?;
    let frames = output::write_frames(out, lattice.width(), lattice.height(), &outputs.snapshots)?;
    let digest = output::write_events(&out.join("events.csv"), lattice, &outputs.events)?;
    if cfg.observers.record_supply {
        output::write_supply(
            &out.join("supply.csv"),
            &outputs.sample_times,
            &outputs.supply,
        )?;
    }
    Ok((digest, frames.len()))
}

#[allow(clippy::too_many_arguments)]
fn network_summary(
    command: &str,
    cfg: &SimConfig,
    lattice: &Lattice,
    outputs: &RunOutputs,
    duration: f64,
    digest: u64,
    applied: Vec<AppliedEvent>,
    generations: Vec<LifeGeneration>,
    started: Instant,
) -> RunSummary {
    let n = lattice.n();
    let mut periods = Vec::new();
    if cfg.observers.record_events {
        let mut causal = CausalPhase::new(n);
        causal.absorb(&outputs.events);
        for trace in &outputs.traces {
            let (x, y) = lattice.coords(trace.cell);
            let onsets = oscnet_core::analysis::onset_times(&outputs.events, trace.cell as u32);
            let mean_period = if onsets.len() >= 3 {
                Some((onsets[onsets.len() - 1] - onsets[1]) / (onsets.len() - 2) as f64)
            } else {
                None
            };
            periods.push(CellPeriod {
                cell: (x, y),
                n_onsets: onsets.len(),
                mean_period,
            });
        }
    }
    let supply_mean = if cfg.observers.record_supply && !outputs.supply.is_empty() {
        Some(outputs.supply.iter().sum::<f64>() / outputs.supply.len() as f64)
    } else {
        None
    };
    RunSummary {
        command: command.into(),
        grid: (lattice.width(), lattice.height()),
        dt: cfg.run.dt,
        duration,
        n_steps: outputs.n_steps,
        n_events: outputs.events.len(),
        events_digest: digest,
        periods,
        phase: phase_summary(cfg.observers.record_events, n, outputs, duration),
        lock: lock_report(lattice, outputs),
        supply_mean,
        cg_iterations: outputs.cg_iterations,
        max_rel_residual: outputs.max_rel_residual,
        applied_events: applied,
        generations,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        config: cfg.echo(),
    }
}

fn status_line(command: &str, out: &Path, summary: &RunSummary, n_frames: usize) -> String {
    format!(
        "{{\"status\":\"ok\",\"command\":\"{command}\",\"out\":\"{}\",\"n_steps\":{},\
         \"n_events\":{},\"n_frames\":{n_frames},\"wall_clock_seconds\":{}}}",
        json_escape(&out.display().to_string()),
        summary.n_steps,
        summary.n_events,
        format_float(summary.wall_clock_seconds),
    )
}

/// Plain network run on the configured grid: every edge resistive, all cells
/// started at the same cycle point.
pub fn run_grid(cfg: &SimConfig, out: &Path) -> Result<String, Error> {
    let started = Instant::now();
    let lattice = cfg.lattice()?;
    let observers = cfg.observer_config(&lattice)?;
    let mut state = lattice.uniform_cycle_state(0.25)?;
    let mut net = Network::new(lattice)?;
    let outputs = run_plain(
        &mut net,
        &mut state,
        cfg.run.dt,
        cfg.run.duration,
        &observers,
    )?;
    let (digest, n_frames) = write_network_artifacts(cfg, net.lattice(), &outputs, out)?;
    let summary = network_summary(
        "grid",
        cfg,
        net.lattice(),
        &outputs,
        cfg.run.duration,
        digest,
        Vec::new(),
        Vec::new(),
        started,
    );
    summary.write(&out.join("summary.json"))?;
    Ok(status_line("grid", out, &summary, n_frames))
}

/// Template scenario run (vortex, wave, or life).
pub fn run_scenario_cmd(cfg: &SimConfig, out: &Path) -> Result<String, Error> {
    let started = Instant::now();
    let scenario = cfg.scenario()?.ok_or_else(|| {
        Error::validation(
            "scenario.template is empty; name one in the config or pass --template \
             (plain grids run via the grid subcommand)",
        )
    })?;
    let (_final_state, outs) = run_scenario(&scenario)?;
    let lattice = &scenario.lattice;
    let (digest, n_frames) = write_network_artifacts(cfg, lattice, &outs.net, out)?;
    let summary = network_summary(
        "scenario",
        cfg,
        lattice,
        &outs.net,
        scenario.duration,
        digest,
        outs.applied,
        outs.generations,
        started,
    );
    summary.write(&out.join("summary.json"))?;
    Ok(status_line("scenario", out, &summary, n_frames))
}

/// Physical capacitance matching a target frequency.
pub fn run_calibrate(
    cfg: &SimConfig,
    r0_ohms: Option<f64>,
    frequency_hz: f64,
) -> Result<String, Error> {
    let r0 = r0_ohms.unwrap_or(cfg.units.r0_ohms);
    let cal = physical::calibrate(r0, frequency_hz, &cfg.dd_config())?;
    println!(
        "C = {:.6e} F gives the configured cell a {:.6e} s period ({:.6e} Hz) at R0 = {} ohm",
        cal.c_phys_farads, cal.period_seconds, cal.frequency_hz, cal.r0_ohms
    );
    Ok(format!(
        "{{\"status\":\"ok\",\"command\":\"calibrate\",\"c_phys_farads\":{},\
         \"period_normalized\":{},\"r0_ohms\":{},\"frequency_hz\":{}}}",
        format_float(cal.c_phys_farads),
        format_float(cal.period_normalized),
        format_float(cal.r0_ohms),
        format_float(cal.frequency_hz),
    ))
}
