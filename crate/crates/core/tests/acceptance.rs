//! Release gate: one test per shipping criterion, each printing a single
//! `ACCEPTANCE <id> PASS|FAIL` line with the measured values and the pinned
//! tolerance before asserting. Every threshold is fixed here in code.
//!
//! A FAIL line is a finding about the model as parameterized, not a skipped
//! check: the criteria encode the behavior the network is supposed to show,
//! and the suite reports honestly when the equations do not deliver it. The
//! known-red criteria (A06, A07, A08, A11) all trace back to two measured
//! properties of the default operating point, documented in the relevant
//! tests: the supply ordering (A08) and the stall of resistively glued
//! regions that border counter-phase neighborhoods (A06, A07, A11).

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use oscnet_core::analysis::{
    onset_times, order_parameter, supply_current, sync_time, CausalPhase, LockTarget,
};
use oscnet_core::cell::{BranchLabel, DdConfig, DrConfig, RhsModel};
use oscnet_core::lattice::{Boundary, CouplingParams, EdgeMode, Lattice};
use oscnet_core::netsim::{run_plain, NetEvent, Network, ObserverConfig};
use oscnet_core::scenario::{
    classify_anti_phase, run_scenario, template_life, template_vortex, template_wave, Region,
};

/// Lock tolerance used by every phase criterion: 5% of a full turn.
const PHASE_TOL: f64 = 0.05 * TAU;

fn verdict(id: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id} {tag}: {detail}");
    assert!(pass, "{id}: {detail}");
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

/// Quiet observer set: events only, which every analysis here is built from.
fn events_only() -> ObserverConfig {
    ObserverConfig {
        snapshot_cadence: None,
        trace_cells: Vec::new(),
        record_supply: false,
        record_events: true,
    }
}

// ---------------------------------------------------------------------------
// A01
// ---------------------------------------------------------------------------

#[test]
fn a01_single_cell_period_matches_the_closed_form_value() {
    let cfg = DdConfig::ideal();
    // Independent closed form: under the ideal-insulator supply model each
    // half-cycle is a single exponential relaxation through the hysteresis
    // window at the conducting-device rate, so the durations follow from the
    // window edges alone.
    let tau = cfg.cap * cfg.device1.r_low;
    let v_up = (cfg.v_dd - cfg.device1.v_low).min(cfg.device2.v_high);
    let v_down = (cfg.v_dd - cfg.device1.v_high).max(cfg.device2.v_low);
    let oracle = tau * (((cfg.v_dd - v_down) / (cfg.v_dd - v_up)).ln() + (v_up / v_down).ln());
    let engine = cfg.analytic_period().unwrap().period();
    assert!(
        (engine - oracle).abs() <= 1e-12,
        "engine closed form {engine} disagrees with the independent one {oracle}"
    );

    let started = Instant::now();
    let (v0, s1, s2) = cfg.cycle_state(0.0).unwrap();
    let trace = cfg.simulate(v0, Some((s1, s2)), 1e-3, 12.0).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let measured = trace.measured_period(1).expect("several full cycles");
    let rel = (measured - oracle).abs() / oracle;

    verdict(
        "A01",
        rel < 1e-3 && elapsed < 1.0,
        &format!(
            "single-cell period {measured:.9} vs closed form {oracle:.9}, \
             rel err {rel:.2e} (tol 1e-3), {elapsed:.2} s (limit 1 s)"
        ),
    );
}

// ---------------------------------------------------------------------------
// A02
// ---------------------------------------------------------------------------

#[test]
fn a02_oscillation_checker_classifies_the_known_operating_points() {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    for (name, cfg) in [
        ("half-bridge ideal-rhs", DdConfig::ideal()),
        ("half-bridge full-circuit", DdConfig::default()),
    ] {
        let rep = cfg.oscillation_report();
        pass &= rep.oscillates;
        notes.push(format!("{name} oscillates = {}", rep.oscillates));
    }

    // Device + load resistor at 1 R0 latches under both supply models: the
    // conducting branch settles at v_dd * r_s / (r_s + r_low), short of the
    // upper threshold.
    for (label, model) in [
        ("ideal", RhsModel::Ideal),
        ("full-circuit", RhsModel::Exact),
    ] {
        let cfg = DrConfig {
            rhs_model: model,
            ..DrConfig::default()
        };
        let rep = cfg.oscillation_report();
        let diag = rep
            .branches
            .iter()
            .find(|b| b.branch == BranchLabel::Metallic)
            .unwrap();
        let expect = cfg.v_dd * cfg.r_series / (cfg.r_series + cfg.device.r_low);
        let ok = !rep.oscillates
            && rep.trapping() == [BranchLabel::Metallic]
            && (diag.v_star - expect).abs() <= 1e-12
            && diag.v_star < diag.exit_level;
        pass &= ok;
        notes.push(format!(
            "single-device r_s=1 ({label}) latches with metallic v* = {:.6} < {:.0}",
            diag.v_star, diag.exit_level
        ));
    }

    let demo = DrConfig::demo();
    let rep = demo.oscillation_report();
    pass &= rep.oscillates;
    notes.push(format!(
        "single-device demo (r_s=2, ideal rhs) oscillates = {}",
        rep.oscillates
    ));

    // The demo classification is specific to the ideal-insulator rhs:
    // with the full circuit, the leak through the insulating device re-traps
    // the discharge branch at v_dd * r_s / (r_s + r_high).
    let exact2 = DrConfig {
        r_series: 2.0,
        rhs_model: RhsModel::Exact,
        ..DrConfig::default()
    };
    let rep = exact2.oscillation_report();
    let diag = rep
        .branches
        .iter()
        .find(|b| b.branch == BranchLabel::Insulating)
        .unwrap();
    let expect = exact2.v_dd * exact2.r_series / (exact2.r_series + exact2.device.r_high);
    pass &= !rep.oscillates && (diag.v_star - expect).abs() <= 1e-12;
    notes.push(format!(
        "full-circuit r_s=2 re-traps at insulating v* = {:.6} > 1",
        diag.v_star
    ));

    verdict("A02", pass, &notes.join("; "));
}

// ---------------------------------------------------------------------------
// A03
// ---------------------------------------------------------------------------

#[test]
fn a03_the_two_devices_stay_complementary_for_a_hundred_cycles() {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    for (name, cfg) in [
        ("ideal", DdConfig::ideal()),
        ("full-circuit", DdConfig::default()),
    ] {
        let period = cfg.analytic_period().unwrap().period();
        let (v0, s1, s2) = cfg.cycle_state(0.1).unwrap();
        let trace = cfg
            .simulate(v0, Some((s1, s2)), 1e-3, 100.5 * period)
            .unwrap();
        let bottom = trace.bottom.as_ref().unwrap();
        let first = trace.events.first().map(|e| e.t).unwrap_or(f64::INFINITY);
        let mut checked = 0usize;
        let mut complementary = 0usize;
        for ((&t, &s1), &s2) in trace.times.iter().zip(&trace.top).zip(bottom) {
            if t >= first {
                checked += 1;
                if s1 != s2 {
                    complementary += 1;
                }
            }
        }
        let cycles = trace.onsets().len();
        pass &= checked > 0 && complementary == checked && cycles >= 100;
        notes.push(format!(
            "{name}: {complementary}/{checked} post-first-toggle samples complementary \
             over {cycles} cycles"
        ));
    }

    verdict("A03", pass, &notes.join("; "));
}

// ---------------------------------------------------------------------------
// A04
// ---------------------------------------------------------------------------

/// Two-cell lattice with the single edge in `mode` and cell 1 shifted one
/// percent of a cycle ahead of cell 0.
fn perturbed_pair(mode: EdgeMode) -> (Network, oscnet_core::lattice::NetworkState) {
    let mut lat = Lattice::build(
        2,
        1,
        DdConfig::default(),
        CouplingParams::default(),
        Boundary::Open,
    )
    .unwrap();
    lat.set_edge_mode(0, mode).unwrap();
    let mut state = lat.uniform_cycle_state(0.25).unwrap();
    let (v, s1, s2) = lat.cell.cycle_state(0.26).unwrap();
    state.v[1] = v;
    state.states[1] = (s1, s2);
    (Network::new(lat).unwrap(), state)
}

#[test]
fn a04_two_cell_pairs_lock_to_the_coupling_preferred_relation() {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    for (name, mode, target) in [
        (
            "capacitive edge -> anti-phase",
            EdgeMode::Off,
            LockTarget::AntiPhase,
        ),
        (
            "resistive edge -> in-phase",
            EdgeMode::On,
            LockTarget::InPhase,
        ),
    ] {
        let started = Instant::now();
        let (mut net, mut state) = perturbed_pair(mode);
        let out = run_plain(&mut net, &mut state, 1e-3, 20.0, &events_only()).unwrap();
        let elapsed = started.elapsed().as_secs_f64();
        let cycles = sync_time(&out.events, 0, 1, target, PHASE_TOL).unwrap();
        let ok = matches!(cycles, Some(c) if c <= 10) && elapsed < 5.0;
        pass &= ok;
        notes.push(format!(
            "{name} locked within {:?} cycles (limit 10, tol 0.05 turns), {elapsed:.2} s (limit 5 s)",
            cycles
        ));
    }

    verdict("A04", pass, &notes.join("; "));
}

// ---------------------------------------------------------------------------
// A05
// ---------------------------------------------------------------------------

#[test]
fn a05_the_unperturbed_uniform_grid_is_an_exact_invariant_set() {
    let mut s = template_wave(30, 30, (15, 15), 7.0, None).unwrap();
    let period = s.lattice.cell.analytic_period().unwrap().period();
    s.duration = 52.0 * period;
    let (_, out) = run_scenario(&s).unwrap();

    let mut worst: f64 = 0.0;
    for snap in &out.net.snapshots {
        let lo = snap.v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = snap.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(hi - lo);
    }
    let cycles = onset_times(&out.net.events, 0).len();

    verdict(
        "A05",
        !out.net.snapshots.is_empty() && worst < 1e-12 && cycles >= 50,
        &format!(
            "max inter-cell voltage spread {worst:.2e} across {} snapshots over \
             {cycles} cycles (tol 1e-12, need >= 50 cycles)",
            out.net.snapshots.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// A06  (known red: the resistive sea stalls instead of carrying the wave)
// ---------------------------------------------------------------------------

/// Feeds `events` into `causal` up to time `t`; returns the next unfed index.
fn absorb_until(causal: &mut CausalPhase, events: &[NetEvent], mut k: usize, t: f64) -> usize {
    while k < events.len() && events[k].t <= t {
        causal.absorb(std::slice::from_ref(&events[k]));
        k += 1;
    }
    k
}

#[test]
fn a06_a_seeded_phase_flip_should_sweep_every_capacitive_cell() {
    let seed = (2u32, 15u32);
    let s = template_wave(30, 30, (15, 15), 7.0, Some(seed)).unwrap();
    let lat = s.lattice.clone();
    let duration = s.duration;
    let started = Instant::now();
    let (_, out) = run_scenario(&s).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    let n = lat.n();
    let disk = Region::Disk {
        center: (15, 15),
        radius: 7.0,
    }
    .cells(&lat)
    .unwrap();
    let in_disk = |i: usize| disk.binary_search(&i).is_ok();

    // Causal classification scan at the snapshot cadence, using the same
    // whole-map anti-phase rule the generation driver applies. A scan time
    // counts only once every cell has a defined phase (two onsets), exactly
    // as the driver requires.
    let mut causal = CausalPhase::new(n);
    let mut fed = 0usize;
    let mut first_anti: Vec<Option<f64>> = vec![None; n];
    let mut defined_scans = 0usize;
    for snap in &out.net.snapshots {
        fed = absorb_until(&mut causal, &out.net.events, fed, snap.t);
        if let Some(phases) = causal.phases_at(snap.t) {
            defined_scans += 1;
            for (i, alive) in classify_anti_phase(&phases).iter().enumerate() {
                if *alive && first_anti[i].is_none() {
                    first_anti[i] = Some(snap.t);
                }
            }
        }
    }
    absorb_until(&mut causal, &out.net.events, fed, f64::INFINITY);

    // Clause 1: classification reaches every capacitive cell.
    let classified = disk.iter().filter(|&&i| first_anti[i].is_some()).count();
    let all_classified = classified == disk.len();

    // Clause 2: first-classification times never decrease with graph
    // distance from the seed (per-distance bands must not overtake).
    let mut bands: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for &i in &disk {
        if let Some(t) = first_anti[i] {
            let (x, y) = lat.coords(i);
            let d = x.abs_diff(seed.0) + y.abs_diff(seed.1);
            let e = bands.entry(d).or_insert((t, t));
            e.0 = e.0.min(t);
            e.1 = e.1.max(t);
        }
    }
    let mut ordered = true;
    let mut running_max = f64::NEG_INFINITY;
    for (lo, hi) in bands.values() {
        ordered &= *lo >= running_max;
        running_max = running_max.max(*hi);
    }

    // Clause 3: the resistive surround stays coherent to the end.
    let sea: Vec<usize> = (0..n).filter(|&i| !in_disk(i)).collect();
    let sea_phases: Vec<f64> = sea
        .iter()
        .filter_map(|&i| causal.phase_at(i, duration))
        .collect();
    let sea_defined = sea_phases.len();
    let sea_r = if sea_defined > 0 {
        order_parameter(&sea_phases)
    } else {
        f64::NAN
    };
    let sea_coherent = sea_defined == sea.len() && sea_r > 0.99;

    verdict(
        "A06",
        all_classified && ordered && sea_coherent && elapsed < 60.0,
        &format!(
            "anti-phase classification reached {classified}/{} capacitive cells \
             (fully defined phase maps at {defined_scans}/{} scan times); distance \
             ordering held = {ordered}; resistive surround: {sea_defined}/{} cells \
             with defined phase, r = {sea_r:.3} (need > 0.99); {elapsed:.1} s (limit 60 s)",
            disk.len(),
            out.net.snapshots.len(),
            sea.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// A07  (known red: the surround stalls instead of staying coherent)
// ---------------------------------------------------------------------------

#[test]
fn a07_the_central_disk_should_drift_against_a_locked_surround() {
    let s = template_vortex(30, 30, (15, 15), 7.0).unwrap();
    let lat = s.lattice.clone();
    let (_, out) = run_scenario(&s).unwrap();

    let n = lat.n();
    let disk = Region::Disk {
        center: (15, 15),
        radius: 7.0,
    }
    .cells(&lat)
    .unwrap();
    let center = lat.index(15, 15).unwrap();
    let reference = lat.index(1, 1).unwrap();
    // Warm-up long enough for any healthy cell to log two onsets.
    let warmup = 4.0;

    let mut causal = CausalPhase::new(n);
    let mut fed = 0usize;
    let mut dphi: Vec<f64> = Vec::new();
    let mut pair_undefined = 0usize;
    let mut sea_r_min = f64::INFINITY;
    let mut sea_scans_undefined = 0usize;
    let sea: Vec<usize> = (0..n).filter(|i| disk.binary_search(i).is_err()).collect();
    let mut scans = 0usize;
    for snap in &out.net.snapshots {
        if snap.t < warmup {
            continue;
        }
        scans += 1;
        fed = absorb_until(&mut causal, &out.net.events, fed, snap.t);
        match (
            causal.phase_at(center, snap.t),
            causal.phase_at(reference, snap.t),
        ) {
            (Some(pc), Some(pr)) => dphi.push(wrap(pc - pr)),
            _ => pair_undefined += 1,
        }
        let phases: Vec<f64> = sea
            .iter()
            .filter_map(|&i| causal.phase_at(i, snap.t))
            .collect();
        if phases.len() == sea.len() {
            sea_r_min = sea_r_min.min(order_parameter(&phases));
        } else {
            sea_scans_undefined += 1;
        }
    }

    let std = if dphi.is_empty() {
        f64::NAN
    } else {
        let mean = dphi.iter().sum::<f64>() / dphi.len() as f64;
        (dphi.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dphi.len() as f64).sqrt()
    };
    let pass =
        pair_undefined == 0 && std > PHASE_TOL && sea_scans_undefined == 0 && sea_r_min > 0.99;

    verdict(
        "A07",
        pass,
        &format!(
            "center-vs-surround drift std {std:.3} rad over {}/{scans} defined samples \
             (need > {PHASE_TOL:.3}); surround reference finished with {} onsets; \
             surround fully defined at {}/{scans} samples, min r = {sea_r_min:.3} \
             (need > 0.99)",
            dphi.len(),
            causal.onset_count(reference),
            scans - sea_scans_undefined
        ),
    );
}

// ---------------------------------------------------------------------------
// A08  (known red: the half-bridge draws more than the demo, not less)
// ---------------------------------------------------------------------------

/// One exponential segment `v(t) = v* + (from - v*) e^{-t/tau}` with an
/// affine supply draw `g_supply * (v_dd - v)`.
struct Segment {
    v_star: f64,
    tau: f64,
    from: f64,
    to: f64,
    g_supply: f64,
}

impl Segment {
    fn time(&self) -> f64 {
        self.tau * ((self.from - self.v_star) / (self.to - self.v_star)).ln()
    }

    /// Closed-form integral of the supply current over the segment.
    fn supply_charge(&self, v_dd: f64) -> f64 {
        let t = self.time();
        let int_v = self.v_star * t + self.tau * (self.from - self.to);
        self.g_supply * (v_dd * t - int_v)
    }
}

fn mean_supply(segments: &[Segment], v_dd: f64) -> f64 {
    let t: f64 = segments.iter().map(Segment::time).sum();
    let q: f64 = segments.iter().map(|s| s.supply_charge(v_dd)).sum();
    q / t
}

#[test]
fn a08_the_half_bridge_should_draw_less_supply_current_than_the_demo() {
    // Closed-form segment integrals, set up independently from the circuit
    // laws of each piecewise branch.
    let dd = DdConfig::ideal();
    let g_m = 1.0 / dd.device1.r_low;
    let g_i = 1.0 / dd.device1.r_high;
    let dd_oracle = mean_supply(
        &[
            // top device conducting: charge toward v_dd, draw through r_low
            Segment {
                v_star: dd.v_dd,
                tau: dd.cap * dd.device1.r_low,
                from: 1.0,
                to: 2.0,
                g_supply: g_m,
            },
            // bottom device conducting: discharge toward 0, supply leaks
            // through the insulating top device
            Segment {
                v_star: 0.0,
                tau: dd.cap * dd.device2.r_low,
                from: 2.0,
                to: 1.0,
                g_supply: g_i,
            },
        ],
        dd.v_dd,
    );

    let dr = DrConfig::demo();
    let b_m = 1.0 / dr.device.r_low + 1.0 / dr.r_series;
    let dr_oracle = mean_supply(
        &[
            // device conducting: node rises toward the divider point
            Segment {
                v_star: dr.v_dd / dr.device.r_low / b_m,
                tau: dr.cap / b_m,
                from: 1.0,
                to: 2.0,
                g_supply: 1.0 / dr.device.r_low,
            },
            // device insulating: node drains through the load resistor,
            // supply leaks through r_high
            Segment {
                v_star: 0.0,
                tau: dr.cap * dr.r_series,
                from: 2.0,
                to: 1.0,
                g_supply: 1.0 / dr.device.r_high,
            },
        ],
        dr.v_dd,
    );

    let (v0, s1, s2) = dd.cycle_state(0.0).unwrap();
    let trace = dd.simulate(v0, Some((s1, s2)), 1e-3, 12.0).unwrap();
    let dd_sim = supply_current(&trace, dd.v_dd, |s| dd.supply_conductance(s)).unwrap();

    let (v0, s) = dr.cycle_state(0.0).unwrap();
    let trace = dr.simulate(v0, Some(s), 1e-3, 25.0).unwrap();
    let dr_sim = supply_current(&trace, dr.v_dd, |s| dr.supply_conductance(s)).unwrap();

    let dd_rel = (dd_sim - dd_oracle).abs() / dd_oracle;
    let dr_rel = (dr_sim - dr_oracle).abs() / dr_oracle;
    let agree = dd_rel < 1e-3 && dr_rel < 1e-3;
    let ordered = dd_sim < dr_sim;

    verdict(
        "A08",
        agree && ordered,
        &format!(
            "mean supply draw: half-bridge {dd_sim:.6} I0 vs single-device demo \
             {dr_sim:.6} I0, ordering half-bridge < demo = {ordered}; closed-form \
             agreement {dd_rel:.1e} / {dr_rel:.1e} (tol 1e-3)"
        ),
    );
}

// ---------------------------------------------------------------------------
// A09
// ---------------------------------------------------------------------------

/// Locked anti-phase pair period, averaged over cycles 6-16 (the lock
/// transient is over well before cycle 6; the locked period is near 2.06).
fn pair_period(dt: f64) -> f64 {
    let (mut net, mut state) = perturbed_pair(EdgeMode::Off);
    let out = run_plain(&mut net, &mut state, dt, 40.0, &events_only()).unwrap();
    let onsets = onset_times(&out.events, 0);
    assert!(
        onsets.len() >= 17,
        "only {} onsets at dt {dt}",
        onsets.len()
    );
    (onsets[16] - onsets[6]) / 10.0
}

#[test]
fn a09_capacitance_solves_are_certified_and_first_order_convergent() {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    // Matrix certificates on every built-in coupling map.
    let lattices = vec![
        (
            "plain",
            Lattice::build(
                30,
                30,
                DdConfig::default(),
                CouplingParams::default(),
                Boundary::Open,
            )
            .unwrap(),
        ),
        (
            "vortex",
            template_vortex(30, 30, (15, 15), 7.0).unwrap().lattice,
        ),
        (
            "wave",
            template_wave(30, 30, (15, 15), 7.0, Some((2, 15)))
                .unwrap()
                .lattice,
        ),
        (
            "life",
            template_life(
                9,
                9,
                &Region::Rect {
                    x0: 4,
                    y0: 4,
                    x1: 5,
                    y1: 5,
                },
                None,
                3,
            )
            .unwrap()
            .lattice,
        ),
    ];
    let mut min_margin = f64::INFINITY;
    for (name, lat) in &lattices {
        let m = lat.cap_matrix().unwrap();
        let n = lat.n();
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if j != i {
                    off += m.entry(i, j).abs();
                }
            }
            min_margin = min_margin.min(m.entry(i, i) - off);
        }
        if !m.has_factorization() {
            pass = false;
            notes.push(format!("{name}: positive-definite factorization failed"));
        }
    }
    // Row sums exceed the off-diagonal mass by exactly the cell capacitance.
    let c_cell = DdConfig::default().cap;
    pass &= min_margin >= c_cell * (1.0 - 1e-12);
    notes.push(format!(
        "diagonal dominance margin {min_margin:.6} on all 4 coupling maps (need {c_cell})"
    ));

    // Per-step solve residual over a live run.
    let s = template_wave(30, 30, (15, 15), 7.0, Some((2, 15))).unwrap();
    let mut net = Network::new(s.lattice.clone()).unwrap();
    let mut state = s.initial.clone();
    let out = run_plain(&mut net, &mut state, 1e-3, 2.0, &events_only()).unwrap();
    pass &= out.max_rel_residual <= 1e-10;
    notes.push(format!(
        "max relative solve residual {:.1e} over {} steps (limit 1e-10)",
        out.max_rel_residual, out.n_steps
    ));

    // First-order convergence of the measured pair period against a
    // reference at one eighth of the base step.
    let p_ref = pair_period(2.5e-4);
    let e_full = (pair_period(2e-3) - p_ref).abs();
    let e_half = (pair_period(1e-3) - p_ref).abs();
    pass &= e_half <= 0.5 * e_full;
    notes.push(format!(
        "period error {e_full:.2e} at dt 2e-3 vs {e_half:.2e} at dt 1e-3 \
         (ratio {:.2}, need <= 0.50)",
        e_half / e_full
    ));

    verdict("A09", pass, &notes.join("; "));
}

// ---------------------------------------------------------------------------
// A10
// ---------------------------------------------------------------------------

fn events_bitwise_equal(a: &[NetEvent], b: &[NetEvent]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.t.to_bits() == y.t.to_bits() && x.cell == y.cell && x.slot == y.slot && x.to == y.to
        })
}

#[test]
fn a10_runs_are_reproducible_and_reduce_to_isolated_cells() {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    // Bitwise repeatability of a full scenario run.
    let s1 = template_wave(8, 8, (4, 4), 3.0, Some((2, 4))).unwrap();
    let s2 = template_wave(8, 8, (4, 4), 3.0, Some((2, 4))).unwrap();
    let (end1, out1) = run_scenario(&s1).unwrap();
    let (end2, out2) = run_scenario(&s2).unwrap();
    let repeatable = events_bitwise_equal(&out1.net.events, &out2.net.events)
        && end1
            .v
            .iter()
            .zip(&end2.v)
            .all(|(a, b)| a.to_bits() == b.to_bits())
        && out1.net.snapshots.len() == out2.net.snapshots.len()
        && out1
            .net
            .snapshots
            .iter()
            .zip(&out2.net.snapshots)
            .all(|(a, b)| {
                a.v.iter()
                    .zip(&b.v)
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            });
    pass &= repeatable;
    notes.push(format!(
        "repeated runs bitwise identical = {repeatable} ({} events)",
        out1.net.events.len()
    ));

    // A one-cell lattice must follow the standalone cell integrator step by
    // step: after each network step, the closed-form branch solution started
    // from the pre-step state must land within 1e-9 of the network voltage.
    let lat = Lattice::build(
        1,
        1,
        DdConfig::default(),
        CouplingParams::default(),
        Boundary::Open,
    )
    .unwrap();
    let cell = lat.cell;
    let mut state = lat.uniform_cycle_state(0.25).unwrap();
    let mut net = Network::new(lat).unwrap();
    let dt = 1e-5;
    let mut worst_single = 0.0f64;
    let mut ev = Vec::new();
    for _ in 0..200_000 {
        let v0 = state.v[0];
        let s0 = state.states[0];
        ev.clear();
        net.step(&mut state, dt, &mut ev).unwrap();
        let reference = cell.simulate(v0, Some(s0), dt, dt).unwrap();
        worst_single = worst_single.max((state.v[0] - reference.v[1]).abs());
    }
    pass &= worst_single <= 1e-9;
    notes.push(format!(
        "one-cell lattice vs cell integrator, worst per-step gap {worst_single:.1e} \
         over 200k steps (tol 1e-9)"
    ));

    // With zero link capacitance and mode-independent link resistance, a
    // uniformly started grid reduces to independent per-cell runs: the
    // links see no voltage difference, so they carry no current.
    let coupling = CouplingParams {
        r_on: 10.0,
        r_off: 10.0,
        c_couple: 0.0,
    };
    let lat = Lattice::build(3, 3, DdConfig::default(), coupling, Boundary::Open).unwrap();
    let cell = lat.cell;
    let mut state = lat.uniform_cycle_state(0.25).unwrap();
    let mut net = Network::new(lat).unwrap();
    let mut worst_grid = 0.0f64;
    for _ in 0..100_000 {
        let v0 = state.v[0];
        let s0 = state.states[0];
        ev.clear();
        net.step(&mut state, dt, &mut ev).unwrap();
        let reference = cell.simulate(v0, Some(s0), dt, dt).unwrap();
        for &v in &state.v {
            worst_grid = worst_grid.max((v - reference.v[1]).abs());
        }
    }
    pass &= worst_grid <= 1e-9;
    notes.push(format!(
        "degenerate-coupling 3x3 vs per-cell runs, worst per-step gap {worst_grid:.1e} \
         over 100k steps (tol 1e-9)"
    ));

    verdict("A10", pass, &notes.join("; "));
}

// ---------------------------------------------------------------------------
// A11  (known red: stalled cells abort classification at the first boundary)
// ---------------------------------------------------------------------------

/// Independent rule oracle on the bounded grid, coordinates 1-based.
fn conway_oracle(w: i64, h: i64, alive: &BTreeSet<(i64, i64)>) -> BTreeSet<(i64, i64)> {
    let mut next = BTreeSet::new();
    for x in 1..=w {
        for y in 1..=h {
            let mut n = 0;
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    if (dx, dy) != (0, 0) && alive.contains(&(x + dx, y + dy)) {
                        n += 1;
                    }
                }
            }
            let keep = if alive.contains(&(x, y)) {
                n == 2 || n == 3
            } else {
                n == 3
            };
            if keep {
                next.insert((x, y));
            }
        }
    }
    next
}

#[test]
fn a11_life_generations_should_follow_the_pure_rule_oracle() {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    for (name, cells) in [
        ("2x2 block", vec![(4, 4), (5, 4), (4, 5), (5, 5)]),
        ("blinker", vec![(4, 4), (5, 4), (6, 4)]),
    ] {
        let region = Region::Cells(cells.iter().map(|&(x, y)| (x as u32, y as u32)).collect());
        let s = template_life(9, 9, &region, None, 5).unwrap();
        let lat = s.lattice.clone();
        match run_scenario(&s) {
            Err(e) => {
                pass = false;
                notes.push(format!("{name}: aborted before any generation ({e})"));
            }
            Ok((_, out)) => {
                let mut oracle: BTreeSet<(i64, i64)> =
                    cells.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
                let mut ok = out.generations.len() >= 5;
                for gen in &out.generations {
                    let classified: BTreeSet<(i64, i64)> = gen
                        .classified
                        .iter()
                        .map(|&i| {
                            let (x, y) = lat.coords(i);
                            (x as i64, y as i64)
                        })
                        .collect();
                    ok &= classified == oracle;
                    oracle = conway_oracle(9, 9, &oracle);
                    let actuated: BTreeSet<(i64, i64)> = gen
                        .actuated
                        .iter()
                        .map(|&i| {
                            let (x, y) = lat.coords(i);
                            (x as i64, y as i64)
                        })
                        .collect();
                    ok &= actuated == oracle;
                }
                pass &= ok;
                notes.push(format!(
                    "{name}: {} generations, sequence matches oracle = {ok}",
                    out.generations.len()
                ));
            }
        }
    }

    verdict("A11", pass, &notes.join("; "));
}
