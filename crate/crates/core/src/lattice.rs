//! 2-D grid of identical two-device cells with switchable nearest-neighbor
//! coupling.
//!
//! Every pair of adjacent cells is joined by one link carrying a fixed
//! coupling capacitor plus a resistor that toggles between an On (low) and an
//! Off (high) resistance. Public cell coordinates are 1-based, `(x, y)` with
//! `x` in `1..=width` and `y` in `1..=height`; storage is row-major with
//! index `(y - 1) * width + (x - 1)`.

use serde::{Deserialize, Serialize};

use crate::capmat::CapMatrix;
use crate::cell::DdConfig;
use crate::device::DeviceState;
use crate::error::Error;

/// Switchable resistive state of one coupling link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeMode {
    /// Low resistance: resistive coupling dominates (drives in-phase).
    On,
    /// High resistance: the fixed capacitor dominates (drives anti-phase).
    Off,
}

/// Link parameters shared by every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    /// Link resistance in the On state [R0].
    pub r_on: f64,
    /// Link resistance in the Off state [R0].
    pub r_off: f64,
    /// Fixed link capacitance [C0].
    pub c_couple: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        CouplingParams {
            r_on: 0.1,
            r_off: 10.0,
            c_couple: 0.25,
        }
    }
}

impl CouplingParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.r_on > 0.0 && self.r_on.is_finite()) {
            return Err(Error::validation("coupling.r_on must be finite and > 0"));
        }
        // r_on == r_off is allowed: it degenerates the switch into a fixed
        // resistor, which the reduction tests rely on.
        if !(self.r_off >= self.r_on && self.r_off.is_finite()) {
            return Err(Error::validation(
                "coupling.r_off must be finite and >= coupling.r_on",
            ));
        }
        if !(self.c_couple >= 0.0 && self.c_couple.is_finite()) {
            return Err(Error::validation(
                "coupling.c_couple must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn conductance(&self, mode: EdgeMode) -> f64 {
        match mode {
            EdgeMode::On => 1.0 / self.r_on,
            EdgeMode::Off => 1.0 / self.r_off,
        }
    }
}

/// Grid boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Boundary {
    /// Border cells simply have fewer neighbors.
    #[default]
    Open,
    /// Wrap in both directions (symmetry testing); wrap links are skipped
    /// along dimensions of size <= 2 where they would duplicate an edge.
    Periodic,
}

/// One undirected coupling link between storage indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
}

/// Per-cell voltage and device states of the whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    pub v: Vec<f64>,
    pub states: Vec<(DeviceState, DeviceState)>,
}

impl NetworkState {
    /// Every cell at the same voltage and state pair.
    pub fn uniform(n: usize, v: f64, states: (DeviceState, DeviceState)) -> Self {
        NetworkState {
            t: 0.0,
            v: vec![v; n],
            states: vec![states; n],
        }
    }

    /// Largest pairwise voltage difference.
    pub fn voltage_spread(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.v {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }
}

#[derive(Debug, Clone)]
pub struct Lattice {
    width: u32,
    height: u32,
    pub cell: DdConfig,
    pub coupling: CouplingParams,
    boundary: Boundary,
    edges: Vec<Edge>,
    modes: Vec<EdgeMode>,
    /// Per-cell `(neighbor index, edge index)` lists, sorted by neighbor
    /// index: accumulation order is fixed, keeping runs deterministic.
    adjacency: Vec<Vec<(u32, u32)>>,
}

impl Lattice {
    /// Builds a grid with every edge On.
    pub fn build(
        width: u32,
        height: u32,
        cell: DdConfig,
        coupling: CouplingParams,
        boundary: Boundary,
    ) -> Result<Self, Error> {
        if width == 0 || height == 0 {
            return Err(Error::validation("grid dimensions must be at least 1x1"));
        }
        cell.validate()?;
        coupling.validate()?;
        let n = (width as usize) * (height as usize);
        let mut edges = Vec::new();
        let idx = |x: u32, y: u32| y * width + x;
        for y in 0..height {
            for x in 0..width {
                let i = idx(x, y);
                if x + 1 < width {
                    edges.push(Edge {
                        a: i,
                        b: idx(x + 1, y),
                    });
                } else if boundary == Boundary::Periodic && width > 2 {
                    edges.push(Edge { a: idx(0, y), b: i });
                }
                if y + 1 < height {
                    edges.push(Edge {
                        a: i,
                        b: idx(x, y + 1),
                    });
                } else if boundary == Boundary::Periodic && height > 2 {
                    edges.push(Edge { a: idx(x, 0), b: i });
                }
            }
        }
        for e in &mut edges {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        let mut adjacency: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            adjacency[e.a as usize].push((e.b, k as u32));
            adjacency[e.b as usize].push((e.a, k as u32));
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        let modes = vec![EdgeMode::On; edges.len()];
        Ok(Lattice {
            width,
            height,
            cell,
            coupling,
            boundary,
            edges,
            modes,
            adjacency,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn n(&self) -> usize {
        (self.width as usize) * (self.height as usize)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Storage index of 1-based grid coordinates.
    pub fn index(&self, x: u32, y: u32) -> Result<usize, Error> {
        if x == 0 || y == 0 || x > self.width || y > self.height {
            return Err(Error::validation(format!(
                "cell ({x}, {y}) outside the {}x{} grid",
                self.width, self.height
            )));
        }
        Ok(((y - 1) * self.width + (x - 1)) as usize)
    }

    /// 1-based grid coordinates of a storage index.
    pub fn coords(&self, i: usize) -> (u32, u32) {
        let x = (i as u32) % self.width + 1;
        let y = (i as u32) / self.width + 1;
        (x, y)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_mode(&self, edge: usize) -> EdgeMode {
        self.modes[edge]
    }

    pub fn set_edge_mode(&mut self, edge: usize, mode: EdgeMode) -> Result<(), Error> {
        if edge >= self.edges.len() {
            return Err(Error::validation(format!("unknown edge index {edge}")));
        }
        self.modes[edge] = mode;
        Ok(())
    }

    /// Edge index joining two cells given by storage index, if adjacent.
    pub fn edge_between(&self, i: usize, j: usize) -> Option<usize> {
        self.adjacency[i]
            .iter()
            .find(|(nbr, _)| *nbr as usize == j)
            .map(|(_, e)| *e as usize)
    }

    /// Sets every edge whose endpoints both satisfy `member`.
    pub fn set_edges_within<F: Fn(usize) -> bool>(&mut self, member: F, mode: EdgeMode) {
        for (k, e) in self.edges.iter().enumerate() {
            if member(e.a as usize) && member(e.b as usize) {
                self.modes[k] = mode;
            }
        }
    }

    /// Sets every edge with at least one endpoint satisfying `member` to
    /// `mode` and every other edge to `other`.
    pub fn partition_edges_incident<F: Fn(usize) -> bool>(
        &mut self,
        member: F,
        mode: EdgeMode,
        other: EdgeMode,
    ) {
        for (k, e) in self.edges.iter().enumerate() {
            self.modes[k] = if member(e.a as usize) || member(e.b as usize) {
                mode
            } else {
                other
            };
        }
    }

    pub fn count_edges(&self, mode: EdgeMode) -> usize {
        self.modes.iter().filter(|&&m| m == mode).count()
    }

    /// Assembles the capacitance matrix for the current topology.
    pub fn cap_matrix(&self) -> Result<CapMatrix, Error> {
        let pairs: Vec<(u32, u32)> = self.edges.iter().map(|e| (e.a, e.b)).collect();
        CapMatrix::assemble(self.n(), self.cell.cap, self.coupling.c_couple, &pairs)
    }

    /// Right-hand side of `M v' = f`: per-cell branch currents plus resistive
    /// coupling currents. Capacitive coupling lives in M, not here.
    pub fn network_rhs(&self, state: &NetworkState, f: &mut [f64]) {
        debug_assert_eq!(state.v.len(), self.n());
        debug_assert_eq!(f.len(), self.n());
        for i in 0..self.n() {
            let vi = state.v[i];
            let (s1, s2) = state.states[i];
            let mut acc = self.cell.branch_current(vi, s1, s2);
            for &(j, e) in &self.adjacency[i] {
                let g = self.coupling.conductance(self.modes[e as usize]);
                acc += g * (state.v[j as usize] - vi);
            }
            f[i] = acc;
        }
    }

    /// Conservative per-node conductance bound used for the explicit-step
    /// stability check: cell branch plus twice the sum of incident link
    /// conductances at their On value.
    pub fn max_node_conductance(&self) -> f64 {
        let g_cell = self.cell.max_branch_conductance();
        let g_link = self.coupling.conductance(EdgeMode::On);
        let max_deg = self
            .adjacency
            .iter()
            .map(|row| row.len())
            .max()
            .unwrap_or(0) as f64;
        g_cell + 2.0 * max_deg * g_link
    }

    /// Uniform on-cycle initial condition at cycle fraction `frac`.
    pub fn uniform_cycle_state(&self, frac: f64) -> Result<NetworkState, Error> {
        let (v, s1, s2) = self.cell.cycle_state(frac)?;
        Ok(NetworkState::uniform(self.n(), v, (s1, s2)))
    }

    /// Reflects one cell to the opposite cycle phase: the voltage maps to
    /// `v_low + v_high - v` (thresholds of the bottom device) and the device
    /// states swap. For identical devices this lands exactly on the limit
    /// cycle half a period away.
    pub fn reflect_cell(&self, state: &mut NetworkState, i: usize) {
        let d = &self.cell.device2;
        state.v[i] = d.v_low + d.v_high - state.v[i];
        let (s1, s2) = state.states[i];
        state.states[i] = (s2, s1);
    }
}
