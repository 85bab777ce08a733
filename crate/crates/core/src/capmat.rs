//! Capacitance matrix of the coupled network and its linear solves.
//!
//! Coupling capacitors tie neighboring node derivatives together, so the
//! network ODE is implicit: `M v' = f(v, states)` with
//! `M = c_cell * I + c_couple * L`, where `L` is the graph Laplacian of the
//! coupling edges. `M` is symmetric, strictly diagonally dominant with a
//! positive diagonal for any `c_cell > 0`, hence positive definite, and
//! `M * 1 = c_cell * 1`. The edge set never changes at runtime (only edge
//! resistances toggle), so `M` is assembled and certified once.
//!
//! The per-step solve is conjugate gradients on the Laplacian form
//! `(M p)_i = c_cell p_i + c_couple * sum_j (p_i - p_j)`, started from
//! `x0 = f / c_cell`. Every CG operation maps component-wise-identical
//! vectors to component-wise-identical vectors and the coupling differences
//! vanish exactly on them, so a network in a perfectly uniform state stays
//! bitwise uniform: the in-phase manifold is exactly invariant under the
//! solver, not merely to rounding. A direct banded Cholesky factorization is
//! also computed once (when the band is narrow enough to be worthwhile); it
//! certifies positive definiteness by construction and serves as an
//! independent reference solve.

use crate::error::Error;

/// Relative residual the iterative solve drives each system to; one decade
/// tighter than the per-step accuracy contract of 1e-10.
pub const SOLVE_TOL: f64 = 1e-11;

/// Band cost cap: factor directly only when n * (bandwidth + 1)^2 stays small.
const CHOLESKY_COST_LIMIT: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// True relative residual ||f - M x|| / ||f|| of the returned solution.
    pub rel_residual: f64,
}

/// Sparse symmetric capacitance matrix in neighbor-list (Laplacian) form.
#[derive(Debug, Clone)]
pub struct CapMatrix {
    n: usize,
    c_cell: f64,
    c_couple: f64,
    /// CSR offsets into `neighbors`; per-row lists sorted ascending so every
    /// accumulation runs in a fixed order (determinism contract).
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    cholesky: Option<BandedCholesky>,
}

impl CapMatrix {
    /// Assembles M for `n` cells and the given undirected edge list.
    pub fn assemble(
        n: usize,
        c_cell: f64,
        c_couple: f64,
        edges: &[(u32, u32)],
    ) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::validation(
                "capacitance matrix needs at least one cell",
            ));
        }
        if !(c_cell > 0.0 && c_cell.is_finite()) {
            return Err(Error::validation("cell capacitance must be finite and > 0"));
        }
        if !(c_couple >= 0.0 && c_couple.is_finite()) {
            return Err(Error::validation(
                "coupling capacitance must be finite and >= 0",
            ));
        }
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            let (a, b) = (a as usize, b as usize);
            if a >= n || b >= n || a == b {
                return Err(Error::validation(format!(
                    "edge ({a}, {b}) references invalid cells for n = {n}"
                )));
            }
            adj[a].push(b as u32);
            adj[b].push(a as u32);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(2 * edges.len());
        offsets.push(0);
        for row in &mut adj {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::validation("duplicate coupling edge"));
            }
            neighbors.extend_from_slice(row);
            offsets.push(neighbors.len());
        }
        let mut m = CapMatrix {
            n,
            c_cell,
            c_couple,
            offsets,
            neighbors,
            cholesky: None,
        };
        // Strict diagonal dominance with positive diagonal: M_ii = c_cell +
        // deg * c_couple > deg * c_couple = sum |M_ij|. Always true here, but
        // checked explicitly as the cheap positive-definiteness certificate.
        for i in 0..n {
            let deg = m.degree(i) as f64;
            if !(c_cell + deg * c_couple > deg * c_couple) {
                return Err(Error::numeric(format!(
                    "capacitance matrix row {i} is not strictly diagonally dominant"
                )));
            }
        }
        let bw = m.bandwidth();
        if (n as u64) * ((bw + 1) as u64).pow(2) <= CHOLESKY_COST_LIMIT {
            m.cholesky = Some(BandedCholesky::factor(&m, bw)?);
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c_cell(&self) -> f64 {
        self.c_cell
    }

    fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Largest |i - j| over stored couplings.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for &j in self.row(i) {
                bw = bw.max((j as usize).abs_diff(i));
            }
        }
        bw
    }

    /// Dense entry accessor (test/factorization support).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.c_cell + self.degree(i) as f64 * self.c_couple
        } else if self.row(i).binary_search(&(j as u32)).is_ok() {
            -self.c_couple
        } else {
            0.0
        }
    }

    /// `out = M p` in Laplacian form; exact zero coupling contribution on
    /// component-wise-identical `p`.
    pub fn matvec(&self, p: &[f64], out: &mut [f64]) {
        debug_assert_eq!(p.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let pi = p[i];
            let mut acc = 0.0;
            for &j in self.row(i) {
                acc += pi - p[j as usize];
            }
            out[i] = self.c_cell * pi + self.c_couple * acc;
        }
    }

    /// Solves `M x = f` by conjugate gradients from `x0 = f / c_cell`,
    /// reporting the true residual of the returned `x`.
    pub fn solve(
        &self,
        f: &[f64],
        x: &mut [f64],
        ws: &mut SolveWorkspace,
    ) -> Result<SolveStats, Error> {
        debug_assert_eq!(f.len(), self.n);
        debug_assert_eq!(x.len(), self.n);
        ws.ensure(self.n);
        let norm_f = norm2(f);
        if norm_f == 0.0 {
            x.fill(0.0);
            return Ok(SolveStats {
                iterations: 0,
                rel_residual: 0.0,
            });
        }
        let (r, p, mp) = ws.split();

        for i in 0..self.n {
            x[i] = f[i] / self.c_cell;
        }
        self.matvec(x, mp);
        for i in 0..self.n {
            r[i] = f[i] - mp[i];
        }
        let mut rho = dot(r, r);
        let target = SOLVE_TOL * norm_f;
        let mut iterations = 0usize;
        if rho.sqrt() > target {
            p.copy_from_slice(r);
            let max_iter = 40 + 4 * self.n;
            loop {
                self.matvec(p, mp);
                let alpha = rho / dot(p, mp);
                if !alpha.is_finite() {
                    return Err(Error::numeric("conjugate gradients broke down"));
                }
                for i in 0..self.n {
                    x[i] += alpha * p[i];
                }
                for i in 0..self.n {
                    r[i] -= alpha * mp[i];
                }
                let rho_next = dot(r, r);
                iterations += 1;
                if rho_next.sqrt() <= target {
                    break;
                }
                if iterations >= max_iter {
                    return Err(Error::numeric(format!(
                        "conjugate gradients failed to reach {SOLVE_TOL:e} in {max_iter} iterations"
                    )));
                }
                let beta = rho_next / rho;
                rho = rho_next;
                for i in 0..self.n {
                    p[i] = r[i] + beta * p[i];
                }
            }
        }
        // certify with the true residual, not the recursive one
        self.matvec(x, mp);
        for i in 0..self.n {
            r[i] = f[i] - mp[i];
        }
        Ok(SolveStats {
            iterations,
            rel_residual: norm2(r) / norm_f,
        })
    }

    /// Direct solve through the precomputed factorization, if one was built.
    pub fn solve_direct(&self, f: &[f64]) -> Option<Vec<f64>> {
        self.cholesky.as_ref().map(|c| c.solve(f))
    }

    pub fn has_factorization(&self) -> bool {
        self.cholesky.is_some()
    }
}

/// Reusable buffers for [`CapMatrix::solve`].
#[derive(Debug, Default)]
pub struct SolveWorkspace {
    r: Vec<f64>,
    p: Vec<f64>,
    mp: Vec<f64>,
}

impl SolveWorkspace {
    fn ensure(&mut self, n: usize) {
        if self.r.len() != n {
            self.r.resize(n, 0.0);
            self.p.resize(n, 0.0);
            self.mp.resize(n, 0.0);
        }
    }

    fn split(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.r, &mut self.p, &mut self.mp)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor stored as a row-major band.
#[derive(Debug, Clone)]
struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `band[i * (bw + 1) + (j - i + bw)]` holds `L[i][j]` for `j` in
    /// `[i - bw, i]`.
    band: Vec<f64>,
}

impl BandedCholesky {
    fn factor(m: &CapMatrix, bw: usize) -> Result<Self, Error> {
        let n = m.n();
        let w = bw + 1;
        let mut band = vec![0.0f64; n * w];
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            for j in j_lo..=i {
                let k_lo = j.saturating_sub(bw).max(j_lo);
                let mut sum = m.entry(i, j);
                for k in k_lo..j {
                    sum -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::numeric(format!(
                            "capacitance matrix is not positive definite (pivot {i})"
                        )));
                    }
                    band[i * w + bw] = sum.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = sum / band[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    fn solve(&self, f: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = f.to_vec();
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            let mut sum = y[i];
            for j in j_lo..i {
                sum -= self.band[i * w + (j + bw - i)] * y[j];
            }
            y[i] = sum / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let j_hi = (i + bw).min(n - 1);
            let mut sum = y[i];
            for j in (i + 1)..=j_hi {
                sum -= self.band[j * w + (i + bw - j)] * y[j];
            }
            y[i] = sum / self.band[i * w + bw];
        }
        y
    }
}
