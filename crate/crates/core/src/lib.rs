//! Simulation engine for 2-D networks of hysteretic relaxation oscillators.
//!
//! Everything is expressed in normalized units: resistances in R0, voltages
//! in V0, capacitances in C0 and time in t0 = R0*C0, so currents come out in
//! V0/R0. Mapping to physical device scales lives in the calibration module.

// Validation guards keep the negated form `!(a > b)` so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The banded kernels index several arrays in lockstep; iterator rewrites
// obscure the band arithmetic.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod capmat;
pub mod cell;
pub mod device;
pub mod error;
pub mod lattice;
pub mod netsim;
pub mod scenario;

pub use error::Error;
