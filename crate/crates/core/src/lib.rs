//! Polarization-entangled photon pairs from a driven four-level emitter.
//!
//! The emitter is a ground state `G`, two linearly polarized excitons `X_H`
//! and `X_V`, and a biexciton `B`, driven by a two-photon resonant laser
//! pulse and decaying radiatively along the `B -> X -> G` cascade. The crate
//! integrates the Lindblad master equation through the pulse, evaluates the
//! time-integrated two-photon correlators that make up the polarization
//! density matrix, and scores the result with the Wootters concurrence.
//!
//! The crate is `no_std` and needs only `alloc`. All IO lives in the
//! companion CLI crate.
//!
//! Units are fixed throughout: energies in meV (fine-structure splitting
//! entered in μeV), times in ps, rates in ps⁻¹.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops mirror
// the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod calibration;
pub mod entanglement;
mod error;
pub mod linalg;
pub mod model;
pub mod propagator;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
pub use linalg::{Mat2, Mat4, C64};
pub use model::{Level, PulseShape, PulseSpec, QdParams, State4};
pub use propagator::{Horizon, SuperPropagator, TimeGrid, Trajectory};
pub use tomography::{Method, PairYield, TomographyConfig, TomographyOutput, TwoPhotonMatrix};
