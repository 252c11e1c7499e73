//! Steady-state thresholds and phase-locking zones of a frequency-degenerate
//! type-II optical parametric oscillator with an intracavity birefringent
//! plate, for ring and linear cavities.
//!
//! The plate couples the orthogonally polarized signal and idler linearly
//! while the crystal couples them parametrically. Where both couplings act,
//! the round-trip equations admit a phase-locked steady state only in a
//! bounded region of cavity length and crystal temperature: the locking
//! zone. Thresholds follow from the vanishing of a real 4×4 determinant.
//!
//! Modules, bottom up:
//! - [`polarization`]: Jones matrix of the plate.
//! - [`crystal`]: nonlinear coupling and phase mismatch.
//! - [`cavity`]: round-trip phases and the real 4×4 fixed-point system.
//! - [`solver`]: threshold roots and the closed-form ring threshold.
//! - [`sweep`]: zone maps, thresholds on resonance and zone widths.
//! - [`config`] and [`cli`]: run configuration and command-line front end.

pub mod cavity;
pub mod cli;
pub mod config;
pub mod crystal;
pub mod polarization;
pub mod solver;
pub mod sweep;

pub use cavity::{CavityKind, DerivedPhases, MirrorParams, OperatingPoint, Opo, RoundTripSystem};
pub use crystal::{CrystalParams, PhaseMatchModel};
pub use polarization::{Jones2, WaveplateParams};
pub use solver::{solve_point, ThresholdResult, ThresholdStatus};
