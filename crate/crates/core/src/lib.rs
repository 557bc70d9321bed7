//! Simulator for a 1D array of multi-level superconducting qubits coupled to
//! a semi-infinite waveguide terminated by a mirror.
//!
//! The crate computes mirror-modified dipole-dipole couplings, builds and
//! solves the corresponding master equations, and produces reflection
//! spectra whose split features expose the collective Lamb shift. Closed-form
//! two-qubit results and a giant-atom reduction cross-validate every numeric
//! path.

pub mod analytic2q;
pub mod config;
pub mod error;
pub mod linalg;
pub mod liouville;
pub mod model;
pub mod rddi;
pub mod reduced;
pub mod solve;
pub mod spectra;

pub use error::{Error, Result};
pub use model::{ProbeSpec, QubitSpec, System, TransmonParams, WaveguideSpec};
