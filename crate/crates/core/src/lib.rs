//! Simulation toolkit for state-selective subwavelength localization of
//! atoms driven by a traveling-wave / standing-wave pulse pair.
//!
//! The crate is organized around three solver layers:
//!
//! * [`analytic`] — closed-form widths, thresholds and resolution bounds
//!   for the adiabatic-passage and dark-state localization schemes;
//! * [`master_eq`] + [`profiles`] + [`nestar`] — Lindblad dynamics of an
//!   N-level atom at fixed transverse position, scanned across a
//!   standing-wave period to build localization profiles;
//! * [`gpe`] — coupled two-component Gross–Pitaevskii equations with a
//!   lossy excited field, for coherent patterning of a trapped condensate.
//!
//! Spatial scans and parameter sweeps are data-parallel; the `parallel`
//! feature (on by default) runs them on a rayon pool, otherwise they fall
//! back to plain sequential iteration. Results are gathered by index, so
//! outputs are identical either way.

pub mod analytic;
pub mod constants;
pub mod error;
pub mod exec;
pub mod fwhm;
pub mod gpe;
pub mod master_eq;
pub mod nestar;
pub mod ode;
pub mod profiles;
pub mod pulse;

pub use error::{Error, Result};
pub use pulse::{BeamGeometry, PulsePair};

/// Complex double, the scalar type of every field and density matrix here.
pub type C64 = num_complex::Complex64;
