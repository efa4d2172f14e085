//! Multi-marker alignment toolkit for AR-assisted glulam beam fabrication.
//!
//! The crate is organized around the fabrication workflow:
//!
//! - [`geometry`] — pose algebra, beam models, and marker layouts.
//! - [`fiducial`] — the FMC-16 printable matrix-code codec and sheet renderer.
//! - [`registration`] — rigid alignment from marker observations plus the
//!   interpolated per-marker correction field.
//! - [`driftsim`] — deterministic simulation of headset drift and marker
//!   detection during a fabrication walk-along.
//! - [`evaluation`] — overlay-deviation reports, tolerance checks, and
//!   marker-spacing sweeps.

pub mod driftsim;
pub mod evaluation;
pub mod fiducial;
pub mod geometry;
pub mod registration;
