//! Flight-parameter planning for UAV object-detection missions that run their
//! detector on an onboard edge device.
//!
//! The crate is organised bottom-up:
//!
//! - [`profiles`] loads and validates hardware descriptors, performance tables
//!   and task settings.
//! - [`energy`] evaluates the closed-form energy-density model (Wh/km²).
//! - [`calibration`] fits the camera and UAV coefficients from flight logs.
//! - [`metrics`] scores detection traces with frame-level precision and
//!   track-level recall.
//! - [`sampling`] searches for the lowest sampling rate reaching peak recall.
//! - [`decision`] picks the model, altitude, speed and rate that minimise
//!   energy while meeting a recall threshold.
//! - [`simulator`] produces synthetic scenes, flights and tables for testing
//!   everything above at desk scale.
//! - [`report`] holds the comparative-savings arithmetic used by the CLI.

pub mod calibration;
pub mod decision;
pub mod energy;
pub mod metrics;
pub mod profiles;
pub mod report;
pub mod sampling;
pub mod simulator;

pub use decision::{Candidate, FlightParams, Recommendation};
pub use energy::EnergyBreakdown;
pub use profiles::{
    CameraProfile, EdgeDeviceProfile, EdgeModelProfile, MissionProfiles, ModelPerfTable,
    TaskSpec, UavProfile,
};
