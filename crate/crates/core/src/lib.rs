//! Models, controllers and a deterministic fixed-step engine for a standalone
//! DC microgrid fed by photovoltaic and wind (motor-generator) sources.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, trace output
//! and the command-line driver live in the `microgrid` crate.
//!
//! # Layout
//!
//! - [`scenario`]: declarative grid description, validation, time profiles
//! - [`sources`]: single-diode PV panel, motor-generator wind emulator
//! - [`converters`]: duty-averaged buck/boost/bidirectional dynamics and
//!   small-signal transfer functions
//! - [`control`]: PI with anti-windup, Ziegler-Nichols, Routh-Hurwitz,
//!   polynomial roots, perturb-and-observe MPPT
//! - [`power_mgmt`]: battery and the charge/discharge/idle mode controller
//! - [`bus`]: DC bus node, loads, rating checks
//! - [`engine`]: RK4 simulation loop, trace log, energy audit

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bus;
pub mod control;
pub mod converters;
pub mod engine;
pub mod power_mgmt;
pub mod scenario;
pub mod sources;

pub use engine::{energy_audit, run, AuditReport, EngineError, Event, EventKind, TraceLog};
pub use scenario::{Profile, Scenario, ScenarioError, SimConfig};
