//! Battery storage and the bidirectional-converter mode controller.
//!
//! The controller keeps the bus near its reference: surplus on the bus
//! (voltage above the band) charges the battery through the buck direction,
//! a deficit (voltage below the band) discharges it through the boost
//! direction, and a full battery opens the converter.

use serde::{Deserialize, Serialize};

use crate::control::PiController;
pub use crate::converters::Mode;

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Coulomb-counting battery with a linear open-circuit voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub capacity_ah: f64,
    pub soc: f64,
    pub v_full: f64,
    pub v_empty: f64,
    pub r_int: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl Battery {
    pub fn ocv(&self, soc: f64) -> f64 {
        self.v_empty + soc * (self.v_full - self.v_empty)
    }

    /// Terminal voltage at signed current `i` (+ charging).
    pub fn terminal_voltage(&self, soc: f64, i: f64) -> f64 {
        self.ocv(soc) + i * self.r_int
    }

    /// d(soc)/dt at signed current `i`.
    pub fn soc_rate(&self, i: f64) -> f64 {
        i / (SECONDS_PER_HOUR * self.capacity_ah)
    }

    /// Advances the charge by `dt` at constant current; returns
    /// `(soc, v_terminal)`.
    pub fn step(&mut self, i: f64, dt: f64) -> (f64, f64) {
        self.soc = (self.soc + self.soc_rate(i) * dt).clamp(0.0, 1.0);
        (self.soc, self.terminal_voltage(self.soc, i))
    }
}

/// Three-mode controller with hysteresis and state-of-charge guards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeController {
    pub v_ref: f64,
    pub band: f64,
    pub mode: Mode,
    pub i_charge_max: f64,
    pub i_discharge_max: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub reentry_margin: f64,
    /// Set when charging stopped on a full battery.
    pub full_latched: bool,
    /// Bus-voltage loop producing the current magnitude.
    pub pi: PiController,
}

impl ModeController {
    pub fn new(v_ref: f64, band: f64, battery: &Battery, i_charge_max: f64, i_discharge_max: f64) -> Self {
        assert!(band > 0.0);
        ModeController {
            v_ref,
            band,
            mode: Mode::Idle,
            i_charge_max,
            i_discharge_max,
            soc_min: battery.soc_min,
            soc_max: battery.soc_max,
            reentry_margin: 0.02,
            full_latched: false,
            pi: PiController::new(2.0, 50.0, 0.0, i_charge_max),
        }
    }

    pub fn with_gains(mut self, k_p: f64, k_i: f64) -> Self {
        self.pi.k_p = k_p;
        self.pi.k_i = k_i;
        self
    }

    fn may_charge(&self, soc: f64) -> bool {
        if self.full_latched {
            soc < self.soc_max - self.reentry_margin
        } else {
            soc < self.soc_max
        }
    }

    fn may_discharge(&self, soc: f64) -> bool {
        soc > self.soc_min
    }

    /// Updates and returns the operating mode.
    pub fn select_mode(&mut self, v_bus: f64, soc: f64) -> Mode {
        if self.full_latched && soc < self.soc_max - self.reentry_margin {
            self.full_latched = false;
        }
        let high = v_bus > self.v_ref + self.band;
        let low = v_bus < self.v_ref - self.band;
        let next = match self.mode {
            Mode::Charge if soc >= self.soc_max => {
                self.full_latched = true;
                Mode::Idle
            }
            Mode::Discharge if !self.may_discharge(soc) => Mode::Idle,
            _ if high && self.may_charge(soc) => Mode::Charge,
            _ if low && self.may_discharge(soc) => Mode::Discharge,
            current => current,
        };
        if next != self.mode {
            self.pi.reset();
            self.mode = next;
        }
        next
    }

    /// Signed battery current setpoint for the selected mode (+ charging).
    pub fn current_command(&mut self, v_bus: f64, dt: f64) -> f64 {
        match self.mode {
            Mode::Idle => 0.0,
            Mode::Charge => {
                self.pi.set_limits(0.0, self.i_charge_max);
                self.pi.step(v_bus - self.v_ref, dt)
            }
            Mode::Discharge => {
                self.pi.set_limits(0.0, self.i_discharge_max);
                -self.pi.step(self.v_ref - v_bus, dt)
            }
        }
    }
}
