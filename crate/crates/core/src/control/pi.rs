use serde::{Deserialize, Serialize};

/// Discrete PI controller, backward-Euler integrator, clamped output.
///
/// With `anti_windup` set the integrator is frozen while the output is
/// saturated in the direction the error pushes it (conditional integration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiController {
    pub k_p: f64,
    pub k_i: f64,
    pub integ: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub anti_windup: bool,
    #[serde(skip)]
    last_raw: f64,
}

impl PiController {
    pub fn new(k_p: f64, k_i: f64, u_min: f64, u_max: f64) -> Self {
        assert!(u_min < u_max, "PI output range is empty");
        PiController {
            k_p,
            k_i,
            integ: 0.0,
            u_min,
            u_max,
            anti_windup: true,
            last_raw: 0.0,
        }
    }

    pub fn with_anti_windup(mut self, on: bool) -> Self {
        self.anti_windup = on;
        self
    }

    pub fn set_limits(&mut self, u_min: f64, u_max: f64) {
        debug_assert!(u_min <= u_max);
        self.u_min = u_min;
        self.u_max = u_max;
    }

    pub fn reset(&mut self) {
        self.integ = 0.0;
        self.last_raw = 0.0;
    }

    /// Unclamped output of the most recent step.
    pub fn last_raw(&self) -> f64 {
        self.last_raw
    }

    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        let p = self.k_p * error;
        let integ = self.integ + self.k_i * error * dt;
        let mut raw = p + integ;
        let pushing_high = raw > self.u_max && error > 0.0;
        let pushing_low = raw < self.u_min && error < 0.0;
        if self.anti_windup && (pushing_high || pushing_low) {
            raw = p + self.integ;
        } else {
            self.integ = integ;
        }
        self.last_raw = raw;
        raw.clamp(self.u_min, self.u_max)
    }
}
