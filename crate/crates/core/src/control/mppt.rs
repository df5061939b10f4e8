//! Perturb-and-observe maximum power point tracking.

use serde::{Deserialize, Serialize};

use super::tuning::TuneError;

/// Hill climber on the converter duty cycle, sampled every `period` seconds.
///
/// Each sample compares the measured power with the previous one: a gain
/// keeps the perturbation direction, a loss reverses it, and a change within
/// `dead_band` holds the duty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpptTracker {
    pub duty: f64,
    pub delta_d: f64,
    pub period: f64,
    pub duty_min: f64,
    pub duty_max: f64,
    pub dead_band: f64,
    pub p_prev: f64,
    pub dir: f64,
    pub next_t: f64,
}

/// Outcome of a sample that fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpptUpdate {
    pub power: f64,
    pub delta_p: f64,
    pub duty: f64,
}

impl MpptTracker {
    pub fn new(initial_duty: f64, delta_d: f64, period: f64, duty_min: f64, duty_max: f64) -> Self {
        assert!(delta_d > 0.0 && period > 0.0 && duty_min < duty_max);
        MpptTracker {
            duty: initial_duty.clamp(duty_min, duty_max),
            delta_d,
            period,
            duty_min,
            duty_max,
            dead_band: 1e-4,
            p_prev: 0.0,
            dir: 1.0,
            next_t: 0.0,
        }
    }

    pub fn with_dead_band(mut self, dead_band: f64) -> Self {
        self.dead_band = dead_band;
        self
    }

    /// True if a sample is due at `now`. Half a solver step of slack keeps
    /// the cadence exact on a fixed grid despite round-off in `now`.
    pub fn due(&self, now: f64, slack: f64) -> bool {
        now + slack >= self.next_t
    }

    /// Runs one tracker sample if due and returns the duty command.
    pub fn step(&mut self, v: f64, i: f64, now: f64) -> f64 {
        self.step_with_slack(v, i, now, 0.0);
        self.duty
    }

    pub fn step_with_slack(&mut self, v: f64, i: f64, now: f64, slack: f64) -> Option<MpptUpdate> {
        if !self.due(now, slack) {
            return None;
        }
        let p = v * i;
        let delta_p = p - self.p_prev;
        if delta_p > self.dead_band {
            self.duty += self.dir * self.delta_d;
        } else if delta_p < -self.dead_band {
            self.dir = -self.dir;
            self.duty += self.dir * self.delta_d;
        }
        self.duty = self.duty.clamp(self.duty_min, self.duty_max);
        self.p_prev = p;
        self.next_t += self.period;
        Some(MpptUpdate {
            power: p,
            delta_p,
            duty: self.duty,
        })
    }
}

/// Operating voltage estimate `k · V_oc` for the fractional open-circuit method.
pub fn fractional_voc_ref(v_oc_meas: f64, k: f64) -> Result<f64, TuneError> {
    if !(v_oc_meas > 0.0 && v_oc_meas.is_finite()) {
        return Err(TuneError::InvalidArgument("v_oc must be > 0"));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(TuneError::InvalidArgument("k must lie in (0, 1)"));
    }
    Ok(k * v_oc_meas)
}
