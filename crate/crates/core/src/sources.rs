//! Renewable source models: a single-diode photovoltaic panel and a wind
//! turbine emulated by a coupled DC motor-generator set.

use serde::{Deserialize, Serialize};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 60;

/// Voltage resolution of the brute-force MPP sweep.
pub const MPP_SWEEP_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SourceError {
    #[error("PV Newton iteration did not converge at v = {v} V (residual {residual} A)")]
    NoConvergence { v: f64, residual: f64 },
    #[error("irradiance must be > 0 for the MPP oracle, got {0}")]
    NonPositiveIrradiance(f64),
}

/// Five-parameter single-diode panel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvPanel {
    /// Photocurrent at reference irradiance (A).
    pub i_ph_stc: f64,
    /// Diode saturation current (A).
    pub i_0: f64,
    /// Ideality factor × series cell count × thermal voltage (V).
    pub n_vt: f64,
    /// Series resistance (Ω).
    pub r_s: f64,
    /// Shunt resistance (Ω).
    pub r_sh: f64,
    /// Reference irradiance (W/m²).
    #[serde(default = "default_g_stc")]
    pub g_stc: f64,
}

fn default_g_stc() -> f64 {
    1000.0
}

impl PvPanel {
    pub fn new(i_ph_stc: f64, i_0: f64, n_vt: f64, r_s: f64, r_sh: f64) -> Self {
        PvPanel {
            i_ph_stc,
            i_0,
            n_vt,
            r_s,
            r_sh,
            g_stc: default_g_stc(),
        }
    }

    pub fn photocurrent(&self, g: f64) -> f64 {
        self.i_ph_stc * g / self.g_stc
    }

    /// Residual of the implicit I-V equation at current `i`.
    pub fn residual(&self, v: f64, i: f64, g: f64) -> f64 {
        let vd = v + i * self.r_s;
        self.photocurrent(g) - self.i_0 * libm::expm1(vd / self.n_vt) - vd / self.r_sh - i
    }

    fn residual_slope(&self, v: f64, i: f64) -> f64 {
        let vd = v + i * self.r_s;
        -self.i_0 * libm::exp(vd / self.n_vt) * self.r_s / self.n_vt - self.r_s / self.r_sh - 1.0
    }
}

/// Panel current at terminal voltage `v` and irradiance `g`.
///
/// Damped Newton on the implicit diode equation, starting from the
/// photocurrent; the step is halved whenever it would grow the residual.
pub fn pv_current(panel: &PvPanel, v: f64, g: f64) -> Result<f64, SourceError> {
    let mut i = panel.photocurrent(g);
    let mut f = panel.residual(v, i, g);
    for _ in 0..NEWTON_MAX_ITER {
        if libm::fabs(f) < NEWTON_TOL {
            return Ok(i);
        }
        let step = -f / panel.residual_slope(v, i);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = i + lambda * step;
            let fc = panel.residual(v, cand, g);
            if fc.is_finite() && libm::fabs(fc) < libm::fabs(f) {
                i = cand;
                f = fc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if libm::fabs(f) < NEWTON_TOL {
        Ok(i)
    } else {
        Err(SourceError::NoConvergence { v, residual: f })
    }
}

/// Terminal voltage at which the panel current is zero.
pub fn open_circuit_voltage(panel: &PvPanel, g: f64) -> Result<f64, SourceError> {
    // With i = 0 the equation is explicit in v and strictly decreasing, so
    // bracket and bisect.
    let f = |v: f64| panel.residual(v, 0.0, g);
    let mut lo = 0.0;
    if f(lo) <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = panel.n_vt.max(1e-3);
    while f(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(SourceError::NoConvergence {
                v: hi,
                residual: f64::NAN,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MppPoint {
    pub v_mpp: f64,
    pub p_mpp: f64,
    pub v_oc: f64,
}

/// Ground-truth maximum power point: exhaustive 1 mV sweep from 0 to V_oc.
pub fn mpp_oracle(panel: &PvPanel, g: f64) -> Result<MppPoint, SourceError> {
    if !(g > 0.0) {
        return Err(SourceError::NonPositiveIrradiance(g));
    }
    let v_oc = open_circuit_voltage(panel, g)?;
    let n = libm::floor(v_oc / MPP_SWEEP_STEP) as u64;
    let mut best = MppPoint {
        v_mpp: 0.0,
        p_mpp: 0.0,
        v_oc,
    };
    for k in 0..=n {
        let v = k as f64 * MPP_SWEEP_STEP;
        let p = v * pv_current(panel, v, g)?;
        if p > best.p_mpp {
            best.v_mpp = v;
            best.p_mpp = p;
        }
    }
    Ok(best)
}

/// Wind turbine emulated by a motor-generator set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindMg {
    /// Generator back-EMF constant (V·s/rad).
    pub k_e: f64,
    /// Armature resistance (Ω).
    pub r_a: f64,
    /// Shaft speed per unit wind speed (rad/s per m/s).
    pub k_w: f64,
    /// First-order speed lag (s); 0 tracks the wind instantly.
    pub tau: f64,
}

impl WindMg {
    pub fn target_speed(&self, wind: f64) -> f64 {
        self.k_w * wind
    }

    /// Advances the shaft speed by `dt` toward the wind-driven target.
    pub fn advance_speed(&self, wind: f64, omega_prev: f64, dt: f64) -> f64 {
        let target = self.target_speed(wind);
        if self.tau == 0.0 {
            target
        } else {
            target + (omega_prev - target) * libm::exp(-dt / self.tau)
        }
    }

    /// Terminal voltage at shaft speed `omega` and armature current `i_load`.
    pub fn terminal_voltage(&self, omega: f64, i_load: f64) -> f64 {
        (self.k_e * omega - self.r_a * i_load).max(0.0)
    }
}

/// One step of the motor-generator: returns `(v_terminal, omega)`.
pub fn wind_terminal(mg: &WindMg, wind: f64, i_load: f64, omega_prev: f64, dt: f64) -> (f64, f64) {
    let omega = mg.advance_speed(wind, omega_prev, dt);
    (mg.terminal_voltage(omega, i_load), omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn panel() -> PvPanel {
        PvPanel::new(5.0, 1e-9, 1.5, 0.01, 1000.0)
    }

    #[test]
    fn short_circuit_current_near_photocurrent() {
        let p = panel();
        for g in [200.0, 600.0, 1000.0] {
            let i = pv_current(&p, 0.0, g).unwrap();
            let iph = p.photocurrent(g);
            // r_s/r_sh correction only
            assert!((i - iph).abs() < iph * 2.0 * p.r_s / p.r_sh + 1e-9);
        }
    }

    #[test]
    fn dark_shorted_panel_is_zero() {
        let i = pv_current(&panel(), 0.0, 0.0).unwrap();
        assert!(i.abs() < 1e-9);
    }

    #[test]
    fn dark_panel_is_reverse_biased() {
        for v in [0.5, 5.0, 20.0, 30.0] {
            assert!(pv_current(&panel(), v, 0.0).unwrap() <= 0.0);
        }
    }

    #[test]
    fn residual_below_tolerance() {
        let p = panel();
        for k in 0..=70 {
            let v = k as f64 * 0.5;
            let i = pv_current(&p, v, 800.0).unwrap();
            assert!(p.residual(v, i, 800.0).abs() < 1e-9);
        }
    }

    #[test]
    fn current_decreasing_in_voltage() {
        let p = panel();
        let voc = open_circuit_voltage(&p, 1000.0).unwrap();
        let mut prev = pv_current(&p, 0.0, 1000.0).unwrap();
        let mut v = 0.05;
        while v <= voc {
            let i = pv_current(&p, v, 1000.0).unwrap();
            assert!(i < prev, "not decreasing at {v}");
            prev = i;
            v += 0.05;
        }
    }

    #[test]
    fn open_circuit_current_is_zero() {
        let p = panel();
        let voc = open_circuit_voltage(&p, 1000.0).unwrap();
        assert!(pv_current(&p, voc, 1000.0).unwrap().abs() < 1e-9);
        assert!(voc > 0.0 && voc.is_finite());
    }

    #[test]
    fn mpp_interior_and_single_peak() {
        let p = panel();
        for g in [200.0, 500.0, 1000.0] {
            let mpp = mpp_oracle(&p, g).unwrap();
            assert!(mpp.p_mpp > 0.0);
            assert!(mpp.v_mpp > 0.0 && mpp.v_mpp < mpp.v_oc);
            // discrete derivative of P(v) changes sign exactly once
            let n = (mpp.v_oc / 0.01) as usize;
            let power: std::vec::Vec<f64> = (0..=n)
                .map(|k| {
                    let v = k as f64 * 0.01;
                    v * pv_current(&p, v, g).unwrap()
                })
                .collect();
            let signs: std::vec::Vec<bool> =
                power.windows(2).map(|w| w[1] - w[0] > 0.0).collect();
            let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
            assert_eq!(changes, 1, "g = {g}");
        }
    }

    #[test]
    fn mpp_increases_with_irradiance() {
        let p = panel();
        let lo = mpp_oracle(&p, 400.0).unwrap();
        let hi = mpp_oracle(&p, 800.0).unwrap();
        assert!(hi.p_mpp > lo.p_mpp);
    }

    #[test]
    fn mpp_oracle_rejects_dark() {
        assert_eq!(
            mpp_oracle(&panel(), 0.0),
            Err(SourceError::NonPositiveIrradiance(0.0))
        );
    }

    #[test]
    fn wind_examples() {
        let mg = WindMg {
            k_e: 0.5,
            r_a: 0.5,
            k_w: 10.0,
            tau: 0.0,
        };
        assert_eq!(wind_terminal(&mg, 0.0, 0.0, 0.0, 1e-3), (0.0, 0.0));
        assert_eq!(wind_terminal(&mg, 8.0, 0.0, 0.0, 1e-3), (40.0, 80.0));
        assert_eq!(wind_terminal(&mg, 8.0, 4.0, 0.0, 1e-3), (38.0, 80.0));
    }

    #[test]
    fn wind_lag_relaxes_toward_target() {
        let mg = WindMg {
            k_e: 0.5,
            r_a: 0.5,
            k_w: 10.0,
            tau: 0.1,
        };
        let (_, om) = wind_terminal(&mg, 8.0, 0.0, 0.0, 0.1);
        assert_relative_eq!(om, 80.0 * (1.0 - (-1.0f64).exp()), epsilon = 1e-12);
        let (v, _) = wind_terminal(&mg, 0.0, 100.0, 1.0, 0.1);
        assert_eq!(v, 0.0, "terminal voltage is floored at zero");
    }

    proptest! {
        #[test]
        fn unloaded_instant_wind_is_exact(
            k_e in 0.01f64..2.0, k_w in 0.1f64..20.0, wind in 0.0f64..25.0,
        ) {
            let mg = WindMg { k_e, r_a: 0.3, k_w, tau: 0.0 };
            let (v, _) = wind_terminal(&mg, wind, 0.0, 0.0, 1e-4);
            prop_assert_eq!(v, k_e * (k_w * wind));
        }
    }
}
