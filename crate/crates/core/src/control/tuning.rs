//! Gain design: Ziegler-Nichols tables and Routh-bounded PI gain search.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::routh::routh_array;
use crate::converters::TransferFunction;

/// Upper end of the proportional-gain search.
pub const KP_SEARCH_CAP: f64 = 1e6;
const KP_SEARCH_FLOOR: f64 = 1e-9;
const GRID_PER_DECADE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TuneError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("closed loop is unstable even as k_p -> 0+")]
    NoStableGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ZnRule {
    P,
    PI,
    PID,
}

/// Ideal PID gains `Kp (1 + 1/(Ti s) + Td s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k_p: f64,
    /// Integral time; infinite for proportional-only control.
    pub t_i: f64,
    pub t_d: f64,
}

impl PidGains {
    /// Parallel-form gains `(k_p, k_i, k_d)`.
    pub fn parallel(&self) -> (f64, f64, f64) {
        let k_i = if self.t_i.is_finite() {
            self.k_p / self.t_i
        } else {
            0.0
        };
        (self.k_p, k_i, self.k_p * self.t_d)
    }
}

/// Classic ultimate-gain table.
pub fn ziegler_nichols(k_u: f64, t_u: f64, rule: ZnRule) -> Result<PidGains, TuneError> {
    if !(k_u > 0.0 && k_u.is_finite()) {
        return Err(TuneError::InvalidArgument("k_u must be > 0"));
    }
    if !(t_u > 0.0 && t_u.is_finite()) {
        return Err(TuneError::InvalidArgument("t_u must be > 0"));
    }
    Ok(match rule {
        ZnRule::P => PidGains {
            k_p: 0.5 * k_u,
            t_i: f64::INFINITY,
            t_d: 0.0,
        },
        ZnRule::PI => PidGains {
            k_p: 0.45 * k_u,
            t_i: t_u / 1.2,
            t_d: 0.0,
        },
        ZnRule::PID => PidGains {
            k_p: 0.6 * k_u,
            t_i: t_u / 2.0,
            t_d: t_u / 8.0,
        },
    })
}

/// Characteristic polynomial of `plant` under unity feedback with
/// `k_p + k_i/s`: `s·den + (k_p s + k_i)·num`, ascending.
pub fn closed_loop_pi_poly(plant: &TransferFunction, k_p: f64, k_i: f64) -> Vec<f64> {
    let len = (plant.den.len() + 1).max(plant.num.len() + 1);
    let mut out = vec![0.0; len];
    for (k, &a) in plant.den.iter().enumerate() {
        out[k + 1] += a;
    }
    for (k, &b) in plant.num.iter().enumerate() {
        out[k] += k_i * b;
        out[k + 1] += k_p * b;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KpBound {
    /// Largest stabilizing `k_p` found by bisection.
    Bounded { k_p: f64 },
    /// Stable across the whole search range.
    Unbounded { cap: f64 },
}

fn routh_stable(poly: &[f64]) -> bool {
    routh_array(poly).map(|t| t.stable).unwrap_or(false)
}

/// Largest gain `k` on (0, cap] such that every gain in (0, k] keeps
/// `poly(k)` Routh-stable, located on a log grid and refined by bisection.
pub fn max_stable_gain<F>(poly: F) -> Result<KpBound, TuneError>
where
    F: Fn(f64) -> Vec<f64>,
{
    let stable = |k: f64| routh_stable(&poly(k));
    if !stable(KP_SEARCH_FLOOR) {
        return Err(TuneError::NoStableGain);
    }
    let decades = libm::log10(KP_SEARCH_CAP / KP_SEARCH_FLOOR);
    let n = libm::ceil(decades * GRID_PER_DECADE as f64) as usize;
    let mut lo = KP_SEARCH_FLOOR;
    let mut hi = None;
    for j in 1..=n {
        let k = (KP_SEARCH_FLOOR * libm::pow(10.0, j as f64 / GRID_PER_DECADE as f64))
            .min(KP_SEARCH_CAP);
        if stable(k) {
            lo = k;
        } else {
            hi = Some(k);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Ok(KpBound::Unbounded { cap: KP_SEARCH_CAP });
    };
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(KpBound::Bounded { k_p: lo })
}

/// Stability bound on `k_p` for `plant` under PI control with fixed `k_i`.
pub fn max_stable_kp(plant: &TransferFunction, k_i: f64) -> Result<KpBound, TuneError> {
    if !(k_i > 0.0 && k_i.is_finite()) {
        return Err(TuneError::InvalidArgument("k_i must be > 0"));
    }
    if !plant.is_proper() {
        return Err(TuneError::InvalidArgument("plant must be proper"));
    }
    max_stable_gain(|kp| closed_loop_pi_poly(plant, kp, k_i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::roots::polynomial_roots;
    use crate::converters::{boost_tf, buck_tf, ConverterParams};
    use approx::assert_relative_eq;

    #[test]
    fn zn_tables() {
        let pi = ziegler_nichols(2.0, 1.0, ZnRule::PI).unwrap();
        assert_relative_eq!(pi.k_p, 0.9);
        assert_relative_eq!(pi.t_i, 1.0 / 1.2);
        assert_eq!(pi.t_d, 0.0);
        let pid = ziegler_nichols(2.0, 1.0, ZnRule::PID).unwrap();
        assert_relative_eq!(pid.k_p, 1.2);
        assert_relative_eq!(pid.t_i, 0.5);
        assert_relative_eq!(pid.t_d, 0.125);
        let p = ziegler_nichols(1.0, 1.0, ZnRule::P).unwrap();
        assert_eq!(p.k_p, 0.5);
        assert_eq!(p.parallel(), (0.5, 0.0, 0.0));
    }

    #[test]
    fn zn_scale_consistent() {
        for rule in [ZnRule::P, ZnRule::PI, ZnRule::PID] {
            let a = ziegler_nichols(3.0, 0.7, rule).unwrap();
            let b = ziegler_nichols(6.0, 0.7, rule).unwrap();
            assert_relative_eq!(b.k_p, 2.0 * a.k_p);
            assert_eq!(a.t_i, b.t_i);
            assert_eq!(a.t_d, b.t_d);
        }
    }

    #[test]
    fn zn_rejects_bad_input() {
        assert!(ziegler_nichols(0.0, 1.0, ZnRule::PI).is_err());
        assert!(ziegler_nichols(1.0, -1.0, ZnRule::PI).is_err());
    }

    #[test]
    fn first_order_plant_unbounded() {
        let plant = TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        for ki in [0.01, 1.0, 100.0] {
            assert_eq!(
                max_stable_kp(&plant, ki).unwrap(),
                KpBound::Unbounded { cap: KP_SEARCH_CAP }
            );
        }
    }

    #[test]
    fn tabulated_polynomial_bound() {
        let bound = max_stable_gain(|kp| vec![kp, 0.01, 2e-3, 5.2e-7]).unwrap();
        let KpBound::Bounded { k_p } = bound else {
            panic!("expected a finite bound");
        };
        assert_relative_eq!(k_p, 2e-5 / 5.2e-7, max_relative = 1e-9);
    }

    fn boost_plant() -> TransferFunction {
        let p = ConverterParams {
            l: 1e-3,
            c: 1e-4,
            r_nom: 10.0,
        };
        boost_tf(&p, 24.0, 0.5)
    }

    #[test]
    fn boost_bound_brackets() {
        let plant = boost_plant();
        let KpBound::Bounded { k_p: b } = max_stable_kp(&plant, 0.004).unwrap() else {
            panic!("boost with a RHP zero must have a finite bound");
        };
        let stable = |kp: f64| routh_array(&closed_loop_pi_poly(&plant, kp, 0.004)).unwrap().stable;
        assert!(stable(0.99 * b));
        assert!(!stable(1.01 * b));
    }

    #[test]
    fn boost_bound_matches_root_sweep() {
        // independent check: first k_p on a fine grid with a root in Re >= 0
        let plant = boost_plant();
        let KpBound::Bounded { k_p: b } = max_stable_kp(&plant, 0.004).unwrap() else {
            panic!();
        };
        let mut first_unstable = None;
        for j in 1..=20_000 {
            let kp = j as f64 * 1e-4;
            let roots = polynomial_roots(&closed_loop_pi_poly(&plant, kp, 0.004)).unwrap();
            if roots.iter().any(|r| r.re >= 0.0) {
                first_unstable = Some(kp);
                break;
            }
        }
        let kp_cross = first_unstable.expect("root sweep found no crossing");
        assert!((kp_cross - b).abs() <= 1e-4 + 1e-6 * b, "{kp_cross} vs {b}");
    }

    #[test]
    fn buck_pi_poly_shape() {
        let p = ConverterParams {
            l: 1e-3,
            c: 1e-4,
            r_nom: 10.0,
        };
        let plant = buck_tf(&p, 12.0, 0.5);
        let poly = closed_loop_pi_poly(&plant, 15.0, 0.002);
        assert_eq!(poly.len(), 4);
        assert_relative_eq!(poly[0], 0.002 * 24.0);
        assert_relative_eq!(poly[1], 1.0 + 15.0 * 24.0);
        assert!(routh_array(&poly).unwrap().stable);
    }

    #[test]
    fn max_stable_kp_rejects_zero_ki() {
        let plant = boost_plant();
        assert!(matches!(
            max_stable_kp(&plant, 0.0),
            Err(TuneError::InvalidArgument(_))
        ));
    }

    #[test]
    fn unstable_at_zero_gain() {
        // open-loop unstable plant 1/(s - 1) with positive integral action
        let plant = TransferFunction::new(vec![-1.0], vec![-1.0, 1.0]).unwrap();
        assert_eq!(max_stable_kp(&plant, 1.0), Err(TuneError::NoStableGain));
    }
}
