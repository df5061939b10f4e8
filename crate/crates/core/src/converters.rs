//! Duty-averaged converter dynamics and small-signal transfer functions.
//!
//! Buck and boost stages use a diode realization, so the inductor current
//! never goes negative. The bidirectional stage is a synchronous half-bridge
//! whose inductor current is signed (positive charges the battery).

use alloc::vec;
use alloc::vec::Vec;

pub use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::roots::{polynomial_roots, RootsError};

/// Magnitude below which a denominator is treated as a pole.
pub const POLE_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterParams {
    pub l: f64,
    pub c: f64,
    /// Nominal load used for small-signal modeling.
    pub r_nom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConverterState {
    pub i_l: f64,
    pub v_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Charge,
    Discharge,
    Idle,
}

impl Mode {
    /// Numeric code used in trace columns.
    pub fn code(self) -> f64 {
        match self {
            Mode::Idle => 0.0,
            Mode::Charge => 1.0,
            Mode::Discharge => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Charge => "charge",
            Mode::Discharge => "discharge",
            Mode::Idle => "idle",
        }
    }
}

/// Inductor slope with the diode guard: a non-positive current cannot be
/// driven further negative.
#[inline]
pub(crate) fn guarded(i_l: f64, v_l: f64, l: f64) -> f64 {
    if i_l <= 0.0 && v_l < 0.0 {
        0.0
    } else {
        v_l / l
    }
}

/// Buck inductor slope with switch-node voltage `d·v_in` against `v_out`.
#[inline]
pub fn buck_inductor_slope(l: f64, i_l: f64, v_in: f64, d: f64, v_out: f64, r_series: f64) -> f64 {
    guarded(i_l, d * v_in - v_out - r_series * i_l, l)
}

/// Boost inductor slope against the reflected output `(1-d)·v_out`.
#[inline]
pub fn boost_inductor_slope(l: f64, i_l: f64, v_in: f64, d: f64, v_out: f64, r_series: f64) -> f64 {
    guarded(i_l, v_in - (1.0 - d) * v_out - r_series * i_l, l)
}

pub fn buck_derivatives(
    p: &ConverterParams,
    st: &ConverterState,
    v_in: f64,
    d: f64,
    i_out: f64,
) -> (f64, f64) {
    let di = buck_inductor_slope(p.l, st.i_l, v_in, d, st.v_c, 0.0);
    (di, (st.i_l - i_out) / p.c)
}

pub fn boost_derivatives(
    p: &ConverterParams,
    st: &ConverterState,
    v_in: f64,
    d: f64,
    i_out: f64,
) -> (f64, f64) {
    let di = boost_inductor_slope(p.l, st.i_l, v_in, d, st.v_c, 0.0);
    (di, ((1.0 - d) * st.i_l - i_out) / p.c)
}

/// High-side switch duty for the active switch duty `d` of `mode`.
///
/// Charging runs the half-bridge as a buck from the bus (the high-side
/// switch is active); discharging runs it as a boost from the battery (the
/// low-side switch is active).
pub fn bidir_high_side_duty(d: f64, mode: Mode) -> f64 {
    match mode {
        Mode::Charge => d,
        Mode::Discharge => 1.0 - d,
        Mode::Idle => 0.0,
    }
}

/// Current the half-bridge draws from its bus-side node.
pub fn bidir_bus_current(st: &ConverterState, d: f64, mode: Mode) -> f64 {
    match mode {
        Mode::Idle => 0.0,
        _ => bidir_high_side_duty(d, mode) * st.i_l,
    }
}

/// Half-bridge dynamics. `st.v_c` is the bus-side capacitor voltage and
/// `st.i_l` the signed battery-side inductor current; `d` is the duty of the
/// switch active in `mode`. In `Idle` both switches are open and the engine
/// holds the inductor current at zero, so nothing moves.
pub fn bidir_derivatives(
    p: &ConverterParams,
    st: &ConverterState,
    v_batt: f64,
    d: f64,
    mode: Mode,
) -> (f64, f64) {
    if mode == Mode::Idle {
        return (0.0, 0.0);
    }
    let d_hs = bidir_high_side_duty(d, mode);
    let di = (d_hs * st.v_c - v_batt) / p.l;
    (di, -d_hs * st.i_l / p.c)
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TfError {
    #[error("transfer function evaluated at a pole")]
    PoleHit,
    #[error("transfer function needs non-empty coefficient lists with a nonzero leading denominator coefficient")]
    Malformed,
}

/// Rational function of the Laplace variable, coefficients ascending in s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, TfError> {
        match den.last() {
            Some(&lead) if !num.is_empty() && lead != 0.0 => Ok(TransferFunction { num, den }),
            _ => Err(TfError::Malformed),
        }
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64, TfError> {
        let den = horner(&self.den, s);
        if den.norm() < POLE_EPS {
            return Err(TfError::PoleHit);
        }
        Ok(horner(&self.num, s) / den)
    }

    pub fn dc_gain(&self) -> Result<f64, TfError> {
        self.eval(Complex64::new(0.0, 0.0)).map(|g| g.re)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>, RootsError> {
        polynomial_roots(&self.den)
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>, RootsError> {
        if self.num.len() < 2 {
            return Ok(Vec::new());
        }
        polynomial_roots(&self.num)
    }

    pub fn is_proper(&self) -> bool {
        self.num.len() <= self.den.len()
    }
}

/// Control-to-output model of the buck: `(V/D) / (1 + s·L/R + s²·L·C)`.
pub fn buck_tf(p: &ConverterParams, v_out: f64, d: f64) -> TransferFunction {
    TransferFunction {
        num: vec![v_out / d],
        den: vec![1.0, p.l / p.r_nom, p.l * p.c],
    }
}

/// Control-to-output model of the boost with its right-half-plane zero:
/// `(V/d')·(1 - s·L/(d'²R)) / (1 + s·L/(d'²R) + s²·L·C/d'²)`.
pub fn boost_tf(p: &ConverterParams, v_out: f64, d: f64) -> TransferFunction {
    let dp = 1.0 - d;
    let gain = v_out / dp;
    let tau = p.l / (dp * dp * p.r_nom);
    TransferFunction {
        num: vec![gain, -gain * tau],
        den: vec![1.0, tau, p.l * p.c / (dp * dp)],
    }
}

/// Stored field energy of one converter.
pub fn stored_energy(p: &ConverterParams, st: &ConverterState) -> f64 {
    0.5 * p.l * st.i_l * st.i_l + 0.5 * p.c * st.v_c * st.v_c
}
