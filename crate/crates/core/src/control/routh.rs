//! Routh-Hurwitz tabulation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Relative size of the value substituted for a zero leading entry.
pub const ZERO_PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RouthError {
    #[error("polynomial must have order >= 1 with a nonzero leading coefficient")]
    BadPolynomial,
    /// Row `row` (counted from the top, row 0 = s^n) vanished entirely:
    /// roots placed symmetrically about the origin.
    #[error("row {row} of the Routh array vanished")]
    DegenerateRow { row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouthTable {
    /// Row `k` corresponds to s^(n-k).
    pub rows: Vec<Vec<f64>>,
    pub sign_changes: usize,
    pub stable: bool,
    /// True if a zero leading entry was replaced by a small positive value.
    pub epsilon_substituted: bool,
}

impl RouthTable {
    pub fn order(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn first_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }
}

/// `a*b - c*d` with results at round-off level of the products snapped to 0.
fn cross(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (p, q) = (a * b, c * d);
    let x = p - q;
    if libm::fabs(x) <= 8.0 * f64::EPSILON * (libm::fabs(p) + libm::fabs(q)) {
        0.0
    } else {
        x
    }
}

/// Builds the Routh array of the polynomial with ascending coefficients `den`.
///
/// A zero leading entry in an otherwise nonzero row is replaced by
/// [`ZERO_PIVOT_EPS`] times the row's largest magnitude. An all-zero row is
/// reported as [`RouthError::DegenerateRow`] instead of being continued with
/// the auxiliary polynomial.
pub fn routh_array(den: &[f64]) -> Result<RouthTable, RouthError> {
    let n = den.len().checked_sub(1).ok_or(RouthError::BadPolynomial)?;
    if n == 0 || den[n] == 0.0 || den.iter().any(|c| !c.is_finite()) {
        return Err(RouthError::BadPolynomial);
    }
    let width = n / 2 + 1;
    let desc = |k: usize| if k <= n { den[n - k] } else { 0.0 };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push((0..width).map(|j| desc(2 * j)).collect());
    rows.push((0..width).map(|j| desc(2 * j + 1)).collect());
    let mut epsilon_substituted = false;

    for r in 1..=n {
        // make row r usable as a pivot row
        let scale = rows[r].iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
        if scale == 0.0 {
            return Err(RouthError::DegenerateRow { row: r });
        }
        if rows[r][0] == 0.0 {
            rows[r][0] = ZERO_PIVOT_EPS * scale;
            epsilon_substituted = true;
        }
        if r == n {
            break;
        }
        let (above, pivot) = (&rows[r - 1], &rows[r]);
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = cross(pivot[0], above[j + 1], above[0], pivot[j + 1]) / pivot[0];
        }
        rows.push(next);
    }
    rows.truncate(n + 1);

    let sign_changes = rows
        .windows(2)
        .filter(|w| (w[0][0] > 0.0) != (w[1][0] > 0.0))
        .count();
    Ok(RouthTable {
        stable: sign_changes == 0,
        sign_changes,
        rows,
        epsilon_substituted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn positive_quadratic_stable() {
        let t = routh_array(&[1.0, 1.0, 1.0]).unwrap();
        assert!(t.stable);
        assert_eq!(t.first_column(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn negative_middle_coefficient_unstable() {
        let t = routh_array(&[1.0, -1.0, 1.0]).unwrap();
        assert!(!t.stable);
        assert_eq!(t.sign_changes, 2);
    }

    #[test]
    fn tabulated_third_order_rows() {
        // 5.2e-7 s³ + 2e-3 s² + 0.01 s + k_p with k_p = 15
        let kp = 15.0;
        let t = routh_array(&[kp, 0.01, 2e-3, 5.2e-7]).unwrap();
        assert_eq!(t.rows[0], vec![5.2e-7, 0.01]);
        assert_eq!(t.rows[1], vec![2e-3, kp]);
        assert_relative_eq!(
            t.rows[2][0],
            (2e-3 * 0.01 - 5.2e-7 * kp) / 2e-3,
            max_relative = 1e-12
        );
        assert_relative_eq!(t.rows[3][0], kp, max_relative = 1e-12);
        assert!(t.stable);
        // past 2e-5 / 5.2e-7 the s¹ entry flips sign
        assert!(!routh_array(&[40.0, 0.01, 2e-3, 5.2e-7]).unwrap().stable);
    }

    #[test]
    fn imaginary_pair_is_degenerate() {
        assert_eq!(
            routh_array(&[1.0, 0.0, 1.0]),
            Err(RouthError::DegenerateRow { row: 1 })
        );
        // (s²+1)(s+1) = s³ + s² + s + 1
        assert_eq!(
            routh_array(&[1.0, 1.0, 1.0, 1.0]),
            Err(RouthError::DegenerateRow { row: 2 })
        );
    }

    #[test]
    fn zero_pivot_substitution() {
        // s⁴ + s³ + 2s² + 2s + 3: zero leading entry in the s² row
        let t = routh_array(&[3.0, 2.0, 2.0, 1.0, 1.0]).unwrap();
        assert!(t.epsilon_substituted);
        assert!(!t.stable);
        assert_eq!(t.sign_changes, 2);
    }

    #[test]
    fn first_order() {
        assert!(routh_array(&[2.0, 1.0]).unwrap().stable);
        assert!(!routh_array(&[-2.0, 1.0]).unwrap().stable);
    }

    #[test]
    fn rejects_constants() {
        assert_eq!(routh_array(&[1.0]), Err(RouthError::BadPolynomial));
        assert_eq!(routh_array(&[1.0, 0.0]), Err(RouthError::BadPolynomial));
        assert_eq!(routh_array(&[]), Err(RouthError::BadPolynomial));
    }
}
