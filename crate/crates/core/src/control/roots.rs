//! Durand-Kerner (Weierstrass) simultaneous root iteration.

use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;

const MAX_ITER: usize = 5000;
/// Relative backward error required of every root.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RootsError {
    #[error("polynomial must have order >= 1 with a nonzero leading coefficient")]
    Degenerate,
    #[error("Durand-Kerner did not converge (worst relative residual {0:e})")]
    NoConvergence(f64),
}

fn eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// |p(z)| scaled by Σ|a_k||z|^k, the backward error of `z` as a root.
fn relative_residual(coeffs: &[f64], z: Complex64) -> f64 {
    let r = z.norm();
    let scale = coeffs
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * r + libm::fabs(c));
    if scale == 0.0 {
        0.0
    } else {
        eval(coeffs, z).norm() / scale
    }
}

/// All complex roots of the polynomial with ascending coefficients `coeffs`,
/// sorted by real part, then imaginary part.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, RootsError> {
    // trailing zeros would lower the order
    let order = match coeffs.iter().rposition(|&c| c != 0.0) {
        Some(n) if n >= 1 => n,
        _ => return Err(RootsError::Degenerate),
    };
    let coeffs = &coeffs[..=order];
    let lead = coeffs[order];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();

    // start on a circle sized by the Cauchy bound, rotated off the real axis
    let radius = 1.0
        + monic[..order]
            .iter()
            .fold(0.0f64, |m, c| m.max(libm::fabs(*c)));
    let radius = radius.min(1e6).max(1e-3);
    let mut z: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = 2.0 * core::f64::consts::PI * k as f64 / order as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();

    for _ in 0..MAX_ITER {
        let mut max_step = 0.0f64;
        for k in 0..order {
            let num = eval(&monic, z[k]);
            let den = z
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, zj)| acc * (z[k] - zj));
            if den.norm() == 0.0 {
                // coincident iterates: nudge apart deterministically
                z[k] += Complex64::new(1e-8 * radius, 1e-8 * radius);
                max_step = f64::INFINITY;
                continue;
            }
            let step = num / den;
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if max_step < 1e-15 {
            break;
        }
    }

    let worst = z
        .iter()
        .map(|&r| relative_residual(coeffs, r))
        .fold(0.0f64, f64::max);
    if !(worst < RESIDUAL_TOL) {
        return Err(RootsError::NoConvergence(worst));
    }
    // real roots come back with round-off imaginary parts; snap them
    for r in z.iter_mut() {
        if libm::fabs(r.im) <= 1e-12 * (1.0 + libm::fabs(r.re)) {
            r.im = 0.0;
        }
    }
    z.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
    });
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factored_quadratic() {
        let r = polynomial_roots(&[2.0, -3.0, 1.0]).unwrap();
        assert_relative_eq!(r[0].re, 1.0, epsilon = 1e-10);
        assert_relative_eq!(r[1].re, 2.0, epsilon = 1e-10);
        assert_eq!(r[0].im, 0.0);
    }

    #[test]
    fn imaginary_pair() {
        let r = polynomial_roots(&[1.0, 0.0, 1.0]).unwrap();
        assert!(r[0].re.abs() < 1e-10 && r[1].re.abs() < 1e-10);
        assert_relative_eq!(r[0].im, -1.0, epsilon = 1e-10);
        assert_relative_eq!(r[1].im, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn linear() {
        let r = polynomial_roots(&[-1.0, 1.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r[0].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_is_degenerate() {
        assert_eq!(polynomial_roots(&[3.0]), Err(RootsError::Degenerate));
        assert_eq!(polynomial_roots(&[3.0, 0.0]), Err(RootsError::Degenerate));
    }

    #[test]
    fn widely_scaled_plant() {
        // LC s² + (L/R) s + 1 with L = 1e-3, C = 1e-4, R = 10
        let r = polynomial_roots(&[1.0, 1e-4, 1e-7]).unwrap();
        for z in &r {
            assert!(relative_residual(&[1.0, 1e-4, 1e-7], *z) < RESIDUAL_TOL);
            assert_relative_eq!(z.re, -500.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn sextic_with_known_roots() {
        // (s+1)(s+2)(s+3)(s-4)(s²+2s+5)
        let coeffs = [-120.0, -238.0, -165.0, -54.0, -4.0, 4.0, 1.0];
        let r = polynomial_roots(&coeffs).unwrap();
        assert_eq!(r.len(), 6);
        let expected = [(-3.0, 0.0), (-2.0, 0.0), (-1.0, -2.0), (-1.0, 0.0), (-1.0, 2.0), (4.0, 0.0)];
        for (re, im) in expected {
            let hit = r
                .iter()
                .any(|z| (z.re - re).abs() < 1e-8 && (z.im - im).abs() < 1e-8);
            assert!(hit, "missing root {re} + {im}i in {r:?}");
        }
        assert!(r.windows(2).all(|w| w[0].re <= w[1].re));
    }
}
