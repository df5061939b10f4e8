//! Classic fixed-step fourth-order Runge-Kutta.

use alloc::vec;
use alloc::vec::Vec;

/// Stage buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `x` by `h` under the autonomous field `f(x, dx)`.
    pub fn step<E, F>(&mut self, x: &mut [f64], h: f64, mut f: F) -> Result<(), E>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    {
        let n = x.len();
        f(x, &mut self.k1)?;
        for j in 0..n {
            self.tmp[j] = x[j] + 0.5 * h * self.k1[j];
        }
        f(&self.tmp, &mut self.k2)?;
        for j in 0..n {
            self.tmp[j] = x[j] + 0.5 * h * self.k2[j];
        }
        f(&self.tmp, &mut self.k3)?;
        for j in 0..n {
            self.tmp[j] = x[j] + h * self.k3[j];
        }
        f(&self.tmp, &mut self.k4)?;
        for j in 0..n {
            x[j] += h / 6.0 * (self.k1[j] + 2.0 * self.k2[j] + 2.0 * self.k3[j] + self.k4[j]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::convert::Infallible;

    fn decay(h: f64) -> f64 {
        let mut rk = Rk4::new(1);
        let mut x = [1.0];
        let n = libm::round(1.0 / h) as usize;
        for _ in 0..n {
            rk.step(&mut x, h, |x, dx| {
                dx[0] = -x[0];
                Ok::<(), Infallible>(())
            })
            .unwrap();
        }
        x[0]
    }

    #[test]
    fn fourth_order_convergence() {
        let exact = libm::exp(-1.0);
        let e1 = libm::fabs(decay(0.1) - exact);
        let e2 = libm::fabs(decay(0.05) - exact);
        let order = libm::log2(e1 / e2);
        assert!((order - 4.0).abs() < 0.1, "observed order {order}");
    }

    #[test]
    fn oscillator_energy_nearly_kept() {
        let mut rk = Rk4::new(2);
        let mut x = [1.0, 0.0];
        for _ in 0..1000 {
            rk.step(&mut x, 1e-3, |x, dx| {
                dx[0] = x[1];
                dx[1] = -x[0];
                Ok::<(), Infallible>(())
            })
            .unwrap();
        }
        assert!((x[0] - libm::cos(1.0)).abs() < 1e-12);
        assert!((x[1] + libm::sin(1.0)).abs() < 1e-12);
    }
}
