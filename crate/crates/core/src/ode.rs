//! Embedded Cash–Karp 5(4) Runge–Kutta integrator with adaptive step size.
//!
//! The integrator works on flat slices of real or complex components and
//! controls the error entry by entry:
//! `|err_i| <= atol + rtol * max(|y_i|, |y_new_i|)`.

use std::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{Error, Result};
use crate::quantum::C64;

pub trait Component:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + AddAssign + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
}

impl Component for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Component for C64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0],
];
const B5: [f64; 6] = [37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0];
const B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

#[derive(Debug, Clone, Copy)]
pub struct CashKarp {
    pub atol: f64,
    pub rtol: f64,
    /// Smallest step the controller may take before reporting stiffness failure.
    pub h_min: f64,
    pub h_max: f64,
}

impl CashKarp {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Self { atol, rtol, h_min: 1e-14, h_max: f64::INFINITY }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    k: [Vec<T>; 6],
    stage: Vec<T>,
    y_new: Vec<T>,
}

impl<T: Component> Workspace<T> {
    pub fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![T::default(); n]),
            stage: vec![T::default(); n],
            y_new: vec![T::default(); n],
        }
    }

    /// Result of the last [`CashKarp::try_step`].
    pub fn proposal(&self) -> &[T] {
        &self.y_new
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl CashKarp {
    /// One trial step of size `h`; the fifth-order proposal is left in the
    /// workspace and the scaled error norm is returned (accept when `<= 1`).
    pub fn try_step<T, F>(&self, f: &mut F, t: f64, y: &[T], h: f64, ws: &mut Workspace<T>) -> f64
    where
        T: Component,
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len();
        f(t, y, &mut ws.k[0]);
        for s in 1..6 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        acc += ws.k[j][i] * (h * a);
                    }
                }
                ws.stage[i] = acc;
            }
            f(t + C[s] * h, &ws.stage, &mut ws.k[s]);
        }
        let mut err = 0.0f64;
        for i in 0..n {
            let mut hi = y[i];
            let mut diff = T::default();
            for s in 0..6 {
                if B5[s] != 0.0 {
                    hi += ws.k[s][i] * (h * B5[s]);
                }
                let db = B5[s] - B4[s];
                if db != 0.0 {
                    diff += ws.k[s][i] * (h * db);
                }
            }
            ws.y_new[i] = hi;
            let scale = self.atol + self.rtol * y[i].magnitude().max(hi.magnitude());
            err = err.max(diff.magnitude() / scale);
        }
        if err.is_nan() {
            f64::INFINITY
        } else {
            err
        }
    }

    /// Takes one accepted step from `t` without passing `t_max` and returns
    /// the new time (exactly `t_max` when the step reaches it). The new state
    /// is left in the workspace proposal; `h` carries the controller's size.
    pub fn attempt<T, F>(
        &self,
        f: &mut F,
        t: f64,
        t_max: f64,
        y: &[T],
        h: &mut f64,
        ws: &mut Workspace<T>,
        stats: &mut StepStats,
    ) -> Result<f64>
    where
        T: Component,
        F: FnMut(f64, &[T], &mut [T]),
    {
        if !(*h > 0.0) || !h.is_finite() {
            *h = (t_max - t).min(self.h_max);
        }
        let h_floor = self.h_min * t_max.abs().max(1.0);
        loop {
            let last = t + *h >= t_max;
            let step = if last { t_max - t } else { h.min(self.h_max) };
            let err = self.try_step(f, t, y, step, ws);
            if err <= 1.0 {
                stats.accepted += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Keep the controller's size when the step was clipped at t_max.
                if !last || step >= *h {
                    *h = (step * grow).min(self.h_max);
                }
                return Ok(if last { t_max } else { t + step });
            }
            stats.rejected += 1;
            *h = step * (0.9 * err.powf(-0.25)).clamp(0.1, 0.5);
            if *h < h_floor {
                return Err(Error::StepUnderflow { tau: t });
            }
        }
    }

    /// Advances `y` from `t0` to `t1` in place. `h` carries the step-size
    /// guess in and the last successful size out.
    pub fn integrate<T, F>(
        &self,
        f: &mut F,
        t0: f64,
        t1: f64,
        y: &mut [T],
        h: &mut f64,
        ws: &mut Workspace<T>,
    ) -> Result<StepStats>
    where
        T: Component,
        F: FnMut(f64, &[T], &mut [T]),
    {
        let mut stats = StepStats::default();
        let mut t = t0;
        while t < t1 {
            t = self.attempt(f, t, t1, y, h, ws, &mut stats)?;
            y.copy_from_slice(&ws.y_new);
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let ck = CashKarp::new(1e-12, 1e-12);
        let mut ws = Workspace::new(1);
        let mut y = [1.0f64];
        let mut h = 0.1;
        ck.integrate(&mut |_, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0], 0.0, 3.0, &mut y, &mut h, &mut ws)
            .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn complex_rotation_preserves_modulus() {
        let ck = CashKarp::new(1e-11, 0.0);
        let mut ws = Workspace::new(1);
        let mut y = [C64::new(1.0, 0.0)];
        let mut h = 1e-3;
        let w = 50.0;
        ck.integrate(
            &mut |_, y: &[C64], dy: &mut [C64]| dy[0] = C64::new(0.0, w) * y[0],
            0.0,
            2.0,
            &mut y,
            &mut h,
            &mut ws,
        )
        .unwrap();
        let want = C64::from_polar(1.0, w * 2.0);
        assert!((y[0] - want).norm() < 1e-8);
    }

    #[test]
    fn fifth_order_convergence() {
        // Global error of fixed steps should drop ~32x when h halves.
        let run = |h: f64| {
            let ck = CashKarp::new(1e300, 0.0);
            let mut ws = Workspace::new(2);
            let mut y = [1.0f64, 0.0];
            let mut f = |_: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[1];
                dy[1] = y[0];
            };
            let mut t = 0.0;
            while t < 1.0 - 1e-12 {
                ck.try_step(&mut f, t, &y.clone(), h, &mut ws);
                y.copy_from_slice(ws.proposal());
                t += h;
            }
            (y[0] - 1f64.cos()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 25.0 && ratio < 40.0, "ratio {ratio}");
    }

    #[test]
    fn underflow_is_reported() {
        let ck = CashKarp::new(1e-12, 0.0);
        let mut ws = Workspace::new(1);
        let mut y = [1.0f64];
        let mut h = 0.1;
        // Finite-time blow-up at t = 1.
        let r = ck.integrate(&mut |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0], 0.0, 2.0, &mut y, &mut h, &mut ws);
        assert!(matches!(r, Err(Error::StepUnderflow { tau }) if tau > 0.9 && tau <= 1.0));
    }
}
