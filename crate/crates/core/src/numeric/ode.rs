//! Adaptive Dormand–Prince 5(4) integrator for scalar ODEs.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            ..Default::default()
        }
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    /// Integrate `y' = f(t, y)` from `(t0, y0)` to `t1 > t0`.
    ///
    /// `observe` is called with every accepted `(t, y)`, ending exactly at `t1`.
    /// `h_init` seeds the first trial step; the last accepted step size is
    /// returned alongside `y(t1)` so consecutive calls can chain.
    pub fn integrate<F, O>(
        &self,
        f: F,
        t0: f64,
        y0: f64,
        t1: f64,
        h_init: Option<f64>,
        mut observe: O,
    ) -> Result<(f64, f64)>
    where
        F: Fn(f64, f64) -> f64,
        O: FnMut(f64, f64),
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok((y0, h_init.unwrap_or(0.0)));
        }
        let mut t = t0;
        let mut y = y0;
        let mut h = h_init
            .filter(|h| *h > 0.0)
            .unwrap_or(span * 1e-3)
            .min(self.max_step)
            .min(span);
        let mut k1 = f(t, y);
        let mut last_h;
        for _ in 0..self.max_steps {
            let remaining = t1 - t;
            let final_step = h >= remaining;
            if final_step {
                h = remaining;
            }
            let mut k = [0.0; 7];
            k[0] = k1;
            k[1] = f(t + C[1] * h, y + h * A2[0] * k[0]);
            k[2] = f(t + C[2] * h, y + h * (A3[0] * k[0] + A3[1] * k[1]));
            k[3] = f(
                t + C[3] * h,
                y + h * (A4[0] * k[0] + A4[1] * k[1] + A4[2] * k[2]),
            );
            k[4] = f(
                t + C[4] * h,
                y + h * (A5[0] * k[0] + A5[1] * k[1] + A5[2] * k[2] + A5[3] * k[3]),
            );
            k[5] = f(
                t + h,
                y + h
                    * (A6[0] * k[0] + A6[1] * k[1] + A6[2] * k[2] + A6[3] * k[3] + A6[4] * k[4]),
            );
            let y5 = y + h * (0..6).map(|i| B5[i] * k[i]).sum::<f64>();
            k[6] = f(t + h, y5);
            let y4 = y + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();

            let scale = self.atol + self.rtol * y.abs().max(y5.abs());
            let err = ((y5 - y4) / scale).abs();
            if !y5.is_finite() || !err.is_finite() {
                h *= 0.25;
            } else if err <= 1.0 {
                t = if final_step { t1 } else { t + h };
                y = y5;
                k1 = k[6];
                last_h = h;
                observe(t, y);
                if final_step {
                    return Ok((y, last_h));
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * factor).min(self.max_step);
            } else {
                h *= (0.9 * err.powf(-0.2)).max(0.2);
            }
            if h <= 1e-14 * t.abs().max(span) {
                return Err(Error::IntegratorFailure { t });
            }
        }
        Err(Error::IntegratorFailure { t })
    }

    /// Solution values at each of the strictly increasing `times` (the first
    /// entry is the initial time).
    pub fn solve_at<F>(&self, f: F, y0: f64, times: &[f64]) -> Result<Vec<f64>>
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut out = Vec::with_capacity(times.len());
        if times.is_empty() {
            return Ok(out);
        }
        out.push(y0);
        let mut y = y0;
        let mut h = None;
        for w in times.windows(2) {
            let (y_next, h_last) = self.integrate(&f, w[0], y, w[1], h, |_, _| {})?;
            y = y_next;
            h = Some(h_last);
            out.push(y);
        }
        Ok(out)
    }
}
