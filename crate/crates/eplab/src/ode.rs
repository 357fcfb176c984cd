//! Embedded Runge–Kutta integrator (Dormand–Prince 5(4)) with a PI step
//! controller, shared by the mean-field integrator and the vectorized
//! density-matrix evolution.

use crate::error::{Error, Result};

/// Step-size controls.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; if zero, chosen from the first derivative evaluation.
    pub h_init: f64,
    /// Underflow threshold: the controller aborting below this step size.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-10, atol: 1e-14, h_init: 0.0, h_min: 1e-18, max_steps: 50_000_000 }
    }
}

// Dormand-Prince coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// b5 - b4 (error estimator weights over k1..k7)
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end`, invoking `observe`
/// after every accepted step. Steps are clipped to land exactly on
/// `t_end` and on any time the caller requests through `next_stop`.
pub struct Dopri5<'a> {
    pub ctrl: StepControl,
    pub f: &'a dyn Fn(f64, &[f64], &mut [f64]),
}

impl<'a> Dopri5<'a> {
    pub fn new(f: &'a dyn Fn(f64, &[f64], &mut [f64]), ctrl: StepControl) -> Self {
        Dopri5 { ctrl, f }
    }

    /// Integrate to `t_end`, returning the terminal state.
    pub fn integrate(&self, t0: f64, y0: &[f64], t_end: f64) -> Result<Vec<f64>> {
        let mut y = y0.to_vec();
        self.integrate_sampled(t0, &mut y, t_end, &[], &mut |_, _| {})?;
        Ok(y)
    }

    /// Integrate to `t_end`, calling `on_sample(t, y)` at every time in
    /// `samples` (must be increasing and within [t0, t_end]). The state
    /// lands exactly on each sample time by step clipping.
    pub fn integrate_sampled(
        &self,
        t0: f64,
        y: &mut Vec<f64>,
        t_end: f64,
        samples: &[f64],
        on_sample: &mut dyn FnMut(f64, &[f64]),
    ) -> Result<()> {
        let n = y.len();
        let mut t = t0;
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        let mut ytmp = vec![0.0; n];
        let mut y5 = vec![0.0; n];

        (self.f)(t, y, &mut k[0]);
        let mut h = if self.ctrl.h_init > 0.0 {
            self.ctrl.h_init
        } else {
            initial_step(t_end - t0, y, &k[0], self.ctrl.rtol, self.ctrl.atol)
        };

        let mut sample_idx = 0;
        while sample_idx < samples.len() && samples[sample_idx] <= t {
            on_sample(samples[sample_idx], y);
            sample_idx += 1;
        }

        let mut err_prev: f64 = 1.0;
        let mut steps = 0;
        while t < t_end {
            steps += 1;
            if steps > self.ctrl.max_steps {
                return Err(Error::Numeric(format!("step budget exhausted at t = {t}")));
            }
            let mut stop = t_end;
            if sample_idx < samples.len() {
                stop = stop.min(samples[sample_idx]);
            }
            let mut h_step = h;
            let mut clipped = false;
            if t + h_step >= stop {
                h_step = stop - t;
                clipped = true;
            }
            if !clipped && h_step < self.ctrl.h_min {
                return Err(Error::StepUnderflow { t, h: h_step });
            }
            let hs = h_step;

            // six derivative stages (k[0] holds f(t, y) via FSAL)
            for stage in 0..6 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(stage + 1) {
                        acc += A[stage][j] * kj[i];
                    }
                    ytmp[i] = y[i] + hs * acc;
                }
                let (t_st, dst) = (t + C[stage] * hs, stage + 1);
                (self.f)(t_st, &ytmp, &mut k[dst]);
            }
            // 5th-order solution is stage 7's argument (A row 5 = b coefficients)
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc += A[5][j] * kj[i];
                }
                y5[i] = y[i] + hs * acc;
            }

            // weighted RMS error estimate
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                e *= hs;
                let sc = self.ctrl.atol + self.ctrl.rtol * y[i].abs().max(y5[i].abs());
                err += (e / sc) * (e / sc);
            }
            err = (err / n as f64).sqrt().max(1e-300);

            if err <= 1.0 {
                t = if clipped { stop } else { t + hs };
                std::mem::swap(y, &mut y5);
                k.swap(0, 6); // FSAL
                while sample_idx < samples.len() && samples[sample_idx] <= t {
                    on_sample(samples[sample_idx], y);
                    sample_idx += 1;
                }
                if !clipped {
                    // PI controller (order 5)
                    let fac = 0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                    h = hs * fac.clamp(0.2, 5.0);
                    err_prev = err;
                }
            } else {
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        Ok(())
    }
}

fn initial_step(span: f64, y: &[f64], dy: &[f64], rtol: f64, atol: f64) -> f64 {
    let ynorm = y.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let dnorm = dy.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let scale = (atol + rtol * ynorm) / dnorm.max(1e-300);
    (0.01 * scale).min(span / 100.0).max(1e-12 * span)
}
