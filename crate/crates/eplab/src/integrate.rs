//! Time integration of the four-variable system and steady-state
//! extraction (the machinery behind the inversion-vs-pump curve).

use crate::error::Result;
use crate::model::{mean_field_rhs, newton_polish, residual_norm, MeanFieldState};
use crate::ode::{Dopri5, StepControl};
use crate::par::par_map;
use crate::params::{derive_rates, ModelParams};

/// Sampled solution of the equations of motion.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample times, strictly increasing, in units of 1/ω.
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    pub params: ModelParams,
}

/// Outcome of a steady-state solve.
#[derive(Debug, Clone, Copy)]
pub struct SteadyReport {
    pub state: MeanFieldState,
    pub converged: bool,
    pub residual: f64,
    /// Integration time spent before the report, in units of 1/ω.
    pub elapsed_time: f64,
}

/// One row of the inversion-vs-pump table.
#[derive(Debug, Clone, Copy)]
pub struct DstRow {
    pub pump_ratio: f64,
    pub d_st: f64,
    pub d0: f64,
    pub converged: bool,
}

/// Default initial condition: dark state at the field-free inversion,
/// with a small seed on φ to leave the invariant manifold when the
/// coupling happens to vanish.
pub fn default_initial_state(p: &ModelParams) -> Result<MeanFieldState> {
    let d0 = derive_rates(p)?.d0;
    Ok(MeanFieldState::new(0.0, d0, 1e-9, 0.0))
}

/// Default horizon: a hundred of the slowest relaxation times.
pub fn default_horizon(p: &ModelParams) -> f64 {
    let r = p.min_positive_rate();
    if r.is_finite() {
        100.0 / r
    } else {
        1e8
    }
}

fn rhs_fn(p: ModelParams) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_t, y, dy| {
        let r = mean_field_rhs(&p, &MeanFieldState::from_slice(y));
        dy[0] = r.n;
        dy[1] = r.d;
        dy[2] = r.phi;
        dy[3] = r.s;
    }
}

/// Integrate the system over [0, t_end], sampling at `n_samples` uniform
/// times (endpoints included).
pub fn integrate(
    p: &ModelParams,
    x0: &MeanFieldState,
    t_end: f64,
    ctrl: StepControl,
    n_samples: usize,
) -> Result<Trajectory> {
    assert!(t_end > 0.0, "t_end must be positive");
    let n_samples = n_samples.max(2);
    let samples: Vec<f64> = (1..n_samples)
        .map(|i| t_end * i as f64 / (n_samples - 1) as f64)
        .collect();

    let f = rhs_fn(*p);
    let solver = Dopri5::new(&f, ctrl);
    let mut times = vec![0.0];
    let mut states = vec![*x0];
    let mut y = x0.to_array().to_vec();
    solver.integrate_sampled(0.0, &mut y, t_end, &samples, &mut |t, y| {
        times.push(t);
        states.push(MeanFieldState::from_slice(y));
    })?;

    Ok(Trajectory { times, states, params: *p })
}

/// Integrate until the autonomous residual drops below
/// `1e-12 * max(1, |x|)`, Newton-polishing the terminal point; a flagged
/// report (never an error) signals non-convergence within the horizon.
pub fn steady_state(p: &ModelParams, x0: &MeanFieldState, horizon: f64) -> Result<SteadyReport> {
    let tol_of = |x: &MeanFieldState| 1e-12 * x.norm().max(1.0);

    let ctrl = StepControl { rtol: 1e-10, atol: 1e-16, ..Default::default() };
    let f = rhs_fn(*p);
    let solver = Dopri5::new(&f, ctrl);

    let n_chunks = 50;
    let chunk = horizon / n_chunks as f64;
    let mut y = x0.to_array().to_vec();
    let mut elapsed = 0.0;
    for _ in 0..n_chunks {
        solver.integrate_sampled(0.0, &mut y, chunk, &[], &mut |_, _| {})?;
        elapsed += chunk;
        let x = MeanFieldState::from_slice(&y);
        // close enough for Newton to take over
        if residual_norm(p, &x) < 1e-7 * x.norm().max(1.0) {
            let polished = newton_polish(p, &x, 50)?;
            let res = residual_norm(p, &polished);
            if res < tol_of(&polished) {
                return Ok(SteadyReport { state: polished, converged: true, residual: res, elapsed_time: elapsed });
            }
        }
    }
    let x = MeanFieldState::from_slice(&y);
    let res = residual_norm(p, &x);
    Ok(SteadyReport { state: x, converged: res < tol_of(&x), residual: res, elapsed_time: elapsed })
}

/// One steady-state solve per pump ratio γ_P/γ_D, rows in input order.
pub fn dst_curve(p: &ModelParams, pump_ratios: &[f64]) -> Result<Vec<DstRow>> {
    let rows = par_map(pump_ratios, |&ratio| -> Result<DstRow> {
        let mut q = *p;
        q.gamma_p = ratio * p.gamma_d;
        let d0 = derive_rates(&q)?.d0;
        let x0 = MeanFieldState::new(0.0, d0, 1e-9, 0.0);
        let report = steady_state(&q, &x0, default_horizon(&q))?;
        Ok(DstRow { pump_ratio: ratio, d_st: report.state.d, d0, converged: report.converged })
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn decoupled_photon_decay() {
        let mut p = defaults();
        p.omega_r = 0.0;
        let d0 = derive_rates(&p).unwrap().d0;
        let n0 = 0.37;
        let x0 = MeanFieldState::new(n0, d0, 0.0, 0.0);
        let t_end = 2.0 / p.gamma_a;
        let traj = integrate(&p, &x0, t_end, StepControl::default(), 5).unwrap();
        for (&t, st) in traj.times.iter().zip(&traj.states) {
            let expect = n0 * (-2.0 * p.gamma_a * t).exp();
            assert!((st.n - expect).abs() <= 1e-8 * expect.max(1e-12), "t = {t}");
        }
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(traj.states[0], x0);
    }

    #[test]
    fn initial_energy_flow_growth_rate() {
        let p = defaults();
        let d0 = derive_rates(&p).unwrap().d0;
        let x0 = MeanFieldState::new(0.0, d0, 0.0, 0.0);
        let rate = p.omega_r / 2.0 * (1.0 + d0);
        // short horizon: phi ≈ rate * t up to O(rate_relax * t) corrections
        let t = 1.0;
        let traj = integrate(&p, &x0, t, StepControl::default(), 2).unwrap();
        let phi = traj.states.last().unwrap().phi;
        assert!((phi - rate * t).abs() < 1e-3 * rate * t, "phi = {phi}");
    }

    #[test]
    fn steady_state_dark_when_unpumped() {
        let mut p = defaults();
        p.gamma_p = 0.0;
        let x0 = MeanFieldState::new(1e-3, -0.5, 0.0, 0.0);
        let rep = steady_state(&p, &x0, default_horizon(&p)).unwrap();
        assert!(rep.converged);
        assert!(rep.state.n.abs() < 1e-9);
        assert!((rep.state.d + 1.0).abs() < 1e-9);
        assert!(rep.state.phi.abs() < 1e-9);
        assert!(rep.state.s.abs() < 1e-9);
    }

    #[test]
    fn steady_state_balanced_pump_no_field() {
        let mut p = defaults();
        p.omega_r = 0.0;
        p.gamma_p = p.gamma_d;
        let x0 = MeanFieldState::new(1e-3, -0.4, 1e-4, 1e-4);
        let rep = steady_state(&p, &x0, default_horizon(&p)).unwrap();
        assert!(rep.converged);
        assert!(rep.state.norm() < 1e-9, "state = {:?}", rep.state);
    }

    #[test]
    fn steady_state_tracks_d0_at_half_pump() {
        let mut p = defaults();
        p.gamma_p = 0.5 * p.gamma_d;
        let x0 = default_initial_state(&p).unwrap();
        let rep = steady_state(&p, &x0, default_horizon(&p)).unwrap();
        assert!(rep.converged);
        assert!((rep.state.d - (-1.0 / 3.0)).abs() < 0.02, "D_st = {}", rep.state.d);
    }

    #[test]
    fn terminal_state_matches_steady_state() {
        let mut p = defaults();
        p.gamma_p = 0.5 * p.gamma_d;
        let x0 = default_initial_state(&p).unwrap();
        let rep = steady_state(&p, &x0, default_horizon(&p)).unwrap();
        let traj = integrate(
            &p,
            &x0,
            default_horizon(&p),
            StepControl { rtol: 1e-10, atol: 1e-16, ..Default::default() },
            2,
        )
        .unwrap();
        let last = traj.states.last().unwrap();
        for (a, b) in last.to_array().iter().zip(rep.state.to_array()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn fixed_points_stay_fixed() {
        let mut p = defaults();
        p.gamma_p = 0.5 * p.gamma_d;
        let x0 = default_initial_state(&p).unwrap();
        let rep = steady_state(&p, &x0, default_horizon(&p)).unwrap();
        assert!(rep.converged);
        let traj = integrate(
            &p,
            &rep.state,
            1e6,
            StepControl { rtol: 1e-10, atol: 1e-16, ..Default::default() },
            2,
        )
        .unwrap();
        let end = traj.states.last().unwrap();
        let drift: f64 = end
            .to_array()
            .iter()
            .zip(rep.state.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(drift < 1e-9, "drift = {drift}");
    }

    #[test]
    fn time_translation_invariance() {
        let mut p = defaults();
        p.gamma_p = 0.5 * p.gamma_d;
        let x0 = default_initial_state(&p).unwrap();
        let ctrl = StepControl { rtol: 1e-11, atol: 1e-18, ..Default::default() };
        let (t1, t2) = (4e4, 1e5);
        let a = integrate(&p, &x0, t1, ctrl, 2).unwrap();
        let mid = *a.states.last().unwrap();
        let b = integrate(&p, &mid, t2 - t1, ctrl, 2).unwrap();
        let direct = integrate(&p, &x0, t2, ctrl, 2).unwrap();
        let (x_two, x_one) = (b.states.last().unwrap(), direct.states.last().unwrap());
        for (u, v) in x_two.to_array().iter().zip(x_one.to_array()) {
            assert!((u - v).abs() < 1e-8 * v.abs().max(1e-3), "{u} vs {v}");
        }
    }

    #[test]
    fn tolerance_refinement_is_consistent() {
        let mut p = defaults();
        p.gamma_p = 0.5 * p.gamma_d;
        let x0 = default_initial_state(&p).unwrap();
        let tau = 1e-8;
        let run = |rtol: f64| {
            integrate(
                &p,
                &x0,
                2e5,
                StepControl { rtol, atol: 1e-18, ..Default::default() },
                2,
            )
            .unwrap()
            .states
            .last()
            .copied()
            .unwrap()
        };
        let coarse = run(tau);
        let fine = run(tau / 10.0);
        for (a, b) in coarse.to_array().iter().zip(fine.to_array()) {
            assert!((a - b).abs() <= 10.0 * tau * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn subthreshold_trajectories_stay_bounded() {
        let mut p = defaults();
        p.gamma_p = 0.9 * p.gamma_d;
        let x0 = default_initial_state(&p).unwrap();
        let traj = integrate(&p, &x0, 1e6, StepControl::default(), 200).unwrap();
        for st in &traj.states {
            assert!(st.is_finite());
            assert!(st.n < 1.0, "n = {}", st.n);
        }
    }

    #[test]
    fn dst_curve_rows() {
        let p = defaults();
        let rows = dst_curve(&p, &[0.0, 1.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].pump_ratio, 0.0);
        assert_eq!(rows[0].d0, -1.0);
        assert!((rows[0].d_st + 1.0).abs() < 1e-8);
        assert_eq!(rows[1].d0, 0.0);
    }
}
