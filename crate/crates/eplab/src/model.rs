//! Mean-field equations of motion and their stationary points.
//!
//! The state is the 4-vector (n, D, φ, s): photons per molecule, population
//! inversion, field–polarization energy flow, and intermolecular
//! polarization correlation.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::params::{gamma_sigma, pump_from_d0, ModelParams};

/// Mean-field state (n, D, φ, s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldState {
    pub n: f64,
    pub d: f64,
    pub phi: f64,
    pub s: f64,
}

impl MeanFieldState {
    pub fn new(n: f64, d: f64, phi: f64, s: f64) -> Self {
        MeanFieldState { n, d, phi, s }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.n, self.d, self.phi, self.s]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        MeanFieldState { n: x[0], d: x[1], phi: x[2], s: x[3] }
    }

    pub fn norm(&self) -> f64 {
        (self.n * self.n + self.d * self.d + self.phi * self.phi + self.s * self.s).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.n.is_finite() && self.d.is_finite() && self.phi.is_finite() && self.s.is_finite()
    }
}

/// Provenance of a stationary triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleSource {
    /// Literal evaluation of the closed-form expressions.
    PrintedFormula,
    /// Linear solve of the stationarity conditions at fixed D = D_0.
    ExactSolve,
}

/// Stationary values of (n, φ, s) at fixed inversion D_0.
#[derive(Debug, Clone, Copy)]
pub struct StationaryTriple {
    pub n_st: f64,
    pub phi_st: f64,
    pub s_st: f64,
    pub source: TripleSource,
}

/// Right-hand side of the four equations of motion.
pub fn mean_field_rhs(p: &ModelParams, x: &MeanFieldState) -> MeanFieldState {
    let gs = gamma_sigma(p.gamma_ph, p.gamma_p, p.gamma_d);
    let sn = p.sqrt_n();
    let om = p.omega_r;
    let MeanFieldState { n, d, phi, s } = *x;

    MeanFieldState {
        n: -2.0 * p.gamma_a * n + 2.0 * sn * om * phi,
        d: p.gamma_p * (1.0 - d) - p.gamma_d * (1.0 + d) - 4.0 * sn * om * phi,
        phi: -(gs + p.gamma_a + p.gamma_cor / 4.0) * phi
            + om / 2.0 * (d + 1.0)
            + sn * om * n * d
            + (p.n() - 1.0) / sn * om * s,
        s: -(2.0 * gs + p.gamma_cor) * s + 2.0 * sn * om * phi * d,
    }
}

/// Jacobian of [`mean_field_rhs`] with respect to (n, D, φ, s).
pub fn mean_field_jacobian(p: &ModelParams, x: &MeanFieldState) -> Matrix4<f64> {
    let gs = gamma_sigma(p.gamma_ph, p.gamma_p, p.gamma_d);
    let sn = p.sqrt_n();
    let om = p.omega_r;
    let c = sn * om;

    Matrix4::new(
        -2.0 * p.gamma_a, 0.0, 2.0 * c, 0.0,
        0.0, -(p.gamma_p + p.gamma_d), -4.0 * c, 0.0,
        c * x.d, om / 2.0 + c * x.n, -(gs + p.gamma_a + p.gamma_cor / 4.0), (p.n() - 1.0) / sn * om,
        0.0, 2.0 * c * x.phi, 2.0 * c * x.d, -(2.0 * gs + p.gamma_cor),
    )
}

/// Euclidean norm of the right-hand side; zero iff `x` is a fixed point.
pub fn residual_norm(p: &ModelParams, x: &MeanFieldState) -> f64 {
    mean_field_rhs(p, x).norm()
}

/// Residuals of the three stationarity conditions (n, φ, s equations)
/// at fixed inversion `d0`, for auditing stationary triples.
pub fn stationarity_residuals(p: &ModelParams, d0: f64, t: &StationaryTriple) -> [f64; 3] {
    let q = coupled_at(p, d0);
    let r = mean_field_rhs(&q, &MeanFieldState::new(t.n_st, d0, t.phi_st, t.s_st));
    [r.n, r.phi, r.s]
}

/// Params with the pump re-derived from `d0` (clamped to [-1, 1) upstream).
fn coupled_at(p: &ModelParams, d0: f64) -> ModelParams {
    let mut q = *p;
    q.gamma_p = p.gamma_d * (1.0 + d0) / (1.0 - d0);
    q
}

/// Closed-form stationary triple as printed, with N_at read as N.
pub fn stationary_printed(p: &ModelParams, d0: f64) -> Result<StationaryTriple> {
    if d0 == 0.0 {
        return Err(Error::ZeroInversion);
    }
    let gp = pump_from_d0(p, d0)?;
    let gs = gamma_sigma(p.gamma_ph, gp, p.gamma_d);
    let gc = p.gamma_cor;
    let n = p.n();
    let om = p.omega_r;

    let common = (1.0 + d0) * (gc + 2.0 * gs) / (gc + 2.0 * gs + 2.0 * p.gamma_a);
    let n_st = -common / (2.0 * n * d0);
    let phi_st = -p.gamma_a * common / (2.0 * d0 * n.powf(1.5) * om);
    let s_st = -(1.0 + d0) * gs / (n * (gc + 2.0 * p.gamma_a + 2.0 * gs));

    Ok(StationaryTriple { n_st, phi_st, s_st, source: TripleSource::PrintedFormula })
}

/// Stationary triple from the exact linear solve of the (n, φ, s)
/// stationarity conditions at fixed D = `d0`, keeping the spontaneous
/// source (Ω_R/2)(D_0 + 1).
pub fn stationary_exact(p: &ModelParams, d0: f64) -> Result<StationaryTriple> {
    let gp = pump_from_d0(p, d0)?;
    let gs = gamma_sigma(p.gamma_ph, gp, p.gamma_d);
    let gc = p.gamma_cor;
    let sn = p.sqrt_n();
    let om = p.omega_r;
    let c = sn * om;

    let m = Matrix3::new(
        -2.0 * p.gamma_a, 2.0 * c, 0.0,
        c * d0, -(gs + p.gamma_a + gc / 4.0), (p.n() - 1.0) / sn * om,
        0.0, 2.0 * c * d0, -(2.0 * gs + gc),
    );
    let b = Vector3::new(0.0, -om / 2.0 * (d0 + 1.0), 0.0);

    let lu = m.lu();
    let x = lu.solve(&b).ok_or(Error::SingularStationarySystem(d0))?;
    // one iterative-refinement pass tightens the residual to the 1e-12 gate
    let r = b - m * x;
    let x = match lu.solve(&r) {
        Some(dx) => x + dx,
        None => x,
    };

    Ok(StationaryTriple { n_st: x[0], phi_st: x[1], s_st: x[2], source: TripleSource::ExactSolve })
}

/// Newton iteration on the full 4-equation system, used to polish
/// near-stationary states to machine-level residuals.
pub fn newton_polish(p: &ModelParams, x0: &MeanFieldState, max_iter: usize) -> Result<MeanFieldState> {
    let mut x = *x0;
    for _ in 0..max_iter {
        let f = mean_field_rhs(p, &x);
        let fv = Vector4::new(f.n, f.d, f.phi, f.s);
        if fv.norm() == 0.0 {
            return Ok(x);
        }
        let j = mean_field_jacobian(p, &x);
        let dx = j
            .lu()
            .solve(&(-fv))
            .ok_or_else(|| Error::Numeric("singular Jacobian in Newton polish".into()))?;
        x = MeanFieldState::new(x.n + dx[0], x.d + dx[1], x.phi + dx[2], x.s + dx[3]);
        if dx.norm() <= 1e-16 * x.norm().max(1.0) {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_rates as dr;

    fn defaults() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn rhs_at_dark_state_with_inversion_d0() {
        let p = defaults();
        let d0 = dr(&p).unwrap().d0;
        let r = mean_field_rhs(&p, &MeanFieldState::new(0.0, d0, 0.0, 0.0));
        assert_eq!(r.n, 0.0);
        // pump/decay balance cancels only to rounding in f64
        assert!(r.d.abs() < 1e-20);
        assert!((r.phi - p.omega_r / 2.0 * (1.0 + d0)).abs() < 1e-20);
        assert_eq!(r.s, 0.0);
    }

    #[test]
    fn rhs_decoupled_decay_when_coupling_off() {
        let mut p = defaults();
        p.omega_r = 0.0;
        let gs = gamma_sigma(p.gamma_ph, p.gamma_p, p.gamma_d);
        let x = MeanFieldState::new(0.3, -0.2, 0.1, -0.05);
        let r = mean_field_rhs(&p, &x);
        assert_eq!(r.n, -2.0 * p.gamma_a * x.n);
        assert_eq!(r.s, -(2.0 * gs + p.gamma_cor) * x.s);
    }

    #[test]
    fn rhs_frozen_reference_vector() {
        // expected values from an exact-rational evaluation of the four
        // equations at gamma_p = 1e-5, gamma_cor = 0
        let p = defaults();
        let x = MeanFieldState::new(1e-6, -1.0 / 3.0, 1e-8, -1e-8);
        let r = mean_field_rhs(&p, &x);
        let expect = [1e-10, -4e-10, 3.3298943501e-6, -5.636666666666667e-11];
        for (got, want) in r.to_array().iter().zip(expect) {
            // absolute floor covers the rounding left by the pump/decay
            // cancellation in the dD/dt component
            assert!((got - want).abs() <= 1e-15 * want.abs() + 1e-20, "{got} vs {want}");
        }
    }

    #[test]
    fn rhs_linear_in_n_phi_s_at_frozen_d() {
        let p = defaults();
        let d = -0.4;
        let x = MeanFieldState::new(0.2, d, -0.3, 0.7);
        let y = MeanFieldState::new(-0.5, d, 0.11, -0.09);
        let xy = MeanFieldState::new(x.n + y.n, d, x.phi + y.phi, x.s + y.s);
        let zero = MeanFieldState::new(0.0, d, 0.0, 0.0);
        let (rx, ry, rxy, r0) = (
            mean_field_rhs(&p, &x),
            mean_field_rhs(&p, &y),
            mean_field_rhs(&p, &xy),
            mean_field_rhs(&p, &zero),
        );
        for i in [0usize, 2, 3] {
            let gap = rxy.to_array()[i] - rx.to_array()[i] - ry.to_array()[i] + r0.to_array()[i];
            assert!(gap.abs() < 1e-18, "component {i}: {gap}");
        }
    }

    #[test]
    fn printed_formula_examples() {
        let p = defaults();
        // common factor (1 + D_0) zeroes everything at d0 = -1
        let t = stationary_printed(&p, -1.0).unwrap();
        assert_eq!((t.n_st, t.phi_st, t.s_st), (0.0, 0.0, 0.0));
        // frozen exact-rational evaluation at d0 = -1/3
        let t = stationary_printed(&p, -1.0 / 3.0).unwrap();
        assert!((t.n_st - 9.115044247787611e-7).abs() < 1e-19);
        assert!((t.phi_st - 4.557522123893805e-9).abs() < 1e-21);
        assert!((t.s_st - -3.03834808259587e-7).abs() < 1e-19);
        assert!(matches!(stationary_printed(&p, 0.0), Err(Error::ZeroInversion)));
    }

    #[test]
    fn printed_formula_large_gamma_cor_limit() {
        let mut p = defaults();
        p.gamma_cor = 1e12;
        let d0 = -0.25;
        let t = stationary_printed(&p, d0).unwrap();
        let limit = -(1.0 + d0) / (2.0 * p.n() * d0);
        assert!((t.n_st - limit).abs() < 1e-9 * limit.abs());
    }

    #[test]
    fn exact_solve_matches_frozen_oracle() {
        // independent symbolic 3x3 solve at the default rates, d0 = -1/3:
        // n = 41200/45234913, phi = 206/45234913, s = -4000/135704739
        let p = defaults();
        let t = stationary_exact(&p, -1.0 / 3.0).unwrap();
        let (n, phi, s) = (41200.0 / 45234913.0, 206.0 / 45234913.0, -4000.0 / 135704739.0);
        assert!((t.n_st - n).abs() < 1e-14 * n);
        assert!((t.phi_st - phi).abs() < 1e-14 * phi);
        assert!((t.s_st - s).abs() < 1e-14 * s.abs());
    }

    #[test]
    fn exact_solve_zero_source_at_full_depletion() {
        let p = defaults();
        let t = stationary_exact(&p, -1.0).unwrap();
        assert_eq!((t.n_st, t.phi_st, t.s_st), (0.0, 0.0, 0.0));
    }

    #[test]
    fn exact_solve_forced_relations() {
        let p = defaults();
        for d0 in [-0.9, -0.5, -1.0 / 3.0, -0.01, 0.2] {
            let gp = pump_from_d0(&p, d0).unwrap();
            let gs = gamma_sigma(p.gamma_ph, gp, p.gamma_d);
            let t = stationary_exact(&p, d0).unwrap();
            let phi_expect = p.gamma_a * t.n_st / (p.sqrt_n() * p.omega_r);
            let s_expect = 2.0 * p.gamma_a * d0 * t.n_st / (2.0 * gs + p.gamma_cor);
            assert!((t.phi_st - phi_expect).abs() <= 1e-12 * phi_expect.abs().max(1e-300), "d0={d0}");
            assert!((t.s_st - s_expect).abs() <= 1e-12 * s_expect.abs().max(1e-300), "d0={d0}");
            // phi/n ratio at the default rates is gamma_a / (sqrt(N) Omega_R) = 5e-3
            assert!((t.phi_st / t.n_st - 5e-3).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_solve_residuals_below_gate() {
        let p = defaults();
        for d0 in [-0.99, -0.5, -1.0 / 3.0, -1e-3] {
            let t = stationary_exact(&p, d0).unwrap();
            let r = stationarity_residuals(&p, d0, &t);
            let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            assert!(norm < 1e-12, "d0 = {d0}: residual {norm}");
        }
    }

    #[test]
    fn printed_satisfies_field_equation_but_not_the_others() {
        let p = defaults();
        let d0 = -1.0 / 3.0;
        let t = stationary_printed(&p, d0).unwrap();
        let r = stationarity_residuals(&p, d0, &t);
        // the photon-number equation is stationary by construction of the printed formulas
        assert!(r[0].abs() < 1e-25, "n residual {}", r[0]);
        // the phi/s equations are not zeroed by the printed formulas
        assert!(r[1].abs() > 1e-12, "phi residual unexpectedly small: {}", r[1]);
    }

    #[test]
    fn residual_norm_examples() {
        let p = defaults();
        let d0 = dr(&p).unwrap().d0;
        let x = MeanFieldState::new(0.0, d0, 0.0, 0.0);
        let expect = p.omega_r / 2.0 * (1.0 + d0);
        assert!((residual_norm(&p, &x) - expect).abs() < 1e-20);

        // exact triple at D = D_0: residual dominated by the dD/dt component
        let t = stationary_exact(&p, d0).unwrap();
        let r = mean_field_rhs(&p, &MeanFieldState::new(t.n_st, d0, t.phi_st, t.s_st));
        let dd_expect = -4.0 * p.sqrt_n() * p.omega_r * t.phi_st;
        assert!((r.d - dd_expect).abs() < 1e-12 * dd_expect.abs());
        assert!((residual_norm(&p, &MeanFieldState::new(t.n_st, d0, t.phi_st, t.s_st)) - dd_expect.abs()).abs() < 1e-12 * dd_expect.abs());
    }

    #[test]
    fn newton_polish_reaches_machine_residual() {
        let p = defaults();
        let d0 = dr(&p).unwrap().d0;
        let t = stationary_exact(&p, d0).unwrap();
        // seed near but not at the full-system fixed point
        let x0 = MeanFieldState::new(t.n_st, d0, t.phi_st, t.s_st);
        let x = newton_polish(&p, &x0, 50).unwrap();
        assert!(residual_norm(&p, &x) < 1e-13 * x.norm().max(1.0));
    }
}
