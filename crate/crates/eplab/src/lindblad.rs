//! Exact two-molecule density-matrix benchmark.
//!
//! Evolves the full Lindblad master equation for two two-level molecules
//! coupled to a truncated cavity mode and checks each dissipator's decay
//! rate against the closed-form value. This is the independent oracle
//! behind the mean-field damping terms: in particular the correlation
//! dissipator must damp the field-molecule coherence four times slower
//! (per excitation) than the molecule-molecule correlation.
//!
//! Basis ordering: molecule 1 ⊗ molecule 2 ⊗ Fock, with (g, e) per
//! molecule, so dim = 4 (n_max + 1).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{Dopri5, StepControl};
use crate::params::ModelParams;

pub type CMat = DMatrix<Complex64>;

const N_MOL: f64 = 2.0;

/// Truncated product Hilbert space.
#[derive(Debug, Clone, Copy)]
pub struct HilbertSpace {
    /// Highest retained Fock level (must be >= 1).
    pub n_max: usize,
}

impl HilbertSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Config("Fock cutoff must retain at least |0> and |1>".into()));
        }
        Ok(HilbertSpace { n_max })
    }

    pub fn dim(&self) -> usize {
        4 * (self.n_max + 1)
    }
}

/// The lifted operators and rotating-frame Hamiltonian.
pub struct OperatorSet {
    pub space: HilbertSpace,
    pub a: CMat,
    pub sigma: [CMat; 2],
    pub dz: [CMat; 2],
    pub h: CMat,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Build the lifted operator set with single-molecule coupling `omega`.
pub fn build_operators(space: HilbertSpace, omega: f64) -> OperatorSet {
    let nf = space.n_max + 1;
    let mut a_fock = CMat::zeros(nf, nf);
    for n in 1..nf {
        a_fock[(n - 1, n)] = c((n as f64).sqrt());
    }
    // single-molecule operators in the (g, e) basis
    let mut sig = CMat::zeros(2, 2);
    sig[(0, 1)] = c(1.0); // sigma |e> = |g>
    let mut dz = CMat::zeros(2, 2);
    dz[(0, 0)] = c(-1.0);
    dz[(1, 1)] = c(1.0);

    let i2 = eye(2);
    let i_f = eye(nf);

    let a = i2.kronecker(&i2).kronecker(&a_fock);
    let sigma1 = sig.kronecker(&i2).kronecker(&i_f);
    let sigma2 = i2.kronecker(&sig).kronecker(&i_f);
    let dz1 = dz.kronecker(&i2).kronecker(&i_f);
    let dz2 = i2.kronecker(&dz).kronecker(&i_f);

    let a_dag = a.adjoint();
    let h = (&a_dag * &sigma1 + &a * sigma1.adjoint() + &a_dag * &sigma2 + &a * sigma2.adjoint())
        * c(omega);

    OperatorSet { space, a, sigma: [sigma1, sigma2], dz: [dz1, dz2], h }
}

/// Which dissipators enter the Liouvillian.
#[derive(Debug, Clone, Copy, Default)]
pub struct DissipatorSpec {
    pub cavity: bool,
    pub dephasing: bool,
    pub decay: bool,
    pub pump: bool,
    pub correlation: bool,
}

impl DissipatorSpec {
    pub fn all() -> Self {
        DissipatorSpec { cavity: true, dephasing: true, decay: true, pump: true, correlation: true }
    }

    pub fn none() -> Self {
        DissipatorSpec::default()
    }
}

/// Column-major vectorization superoperator for `A rho B`: B^T ⊗ A.
fn sandwich(a: &CMat, b: &CMat) -> CMat {
    b.transpose().kronecker(a)
}

/// Superoperator for the dissipator `rate (J rho J† − ½{J†J, rho})`.
fn dissipator(j: &CMat, rate: f64) -> CMat {
    let dim = j.nrows();
    let jj = j.adjoint() * j;
    let id = eye(dim);
    (sandwich(j, &j.adjoint()) - (sandwich(&jj, &id) + sandwich(&id, &jj)) * c(0.5)) * c(rate)
}

/// Liouvillian over column-major vectorized density matrices.
///
/// Jump rates are calibrated so that the induced damping of the
/// mean-field moments matches the equations of motion term by term:
/// cavity D[a] at 2γ_a, per-molecule dephasing D[D_j] at γ_ph/2,
/// decay D[σ_j] at γ_D, pump D[σ_j†] at γ_P, and the collective
/// correlation dissipator D[D_1 − D_2] at γ_cor/8 (its two-molecule
/// form), which damps ⟨a†σ_j⟩ at γ_cor/4 and ⟨σ_1†σ_2⟩ at γ_cor.
pub fn build_liouvillian(p: &ModelParams, ops: &OperatorSet, spec: DissipatorSpec, with_hamiltonian: bool) -> CMat {
    let dim = ops.space.dim();
    let mut l = CMat::zeros(dim * dim, dim * dim);

    if with_hamiltonian {
        let id = eye(dim);
        l += (sandwich(&ops.h, &id) - sandwich(&id, &ops.h)) * Complex64::new(0.0, -1.0);
    }
    if spec.cavity {
        l += dissipator(&ops.a, 2.0 * p.gamma_a);
    }
    if spec.dephasing {
        for dz in &ops.dz {
            l += dissipator(dz, p.gamma_ph / 2.0);
        }
    }
    if spec.decay {
        for s in &ops.sigma {
            l += dissipator(s, p.gamma_d);
        }
    }
    if spec.pump {
        for s in &ops.sigma {
            l += dissipator(&s.adjoint(), p.gamma_p);
        }
    }
    if spec.correlation {
        let j = &ops.dz[0] - &ops.dz[1];
        l += dissipator(&j, p.gamma_cor / 8.0);
    }
    l
}

/// Population stranded at the top retained Fock level; when this is not
/// small the cutoff is too low for the state being evolved.
pub fn top_level_population(space: HilbertSpace, rho: &CMat) -> f64 {
    let nf = space.n_max + 1;
    let mut pop = 0.0;
    for m in 0..4 {
        let i = m * nf + space.n_max;
        pop += rho[(i, i)].re;
    }
    pop
}

fn unvec(dim: usize, y: &[f64]) -> CMat {
    CMat::from_fn(dim, dim, |r, q| {
        let k = q * dim + r;
        Complex64::new(y[2 * k], y[2 * k + 1])
    })
}

fn vectorize(rho: &CMat) -> Vec<f64> {
    rho.as_slice()
        .iter()
        .flat_map(|z| [z.re, z.im])
        .collect()
}

/// Evolve `rho0` under the Liouvillian, returning the density matrix at
/// every requested time (increasing, starting at or after 0). Aborts if
/// the state drifts non-positive beyond tolerance.
pub fn evolve(l: &CMat, rho0: &CMat, times: &[f64], ctrl: StepControl) -> Result<Vec<CMat>> {
    let dim = rho0.nrows();
    let d2 = dim * dim;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        // complex matvec L * vec(rho) over the interleaved real layout
        for r in 0..d2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..d2 {
                let z = Complex64::new(y[2 * q], y[2 * q + 1]);
                acc += l[(r, q)] * z;
            }
            dy[2 * r] = acc.re;
            dy[2 * r + 1] = acc.im;
        }
    };
    let solver = Dopri5::new(&rhs, ctrl);
    let mut y = vectorize(rho0);
    let t_end = *times.last().unwrap_or(&0.0);
    let mut out = Vec::with_capacity(times.len());
    solver.integrate_sampled(0.0, &mut y, t_end, times, &mut |_t, y| {
        out.push(unvec(dim, y));
    })?;

    for rho in &out {
        let herm_defect = (rho - rho.adjoint()).norm();
        if herm_defect > 1e-8 {
            return Err(Error::Numeric(format!("hermiticity defect {herm_defect:e}")));
        }
        let sym = (rho + rho.adjoint()) * c(0.5);
        let min_eig = sym
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &v| a.min(v));
        if min_eig < -1e-8 {
            return Err(Error::PositivityViolation(min_eig));
        }
    }
    Ok(out)
}

fn expect(op: &CMat, rho: &CMat) -> Complex64 {
    (op * rho).trace()
}

/// Mean-field-normalized moments plus the raw correlators used by the
/// rate checks.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub n: f64,
    pub d: f64,
    pub phi: f64,
    pub s: f64,
    pub n_raw: f64,
    pub a_dag_sigma1: Complex64,
    pub sigma1_dag_sigma2: Complex64,
}

/// Moments of a two-molecule state, scaled the way the mean-field
/// variables are (photon number per molecule, symmetrized inversion,
/// √N-scaled coherence, pair-averaged correlation).
pub fn moments(ops: &OperatorSet, rho: &CMat) -> Moments {
    let a_dag = ops.a.adjoint();
    let n_raw = expect(&(&a_dag * &ops.a), rho).re;
    let d = 0.5 * (expect(&ops.dz[0], rho).re + expect(&ops.dz[1], rho).re);

    let sum_sigma = &ops.sigma[0] + &ops.sigma[1];
    let cross = &ops.a * sum_sigma.adjoint() - &a_dag * &sum_sigma;
    let phi = (Complex64::new(0.0, 1.0) / c(2.0 * N_MOL.powf(1.5)) * expect(&cross, rho)).re;

    let s12 = expect(&(ops.sigma[0].adjoint() * &ops.sigma[1]), rho);
    let s21 = expect(&(ops.sigma[1].adjoint() * &ops.sigma[0]), rho);
    let s = ((s12 + s21) / c(N_MOL * (N_MOL - 1.0))).re;

    let a_dag_sigma1 = expect(&(&a_dag * &ops.sigma[0]), rho);

    Moments { n: n_raw / N_MOL, d, phi, s, n_raw, a_dag_sigma1, sigma1_dag_sigma2: s12 }
}

/// Log-linear least-squares fit of `values ~ A exp(-rate t)`.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub rate: f64,
    /// Max absolute log-residual of the fit.
    pub residual: f64,
}

pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Config("decay fit needs >= 3 matched samples".into()));
    }
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numeric("decay fit given non-positive samples".into()));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tbar = times.iter().sum::<f64>() / n;
    let lbar = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &l) in times.iter().zip(&logs) {
        sxx += (t - tbar) * (t - tbar);
        sxy += (t - tbar) * (l - lbar);
    }
    if sxx == 0.0 {
        return Err(Error::Numeric("decay fit needs distinct sample times".into()));
    }
    let slope = sxy / sxx;
    let residual = times
        .iter()
        .zip(&logs)
        .map(|(&t, &l)| (l - (lbar + slope * (t - tbar))).abs())
        .fold(0.0f64, f64::max);
    Ok(DecayFit { rate: -slope, residual })
}

/// One line of the dissipator-rate audit.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub dissipator: &'static str,
    pub observable: &'static str,
    pub fitted_rate: f64,
    pub analytic_rate: f64,
    pub rel_err: f64,
}

/// Closed-form damping rates of the two-molecule correlation dissipator
/// generalized to `n` emitters: (coherence rate, correlation rate, ratio).
pub fn analytic_cor_rates(n: f64, gamma_cor: f64) -> (f64, f64, f64) {
    (gamma_cor * (n - 1.0) / (2.0 * n), gamma_cor, 2.0 * n / (n - 1.0))
}

// -- probe states -------------------------------------------------------------

fn basis_index(space: HilbertSpace, m1: usize, m2: usize, fock: usize) -> usize {
    (m1 * 2 + m2) * (space.n_max + 1) + fock
}

fn pure(space: HilbertSpace, amps: &[(usize, Complex64)]) -> CMat {
    let dim = space.dim();
    let mut psi = CMat::zeros(dim, 1);
    for &(i, amp) in amps {
        psi[(i, 0)] = amp;
    }
    let norm = psi.norm();
    psi /= c(norm);
    &psi * psi.adjoint()
}

/// (|g,1⟩ + |e,0⟩)/√2 on molecule 1 ⊗ |g⟩ on molecule 2: carries
/// ⟨a†σ₁⟩ = 1/2.
pub fn field_coherence_state(space: HilbertSpace) -> CMat {
    let half = c(std::f64::consts::FRAC_1_SQRT_2);
    pure(space, &[(basis_index(space, 0, 0, 1), half), (basis_index(space, 1, 0, 0), half)])
}

/// (|eg⟩ + |ge⟩)/√2 ⊗ |0⟩: carries ⟨σ₁†σ₂⟩ = 1/2.
pub fn symmetric_molecular_state(space: HilbertSpace) -> CMat {
    let half = c(std::f64::consts::FRAC_1_SQRT_2);
    pure(space, &[(basis_index(space, 1, 0, 0), half), (basis_index(space, 0, 1, 0), half)])
}

fn product_state(space: HilbertSpace, m1: usize, m2: usize, fock: usize) -> CMat {
    pure(space, &[(basis_index(space, m1, m2, fock), c(1.0))])
}

// ------------------------------------------------------------------------------

fn audit_one(
    p: &ModelParams,
    ops: &OperatorSet,
    spec: DissipatorSpec,
    rho0: &CMat,
    dissipator: &'static str,
    observable: &'static str,
    analytic_rate: f64,
    extract: &dyn Fn(&Moments) -> f64,
) -> Result<OracleRow> {
    let l = build_liouvillian(p, ops, spec, false);
    let horizon = 2.0 / analytic_rate;
    let times: Vec<f64> = (0..50).map(|i| horizon * i as f64 / 49.0).collect();
    let ctrl = StepControl { rtol: 1e-12, atol: 1e-16, ..Default::default() };
    let states = evolve(&l, rho0, &times, ctrl)?;
    let values: Vec<f64> = states.iter().map(|r| extract(&moments(ops, r))).collect();
    let fit = fit_decay_rate(&times, &values)?;
    let rel_err = (fit.rate - analytic_rate).abs() / analytic_rate;
    Ok(OracleRow { dissipator, observable, fitted_rate: fit.rate, analytic_rate, rel_err })
}

/// Fit every dissipator's decay rate in isolation and compare against
/// the closed-form value. Dissipators whose rate parameter is zero are
/// skipped (nothing to fit).
pub fn audit_dissipators(p: &ModelParams, n_max: usize) -> Result<Vec<OracleRow>> {
    let space = HilbertSpace::new(n_max)?;
    let ops = build_operators(space, p.omega_r);
    let mut rows = Vec::new();

    if p.gamma_a > 0.0 {
        rows.push(audit_one(
            p,
            &ops,
            DissipatorSpec { cavity: true, ..DissipatorSpec::none() },
            &product_state(space, 0, 0, 1),
            "cavity",
            "photon_number",
            2.0 * p.gamma_a,
            &|m| m.n_raw,
        )?);
    }
    if p.gamma_ph > 0.0 {
        rows.push(audit_one(
            p,
            &ops,
            DissipatorSpec { dephasing: true, ..DissipatorSpec::none() },
            &field_coherence_state(space),
            "dephasing",
            "field_coherence",
            p.gamma_ph,
            &|m| m.a_dag_sigma1.re,
        )?);
    }
    if p.gamma_d > 0.0 {
        let spec = DissipatorSpec { decay: true, ..DissipatorSpec::none() };
        rows.push(audit_one(
            p,
            &ops,
            spec,
            &product_state(space, 1, 1, 0),
            "decay",
            "excited_population",
            p.gamma_d,
            &|m| 1.0 + m.d,
        )?);
        rows.push(audit_one(
            p,
            &ops,
            spec,
            &field_coherence_state(space),
            "decay",
            "field_coherence",
            p.gamma_d / 2.0,
            &|m| m.a_dag_sigma1.re,
        )?);
    }
    if p.gamma_p > 0.0 {
        let spec = DissipatorSpec { pump: true, ..DissipatorSpec::none() };
        rows.push(audit_one(
            p,
            &ops,
            spec,
            &product_state(space, 0, 0, 0),
            "pump",
            "ground_population",
            p.gamma_p,
            &|m| 1.0 - m.d,
        )?);
        rows.push(audit_one(
            p,
            &ops,
            spec,
            &field_coherence_state(space),
            "pump",
            "field_coherence",
            p.gamma_p / 2.0,
            &|m| m.a_dag_sigma1.re,
        )?);
    }
    if p.gamma_cor > 0.0 {
        let (coh_rate, cor_rate, _) = analytic_cor_rates(N_MOL, p.gamma_cor);
        let spec = DissipatorSpec { correlation: true, ..DissipatorSpec::none() };
        rows.push(audit_one(
            p,
            &ops,
            spec,
            &field_coherence_state(space),
            "correlation",
            "field_coherence",
            coh_rate,
            &|m| m.a_dag_sigma1.re,
        )?);
        rows.push(audit_one(
            p,
            &ops,
            spec,
            &symmetric_molecular_state(space),
            "correlation",
            "molecular_correlation",
            cor_rate,
            &|m| m.sigma1_dag_sigma2.re,
        )?);
    }
    Ok(rows)
}

/// Relative-error gate applied to the audit table.
pub const AUDIT_GATE: f64 = 5e-3;
