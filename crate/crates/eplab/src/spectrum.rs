//! Linearization matrix around the stationary point, its cubic
//! eigenproblem, eigenvector overlaps, and branch tracking across
//! inversion sweeps.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::cubic::{cubic_discriminant, cubic_roots, CubicCoeffs};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::params::{gamma_sigma, pump_from_d0, ModelParams};

/// How the transverse rate responds when sweeping the inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PumpMode {
    /// γ_P is re-derived from d0 and γ_σ recomputed (self-consistent sweep).
    #[default]
    Coupled,
    /// γ_σ is taken from the parameter snapshot as-is.
    Frozen,
}

/// The 3×3 linearization over the basis (δn, δφ, δs).
#[derive(Debug, Clone, Copy)]
pub struct StabilityMatrix {
    pub entries: Matrix3<f64>,
    pub params: ModelParams,
    pub d0: f64,
}

/// Eigenvalues, unit eigenvectors, and their pairwise overlaps.
#[derive(Debug, Clone)]
pub struct EigenSet {
    pub lambdas: [Complex64; 3],
    pub vectors: [Vector3<Complex64>; 3],
    /// |⟨h_i, h_j⟩| with unit-norm vectors (conjugated inner product).
    pub overlaps: Matrix3<f64>,
    pub discriminant: f64,
    /// Minimal pairwise eigenvalue distance.
    pub defect_gap: f64,
}

/// Stability matrix of the linearized system at inversion `d0`.
pub fn build_stability_matrix(p: &ModelParams, d0: f64, mode: PumpMode) -> Result<StabilityMatrix> {
    if !(-1.0..1.0).contains(&d0) {
        return Err(Error::InversionOutOfRange(d0));
    }
    let gs = match mode {
        PumpMode::Coupled => {
            let gp = pump_from_d0(p, d0)?;
            gamma_sigma(p.gamma_ph, gp, p.gamma_d)
        }
        PumpMode::Frozen => gamma_sigma(p.gamma_ph, p.gamma_p, p.gamma_d),
    };
    let gc = p.gamma_cor;
    let sn = p.sqrt_n();
    let om = p.omega_r;
    let c = sn * om;

    let entries = Matrix3::new(
        -2.0 * p.gamma_a, 2.0 * c, 0.0,
        c * d0, -(gs + p.gamma_a + gc / 4.0), (p.n() - 1.0) / sn * om,
        0.0, 2.0 * c * d0, -(2.0 * gs + gc),
    );
    Ok(StabilityMatrix { entries, params: *p, d0 })
}

/// Coefficients (c2, c1, c0) of the characteristic polynomial
/// λ³ + c2 λ² + c1 λ + c0 of the stability matrix.
pub fn characteristic_coeffs(m: &Matrix3<f64>) -> CubicCoeffs {
    let c2 = -m.trace();
    let c1 = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)])
        + (m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)])
        + (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)]);
    let c0 = -m.determinant();
    (c2, c1, c0)
}

fn complex_rows(m: &Matrix3<f64>, lambda: Complex64) -> [Vector3<Complex64>; 3] {
    let mut rows = [Vector3::zeros(); 3];
    for (i, row) in rows.iter_mut().enumerate() {
        for j in 0..3 {
            let diag = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
            (*row)[j] = Complex64::new(m[(i, j)], 0.0) - diag;
        }
    }
    rows
}

fn unconjugated_cross(a: &Vector3<Complex64>, b: &Vector3<Complex64>) -> Vector3<Complex64> {
    Vector3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

fn fix_phase_and_normalize(mut v: Vector3<Complex64>) -> Vector3<Complex64> {
    let norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    // make the largest-magnitude component real-positive
    let mut idx = 0;
    let mut best = 0.0;
    for i in 0..3 {
        if v[i].norm() > best {
            best = v[i].norm();
            idx = i;
        }
    }
    let phase = v[idx] / Complex64::new(v[idx].norm(), 0.0);
    v /= phase;
    v
}

/// Unit null vector of (M − λI), phase-fixed.
///
/// Primary method: unconjugated cross product of the two rows with the
/// largest product of norms; fallback: inverse iteration.
pub fn eigenvector_for(m: &Matrix3<f64>, lambda: Complex64) -> Result<Vector3<Complex64>> {
    let rows = complex_rows(m, lambda);
    let norms = [rows[0].norm(), rows[1].norm(), rows[2].norm()];
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let (i, j) = *pairs
        .iter()
        .max_by(|&&(a, b), &&(c, d)| {
            (norms[a] * norms[b]).partial_cmp(&(norms[c] * norms[d])).unwrap()
        })
        .unwrap();
    let cross = unconjugated_cross(&rows[i], &rows[j]);
    let mnorm = m.norm();
    if cross.norm() >= 1e-14 * mnorm * mnorm {
        return Ok(fix_phase_and_normalize(cross));
    }

    // inverse iteration on (M - lambda I), slightly shifted off the
    // exact eigenvalue to keep the solve nonsingular
    let mut a = Matrix3::<Complex64>::zeros();
    for r in 0..3 {
        for c in 0..3 {
            a[(r, c)] = Complex64::new(m[(r, c)], 0.0);
        }
        a[(r, r)] -= lambda + Complex64::new(1e-14 * mnorm.max(1e-300), 0.0);
    }
    let lu = a.lu();
    let mut b = Vector3::new(
        Complex64::new(0.5774, 0.0),
        Complex64::new(0.5774, 0.1),
        Complex64::new(-0.5774, 0.0),
    );
    for _ in 0..8 {
        match lu.solve(&b) {
            Some(x) if x.norm() > 0.0 => b = x / Complex64::new(x.norm(), 0.0),
            _ => return Err(Error::RankDeficient),
        }
    }
    // accept only if it is actually a null vector
    let resid = (a * b).norm();
    if resid > 1e-8 * mnorm {
        return Err(Error::RankDeficient);
    }
    Ok(fix_phase_and_normalize(b))
}

/// Full point evaluation: eigenvalues, eigenvectors, overlaps, gap.
pub fn spectrum_at(p: &ModelParams, d0: f64, mode: PumpMode) -> Result<EigenSet> {
    let sm = build_stability_matrix(p, d0, mode)?;
    eigen_set(&sm)
}

/// Eigen decomposition of an already-built stability matrix.
pub fn eigen_set(sm: &StabilityMatrix) -> Result<EigenSet> {
    let coeffs = characteristic_coeffs(&sm.entries);
    let lambdas = cubic_roots(coeffs);
    let discriminant = cubic_discriminant(coeffs);

    let mut vectors = [Vector3::zeros(); 3];
    for (k, &lam) in lambdas.iter().enumerate() {
        vectors[k] = eigenvector_for(&sm.entries, lam)?;
    }

    let mut overlaps = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            overlaps[(i, j)] = vectors[i].dotc(&vectors[j]).norm();
        }
    }

    let mut defect_gap = f64::INFINITY;
    for i in 0..3 {
        for j in (i + 1)..3 {
            defect_gap = defect_gap.min((lambdas[i] - lambdas[j]).norm());
        }
    }

    Ok(EigenSet { lambdas, vectors, overlaps, discriminant, defect_gap })
}

/// Branch labels over a sweep: `order[k][b]` is the index into grid point
/// `k`'s eigenset carrying branch label `b + 1`.
#[derive(Debug, Clone)]
pub struct BranchAssignment {
    pub order: Vec<[usize; 3]>,
    /// Per-interval flag: true when two assignments tie within 1e-12
    /// (expected exactly at the exceptional point).
    pub ambiguous: Vec<bool>,
}

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Assign labels 1..3 along the sweep by minimizing total eigenvalue
/// movement between adjacent grid points.
///
/// Seeding at the first grid point: the (most nearly) real root gets
/// label 1; the remaining two are ordered by descending imaginary part,
/// so label 2 carries +Im of a conjugate pair.
pub fn track_branches(sweep: &[EigenSet]) -> BranchAssignment {
    if sweep.is_empty() {
        return BranchAssignment { order: Vec::new(), ambiguous: Vec::new() };
    }

    let mut idx: Vec<usize> = vec![0, 1, 2];
    idx.sort_by(|&a, &b| {
        let (la, lb) = (sweep[0].lambdas[a], sweep[0].lambdas[b]);
        la.im
            .abs()
            .partial_cmp(&lb.im.abs())
            .unwrap()
            .then(lb.im.partial_cmp(&la.im).unwrap())
    });
    // idx[0] = most-real root; order remaining by descending Im
    let (a, b) = (idx[1], idx[2]);
    let (second, third) = if sweep[0].lambdas[a].im >= sweep[0].lambdas[b].im {
        (a, b)
    } else {
        (b, a)
    };
    let mut order = vec![[idx[0], second, third]];
    let mut ambiguous = Vec::with_capacity(sweep.len().saturating_sub(1));

    for k in 1..sweep.len() {
        let prev_order = order[k - 1];
        let prev = &sweep[k - 1];
        let cur = &sweep[k];
        let mut best = f64::INFINITY;
        let mut second_best = f64::INFINITY;
        let mut best_perm = PERMS[0];
        for perm in PERMS {
            let cost: f64 = (0..3)
                .map(|b| (cur.lambdas[perm[b]] - prev.lambdas[prev_order[b]]).norm())
                .sum();
            if cost < best {
                second_best = best;
                best = cost;
                best_perm = perm;
            } else if cost < second_best {
                second_best = cost;
            }
        }
        ambiguous.push((second_best - best).abs() <= 1e-12);
        order.push(best_perm);
    }

    BranchAssignment { order, ambiguous }
}

/// One branch-labeled row of a spectrum sweep.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumRow {
    pub d0: f64,
    pub lambdas: [Complex64; 3],
    pub overlaps: [f64; 3], // (ov12, ov13, ov23)
    pub discriminant: f64,
}

/// Evaluate the spectrum over a d0 grid (parallel over grid points) and
/// branch-track the result into labeled rows.
pub fn sweep_table(p: &ModelParams, d0_grid: &[f64], mode: PumpMode) -> Result<(Vec<SpectrumRow>, Vec<bool>)> {
    let sets: Vec<Result<EigenSet>> = par_map(d0_grid, |&d0| spectrum_at(p, d0, mode));
    let sets: Vec<EigenSet> = sets.into_iter().collect::<Result<_>>()?;
    let assign = track_branches(&sets);

    let rows = d0_grid
        .iter()
        .zip(sets.iter().zip(&assign.order))
        .map(|(&d0, (set, ord))| {
            let lam = [set.lambdas[ord[0]], set.lambdas[ord[1]], set.lambdas[ord[2]]];
            let ov = [
                set.overlaps[(ord[0], ord[1])],
                set.overlaps[(ord[0], ord[2])],
                set.overlaps[(ord[1], ord[2])],
            ];
            SpectrumRow { d0, lambdas: lam, overlaps: ov, discriminant: set.discriminant }
        })
        .collect();
    Ok((rows, assign.ambiguous))
}

/// Inclusive uniform grid `lo..=hi` with `count` points.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 1);
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn defaults() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn matrix_entries_at_full_depletion() {
        // frozen exact-rational evaluation: coupled pump at d0 = -1 gives
        // gamma_p = 0, gamma_sigma = 5.1e-4
        let p = defaults();
        let m = build_stability_matrix(&p, -1.0, PumpMode::Coupled).unwrap().entries;
        assert_eq!(m[(0, 0)], -1e-4);
        assert_eq!(m[(0, 1)], 2e-2);
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(m[(1, 0)], -1e-2);
        assert!((m[(1, 1)] - -5.6e-4).abs() < 1e-18);
        assert!((m[(1, 2)] - 9.99999e-3).abs() < 1e-17);
        assert_eq!(m[(2, 0)], 0.0);
        assert_eq!(m[(2, 1)], -2e-2);
        assert!((m[(2, 2)] - -1.02e-3).abs() < 1e-18);
    }

    #[test]
    fn triangular_at_zero_inversion() {
        let p = defaults();
        let sm = build_stability_matrix(&p, 0.0, PumpMode::Coupled).unwrap();
        assert_eq!(sm.entries[(1, 0)], 0.0);
        assert_eq!(sm.entries[(2, 1)], 0.0);
        let set = eigen_set(&sm).unwrap();
        let mut expect: Vec<f64> = (0..3).map(|i| sm.entries[(i, i)]).collect();
        let mut got: Vec<f64> = set.lambdas.iter().map(|l| l.re).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12 * e.abs());
        }
        for l in set.lambdas {
            assert_eq!(l.im, 0.0);
        }
    }

    #[test]
    fn diagonal_when_uncoupled() {
        let mut p = defaults();
        p.omega_r = 0.0;
        let m = build_stability_matrix(&p, -0.5, PumpMode::Coupled).unwrap().entries;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn corner_entries_always_zero() {
        let p = defaults();
        for d0 in [-0.99, -0.5, 0.0, 0.5] {
            let m = build_stability_matrix(&p, d0, PumpMode::Coupled).unwrap().entries;
            assert_eq!(m[(0, 2)], 0.0);
            assert_eq!(m[(2, 0)], 0.0);
        }
        assert!(build_stability_matrix(&p, 1.0, PumpMode::Coupled).is_err());
        assert!(build_stability_matrix(&p, -1.1, PumpMode::Coupled).is_err());
    }

    #[test]
    fn characteristic_coeff_examples() {
        let m = Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, -1.0));
        assert_eq!(characteristic_coeffs(&m), (3.0, 3.0, 1.0));
        let m = Matrix3::from_diagonal(&Vector3::new(-1.0, 0.0, 1.0));
        assert_eq!(characteristic_coeffs(&m), (0.0, -1.0, 0.0));
    }

    #[test]
    fn characteristic_coeffs_frozen_oracle() {
        // symbolic determinant expansion of the d0 = -1 matrix gives
        // exactly these rationals
        let p = defaults();
        let m = build_stability_matrix(&p, -1.0, PumpMode::Coupled).unwrap().entries;
        let (c2, c1, c0) = characteristic_coeffs(&m);
        assert!((c2 - 21.0 / 12500.0).abs() < 1e-18);
        assert!((c1 - 400729.0 / 1e9).abs() < 1e-18);
        assert!((c0 - 2240571.0 / 1e13).abs() < 1e-21);
    }

    #[test]
    fn eigenvector_of_diagonal_matrix() {
        let m = Matrix3::from_diagonal(&Vector3::new(-1.0, 2.0, 5.0));
        let v = eigenvector_for(&m, Complex64::new(2.0, 0.0)).unwrap();
        assert!(v[0].norm() < 1e-12);
        assert!((v[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(v[2].norm() < 1e-12);
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let p = defaults();
        for d0 in [-1.0 + 1e-9, -0.7, -0.3, -0.01, 0.4] {
            let sm = build_stability_matrix(&p, d0, PumpMode::Coupled).unwrap();
            let set = eigen_set(&sm).unwrap();
            let mnorm = sm.entries.norm();
            for (lam, v) in set.lambdas.iter().zip(&set.vectors) {
                let mut mv = Vector3::zeros();
                for r in 0..3 {
                    for c in 0..3 {
                        mv[r] += Complex64::new(sm.entries[(r, c)], 0.0) * v[c];
                    }
                }
                let resid = (mv - v.map(|x| x * lam)).norm();
                assert!(resid <= 1e-10 * mnorm, "d0 = {d0}, resid = {resid:e}");
            }
        }
    }

    #[test]
    fn overlap_matrix_structure() {
        let p = defaults();
        let set = spectrum_at(&p, -0.5, PumpMode::Coupled).unwrap();
        for i in 0..3 {
            assert!((set.overlaps[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..3 {
                assert!((set.overlaps[(i, j)] - set.overlaps[(j, i)]).abs() < 1e-12);
                assert!(set.overlaps[(i, j)] >= 0.0 && set.overlaps[(i, j)] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn conjugate_pair_below_ep() {
        let p = defaults();
        let set = spectrum_at(&p, -1.0 + 1e-12, PumpMode::Coupled).unwrap();
        assert!(set.discriminant < 0.0);
        let mut ims: Vec<f64> = set.lambdas.iter().map(|l| l.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ims[0] < -1e-3 && ims[2] > 1e-3);
        assert!((ims[0] + ims[2]).abs() < 1e-12);
    }

    #[test]
    fn trace_determinant_and_conjugation_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let base = defaults();
        for _ in 0..10_000 {
            let mut p = base;
            p.gamma_a = rng.gen_range(0.0..1e-3);
            p.gamma_ph = rng.gen_range(0.0..1e-3);
            p.gamma_d = rng.gen_range(1e-9..1e-3);
            p.gamma_cor = rng.gen_range(0.0..1e-2);
            p.omega_r = rng.gen_range(0.0..1e-4);
            let d0 = rng.gen_range(-1.0..0.99);
            let sm = build_stability_matrix(&p, d0, PumpMode::Coupled).unwrap();
            let coeffs = characteristic_coeffs(&sm.entries);
            let lam = cubic_roots(coeffs);
            let sum: Complex64 = lam.iter().sum();
            let prod: Complex64 = lam.iter().product();
            let tr = sm.entries.trace();
            let det = sm.entries.determinant();
            let scale = lam.iter().map(|l| l.norm()).fold(1e-300, f64::max);
            assert!((sum.re - tr).abs() <= 1e-12 * tr.abs().max(scale), "trace");
            assert!(sum.im.abs() <= 1e-12 * scale, "trace imag");
            assert!(
                (prod - Complex64::new(det, 0.0)).norm() <= 1e-10 * det.abs().max(scale * scale * scale),
                "det"
            );
            // conjugation closure: the multiset equals its conjugate
            for l in lam {
                let conj_present = lam
                    .iter()
                    .any(|m| (m - l.conj()).norm() <= 1e-12 * scale.max(1e-300));
                assert!(conj_present, "conjugation closure violated: {lam:?}");
            }
        }
    }

    #[test]
    fn trace_identity_against_matrix_entries() {
        let p = defaults();
        for d0 in [-0.9, -0.25, 0.1] {
            let q = crate::params::with_inversion(&p, d0).unwrap();
            let gs = gamma_sigma(q.gamma_ph, q.gamma_p, q.gamma_d);
            let set = spectrum_at(&p, d0, PumpMode::Coupled).unwrap();
            let sum: f64 = set.lambdas.iter().map(|l| l.re).sum();
            let expect = -(2.0 * p.gamma_a + gs + p.gamma_a + p.gamma_cor / 4.0 + 2.0 * gs + p.gamma_cor);
            assert!((sum - expect).abs() <= 1e-12 * expect.abs());
        }
    }

    #[test]
    fn branch_tracking_constant_matrix() {
        let p = defaults();
        let set = spectrum_at(&p, -0.5, PumpMode::Coupled).unwrap();
        let sweep = vec![set.clone(), set.clone(), set];
        let assign = track_branches(&sweep);
        assert_eq!(assign.order[1], assign.order[0]);
        assert_eq!(assign.order[2], assign.order[0]);
        assert!(!assign.ambiguous.iter().any(|&a| a));
    }

    #[test]
    fn branch_tracking_keeps_pair_signs() {
        let p = defaults();
        let grid = linspace(-1.0 + 1e-6, -0.5, 101);
        let (rows, _) = sweep_table(&p, &grid, PumpMode::Coupled).unwrap();
        for row in &rows {
            // label 1 is the real branch, labels 2/3 the pair with +/- Im
            assert!(row.lambdas[0].im.abs() < 1e-12);
            assert!(row.lambdas[1].im > 0.0);
            assert!(row.lambdas[2].im < 0.0);
        }
    }

    #[test]
    fn pair_merges_at_an_interior_point() {
        let p = defaults();
        let grid = linspace(-1.0 + 1e-6, -1e-6, 2001);
        let (rows, _) = sweep_table(&p, &grid, PumpMode::Coupled).unwrap();
        let first = &rows[0];
        let last = &rows[rows.len() - 1];
        assert!(first.discriminant < 0.0, "pair at the left edge");
        assert!(last.discriminant > 0.0, "three real branches near zero inversion");
        // exactly one sign change
        let changes = rows
            .windows(2)
            .filter(|w| w[0].discriminant * w[1].discriminant < 0.0)
            .count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn frozen_mode_ignores_d0_in_rates() {
        let p = defaults();
        let a = build_stability_matrix(&p, -0.8, PumpMode::Frozen).unwrap().entries;
        let b = build_stability_matrix(&p, -0.2, PumpMode::Frozen).unwrap().entries;
        // diagonal (rate) entries identical; only the D_0 couplings differ
        for i in 0..3 {
            assert_eq!(a[(i, i)], b[(i, i)]);
        }
        assert!(a[(1, 0)] != b[(1, 0)]);
    }
}
