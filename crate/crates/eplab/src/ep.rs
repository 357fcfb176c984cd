//! Exceptional-point location: scan the cubic discriminant over the
//! inversion axis, bisect the sign change, and verify eigenvector
//! coalescence (to distinguish an exceptional point from an accidental
//! eigenvalue crossing with independent eigenvectors).

use num_complex::Complex64;

use crate::cubic::cubic_discriminant;
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::params::{pump_from_d0, ModelParams};
use crate::spectrum::{
    build_stability_matrix, characteristic_coeffs, eigen_set, linspace, sweep_table, PumpMode,
    SpectrumRow,
};

/// Minimal eigenvector overlap accepted as coalescence.
pub const COALESCENCE_GATE: f64 = 0.999;

/// Bisection terminates when the bracket is narrower than this.
pub const BRACKET_TOL: f64 = 1e-12;

/// A located exceptional point.
#[derive(Debug, Clone)]
pub struct EpResult {
    pub d0_ep: f64,
    /// Pump rate reproducing `d0_ep` (coupled sweep).
    pub gamma_p_ep: f64,
    /// The coalescing eigenvalue (midpoint of the closest pair).
    pub lambda_ep: Complex64,
    /// Overlap of the two nearly-parallel eigenvectors at the located point.
    pub overlap_ep: f64,
    /// Width of the final bisection bracket.
    pub bracket_width: f64,
    /// All discriminant sign-change brackets found by the coarse scan.
    pub brackets: Vec<(f64, f64)>,
}

/// Discriminant of the characteristic cubic at inversion `d0`.
pub fn discriminant_at(p: &ModelParams, d0: f64, mode: PumpMode) -> Result<f64> {
    let sm = build_stability_matrix(p, d0, mode)?;
    Ok(cubic_discriminant(characteristic_coeffs(&sm.entries)))
}

/// Locate the exceptional point on `search` (default: essentially the
/// full negative-inversion interval) with an `n_scan`-point coarse scan
/// followed by bisection. When several sign-change brackets exist, the
/// one at the largest inversion is refined; all brackets are reported.
pub fn locate_ep(
    p: &ModelParams,
    mode: PumpMode,
    search: Option<(f64, f64)>,
    n_scan: usize,
) -> Result<EpResult> {
    let (lo, hi) = search.unwrap_or((-1.0 + 1e-6, -1e-6));
    if !(lo < hi) || n_scan < 2 {
        return Err(Error::InvalidParams(format!("bad search interval [{lo}, {hi}] / {n_scan} points")));
    }
    let grid = linspace(lo, hi, n_scan);
    let discs: Vec<Result<f64>> = par_map(&grid, |&d0| discriminant_at(p, d0, mode));
    let discs: Vec<f64> = discs.into_iter().collect::<Result<_>>()?;

    let mut brackets = Vec::new();
    for i in 0..grid.len() - 1 {
        if discs[i] == 0.0 {
            brackets.push((grid[i], grid[i]));
        } else if discs[i] * discs[i + 1] < 0.0 {
            brackets.push((grid[i], grid[i + 1]));
        }
    }
    let &(mut a, mut b) = brackets.last().ok_or(Error::NoSignChange { lo, hi })?;

    let mut fa = discriminant_at(p, a, mode)?;
    while b - a > BRACKET_TOL {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break; // bracket at f64 resolution
        }
        let fm = discriminant_at(p, mid, mode)?;
        if fm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let d0_ep = 0.5 * (a + b);
    let bracket_width = b - a;

    let sm = build_stability_matrix(p, d0_ep, mode)?;
    let set = eigen_set(&sm)?;
    // find the closest eigenvalue pair
    let mut pair = (0usize, 1usize);
    let mut gap = f64::INFINITY;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let d = (set.lambdas[i] - set.lambdas[j]).norm();
            if d < gap {
                gap = d;
                pair = (i, j);
            }
        }
    }
    let overlap_ep = set.overlaps[(pair.0, pair.1)];
    if overlap_ep < COALESCENCE_GATE {
        return Err(Error::DiabolicSuspect { d0: d0_ep, overlap: overlap_ep });
    }
    let lambda_ep = (set.lambdas[pair.0] + set.lambdas[pair.1]) / Complex64::new(2.0, 0.0);

    let gamma_p_ep = match mode {
        PumpMode::Coupled => pump_from_d0(p, d0_ep)?,
        PumpMode::Frozen => p.gamma_p,
    };

    Ok(EpResult { d0_ep, gamma_p_ep, lambda_ep, overlap_ep, bracket_width, brackets })
}

/// One row of the exceptional-point locus over the correlation-decay axis.
#[derive(Debug, Clone, Copy)]
pub struct LocusRow {
    pub gamma_cor: f64,
    pub d0_ep: f64,
    pub gamma_p_ep: f64,
    pub overlap_ep: f64,
    pub bracket_width: f64,
}

/// Locate the exceptional point for every correlation-decay rate in
/// `gamma_cor_grid` (parallel over rows).
pub fn ep_locus(p: &ModelParams, gamma_cor_grid: &[f64], mode: PumpMode) -> Result<Vec<LocusRow>> {
    let rows: Vec<Result<LocusRow>> = par_map(gamma_cor_grid, |&gc| {
        let mut q = *p;
        q.gamma_cor = gc;
        let ep = locate_ep(&q, mode, None, 2001)?;
        Ok(LocusRow {
            gamma_cor: gc,
            d0_ep: ep.d0_ep,
            gamma_p_ep: ep.gamma_p_ep,
            overlap_ep: ep.overlap_ep,
            bracket_width: ep.bracket_width,
        })
    });
    rows.into_iter().collect()
}

/// One row of the eigenvalue-splitting curve for the conjugate pair
/// (branch labels 2 and 3 of the tracked sweep).
#[derive(Debug, Clone, Copy)]
pub struct SplitRow {
    pub d0: f64,
    /// |Im λ₂ − Im λ₃|
    pub dim: f64,
    /// |Re λ₂ − Re λ₃|
    pub dre: f64,
}

/// Imaginary- and real-part splitting of the tracked pair over a d0 grid.
pub fn splitting_curve(p: &ModelParams, d0_grid: &[f64], mode: PumpMode) -> Result<Vec<SplitRow>> {
    let (rows, _) = sweep_table(p, d0_grid, mode)?;
    Ok(rows.iter().map(split_of).collect())
}

fn split_of(row: &SpectrumRow) -> SplitRow {
    SplitRow {
        d0: row.d0,
        dim: (row.lambdas[1].im - row.lambdas[2].im).abs(),
        dre: (row.lambdas[1].re - row.lambdas[2].re).abs(),
    }
}
