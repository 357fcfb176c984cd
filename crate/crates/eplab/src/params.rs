//! Model parameters and derived rates.
//!
//! All rates are dimensionless multiples of the molecular transition
//! frequency ω; time is measured in units of 1/ω.

use crate::error::{Error, Result};

/// Rates and counts of the single-mode laser model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Cavity field relaxation rate γ_a.
    pub gamma_a: f64,
    /// Dephasing rate γ_ph.
    pub gamma_ph: f64,
    /// Longitudinal decay rate γ_D.
    pub gamma_d: f64,
    /// Incoherent pump rate γ_P.
    pub gamma_p: f64,
    /// Additional relaxation rate of intermolecular correlations γ_cor.
    pub gamma_cor: f64,
    /// Single-molecule coupling constant Ω_R.
    pub omega_r: f64,
    /// Number of active molecules N.
    pub n_mol: u64,
}

/// Quantities derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    /// Transverse relaxation rate γ_σ = γ_ph + γ_P/2 + γ_D/2.
    pub gamma_sigma: f64,
    /// Field-free stationary inversion D_0 = (γ_P − γ_D)/(γ_P + γ_D).
    pub d0: f64,
}

impl Default for ModelParams {
    /// Built-in reference rate set: a fast cavity, slow molecular decay,
    /// and a pump at half the decay rate (D_0 = −1/3).
    fn default() -> Self {
        ModelParams {
            gamma_a: 5e-5,
            gamma_ph: 5e-4,
            gamma_d: 2e-5,
            gamma_p: 1e-5,
            gamma_cor: 0.0,
            omega_r: 1e-5,
            n_mol: 1_000_000,
        }
    }
}

impl ModelParams {

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma_a", self.gamma_a),
            ("gamma_ph", self.gamma_ph),
            ("gamma_d", self.gamma_d),
            ("gamma_p", self.gamma_p),
            ("gamma_cor", self.gamma_cor),
            ("omega_r", self.omega_r),
        ];
        for (name, v) in rates {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.n_mol < 2 {
            return Err(Error::InvalidParams(format!("n_mol = {} must be >= 2", self.n_mol)));
        }
        Ok(())
    }

    /// √N as a float.
    pub fn sqrt_n(&self) -> f64 {
        (self.n_mol as f64).sqrt()
    }

    /// N as a float.
    pub fn n(&self) -> f64 {
        self.n_mol as f64
    }

    /// Collective coupling √N Ω_R.
    pub fn collective_coupling(&self) -> f64 {
        self.sqrt_n() * self.omega_r
    }

    /// Smallest strictly positive rate, used for default horizons.
    pub fn min_positive_rate(&self) -> f64 {
        [self.gamma_a, self.gamma_ph, self.gamma_d, self.gamma_p, self.gamma_cor]
            .into_iter()
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Apply a flat `key = value` configuration text on top of `self`.
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let parse = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: bad number `{v}`", lineno + 1)))
            };
            match key {
                "gamma_a" => self.gamma_a = parse(value)?,
                "gamma_ph" => self.gamma_ph = parse(value)?,
                "gamma_d" => self.gamma_d = parse(value)?,
                "gamma_p" => self.gamma_p = parse(value)?,
                "gamma_cor" => self.gamma_cor = parse(value)?,
                "omega_r" => self.omega_r = parse(value)?,
                "n_mol" => {
                    let v = parse(value)?;
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::Config(format!("line {}: n_mol must be a non-negative integer", lineno + 1)));
                    }
                    self.n_mol = v as u64;
                }
                other => return Err(Error::Config(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        Ok(())
    }
}

/// γ_σ for an explicit pump rate, bypassing the params snapshot.
pub fn gamma_sigma(gamma_ph: f64, gamma_p: f64, gamma_d: f64) -> f64 {
    gamma_ph + gamma_p / 2.0 + gamma_d / 2.0
}

/// Compute γ_σ and D_0 from the parameter set.
pub fn derive_rates(p: &ModelParams) -> Result<DerivedRates> {
    if p.gamma_p + p.gamma_d == 0.0 {
        return Err(Error::DegeneratePump);
    }
    Ok(DerivedRates {
        gamma_sigma: gamma_sigma(p.gamma_ph, p.gamma_p, p.gamma_d),
        d0: (p.gamma_p - p.gamma_d) / (p.gamma_p + p.gamma_d),
    })
}

/// Pump rate that produces the requested field-free inversion:
/// γ_P = γ_D (1 + d0) / (1 − d0).
pub fn pump_from_d0(p: &ModelParams, d0: f64) -> Result<f64> {
    if !(-1.0..1.0).contains(&d0) {
        return Err(Error::InversionOutOfRange(d0));
    }
    Ok(p.gamma_d * (1.0 + d0) / (1.0 - d0))
}

/// Params with the pump replaced so the field-free inversion equals `d0`,
/// used by the coupled sweep mode.
pub fn with_inversion(p: &ModelParams, d0: f64) -> Result<ModelParams> {
    let mut q = *p;
    q.gamma_p = pump_from_d0(p, d0)?;
    Ok(q)
}
