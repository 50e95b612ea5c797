//! Exponential Lévy models and their cumulants.
//!
//! Two conventions are used throughout:
//!
//! * `psi(z)` is the Fourier-argument exponent, `E exp(i z X_t) = exp(t psi(z))`,
//!   defined for complex `z` whose imaginary part lies in [`LevyModel::strip`].
//! * `kappa(u) = psi(-i u)` is the real-exponent cumulant,
//!   `E exp(u X_t) = exp(t kappa(u))`. The martingale condition reads
//!   `kappa(1) = r - q`.
//!
//! The jump measure has the tilted form `exp(beta y) nu_0(y) dy` with `nu_0`
//! even. The market is symmetric exactly when `beta = -1/2`. The truncation
//! function is `h(y) = y 1{|y| < 1}`; parametric models never expose it.

use crate::error::{Error, Result};
use crate::nig::NigParams;
use crate::special::bessel_k1_scaled;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MARTINGALE_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyKind {
    /// Pure diffusion; `sigma` is the volatility per square-root time unit.
    BlackScholes { sigma: f64 },
    Nig(NigParams),
}

/// How the drift of the log-price was fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    /// Drift set so that `kappa(1) = r - q`.
    Martingale,
    /// Drift taken verbatim from the parameters (physical-measure fits, or
    /// published risk-neutral parameters that are only approximately martingale).
    Given,
}

/// Immutable exponential Lévy model `S_t = S_0 exp(X_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    kind: LevyKind,
    rate: f64,
    dividend: f64,
    drift_mode: DriftMode,
}

fn check_rates(rate: f64, dividend: f64) -> Result<()> {
    if !(rate.is_finite() && dividend.is_finite()) {
        return Err(Error::ParameterError("rate and dividend must be finite".into()));
    }
    Ok(())
}

fn nig_kappa(p: &NigParams, u: f64) -> f64 {
    let b = p.beta + u;
    u * p.mu + p.delta * (p.gamma() - ((p.alpha - b) * (p.alpha + b)).sqrt())
}

impl LevyModel {
    pub fn black_scholes(sigma: f64, rate: f64, dividend: f64) -> Result<Self> {
        check_rates(rate, dividend)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::ParameterError(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self {
            kind: LevyKind::BlackScholes { sigma },
            rate,
            dividend,
            drift_mode: DriftMode::Martingale,
        })
    }

    /// NIG model with `mu` taken as given.
    pub fn nig(params: NigParams, rate: f64, dividend: f64) -> Result<Self> {
        check_rates(rate, dividend)?;
        params.validate()?;
        Ok(Self {
            kind: LevyKind::Nig(params),
            rate,
            dividend,
            drift_mode: DriftMode::Given,
        })
    }

    /// NIG model whose `mu` is replaced by the martingale drift.
    pub fn nig_martingale(params: NigParams, rate: f64, dividend: f64) -> Result<Self> {
        check_rates(rate, dividend)?;
        params.validate()?;
        if params.beta + 1.0 >= params.alpha {
            return Err(Error::MomentDivergence { exponent: 1.0 });
        }
        let jump_part = nig_kappa(&NigParams { mu: 0.0, ..params }, 1.0);
        let mu = rate - dividend - jump_part;
        Ok(Self {
            kind: LevyKind::Nig(NigParams { mu, ..params }),
            rate,
            dividend,
            drift_mode: DriftMode::Martingale,
        })
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dividend(&self) -> f64 {
        self.dividend
    }

    pub fn drift_mode(&self) -> DriftMode {
        self.drift_mode
    }

    pub fn nig_params(&self) -> Option<&NigParams> {
        match &self.kind {
            LevyKind::Nig(p) => Some(p),
            LevyKind::BlackScholes { .. } => None,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            LevyKind::BlackScholes { .. } => "black_scholes",
            LevyKind::Nig(_) => "nig",
        }
    }

    /// Open interval of admissible `Im(z)` for [`cumulant`](Self::cumulant).
    pub fn strip(&self) -> (f64, f64) {
        match &self.kind {
            LevyKind::BlackScholes { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            LevyKind::Nig(p) => (p.beta - p.alpha, p.beta + p.alpha),
        }
    }

    /// Open interval of real `u` with `E exp(u X_t)` finite.
    pub fn exponent_range(&self) -> (f64, f64) {
        let (lo, hi) = self.strip();
        (-hi, -lo)
    }

    fn check_strip(&self, im: f64) -> Result<()> {
        let (lo, hi) = self.strip();
        if im > lo && im < hi {
            Ok(())
        } else {
            let bound = if im <= lo { lo } else { hi };
            Err(Error::StripViolation { value: im, lo, hi, bound })
        }
    }

    pub fn check_exponent(&self, u: f64) -> Result<()> {
        let (lo, hi) = self.exponent_range();
        if u > lo && u < hi {
            Ok(())
        } else {
            let bound = if u <= lo { lo } else { hi };
            Err(Error::StripViolation { value: u, lo, hi, bound })
        }
    }

    /// Characteristic exponent `psi(z)`.
    pub fn cumulant(&self, z: Complex64) -> Result<Complex64> {
        self.check_strip(z.im)?;
        Ok(self.cumulant_unchecked(z))
    }

    /// `psi(z)` without the strip check, for hot quadrature loops whose contour
    /// was validated once up front.
    pub(crate) fn cumulant_unchecked(&self, z: Complex64) -> Complex64 {
        let i = Complex64::i();
        match &self.kind {
            LevyKind::BlackScholes { sigma } => {
                let s2 = sigma * sigma;
                i * z * (self.rate - self.dividend - 0.5 * s2) - 0.5 * s2 * z * z
            }
            LevyKind::Nig(p) => {
                let w = p.beta + i * z;
                i * z * p.mu + p.delta * (p.gamma() - ((p.alpha - w) * (p.alpha + w)).sqrt())
            }
        }
    }

    /// Real-exponent cumulant `kappa(u) = psi(-i u)`.
    pub fn kappa(&self, u: f64) -> Result<f64> {
        self.check_exponent(u)?;
        Ok(match &self.kind {
            LevyKind::BlackScholes { sigma } => {
                let s2 = sigma * sigma;
                u * (self.rate - self.dividend) + 0.5 * s2 * u * (u - 1.0)
            }
            LevyKind::Nig(p) => nig_kappa(p, u),
        })
    }

    /// `d psi / d beta (z)` with `mu` held fixed.
    pub fn cumulant_beta_derivative(&self, z: Complex64) -> Result<Complex64> {
        let p = match &self.kind {
            LevyKind::Nig(p) => p,
            LevyKind::BlackScholes { .. } => return Err(Error::UnsupportedVariant("black_scholes")),
        };
        self.check_strip(z.im)?;
        Ok(nig_beta_derivative(p, z))
    }

    /// `d psi / d beta (z)` along the martingale-drifted family, i.e. including
    /// the change of the compensating drift: `D(z) - i z D(-i)`.
    pub fn compensated_beta_derivative(&self, z: Complex64) -> Result<Complex64> {
        let raw = self.cumulant_beta_derivative(z)?;
        let p = self.nig_params().expect("checked above");
        self.check_exponent(1.0)?;
        let at_one = nig_beta_derivative(p, Complex64::new(0.0, -1.0));
        Ok(raw - Complex64::i() * z * at_one)
    }

    /// `kappa(1) - (r - q)`.
    pub fn martingale_gap(&self) -> Result<f64> {
        Ok(self.kappa(1.0)? - (self.rate - self.dividend))
    }

    /// Jump tilt `beta`. Pure diffusions have no jumps and satisfy the symmetry
    /// condition vacuously, so they report `-1/2`.
    pub fn symmetry_beta(&self) -> f64 {
        match &self.kind {
            LevyKind::BlackScholes { .. } => -0.5,
            LevyKind::Nig(p) => p.beta,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.symmetry_beta() + 0.5).abs() <= tol
    }

    /// Lévy density `nu(y) = exp(beta y) nu_0(y)` with
    /// `nu_0(y) = (delta alpha / pi) K_1(alpha |y|) / |y|`.
    pub fn levy_density(&self, y: f64) -> Result<f64> {
        let p = match &self.kind {
            LevyKind::Nig(p) => p,
            LevyKind::BlackScholes { .. } => return Err(Error::UnsupportedVariant("black_scholes")),
        };
        if y == 0.0 || !y.is_finite() {
            return Err(Error::DomainError(format!("Lévy density undefined at y = {y}")));
        }
        let a = y.abs();
        let z = p.alpha * a;
        Ok(p.delta * p.alpha / PI * bessel_k1_scaled(z) * (p.beta * y - z).exp() / a)
    }

    /// Same model family with a different jump tilt. A martingale-drifted model
    /// is re-drifted; a model with given drift keeps `mu`.
    pub fn with_tilt(&self, beta: f64) -> Result<Self> {
        match &self.kind {
            LevyKind::BlackScholes { .. } => Err(Error::UnsupportedVariant("black_scholes")),
            LevyKind::Nig(p) => {
                let q = NigParams::new(p.mu, p.alpha, p.delta, beta)?;
                match self.drift_mode {
                    DriftMode::Martingale => Self::nig_martingale(q, self.rate, self.dividend),
                    DriftMode::Given => Self::nig(q, self.rate, self.dividend),
                }
            }
        }
    }

    /// Symmetric (`beta = -1/2`) martingale-drifted member of the same family.
    pub fn symmetrized(&self) -> Result<Self> {
        match &self.kind {
            LevyKind::BlackScholes { .. } => Ok(*self),
            LevyKind::Nig(p) => Self::nig_martingale(
                NigParams { beta: -0.5, ..*p },
                self.rate,
                self.dividend,
            ),
        }
    }
}

fn nig_beta_derivative(p: &NigParams, z: Complex64) -> Complex64 {
    let w = p.beta + Complex64::i() * z;
    p.delta * (w / ((p.alpha - w) * (p.alpha + w)).sqrt() - p.beta / p.gamma())
}
