//! Normal Inverse Gaussian parameters, density, moments and the Esscher tilt.

use crate::error::{Error, Result};
use crate::special::bessel_k1_scaled;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// NIG parameters, per unit of the model's time variable.
///
/// `alpha` is the tail parameter and `beta` the skew; both are unrelated to the
/// power drift of the conjugation identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub mu: f64,
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn new(mu: f64, alpha: f64, delta: f64, beta: f64) -> Result<Self> {
        let p = Self { mu, alpha, delta, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.mu, self.alpha, self.delta, self.beta]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::ParameterError(format!("non-finite NIG parameter in {self:?}")));
        }
        if self.alpha <= 0.0 {
            return Err(Error::ParameterError(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.delta <= 0.0 {
            return Err(Error::ParameterError(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.beta.abs() >= self.alpha {
            return Err(Error::ParameterError(format!(
                "|beta| must be < alpha, got beta = {}, alpha = {}",
                self.beta, self.alpha
            )));
        }
        Ok(())
    }

    /// `sqrt(alpha^2 - beta^2)`.
    pub fn gamma(&self) -> f64 {
        ((self.alpha - self.beta) * (self.alpha + self.beta)).sqrt()
    }

    /// Law of `c X` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::DomainError(format!("scale factor must be > 0, got {c}")));
        }
        Self::new(self.mu * c, self.alpha / c, self.delta * c, self.beta / c)
    }

    /// Re-expresses per-observation parameters on a time unit `factor` times longer
    /// (e.g. 252 for daily to yearly).
    pub fn annualized(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::DomainError(format!("annualisation factor must be > 0, got {factor}")));
        }
        Self::new(self.mu * factor, self.alpha, self.delta * factor, self.beta)
    }
}

/// Log of the NIG density of `X_t` at `x`.
pub fn nig_log_density(p: &NigParams, x: f64, t: f64) -> Result<f64> {
    p.validate()?;
    if !(t > 0.0) {
        return Err(Error::ParameterError(format!("horizon must be > 0, got {t}")));
    }
    let d = p.delta * t;
    let y = x - p.mu * t;
    let s = d.hypot(y);
    let z = p.alpha * s;
    Ok((p.alpha * d / PI).ln() + d * p.gamma() + p.beta * y - z + bessel_k1_scaled(z).ln() - s.ln())
}

pub fn nig_density(p: &NigParams, x: f64, t: f64) -> Result<f64> {
    nig_log_density(p, x, t).map(f64::exp)
}

/// Mean and variance of `X_t`.
pub fn nig_mean_variance(p: &NigParams, t: f64) -> Result<(f64, f64)> {
    p.validate()?;
    let g = p.gamma();
    let mean = t * (p.mu + p.delta * p.beta / g);
    let var = t * p.delta * p.alpha * p.alpha / (g * g * g);
    Ok((mean, var))
}

/// Esscher tilt by `theta`: the skew moves to `beta + theta`, everything else is kept.
pub fn esscher_shift(p: &NigParams, theta: f64) -> Result<NigParams> {
    p.validate()?;
    let beta = p.beta + theta;
    if beta.abs() >= p.alpha {
        return Err(Error::ParameterError(format!(
            "tilted skew {beta} leaves (-{a}, {a})",
            a = p.alpha
        )));
    }
    Ok(NigParams { beta, ..*p })
}
