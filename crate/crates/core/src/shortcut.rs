//! Closed-form prices in symmetric markets and first-order corrections around
//! the symmetric, at-the-money point.
//!
//! With `beta = -1/2` the ATM-forward digital call is `e^{-rT} N(-sigma sqrt(T) / 2)`
//! where `sigma` is the ATM implied volatility. Writing `I(beta, x)` for the digital
//! call price at tilt `beta` and log-moneyness `x`, the approximations are
//! `I(beta, x) ~ I(-1/2, 0) + (beta + 1/2) I_beta + x I_x`.

use crate::error::{Error, Result};
use crate::fourier::{
    exp_indicator, line_integral, price_digital_call_fourier, resolve_v, ContourSpec, Diagnostics,
    MarketSpec, Method, PriceResult, Side,
};
use crate::levy::{DriftMode, LevyModel, SYMMETRY_TOL};
use crate::special::norm_cdf;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DigitalSide {
    Call,
    Put,
}

fn check_sigma_t(sigma: f64, t: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::DomainError(format!("volatility must be >= 0, got {sigma}")));
    }
    if !(t > 0.0) {
        return Err(Error::DomainError(format!("maturity must be > 0, got {t}")));
    }
    Ok(())
}

/// Symmetric-market digital with an explicit volatility.
pub fn digital_symmetric_with_sigma(market: &MarketSpec, sigma: f64, side: DigitalSide) -> Result<PriceResult> {
    check_sigma_t(sigma, market.maturity)?;
    let df = market.discount();
    let n = norm_cdf(-0.5 * sigma * market.maturity.sqrt());
    let value = match side {
        DigitalSide::Call => df * n,
        DigitalSide::Put => df * (1.0 - n),
    };
    let mut r = PriceResult::exact(value, Method::Shortcut);
    r.diagnostics.values.insert("sigma".into(), sigma);
    Ok(r)
}

/// Symmetric-market digital using `market.sigma_atm`.
pub fn digital_symmetric(market: &MarketSpec, side: DigitalSide) -> Result<PriceResult> {
    digital_symmetric_with_sigma(market, market.sigma_atm, side)
}

/// Asset-or-nothing call with barrier `S_0^2` in a symmetric market:
/// `S_0 e^{-rT} (1 - N(-sigma sqrt(T) / 2))`.
pub fn asset_or_nothing_symmetric(market: &MarketSpec) -> Result<PriceResult> {
    market.validate()?;
    check_sigma_t(market.sigma_atm, market.maturity)?;
    let n = norm_cdf(-0.5 * market.sigma_atm * market.maturity.sqrt());
    let mut r = PriceResult::exact(market.spot * market.discount() * (1.0 - n), Method::Shortcut);
    r.diagnostics.values.insert("sigma".into(), market.sigma_atm);
    r.diagnostics.values.insert("barrier".into(), market.spot * market.spot);
    Ok(r)
}

/// Partial derivatives of the digital call price at `(beta, x) = (-1/2, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPair {
    pub i_beta: f64,
    pub i_x: f64,
    /// Central finite differences of the Fourier digital, for cross-checking.
    pub i_beta_fd: f64,
    pub i_x_fd: f64,
    /// `e^{-rT}`, the upper bound of a digital price.
    pub discount: f64,
    pub diagnostics: Diagnostics,
}

impl SensitivityPair {
    /// Coefficients supplied directly (e.g. published values); no cross-check data.
    pub fn from_coefficients(i_beta: f64, i_x: f64, discount: f64) -> Self {
        Self {
            i_beta,
            i_x,
            i_beta_fd: f64::NAN,
            i_x_fd: f64::NAN,
            discount,
            diagnostics: Diagnostics::default(),
        }
    }

    /// Put-side sensitivities, from `g = e^{-rT} - f`.
    pub fn put_side(&self) -> Self {
        Self {
            i_beta: -self.i_beta,
            i_x: -self.i_x,
            i_beta_fd: -self.i_beta_fd,
            i_x_fd: -self.i_x_fd,
            ..self.clone()
        }
    }
}

pub const SENSITIVITY_FD_STEP: f64 = 1e-4;
pub const SENSITIVITY_CONSISTENCY_TOL: f64 = 1e-3;

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// `I_beta` and `I_x` of the symmetric, martingale-drifted model.
///
/// `I_x = -e^{-rT} / pi Re int e^{izk} exp(T psi(-z)) dxi`, the negative of the
/// discounted density of `X_T` at the forward. `I_beta` weights the digital
/// integrand by `T d psi / d beta (-z)` taken along the martingale family,
/// so it is the derivative of the risk-neutral price as the tilt moves.
/// Both are checked against central differences of the Fourier digital.
pub fn sensitivities(model: &LevyModel, market: &MarketSpec, contour: &ContourSpec) -> Result<SensitivityPair> {
    market.validate()?;
    if !model.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::DomainError(format!(
            "sensitivities are taken at the symmetric point; model has beta = {}",
            model.symmetry_beta()
        )));
    }
    if model.drift_mode() != DriftMode::Martingale || model.nig_params().is_none() {
        return Err(Error::DomainError(
            "sensitivities need a martingale-drifted NIG model".into(),
        ));
    }
    let t = market.maturity;
    let k = (market.rate - market.dividend) * t;
    let df = market.discount();
    let i = Complex64::i();

    let v = resolve_v(model, contour, 0.5, 0.0, f64::INFINITY)?;
    let ix = line_integral(model, t, v, contour, |z| -(i * z * k).exp(), |_| Complex64::new(1.0, 0.0))?;
    let ib = line_integral(
        model,
        t,
        v,
        contour,
        |z| -(i * z * k).exp() / (i * z),
        |z| t * model.compensated_beta_derivative(-z).unwrap_or(Complex64::new(f64::NAN, 0.0)),
    )?;
    let i_x = df * ix.value;
    let i_beta = df * ib.value;

    let h = SENSITIVITY_FD_STEP;
    let price = |m: &LevyModel, x: f64| -> Result<f64> {
        let kk = k + x;
        Ok(df * exp_indicator(m, t, 0.0, kk, Side::Above, contour)?.value)
    };
    let beta0 = model.symmetry_beta();
    let i_x_fd = (price(model, h)? - price(model, -h)?) / (2.0 * h);
    let up = model.with_tilt(beta0 + h)?;
    let dn = model.with_tilt(beta0 - h)?;
    let i_beta_fd = (price(&up, 0.0)? - price(&dn, 0.0)?) / (2.0 * h);

    let mut diagnostics = Diagnostics {
        nodes: Some(ix.nodes + ib.nodes),
        truncation: Some(ix.truncation.max(ib.truncation)),
        contour_v: Some(v),
        imag_residue: Some(df * ix.imag_residue.max(ib.imag_residue)),
        ..Default::default()
    };
    diagnostics.values.insert("i_beta_abs_err".into(), df * ib.abs_err);
    diagnostics.values.insert("i_x_abs_err".into(), df * ix.abs_err);

    let (db, dx) = (rel_diff(i_beta, i_beta_fd), rel_diff(i_x, i_x_fd));
    if db > SENSITIVITY_CONSISTENCY_TOL || dx > SENSITIVITY_CONSISTENCY_TOL {
        return Err(Error::ConsistencyFailure(format!(
            "analytic vs finite difference: I_beta {i_beta} vs {i_beta_fd} (rel {db:e}), I_x {i_x} vs {i_x_fd} (rel {dx:e})"
        )));
    }
    Ok(SensitivityPair { i_beta, i_x, i_beta_fd, i_x_fd, discount: df, diagnostics })
}

/// The same two integrals with the tilt derivative taken at fixed `mu`
/// (no re-drifting) and no finite-difference check. This is the literal form
/// used when comparing against externally quoted coefficients.
pub fn sensitivities_fixed_drift(model: &LevyModel, market: &MarketSpec, contour: &ContourSpec) -> Result<(f64, f64)> {
    market.validate()?;
    if model.nig_params().is_none() {
        return Err(Error::UnsupportedVariant("black_scholes"));
    }
    let t = market.maturity;
    let k = (market.rate - market.dividend) * t;
    let df = market.discount();
    let i = Complex64::i();
    let v = resolve_v(model, contour, 0.5, 0.0, f64::INFINITY)?;
    let ix = line_integral(model, t, v, contour, |z| -(i * z * k).exp(), |_| Complex64::new(1.0, 0.0))?;
    let ib = line_integral(
        model,
        t,
        v,
        contour,
        |z| -(i * z * k).exp() / (i * z),
        |z| t * model.cumulant_beta_derivative(-z).unwrap_or(Complex64::new(f64::NAN, 0.0)),
    )?;
    Ok((df * ib.value, df * ix.value))
}

/// Radii of the near-symmetric, near-ATM region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub eps_beta: f64,
    pub eps_x: f64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self { eps_beta: 0.01, eps_x: 0.01 }
    }
}

/// First-order approximation of the digital call at `(beta, x)`.
///
/// Queries outside the configured radii, or results outside `[0, e^{-rT}]`,
/// are flagged in the notes; the value itself is never clamped.
pub fn approx_digital(base: &PriceResult, sens: &SensitivityPair, beta: f64, x: f64, cfg: &ApproxConfig) -> PriceResult {
    let db = beta + 0.5;
    let value = base.value + db * sens.i_beta + x * sens.i_x;
    let mut out = PriceResult {
        value,
        abs_err_estimate: base.abs_err_estimate,
        method: Method::Approx,
        diagnostics: Diagnostics::default(),
    };
    let d = &mut out.diagnostics;
    d.values.insert("base".into(), base.value);
    d.values.insert("beta".into(), beta);
    d.values.insert("x".into(), x);
    if db.abs() > cfg.eps_beta {
        d.notes.push(format!("|beta + 0.5| = {} exceeds eps_beta = {}", db.abs(), cfg.eps_beta));
    }
    if x.abs() > cfg.eps_x {
        d.notes.push(format!("|x| = {} exceeds eps_x = {}", x.abs(), cfg.eps_x));
    }
    if !(0.0..=sens.discount).contains(&value) {
        d.notes.push(format!("value {value} outside [0, {}]", sens.discount));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta: f64,
    pub x: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSource {
    /// First-order approximation from the shortcut base and the sensitivities.
    Approx,
    /// Fourier digital of the re-tilted martingale model at every point.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub beta_center: f64,
    pub x_center: f64,
    pub eps_beta: f64,
    pub eps_x: f64,
    /// Points per axis (at least 2).
    pub points: usize,
    pub source: GridSource,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            beta_center: -0.5,
            x_center: 0.0,
            eps_beta: 0.01,
            eps_x: 0.01,
            points: 21,
            source: GridSource::Approx,
        }
    }
}

fn axis(center: f64, eps: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| center - eps + 2.0 * eps * i as f64 / (n - 1) as f64)
        .collect()
}

/// Digital call prices over `[beta0 +- eps_beta] x [x0 +- eps_x]`, row-major in beta.
///
/// `model` must be the symmetric, martingale-drifted model; `base` the symmetric
/// ATM digital.
pub fn digital_grid(
    model: &LevyModel,
    market: &MarketSpec,
    base: &PriceResult,
    spec: &GridSpec,
    contour: &ContourSpec,
) -> Result<Vec<GridPoint>> {
    if spec.points < 2 {
        return Err(Error::DomainError("grid needs at least 2 points per axis".into()));
    }
    let betas = axis(spec.beta_center, spec.eps_beta, spec.points);
    let xs = axis(spec.x_center, spec.eps_x, spec.points);
    let cells: Vec<(f64, f64)> = betas
        .iter()
        .flat_map(|&b| xs.iter().map(move |&x| (b, x)))
        .collect();
    match spec.source {
        GridSource::Approx => {
            let sens = sensitivities(model, market, contour)?;
            let cfg = ApproxConfig { eps_beta: spec.eps_beta, eps_x: spec.eps_x };
            Ok(cells
                .into_iter()
                .map(|(beta, x)| GridPoint { beta, x, price: approx_digital(base, &sens, beta, x, &cfg).value })
                .collect())
        }
        GridSource::Exact => cells
            .into_par_iter()
            .map(|(beta, x)| {
                let m = model.with_tilt(beta)?;
                let price = price_digital_call_fourier(&m, market, x, contour)?.value;
                Ok(GridPoint { beta, x, price })
            })
            .collect(),
    }
}

/// Writes the grid as `beta,x,price` CSV with 17 significant digits.
pub fn write_grid_csv<W: Write>(points: &[GridPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "beta,x,price")?;
    for p in points {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", p.beta, p.x, p.price)?;
    }
    Ok(())
}
