//! Contour-integral pricing of European payoffs from the characteristic exponent.
//!
//! For a payoff `g(X_T)` with transform `G(z) = int e^{i z x} g(x) dx` on the
//! line `Im z = v`,
//!
//! ```text
//! E g(X_T) = 1/(2 pi) int_{iv + R} G(z) exp(T psi(-z)) dz
//!          = 1/pi Re int_0^inf G(xi + iv) exp(T psi(-xi - iv)) dxi,
//! ```
//!
//! the second line using the conjugate symmetry of the integrand. With
//! `k = ln(K / S_0)` the transforms used here are
//!
//! * digital call, `1{X > k}`: `G(z) = -e^{i z k} / (i z)`, `v > 0`;
//! * `e^{aX} 1{X > k}`: `G(z) = -e^{(iz + a)k} / (iz + a)`, `v > a`;
//! * `e^{aX} 1{X < k}`: `G(z) = e^{(iz + a)k} / (iz + a)`, `v < a`;
//! * call (Lewis): `S_0 (e^X - e^k)^+` gives `G(z) = -S_0 e^{(iz+1)k} / (z (z - i))`, `v > 1`.
//!
//! The digital sign convention is fixed by requiring the Black-Scholes case to
//! return `e^{-rT} N(d2)`.

use crate::black_scholes;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::quadrature::{gl_panel, integrate, AdaptiveOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Pricing environment. Rates are continuously compounded per model time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub spot: f64,
    pub rate: f64,
    #[serde(default)]
    pub dividend: f64,
    pub maturity: f64,
    /// At-the-money volatility proxy used by the closed-form symmetric prices.
    #[serde(default)]
    pub sigma_atm: f64,
}

impl MarketSpec {
    pub fn new(spot: f64, rate: f64, dividend: f64, maturity: f64, sigma_atm: f64) -> Result<Self> {
        let m = Self { spot, rate, dividend, maturity, sigma_atm };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return Err(Error::ParameterError(format!("spot must be > 0, got {}", self.spot)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::ParameterError(format!("maturity must be > 0, got {}", self.maturity)));
        }
        if !(self.rate.is_finite() && self.dividend.is_finite() && self.sigma_atm.is_finite()) {
            return Err(Error::ParameterError("rate, dividend and sigma_atm must be finite".into()));
        }
        Ok(())
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    pub fn forward(&self) -> f64 {
        self.spot * ((self.rate - self.dividend) * self.maturity).exp()
    }

    /// `K_x = F e^x`.
    pub fn strike_at(&self, x: f64) -> f64 {
        self.forward() * x.exp()
    }

    pub fn log_moneyness(&self, strike: f64) -> f64 {
        (strike / self.forward()).ln()
    }
}

/// Integration line and accuracy controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// Imaginary offset of the line; `None` picks a payoff-specific default.
    pub v: Option<f64>,
    /// Truncation of the half line; `None` doubles until the integrand is negligible.
    pub half_width: Option<f64>,
    pub max_nodes: usize,
    pub rel_tol: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            v: None,
            half_width: None,
            max_nodes: 4_000_000,
            rel_tol: 1e-10,
        }
    }
}

impl ContourSpec {
    pub fn with_v(v: f64) -> Self {
        Self { v: Some(v), ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::ParameterError(format!("rel_tol must lie in (0, 1e-2], got {}", self.rel_tol)));
        }
        if let Some(l) = self.half_width {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::ParameterError(format!("half_width must be > 0, got {l}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fourier,
    Shortcut,
    Approx,
    Mc,
    Conjugation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imag_residue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// Uniform output of every pricer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceResult {
    pub value: f64,
    pub abs_err_estimate: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl PriceResult {
    pub fn exact(value: f64, method: Method) -> Self {
        Self {
            value,
            abs_err_estimate: 0.0,
            method,
            diagnostics: Diagnostics::default(),
        }
    }
}

/// Which side of the level an indicator payoff pays on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Below,
}

/// Value of `1/pi Re int_0^L` together with quadrature bookkeeping.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LineIntegral {
    pub value: f64,
    pub abs_err: f64,
    pub nodes: usize,
    pub truncation: f64,
    pub v: f64,
    pub imag_residue: f64,
}

const ENDPOINT_TOL: f64 = 1e-14;
const MAX_DOUBLINGS: u32 = 20;

/// Picks the contour offset: the preferred value if admissible, otherwise the
/// middle of the admissible interval `(lo, hi)`.
pub(crate) fn choose_v(preferred: f64, lo: f64, hi: f64) -> f64 {
    if preferred > lo && preferred < hi {
        return preferred;
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 0.5,
        (false, true) => hi - 0.5,
        (false, false) => preferred,
    }
}

/// Validates or chooses `v` for a payoff needing `v` in `(need_lo, need_hi)`.
pub(crate) fn resolve_v(
    model: &LevyModel,
    contour: &ContourSpec,
    preferred: f64,
    need_lo: f64,
    need_hi: f64,
) -> Result<f64> {
    contour.validate()?;
    let (elo, ehi) = model.exponent_range();
    let lo = elo.max(need_lo);
    let hi = ehi.min(need_hi);
    if !(lo < hi) {
        return Err(Error::StripViolation {
            value: preferred,
            lo,
            hi,
            bound: if need_lo >= ehi { ehi } else { elo },
        });
    }
    match contour.v {
        Some(v) if v > lo && v < hi => Ok(v),
        Some(v) => Err(Error::StripViolation {
            value: v,
            lo,
            hi,
            bound: if v <= lo { lo } else { hi },
        }),
        None => Ok(choose_v(preferred, lo, hi)),
    }
}

/// `1/pi Re int_0^L G(z) W(z) exp(T psi(-z)) dxi` along `z = xi + iv`.
///
/// `v` must already be admissible for the model; the strip is checked once here.
pub(crate) fn line_integral<G, W>(
    model: &LevyModel,
    maturity: f64,
    v: f64,
    contour: &ContourSpec,
    transform: G,
    weight: W,
) -> Result<LineIntegral>
where
    G: Fn(Complex64) -> Complex64,
    W: Fn(Complex64) -> Complex64,
{
    model.check_exponent(v)?;
    let cf = |z: Complex64| (maturity * model.cumulant_unchecked(-z)).exp();
    let integrand = |xi: f64| {
        let z = Complex64::new(xi, v);
        let val = transform(z) * weight(z) * cf(z);
        if val.is_finite() {
            val
        } else {
            Complex64::new(0.0, 0.0)
        }
    };

    let truncation = match contour.half_width {
        Some(l) => l,
        None => {
            let mut l = 8.0;
            let mut doublings = 0;
            loop {
                let z = Complex64::new(l, v);
                let decay = cf(z).norm() / l;
                let whole = (transform(z) * weight(z) * cf(z)).norm();
                if decay < ENDPOINT_TOL && whole < ENDPOINT_TOL {
                    break l;
                }
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(Error::QuadratureFailure {
                        estimate: f64::NAN,
                        abs_err: f64::INFINITY,
                        reason: format!("integrand still {decay:e} at truncation {l} after {MAX_DOUBLINGS} doublings"),
                    });
                }
                l *= 2.0;
            }
        }
    };

    let opts = AdaptiveOptions {
        abs_tol: 1e-14,
        // Panels cannot resolve much below a few hundred ulps.
        rel_tol: (contour.rel_tol * 1e-2).max(1e-13),
        max_nodes: contour.max_nodes,
        initial_panels: 32,
    };
    let out = integrate(integrand, 0.0, truncation, &opts);

    // Full-line imaginary part, from g(xi) + g(-xi) on the accepted panels.
    let mut mirrored = Complex64::new(0.0, 0.0);
    for &(a, b) in &out.panels {
        mirrored += gl_panel(&|xi: f64| integrand(xi) + integrand(-xi), a, b);
    }
    let imag_residue = (mirrored.im / (2.0 * PI)).abs();

    let value = out.value.re / PI;
    let abs_err = out.abs_err / PI;
    if !out.converged {
        return Err(Error::QuadratureFailure {
            estimate: value,
            abs_err,
            reason: format!("tolerance not met within {} nodes", contour.max_nodes),
        });
    }
    Ok(LineIntegral {
        value,
        abs_err,
        nodes: out.nodes,
        truncation,
        v,
        imag_residue,
    })
}

fn fourier_result(value: f64, li: &LineIntegral, scale: f64) -> PriceResult {
    PriceResult {
        value,
        abs_err_estimate: li.abs_err * scale.abs(),
        method: Method::Fourier,
        diagnostics: Diagnostics {
            nodes: Some(li.nodes),
            truncation: Some(li.truncation),
            contour_v: Some(li.v),
            imag_residue: Some(li.imag_residue * scale.abs()),
            ..Default::default()
        },
    }
}

/// Undiscounted `E[e^{a X_T} 1{X_T > k}]` (or `< k`).
pub(crate) fn exp_indicator(
    model: &LevyModel,
    maturity: f64,
    a: f64,
    k: f64,
    side: Side,
    contour: &ContourSpec,
) -> Result<LineIntegral> {
    let i = Complex64::i();
    let (v, sign) = match side {
        Side::Above => (resolve_v(model, contour, a + 0.5, a, f64::INFINITY)?, -1.0),
        Side::Below => (resolve_v(model, contour, a - 0.5, f64::NEG_INFINITY, a)?, 1.0),
    };
    line_integral(
        model,
        maturity,
        v,
        contour,
        |z| {
            let w = i * z + a;
            sign * (w * k).exp() / w
        },
        |_| Complex64::new(1.0, 0.0),
    )
}

/// European call by the Lewis contour integral (`v > 1`).
pub fn price_call_lewis(model: &LevyModel, market: &MarketSpec, strike: f64, contour: &ContourSpec) -> Result<PriceResult> {
    market.validate()?;
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::DomainError(format!("strike must be > 0, got {strike}")));
    }
    let v = resolve_v(model, contour, 1.5, 1.0, f64::INFINITY)?;
    let k = (strike / market.spot).ln();
    let i = Complex64::i();
    let li = line_integral(
        model,
        market.maturity,
        v,
        contour,
        |z| -((i * z + 1.0) * k).exp() / (z * (z - i)),
        |_| Complex64::new(1.0, 0.0),
    )?;
    let scale = market.discount() * market.spot;
    Ok(fourier_result(scale * li.value, &li, scale))
}

/// Digital call paying 1 if `S_T > K_x`, `K_x = F e^x`.
pub fn price_digital_call_fourier(model: &LevyModel, market: &MarketSpec, x: f64, contour: &ContourSpec) -> Result<PriceResult> {
    market.validate()?;
    let k = (market.rate - market.dividend) * market.maturity + x;
    let li = exp_indicator(model, market.maturity, 0.0, k, Side::Above, contour)?;
    let df = market.discount();
    Ok(fourier_result(df * li.value, &li, df))
}

/// Digital put `e^{-rT} - f_x`.
pub fn price_digital_put_fourier(model: &LevyModel, market: &MarketSpec, x: f64, contour: &ContourSpec) -> Result<PriceResult> {
    let mut call = price_digital_call_fourier(model, market, x, contour)?;
    call.value = market.discount() - call.value;
    Ok(call)
}

/// Asset-or-nothing call `e^{-rT} E[S_T 1{S_T > K}]`.
pub fn price_asset_or_nothing_fourier(model: &LevyModel, market: &MarketSpec, strike: f64, contour: &ContourSpec) -> Result<PriceResult> {
    market.validate()?;
    if !(strike > 0.0) {
        return Err(Error::DomainError(format!("strike must be > 0, got {strike}")));
    }
    let k = (strike / market.spot).ln();
    let li = exp_indicator(model, market.maturity, 1.0, k, Side::Above, contour)?;
    let scale = market.discount() * market.spot;
    Ok(fourier_result(scale * li.value, &li, scale))
}

/// `e^{-rT} E[S_T^p 1{S_T > level}]` (or `< level`) with `S_T = S_0 e^{X_T}`.
pub fn price_power_indicator(
    model: &LevyModel,
    market: &MarketSpec,
    power: f64,
    level: f64,
    side: Side,
    contour: &ContourSpec,
) -> Result<PriceResult> {
    market.validate()?;
    if !(level > 0.0) {
        return Err(Error::DomainError(format!("level must be > 0, got {level}")));
    }
    model
        .check_exponent(power)
        .map_err(|_| Error::MomentDivergence { exponent: power })?;
    let k = (level / market.spot).ln();
    let li = exp_indicator(model, market.maturity, power, k, side, contour)?;
    let scale = market.discount() * market.spot.powf(power);
    Ok(fourier_result(scale * li.value, &li, scale))
}

/// Black-Scholes volatility reproducing the Lewis price at `K = F`.
pub fn atm_implied_vol(model: &LevyModel, market: &MarketSpec) -> Result<f64> {
    let strike = market.forward();
    let contour = ContourSpec { rel_tol: 1e-12, ..ContourSpec::default() };
    let price = price_call_lewis(model, market, strike, &contour)?.value;
    black_scholes::implied_vol(price, market.spot, strike, market.rate, market.dividend, market.maturity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nig::NigParams;

    fn bs_market(sigma: f64) -> (LevyModel, MarketSpec) {
        (
            LevyModel::black_scholes(sigma, 0.0012, 0.0).unwrap(),
            MarketSpec::new(100.0, 0.0012, 0.0, 1.0, sigma).unwrap(),
        )
    }

    #[test]
    fn lewis_call_matches_black_scholes() {
        let (m, mk) = bs_market(0.2741);
        let p = price_call_lewis(&m, &mk, 100.0, &ContourSpec::default()).unwrap();
        let want = black_scholes::call_price(100.0, 100.0, 0.0012, 0.0, 0.2741, 1.0);
        assert!(((p.value - want) / want).abs() < 1e-6, "{} vs {want}", p.value);
        assert_eq!(p.method, Method::Fourier);
    }

    #[test]
    fn call_with_vanishing_strike_is_forward_claim() {
        let (m, mk) = bs_market(0.2741);
        let p = price_call_lewis(&m, &mk, 1e-8 * 100.0, &ContourSpec::default()).unwrap();
        assert!((p.value - 100.0).abs() < 1e-6, "{}", p.value);
    }

    #[test]
    fn digital_matches_n_d2() {
        let (m, mk) = bs_market(0.25);
        for x in [-0.3, 0.0, 0.2] {
            let p = price_digital_call_fourier(&m, &mk, x, &ContourSpec::default()).unwrap();
            let want = black_scholes::digital_call(x, 0.0012, 0.25, 1.0);
            assert!((p.value - want).abs() < 1e-8, "x={x}: {} vs {want}", p.value);
            let put = price_digital_put_fourier(&m, &mk, x, &ContourSpec::default()).unwrap();
            assert_eq!(put.value + p.value, mk.discount());
        }
    }

    #[test]
    fn explicit_contour_outside_strip_is_rejected() {
        let nig = LevyModel::nig_martingale(NigParams::new(0.0, 5.0, 0.3, -1.0).unwrap(), 0.01, 0.0).unwrap();
        let mk = MarketSpec::new(1.0, 0.01, 0.0, 1.0, 0.2).unwrap();
        // Digital needs v in (0, alpha - beta) = (0, 6).
        assert!(matches!(
            price_digital_call_fourier(&nig, &mk, 0.0, &ContourSpec::with_v(6.5)),
            Err(Error::StripViolation { .. })
        ));
        assert!(matches!(
            price_digital_call_fourier(&nig, &mk, 0.0, &ContourSpec::with_v(-0.1)),
            Err(Error::StripViolation { .. })
        ));
        assert!(price_digital_call_fourier(&nig, &mk, 0.0, &ContourSpec::with_v(5.9)).is_ok());
    }

    #[test]
    fn default_contours_are_clipped_into_the_strip() {
        assert_eq!(choose_v(0.5, 0.0, 6.0), 0.5);
        assert_eq!(choose_v(1.5, 1.0, 1.2), 1.1);
        assert_eq!(choose_v(1.5, 1.0, f64::INFINITY), 1.5);
    }

    #[test]
    fn invalid_contour_tolerance() {
        let (m, mk) = bs_market(0.2);
        let c = ContourSpec { rel_tol: 0.5, ..ContourSpec::default() };
        assert!(matches!(price_digital_call_fourier(&m, &mk, 0.0, &c), Err(Error::ParameterError(_))));
    }

    #[test]
    fn atm_implied_vol_inverts_black_scholes() {
        let (m, mk) = bs_market(0.2);
        assert!((atm_implied_vol(&m, &mk).unwrap() - 0.2).abs() < 1e-8);
    }

    #[test]
    fn price_bounds_nig() {
        let nig = LevyModel::nig(NigParams::new(0.0018, 49.99, 0.0085, -4.18).unwrap(), 0.0012, 0.0).unwrap();
        let mk = MarketSpec::new(1.0, 0.0012, 0.0, 1.0, 0.2741).unwrap();
        let c = price_call_lewis(&nig, &mk, 1.0, &ContourSpec::default()).unwrap();
        let lower = (1.0 - mk.discount()).max(0.0);
        assert!(c.value > lower && c.value < 1.0);
        let d = price_digital_call_fourier(&nig, &mk, 0.0, &ContourSpec::default()).unwrap();
        assert!(d.value > 0.0 && d.value < mk.discount());
        assert!(d.diagnostics.imag_residue.unwrap() < 1e-10);
    }
}
