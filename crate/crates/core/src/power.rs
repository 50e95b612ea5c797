//! Power conjugation: `E f(S_T) = E[(S_T / (S_0 e^{aT}))^{-2b} f(S_0^2 e^{2aT} / S_T)]`
//! where `b` is the jump tilt and `a` the power drift, plus the down-and-in
//! power contract priced through it.

use crate::error::{Error, Result};
use crate::fourier::{
    atm_implied_vol, price_digital_call_fourier, price_power_indicator, ContourSpec, Diagnostics, MarketSpec,
    Method, PriceResult, Side,
};
use crate::levy::{LevyKind, LevyModel};
use crate::mc;
use crate::nig::NigParams;
use crate::shortcut::{digital_symmetric, digital_symmetric_with_sigma, DigitalSide};
use std::fmt;
use std::sync::Arc;

/// Conjugation data of a model: tilt, power drift and conjugate power `-2 beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugationSpec {
    pub beta: f64,
    pub power_drift: f64,
    pub exponent: f64,
}

impl ConjugationSpec {
    pub fn of(model: &LevyModel) -> Result<Self> {
        let beta = model.symmetry_beta();
        Ok(Self { beta, power_drift: power_drift(model)?, exponent: -2.0 * beta })
    }

    /// `S_0^2 e^{2 a T}`.
    pub fn reflection_level(&self, market: &MarketSpec) -> f64 {
        market.spot * market.spot * (2.0 * self.power_drift * market.maturity).exp()
    }
}

/// `-kappa(-2 beta) / (2 beta)`, or `mu` when `beta = 0`.
///
/// For NIG the `gamma` terms cancel and the drift is `mu` for every admissible
/// tilt, so it is returned directly rather than through a rounding-prone ratio.
pub fn power_drift(model: &LevyModel) -> Result<f64> {
    let beta = model.symmetry_beta();
    model.check_exponent(-2.0 * beta)?;
    match model.kind() {
        LevyKind::Nig(p) => Ok(p.mu),
        LevyKind::BlackScholes { .. } => Ok(-model.kappa(-2.0 * beta)? / (2.0 * beta)),
    }
}

/// Terminal payoffs with a known pricing route. Anything else goes through
/// [`Payoff::Custom`] and is priced by simulation.
#[derive(Clone)]
pub enum Payoff {
    Constant(f64),
    /// `S^power 1{S > level}` (or `<`).
    PowerIndicator { power: f64, level: f64, side: Side },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Constant(c) => write!(f, "Constant({c})"),
            Payoff::PowerIndicator { power, level, side } => {
                write!(f, "PowerIndicator {{ power: {power}, level: {level}, side: {side:?} }}")
            }
            Payoff::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Payoff {
    pub fn digital(level: f64, side: Side) -> Self {
        Payoff::PowerIndicator { power: 0.0, level, side }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Payoff::Constant(c) => *c,
            Payoff::PowerIndicator { power, level, side } => {
                let hit = match side {
                    Side::Above => s > *level,
                    Side::Below => s < *level,
                };
                if !hit {
                    0.0
                } else if *power == 0.0 {
                    1.0
                } else {
                    s.powf(*power)
                }
            }
            Payoff::Custom(f) => f(s),
        }
    }
}

fn flip(side: Side) -> Side {
    match side {
        Side::Above => Side::Below,
        Side::Below => Side::Above,
    }
}

/// Simulation settings for payoffs without a transform route.
#[derive(Debug, Clone, Copy)]
pub struct ConjugationOptions {
    pub contour: ContourSpec,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ConjugationOptions {
    fn default() -> Self {
        Self { contour: ContourSpec::default(), samples: 1_000_000, seed: 0 }
    }
}

/// Discounted right-hand side of the conjugation identity.
pub fn conjugate_price(
    model: &LevyModel,
    market: &MarketSpec,
    payoff: &Payoff,
    opts: &ConjugationOptions,
) -> Result<PriceResult> {
    market.validate()?;
    let spec = ConjugationSpec::of(model)?;
    let t = market.maturity;
    let pre = (market.spot * (spec.power_drift * t).exp()).powf(-spec.exponent);
    let mut out = match payoff {
        Payoff::Constant(c) => {
            // E[weight] = e^{-2 b a T} e^{kappa(-2b) T} = 1 by construction of a.
            let mean_weight = (spec.beta * 2.0 * spec.power_drift * t + model.kappa(spec.exponent)? * t).exp();
            let mut r = PriceResult::exact(c * market.discount() * mean_weight, Method::Conjugation);
            r.diagnostics.values.insert("mean_weight".into(), mean_weight);
            r
        }
        Payoff::PowerIndicator { power, level, side } => {
            if !(*level > 0.0) {
                return Err(Error::DomainError(format!("level must be > 0, got {level}")));
            }
            // f(L/S) with L = S_0^2 e^{2aT}: (L/S)^p 1{L/S > K} = L^p S^{-p} 1{S < L/K}.
            let refl = spec.reflection_level(market);
            let total = spec.exponent - power;
            let mut r = price_power_indicator(model, market, total, refl / level, flip(*side), &opts.contour)?;
            let scale = pre * refl.powf(*power);
            r.value *= scale;
            r.abs_err_estimate *= scale.abs();
            if let Some(res) = r.diagnostics.imag_residue.as_mut() {
                *res *= scale.abs();
            }
            r.method = Method::Conjugation;
            r.diagnostics.notes.push("route: fourier".into());
            r
        }
        Payoff::Custom(_) => {
            let xs = mc::sample_terminal(model, t, opts.samples, opts.seed)?;
            let refl = spec.reflection_level(market);
            let g = |s: f64| (s / market.spot * (-spec.power_drift * t).exp()).powf(spec.exponent) * payoff.eval(refl / s);
            let mut r = mc::mc_price(&g, &xs, market, mc::SpotMapping::Exponential)?;
            r.method = Method::Conjugation;
            r.diagnostics.notes.push("route: monte carlo".into());
            r
        }
    };
    out.diagnostics.values.insert("power_drift".into(), spec.power_drift);
    out.diagnostics.values.insert("exponent".into(), spec.exponent);
    Ok(out)
}

/// Law of the surrogate `-2 beta X` for an NIG model; its jump tilt is `-1/2`.
pub fn surrogate_params(p: &NigParams) -> Result<NigParams> {
    if p.beta == 0.0 {
        return Err(Error::DomainError("surrogate undefined at beta = 0".into()));
    }
    let c = -2.0 * p.beta;
    if c > 0.0 {
        p.scaled(c)
    } else {
        NigParams { mu: -p.mu, beta: -p.beta, ..*p }.scaled(-c)
    }
}

/// Which number [`price_down_and_in_power`] reports as its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    /// Shortcut digital at the market's ATM vol times `e^{-2 beta a T}`.
    #[default]
    Reproduction,
    /// Fourier value of the contract.
    Rigorous,
}

/// Terminal down-and-in power contract on the normalised surrogate:
/// pays `(S_T / S_0)^{-2 beta}` when `S_T < S_0 e^{2aT}`.
///
/// By conjugation its price is `e^{-2 beta a T} e^{-rT} P(S_T > S_0)`. Both the
/// direct Fourier value and the conjugated one are reported, together with the
/// shortcut applied at the surrogate's own ATM vol.
pub fn price_down_and_in_power(
    model: &LevyModel,
    market: &MarketSpec,
    mode: PowerMode,
    contour: &ContourSpec,
) -> Result<PriceResult> {
    market.validate()?;
    let spec = ConjugationSpec::of(model)?;
    let t = market.maturity;
    let growth = (spec.exponent * spec.power_drift * t).exp();
    let mut diag = Diagnostics::default();
    let put = |k: &str, v: f64, d: &mut Diagnostics| {
        d.values.insert(k.to_string(), v);
    };
    put("power_drift", spec.power_drift, &mut diag);
    put("exponent", spec.exponent, &mut diag);
    put("growth", growth, &mut diag);

    let shortcut = digital_symmetric(market, DigitalSide::Call)?.value;
    let reproduction = shortcut * growth;
    put("shortcut_digital", shortcut, &mut diag);
    put("reproduction", reproduction, &mut diag);

    let direct = price_power_indicator(
        model,
        market,
        spec.exponent,
        market.spot * (2.0 * spec.power_drift * t).exp(),
        Side::Below,
        contour,
    )?;
    let direct_value = direct.value * market.spot.powf(-spec.exponent);
    put("direct_fourier", direct_value, &mut diag);
    // P(S_T > S_0) is the digital at x = ln(S_0 / F).
    let x = -(market.rate - market.dividend) * t;
    let conj = price_digital_call_fourier(model, market, x, contour)?;
    let conjugated = growth * conj.value;
    put("conjugated_fourier", conjugated, &mut diag);

    if let LevyKind::Nig(p) = model.kind() {
        if spec.beta != 0.0 {
            let q = surrogate_params(p)?;
            let flat = MarketSpec { spot: 1.0, rate: 0.0, dividend: 0.0, ..*market };
            let sur = LevyModel::nig(q, 0.0, 0.0)?;
            match atm_implied_vol(&sur, &flat) {
                Ok(vol) => {
                    let own = digital_symmetric_with_sigma(market, vol, DigitalSide::Call)?.value;
                    put("surrogate_atm_vol", vol, &mut diag);
                    put("surrogate_shortcut", own * growth, &mut diag);
                }
                Err(e) => diag.notes.push(format!("surrogate implied vol unavailable: {e}")),
            }
        }
    }

    let err = (growth * conj.abs_err_estimate).max(direct.abs_err_estimate * market.spot.powf(-spec.exponent));
    Ok(match mode {
        PowerMode::Reproduction => {
            diag.notes.push("value: shortcut at the market vol times growth".into());
            PriceResult { value: reproduction, abs_err_estimate: 0.0, method: Method::Shortcut, diagnostics: diag }
        }
        PowerMode::Rigorous => {
            diag.contour_v = conj.diagnostics.contour_v;
            diag.nodes = conj.diagnostics.nodes;
            diag.truncation = conj.diagnostics.truncation;
            diag.imag_residue = conj.diagnostics.imag_residue;
            PriceResult { value: conjugated, abs_err_estimate: err, method: Method::Conjugation, diagnostics: diag }
        }
    })
}
