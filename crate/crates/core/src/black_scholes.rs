//! Black-Scholes closed forms and implied-volatility inversion.

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_inv, norm_pdf};

fn d1_d2(spot: f64, strike: f64, rate: f64, dividend: f64, sigma: f64, t: f64) -> (f64, f64) {
    let sd = sigma * t.sqrt();
    let d1 = ((spot / strike).ln() + (rate - dividend + 0.5 * sigma * sigma) * t) / sd;
    (d1, d1 - sd)
}

pub fn call_price(spot: f64, strike: f64, rate: f64, dividend: f64, sigma: f64, t: f64) -> f64 {
    let df_q = (-dividend * t).exp();
    let df_r = (-rate * t).exp();
    if sigma <= 0.0 || t <= 0.0 {
        return (spot * df_q - strike * df_r).max(0.0);
    }
    let (d1, d2) = d1_d2(spot, strike, rate, dividend, sigma, t);
    spot * df_q * norm_cdf(d1) - strike * df_r * norm_cdf(d2)
}

pub fn vega(spot: f64, strike: f64, rate: f64, dividend: f64, sigma: f64, t: f64) -> f64 {
    let (d1, _) = d1_d2(spot, strike, rate, dividend, sigma, t);
    spot * (-dividend * t).exp() * norm_pdf(d1) * t.sqrt()
}

/// Cash-or-nothing call on log-moneyness `x = ln(K / F)`:
/// `exp(-rT) N(d2)` with `d2 = (-x - sigma^2 T / 2) / (sigma sqrt T)`.
pub fn digital_call(x: f64, rate: f64, sigma: f64, t: f64) -> f64 {
    let sd = sigma * t.sqrt();
    (-rate * t).exp() * norm_cdf((-x - 0.5 * sd * sd) / sd)
}

/// Asset-or-nothing call `E[e^{-rT} S_T 1{S_T > K}]`.
pub fn asset_or_nothing_call(spot: f64, strike: f64, rate: f64, dividend: f64, sigma: f64, t: f64) -> f64 {
    let (d1, _) = d1_d2(spot, strike, rate, dividend, sigma, t);
    spot * (-dividend * t).exp() * norm_cdf(d1)
}

/// Implied volatility of a European call price.
///
/// ATM-forward prices are inverted in closed form,
/// `C = S e^{-qT} (2 N(sigma sqrt(T) / 2) - 1)`, then polished by Newton steps.
/// Other strikes use Newton with a bisection safeguard on `[0, 20]`.
pub fn implied_vol(price: f64, spot: f64, strike: f64, rate: f64, dividend: f64, t: f64) -> Result<f64> {
    if !(spot > 0.0 && strike > 0.0 && t > 0.0 && price.is_finite()) {
        return Err(Error::InversionFailure(format!(
            "invalid inputs: price {price}, spot {spot}, strike {strike}, t {t}"
        )));
    }
    let fwd_disc = spot * (-dividend * t).exp();
    let lower = (fwd_disc - strike * (-rate * t).exp()).max(0.0);
    let upper = fwd_disc;
    let band = 1e-14 * upper;
    if price < lower - band || price >= upper {
        return Err(Error::InversionFailure(format!(
            "price {price} outside no-arbitrage band [{lower}, {upper})"
        )));
    }
    if price <= lower + band {
        return Ok(0.0);
    }

    let forward = spot * ((rate - dividend) * t).exp();
    let atm = ((strike - forward) / forward).abs() < 1e-12;
    let mut sigma = if atm {
        2.0 / t.sqrt() * norm_inv(0.5 * (price / fwd_disc + 1.0))
    } else {
        0.3
    };
    let (mut lo, mut hi) = (0.0f64, 20.0f64);
    for _ in 0..200 {
        let diff = call_price(spot, strike, rate, dividend, sigma, t) - price;
        if diff.abs() <= 1e-14 * upper {
            return Ok(sigma);
        }
        if diff > 0.0 {
            hi = hi.min(sigma);
        } else {
            lo = lo.max(sigma);
        }
        let v = vega(spot, strike, rate, dividend, sigma, t);
        let step = if v > 0.0 { sigma - diff / v } else { f64::NAN };
        sigma = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-16 {
            return Ok(sigma);
        }
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_call_value() {
        // Hull's textbook example: S=42, K=40, r=10%, sigma=20%, T=0.5.
        let c = call_price(42.0, 40.0, 0.1, 0.0, 0.2, 0.5);
        assert!((c - 4.759422392871532).abs() < 1e-12);
    }

    #[test]
    fn parity_of_digital_decomposition() {
        let (s, k, r, q, v, t): (f64, f64, f64, f64, f64, f64) = (100.0, 95.0, 0.03, 0.01, 0.25, 1.5);
        let x = (k / (s * ((r - q) * t).exp())).ln();
        let call = call_price(s, k, r, q, v, t);
        let aon = asset_or_nothing_call(s, k, r, q, v, t);
        assert!((call - (aon - k * digital_call(x, r, v, t))).abs() < 1e-12);
    }

    #[test]
    fn implied_vol_round_trip() {
        for &(k, v) in &[(100.0, 0.2), (80.0, 0.45), (130.0, 0.1), (100.0 * 0.01f64.exp(), 0.3)] {
            let p = call_price(100.0, k, 0.01, 0.0, v, 1.0);
            let iv = implied_vol(p, 100.0, k, 0.01, 0.0, 1.0).unwrap();
            assert!((iv - v).abs() < 1e-8, "k={k}: {iv} vs {v}");
        }
    }

    #[test]
    fn implied_vol_edges() {
        let (s, k, r, t): (f64, f64, f64, f64) = (100.0, 90.0, 0.02, 1.0);
        let lower = s - k * (-r * t).exp();
        assert_eq!(implied_vol(lower, s, k, r, 0.0, t).unwrap(), 0.0);
        assert!(implied_vol(lower - 1.0, s, k, r, 0.0, t).is_err());
        assert!(implied_vol(s, s, k, r, 0.0, t).is_err());
    }
}
