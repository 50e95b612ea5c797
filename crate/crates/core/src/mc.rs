//! Seeded Monte Carlo for terminal log-returns.
//!
//! Draws are produced in fixed chunks of [`CHUNK`] values. Chunk `c` uses a
//! ChaCha20 generator seeded with `seed_from_u64(seed)` on stream `c`, so the
//! concatenated output does not depend on the number of worker threads.

use crate::error::{Error, Result};
use crate::fourier::{Diagnostics, MarketSpec, Method, PriceResult};
use crate::levy::{LevyKind, LevyModel};
use crate::nig::NigParams;
use crate::power::{ConjugationSpec, Payoff};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

pub const CHUNK: usize = 1 << 14;

/// Stream offset used for the second, independent side of a two-sided estimate.
const SECOND_SIDE: u64 = 1 << 40;

/// Inverse Gaussian draw by Michael, Schucany and Haas. The smaller root is
/// written as `4 l m y / (y + sqrt(y^2 + 4 l y))^2`, which avoids the
/// cancellation of the textbook form when the shape is small against the mean.
fn inverse_gaussian<R: Rng>(rng: &mut R, mean: f64, shape: f64) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    let y = mean * n * n;
    let root = y + (y * y + 4.0 * shape * y).sqrt();
    let x = if root > 0.0 { 4.0 * shape * mean * y / (root * root) } else { mean };
    let x = if y == 0.0 { mean } else { x };
    let u: f64 = rng.random();
    if u <= mean / (mean + x) {
        x
    } else {
        mean * mean / x
    }
}

fn check_draw_args(t: f64, n: usize) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::ParameterError(format!("horizon must be > 0, got {t}")));
    }
    if n == 0 {
        return Err(Error::ParameterError("sample size must be >= 1".into()));
    }
    Ok(())
}

fn chunked<F>(n: usize, seed: u64, stream_base: u64, draw: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha20Rng) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    parts.concat()
}

fn nig_draws(p: &NigParams, t: f64, n: usize, seed: u64, stream_base: u64) -> Result<Vec<f64>> {
    p.validate()?;
    check_draw_args(t, n)?;
    let g = p.gamma();
    let dt = p.delta * t;
    let (mean, shape) = (dt / g, dt * dt);
    Ok(chunked(n, seed, stream_base, |rng| {
        let z = inverse_gaussian(rng, mean, shape);
        let w: f64 = rng.sample(StandardNormal);
        p.mu * t + p.beta * z + z.sqrt() * w
    }))
}

/// `n` draws of `X_t` for NIG parameters.
pub fn sample_nig_terminal(params: &NigParams, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    nig_draws(params, t, n, seed, 0)
}

fn model_draws(model: &LevyModel, t: f64, n: usize, seed: u64, stream_base: u64) -> Result<Vec<f64>> {
    match model.kind() {
        LevyKind::Nig(p) => nig_draws(p, t, n, seed, stream_base),
        LevyKind::BlackScholes { sigma } => {
            check_draw_args(t, n)?;
            let drift = (model.rate() - model.dividend() - 0.5 * sigma * sigma) * t;
            let sd = sigma * t.sqrt();
            Ok(chunked(n, seed, stream_base, |rng| {
                let w: f64 = rng.sample(StandardNormal);
                drift + sd * w
            }))
        }
    }
}

/// `n` draws of `X_t` for any supported model.
pub fn sample_terminal(model: &LevyModel, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    model_draws(model, t, n, seed, 0)
}

/// How a log-return draw becomes a terminal price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpotMapping {
    /// `S_T = S_0 e^{X_T}`; the model drift already carries the carry.
    #[default]
    Exponential,
    /// `S_T = S_0 e^{X_T + (r - q) T}` for centred log-returns.
    ForwardShift,
}

/// Sample mean and standard error with a thread-count independent reduction.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let sum: f64 = values.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect::<Vec<_>>().iter().sum();
    let mean = sum / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Discounted sample mean of `payoff(S_T)`.
pub fn mc_price<F>(payoff: &F, samples: &[f64], market: &MarketSpec, mapping: SpotMapping) -> Result<PriceResult>
where
    F: Fn(f64) -> f64 + Sync + ?Sized,
{
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    market.validate()?;
    let shift = match mapping {
        SpotMapping::Exponential => 0.0,
        SpotMapping::ForwardShift => (market.rate - market.dividend) * market.maturity,
    };
    let values: Vec<f64> = samples.par_iter().map(|x| payoff(market.spot * (x + shift).exp())).collect();
    let (mean, se) = mean_and_stderr(&values);
    let df = market.discount();
    Ok(PriceResult {
        value: df * mean,
        abs_err_estimate: df * se,
        method: Method::Mc,
        diagnostics: Diagnostics { samples: Some(samples.len()), ..Default::default() },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub combined_stderr: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
}

/// Both sides of the conjugation identity from independent streams; passes
/// when they agree within three combined standard errors.
pub fn verify_conjugation(
    model: &LevyModel,
    market: &MarketSpec,
    payoff: &Payoff,
    n: usize,
    seed: u64,
) -> Result<ConjugationReport> {
    market.validate()?;
    let spec = ConjugationSpec::of(model).map_err(|e| match e {
        Error::StripViolation { value, .. } => Error::MomentDivergence { exponent: value },
        other => other,
    })?;
    let t = market.maturity;
    let lhs_draws = model_draws(model, t, n, seed, 0)?;
    let rhs_draws = model_draws(model, t, n, seed, SECOND_SIDE)?;
    let lhs = mc_price(&|s: f64| payoff.eval(s), &lhs_draws, market, SpotMapping::Exponential)?;
    let refl = spec.reflection_level(market);
    let norm = market.spot * (spec.power_drift * t).exp();
    let weighted = |s: f64| (s / norm).powf(spec.exponent) * payoff.eval(refl / s);
    let rhs = mc_price(&weighted, &rhs_draws, market, SpotMapping::Exponential)?;
    let combined = lhs.abs_err_estimate.hypot(rhs.abs_err_estimate);
    Ok(ConjugationReport {
        lhs: lhs.value,
        rhs: rhs.value,
        lhs_stderr: lhs.abs_err_estimate,
        rhs_stderr: rhs.abs_err_estimate,
        combined_stderr: combined,
        samples: n,
        seed,
        pass: (lhs.value - rhs.value).abs() <= 3.0 * combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black_scholes;
    use crate::nig::{nig_density, nig_mean_variance};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn same_seed_same_draws() {
        let p = NigParams::new(0.0, 2.0, 1.0, 0.3).unwrap();
        let a = sample_nig_terminal(&p, 1.0, 40_000, 7).unwrap();
        let b = sample_nig_terminal(&p, 1.0, 40_000, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_nig_terminal(&p, 1.0, 40_000, 8).unwrap();
        assert_ne!(a, c);
        // A prefix of a longer run is the shorter run.
        let d = sample_nig_terminal(&p, 1.0, 20_000, 7).unwrap();
        assert_eq!(&a[..20_000], &d[..]);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let p = NigParams::new(0.001, 40.0, 0.01, -8.0).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_nig_terminal(&p, 1.0, 100_000, 3).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = NigParams::new(0.0, 2.0, 1.0, 0.0).unwrap();
        assert!(sample_nig_terminal(&p, 0.0, 10, 1).is_err());
        assert!(sample_nig_terminal(&p, 1.0, 0, 1).is_err());
        let mk = MarketSpec::new(1.0, 0.0, 0.0, 1.0, 0.2).unwrap();
        assert!(matches!(mc_price(&|_| 1.0, &[], &mk, SpotMapping::Exponential), Err(Error::EmptySample)));
    }

    #[test]
    fn symmetric_sample_mean() {
        let p = NigParams::new(0.0, 2.0, 1.0, 0.0).unwrap();
        let xs = sample_nig_terminal(&p, 1.0, 1_000_000, 11).unwrap();
        let (m, se) = mean_and_stderr(&xs);
        assert!(m.abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn sample_moments_match() {
        let p = NigParams::new(0.01, 6.0, 0.4, -1.5).unwrap();
        let xs = sample_nig_terminal(&p, 2.0, 400_000, 5).unwrap();
        let (m, se) = mean_and_stderr(&xs);
        let (mean, var) = nig_mean_variance(&p, 2.0).unwrap();
        assert!((m - mean).abs() < 3.0 * se);
        let sample_var = se * se * xs.len() as f64;
        assert!((sample_var / var - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_payoffs_are_exact() {
        let mk = MarketSpec::new(100.0, 0.05, 0.0, 2.0, 0.2).unwrap();
        let xs = vec![0.1, -0.2, 0.3];
        let one = mc_price(&|_| 1.0, &xs, &mk, SpotMapping::Exponential).unwrap();
        assert_eq!(one.value, mk.discount());
        assert_eq!(one.abs_err_estimate, 0.0);
        let zero = mc_price(&|_| 0.0, &xs, &mk, SpotMapping::ForwardShift).unwrap();
        assert_eq!((zero.value, zero.abs_err_estimate), (0.0, 0.0));
    }

    #[test]
    fn black_scholes_digital() {
        let (r, sigma, t) = (0.03, 0.25, 1.5);
        let m = LevyModel::black_scholes(sigma, r, 0.0).unwrap();
        let mk = MarketSpec::new(100.0, r, 0.0, t, sigma).unwrap();
        let xs = sample_terminal(&m, t, 1_000_000, 21).unwrap();
        let k = 105.0;
        let est = mc_price(&|s| if s > k { 1.0 } else { 0.0 }, &xs, &mk, SpotMapping::Exponential).unwrap();
        let exact = black_scholes::digital_call(mk.log_moneyness(k), r, sigma, t);
        assert!((est.value - exact).abs() < 3.0 * est.abs_err_estimate, "{} vs {exact}", est.value);
    }

    #[test]
    fn martingale_mean_of_paper_model() {
        let p = NigParams::new(0.0018, 49.99, 0.0085, -4.18).unwrap();
        let xs = sample_nig_terminal(&p, 1.0, 1_000_000, 2).unwrap();
        let e: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let (m, se) = mean_and_stderr(&e);
        let kappa = LevyModel::nig(p, 0.0012, 0.0).unwrap().kappa(1.0).unwrap();
        assert!((m - kappa.exp()).abs() < 3.0 * se, "{m} vs {}", kappa.exp());
    }

    #[test]
    fn stderr_scales_with_root_n() {
        let p = NigParams::new(0.0, 5.0, 0.5, 1.0).unwrap();
        let mk = MarketSpec::new(1.0, 0.0, 0.0, 1.0, 0.2).unwrap();
        let f = |s: f64| if s > 1.0 { 1.0 } else { 0.0 };
        let se = |n| {
            let xs = sample_nig_terminal(&p, 1.0, n, 9).unwrap();
            mc_price(&f, &xs, &mk, SpotMapping::Exponential).unwrap().abs_err_estimate
        };
        let ratio = se(10_000) / se(1_000_000);
        assert!((ratio / 10.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn chi_square_goodness_of_fit() {
        let p = NigParams::new(0.0018, 49.99, 0.0085, -9.22).unwrap();
        let n = 100_000;
        let xs = sample_nig_terminal(&p, 1.0, n, 17).unwrap();
        // 48 equal cells over mean +- 4 sd plus the two tails: 50 bins with
        // expected counts from the density.
        let bins = 50;
        let (mean, var) = nig_mean_variance(&p, 1.0).unwrap();
        let (lo, hi) = (mean - 4.0 * var.sqrt(), mean + 4.0 * var.sqrt());
        let width = (hi - lo) / (bins - 2) as f64;
        let opts = crate::quadrature::AdaptiveOptions::default();
        let mut observed = vec![0.0; bins];
        for &x in &xs {
            let i = if x < lo {
                0
            } else if x >= hi {
                bins - 1
            } else {
                1 + (((x - lo) / width) as usize).min(bins - 3)
            };
            observed[i] += 1.0;
        }
        let mut expected = vec![0.0; bins];
        for (i, e) in expected.iter_mut().enumerate().take(bins - 1).skip(1) {
            let a = lo + (i - 1) as f64 * width;
            let (m, _, _) =
                crate::quadrature::integrate_real(|x| nig_density(&p, x, 1.0).unwrap(), a, a + width, &opts);
            *e = m;
        }
        let span = 400.0 * var.sqrt();
        let dens = |x: f64| nig_density(&p, x, 1.0).unwrap();
        expected[0] = crate::quadrature::integrate_real(dens, lo - span, lo, &opts).0;
        expected[bins - 1] = crate::quadrature::integrate_real(dens, hi, hi + span, &opts).0;
        let mut stat = 0.0;
        for (o, e) in observed.iter().zip(&expected) {
            let e = e * n as f64;
            stat += (o - e) * (o - e) / e;
        }
        let pval = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        assert!(pval > 1e-3, "chi2 {stat}, p {pval}");
    }

    #[test]
    fn conjugation_on_black_scholes() {
        let m = LevyModel::black_scholes(0.3, 0.02, 0.0).unwrap();
        let mk = MarketSpec::new(1.0, 0.02, 0.0, 1.0, 0.3).unwrap();
        let rep = verify_conjugation(&m, &mk, &Payoff::digital(1.1, crate::fourier::Side::Above), 200_000, 4).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
