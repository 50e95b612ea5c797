//! Return ingestion, NIG maximum likelihood and the Esscher change of measure.

use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::nig::{esscher_shift, NigParams};
use crate::roots::brent;
use crate::special::bessel_k01_scaled;
use chrono::NaiveDate;
use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::Serialize;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnsFormat {
    /// `date,close`; returns are `ln(P_{t+1} / P_t)`.
    Prices,
    /// `date,logret`.
    LogReturns,
}

impl ReturnsFormat {
    pub fn default_min_rows(self) -> usize {
        match self {
            ReturnsFormat::Prices => 31,
            ReturnsFormat::LogReturns => 30,
        }
    }
}

impl FromStr for ReturnsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prices" => Ok(ReturnsFormat::Prices),
            "logreturns" => Ok(ReturnsFormat::LogReturns),
            other => Err(Error::DomainError(format!("unknown returns format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Overrides the format's minimum number of data rows.
    pub min_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsSeries {
    pub values: Vec<f64>,
    /// Data rows read, excluding any header.
    pub rows: usize,
}

pub fn load_returns(path: impl AsRef<Path>, format: ReturnsFormat) -> Result<ReturnsSeries> {
    load_returns_with(path, format, &LoadOptions::default())
}

pub fn load_returns_with(path: impl AsRef<Path>, format: ReturnsFormat, opts: &LoadOptions) -> Result<ReturnsSeries> {
    let file = File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_returns(file, format, opts)
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// CSV with an optional header row and two columns, a `YYYY-MM-DD` date and a
/// value. Dates must be strictly increasing; they are not used otherwise.
pub fn parse_returns<R: Read>(reader: R, format: ReturnsFormat, opts: &LoadOptions) -> Result<ReturnsSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut raw = Vec::new();
    let mut last_date: Option<NaiveDate> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::ParseError {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::ParseError { line, message: format!("expected 2 fields, found {}", rec.len()) });
        }
        let date = parse_date(&rec[0]);
        let value = rec[1].parse::<f64>().ok();
        if i == 0 && date.is_none() && value.is_none() {
            continue;
        }
        let date = date.ok_or_else(|| Error::ParseError { line, message: format!("invalid date '{}'", &rec[0]) })?;
        let value = value
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::ParseError { line, message: format!("invalid number '{}'", &rec[1]) })?;
        if format == ReturnsFormat::Prices && value <= 0.0 {
            return Err(Error::ParseError { line, message: format!("price must be > 0, got {value}") });
        }
        if let Some(prev) = last_date {
            if date <= prev {
                return Err(Error::ParseError { line, message: format!("date {date} does not follow {prev}") });
            }
        }
        last_date = Some(date);
        raw.push(value);
    }
    let required = opts.min_rows.unwrap_or_else(|| format.default_min_rows());
    let rows = raw.len();
    if rows < required || (format == ReturnsFormat::Prices && rows < 2) || rows == 0 {
        return Err(Error::InsufficientData { found: rows, required: required.max(1) });
    }
    let values = match format {
        ReturnsFormat::Prices => raw.windows(2).map(|w| (w[1] / w[0]).ln()).collect(),
        ReturnsFormat::LogReturns => raw,
    };
    Ok(ReturnsSeries { values, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWarning {
    /// `|beta| >= 0.99 alpha`.
    NearBoundary { alpha: f64, beta: f64 },
    /// The tail parameter ran off towards the Gaussian limit.
    GaussianLimit { alpha: f64 },
    /// The observed information was not positive definite.
    SingularInformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StdErrors {
    pub mu: f64,
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub params: NigParams,
    pub init: NigParams,
    pub log_likelihood: f64,
    /// Gradient norm of the mean log-likelihood in the fitting coordinates.
    pub grad_norm: f64,
    pub iterations: usize,
    pub std_errors: Option<StdErrors>,
    pub warnings: Vec<FitWarning>,
    /// Mean log-likelihood after each accepted step.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-6 }
    }
}

/// Fitting coordinates on standardised data: `(mu, ln delta, ln gamma, beta)`
/// with `alpha = sqrt(beta^2 + gamma^2)`, so every point is admissible.
type Theta = Vector4<f64>;

fn to_theta(p: &NigParams, m: f64, sd: f64) -> Theta {
    let (mu, delta, beta) = ((p.mu - m) / sd, p.delta / sd, p.beta * sd);
    let gamma = p.gamma() * sd;
    Vector4::new(mu, delta.ln(), gamma.ln(), beta)
}

fn from_theta(th: &Theta, m: f64, sd: f64) -> NigParams {
    let (delta, gamma, beta) = (th[1].exp(), th[2].exp(), th[3]);
    let alpha = beta.hypot(gamma);
    NigParams { mu: m + sd * th[0], alpha: alpha / sd, delta: delta * sd, beta: beta / sd }
}

const PAR_CHUNK: usize = 4096;

/// Mean negative log-likelihood and its gradient on standardised data.
fn objective(th: &Theta, u: &[f64]) -> (f64, Theta) {
    let (mu, delta, gamma, beta) = (th[0], th[1].exp(), th[2].exp(), th[3]);
    let alpha = beta.hypot(gamma);
    let base = (alpha * delta / std::f64::consts::PI).ln() + delta * gamma;
    let parts: Vec<(f64, Theta)> = u
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut ll = 0.0;
            let mut g = Theta::zeros();
            for &x in chunk {
                let y = x - mu;
                let s = delta.hypot(y);
                let z = alpha * s;
                let (k0e, k1e) = bessel_k01_scaled(z);
                let r = k0e / k1e;
                ll += base + beta * y - z + k1e.ln() - s.ln();
                g[0] += -beta + alpha * r * y / s + 2.0 * y / (s * s);
                g[1] += 1.0 + delta * gamma - alpha * r * delta * delta / s - 2.0 * delta * delta / (s * s);
                g[2] += gamma * (delta - r * s * gamma / alpha);
                g[3] += y - r * s * beta / alpha;
            }
            (ll, g)
        })
        .collect();
    let n = u.len() as f64;
    let (mut ll, mut g) = (0.0, Theta::zeros());
    for (l, gg) in parts {
        ll += l;
        g += gg;
    }
    (-ll / n, -g / n)
}

fn moments(u: &[f64]) -> (f64, f64, f64, f64) {
    let n = u.len() as f64;
    let m = u.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in u {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    (m, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Method of moments for NIG. With `rho = beta / alpha` and `zeta = delta gamma`,
/// skewness is `3 rho / sqrt(zeta)` and excess kurtosis `3 (1 + 4 rho^2) / zeta`,
/// so `zeta = 3 / (k - 4 s^2 / 3)` and `rho = s sqrt(zeta) / 3`. Variance
/// `zeta / (gamma^2 (1 - rho^2))` then fixes the scale.
pub fn method_of_moments(returns: &[f64]) -> Option<NigParams> {
    if returns.len() < 4 {
        return None;
    }
    let (m, var, s, k) = moments(returns);
    let denom = k - 4.0 * s * s / 3.0;
    if !(denom > 0.0 && var > 0.0) {
        return None;
    }
    let zeta = 3.0 / denom;
    let rho = s * zeta.sqrt() / 3.0;
    if !(rho.abs() < 0.99) {
        return None;
    }
    let gamma = (zeta / (var * (1.0 - rho * rho))).sqrt();
    let alpha = gamma / (1.0 - rho * rho).sqrt();
    let beta = rho * alpha;
    let delta = zeta / gamma;
    NigParams::new(m - delta * beta / gamma, alpha, delta, beta).ok()
}

const FALLBACK_INIT: NigParams = NigParams { mu: 0.0, alpha: 10.0, delta: 0.01, beta: 0.0 };

/// Past this standardised `gamma` the fit is indistinguishable from a Gaussian.
const GAUSSIAN_GAMMA: f64 = 1e6;

pub fn fit_nig_mle(returns: &[f64], init: Option<NigParams>) -> Result<FitReport> {
    fit_nig_mle_with(returns, init, &FitOptions::default())
}

/// Maximum likelihood by BFGS with Armijo backtracking. Data are standardised
/// first and the result mapped back; the mean log-likelihood never decreases
/// between accepted steps.
pub fn fit_nig_mle_with(returns: &[f64], init: Option<NigParams>, opts: &FitOptions) -> Result<FitReport> {
    if returns.len() < 4 {
        return Err(Error::InsufficientData { found: returns.len(), required: 4 });
    }
    if returns.iter().any(|x| !x.is_finite()) {
        return Err(Error::DomainError("non-finite return in sample".into()));
    }
    let (m, var, _, _) = moments(returns);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DomainError("sample has zero variance".into()));
    }
    let u: Vec<f64> = returns.iter().map(|x| (x - m) / sd).collect();
    let init = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => method_of_moments(returns).unwrap_or(FALLBACK_INIT),
    };
    let mut th = to_theta(&init, m, sd);
    let (mut f, mut g) = objective(&th, &u);
    if !f.is_finite() {
        return Err(Error::OptimizationFailure(format!("non-finite likelihood at start {init:?}")));
    }
    let mut h = Matrix4::<f64>::identity();
    let mut trace = vec![-f];
    let mut warnings = Vec::new();
    let mut iterations = 0;
    let mut converged = g.norm() < opts.grad_tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut p = -(h * g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            h = Matrix4::identity();
            p = -g;
            slope = -g.norm_squared();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = th + p * t;
            let (fc, gc) = objective(&cand, &u);
            if fc.is_finite() && fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            // No descent left at working precision.
            if g.norm() < 1e3 * opts.grad_tol {
                break;
            }
            return Err(Error::OptimizationFailure(format!(
                "line search failed at iteration {iterations}, gradient norm {:e}",
                g.norm()
            )));
        };
        let s = cand - th;
        let yv = gc - g;
        let sy = s.dot(&yv);
        if sy > 1e-16 {
            if iterations == 1 {
                h = Matrix4::identity() * (sy / yv.norm_squared());
            }
            let rho = 1.0 / sy;
            let i = Matrix4::<f64>::identity();
            h = (i - s * yv.transpose() * rho) * h * (i - yv * s.transpose() * rho) + s * s.transpose() * rho;
        }
        th = cand;
        f = fc;
        g = gc;
        trace.push(-f);
        converged = g.norm() < opts.grad_tol;
        if th[2].exp() > GAUSSIAN_GAMMA {
            warnings.push(FitWarning::GaussianLimit { alpha: from_theta(&th, m, sd).alpha });
            break;
        }
    }
    let gaussian = warnings.iter().any(|w| matches!(w, FitWarning::GaussianLimit { .. }));
    if !converged && !gaussian && g.norm() >= 1e3 * opts.grad_tol {
        return Err(Error::OptimizationFailure(format!(
            "no convergence in {iterations} iterations, gradient norm {:e}",
            g.norm()
        )));
    }

    let params = from_theta(&th, m, sd);
    params.validate()?;
    if params.beta.abs() >= 0.99 * params.alpha {
        warnings.push(FitWarning::NearBoundary { alpha: params.alpha, beta: params.beta });
    }
    let std_errors = standard_errors(&th, &u, sd);
    if std_errors.is_none() {
        warnings.push(FitWarning::SingularInformation);
    }
    let n = returns.len() as f64;
    Ok(FitReport {
        params,
        init,
        log_likelihood: -f * n - n * sd.ln(),
        grad_norm: g.norm(),
        iterations,
        std_errors,
        warnings,
        trace,
    })
}

/// Asymptotic standard errors from the observed information, by central
/// differences of the analytic gradient, carried to `(mu, alpha, delta, beta)`
/// by the delta method.
fn standard_errors(th: &Theta, u: &[f64], sd: f64) -> Option<StdErrors> {
    let n = u.len() as f64;
    let mut hess = Matrix4::<f64>::zeros();
    for j in 0..4 {
        let step = 1e-5 * th[j].abs().max(1.0);
        let mut up = *th;
        let mut dn = *th;
        up[j] += step;
        dn[j] -= step;
        let col = (objective(&up, u).1 - objective(&dn, u).1) / (2.0 * step);
        hess.set_column(j, &col);
    }
    let hess = (hess + hess.transpose()) * 0.5 * n;
    let cov = hess.cholesky()?.inverse();
    let (gamma, beta) = (th[2].exp(), th[3]);
    let alpha = beta.hypot(gamma);
    let delta = th[1].exp() * sd;
    #[rustfmt::skip]
    let jac = Matrix4::new(
        sd, 0.0, 0.0, 0.0,
        0.0, 0.0, gamma * gamma / (alpha * sd), beta / (alpha * sd),
        0.0, delta, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0 / sd,
    );
    let c = jac * cov * jac.transpose();
    let d = c.diagonal();
    if d.iter().any(|v| !(*v >= 0.0)) {
        return None;
    }
    Some(StdErrors { mu: d[0].sqrt(), alpha: d[1].sqrt(), delta: d[2].sqrt(), beta: d[3].sqrt() })
}

fn esscher_gap(p: &NigParams, b: f64, carry: f64) -> f64 {
    let a = p.alpha;
    p.mu + p.delta * (((a - b) * (a + b)).sqrt() - ((a - b - 1.0) * (a + b + 1.0)).sqrt()) - carry
}

/// Tilt `theta` with `kappa_{beta + theta}(1) = r - q`.
///
/// The map `b -> kappa_b(1)` is increasing on `[-alpha, alpha - 1]`; this is
/// checked on a grid before the bracketed solve.
pub fn esscher_theta(params: &NigParams, rate: f64, dividend: f64) -> Result<f64> {
    params.validate()?;
    let carry = rate - dividend;
    if esscher_gap(params, params.beta, carry).abs() < 1e-10 && params.beta + 1.0 < params.alpha {
        return Ok(0.0);
    }
    let (lo, hi) = (-params.alpha, params.alpha - 1.0);
    if !(lo < hi) {
        return Err(Error::NoRootInBracket { lo, hi, f_lo: f64::NAN, f_hi: f64::NAN });
    }
    let h = |b: f64| esscher_gap(params, b, carry);
    let grid = 256;
    let mut prev = h(lo);
    for i in 1..=grid {
        let cur = h(lo + (hi - lo) * i as f64 / grid as f64);
        if !(cur > prev) {
            return Err(Error::DomainError("martingale map is not increasing on the bracket".into()));
        }
        prev = cur;
    }
    let b = brent(h, lo, hi, 1e-15 * params.alpha, 200)?;
    Ok(b - params.beta)
}

/// Risk-neutral NIG parameters by the Esscher transform; `mu`, `alpha` and
/// `delta` are kept and only the skew moves.
pub fn esscher_transform(params: &NigParams, rate: f64, dividend: f64) -> Result<NigParams> {
    let theta = esscher_theta(params, rate, dividend)?;
    if theta == 0.0 {
        return Ok(*params);
    }
    let out = esscher_shift(params, theta)?;
    let gap = LevyModel::nig(out, rate, dividend)?.martingale_gap()?;
    if !(gap.abs() < 1e-10) {
        return Err(Error::ConsistencyFailure(format!("martingale gap {gap:e} after Esscher transform")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::sample_nig_terminal;

    fn parse(text: &str, format: ReturnsFormat, min_rows: Option<usize>) -> Result<ReturnsSeries> {
        parse_returns(text.as_bytes(), format, &LoadOptions { min_rows })
    }

    #[test]
    fn three_prices() {
        let s = parse("2010-01-04,100\n2010-01-05,101\n2010-01-06,100\n", ReturnsFormat::Prices, Some(3)).unwrap();
        assert_eq!(s.values.len(), 2);
        assert_eq!(s.values[0], 1.01f64.ln());
        assert!((s.values[1] + 1.01f64.ln()).abs() < 1e-15);
        assert!(matches!(
            parse("2010-01-04,100\n2010-01-05,101\n2010-01-06,100\n", ReturnsFormat::Prices, None),
            Err(Error::InsufficientData { found: 3, required: 31 })
        ));
    }

    #[test]
    fn header_and_constant_series() {
        let mut text = String::from("date,close\n");
        let start = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        for i in 0..31 {
            text.push_str(&format!("{},1449.4\n", start + chrono::Days::new(i)));
        }
        let s = parse(&text, ReturnsFormat::Prices, None).unwrap();
        assert_eq!(s.rows, 31);
        assert_eq!(s.values, vec![0.0; 30]);
    }

    #[test]
    fn log_returns_pass_through() {
        let text = "2010-01-04,0.01\n2010-01-05,-0.02\n";
        let s = parse(text, ReturnsFormat::LogReturns, Some(2)).unwrap();
        assert_eq!(s.values, vec![0.01, -0.02]);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse("date,close\n2010-01-04,100\n2010-01-05,abc\n", ReturnsFormat::Prices, Some(1)).unwrap_err();
        assert_eq!(e, Error::ParseError { line: 3, message: "invalid number 'abc'".into() });
        let e = parse("2010-01-05,100\n2010-01-04,101\n", ReturnsFormat::Prices, Some(1)).unwrap_err();
        assert!(matches!(e, Error::ParseError { line: 2, .. }));
        let e = parse("2010-01-05,100,7\n", ReturnsFormat::Prices, Some(1)).unwrap_err();
        assert!(matches!(e, Error::ParseError { line: 1, .. }));
        let e = parse("2010-01-05,-1\n", ReturnsFormat::Prices, Some(1)).unwrap_err();
        assert!(matches!(e, Error::ParseError { line: 1, .. }));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = NigParams::new(0.001, 40.0, 0.01, -8.0).unwrap();
        let xs = sample_nig_terminal(&p, 1.0, 2000, 1).unwrap();
        let (m, var, _, _) = moments(&xs);
        let sd = var.sqrt();
        let u: Vec<f64> = xs.iter().map(|x| (x - m) / sd).collect();
        let th = Vector4::new(0.1, 0.2, -0.3, -0.4);
        let (_, g) = objective(&th, &u);
        for j in 0..4 {
            let h = 1e-6;
            let mut a = th;
            let mut b = th;
            a[j] += h;
            b[j] -= h;
            let fd = (objective(&a, &u).0 - objective(&b, &u).0) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "component {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn coordinates_round_trip() {
        let p = NigParams::new(0.0018, 49.99, 0.0085, -9.22).unwrap();
        let q = from_theta(&to_theta(&p, 0.0002, 0.013), 0.0002, 0.013);
        for (a, b) in [(p.mu, q.mu), (p.alpha, q.alpha), (p.delta, q.delta), (p.beta, q.beta)] {
            assert!((a - b).abs() <= 1e-13 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn method_of_moments_is_close() {
        let p = NigParams::new(0.001, 40.0, 0.01, -8.0).unwrap();
        let xs = sample_nig_terminal(&p, 1.0, 200_000, 3).unwrap();
        let q = method_of_moments(&xs).unwrap();
        assert!((q.alpha / p.alpha - 1.0).abs() < 0.5, "{q:?}");
        assert!(q.beta < 0.0);
    }

    #[test]
    fn fit_trace_is_monotone() {
        let p = NigParams::new(0.0, 20.0, 0.02, 3.0).unwrap();
        let xs = sample_nig_terminal(&p, 1.0, 5_000, 8).unwrap();
        let rep = fit_nig_mle(&xs, None).unwrap();
        assert!(rep.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(rep.grad_norm < 1e-6);
        assert!(rep.std_errors.is_some());
    }

    #[test]
    fn esscher_paper_inputs() {
        let p = NigParams::new(0.0018, 49.99, 0.0085, -9.22).unwrap();
        let q = esscher_transform(&p, 0.0012, 0.0).unwrap();
        let gap = LevyModel::nig(q, 0.0012, 0.0).unwrap().martingale_gap().unwrap();
        assert!(gap.abs() < 1e-10);
        assert_eq!((q.mu, q.alpha, q.delta), (p.mu, p.alpha, p.delta));
        // The root sits near -4.02 for these rounded inputs.
        assert!((q.beta + 4.0198).abs() < 1e-3, "{}", q.beta);
    }

    #[test]
    fn esscher_identity_and_idempotence() {
        let p = NigParams::new(0.0, 30.0, 0.2, 1.0).unwrap();
        let m = LevyModel::nig_martingale(p, 0.02, 0.0).unwrap();
        let q = *m.nig_params().unwrap();
        assert_eq!(esscher_transform(&q, 0.02, 0.0).unwrap(), q);
        let once = esscher_transform(&p, 0.05, 0.01).unwrap();
        assert_eq!(esscher_transform(&once, 0.05, 0.01).unwrap(), once);
    }

    #[test]
    fn esscher_without_root() {
        let p = NigParams::new(0.0, 30.0, 0.001, 1.0).unwrap();
        assert!(matches!(esscher_transform(&p, 5.0, 0.0), Err(Error::NoRootInBracket { .. })));
    }
}
