//! Model and market files.
//!
//! Both carry an explicit `time_unit`. Model parameters are per model time
//! unit; when it differs from the market's, `annualization_factor` (market unit
//! over model unit, e.g. 252 for daily parameters and yearly maturities) is
//! required and the parameters are rescaled before use.

use crate::CliError;
use levy_barrier::fourier::MarketSpec;
use levy_barrier::levy::LevyModel;
use levy_barrier::nig::NigParams;
use serde::Deserialize;
use serde_json::Value;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Day,
    Week,
    Month,
    Year,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Nig,
    BlackScholes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    #[default]
    Given,
    Martingale,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub params: Value,
    pub rate: f64,
    #[serde(default)]
    pub dividend: f64,
    pub time_unit: TimeUnit,
    #[serde(default)]
    pub annualization_factor: Option<f64>,
    #[serde(default)]
    pub drift: Drift,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SigmaParams {
    sigma: f64,
}

// Not `#[serde(flatten)]`: flattening buffers numbers as maps under
// serde_json's arbitrary_precision and then fails to read them as f64.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    spot: f64,
    rate: f64,
    #[serde(default)]
    dividend: f64,
    maturity: f64,
    sigma_atm: f64,
    time_unit: TimeUnit,
}

#[derive(Debug, Clone)]
pub struct MarketFile {
    pub spec: MarketSpec,
    pub time_unit: TimeUnit,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_market(path: &Path) -> Result<MarketFile, CliError> {
    let m: RawMarket = read_json(path)?;
    let spec = MarketSpec::new(m.spot, m.rate, m.dividend, m.maturity, m.sigma_atm)?;
    Ok(MarketFile { spec, time_unit: m.time_unit })
}

pub fn load_model_file(path: &Path) -> Result<ModelFile, CliError> {
    read_json(path)
}

impl ModelFile {
    /// Factor taking model-unit parameters to `unit`; `None` means no rescaling.
    fn factor_for(&self, unit: Option<TimeUnit>) -> Result<Option<f64>, CliError> {
        let differs = unit.is_some_and(|u| u != self.time_unit);
        match (differs, self.annualization_factor) {
            (true, None) => Err(CliError::Input(format!(
                "model time unit {:?} differs from market time unit {:?}; set annualization_factor",
                self.time_unit,
                unit.expect("checked")
            ))),
            (true, Some(f)) if !(f > 0.0 && f.is_finite()) => {
                Err(CliError::Input(format!("annualization_factor must be > 0, got {f}")))
            }
            (true, Some(f)) => Ok(Some(f)),
            (false, Some(f)) if f != 1.0 && unit.is_some() => Err(CliError::Input(format!(
                "annualization_factor {f} given but model and market share the time unit {:?}",
                self.time_unit
            ))),
            _ => Ok(None),
        }
    }

    /// Model in the market's time unit (or its own unit when no market is given).
    pub fn build(&self, market: Option<&MarketFile>) -> Result<LevyModel, CliError> {
        if let Some(m) = market {
            if m.spec.rate != self.rate || m.spec.dividend != self.dividend {
                return Err(CliError::Input(format!(
                    "model rate/dividend ({}, {}) differ from market ({}, {})",
                    self.rate, self.dividend, m.spec.rate, m.spec.dividend
                )));
            }
        }
        let factor = self.factor_for(market.map(|m| m.time_unit))?;
        let bad = |e: serde_json::Error| CliError::Input(format!("model params: {e}"));
        Ok(match self.kind {
            ModelKind::Nig => {
                let mut p: NigParams = serde_json::from_value(self.params.clone()).map_err(bad)?;
                p.validate()?;
                if let Some(f) = factor {
                    p = p.annualized(f)?;
                }
                match self.drift {
                    Drift::Given => LevyModel::nig(p, self.rate, self.dividend)?,
                    Drift::Martingale => LevyModel::nig_martingale(p, self.rate, self.dividend)?,
                }
            }
            ModelKind::BlackScholes => {
                let s: SigmaParams = serde_json::from_value(self.params.clone()).map_err(bad)?;
                let sigma = s.sigma * factor.unwrap_or(1.0).sqrt();
                LevyModel::black_scholes(sigma, self.rate, self.dividend)?
            }
        })
    }
}
