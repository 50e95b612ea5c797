//! Reproduction of the published S&P500 reference numbers from the bundled
//! parameter file.

use crate::CliError;
use levy_barrier::calibration::esscher_transform;
use levy_barrier::fourier::{ContourSpec, MarketSpec};
use levy_barrier::levy::LevyModel;
use levy_barrier::nig::NigParams;
use levy_barrier::power::{price_down_and_in_power, PowerMode};
use levy_barrier::shortcut::{digital_symmetric, sensitivities, DigitalSide};
use serde::{Deserialize, Serialize};

const BUNDLED: &str = include_str!("../data/sp500_2011.json");

#[derive(Debug, Deserialize)]
struct Published {
    digital_call: f64,
    digital_put: f64,
    risk_neutral_beta: f64,
    i_beta: f64,
    i_x: f64,
    power_down_in: f64,
}

#[derive(Debug, Deserialize)]
struct Reference {
    physical: NigParams,
    risk_neutral: NigParams,
    rate: f64,
    dividend: f64,
    maturity: f64,
    sigma_atm: f64,
    published: Published,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub name: &'static str,
    pub computed: f64,
    pub published: f64,
    pub tolerance: f64,
    /// `abs` or `rel`.
    pub tolerance_kind: &'static str,
    pub status: &'static str,
    pub note: String,
}

fn row(name: &'static str, computed: f64, published: f64, tol: f64, relative: bool, note: impl Into<String>) -> Row {
    let err = if relative { ((computed - published) / published).abs() } else { (computed - published).abs() };
    Row {
        name,
        computed,
        published,
        tolerance: tol,
        tolerance_kind: if relative { "rel" } else { "abs" },
        status: if err <= tol { "match" } else { "differs" },
        note: note.into(),
    }
}

pub fn rows() -> Result<Vec<Row>, CliError> {
    let r: Reference = serde_json::from_str(BUNDLED).map_err(|e| CliError::Input(format!("bundled data: {e}")))?;
    let p = &r.published;
    let market = MarketSpec::new(1.0, r.rate, r.dividend, r.maturity, r.sigma_atm)?;
    let c = ContourSpec::default();

    let f0 = digital_symmetric(&market, DigitalSide::Call)?.value;
    let g0 = digital_symmetric(&market, DigitalSide::Put)?.value;
    let rn = esscher_transform(&r.physical, r.rate, r.dividend)?;
    let sym = LevyModel::nig_martingale(NigParams { beta: -0.5, ..r.risk_neutral }, r.rate, r.dividend)?;
    let sens = sensitivities(&sym, &market, &c)?;
    let model = LevyModel::nig(r.risk_neutral, r.rate, r.dividend)?;
    let power = price_down_and_in_power(&model, &market, PowerMode::Reproduction, &c)?;

    Ok(vec![
        row("f0", f0, p.digital_call, 5e-5, false, "normal argument -sigma/2 is not rounded"),
        row("g0", g0, p.digital_put, 5e-5, false, "normal argument -sigma/2 is not rounded"),
        row("beta*", rn.beta, p.risk_neutral_beta, 0.01, false, "Esscher root of the rounded physical fit"),
        row("I_beta", sens.i_beta.abs(), p.i_beta, 0.05, true, "magnitude; per time unit, martingale drift"),
        row("I_x", sens.i_x.abs(), p.i_x, 0.05, true, "magnitude; per time unit, minus the discounted density"),
        row(
            "power",
            power.value,
            p.power_down_in,
            1e-4,
            false,
            format!("shortcut call times e^({} * {})", -2.0 * r.risk_neutral.beta, r.risk_neutral.mu),
        ),
    ])
}

pub fn table(rows: &[Row]) -> String {
    let mut out = format!(
        "{:<8} {:>20} {:>12} {:>10} {:<8}  {}\n",
        "quantity", "computed", "published", "tolerance", "status", "note"
    );
    for r in rows {
        let tol = format!("{}{}", r.tolerance, if r.tolerance_kind == "rel" { " rel" } else { "" });
        out.push_str(&format!(
            "{:<8} {:>20.12} {:>12} {:>10} {:<8}  {}\n",
            r.name, r.computed, r.published, tol, r.status, r.note
        ));
    }
    out
}
