mod config;
mod output;
mod reference;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{load_market, load_model_file, MarketFile};
use levy_barrier::calibration::{esscher_theta, esscher_transform, fit_nig_mle, load_returns_with, LoadOptions, ReturnsFormat};
use levy_barrier::error::Error;
use levy_barrier::fourier::{
    price_asset_or_nothing_fourier, price_digital_call_fourier, price_digital_put_fourier, ContourSpec, MarketSpec,
    PriceResult, Side,
};
use levy_barrier::levy::{LevyModel, MARTINGALE_TOL, SYMMETRY_TOL};
use levy_barrier::mc::verify_conjugation;
use levy_barrier::power::{price_down_and_in_power, Payoff, PowerMode};
use levy_barrier::shortcut::{
    approx_digital, asset_or_nothing_symmetric, digital_grid, digital_symmetric, sensitivities, write_grid_csv,
    ApproxConfig, DigitalSide, GridSource, GridSpec,
};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Input problems exit with 2, numerical failures with 3.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_)
            | Error::ParseError { .. }
            | Error::InsufficientData { .. }
            | Error::EmptySample
            | Error::ParameterError(_)
            | Error::UnsupportedVariant(_)
            | Error::DomainError(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "levy-barrier", version, about = "Digital and power barrier pricing under exponential Levy models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit NIG by maximum likelihood and move it to the risk-neutral measure.
    Calibrate(CalibrateArgs),
    #[command(subcommand)]
    /// Digital, asset-or-nothing and power down-and-in prices.
    Price(PriceCommand),
    /// I_beta and I_x at the symmetric point of the model's family.
    Sensitivities(ModelMarket),
    /// Digital call prices on a (beta, x) grid, written as CSV.
    Grid(GridArgs),
    #[command(subcommand)]
    /// Monte Carlo and exact checks of model identities (exit 3 on failure).
    Verify(VerifyCommand),
    /// Recompute the bundled S&P500 reference numbers and compare.
    ReproducePaper {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Prices,
    Logreturns,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    returns: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 0.0)]
    dividend: f64,
    /// Minimum number of data rows (defaults: 31 prices, 30 log-returns).
    #[arg(long)]
    min_rows: Option<usize>,
}

#[derive(Args)]
struct ModelMarket {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    market: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Call,
    Put,
}

#[derive(Subcommand)]
enum PriceCommand {
    Digital(DigitalArgs),
    AssetOrNothing(AonArgs),
    PowerDownIn(PowerArgs),
}

#[derive(Args)]
#[group(id = "method", multiple = false)]
struct MethodFlags {
    /// Fourier price under the model.
    #[arg(long, group = "method")]
    exact: bool,
    /// Closed form under symmetry at the market's ATM volatility (default).
    #[arg(long, group = "method")]
    shortcut: bool,
    /// First-order expansion around the symmetric ATM point.
    #[arg(long, group = "method")]
    approx: bool,
}

#[derive(Args)]
struct DigitalArgs {
    #[arg(long, value_enum)]
    side: SideArg,
    #[command(flatten)]
    method: MethodFlags,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    market: PathBuf,
    /// Log-moneyness ln(K / F).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x: f64,
}

#[derive(Args)]
struct AonArgs {
    #[arg(long)]
    market: PathBuf,
    /// Fourier price under this model at K = F instead of the closed form.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    market: PathBuf,
    /// Report the Fourier value instead of the shortcut reproduction.
    #[arg(long)]
    rigorous: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    market: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    eps_beta: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_x: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 21)]
    points: usize,
    /// Fourier prices at every node instead of the first-order expansion.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Needed for conjugation; defaults to spot 1, maturity 1 in the model's unit.
    #[arg(long)]
    market: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum VerifyCommand {
    Conjugation(VerifyArgs),
    Martingale(VerifyArgs),
    Symmetry(VerifyArgs),
}

fn contour() -> ContourSpec {
    ContourSpec::default()
}

fn model_and_market(model: &Path, market: &Path) -> Result<(LevyModel, MarketFile), CliError> {
    let mk = load_market(market)?;
    let m = load_model_file(model)?.build(Some(&mk))?;
    Ok((m, mk))
}

fn price_json(r: &PriceResult) -> Value {
    output::to_value(r)
}

fn calibrate(a: &CalibrateArgs) -> Result<(Value, bool), CliError> {
    let format = match a.mode {
        Mode::Prices => ReturnsFormat::Prices,
        Mode::Logreturns => ReturnsFormat::LogReturns,
    };
    let series = load_returns_with(&a.returns, format, &LoadOptions { min_rows: a.min_rows })?;
    let fit = fit_nig_mle(&series.values, None)?;
    let theta = esscher_theta(&fit.params, a.rate, a.dividend)?;
    let rn = esscher_transform(&fit.params, a.rate, a.dividend)?;
    let gap = LevyModel::nig(rn, a.rate, a.dividend)?.martingale_gap()?;
    Ok((
        json!({
            "observations": series.values.len(),
            "physical": output::to_value(&fit.params),
            "log_likelihood": fit.log_likelihood,
            "grad_norm": fit.grad_norm,
            "iterations": fit.iterations,
            "std_errors": output::to_value(&fit.std_errors),
            "warnings": output::to_value(&fit.warnings),
            "esscher_theta": theta,
            "risk_neutral": output::to_value(&rn),
            "martingale_gap": gap,
        }),
        true,
    ))
}

fn price_digital(a: &DigitalArgs) -> Result<(Value, bool), CliError> {
    let mk = load_market(&a.market)?;
    let side = match a.side {
        SideArg::Call => DigitalSide::Call,
        SideArg::Put => DigitalSide::Put,
    };
    let need_model = || -> Result<LevyModel, CliError> {
        let path = a.model.as_ref().ok_or_else(|| CliError::Input("--model is required here".into()))?;
        load_model_file(path)?.build(Some(&mk))
    };
    let r = if a.method.exact {
        let m = need_model()?;
        match side {
            DigitalSide::Call => price_digital_call_fourier(&m, &mk.spec, a.x, &contour())?,
            DigitalSide::Put => price_digital_put_fourier(&m, &mk.spec, a.x, &contour())?,
        }
    } else if a.method.approx {
        let m = need_model()?;
        let sym = m.symmetrized()?;
        let base = digital_symmetric(&mk.spec, side)?;
        let mut sens = sensitivities(&sym, &mk.spec, &contour())?;
        if side == DigitalSide::Put {
            sens = sens.put_side();
        }
        approx_digital(&base, &sens, m.symmetry_beta(), a.x, &ApproxConfig::default())
    } else {
        if a.x != 0.0 {
            return Err(CliError::Input("the shortcut prices the ATM-forward digital only (x = 0)".into()));
        }
        digital_symmetric(&mk.spec, side)?
    };
    Ok((price_json(&r), true))
}

fn price_aon(a: &AonArgs) -> Result<(Value, bool), CliError> {
    let mk = load_market(&a.market)?;
    let r = match &a.model {
        Some(path) => {
            let m = load_model_file(path)?.build(Some(&mk))?;
            price_asset_or_nothing_fourier(&m, &mk.spec, mk.spec.forward(), &contour())?
        }
        None => asset_or_nothing_symmetric(&mk.spec)?,
    };
    Ok((price_json(&r), true))
}

fn price_power(a: &PowerArgs) -> Result<(Value, bool), CliError> {
    let (m, mk) = model_and_market(&a.model, &a.market)?;
    let mode = if a.rigorous { PowerMode::Rigorous } else { PowerMode::Reproduction };
    let r = price_down_and_in_power(&m, &mk.spec, mode, &contour())?;
    Ok((price_json(&r), true))
}

fn run_sensitivities(a: &ModelMarket) -> Result<(Value, bool), CliError> {
    let (m, mk) = model_and_market(&a.model, &a.market)?;
    let s = sensitivities(&m.symmetrized()?, &mk.spec, &contour())?;
    let put = s.put_side();
    Ok((
        json!({
            "i_beta": s.i_beta,
            "i_x": s.i_x,
            "i_beta_fd": s.i_beta_fd,
            "i_x_fd": s.i_x_fd,
            "put": { "i_beta": put.i_beta, "i_x": put.i_x },
            "discount": s.discount,
            "diagnostics": output::to_value(&s.diagnostics),
        }),
        true,
    ))
}

fn grid(a: &GridArgs) -> Result<(Value, bool), CliError> {
    let (m, mk) = model_and_market(&a.model, &a.market)?;
    let sym = m.symmetrized()?;
    let base = digital_symmetric(&mk.spec, DigitalSide::Call)?;
    let spec = GridSpec {
        eps_beta: a.eps_beta,
        eps_x: a.eps_x,
        points: a.points,
        source: if a.exact { GridSource::Exact } else { GridSource::Approx },
        ..GridSpec::default()
    };
    let pts = digital_grid(&sym, &mk.spec, &base, &spec, &contour())?;
    let file = std::fs::File::create(&a.out).map_err(|e| CliError::Input(format!("{}: {e}", a.out.display())))?;
    write_grid_csv(&pts, std::io::BufWriter::new(file))
        .map_err(|e| CliError::Input(format!("{}: {e}", a.out.display())))?;
    Ok((
        json!({
            "out": a.out.display().to_string(),
            "points": pts.len(),
            "source": output::to_value(&spec.source),
        }),
        true,
    ))
}

fn verify(cmd: &VerifyCommand) -> Result<(Value, bool), CliError> {
    let (VerifyCommand::Conjugation(a) | VerifyCommand::Martingale(a) | VerifyCommand::Symmetry(a)) = cmd;
    let file = load_model_file(&a.model)?;
    let market = a.market.as_deref().map(load_market).transpose()?;
    let m = file.build(market.as_ref())?;
    match cmd {
        VerifyCommand::Conjugation(_) => {
            let mk = match &market {
                Some(mk) => mk.spec,
                None => MarketSpec::new(1.0, m.rate(), m.dividend(), 1.0, 0.0)?,
            };
            let payoff = Payoff::digital(mk.spot, Side::Above);
            let rep = verify_conjugation(&m, &mk, &payoff, a.n, a.seed)?;
            Ok((output::to_value(&rep), rep.pass))
        }
        VerifyCommand::Martingale(_) => {
            let gap = m.martingale_gap()?;
            let pass = gap.abs() <= MARTINGALE_TOL;
            Ok((json!({ "martingale_gap": gap, "tolerance": MARTINGALE_TOL, "pass": pass }), pass))
        }
        VerifyCommand::Symmetry(_) => {
            let beta = m.symmetry_beta();
            let pass = m.is_symmetric(SYMMETRY_TOL);
            Ok((json!({ "beta": beta, "tolerance": SYMMETRY_TOL, "pass": pass }), pass))
        }
    }
}

fn reproduce(json_out: bool) -> Result<(Option<Value>, String), CliError> {
    let rows = reference::rows()?;
    if json_out {
        Ok((Some(output::to_value(&rows)), String::new()))
    } else {
        Ok((None, reference::table(&rows)))
    }
}

fn dispatch(cli: &Cli) -> Result<(String, bool), CliError> {
    let (v, ok) = match &cli.command {
        Command::Calibrate(a) => calibrate(a)?,
        Command::Price(PriceCommand::Digital(a)) => price_digital(a)?,
        Command::Price(PriceCommand::AssetOrNothing(a)) => price_aon(a)?,
        Command::Price(PriceCommand::PowerDownIn(a)) => price_power(a)?,
        Command::Sensitivities(a) => run_sensitivities(a)?,
        Command::Grid(a) => grid(a)?,
        Command::Verify(c) => verify(c)?,
        Command::ReproducePaper { json } => {
            return match reproduce(*json)? {
                (Some(v), _) => Ok((output::render(v) + "\n", true)),
                (None, text) => Ok((text, true)),
            };
        }
    };
    Ok((output::render(v) + "\n", ok))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok((text, ok)) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            if ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification failed");
                ExitCode::from(3)
            }
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
