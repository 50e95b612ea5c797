use levy_barrier::calibration::{fit_nig_mle, FitWarning};
use levy_barrier::mc::sample_nig_terminal;
use levy_barrier::nig::{nig_density, nig_mean_variance, NigParams};
use levy_barrier::quadrature::{integrate_real, AdaptiveOptions};

fn within_three_se(truth: &NigParams, seed: u64) -> Result<(), String> {
    let xs = sample_nig_terminal(truth, 1.0, 50_000, seed).unwrap();
    let rep = fit_nig_mle(&xs, None).map_err(|e| e.to_string())?;
    let se = rep.std_errors.ok_or("no standard errors")?;
    let p = rep.params;
    let checks = [
        ("mu", p.mu, truth.mu, se.mu),
        ("alpha", p.alpha, truth.alpha, se.alpha),
        ("delta", p.delta, truth.delta, se.delta),
        ("beta", p.beta, truth.beta, se.beta),
    ];
    for (name, got, want, s) in checks {
        if (got - want).abs() > 3.0 * s {
            return Err(format!("{name}: {got} vs {want} (se {s})"));
        }
    }
    if rep.trace.windows(2).any(|w| w[1] < w[0]) {
        return Err("log-likelihood decreased".into());
    }
    Ok(())
}

#[test]
fn recovers_generating_parameters() {
    let truth = NigParams::new(0.001, 40.0, 0.01, -8.0).unwrap();
    within_three_se(&truth, 2024).unwrap();
}

#[test]
fn refit_on_fitted_law() {
    let truth = NigParams::new(0.001, 40.0, 0.01, -8.0).unwrap();
    let xs = sample_nig_terminal(&truth, 1.0, 50_000, 99).unwrap();
    let fitted = fit_nig_mle(&xs, None).unwrap().params;
    within_three_se(&fitted, 100).unwrap();
}

#[test]
fn near_gaussian_sample() {
    let sigma: f64 = 0.01;
    let alpha = 500.0;
    let truth = NigParams::new(0.0, alpha, alpha * sigma * sigma, 0.0).unwrap();
    let xs = sample_nig_terminal(&truth, 1.0, 50_000, 5).unwrap();
    let rep = fit_nig_mle(&xs, None).unwrap();
    let p = rep.params;
    let boundary = rep.warnings.iter().any(|w| matches!(w, FitWarning::GaussianLimit { .. } | FitWarning::NearBoundary { .. }));
    assert!(boundary || p.alpha > 100.0, "{rep:?}");

    // KL(fitted NIG || Gaussian fit to the same sample).
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let (mean, var) = nig_mean_variance(&p, 1.0).unwrap();
    let sd = var.sqrt();
    let log_gauss = |x: f64| -0.5 * (x - m) * (x - m) / v - 0.5 * (2.0 * std::f64::consts::PI * v).ln();
    let (kl, _, _) = integrate_real(
        |x| {
            let f = nig_density(&p, x, 1.0).unwrap();
            if f > 0.0 { f * (f.ln() - log_gauss(x)) } else { 0.0 }
        },
        mean - 30.0 * sd,
        mean + 30.0 * sd,
        &AdaptiveOptions::default(),
    );
    assert!(kl < 1e-3, "KL {kl}");
}
