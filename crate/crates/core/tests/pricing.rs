use levy_barrier::black_scholes;
use levy_barrier::fourier::{
    atm_implied_vol, price_asset_or_nothing_fourier, price_call_lewis, price_digital_call_fourier, ContourSpec,
    MarketSpec,
};
use levy_barrier::levy::LevyModel;
use levy_barrier::nig::NigParams;
use levy_barrier::shortcut::{
    digital_grid, digital_symmetric, digital_symmetric_with_sigma, sensitivities, write_grid_csv, DigitalSide,
    GridSource, GridSpec,
};

const CASES: [(f64, f64, f64); 10] = [
    (80.0, 0.1, 0.25),
    (90.0, 0.2, 0.5),
    (100.0, 0.2741, 1.0),
    (110.0, 0.3, 2.0),
    (120.0, 0.15, 1.5),
    (70.0, 0.5, 0.75),
    (130.0, 0.4, 3.0),
    (100.0, 0.05, 0.1),
    (95.0, 0.8, 1.0),
    (105.0, 0.25, 5.0),
];

#[test]
fn diffusion_matches_closed_forms() {
    let (s, r) = (100.0, 0.0012);
    for (k, sigma, t) in CASES {
        let m = LevyModel::black_scholes(sigma, r, 0.0).unwrap();
        let mk = MarketSpec::new(s, r, 0.0, t, sigma).unwrap();
        let c = ContourSpec::default();
        let call = price_call_lewis(&m, &mk, k, &c).unwrap().value;
        let bs = black_scholes::call_price(s, k, r, 0.0, sigma, t);
        assert!(((call - bs) / bs).abs() < 1e-6, "call {k} {sigma} {t}: {call} vs {bs}");
        let x = mk.log_moneyness(k);
        let dig = price_digital_call_fourier(&m, &mk, x, &c).unwrap().value;
        let want = black_scholes::digital_call(x, r, sigma, t);
        assert!((dig - want).abs() < 1e-8, "digital {k} {sigma} {t}: {dig} vs {want}");
        let aon = price_asset_or_nothing_fourier(&m, &mk, k, &c).unwrap().value;
        let want = black_scholes::asset_or_nothing_call(s, k, r, 0.0, sigma, t);
        assert!((aon - want).abs() < 1e-8 * s, "aon {k} {sigma} {t}: {aon} vs {want}");
    }
}

#[test]
fn symmetric_nig_shortcut_consistency() {
    let p = NigParams::new(0.0018, 49.99, 0.0085, -4.18).unwrap();
    let m = LevyModel::nig(p, 0.0012, 0.0).unwrap().symmetrized().unwrap();
    let mk = MarketSpec::new(1.0, 0.0012, 0.0, 1.0, 0.2741).unwrap();
    let vol = atm_implied_vol(&m, &mk).unwrap();
    let fourier = price_digital_call_fourier(&m, &mk, 0.0, &ContourSpec::default()).unwrap().value;
    let shortcut = digital_symmetric_with_sigma(&mk, vol, DigitalSide::Call).unwrap().value;
    assert!((fourier - shortcut).abs() < 1e-3, "{fourier} vs {shortcut}");
}

#[test]
fn sensitivities_agree_with_differences() {
    let p = NigParams::new(0.0, 49.99, 0.0085 * 252.0, -0.5).unwrap();
    let m = LevyModel::nig_martingale(p, 0.0012, 0.0).unwrap();
    let mk = MarketSpec::new(1.0, 0.0012, 0.0, 1.0, 0.2741).unwrap();
    let s = sensitivities(&m, &mk, &ContourSpec::default()).unwrap();
    assert!(((s.i_beta - s.i_beta_fd) / s.i_beta_fd).abs() < 1e-3);
    assert!(((s.i_x - s.i_x_fd) / s.i_x_fd).abs() < 1e-3);
    assert!(s.i_x < 0.0);
}

#[test]
fn grid_csv_round_trip() {
    let mk = MarketSpec::new(1.0, 0.0012, 0.0, 1.0, 0.2741).unwrap();
    let p = NigParams::new(0.0, 49.99, 0.0085 * 252.0, -0.5).unwrap();
    let m = LevyModel::nig_martingale(p, 0.0012, 0.0).unwrap();
    let base = digital_symmetric(&mk, DigitalSide::Call).unwrap();
    let spec = GridSpec { points: 5, source: GridSource::Exact, ..GridSpec::default() };
    let pts = digital_grid(&m, &mk, &base, &spec, &ContourSpec::default()).unwrap();
    assert_eq!(pts.len(), 25);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    write_grid_csv(&pts, std::fs::File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,x,price"));
    for (line, pt) in lines.zip(&pts) {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(v, vec![pt.beta, pt.x, pt.price]);
    }
}
