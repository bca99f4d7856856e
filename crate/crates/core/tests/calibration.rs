use multicurve::affine::{shifted_caplet_price_fourier, AffineModelSpec, Caplet, YDynamics};
use multicurve::calibration::*;
use multicurve::termstructure::{CurveSet, DiscountCurve, SpreadCurve, Tenor};
use multicurve::Error;
use proptest::prelude::*;

fn toy(sr: f64, sy: f64, cross: f64) -> AffineModelSpec {
    AffineModelSpec {
        y: YDynamics::Diffusive {
            drift: vec![0.0005],
            loading: vec![vec![0.0]],
            cov: vec![vec![sy * sy]],
            cross: vec![vec![cross]],
        },
        u: vec![vec![1.0], vec![2.0]],
        tenors: vec![0.25, 0.5],
        y0: vec![0.001],
        ..AffineModelSpec::vasicek(0.5, 0.03, sr, 0.02)
    }
}

fn market() -> CurveSet {
    CurveSet {
        discount: DiscountCurve::flat(0.025, &[1.0, 30.0]).unwrap(),
        spreads: vec![
            SpreadCurve::flat(Tenor::new(0.25).unwrap(), 1.001, 30.0).unwrap(),
            SpreadCurve::flat(Tenor::new(0.5).unwrap(), 1.003, 30.0).unwrap(),
        ],
    }
}

fn free(path: &str, transform: Transform) -> FreeParameter {
    FreeParameter { path: path.parse().unwrap(), transform, initial: None }
}

#[test]
fn black_limits_and_atm_value() {
    let (f, a) = (0.03, 0.245);
    for k in [0.02, 0.03, 0.04] {
        assert_eq!(black_caplet(f, k, 2.0, 0.0, a).unwrap(), a * (f - k).max(0.0));
        let p = black_caplet(f, k, 2.0, 1e-14, a).unwrap();
        assert!((p - a * (f - k).max(0.0)).abs() <= 1e-15);
    }
    // vol sqrt(T) = 0.2; Phi(0.1) = 0.539827837277029 from tables
    let atm = black_caplet(f, f, 4.0, 0.1, a).unwrap();
    assert!((atm - a * f * (2.0 * 0.539_827_837_277_029 - 1.0)).abs() <= 1e-15);
    assert!(
        (black_caplet_displaced(-0.001, 0.0, 1.0, 0.2, 1.0, 0.01).unwrap()
            - black_caplet(0.009, 0.01, 1.0, 0.2, 1.0).unwrap())
        .abs()
            <= 1e-16
    );
}

#[test]
fn implied_vol_rejects_prices_outside_the_bounds() {
    let (f, k, a) = (0.03, 0.02, 0.5);
    for price in [a * f, a * f * 1.1, a * (f - k) * 0.9, -1.0, f64::NAN] {
        assert!(matches!(black_implied_vol(price, f, k, 1.0, a), Err(Error::PriceOutOfBounds { .. })), "{price}");
    }
    assert_eq!(black_implied_vol(a * (f - k), f, k, 1.0, a).unwrap(), 0.0);
    assert!(black_caplet(-0.01, 0.02, 1.0, 0.2, 1.0).is_err());
}

proptest! {
    #[test]
    fn implied_vol_inverts_black(vol in 0.01f64..1.0, t in 0.1f64..10.0, m in -2.5f64..2.5, f in 0.001f64..0.1) {
        let k = f * (m * vol * t.sqrt()).exp();
        let price = black_caplet(f, k, t, vol, 0.9).unwrap();
        let iv = black_implied_vol(price, f, k, t, 0.9).unwrap();
        prop_assert!((iv - vol).abs() <= 1e-10, "{iv} vs {vol}");
    }

    #[test]
    fn transforms_round_trip(z in -10f64..10.0) {
        for t in [Transform::Free, Transform::Positive, Transform::Interval { lower: -1.0, upper: 3.0 }] {
            let p = t.to_model(z);
            if t == Transform::Positive {
                prop_assert!(p > 0.0);
            }
            prop_assert!((t.to_unconstrained(p).unwrap() - z).abs() <= 1e-9 * (1.0 + z.abs()));
        }
    }
}

#[test]
fn parameter_paths_address_model_scalars() {
    let spec = toy(0.01, 0.004, -1.2e-5);
    let get = |p: &str| p.parse::<ParamPath>().unwrap().get(&spec).unwrap();
    assert_eq!(get("x.a[0][0]"), 1e-4);
    assert_eq!(get("y.cross[0][0]"), -1.2e-5);
    assert_eq!(get("u[1][0]"), 2.0);
    assert_eq!(get("rate.lambda[0]"), 1.0);

    let mut two = AffineModelSpec::vasicek(0.5, 0.03, 0.01, 0.02);
    two.state.real_dims = 2;
    two.x.b = vec![0.0, 0.0];
    two.x.beta = vec![vec![-0.5, 0.0], vec![0.0, -0.1]];
    two.x.a = vec![vec![1e-4, 0.0], vec![0.0, 1e-4]];
    two.rate.lambda = vec![1.0, 1.0];
    two.x0 = vec![0.01, 0.01];
    let sym = "x.a[0][1]".parse::<ParamPath>().unwrap().set(&two, 3e-5).unwrap();
    assert_eq!(sym.x.a, vec![vec![1e-4, 3e-5], vec![3e-5, 1e-4]]);
    let plain = "x.beta[0][1]".parse::<ParamPath>().unwrap().set(&two, 0.2).unwrap();
    assert_eq!(plain.x.beta, vec![vec![-0.5, 0.2], vec![0.0, -0.1]]);

    for bad in ["x.a[0][5]", "x.nothing", "y.q0[0]", "x.a", "x..a", "x.a[0", "x.a[-1][0]"] {
        let r = bad.parse::<ParamPath>().and_then(|p| p.set(&spec, 1.0));
        assert!(r.is_err(), "{bad}");
    }
    let json = serde_json::to_string(&free("x.a[0][0]", Transform::Positive)).unwrap();
    assert_eq!(serde_json::from_str::<FreeParameter>(&json).unwrap(), free("x.a[0][0]", Transform::Positive));
}

#[test]
fn nelder_mead_finds_the_rosenbrock_minimum() {
    let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let opts = NelderMeadOptions { max_iterations: 5000, x_tol: 1e-10, f_tol: 1e-20, ..Default::default() };
    let m = nelder_mead(&rosen, &[-1.2, 1.0], &opts);
    assert!(m.converged);
    assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(m.trace.last().copied(), Some(m.f));
    assert_eq!(nelder_mead(&rosen, &[-1.2, 1.0], &opts), m);
}

#[test]
fn nelder_mead_steps_around_undefined_regions() {
    let f = |x: &[f64]| if x[0] > 0.0 { (x[0] - 2.0).powi(2) } else { f64::NAN };
    let m = nelder_mead(&f, &[0.1], &NelderMeadOptions { initial_step: -0.5, ..Default::default() });
    assert!((m.x[0] - 2.0).abs() < 1e-7, "{:?}", m.x);
}

fn strip() -> Vec<Caplet> {
    let mut out = vec![];
    for tenor in [0.25, 0.5] {
        for expiry in [1.0, 2.0] {
            for strike in [0.02, 0.027, 0.035] {
                out.push(Caplet { expiry, tenor, strike });
            }
        }
    }
    out
}

#[test]
fn zero_free_parameters_report_the_template() {
    let (spec, m, opts) = (toy(0.01, 0.004, -1.2e-5), market(), CalibrationOptions::default());
    let mut surface = synthesize_surface(&spec, &m, &strip()[..3], QuoteConvention::Vol, &opts.fourier).unwrap();
    surface.entries[1].value += 0.01;
    let r = calibrate(&spec, &[], &surface, &m, &opts).unwrap();
    assert_eq!(r.spec, spec);
    assert!(r.parameters.is_empty());
    assert!(r.residuals[0].abs() < 1e-10 && (r.residuals[1] + 0.01).abs() < 1e-10);
    assert!((r.objective - r.residuals.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-18);
}

#[test]
fn single_quote_fits_like_a_root_find() {
    let (m, opts) = (market(), CalibrationOptions::default());
    let quote = Caplet { expiry: 1.0, tenor: 0.25, strike: 0.027 };
    let surface =
        synthesize_surface(&toy(0.01, 0.006, -1.2e-5), &m, &[quote], QuoteConvention::Vol, &opts.fourier).unwrap();
    let target = surface.entries[0].value;

    let forward = m.spread(0.25).unwrap().fra_rate(&m.discount, 1.0).unwrap();
    let annuity = 0.25 * m.discount.discount(1.25).unwrap();
    let gap = |sy: f64| {
        let p =
            shifted_caplet_price_fourier(&toy(0.01, sy, -1.2e-5), &m, 1.0, 0.25, 0.027, 1.0, &opts.fourier).unwrap();
        black_implied_vol(p, forward, 0.027, 1.0, annuity).unwrap() - target
    };
    let (mut lo, mut hi) = (0.004, 0.01);
    assert!(gap(lo) < 0.0 && gap(hi) > 0.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);

    let r = calibrate(&toy(0.01, 0.004, -1.2e-5), &[free("y.cov[0][0]", Transform::Positive)], &surface, &m, &opts)
        .unwrap();
    assert!(r.residuals[0].abs() <= 1e-8, "{:?}", r.residuals);
    assert!((r.parameters[0].value.sqrt() - root).abs() <= 1e-6 * root, "{} vs {root}", r.parameters[0].value.sqrt());
    assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn premium_quotes_calibrate_like_vol_quotes() {
    let (m, opts) = (market(), CalibrationOptions::default());
    let quote = [Caplet { expiry: 2.0, tenor: 0.5, strike: 0.03 }];
    let truth = toy(0.012, 0.004, -1.2e-5);
    let premiums = synthesize_surface(&truth, &m, &quote, QuoteConvention::Premium, &opts.fourier).unwrap();
    let vols = synthesize_surface(&truth, &m, &quote, QuoteConvention::Vol, &opts.fourier).unwrap();
    let p = [free("x.a[0][0]", Transform::Positive)];
    let start = toy(0.01, 0.004, -1.2e-5);
    let quick = CalibrationOptions { optimizer: NelderMeadOptions { restarts: 0, ..Default::default() }, ..opts };
    let a = calibrate(&start, &p, &premiums, &m, &quick).unwrap();
    let b = calibrate(&start, &p, &vols, &m, &quick).unwrap();
    assert!((a.market_vols[0] - b.market_vols[0]).abs() <= 1e-10);
    assert!((a.parameters[0].value.sqrt() - 0.012).abs() <= 1e-6);
}

#[test]
fn calibration_reports_its_failure_modes() {
    let (m, spec) = (market(), toy(0.01, 0.004, -1.2e-5));
    let opts = CalibrationOptions::default();
    let surface = synthesize_surface(&spec, &m, &strip()[..2], QuoteConvention::Vol, &opts.fourier).unwrap();
    let capped = CalibrationOptions {
        optimizer: NelderMeadOptions { max_iterations: 2, restarts: 0, ..Default::default() },
        ..opts
    };
    let one = [free("x.a[0][0]", Transform::Positive)];
    assert!(matches!(calibrate(&toy(0.02, 0.004, -1.2e-5), &one, &surface, &m, &capped), Err(Error::MaxIterations(_))));

    let three = [
        free("x.a[0][0]", Transform::Positive),
        free("y.cov[0][0]", Transform::Positive),
        free("x.b[0]", Transform::Free),
    ];
    assert!(matches!(calibrate(&spec, &three, &surface, &m, &opts), Err(Error::InvalidInput(_))));

    let mut dup = surface.clone();
    dup.entries[1] = dup.entries[0];
    assert!(dup.validate().is_err());
}

#[test]
fn twelve_quote_round_trip_reprices_the_surface() {
    let (m, opts) = (market(), CalibrationOptions::default());
    let truth = toy(0.015, 0.003, -1.35e-5);
    let surface = synthesize_surface(&truth, &m, &strip(), QuoteConvention::Vol, &opts.fourier).unwrap();
    let params = [
        free("x.a[0][0]", Transform::Positive),
        free("y.cov[0][0]", Transform::Positive),
        free("y.cross[0][0]", Transform::Interval { lower: -4e-5, upper: 4e-5 }),
    ];
    // A vol residual of 1e-4 needs only a loose simplex; one run keeps this fast.
    let optimizer = NelderMeadOptions { restarts: 0, x_tol: 1e-4, f_tol: 1e-12, ..Default::default() };
    let quick = CalibrationOptions { optimizer, ..opts };
    let r = calibrate(&toy(0.012, 0.004, -0.5e-5), &params, &surface, &m, &quick).unwrap();
    assert!(r.residuals.iter().all(|x| x.abs() <= 1e-4), "{:?}", r.residuals);
    assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.spec.validate().is_ok());
}
