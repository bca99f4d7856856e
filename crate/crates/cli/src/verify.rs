//! Invariant suite behind `multicurve verify`, run on built-in toy models.

use multicurve::affine::{
    affine_bond, affine_spread, caplet_prices_fourier, shifted_curves, simulate_affine, AffineModelSpec,
    AffineSimConfig, Caplet, FourierOptions, YDynamics,
};
use multicurve::hjm::{
    simulate_hjm, Cone, DriftMode, ExpVol, HjmSimConfig, LevyHjmModel, LevyTriplet, VolatilitySpec, YMode,
};
use multicurve::moment::{
    feasibility_check, integrability_weight, kernel_moment_residual, solve_jump_kernel, KernelObjective, MomentTargets,
    SupportGrid,
};
use multicurve::products::{basis_swap_spread, caplet_price_mc, fra_value, irs_swap_rate, irs_value};
use multicurve::termstructure::{
    bootstrap_curve_set, CurveSet, DiscountCurve, MarketQuoteSet, OisQuote, Schedule, SpreadCurve, SpreadQuote,
    SpreadQuoteKind, Tenor,
};
use serde::Serialize;

use crate::commands::{martingale_checks, Provenance};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::Artifacts;

pub const DEFAULT_VERIFY_PATHS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name, value, bound: Bound::AtMost, tolerance, pass: value <= tolerance }
    }

    fn at_least(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name, value, bound: Bound::AtLeast, tolerance, pass: value >= tolerance }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    provenance: Provenance,
    passed: usize,
    total: usize,
    checks: &'a [Check],
}

// ---------------------------------------------------------------- toy models

fn vasicek_closed_form(kappa: f64, theta: f64, sigma: f64, r: f64, t: f64) -> f64 {
    let b = (1.0 - (-kappa * t).exp()) / kappa;
    let s2 = sigma * sigma;
    ((theta - s2 / (2.0 * kappa * kappa)) * (b - t) - s2 * b * b / (4.0 * kappa) - b * r).exp()
}

fn cir_closed_form(kappa: f64, theta: f64, sigma: f64, r: f64, t: f64) -> f64 {
    let h = (kappa * kappa + 2.0 * sigma * sigma).sqrt();
    let e = (h * t).exp_m1();
    let den = (h + kappa) * e + 2.0 * h;
    (2.0 * h * ((kappa + h) * t / 2.0).exp() / den).powf(2.0 * kappa * theta / (sigma * sigma))
        * (-2.0 * e / den * r).exp()
}

/// Vasicek short rate with a correlated diffusive spread factor.
pub fn vasicek_spread() -> AffineModelSpec {
    let (sr, sy, rho) = (0.01, 0.004, -0.3);
    AffineModelSpec {
        y: YDynamics::Diffusive {
            drift: vec![0.0005],
            loading: vec![vec![0.0]],
            cov: vec![vec![sy * sy]],
            cross: vec![vec![rho * sr * sy]],
        },
        u: vec![vec![1.0], vec![2.0]],
        tenors: vec![0.25, 0.5],
        y0: vec![0.001],
        ..AffineModelSpec::vasicek(0.5, 0.03, sr, 0.02)
    }
}

/// Flat OIS rate and spread curves `S(0,T) = s0 e^{eta T}`.
pub fn flat_curves(rate: f64, spreads: &[(f64, f64, f64)]) -> CurveSet {
    let discount = DiscountCurve::flat(rate, &[1.0, 30.0]).expect("flat discount curve");
    let spreads = spreads
        .iter()
        .map(|&(tenor, s0, eta)| {
            SpreadCurve::from_pillars(Tenor::new(tenor).expect("tenor"), &[(0.0, s0), (30.0, s0 * (eta * 30.0).exp())])
                .expect("spread curve")
        })
        .collect();
    CurveSet { discount, spreads }
}

/// Gaussian HJM: constant OIS vol and one spread curve with `u = 1`.
pub fn gaussian_hjm(sigma: f64, spread_sigma: f64) -> LevyHjmModel {
    LevyHjmModel {
        driver: LevyTriplet::brownian(vec![vec![1.0, 0.0], vec![0.0, 0.0]]),
        vols: VolatilitySpec {
            ois: vec![ExpVol::constant(sigma)],
            spreads: vec![vec![ExpVol::constant(spread_sigma)]],
            state_dependence: None,
        },
        u: vec![vec![1.0]],
        y0: None,
        y_mode: YMode::Integrated,
        cone: Cone::Whole,
        curves: flat_curves(0.02, &[(0.25, 1.001, 0.002)]),
    }
}

/// Three ordered spreads in `R_+` completed by a moment-problem jump kernel.
pub fn kernel_hjm(u: [f64; 3]) -> LevyHjmModel {
    let atoms = [(0.002, 5.0), (0.01, 1.0)];
    let eta = |ui: f64| atoms.iter().map(|&(xi, w): &(f64, f64)| w * (ui * xi).exp_m1()).sum::<f64>();
    LevyHjmModel {
        driver: LevyTriplet::brownian(vec![vec![1.0, 0.0], vec![0.0, 0.0]]),
        vols: VolatilitySpec {
            ois: vec![ExpVol { scale: 0.01, decay: 0.1 }],
            spreads: vec![vec![ExpVol::ZERO]; 3],
            state_dependence: None,
        },
        u: u.iter().map(|&v| vec![v]).collect(),
        y0: None,
        y_mode: YMode::Kernel { cap: 50.0, grid_size: 400, objective: KernelObjective::MinTotalMass },
        cone: Cone::NonNegative,
        curves: flat_curves(0.02, &[(0.25, 1.0, eta(u[0])), (0.5, 1.0, eta(u[1])), (1.0, 1.0, eta(u[2]))]),
    }
}

fn hjm_config(horizon: f64, dt: f64, n_paths: usize, seed: u64, maturities: &[f64]) -> HjmSimConfig {
    HjmSimConfig {
        horizon,
        dt,
        dx: None,
        n_paths,
        seed,
        observation_times: vec![0.5 * horizon, horizon],
        maturities: maturities.to_vec(),
        drift: DriftMode::NoArbitrage,
        grid_extent: None,
        check_ordering: false,
        full_grid: false,
    }
}

fn hjm_initial(model: &LevyHjmModel) -> impl Fn(f64) -> CliResult<(f64, Vec<f64>)> + '_ {
    move |mt| {
        let b = model.curves.discount.discount(mt)?;
        Ok((b, vec![model.curves.spreads[0].spread(mt)? * b]))
    }
}

fn max_z(model: &LevyHjmModel, cfg: &HjmSimConfig) -> CliResult<f64> {
    let sim = simulate_hjm(model, cfg)?;
    Ok(martingale_checks(&sim.paths, hjm_initial(model), f64::INFINITY)?.iter().map(|c| c.z).fold(0.0, f64::max))
}

fn synthetic_spread(d: f64) -> SpreadCurve {
    let pillars: Vec<(f64, f64)> =
        (0..=20).map(|k| k as f64 * d).map(|t| (t, 1.0 + 0.002 * d + 0.0004 * t - 0.00002 * t * t)).collect();
    SpreadCurve::from_pillars(Tenor::new(d).expect("tenor"), &pillars).expect("synthetic spread curve")
}

// -------------------------------------------------------------------- checks

fn riccati_closed_forms() -> CliResult<Vec<Check>> {
    let (k, th, s, r0) = (0.5, 0.03, 0.01, 0.02);
    let (kc, thc, sc, rc) = (0.6, 0.04, 0.12, 0.03);
    let (vas, cir) = (AffineModelSpec::vasicek(k, th, s, r0), AffineModelSpec::cir(kc, thc, sc, rc));
    let mut worst: f64 = 0.0;
    for t in [0.25, 1.0, 5.0, 10.0] {
        worst = worst.max((affine_bond(&vas, &vas.x0, t)? - vasicek_closed_form(k, th, s, r0, t)).abs());
        worst = worst.max((affine_bond(&cir, &cir.x0, t)? - cir_closed_form(kc, thc, sc, rc, t)).abs());
    }
    Ok(vec![Check::at_most("riccati-vs-closed-form", worst, 1e-8)])
}

fn hjm_martingales(n_paths: usize, dt: f64, seed: u64) -> CliResult<Vec<Check>> {
    let model = gaussian_hjm(0.01, 0.003);
    // Half-step cells keep t = 0.5 on the grid for daily steps.
    let mut cfg = hjm_config(1.0, dt, n_paths, seed, &[1.0, 2.0]);
    cfg.dx = Some(dt / 2.0);
    let z = max_z(&model, &cfg)?;
    let control = gaussian_hjm(0.05, 0.0);
    cfg.seed = seed.wrapping_add(1);
    cfg.maturities = vec![2.0, 4.0];
    cfg.drift = DriftMode::Zero;
    let zc = max_z(&control, &cfg)?;
    Ok(vec![Check::at_most("hjm-martingale-max-z", z, 3.0), Check::at_least("hjm-zero-drift-control-max-z", zc, 5.0)])
}

fn consistency(seed: u64) -> CliResult<Vec<Check>> {
    let model = gaussian_hjm(0.01, 0.03);
    let mut reps = Vec::new();
    for dt in [0.05, 0.025, 0.0125] {
        reps.push(simulate_hjm(&model, &hjm_config(1.0, dt, 50, seed, &[2.0]))?.diagnostics.consistency);
    }
    let order = reps.windows(2).map(|w| (w[0].over_step / w[1].over_step).log2()).fold(f64::INFINITY, f64::min);
    let kernel = simulate_hjm(&kernel_hjm([1.0, 2.0, 3.0]), &hjm_config(1.0, 0.02, 200, seed, &[1.0, 2.0]))?;
    Ok(vec![
        Check::at_most("consistency-integrated", reps.iter().map(|r| r.at_nodes).fold(0.0, f64::max), 1e-7),
        Check::at_least("consistency-step-order", order, 0.9),
        Check::at_most("consistency-kernel", kernel.diagnostics.consistency.at_nodes, 1e-7),
    ])
}

fn ordering(n_paths: usize, seed: u64) -> CliResult<Vec<Check>> {
    let mut cfg = hjm_config(1.0, 0.02, n_paths, seed, &[1.0, 2.0]);
    cfg.check_ordering = true;
    let ord = simulate_hjm(&kernel_hjm([1.0, 2.0, 3.0]), &cfg)?.diagnostics.ordering.unwrap_or_default();
    Ok(vec![
        Check::at_most("ordering-violations", ord.violations as f64, 0.0),
        Check::at_least("ordering-min-log-spread", ord.min_log_spread, 0.0),
    ])
}

fn moments() -> CliResult<Vec<Check>> {
    let u = vec![0.5, 1.0];
    let atoms: [(f64, f64); 3] = [(0.03, 1.5), (0.4, 0.7), (1.7, 0.2)];
    let p = u.iter().map(|&ui| atoms.iter().map(|&(xi, w)| w * (ui * xi).exp_m1()).sum()).collect();
    let bound = atoms.iter().map(|&(xi, w)| w * integrability_weight(&u, xi)).sum();
    let targets = MomentTargets { u, p, cap: 1e3, floor: 0.0, bound: Some(bound) };
    let grid = SupportGrid::default_for(&targets)?;
    let kernel = solve_jump_kernel(&targets, &grid, KernelObjective::MinTotalMass)?;
    let worst = kernel_moment_residual(&kernel, &targets).iter().map(|r| r.abs()).fold(0.0, f64::max);
    let bad = MomentTargets { u: vec![1.0], p: vec![-0.01], cap: 100.0, floor: 0.0, bound: None };
    let infeasible = !feasibility_check(&bad, &SupportGrid::default_for(&bad)?)?.is_feasible();
    Ok(vec![
        Check::at_most("moment-three-atom-residual", worst, 1e-8),
        Check::at_least("moment-sign-case-certified-infeasible", f64::from(u8::from(infeasible)), 1.0),
    ])
}

fn fourier_vs_mc(n_paths: usize, seed: u64) -> CliResult<Vec<Check>> {
    let spec = vasicek_spread();
    let (t, d) = (1.0, 0.5);
    let cfg = AffineSimConfig {
        horizon: t,
        dt: 1.0 / 52.0,
        n_paths,
        seed,
        observation_times: vec![t],
        maturities: vec![t, t + d],
    };
    let paths = simulate_affine(&spec, &cfg)?;
    let caplets: Vec<Caplet> = [0.02, 0.03, 0.04].map(|strike| Caplet { expiry: t, tenor: d, strike }).to_vec();
    let prices = caplet_prices_fourier(&spec, &caplets, 1.0, &FourierOptions::default())?;
    let mut worst: f64 = 0.0;
    for (c, f) in caplets.iter().zip(prices) {
        worst = worst.max(caplet_price_mc(&paths, t, d, c.strike, 1.0)?.z_score(f));
    }
    Ok(vec![Check::at_most("fourier-vs-mc-max-z", worst, 3.0)])
}

fn bootstrap_round_trip() -> CliResult<Vec<Check>> {
    let ois: Vec<OisQuote> = [(0.5, 0.008), (1.0, 0.01), (2.0, 0.015), (5.0, 0.02), (12.0, 0.025)]
        .map(|(maturity, rate)| OisQuote { maturity, rate, tenor: Tenor::new(1.0).expect("tenor") })
        .to_vec();
    let mut set = MarketQuoteSet { ois, ..Default::default() };
    let disc = multicurve::termstructure::bootstrap_ois(&set)?;
    let d = 0.5;
    let truth = synthetic_spread(d);
    for n in 1..=20 {
        let s = Schedule::new(0.0, d, n)?;
        set.spread.push(SpreadQuote {
            kind: SpreadQuoteKind::Irs,
            tenor: Tenor::new(d)?,
            maturity: s.end(),
            quote: irs_swap_rate(&disc, &truth, &s)?,
        });
    }
    let (curves, _) = bootstrap_curve_set(&set)?;
    let mut quote_gap: f64 = 0.0;
    for q in &set.ois {
        quote_gap = quote_gap.max((curves.reprice_ois(q)? - q.rate).abs());
    }
    for q in &set.spread {
        quote_gap = quote_gap.max((curves.reprice_spread(q)? - q.quote).abs());
    }
    let built = curves.spread(d)?;
    let mut curve_gap: f64 = 0.0;
    for k in 0..200 {
        let t = k as f64 * 0.0475;
        curve_gap = curve_gap.max((built.spread(t)? - truth.spread(t)?).abs());
    }
    Ok(vec![
        Check::at_most("bootstrap-quote-repricing", quote_gap, 1e-12),
        Check::at_most("bootstrap-spread-round-trip", curve_gap, 1e-10),
    ])
}

fn shift_extension() -> CliResult<Vec<Check>> {
    let spec = vasicek_spread();
    let m = CurveSet {
        discount: DiscountCurve::flat(0.025, &[1.0, 30.0])?,
        spreads: vec![
            SpreadCurve::flat(Tenor::new(0.25)?, 1.002, 30.0)?,
            SpreadCurve::flat(Tenor::new(0.5)?, 1.002f64.powi(2), 30.0)?,
        ],
    };
    let mut anchor: f64 = 0.0;
    for mt in [0.5, 3.0, 7.5] {
        let sh = shifted_curves(&spec, &m, &spec.x0, &spec.y0, 0.0, mt)?;
        anchor = anchor.max((sh.bond / m.discount.discount(mt)? - 1.0).abs());
        for (i, s) in sh.spreads.iter().enumerate() {
            anchor = anchor.max((s / m.spreads[i].spread(mt)? - 1.0).abs());
        }
    }
    let pillars = [0.5, 1.0, 2.0, 3.0, 5.0];
    let disc = DiscountCurve::from_pillars(
        &pillars.iter().map(|&t| Ok((t, affine_bond(&spec, &spec.x0, t)?))).collect::<multicurve::Result<Vec<_>>>()?,
    )?;
    let mut spreads = Vec::new();
    for (i, &d) in spec.tenors.iter().enumerate() {
        let pts = std::iter::once(0.0)
            .chain(pillars)
            .map(|t| Ok((t, affine_spread(&spec, &spec.x0, &spec.y0, t, i)?)))
            .collect::<multicurve::Result<Vec<_>>>()?;
        spreads.push(SpreadCurve::from_pillars(Tenor::new(d)?, &pts)?);
    }
    let own = CurveSet { discount: disc, spreads };
    let (x, y) = ([0.035], [0.004]);
    let mut no_op: f64 = 0.0;
    for t in [0.0, 0.5, 1.0] {
        for mt in pillars.iter().copied().filter(|&mt| mt >= t) {
            let sh = shifted_curves(&spec, &own, &x, &y, t, mt)?;
            no_op = no_op.max((sh.bond / affine_bond(&spec, &x, mt - t)? - 1.0).abs());
            for i in 0..spec.tenors.len() {
                no_op = no_op.max((sh.spreads[i] / affine_spread(&spec, &x, &y, mt - t, i)? - 1.0).abs());
            }
        }
    }
    Ok(vec![
        Check::at_most("shift-anchor-relative-gap", anchor, 4.0 * f64::EPSILON),
        Check::at_most("shift-no-op", no_op, 1e-12),
    ])
}

fn par_identities() -> CliResult<Vec<Check>> {
    let disc = DiscountCurve::from_pillars(&[(0.5, 0.99), (1.0, 0.978), (2.0, 0.955), (5.0, 0.88), (10.0, 0.76)])?;
    let s = synthetic_spread(0.5);
    let mut gap: f64 = 0.0;
    for t in [0.5, 1.0, 3.0] {
        gap = gap.max(fra_value(&disc, &s, t, s.fra_rate(&disc, t)?, 1.0)?.abs());
    }
    for n in [1, 4, 10] {
        let sch = Schedule::new(0.0, 0.5, n)?;
        gap = gap.max(irs_value(&disc, &s, &sch, irs_swap_rate(&disc, &s, &sch)?, 1.0)?.abs());
    }
    let one6 = SpreadCurve::flat(Tenor::new(0.5)?, 1.0, 10.0)?;
    let one3 = SpreadCurve::flat(Tenor::new(0.25)?, 1.0, 10.0)?;
    let (l6, l3) = (Schedule::new(0.0, 0.5, 8)?, Schedule::new(0.0, 0.25, 16)?);
    let k = basis_swap_spread(&disc, &one6, &one3, &l6, &l3, &l3)?;
    Ok(vec![Check::at_most("par-fra-irs-value", gap, 1e-12), Check::at_most("basis-single-curve", k.abs(), 0.0)])
}

fn determinism(seed: u64) -> CliResult<Vec<Check>> {
    let model = gaussian_hjm(0.01, 0.003);
    let cfg = hjm_config(1.0, 0.02, 500, seed, &[1.0, 2.0]);
    let a = serde_json::to_string(&simulate_hjm(&model, &cfg)?).expect("paths serialise");
    let b = serde_json::to_string(&simulate_hjm(&model, &cfg)?).expect("paths serialise");
    Ok(vec![Check::at_most("rerun-byte-identical", f64::from(u8::from(a != b)), 0.0)])
}

type CheckGroup<'a> = (&'a str, Box<dyn Fn() -> CliResult<Vec<Check>>>);

/// Every check, in a fixed order.
pub fn run_checks(n_paths: usize, dt: f64, seed: u64) -> CliResult<Vec<Check>> {
    let groups: Vec<CheckGroup> = vec![
        ("riccati", Box::new(riccati_closed_forms)),
        ("martingale", Box::new(move || hjm_martingales(n_paths, dt, seed))),
        ("consistency", Box::new(move || consistency(seed))),
        ("ordering", Box::new(move || ordering((n_paths / 10).max(100), seed))),
        ("moment", Box::new(moments)),
        ("fourier", Box::new(move || fourier_vs_mc(5 * n_paths, seed))),
        ("bootstrap", Box::new(bootstrap_round_trip)),
        ("shift", Box::new(shift_extension)),
        ("par", Box::new(par_identities)),
        ("determinism", Box::new(move || determinism(seed))),
    ];
    let mut checks = Vec::new();
    for (group, run) in groups {
        let start = std::time::Instant::now();
        let found = run()?;
        log::info!("{group}: {} checks in {:.2?}", found.len(), start.elapsed());
        checks.extend(found);
    }
    Ok(checks)
}

pub fn verify(cfg: &RunConfig, out: &mut Artifacts) -> CliResult<()> {
    let seed = cfg.seed()?;
    let n_paths = cfg.n_paths.unwrap_or(DEFAULT_VERIFY_PATHS);
    let dt = cfg.dt.unwrap_or(1.0 / 365.0);
    let checks = run_checks(n_paths, dt, seed)?;
    let passed = checks.iter().filter(|c| c.pass).count();
    let total = checks.len();
    let provenance = Provenance { seed, n_paths: Some(n_paths), dt: Some(dt), dx: None };
    out.json("verify.json", &VerifyReport { provenance, passed, total, checks: &checks })?;
    let table = checks.iter().map(|c| {
        let bound = match c.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        vec![
            c.name.to_string(),
            format!("{:e}", c.value),
            bound.to_string(),
            format!("{:e}", c.tolerance),
            if c.pass { "pass" } else { "FAIL" }.to_string(),
        ]
    });
    out.csv("verify.csv", &["check", "value", "bound", "tolerance", "result"], table)?;
    for c in &checks {
        eprintln!("{:<40} {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    if passed < total {
        return Err(CliError::ChecksFailed { failed: total - passed, total });
    }
    Ok(())
}
