//! One runner per subcommand.

use multicurve::affine::{
    affine_bond, affine_spread, caplet_price_fourier, shifted_caplet_price_fourier, simulate_affine, AffineSimConfig,
    FourierOptions,
};
use multicurve::calibration::{calibrate, CalibrationOptions, CalibrationResult, FreeParameter};
use multicurve::hjm::{simulate_hjm, DriftMode, HjmDiagnostics, HjmSimConfig};
use multicurve::moment::{
    feasibility_check, kernel_moment_residual, solve_jump_kernel, Atom, Feasibility, KernelObjective, MomentTargets,
    SupportGrid,
};
use multicurve::products::{price_linear, price_on_paths, PricingReport, ProductSpec};
use multicurve::termstructure::{bootstrap_curve_set, CurveSet, SpreadQuoteKind, SpreadWarning};
use multicurve::{McEstimate, PathSet};
use serde::{Deserialize, Serialize};

use crate::config::{PricingMethod, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    read_curves, read_json, read_model, read_quotes_csv, read_surface_csv, tenor_label, Artifacts, ModelFile,
};
use crate::plot::{curve_set_rows, eta_points, spread_series, PlotRow, TIDY_HEADER};

pub const DEFAULT_PLOT_POINTS: usize = 50;
pub const DEFAULT_DUMP_PATHS: usize = 100;
pub const DEFAULT_Z_TOLERANCE: f64 = 3.0;

/// Seed and discretisation behind a stochastic result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
}

fn market(cfg: &RunConfig) -> CliResult<Option<CurveSet>> {
    if let Some(p) = &cfg.curves {
        return read_curves(p).map(Some);
    }
    if let Some(p) = &cfg.quotes {
        return Ok(Some(bootstrap_curve_set(&read_quotes_csv(p)?)?.0));
    }
    Ok(None)
}

fn plot_points(cfg: &RunConfig) -> usize {
    cfg.plot_points.unwrap_or(DEFAULT_PLOT_POINTS)
}

fn rows(r: Vec<PlotRow>) -> impl Iterator<Item = Vec<String>> {
    r.into_iter().map(|row| row.record())
}

// ---------------------------------------------------------------- bootstrap

#[derive(Debug, Serialize)]
struct QuoteResidual {
    instrument: String,
    tenor: String,
    maturity: f64,
    quote: f64,
    model: f64,
    residual: f64,
}

#[derive(Serialize)]
struct BootstrapReport<'a> {
    curves: &'a CurveSet,
    warnings: &'a [SpreadWarning],
    repricing: Vec<QuoteResidual>,
    max_abs_residual: f64,
}

pub fn bootstrap(cfg: &RunConfig, out: &mut Artifacts) -> CliResult<()> {
    let quotes = read_quotes_csv(cfg.require(&cfg.quotes, "quotes")?)?;
    let (curves, warnings) = bootstrap_curve_set(&quotes)?;
    let mut repricing = Vec::new();
    for q in &quotes.ois {
        let model = curves.reprice_ois(q)?;
        repricing.push(QuoteResidual {
            instrument: "OIS".into(),
            tenor: tenor_label(q.tenor.years()),
            maturity: q.maturity,
            quote: q.rate,
            model,
            residual: model - q.rate,
        });
    }
    for q in &quotes.spread {
        let model = curves.reprice_spread(q)?;
        let (instrument, tenor) = match q.kind {
            SpreadQuoteKind::Fra => ("FRA", tenor_label(q.tenor.years())),
            SpreadQuoteKind::Irs => ("IRS", tenor_label(q.tenor.years())),
            SpreadQuoteKind::Basis { reference } => {
                ("BASIS", format!("{}:{}", tenor_label(q.tenor.years()), tenor_label(reference.years())))
            }
        };
        repricing.push(QuoteResidual {
            instrument: instrument.into(),
            tenor,
            maturity: q.maturity,
            quote: q.quote,
            model,
            residual: model - q.quote,
        });
    }
    let max_abs_residual = repricing.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    log::info!("bootstrapped {} spread curves, max repricing residual {max_abs_residual:e}", curves.spreads.len());
    out.json("curves.json", &BootstrapReport { curves: &curves, warnings: &warnings, repricing, max_abs_residual })?;
    emit_curve_plots(&curves, plot_points(cfg), out)
}

/// `curves.csv` (tidy) and one `eta_<tenor>.csv` per spread curve.
pub fn emit_curve_plots(curves: &CurveSet, n: usize, out: &mut Artifacts) -> CliResult<()> {
    out.csv("curves.csv", &TIDY_HEADER, rows(curve_set_rows(curves, n)?))?;
    for c in &curves.spreads {
        let pts = eta_points(c, n)?;
        let name = format!("eta_{}.csv", spread_series(c).trim_start_matches("S_"));
        out.csv(&name, &["T", "eta"], pts.into_iter().map(|(t, e)| vec![t.to_string(), e.to_string()]))?;
    }
    Ok(())
}

// -------------------------------------------------------------------- price

#[derive(Serialize)]
struct PriceReport<'a> {
    product: &'a ProductSpec,
    method: &'static str,
    report: PricingReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

/// Observation time and recorded maturities a Monte Carlo price needs.
fn product_grid(product: &ProductSpec) -> (f64, Vec<f64>) {
    match product {
        ProductSpec::Caplet { expiry, tenor, .. } => (*expiry, vec![*expiry, expiry + tenor.years()]),
        ProductSpec::Swaption { schedule, .. } => (schedule[0], schedule.clone()),
        _ => unreachable!("linear products are priced in closed form"),
    }
}

struct McSettings {
    seed: u64,
    n_paths: usize,
    dt: f64,
}

fn mc_settings(cfg: &RunConfig) -> CliResult<McSettings> {
    Ok(McSettings {
        seed: cfg.seed()?,
        n_paths: *cfg.require(&cfg.n_paths, "n_paths")?,
        dt: *cfg.require(&cfg.dt, "dt")?,
    })
}

fn simulate_model(
    model: &ModelFile,
    mc: &McSettings,
    cfg: &RunConfig,
    horizon: f64,
    observation_times: Vec<f64>,
    maturities: Vec<f64>,
) -> CliResult<(PathSet, Option<HjmDiagnostics>)> {
    match model {
        ModelFile::Hjm(m) => {
            let sim = simulate_hjm(
                m,
                &HjmSimConfig {
                    horizon,
                    dt: mc.dt,
                    dx: cfg.dx,
                    n_paths: mc.n_paths,
                    seed: mc.seed,
                    observation_times,
                    maturities,
                    drift: DriftMode::NoArbitrage,
                    grid_extent: None,
                    check_ordering: cfg.check_ordering.unwrap_or(false),
                    full_grid: false,
                },
            )?;
            Ok((sim.paths, Some(sim.diagnostics)))
        }
        ModelFile::Affine(spec) => {
            if cfg.dx.is_some() {
                log::warn!("dx is ignored by the affine engine");
            }
            let cfg = AffineSimConfig {
                horizon,
                dt: mc.dt,
                n_paths: mc.n_paths,
                seed: mc.seed,
                observation_times,
                maturities,
            };
            Ok((simulate_affine(spec, &cfg)?, None))
        }
    }
}

pub fn price(cfg: &RunConfig, out: &mut Artifacts) -> CliResult<()> {
    let product: ProductSpec = read_json(cfg.require(&cfg.product, "product")?)?;
    product.validate()?;
    let market = market(cfg)?;
    if !product.is_optional() {
        let curves = market.ok_or_else(|| CliError::config("linear products need `curves` or `quotes`"))?;
        let report = price_linear(&product, &curves)?;
        return out
            .json("price.json", &PriceReport { product: &product, method: "closed-form", report, provenance: None });
    }
    let model = read_model(cfg.require(&cfg.model, "model")?, market.as_ref())?;
    let method = cfg.method.unwrap_or(PricingMethod::Analytic);
    if let (ModelFile::Affine(spec), ProductSpec::Caplet { expiry, tenor, strike, notional }, PricingMethod::Analytic) =
        (&model, &product, method)
    {
        let opts = FourierOptions::default();
        let (price, method) = match &market {
            Some(m) => (
                shifted_caplet_price_fourier(spec, m, *expiry, tenor.years(), *strike, *notional, &opts)?,
                "fourier-shifted",
            ),
            None => (caplet_price_fourier(spec, *expiry, tenor.years(), *strike, *notional, &opts)?, "fourier"),
        };
        let report = PricingReport { price, std_error: None, par_rate: None, legs: Vec::new() };
        return out.json("price.json", &PriceReport { product: &product, method, report, provenance: None });
    }
    if matches!(model, ModelFile::Affine(_)) && market.is_some() {
        return Err(CliError::config(
            "Monte Carlo under a shifted affine model is not supported; drop `curves`/`quotes`",
        ));
    }
    let mc = mc_settings(cfg)?;
    let (t, maturities) = product_grid(&product);
    let (paths, _) = simulate_model(&model, &mc, cfg, t, vec![t], maturities)?;
    let report = price_on_paths(&product, &paths)?;
    let provenance = Provenance { seed: mc.seed, n_paths: Some(mc.n_paths), dt: Some(mc.dt), dx: cfg.dx };
    out.json(
        "price.json",
        &PriceReport { product: &product, method: "monte-carlo", report, provenance: Some(provenance) },
    )
}

// ----------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleCheck {
    pub t: f64,
    pub maturity: f64,
    /// `discount` for `B(t,T)/B_t`, `S_<tenor>` for `S(t,T) B(t,T)/B_t`.
    pub quantity: String,
    pub mc_mean: f64,
    pub std_error: f64,
    pub target: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Serialize)]
struct SimulationReport {
    engine: &'static str,
    provenance: Provenance,
    n_paths: usize,
    aborted: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<HjmDiagnostics>,
    z_tolerance: f64,
    martingale: Vec<MartingaleCheck>,
    all_pass: bool,
}

/// Time-0 value of `B(0,T)` and of `S^i(0,T) B(0,T)` under the model.
fn initial_values(model: &ModelFile, maturity: f64) -> CliResult<(f64, Vec<f64>)> {
    Ok(match model {
        ModelFile::Hjm(m) => {
            let b = m.curves.discount.discount(maturity)?;
            let s = m.curves.spreads.iter().map(|c| c.spread(maturity).map(|s| s * b)).collect::<Result<_, _>>()?;
            (b, s)
        }
        ModelFile::Affine(spec) => {
            let b = affine_bond(spec, &spec.x0, maturity)?;
            let s = (0..spec.tenors.len())
                .map(|i| affine_spread(spec, &spec.x0, &spec.y0, maturity, i).map(|s| s * b))
                .collect::<Result<_, _>>()?;
            (b, s)
        }
    })
}

/// Discounted bonds and spread-weighted bonds against their time-0 values.
pub fn martingale_checks(
    paths: &PathSet,
    initial: impl Fn(f64) -> CliResult<(f64, Vec<f64>)>,
    z_tolerance: f64,
) -> CliResult<Vec<MartingaleCheck>> {
    let mut checks = Vec::new();
    for obs in &paths.observations {
        let n = obs.n_paths();
        for (j, &mt) in obs.maturities.iter().enumerate() {
            let (b0, sb0) = initial(mt)?;
            let mut push = |quantity: String, est: McEstimate, target: f64| {
                let z = est.z_score(target);
                checks.push(MartingaleCheck {
                    t: obs.time,
                    maturity: mt,
                    quantity,
                    mc_mean: est.mean,
                    std_error: est.std_error,
                    target,
                    z,
                    pass: z <= z_tolerance,
                });
            };
            push(
                "discount".into(),
                McEstimate::from_samples((0..n).map(|p| obs.discount(p, j) / obs.numeraire[p]))?,
                b0,
            );
            for (k, &target) in sb0.iter().enumerate() {
                let est = McEstimate::from_samples(
                    (0..n).map(|p| obs.spread(k, p, j) * obs.discount(p, j) / obs.numeraire[p]),
                )?;
                push(format!("S_{}", tenor_label(paths.tenors[k])), est, target);
            }
        }
    }
    Ok(checks)
}

fn path_dump(paths: &PathSet, limit: usize) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let labels: Vec<String> = paths.tenors.iter().map(|&d| format!("S_{}", tenor_label(d))).collect();
    for p in 0..limit.min(paths.n_paths) {
        for obs in &paths.observations {
            let t = obs.time.to_string();
            rows.push(vec![p.to_string(), t.clone(), t.clone(), "numeraire".into(), obs.numeraire[p].to_string()]);
            for (j, mt) in obs.maturities.iter().enumerate() {
                rows.push(vec![p.to_string(), t.clone(), mt.to_string(), "B".into(), obs.discount(p, j).to_string()]);
                for (k, label) in labels.iter().enumerate() {
                    rows.push(vec![
                        p.to_string(),
                        t.clone(),
                        mt.to_string(),
                        label.clone(),
                        obs.spread(k, p, j).to_string(),
                    ]);
                }
            }
        }
    }
    rows
}

pub fn simulate(cfg: &RunConfig, out: &mut Artifacts) -> CliResult<()> {
    let market = market(cfg)?;
    let model = read_model(cfg.require(&cfg.model, "model")?, market.as_ref())?;
    let mc = mc_settings(cfg)?;
    let mut times = cfg.observation_times.clone();
    let horizon = match cfg.horizon {
        Some(h) => h,
        None => times.iter().copied().fold(f64::NAN, f64::max),
    };
    if horizon.is_nan() {
        return Err(CliError::config("`horizon` or `observation_times` is required"));
    }
    if times.is_empty() {
        times.push(horizon);
    }
    if cfg.maturities.is_empty() {
        return Err(CliError::config("`maturities` is required"));
    }
    let (paths, diagnostics) = simulate_model(&model, &mc, cfg, horizon, times, cfg.maturities.clone())?;
    let z_tolerance = cfg.z_tolerance.unwrap_or(DEFAULT_Z_TOLERANCE);
    let martingale = martingale_checks(&paths, |mt| initial_values(&model, mt), z_tolerance)?;
    let ordering_ok = diagnostics.as_ref().and_then(|d| d.ordering).is_none_or(|o| o.violations == 0);
    let all_pass = martingale.iter().all(|c| c.pass) && ordering_ok;
    let report = SimulationReport {
        engine: match model {
            ModelFile::Hjm(_) => "hjm",
            ModelFile::Affine(_) => "affine",
        },
        provenance: Provenance { seed: mc.seed, n_paths: Some(mc.n_paths), dt: Some(mc.dt), dx: cfg.dx },
        n_paths: paths.n_paths,
        aborted: paths.aborted,
        diagnostics,
        z_tolerance,
        martingale: martingale.clone(),
        all_pass,
    };
    out.json("simulation.json", &report)?;
    out.csv(
        "paths.csv",
        &["path", "t", "maturity", "curve", "value"],
        path_dump(&paths, cfg.dump_paths.unwrap_or(DEFAULT_DUMP_PATHS)),
    )?;
    let mut plot = Vec::new();
    for c in &martingale {
        plot.push(PlotRow { x: c.maturity, series: format!("{}|t={}|mc", c.quantity, c.t), value: c.mc_mean });
        plot.push(PlotRow { x: c.maturity, series: format!("{}|t={}|target", c.quantity, c.t), value: c.target });
    }
    plot.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
    out.csv("martingale.csv", &TIDY_HEADER, rows(plot))?;
    if !all_pass {
        let failed = martingale.iter().filter(|c| !c.pass).count() + usize::from(!ordering_ok);
        return Err(CliError::ChecksFailed { failed, total: martingale.len() + 1 });
    }
    Ok(())
}

// ---------------------------------------------------------------- calibrate

/// Contents of the `calibration` file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub free: Vec<FreeParameter>,
    #[serde(default)]
    pub options: CalibrationOptions,
    /// Black displacement for the surface.
    #[serde(default)]
    pub displacement: f64,
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    provenance: Provenance,
    #[serde(flatten)]
    result: &'a CalibrationResult,
}

pub fn calibrate_cmd(cfg: &RunConfig, out: &mut Artifacts) -> CliResult<()> {
    let market = market(cfg)?.ok_or_else(|| CliError::config("calibration needs `curves` or `quotes`"))?;
    let ModelFile::Affine(template) = read_model(cfg.require(&cfg.model, "model")?, Some(&market))? else {
        return Err(CliError::config("calibration needs an affine model template"));
    };
    let mut file: CalibrationFile = read_json(cfg.require(&cfg.calibration, "calibration")?)?;
    let surface = read_surface_csv(cfg.require(&cfg.surface, "surface")?, file.displacement)?;
    let seed = cfg.seed()?;
    file.options.optimizer.seed = seed;
    let result = calibrate(&template, &file.free, &surface, &market, &file.options)?;
    log::info!("calibration objective {:e} after {} evaluations", result.objective, result.evaluations);
    let provenance = Provenance { seed, n_paths: None, dt: None, dx: None };
    out.json("calibration.json", &CalibrationReport { provenance, result: &result })?;
    let mut plot = Vec::new();
    for (q, (&model, &mkt)) in surface.entries.iter().zip(result.model_vols.iter().zip(&result.market_vols)) {
        let key = format!("T={}|{}", q.expiry, tenor_label(q.tenor));
        plot.push(PlotRow { x: q.strike, series: format!("market|{key}"), value: mkt });
        plot.push(PlotRow { x: q.strike, series: format!("model|{key}"), value: model });
    }
    plot.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
    out.csv("vols.csv", &TIDY_HEADER, rows(plot))?;
    let trace = result.trace.iter().enumerate().map(|(i, f)| vec![i.to_string(), f.to_string()]);
    out.csv("trace.csv", &["iteration", "objective"], trace)
}

// --------------------------------------------------------- construct-kernel

/// Contents of the `targets` file.
#[derive(Debug, Clone, Deserialize)]
pub struct KernelRequest {
    #[serde(flatten)]
    pub targets: MomentTargets,
    #[serde(default)]
    pub objective: KernelObjective,
    /// Largest positive jump on the grid; defaults to `5 / u_1`.
    #[serde(default)]
    pub xi_max: Option<f64>,
    #[serde(default)]
    pub grid_size: Option<usize>,
}

#[derive(Serialize)]
struct KernelReport<'a> {
    atoms: &'a [Atom],
    targets: &'a MomentTargets,
    bound: f64,
    residuals: Vec<f64>,
    max_abs_residual: f64,
}

#[derive(Serialize)]
struct FeasibilityReport<'a> {
    grid_size: usize,
    xi_min: f64,
    xi_max: f64,
    #[serde(flatten)]
    feasibility: &'a Feasibility,
}

pub fn construct_kernel(cfg: &RunConfig, out: &mut Artifacts) -> CliResult<()> {
    let req: KernelRequest = read_json(cfg.require(&cfg.targets, "targets")?)?;
    req.targets.validate()?;
    let size = cfg.grid_size.or(req.grid_size).unwrap_or(400);
    let xi_max = req.xi_max.unwrap_or(5.0 / req.targets.u[0]);
    let grid = SupportGrid::log_spaced(req.targets.floor, xi_max, size)?;
    let feasibility = feasibility_check(&req.targets, &grid)?;
    let fmin = grid.points.iter().copied().fold(f64::INFINITY, f64::min);
    out.json(
        "feasibility.json",
        &FeasibilityReport { grid_size: size, xi_min: fmin, xi_max, feasibility: &feasibility },
    )?;
    if !feasibility.is_feasible() {
        return Err(multicurve::Error::Infeasible.into());
    }
    let kernel = solve_jump_kernel(&req.targets, &grid, req.objective)?;
    let residuals = kernel_moment_residual(&kernel, &req.targets);
    let max_abs_residual = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
    out.json(
        "kernel.json",
        &KernelReport { atoms: &kernel.atoms, targets: &req.targets, bound: kernel.bound, residuals, max_abs_residual },
    )?;
    out.csv("kernel.csv", &["xi", "w"], kernel.atoms.iter().map(|a| vec![a.xi.to_string(), a.w.to_string()]))
}
