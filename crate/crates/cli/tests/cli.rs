use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multicurve::termstructure::{MarketQuoteSet, OisQuote, SpreadQuote, SpreadQuoteKind, Tenor};
use multicurve_cli::io::{read_quotes_csv, write_quotes_csv, Artifacts};
use multicurve_cli::plot::{spread_rows, TIDY_HEADER};
use proptest::prelude::*;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multicurve"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("MULTICURVE_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run_fixture(command: &str, config: &str, out: &Path) -> Output {
    cli(&[command, "--config", fixture(config).to_str().unwrap()], out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not error JSON ({e}): {stderr}"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn missing_input_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.cfg", "quotes = nowhere.csv\n");
    let out = cli(&["bootstrap", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["schema_version"], 1);
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("nowhere.csv"));
}

#[test]
fn bad_configs_and_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cases = [
        ("unknown.cfg", "colour = blue\n"),
        ("negative.cfg", "dt = -0.1\nseed = 1\n"),
        (
            "no_seed.cfg",
            format!("model = {}\nn_paths = 10\ndt = 0.1\nmaturities = 1\n", fixture("hjm_model.json").display()).leak(),
        ),
        ("wrong.cfg", "command = bootstrap\n"),
    ];
    for (name, body) in cases {
        let cfg = write(tmp.path(), name, body);
        let out = cli(&["simulate", "--config", cfg.to_str().unwrap()], &out_dir);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(error_json(&out)["error"]["exit_code"], 2);
    }
    let quotes = write(tmp.path(), "q.csv", "instrument,tenor,maturity,quote\nOIS,1Y,1,0.02\nCAP,3M,1,0.01\n");
    let cfg = write(tmp.path(), "b.cfg", &format!("quotes = {}\n", quotes.display()));
    let out = cli(&["bootstrap", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["frobnicate"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
}

#[test]
fn fra_on_the_flat_fixture_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run_fixture("price", "price_fra.json", dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let report = json(&a.join("price.json"));
    assert_eq!(report["schema_version"], 1);
    let price = report["report"]["price"].as_f64().unwrap();
    assert!((price - (0.98 * 1.002 - 0.95 * 1.03)).abs() <= 1e-15, "{price}");
    assert_eq!(std::fs::read(a.join("price.json")).unwrap(), std::fs::read(b.join("price.json")).unwrap());
}

#[test]
fn bootstrap_writes_curves_and_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_fixture("bootstrap", "bootstrap.cfg", tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["artifacts"][0], "curves.json");

    let report = json(&tmp.path().join("curves.json"));
    assert!(report["max_abs_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(report["curves"]["discount"]["interpolation"], "log-linear-discount");
    assert_eq!(report["repricing"].as_array().unwrap().len(), 20);

    let curves = std::fs::read_to_string(tmp.path().join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next(), Some("x,series,value"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for series in ["B", "f", "S_3M", "S_6M"] {
        assert_eq!(rows.iter().filter(|r| r[1] == series).count(), 50, "{series}");
    }
    let eta = std::fs::read_to_string(tmp.path().join("eta_3M.csv")).unwrap();
    assert!(eta.starts_with("T,eta\n"));
    assert_eq!(eta.lines().count(), 51);

    // The exported curve set prices a spot IRS at its bootstrapped par rate.
    let product = write(
        tmp.path(),
        "irs.json",
        r#"{"kind": "IRS", "schedule": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0], "fixed_rate": 0.022758341071084886, "notional": 1.0}"#,
    );
    let cfg = write(
        tmp.path(),
        "irs.cfg",
        &format!("curves = {}\nproduct = {}\n", tmp.path().join("curves.json").display(), product.display()),
    );
    let out = cli(&["price", "--config", cfg.to_str().unwrap()], &tmp.path().join("irs"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let priced = json(&tmp.path().join("irs/price.json"));
    assert!(priced["report"]["price"].as_f64().unwrap().abs() <= 1e-12);
}

#[test]
fn empty_curve_set_gives_a_header_only_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut out = Artifacts::new(tmp.path()).unwrap();
    let rows = spread_rows(&[], 50).unwrap();
    out.csv("spreads.csv", &TIDY_HEADER, rows.into_iter().map(|r| r.record())).unwrap();
    assert_eq!(std::fs::read_to_string(tmp.path().join("spreads.csv")).unwrap(), "x,series,value\n");
    assert_eq!(out.written(), vec!["spreads.csv".to_string()]);
}

#[test]
fn simulate_reports_provenance_and_martingales() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_fixture("simulate", "simulate.cfg", tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("simulation.json"));
    assert_eq!(report["provenance"]["seed"], 42);
    assert_eq!(report["provenance"]["n_paths"], 20_000);
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["martingale"].as_array().unwrap().len(), 2 * 2 * 2);
    assert!(report["diagnostics"]["consistency"]["at_nodes"].as_f64().unwrap() <= 1e-7);
    let dump = std::fs::read_to_string(tmp.path().join("paths.csv")).unwrap();
    assert!(dump.starts_with("path,t,maturity,curve,value\n"));
    // 20 paths x 2 observations x (numeraire + 2 maturities x (B + S_3M)).
    assert_eq!(dump.lines().count(), 1 + 20 * 2 * 5);

    let seeded = cli(
        &["simulate", "--config", fixture("simulate.cfg").to_str().unwrap(), "--seed", "43"],
        &tmp.path().join("s"),
    );
    assert!(seeded.status.success());
    assert_eq!(json(&tmp.path().join("s/simulation.json"))["provenance"]["seed"], 43);
}

#[test]
fn caplets_price_by_fourier_and_by_monte_carlo() {
    let tmp = tempfile::tempdir().unwrap();
    let fourier = run_fixture("price", "price_caplet.cfg", &tmp.path().join("f"));
    assert!(fourier.status.success(), "{}", String::from_utf8_lossy(&fourier.stderr));
    let f = json(&tmp.path().join("f/price.json"));
    assert_eq!(f["method"], "fourier-shifted");
    assert!(f.get("provenance").is_none());

    let mc = run_fixture("price", "price_caplet_mc.cfg", &tmp.path().join("m"));
    assert!(mc.status.success(), "{}", String::from_utf8_lossy(&mc.stderr));
    let m = json(&tmp.path().join("m/price.json"));
    assert_eq!(m["provenance"]["seed"], 17);
    assert!(m["provenance"]["dt"].as_f64().unwrap() > 0.0);

    // Unshifted Fourier on the same model agrees with the Monte Carlo price.
    let cfg = write(
        tmp.path(),
        "plain.cfg",
        &format!(
            "model = {}\nproduct = {}\n",
            fixture("affine_model.json").display(),
            fixture("caplet.json").display()
        ),
    );
    let plain = cli(&["price", "--config", cfg.to_str().unwrap()], &tmp.path().join("p"));
    assert!(plain.status.success());
    let p = json(&tmp.path().join("p/price.json"))["report"]["price"].as_f64().unwrap();
    let (mean, se) = (m["report"]["price"].as_f64().unwrap(), m["report"]["std_error"].as_f64().unwrap());
    assert!((mean - p).abs() <= 3.0 * se, "{p} vs {mean} +- {se}");
}

#[test]
fn kernel_construction_and_infeasible_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_fixture("construct-kernel", "kernel.cfg", tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let k = json(&tmp.path().join("kernel.json"));
    assert!(k["max_abs_residual"].as_f64().unwrap() <= 1e-8);
    assert!(k["atoms"].as_array().unwrap().len() <= 3);
    assert_eq!(json(&tmp.path().join("feasibility.json"))["verdict"], "feasible");

    let cfg = write(tmp.path(), "bad.cfg", &format!("targets = {}\n", fixture("targets_infeasible.json").display()));
    let out = cli(&["construct-kernel", "--config", cfg.to_str().unwrap()], &tmp.path().join("bad"));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "Infeasible");
    let f = json(&tmp.path().join("bad/feasibility.json"));
    assert_eq!(f["verdict"], "infeasible");
    assert_eq!(f["ray"].as_array().unwrap().len(), 2);
}

#[test]
fn calibration_recovers_the_spread_variance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_fixture("calibrate", "calibrate.cfg", tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&tmp.path().join("calibration.json"));
    let fitted = r["parameters"][0]["value"].as_f64().unwrap();
    assert!((fitted / 1.6e-5 - 1.0).abs() <= 1e-3, "{fitted}");
    assert!(r["residuals"].as_array().unwrap().iter().all(|x| x.as_f64().unwrap().abs() <= 1e-6));
    assert_eq!(r["provenance"]["seed"], 3);
    let vols = std::fs::read_to_string(tmp.path().join("vols.csv")).unwrap();
    assert_eq!(vols.lines().count(), 1 + 6);
}

#[test]
fn verify_passes_and_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run_fixture("verify", "verify.cfg", dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let report = json(&a.join("verify.json"));
    assert_eq!(report["passed"], report["total"]);
    for f in ["verify.json", "verify.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

fn tenor(d: f64) -> Tenor {
    Tenor::new(d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quote_csv_round_trips(
        ois in prop::collection::vec((0.1f64..30.0, -0.01f64..0.1), 1..6),
        irs in prop::collection::vec((0.5f64..30.0, -0.01f64..0.1), 0..6),
        fra in prop::collection::vec((0.0f64..5.0, -0.01f64..0.1), 0..4),
        basis in prop::collection::vec((0.5f64..30.0, -0.01f64..0.01), 0..4),
    ) {
        let mut set = MarketQuoteSet {
            ois: ois.iter().map(|&(maturity, rate)| OisQuote { maturity, rate, tenor: tenor(1.0) }).collect(),
            ..Default::default()
        };
        set.spread.extend(irs.iter().map(|&(maturity, quote)| SpreadQuote { kind: SpreadQuoteKind::Irs, tenor: tenor(0.25), maturity, quote }));
        set.spread.extend(fra.iter().map(|&(maturity, quote)| SpreadQuote { kind: SpreadQuoteKind::Fra, tenor: tenor(0.5), maturity, quote }));
        set.spread.extend(basis.iter().map(|&(maturity, quote)| SpreadQuote {
            kind: SpreadQuoteKind::Basis { reference: tenor(0.25) }, tenor: tenor(0.5), maturity, quote,
        }));
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("q.csv");
        write_quotes_csv(&path, &set).unwrap();
        prop_assert_eq!(read_quotes_csv(&path).unwrap(), set);
    }
}
