use multicurve::hjm::{
    simulate_hjm, Cone, DriftMode, ExpVol, HjmSimConfig, JumpAtom, LevyHjmModel, LevyTriplet, VolatilitySpec, YMode,
};
use multicurve::moment::KernelObjective;
use multicurve::termstructure::{CurveSet, DiscountCurve, SpreadCurve, Tenor};
use multicurve::{Error, McEstimate};
use proptest::prelude::*;

fn flat_curves(rate: f64, spreads: &[(f64, f64, f64)]) -> CurveSet {
    // (tenor, S(0,0), forward spread rate eta)
    let discount = DiscountCurve::flat(rate, &[1.0, 30.0]).unwrap();
    let spreads = spreads
        .iter()
        .map(|&(tenor, s0, eta)| {
            SpreadCurve::from_pillars(Tenor::new(tenor).unwrap(), &[(0.0, s0), (30.0, s0 * (eta * 30.0).exp())])
                .unwrap()
        })
        .collect();
    CurveSet { discount, spreads }
}

fn ho_lee(sigma: f64, spread_sigma: f64) -> LevyHjmModel {
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

fn config(horizon: f64, dt: f64, n_paths: usize, mats: &[f64]) -> HjmSimConfig {
    HjmSimConfig {
        horizon,
        dt,
        dx: None,
        n_paths,
        seed: 7,
        observation_times: vec![0.5 * horizon, horizon],
        maturities: mats.to_vec(),
        drift: DriftMode::NoArbitrage,
        grid_extent: None,
        check_ordering: false,
        full_grid: false,
    }
}

#[test]
fn exponent_examples() {
    let t = LevyTriplet::standard(3);
    assert_eq!(t.exponent(&[1.0, 0.0, 0.0]).unwrap(), 0.5);
    assert_eq!(t.exponent(&[0.0; 3]).unwrap(), 0.0);
    let j = LevyTriplet { b: vec![0.0], c: vec![vec![0.0]], jumps: vec![JumpAtom { size: vec![0.1], intensity: 2.0 }] };
    assert!((j.exponent(&[1.0]).unwrap() - 0.210_341_836_151_295_6).abs() < 1e-15);
    assert!(matches!(t.exponent(&[1.0]), Err(Error::DimensionMismatch { .. })));
}

proptest! {
    #[test]
    fn exponent_is_convex_along_lines(
        b in prop::collection::vec(-0.5f64..0.5, 2),
        a in -1.0f64..1.0, c in -1.0f64..1.0,
        s in prop::collection::vec(-0.3f64..0.3, 2),
        lam in 0.01f64..3.0,
        beta in prop::collection::vec(-2.0f64..2.0, 2),
        dir in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let t = LevyTriplet {
            b,
            c: vec![vec![1.0 + a * a, a * c], vec![a * c, 1.0 + c * c]],
            jumps: vec![JumpAtom { size: s, intensity: lam }],
        };
        prop_assert_eq!(t.exponent(&[0.0, 0.0]).unwrap(), 0.0);
        let at = |h: f64| t.exponent(&[beta[0] + h * dir[0], beta[1] + h * dir[1]]).unwrap();
        let (l, m, r) = (at(-1.0), at(0.0), at(1.0));
        prop_assert!(l + r - 2.0 * m >= -1e-12 * (1.0 + m.abs()));
    }
}

#[test]
fn ho_lee_drift_and_zero_at_expiry() {
    let model = ho_lee(0.013, 0.0);
    for &(t, big_t) in &[(0.0, 1.0), (0.5, 3.0), (2.0, 2.0)] {
        let a = model.ois_drift(t, big_t).unwrap();
        assert!((a - 0.013f64.powi(2) * (big_t - t)).abs() < 1e-16, "{a}");
    }
    assert!(model.ois_drift(1.0, 0.5).is_err());
}

fn jump_model() -> LevyHjmModel {
    // X two-dimensional with jumps, Y-hat correlated and co-jumping.
    LevyHjmModel {
        driver: LevyTriplet {
            b: vec![0.01, -0.02, 0.003],
            c: vec![vec![1.0, 0.3, 0.1], vec![0.3, 1.0, -0.2], vec![0.1, -0.2, 0.5]],
            jumps: vec![
                JumpAtom { size: vec![0.4, -0.2, 0.1], intensity: 0.7 },
                JumpAtom { size: vec![-0.3, 0.5, 0.05], intensity: 1.3 },
            ],
        },
        vols: VolatilitySpec {
            ois: vec![ExpVol { scale: 0.012, decay: 0.3 }, ExpVol { scale: 0.004, decay: 0.0 }],
            spreads: vec![vec![ExpVol { scale: 0.002, decay: 1.1 }, ExpVol { scale: 0.007, decay: 0.2 }]],
            state_dependence: None,
        },
        u: vec![vec![0.8]],
        y0: None,
        y_mode: YMode::Integrated,
        cone: Cone::Whole,
        curves: flat_curves(0.02, &[(0.5, 1.002, 0.001)]),
    }
}

/// Central difference of T -> Psi(beta(T)) in T.
fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn drifts_match_finite_differences_of_the_exponent() {
    let model = jump_model();
    let x = LevyTriplet {
        b: model.driver.b[..2].to_vec(),
        c: vec![model.driver.c[0][..2].to_vec(), model.driver.c[1][..2].to_vec()],
        jumps: model
            .driver
            .jumps
            .iter()
            .map(|j| JumpAtom { size: j.size[..2].to_vec(), intensity: j.intensity })
            .collect(),
    };
    let big = |k: usize, tau: f64| -> Vec<f64> { model.vols.curve(k).iter().map(|v| v.integral(tau)).collect() };
    let g0 = |tau: f64| x.exponent(&big(0, tau).iter().map(|v| -v).collect::<Vec<_>>()).unwrap();
    let gi = |tau: f64| {
        let (s0, s1) = (big(0, tau), big(1, tau));
        let arg = vec![s1[0] - s0[0], s1[1] - s0[1], model.u[0][0]];
        -model.driver.exponent(&arg).unwrap() + g0(tau)
    };
    for &(t, big_t) in &[(0.0, 0.3), (0.2, 1.0), (1.0, 6.0), (0.5, 12.0)] {
        let tau: f64 = big_t - t;
        let a0 = model.ois_drift(t, big_t).unwrap();
        assert!((a0 - fd(g0, tau)).abs() <= 1e-8, "ois {a0} vs {}", fd(g0, tau));
        let a1 = model.spread_drift(0, t, big_t).unwrap();
        assert!((a1 - fd(gi, tau)).abs() <= 1e-8, "spread {a1} vs {}", fd(gi, tau));
    }
}

#[test]
fn spread_drift_vanishes_in_degenerate_cases() {
    let zero_vol = |model: &mut LevyHjmModel| model.vols.spreads[0] = vec![ExpVol::ZERO; 2];
    let independent = |model: &mut LevyHjmModel| {
        for (i, j) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
            model.driver.c[i][j] = 0.0;
        }
        model.driver.jumps = vec![
            JumpAtom { size: vec![0.4, -0.2, 0.0], intensity: 0.7 },
            JumpAtom { size: vec![0.0, 0.0, 0.3], intensity: 1.3 },
        ];
    };
    // u = 0 and a static forward spread curve.
    let mut m = jump_model();
    zero_vol(&mut m);
    m.u = vec![vec![0.0]];
    for t in [0.1, 1.0, 7.0] {
        assert!(m.spread_drift(0, 0.0, t).unwrap().abs() < 1e-15);
    }
    // Y-hat independent of X (no cross covariance, separate jumps).
    let mut m = jump_model();
    zero_vol(&mut m);
    independent(&mut m);
    for t in [0.1, 1.0, 7.0] {
        assert!(m.spread_drift(0, 0.0, t).unwrap().abs() < 1e-15);
    }
    // Spread curve moving with the OIS curve: eta - f is driftless.
    let mut m = jump_model();
    m.vols.spreads[0] = m.vols.ois.clone();
    independent(&mut m);
    for t in [0.1, 1.0, 7.0] {
        let gap = m.spread_drift(0, 0.0, t).unwrap() - m.ois_drift(0.0, t).unwrap();
        assert!(gap.abs() < 1e-15);
    }
}

#[test]
fn zero_vols_transport_curves_deterministically() {
    let mut model = ho_lee(0.0, 0.0);
    model.y_mode = YMode::None;
    let mut cfg = config(1.0, 0.05, 3, &[1.0, 1.5, 2.0]);
    cfg.observation_times = vec![0.0, 0.5, 1.0];
    let sim = simulate_hjm(&model, &cfg).unwrap();
    let disc = &model.curves.discount;
    for obs in &sim.paths.observations {
        let t = obs.time;
        for p in 0..3 {
            assert!((obs.numeraire[p] - 1.0 / disc.discount(t).unwrap()).abs() < 1e-13);
            for (j, &mt) in obs.maturities.iter().enumerate() {
                let expect = disc.discount(mt).unwrap() / disc.discount(t).unwrap();
                assert!((obs.discount(p, j) - expect).abs() < 1e-14, "t {t} T {mt}");
            }
        }
    }
}

fn martingale_z(sim: &multicurve::hjm::HjmSimulation, model: &LevyHjmModel) -> (f64, f64) {
    let (mut zb, mut zs) = (0.0f64, 0.0f64);
    for obs in &sim.paths.observations {
        for (j, &mt) in obs.maturities.iter().enumerate() {
            let b0 = model.curves.discount.discount(mt).unwrap();
            let s0 = model.curves.spreads[0].spread(mt).unwrap();
            let eb =
                McEstimate::from_samples((0..obs.n_paths()).map(|p| obs.discount(p, j) / obs.numeraire[p])).unwrap();
            let es = McEstimate::from_samples(
                (0..obs.n_paths()).map(|p| obs.spread(0, p, j) * obs.discount(p, j) / obs.numeraire[p]),
            )
            .unwrap();
            zb = zb.max(eb.z_score(b0).abs());
            zs = zs.max(es.z_score(s0 * b0).abs());
        }
    }
    (zb, zs)
}

#[test]
fn discounted_prices_are_martingales_with_jumps() {
    let model = jump_model();
    let sim = simulate_hjm(&model, &config(1.0, 0.02, 20_000, &[1.0, 2.0, 4.0])).unwrap();
    let (zb, zs) = martingale_z(&sim, &model);
    assert!(zb <= 3.0 && zs <= 3.0, "z {zb} {zs}");
}

#[test]
fn zeroed_drift_is_detected() {
    let model = ho_lee(0.05, 0.0);
    let mut cfg = config(1.0, 0.02, 20_000, &[2.0, 4.0]);
    let sim = simulate_hjm(&model, &cfg).unwrap();
    assert!(martingale_z(&sim, &model).0 <= 3.0);
    cfg.drift = DriftMode::Zero;
    let sim = simulate_hjm(&model, &cfg).unwrap();
    assert!(martingale_z(&sim, &model).0 >= 5.0);
}

#[test]
fn integrated_mode_is_consistent_with_first_order_step_error() {
    let model = ho_lee(0.01, 0.03);
    let mut prev: Option<f64> = None;
    for dt in [0.05, 0.025, 0.0125] {
        let rep = simulate_hjm(&model, &config(1.0, dt, 50, &[2.0])).unwrap().diagnostics.consistency;
        assert!(rep.at_nodes <= 1e-12, "{rep:?}");
        if let Some(p) = prev {
            let order = (p / rep.over_step).log2();
            assert!(order >= 0.9, "order {order}");
        }
        prev = Some(rep.over_step);
    }
}

#[test]
fn mismatched_constant_exponent_shows_the_gap() {
    let mut model = ho_lee(0.0, 0.0);
    model.y_mode = YMode::None;
    model.driver.b[1] = 0.004; // Psi^Y(1) = 0.004 against eta = 0.002
    let rep = simulate_hjm(&model, &config(1.0, 0.1, 4, &[2.0])).unwrap().diagnostics.consistency;
    assert!((rep.at_nodes - 0.002).abs() < 1e-12, "{rep:?}");
}

fn kernel_model(u: [f64; 3]) -> LevyHjmModel {
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

#[test]
fn kernel_mode_is_consistent_and_ordered() {
    let model = kernel_model([1.0, 2.0, 3.0]);
    let mut cfg = config(1.0, 0.02, 1_000, &[1.0, 2.0]);
    cfg.check_ordering = true;
    let sim = simulate_hjm(&model, &cfg).unwrap();
    let d = &sim.diagnostics;
    assert!(d.consistency.at_nodes <= 1e-7, "{d:?}");
    let ord = d.ordering.unwrap();
    assert_eq!(ord.violations, 0);
    assert!(ord.nodes_checked > 100_000);
    assert!(ord.min_log_spread >= 0.0);
    let (zb, zs) = martingale_z(&sim, &model);
    assert!(zb <= 3.0 && zs <= 3.0, "z {zb} {zs}");
}

#[test]
fn unordered_loadings_are_flagged() {
    let mut model = kernel_model([1.0, 2.0, 3.0]);
    model.u.swap(0, 2);
    model.curves.spreads.swap(0, 2);
    model.y_mode = YMode::Integrated;
    assert!(!model.loadings_ordered());
    let mut cfg = config(0.5, 0.05, 20, &[1.0]);
    cfg.check_ordering = true;
    let ord = simulate_hjm(&model, &cfg).unwrap().diagnostics.ordering.unwrap();
    assert!(ord.violations > 0);
}

#[test]
fn grid_checks() {
    let model = ho_lee(0.01, 0.0);
    let mut cfg = config(1.0, 0.03, 4, &[2.0]);
    cfg.dx = Some(0.02);
    assert!(matches!(simulate_hjm(&model, &cfg), Err(Error::GridMismatch { .. })));
    let mut cfg = config(1.0, 0.05, 4, &[2.0]);
    cfg.grid_extent = Some(1.5);
    assert!(matches!(simulate_hjm(&model, &cfg), Err(Error::GridTooShort { .. })));
    cfg.grid_extent = None;
    cfg.dx = Some(0.025);
    let sim = simulate_hjm(&model, &cfg).unwrap();
    assert_eq!(sim.diagnostics.grid_cells, 80);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let model = jump_model();
    let cfg = config(0.5, 0.05, 300, &[1.0, 2.0]);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_hjm(&model, &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn factored_update_matches_full_grid() {
    for (model, dx) in [(jump_model(), Some(0.025)), (ho_lee(0.02, 0.01), None), (kernel_model([1.0, 2.0, 3.0]), None)]
    {
        let mut cfg = config(1.0, 0.05, 200, &[1.0, 1.5, 3.0]);
        cfg.dx = dx;
        let fast = simulate_hjm(&model, &cfg).unwrap();
        cfg.full_grid = true;
        let full = simulate_hjm(&model, &cfg).unwrap();
        let (a, b) = (&fast.paths, &full.paths);
        assert_eq!(a.n_paths, b.n_paths);
        for (oa, ob) in a.observations.iter().zip(&b.observations) {
            let pairs = oa.numeraire.iter().zip(&ob.numeraire).chain(oa.discount.iter().zip(&ob.discount));
            let pairs = pairs.chain(oa.spreads.iter().flatten().zip(ob.spreads.iter().flatten()));
            for (x, y) in pairs {
                assert!((x - y).abs() <= 1e-12 * y.abs(), "{x} vs {y}");
            }
        }
        let (ca, cb) = (fast.diagnostics.consistency, full.diagnostics.consistency);
        assert!((ca.at_nodes - cb.at_nodes).abs() <= 1e-12 && (ca.over_step - cb.over_step).abs() <= 1e-12);
    }
}

#[test]
fn observation_times_between_steps_get_their_own_nodes() {
    // dt = 1/365 does not divide 0.5; the half-cell grid does.
    let mut model = ho_lee(0.0, 0.0);
    model.y_mode = YMode::None;
    let mut cfg = config(1.0, 1.0 / 365.0, 2, &[1.0, 2.0]);
    cfg.dx = Some(1.0 / 730.0);
    let sim = simulate_hjm(&model, &cfg).unwrap();
    let disc = &model.curves.discount;
    for obs in &sim.paths.observations {
        let t = obs.time;
        assert!((obs.numeraire[0] - 1.0 / disc.discount(t).unwrap()).abs() < 1e-12, "t {t}");
        for (j, &mt) in obs.maturities.iter().enumerate() {
            let expect = disc.discount(mt).unwrap() / disc.discount(t).unwrap();
            assert!((obs.discount(0, j) - expect).abs() < 1e-13, "t {t} T {mt}");
        }
    }

    let model = jump_model();
    let mut cfg = config(1.0, 0.06, 50, &[1.0, 2.0]);
    cfg.dx = Some(0.02);
    cfg.observation_times = vec![0.5, 1.0];
    let fast = simulate_hjm(&model, &cfg).unwrap();
    cfg.full_grid = true;
    let full = simulate_hjm(&model, &cfg).unwrap();
    for (oa, ob) in fast.paths.observations.iter().zip(&full.paths.observations) {
        for (x, y) in oa.discount.iter().zip(&ob.discount).chain(oa.numeraire.iter().zip(&ob.numeraire)) {
            assert!((x - y).abs() <= 1e-12 * y.abs(), "{x} vs {y}");
        }
    }
}
