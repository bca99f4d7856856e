use approx::assert_abs_diff_eq;
use multicurve::products::{basis_swap_spread, irs_swap_rate, ois_swap_rate};
use multicurve::termstructure::{
    bootstrap_curve_set, bootstrap_ois, bootstrap_spread_curve, spread_from_rates, DiscountCurve, MarketQuoteSet,
    OisQuote, Schedule, SpreadCurve, SpreadQuote, SpreadQuoteKind, SpreadWarning, Tenor,
};
use multicurve::Error;
use proptest::prelude::*;

fn tenor(d: f64) -> Tenor {
    Tenor::new(d).unwrap()
}

fn ois_set(quotes: &[(f64, f64)], pay: f64) -> MarketQuoteSet {
    MarketQuoteSet {
        ois: quotes.iter().map(|&(maturity, rate)| OisQuote { maturity, rate, tenor: tenor(pay) }).collect(),
        ..Default::default()
    }
}

#[test]
fn single_period_ois_inversion() {
    let curve = bootstrap_ois(&ois_set(&[(1.0, 0.02)], 1.0)).unwrap();
    assert_abs_diff_eq!(curve.discount(1.0).unwrap(), 1.0 / 1.02, epsilon = 1e-15);
    let s = Schedule::new(0.0, 1.0, 1).unwrap();
    assert_abs_diff_eq!(ois_swap_rate(&curve, &s).unwrap(), 0.02, epsilon = 1e-15);
}

#[test]
fn flat_quotes_reprice_and_forward_matches() {
    let r = 0.025;
    let q: Vec<_> = (1..=10).map(|n| (n as f64, r)).collect();
    let curve = bootstrap_ois(&ois_set(&q, 1.0)).unwrap();
    for &(t, rate) in &q {
        let s = Schedule::spanning(0.0, t, 1.0).unwrap();
        assert!((ois_swap_rate(&curve, &s).unwrap() - rate).abs() <= 1e-12);
    }
    // Par rate r at every annual maturity forces B(0,n) = (1+r)^-n.
    for n in 1..=10 {
        assert_abs_diff_eq!(curve.discount(n as f64).unwrap(), (1.0 + r).powi(-n), epsilon = 1e-13);
        assert_abs_diff_eq!(curve.instantaneous_forward(n as f64 - 0.5).unwrap(), (1.0 + r).ln(), epsilon = 1e-10);
    }
}

#[test]
fn forward_integrates_back_to_discount() {
    let curve = bootstrap_ois(&ois_set(&[(0.5, 0.01), (1.0, 0.015), (2.0, 0.02), (5.0, 0.03)], 0.5)).unwrap();
    let n = 5000;
    let h = 5.0 / n as f64;
    let mut integral = 0.0;
    for k in 0..n {
        // Right-continuous piecewise-constant forward: midpoint sampling is exact
        // whenever no pillar falls inside the step.
        integral += curve.instantaneous_forward((k as f64 + 0.5) * h).unwrap() * h;
        let t = (k + 1) as f64 * h;
        assert!(((-integral).exp() - curve.discount(t).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn short_maturity_is_single_period() {
    let curve = bootstrap_ois(&ois_set(&[(0.25, 0.01), (1.0, 0.012)], 1.0)).unwrap();
    assert_abs_diff_eq!(curve.discount(0.25).unwrap(), 1.0 / (1.0 + 0.25 * 0.01), epsilon = 1e-15);
}

#[test]
fn ois_errors() {
    assert!(matches!(bootstrap_ois(&ois_set(&[], 1.0)), Err(Error::EmptyQuotes(_))));
    assert!(matches!(
        bootstrap_ois(&ois_set(&[(2.0, 0.02), (1.0, 0.02)], 1.0)),
        Err(Error::NonIncreasingMaturities { .. })
    ));
    let mut mixed = ois_set(&[(1.0, 0.02), (2.0, 0.02)], 1.0);
    mixed.ois[1].tenor = tenor(0.5);
    assert!(bootstrap_ois(&mixed).is_err());
}

#[test]
fn fra_quotes_map_directly() {
    let disc = DiscountCurve::flat(0.02, &[3.0]).unwrap();
    let d = 0.5;
    let ld = disc.simple_forward(1.0, d).unwrap();
    let fra = |maturity, quote| SpreadQuote { kind: SpreadQuoteKind::Fra, tenor: tenor(d), maturity, quote };
    let built = bootstrap_spread_curve(&disc, &[fra(1.0, ld), fra(2.0, 0.03)], &[]).unwrap();
    assert_abs_diff_eq!(built.curve.spread(1.0).unwrap(), 1.0, epsilon = 1e-15);
    let ld2 = disc.simple_forward(2.0, d).unwrap();
    assert_abs_diff_eq!(built.curve.spread(2.0).unwrap(), spread_from_rates(0.03, ld2, d), epsilon = 1e-15);
    assert!(built.warnings.is_empty());
}

#[test]
fn below_one_spreads_are_flagged() {
    let disc = DiscountCurve::flat(0.02, &[3.0]).unwrap();
    let q = SpreadQuote { kind: SpreadQuoteKind::Fra, tenor: tenor(0.5), maturity: 1.0, quote: 0.0 };
    let built = bootstrap_spread_curve(&disc, &[q], &[]).unwrap();
    assert!(matches!(built.warnings[..], [SpreadWarning::NegativeSpread { .. }]));
    assert!(built.curve.spread(1.0).unwrap() < 1.0);
}

fn synthetic_spread(d: f64) -> SpreadCurve {
    let pillars: Vec<(f64, f64)> =
        (0..=20).map(|k| k as f64 * d).map(|t| (t, 1.0 + 0.002 * d + 0.0004 * t - 0.00002 * t * t)).collect();
    SpreadCurve::from_pillars(tenor(d), &pillars).unwrap()
}

#[test]
fn irs_round_trip_recovers_curve() {
    let disc = bootstrap_ois(&ois_set(&[(1.0, 0.01), (2.0, 0.015), (5.0, 0.02), (12.0, 0.025)], 1.0)).unwrap();
    let d = 0.5;
    let truth = synthetic_spread(d);
    let quotes: Vec<SpreadQuote> = (1..=20)
        .map(|n| {
            let s = Schedule::new(0.0, d, n).unwrap();
            SpreadQuote {
                kind: SpreadQuoteKind::Irs,
                tenor: tenor(d),
                maturity: s.end(),
                quote: irs_swap_rate(&disc, &truth, &s).unwrap(),
            }
        })
        .collect();
    let built = bootstrap_spread_curve(&disc, &quotes, &[]).unwrap();
    for q in &quotes {
        let s = Schedule::spanning(0.0, q.maturity, d).unwrap();
        assert!((irs_swap_rate(&disc, &built.curve, &s).unwrap() - q.quote).abs() <= 1e-12);
    }
    for k in 0..200 {
        let t = k as f64 * 0.0475;
        assert!((built.curve.spread(t).unwrap() - truth.spread(t).unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn basis_swaps_build_from_reference_tenor() {
    let disc = DiscountCurve::flat(0.02, &[6.0]).unwrap();
    let (d3, d6) = (0.25, 0.5);
    let s3 = synthetic_spread(d3);
    let s6 = synthetic_spread(d6);
    let mut set = MarketQuoteSet {
        ois: (1..=6)
            .map(|n| OisQuote {
                maturity: n as f64,
                rate: disc.ois_swap_rate(&Schedule::spanning(0.0, n as f64, 1.0).unwrap()).unwrap(),
                tenor: tenor(1.0),
            })
            .collect(),
        ..Default::default()
    };
    for n in 1..=20 {
        let s = Schedule::new(0.0, d3, n).unwrap();
        set.spread.push(SpreadQuote {
            kind: SpreadQuoteKind::Irs,
            tenor: tenor(d3),
            maturity: s.end(),
            quote: irs_swap_rate(&disc, &s3, &s).unwrap(),
        });
    }
    for n in 1..=10 {
        let l6 = Schedule::new(0.0, d6, n).unwrap();
        let l3 = Schedule::new(0.0, d3, 2 * n).unwrap();
        let k = basis_swap_spread(&disc, &s6, &s3, &l6, &l3, &l3).unwrap();
        set.spread.push(SpreadQuote {
            kind: SpreadQuoteKind::Basis { reference: tenor(d3) },
            tenor: tenor(d6),
            maturity: l6.end(),
            quote: k,
        });
    }
    let (curves, _) = bootstrap_curve_set(&set).unwrap();
    for q in &set.ois {
        assert!((curves.reprice_ois(q).unwrap() - q.rate).abs() <= 1e-12);
    }
    for q in &set.spread {
        assert!((curves.reprice_spread(q).unwrap() - q.quote).abs() <= 1e-12, "{q:?}");
    }
    let built6 = curves.spread(d6).unwrap();
    for k in 0..=9 {
        let t = k as f64 * d6;
        assert!((built6.spread(t).unwrap() - s6.spread(t).unwrap()).abs() <= 1e-10, "t={t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ois_round_trip(rates in proptest::collection::vec(-0.005f64..0.08, 1..12)) {
        let q: Vec<_> = rates.iter().enumerate().map(|(i, &r)| ((i + 1) as f64 * 0.5, r)).collect();
        let curve = bootstrap_ois(&ois_set(&q, 0.5)).unwrap();
        for &(t, r) in &q {
            let s = Schedule::spanning(0.0, t, 0.5).unwrap();
            prop_assert!((ois_swap_rate(&curve, &s).unwrap() - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn spread_identity(l in -0.01f64..0.1, ld in -0.01f64..0.1, d in prop::sample::select(vec![1.0/12.0, 0.25, 0.5, 1.0])) {
        let s = spread_from_rates(l, ld, d);
        prop_assert!((multicurve::termstructure::fra_rate(s, ld, d) - l).abs() <= 1e-14);
        if l >= ld { prop_assert!(s >= 1.0); }
    }

    #[test]
    fn discount_continuous_at_pillars(t in 0.1f64..4.9) {
        let curve = DiscountCurve::from_pillars(&[(1.0, 0.98), (2.0, 0.95), (5.0, 0.86)]).unwrap();
        let eps = 1e-9;
        prop_assert!((curve.discount(t + eps).unwrap() - curve.discount(t).unwrap()).abs() < 1e-9);
    }
}
