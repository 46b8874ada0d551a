#![allow(clippy::excessive_precision)]

mod common;

use common::{curve_se, grid};
use fdp_core::curves::*;
use fdp_core::guarantees::*;
use fdp_core::mechanisms::Mode;
use fdp_core::Error;

fn budget(samples: usize) -> Budget {
    Budget { grid: 501, samples, seed: 3, ..Budget::default() }
}

fn request(mode: Mode, n_records: usize, dim: usize, q: f64, sigma: f64) -> GuaranteeRequest {
    GuaranteeRequest { mode, dataset_size: n_records, dim, q, sigma, rounds: 1, budget: budget(200_000) }
}

/// `lo(α) ≤ hi(α)` at every grid point up to three combined MC standard errors.
fn assert_below(lo: &TradeoffCurve, hi: &TradeoffCurve, m: usize, what: &str) {
    for a in grid(501) {
        let tol = 3.0 * curve_se(lo, a, m).hypot(curve_se(hi, a, m)) + 1e-12;
        assert!(lo.eval(a) <= hi.eval(a) + tol, "{what}: alpha {a}: {} > {}", lo.eval(a), hi.eval(a));
    }
}

fn assert_valid(c: &TradeoffCurve) {
    assert!(c.is_non_increasing(1e-12));
    for p in c.points() {
        assert!(p[1] >= 0.0 && p[1] <= 1.0 - p[0] + 1e-12);
    }
}

#[test]
fn baseline_examples() {
    let id = sgm_baseline(0.0, 10.0).unwrap();
    let g = sgm_baseline(1.0, 4.0).unwrap();
    let g_ref = gdp_curve(0.25).unwrap();
    for a in grid(101) {
        assert!((id.eval(a) - (1.0 - a)).abs() < 1e-12);
        assert!((g.eval(a) - g_ref.eval(a)).abs() < 1e-12);
    }
    // 0.5 Φ(-0.1) + 0.25 from a 40-digit reference
    assert!((sgm_baseline(0.5, 10.0).unwrap().eval(0.5) - 0.480_086_081_361_485_51).abs() < 1e-9);
    assert!(sgm_baseline(1.2, 1.0).is_err());
    assert!(sgm_baseline(0.5, 0.0).is_err());
}

#[test]
fn easgm_upper_single_coordinate_is_identity() {
    let b = easgm_upper(4, 1, &budget(100_000)).unwrap();
    assert_eq!(b.estimator, Estimator::ClosedForm);
    for a in grid(101) {
        assert!((b.curve.eval(a) - (1.0 - a)).abs() < 1e-12);
    }
}

#[test]
fn easgm_upper_lies_below_sgm_claim() {
    let m = 1_000_000;
    let b = easgm_upper(4, 100, &budget(m)).unwrap();
    assert_eq!(b.estimator, Estimator::Mc);
    let v = b.curve.eval(0.5);
    let claim = sgm_baseline(0.05, 10.0).unwrap().eval(0.5);
    assert!(v + 3.0 * curve_se(&b.curve, 0.5, m) < claim, "{v} vs {claim}");
    assert_valid(&b.curve);
}

#[test]
fn easgm_upper_decreases_in_dimension() {
    let m = 400_000;
    let curves: Vec<TradeoffCurve> =
        [2usize, 10, 50, 200].iter().map(|&n| easgm_upper(4, n, &budget(m)).unwrap().curve).collect();
    for w in curves.windows(2) {
        assert_below(&w[1], &w[0], m, "n-monotonicity");
    }
}

#[test]
fn easgm_upper_increases_in_dataset_size() {
    let m = 400_000;
    let small = easgm_upper(3, 50, &budget(m)).unwrap().curve;
    let large = easgm_upper(10, 50, &budget(m)).unwrap().curve;
    assert_below(&small, &large, m, "N-monotonicity");
}

#[test]
fn asgm_upper_examples() {
    let b = asgm_upper(4, 0.0, 50, &budget(100_000)).unwrap();
    assert_eq!(b.estimator, Estimator::ClosedForm);
    for a in grid(101) {
        assert!((b.curve.eval(a) - (1.0 - a)).abs() < 1e-12);
    }
    let m = 400_000;
    let mut prev: Option<TradeoffCurve> = None;
    for q in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let c = asgm_upper(4, q, 30, &budget(m)).unwrap().curve;
        assert_valid(&c);
        if let Some(p) = &prev {
            assert_below(&c, p, m, "q-monotonicity");
        }
        prev = Some(c);
    }
    let lo = asgm_upper(4, 0.5, 100, &budget(m)).unwrap().curve;
    let hi = asgm_upper(4, 0.5, 10, &budget(m)).unwrap().curve;
    assert_below(&lo, &hi, m, "asgm n-monotonicity");
}

#[test]
fn asgm_upper_approaches_scaled_identity() {
    let (n, q) = (4, 0.7);
    let c = asgm_upper(n, q, 2000, &budget(1_000_000)).unwrap().curve;
    let w = 1.0 - q + q * (1.0f64 - q).powi(n as i32);
    // every finite product has f(0) = 1, so the limit is pointwise on (0, 1]
    for a in grid(501).into_iter().skip(1) {
        assert!((c.eval(a) - w * (1.0 - a)).abs() <= 0.01, "alpha {a}");
    }
}

#[test]
fn feasgm_examples() {
    let b = budget(200_000);
    let (bound, branch) = feasgm_upper(4, 0.5, 10.0, 20, &b).unwrap();
    assert_eq!(branch, Branch::Sgm);
    let base = sgm_baseline(0.5, 10.0).unwrap();
    for a in grid(101) {
        assert!((bound.curve.eval(a) - base.eval(a)).abs() < 1e-12);
    }
    let (bound, branch) = feasgm_upper(3, 0.5, 10.0, 20, &b).unwrap();
    assert_eq!(branch, Branch::Easgm);
    let want =
        product_mc(&ProductPair::identical(GaussianPair::new(0.0, 0.5).unwrap(), 19), &grid(501), b.samples, b.seed)
            .unwrap();
    assert_eq!(bound.curve.points(), want.points());
    // N = 9, q = 0.1: floors 0 and 1 differ but the divisor is undefined
    assert!(matches!(feasgm_upper(9, 0.1, 10.0, 20, &b), Err(Error::InvalidParameter(_))));
}

#[test]
fn feasgm_branch_matches_integer_floors() {
    for n in 1..=50u64 {
        for (num, den) in [(1u64, 10u64), (1, 4), (1, 2), (9, 10)] {
            let q = num as f64 / den as f64;
            let same = n * num / den == (n + 1) * num / den;
            let want = if same { Branch::Sgm } else { Branch::Easgm };
            assert_eq!(feasgm_branch(n as usize, q), want, "N={n} q={q}");
        }
    }
}

#[test]
fn per_pair_full_sampling_has_one_component() {
    let r = request(Mode::Easgm, 4, 10, 1.0, 2.0);
    let env = per_pair_envelope(&r, 1.0).unwrap();
    assert_eq!(env.components().len(), 1);
    let c = &env.components()[0];
    assert_eq!(c.weight, 1.0);
    let (last, copies) = *c.pair.factors().last().unwrap();
    assert_eq!(copies, 1);
    assert!((last.mu - 2.0 * 4.0 / (5.0 * 2.0)).abs() < 1e-15);
    assert!((last.sigma - 0.8).abs() < 1e-15);
    let res = per_pair_guarantee(&r).unwrap();
    assert!(res.tight);
    assert_eq!(res.estimator, Estimator::Mc);
}

#[test]
fn per_pair_easgm_and_asgm_coincide_at_full_sampling() {
    let m = 400_000;
    let mut re = request(Mode::Easgm, 4, 20, 1.0, 2.0);
    re.budget = budget(m);
    let mut ra = re.clone();
    ra.mode = Mode::Asgm;
    let e = per_pair_guarantee(&re).unwrap().curve;
    let a = per_pair_guarantee(&ra).unwrap().curve;
    assert_eq!(e.points(), a.points());
}

#[test]
fn per_pair_lies_below_upper_bound() {
    let m = 400_000;
    for (mode, sigma) in [(Mode::Easgm, 2.0), (Mode::Easgm, 10.0), (Mode::Asgm, 2.0), (Mode::Feasgm, 2.0)] {
        let n_records = if mode == Mode::Feasgm { 3 } else { 4 };
        let mut r = request(mode, n_records, 20, 0.5, sigma);
        r.budget = budget(m);
        let pp = per_pair_guarantee(&r).unwrap();
        let up = upper_guarantee(&r).unwrap();
        assert_valid(&pp.curve);
        assert_below(&pp.curve, &up.curve, m, &format!("{mode:?} sigma {sigma}"));
    }
}

#[test]
fn larger_shifts_give_weaker_guarantees() {
    let m = 400_000;
    let mut r = request(Mode::Easgm, 4, 10, 0.5, 1.0);
    r.budget = budget(m);
    let full = envelope_mc(&per_pair_envelope(&r, 1.0).unwrap(), &Threshold::Auto, m, 1).unwrap();
    let half = envelope_mc(&per_pair_envelope(&r, 0.5).unwrap(), &Threshold::Auto, m, 1).unwrap();
    assert_below(&full, &half, m, "shift order");
}

#[test]
fn per_pair_special_cases() {
    let r = request(Mode::Sgm, 4, 10, 0.5, 10.0);
    let res = per_pair_guarantee(&r).unwrap();
    assert_eq!(res.estimator, Estimator::ClosedForm);
    assert!((res.curve.eval(0.5) - 0.480_086_081_361_485_51).abs() < 1e-9);

    let r = request(Mode::Easgm, 13, 10, 0.5, 10.0);
    assert!(matches!(per_pair_guarantee(&r), Err(Error::Capacity(_))));

    let r = request(Mode::Easgm, 4, 10, 0.0, 10.0);
    let res = per_pair_guarantee(&r).unwrap();
    assert!(!res.warnings.is_empty());
    assert!((res.curve.eval(0.3) - 0.7).abs() < 1e-12);

    let r = request(Mode::Feasgm, 4, 10, 0.5, 10.0);
    let res = per_pair_guarantee(&r).unwrap();
    assert_eq!(res.branch, Some(Branch::Sgm));
    assert_eq!(res.estimator, Estimator::ClosedForm);

    let r = request(Mode::Asgm, 3, 5, 0.5, 1.0);
    let env = per_pair_envelope(&r, 1.0).unwrap();
    let total: f64 = env.components().iter().map(|c| c.weight).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(env.components().len(), 8);
}

#[test]
fn multi_round_single_round_is_clt_envelope() {
    let mut r = request(Mode::Easgm, 4, 200, 0.5, 10.0);
    r.budget.grid = 1001;
    let res = multi_round_upper(&r).unwrap();
    assert_eq!(res.estimator, Estimator::Clt);
    let env = CltEnvelope::new(0.8, 199).unwrap();
    assert_eq!(res.diagnostics.mu, Some(env.mu));
    assert_eq!(res.diagnostics.gamma, Some(env.gamma));
    assert_eq!(res.curve, env.upper_curve(&grid(1001)).unwrap());
}

#[test]
fn multi_round_mean_parameter_scales_with_root_rounds() {
    let mut r = request(Mode::Easgm, 4, 200, 0.5, 10.0);
    let one = multi_round_upper(&r).unwrap().diagnostics.mu.unwrap();
    r.rounds = 4;
    let four = multi_round_upper(&r).unwrap().diagnostics.mu.unwrap();
    assert!((four / one - 2.0).abs() < 2e-6);
}

#[test]
fn multi_round_rejections() {
    let mut r = request(Mode::Asgm, 4, 20, 0.5, 10.0);
    r.rounds = 3;
    assert!(matches!(multi_round_upper(&r), Err(Error::Unsupported(_))));
    r.mode = Mode::Sgm;
    assert!(matches!(multi_round_upper(&r), Err(Error::Unsupported(_))));
    r.mode = Mode::Feasgm;
    assert!(matches!(multi_round_upper(&r), Err(Error::Unsupported(_))));
    r.rounds = 0;
    assert!(matches!(multi_round_upper(&r), Err(Error::InvalidParameter(_))));
    let mut r = request(Mode::Easgm, 4, 2, 0.5, 10.0);
    assert!(matches!(multi_round_upper(&r), Err(Error::AssumptionViolated(_))));
    r.dim = 1;
    assert_eq!(multi_round_upper(&r).unwrap().estimator, Estimator::ClosedForm);
}

#[test]
fn multi_round_feasgm_is_weaker_than_sgm_composition() {
    let (n_records, q, sigma, dim, rounds) = (140_199usize, 0.005, 10.0f64, 26_010usize, 200u64);
    let mut r = request(Mode::Feasgm, n_records, dim, q, sigma);
    r.rounds = rounds;
    let res = multi_round_upper(&r).unwrap();
    assert_eq!(res.branch, Some(Branch::Easgm));
    let mu_sgm = q * (rounds as f64 * ((1.0 / (sigma * sigma)).exp() - 1.0)).sqrt();
    let reference = gdp_curve(mu_sgm).unwrap();
    assert!(grid(501).iter().any(|&a| res.curve.eval(a) < reference.eval(a)));
}

#[test]
fn clt_switchover_selects_estimator() {
    let mut b = budget(100_000);
    b.clt_switchover = 50;
    assert_eq!(easgm_upper(4, 51, &b).unwrap().estimator, Estimator::Mc);
    let clt = easgm_upper(4, 52, &b).unwrap();
    assert_eq!(clt.estimator, Estimator::Clt);
    assert!(clt.diagnostics.gamma.is_some());
    assert!(clt.curve.is_convex(1e-9));
}

#[test]
fn results_serialize_with_documented_fields() {
    let r = request(Mode::Feasgm, 4, 10, 0.5, 10.0);
    let v = serde_json::to_value(upper_guarantee(&r).unwrap()).unwrap();
    assert_eq!(v["branch"], "sgm-branch");
    assert_eq!(v["estimator"], "closed-form");
    assert!(v["diagnostics"].get("mu").is_some());
    assert_eq!(v["curve"]["kind"], "grid");
    let r = request(Mode::Easgm, 4, 10, 0.5, 10.0);
    let v = serde_json::to_value(upper_guarantee(&r).unwrap()).unwrap();
    assert_eq!(v["estimator"], "mc");
    assert_eq!(v["diagnostics"]["samples"], 200_000);
}

#[test]
fn guarantees_are_deterministic() {
    let r = request(Mode::Asgm, 3, 10, 0.4, 2.0);
    assert_eq!(per_pair_guarantee(&r).unwrap(), per_pair_guarantee(&r).unwrap());
    assert_eq!(upper_guarantee(&r).unwrap(), upper_guarantee(&r).unwrap());
}
