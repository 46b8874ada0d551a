mod common;

use common::cp_oracle;
use fdp_core::auditing::*;
use fdp_core::curves::{delta_of_eps, TradeoffCurve};
use fdp_core::guarantees::sgm_baseline;
use fdp_core::mechanisms::{Dataset, MechanismConfig, Mode, NeighboringPair};
use fdp_core::{Error, Result};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn mech(mode: Mode, n_records: usize, dim: usize, q: f64, sigma: f64) -> MechanismConfig {
    MechanismConfig { mode, dataset_size: n_records, q, clip: 0.1, sigma, dim }
}

fn audit(m: MechanismConfig, trials: u64, seed: u64, claim: &TradeoffCurve) -> AuditReport {
    let pair = NeighboringPair::canary(m.dataset_size, m.dim, m.clip).unwrap();
    run_audit(&AuditConfig::new(m, trials, seed), &pair, claim).unwrap()
}

#[test]
fn clopper_pearson_examples() {
    assert_eq!(clopper_pearson(0, 100, 0.95).unwrap().0, 0.0);
    assert_eq!(clopper_pearson(100, 100, 0.95).unwrap().1, 1.0);
    let (lo, hi) = clopper_pearson(5, 10, 0.95).unwrap();
    let (olo, ohi) = cp_oracle(5, 10, 0.95);
    assert!((lo - olo).abs() < 1e-5 && (hi - ohi).abs() < 1e-5, "({lo}, {hi}) vs ({olo}, {ohi})");
    // closed forms at the boundary: 1 - (a/2)^(1/n)
    let (_, hi) = clopper_pearson(0, 10, 0.95).unwrap();
    assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-12);
    assert!(clopper_pearson(3, 2, 0.95).is_err());
    assert!(clopper_pearson(0, 0, 0.95).is_err());
    assert!(clopper_pearson(1, 2, 1.0).is_err());
}

#[test]
fn clopper_pearson_brackets_estimate_and_narrows() {
    for (x, n) in [(0u64, 50u64), (7, 50), (25, 50), (50, 50), (300, 10_000)] {
        let (lo, hi) = clopper_pearson(x, n, 0.95).unwrap();
        let p = x as f64 / n as f64;
        assert!(lo <= p && p <= hi);
        let (lo99, hi99) = clopper_pearson(x, n, 0.99).unwrap();
        assert!(lo99 <= lo && hi99 >= hi);
    }
    let w1 = clopper_pearson(250, 1000, 0.95).unwrap();
    let w4 = clopper_pearson(1000, 4000, 0.95).unwrap();
    assert!(w4.1 - w4.0 < w1.1 - w1.0);
}

#[test]
fn audited_epsilon_examples() {
    assert_eq!(audited_epsilon(0.5, 0.5, 0.0).unwrap().value, 0.0);
    let e = audited_epsilon(0.1, 0.1, 0.0).unwrap();
    assert!((e.value - 9f64.ln()).abs() < 1e-14);
    assert!(!e.saturated);
    let e = audited_epsilon(0.1, 0.0, 0.0).unwrap();
    assert!(e.value.is_infinite() && e.saturated);
    assert!(audited_epsilon(1.2, 0.1, 0.0).is_err());
    let s = serde_json::to_string(&e).unwrap();
    assert!(s.contains("\"inf\""));
}

#[test]
fn audited_delta_examples() {
    assert_eq!(audited_delta(0.5, 0.5, 0.0).unwrap(), 0.0);
    for eps in [0.0, 1.0, 30.0, f64::INFINITY] {
        assert_eq!(audited_delta(0.0, 0.0, eps).unwrap(), 1.0);
    }
    assert!((audited_delta(0.2, 0.3, 0.0).unwrap() - 0.5).abs() < 1e-15);
    assert!(audited_delta(0.2, 0.3, -1.0).is_err());
}

#[test]
fn verdict_examples() {
    let claim = ClaimedPair { eps: 1.0, delta: 1e-5 };
    assert!(!verdict(0.0, 0.0, claim));
    let claim = ClaimedPair { eps: 0.0, delta: 0.05 };
    assert!(verdict(0.0, 0.3, claim));
    assert!(!verdict(0.0, 0.05, claim));
    assert!(!verdict(1.0, 0.0, ClaimedPair { eps: 1.0, delta: 0.0 }));
}

struct Constant;

impl Mechanism for Constant {
    fn release(&self, data: &Dataset, _seed: u64) -> Result<Vec<f64>> {
        Ok(vec![0.0; data.dim])
    }
}

#[test]
fn constant_mechanism_carries_no_signal() {
    let m = mech(Mode::Easgm, 4, 100, 1.0, 10.0);
    let pair = NeighboringPair::canary(4, 100, 0.1).unwrap();
    let dist = MixtureDistinguisher::new(&m, &pair, 0.05).unwrap();
    let t = 10_000;
    let counts = run_trials(&Constant, &dist, &pair, t, 5).unwrap();
    let cfg = AuditConfig::new(m, t, 5);
    let claim = ClaimedPair::from_curve(&sgm_baseline(1.0, 10.0).unwrap(), cfg.target).unwrap();
    let meta = AuditMetadata { seed: 5, distinguisher: "constant".into(), branch: None, dataset: "canary".into() };
    let r = summarize(&cfg, counts, claim, meta).unwrap();
    // the guess ignores the challenge, so the two error rates are complementary
    let se = (0.25 / counts.trials_d() as f64 + 0.25 / counts.trials_d_prime() as f64).sqrt();
    assert!((r.alpha_hat + r.beta_hat - 1.0).abs() < 3.0 * se, "{} + {}", r.alpha_hat, r.beta_hat);
    assert_eq!(r.epsilon_lower.value, 0.0);
    assert_eq!(r.delta_lower, 0.0);
    assert!(!r.violation);
}

#[test]
fn normality_test_is_calibrated() {
    let reps = 10_000;
    let mut rng = StdRng::seed_from_u64(17);
    for (dim, level) in [(1usize, 0.05), (2, 0.05), (100, 0.05), (100, 0.2)] {
        let test = NormalityTest::new(dim, level);
        let mut u = vec![0.0; dim];
        u[dim - 1] = 1.0;
        for dir in [None, Some(u.as_slice())] {
            let fails = (0..reps)
                .filter(|_| {
                    let y: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    !test.passes(&y, dir)
                })
                .count();
            let rate = fails as f64 / reps as f64;
            let se = (level * (1.0 - level) / reps as f64).sqrt();
            assert!((rate - level).abs() < 3.0 * se, "dim {dim} level {level}: {rate}");
        }
    }
}

#[test]
fn standardizations_separate_the_hypotheses() {
    let m = mech(Mode::Easgm, 4, 100, 1.0, 10.0);
    let pair = NeighboringPair::canary(4, 100, 0.1).unwrap();
    let dist = MixtureDistinguisher::new(&m, &pair, 0.05).unwrap();
    assert_eq!(dist.component_count(), 1);
    let reps = 10_000u64;
    let (mut pass_p, mut pass_q) = (0, 0);
    for r in 0..reps {
        let out = m.release(&pair.d, fdp_core::mechanisms::trial_seed(99, r)).unwrap();
        let c = dist.checks(&out)[0];
        pass_p += c.0 as u64;
        pass_q += c.1 as u64;
    }
    let rate_p = pass_p as f64 / reps as f64;
    let se = (0.05 * 0.95 / reps as f64).sqrt();
    assert!((rate_p - 0.95).abs() < 3.0 * se, "{rate_p}");
    let rate_q = pass_q as f64 / reps as f64;
    assert!(rate_q < rate_p - 10.0 * se, "swapped standardization passes at {rate_q}");
}

#[test]
fn report_is_consistent() {
    let claim = sgm_baseline(1.0, 10.0).unwrap();
    let r = audit(mech(Mode::Easgm, 4, 20, 1.0, 10.0), 2000, 1, &claim);
    let c = r.counts;
    assert_eq!(c.total(), 2000);
    assert_eq!(r.alpha_hat, c.type1_incorrect as f64 / c.trials_d() as f64);
    assert_eq!(r.beta_hat, c.type2_incorrect as f64 / c.trials_d_prime() as f64);
    assert!(r.alpha_ci.0 <= r.alpha_hat && r.alpha_hat <= r.alpha_ci.1);
    assert!(r.beta_ci.0 <= r.beta_hat && r.beta_hat <= r.beta_ci.1);
    assert!(r.epsilon_lower.value >= 0.0 && r.delta_lower >= 0.0);
    assert_eq!(r.violation, r.epsilon_lower.value > r.claimed.eps || r.delta_lower > r.claimed.delta);
    assert_eq!(r.claimed.delta, 1e-5);
    let v = serde_json::to_value(&r).unwrap();
    for key in ["counts", "alpha_hat", "beta_ci", "epsilon_lower", "delta_lower", "claimed", "violation", "metadata"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["counts"]["type1_correct"], c.type1_correct);
    let header = AuditReport::csv_header().split(',').count();
    assert_eq!(r.csv_row().split(',').count(), header);
}

#[test]
fn intervals_shrink_with_more_trials() {
    let claim = sgm_baseline(1.0, 10.0).unwrap();
    let m = mech(Mode::Easgm, 4, 20, 1.0, 10.0);
    let a = audit(m.clone(), 10_000, 6, &claim);
    let b = audit(m, 40_000, 6, &claim);
    assert!(b.alpha_ci.1 - b.alpha_ci.0 < a.alpha_ci.1 - a.alpha_ci.0);
    assert!(b.beta_ci.1 - b.beta_ci.0 < a.beta_ci.1 - a.beta_ci.0);
}

#[test]
fn audits_are_deterministic_and_thread_independent() {
    let claim = sgm_baseline(0.5, 10.0).unwrap();
    let m = mech(Mode::Asgm, 4, 30, 0.5, 10.0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| audit(m.clone(), 3000, 12, &claim))
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, run(8));
    assert_ne!(a.counts, audit(m.clone(), 3000, 13, &claim).counts);
}

#[test]
fn leakage_grows_with_dimension() {
    let claim = sgm_baseline(1.0, 10.0).unwrap();
    let cfg_delta = |n: usize| {
        let m = mech(Mode::Easgm, 4, n, 1.0, 10.0);
        let pair = NeighboringPair::canary(4, n, 0.1).unwrap();
        let mut cfg = AuditConfig::new(m, 10_000, 21);
        cfg.target = AuditTarget::Epsilon(0.0);
        let r = run_audit(&cfg, &pair, &claim).unwrap();
        let slack = (r.alpha_ci.1 - r.alpha_hat) + (r.beta_ci.1 - r.beta_hat);
        (r.delta_lower, slack, r)
    };
    let (d2, s2, _) = cfg_delta(2);
    let (d10, s10, _) = cfg_delta(10);
    let (d100, _, r100) = cfg_delta(100);
    assert!(d10 >= d2 - s2, "{d2} {d10}");
    assert!(d100 >= d10 - s10, "{d10} {d100}");
    // at ε = 0 the SGM claim is δ(0) = 2Φ(1/20) - 1
    let claimed = delta_of_eps(&claim, 0.0).unwrap();
    assert!((r100.claimed.delta - claimed).abs() < 1e-15);
    assert!(r100.delta_lower > claimed && r100.violation);
}

#[test]
fn asgm_leakage_grows_with_sampling_rate() {
    let mut prev: Option<(f64, f64)> = None;
    for q in [0.5, 0.7, 0.9] {
        let claim = sgm_baseline(q, 10.0).unwrap();
        let m = mech(Mode::Asgm, 4, 100, q, 10.0);
        let pair = NeighboringPair::canary(4, 100, 0.1).unwrap();
        let mut cfg = AuditConfig::new(m, 10_000, 31);
        cfg.target = AuditTarget::Epsilon(0.0);
        let r = run_audit(&cfg, &pair, &claim).unwrap();
        let slack = (r.alpha_ci.1 - r.alpha_hat) + (r.beta_ci.1 - r.beta_hat);
        if let Some((d, s)) = prev {
            assert!(r.delta_lower >= d - s.max(slack), "q {q}: {} < {d}", r.delta_lower);
        }
        prev = Some((r.delta_lower, slack));
    }
}

struct Failing;

impl Mechanism for Failing {
    fn release(&self, _data: &Dataset, seed: u64) -> Result<Vec<f64>> {
        Err(Error::Numerical(format!("bad seed {seed}")))
    }
}

#[test]
fn mechanism_errors_carry_trial_index() {
    let m = mech(Mode::Easgm, 2, 3, 1.0, 1.0);
    let pair = NeighboringPair::canary(2, 3, 0.1).unwrap();
    let dist = MixtureDistinguisher::new(&m, &pair, 0.05).unwrap();
    let err = run_trials(&Failing, &dist, &pair, 1, 0).unwrap_err();
    assert!(matches!(&err, Error::Numerical(msg) if msg.starts_with("trial 0:")), "{err}");
}

#[test]
fn configuration_is_validated() {
    let claim = sgm_baseline(1.0, 10.0).unwrap();
    let m = mech(Mode::Easgm, 4, 10, 1.0, 10.0);
    let pair = NeighboringPair::canary(4, 10, 0.1).unwrap();
    let err = run_audit(&AuditConfig::new(m.clone(), 50, 0), &pair, &claim).unwrap_err();
    assert!(matches!(&err, Error::InvalidParameter(msg) if msg.contains("100")));
    let mut cfg = AuditConfig::new(m.clone(), 100, 0);
    cfg.confidence = 1.0;
    assert!(run_audit(&cfg, &pair, &claim).is_err());
    let other = NeighboringPair::canary(5, 10, 0.1).unwrap();
    assert!(matches!(run_audit(&AuditConfig::new(m, 100, 0), &other, &claim), Err(Error::InvalidInput(_))));
    let big = mech(Mode::Easgm, MAX_AUDIT_N + 1, 2, 0.5, 1.0);
    let pair = NeighboringPair::canary(MAX_AUDIT_N + 1, 2, 0.1).unwrap();
    assert!(matches!(MixtureDistinguisher::new(&big, &pair, 0.05), Err(Error::Capacity(_))));
}

#[test]
fn feasgm_reports_record_branch() {
    let claim = sgm_baseline(0.5, 10.0).unwrap();
    let r = audit(mech(Mode::Feasgm, 4, 10, 0.5, 10.0), 200, 2, &claim);
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["metadata"]["branch"], "sgm-branch");
    assert!(r.metadata.dataset.contains("4 records"));
}
