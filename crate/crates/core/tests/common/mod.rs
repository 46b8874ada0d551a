//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use fdp_core::curves::TradeoffCurve;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Brute-force Neyman-Pearson oracle for `N(0,1)` vs `N(mu, sigma²)`.
///
/// Draws `m` samples from each side, computes the exact log-likelihood ratio,
/// and evaluates the randomized empirical test of size `alpha`. Returns
/// `(beta_hat, slope)` per alpha, where `slope = e^t` is the magnitude of the
/// trade-off function's slope at the empirical threshold `t`.
pub fn np_oracle(mu: f64, sigma: f64, alphas: &[f64], m: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let llr = |x: f64| -sigma.ln() - (x - mu) * (x - mu) / (2.0 * sigma * sigma) + x * x / 2.0;
    let mut lp: Vec<f64> = (0..m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            llr(z)
        })
        .collect();
    let mut lq: Vec<f64> = (0..m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            llr(mu + sigma * z)
        })
        .collect();
    lp.sort_by(|a, b| b.partial_cmp(a).unwrap());
    lq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mf = m as f64;
    alphas
        .iter()
        .map(|&a| {
            let k = a * mf;
            if k >= mf {
                return (0.0, 0.0);
            }
            let t = lp[k.floor() as usize];
            let above = lp.partition_point(|&x| x > t) as f64;
            let ties = lp.partition_point(|&x| x >= t) as f64 - above;
            let gamma = ((k - above) / ties).clamp(0.0, 1.0);
            let below_q = lq.partition_point(|&x| x < t) as f64;
            let ties_q = lq.partition_point(|&x| x <= t) as f64 - below_q;
            let beta = (below_q + (1.0 - gamma) * ties_q) / mf;
            (beta, t.exp())
        })
        .collect()
}

/// Standard error of the oracle's `beta_hat` when the true value is `beta`.
/// Combines the binomial error of both sides through the slope; evaluating
/// the binomial term at the hypothesized `beta` keeps it meaningful in the
/// tails, where `beta_hat` is often exactly 0.
pub fn np_se(beta: f64, slope: f64, alpha: f64, m: usize) -> f64 {
    ((beta * (1.0 - beta) + slope * slope * alpha * (1.0 - alpha)) / m as f64).sqrt()
}

/// Standard error of an MC trade-off curve at `alpha`. Uses the local chord
/// slope to account for threshold estimation on the null side.
pub fn curve_se(curve: &TradeoffCurve, alpha: f64, m: usize) -> f64 {
    let h = 1e-3;
    let (lo, hi) = ((alpha - h).max(0.0), (alpha + h).min(1.0));
    let slope = if hi > lo { (curve.eval(lo) - curve.eval(hi)) / (hi - lo) } else { 0.0 };
    let b = curve.eval(alpha);
    ((b * (1.0 - b) + slope * slope * alpha * (1.0 - alpha)) / m as f64).sqrt()
}

fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// `P(X >= x)` for `X ~ Bin(n, p)` by direct summation.
pub fn binom_upper_tail(x: u64, n: u64, p: f64) -> f64 {
    (x..=n).map(|k| binom_pmf(k, n, p)).sum()
}

/// `P(X <= x)` for `X ~ Bin(n, p)` by direct summation.
pub fn binom_lower_tail(x: u64, n: u64, p: f64) -> f64 {
    (0..=x).map(|k| binom_pmf(k, n, p)).sum()
}

/// Exact Clopper-Pearson bounds located on a `1e-6` grid by searching the
/// binomial tail conditions.
pub fn cp_oracle(x: u64, n: u64, conf: f64) -> (f64, f64) {
    let a = (1.0 - conf) / 2.0;
    const STEPS: u64 = 1_000_000;
    let p = |i: u64| i as f64 / STEPS as f64;
    let lo = if x == 0 {
        0.0
    } else {
        // smallest grid p with P(X >= x) >= a; the tail increases in p
        let (mut l, mut h) = (0u64, STEPS);
        while h - l > 1 {
            let mid = (l + h) / 2;
            if binom_upper_tail(x, n, p(mid)) >= a {
                h = mid;
            } else {
                l = mid;
            }
        }
        p(h)
    };
    let hi = if x == n {
        1.0
    } else {
        // largest grid p with P(X <= x) >= a; the tail decreases in p
        let (mut l, mut h) = (0u64, STEPS);
        while h - l > 1 {
            let mid = (l + h) / 2;
            if binom_lower_tail(x, n, p(mid)) >= a {
                l = mid;
            } else {
                h = mid;
            }
        }
        p(l)
    };
    (lo, hi)
}

/// `Φ` via the complementary error function of `libm`.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Closed-form privacy profile of `G_mu`.
pub fn gdp_delta(mu: f64, eps: f64) -> f64 {
    phi(-eps / mu + mu / 2.0) - eps.exp() * phi(-eps / mu - mu / 2.0)
}

pub fn grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
}
