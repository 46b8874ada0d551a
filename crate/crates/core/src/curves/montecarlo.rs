//! Monte Carlo trade-off curves for Gaussian products and their mixtures.
//!
//! Identical zero-mean factors are collapsed into a single chi-square draw, so
//! the cost of one log-likelihood-ratio sample does not grow with the number
//! of factors.

use super::gaussian::ProductPair;
use super::TradeoffCurve;
use crate::error::{Error, Result};
use crate::rng::{derive, domain, stream};
use crate::special::{norm_cdf, norm_ppf, norm_sf};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

/// Smallest accepted Monte Carlo sample count.
pub const MIN_MC_SAMPLES: usize = 10_000;

enum Term {
    /// `m` copies of `(N(0,1), N(0,σ²))`, summarised by a chi-square draw.
    ZeroMean { log_sigma: f64, slope: f64, sigma2: f64, m: f64, chi: ChiSquared<f64> },
    /// Unit variance, mean `μ`, `m` copies: a single normal draw.
    Shift { mu: f64, m: f64 },
    /// General factor sampled coordinate by coordinate.
    General { mu: f64, sigma: f64, m: u64 },
}

struct LlrSampler {
    terms: Vec<Term>,
}

impl LlrSampler {
    fn new(pair: &ProductPair) -> Self {
        let mut terms = Vec::new();
        for (f, c) in pair.factors() {
            if f.is_identity() {
                continue;
            }
            let m = *c as f64;
            if f.mu == 0.0 {
                let s2 = f.sigma * f.sigma;
                terms.push(Term::ZeroMean {
                    log_sigma: f.sigma.ln(),
                    slope: 0.5 * (1.0 / s2 - 1.0),
                    sigma2: s2,
                    m,
                    chi: ChiSquared::new(m).expect("positive degrees of freedom"),
                });
            } else if f.sigma == 1.0 {
                terms.push(Term::Shift { mu: f.mu, m });
            } else {
                terms.push(Term::General { mu: f.mu, sigma: f.sigma, m: *c });
            }
        }
        LlrSampler { terms }
    }

    fn sample<R: Rng>(&self, rng: &mut R, under_q: bool) -> f64 {
        let mut l = 0.0;
        for t in &self.terms {
            match t {
                Term::ZeroMean { log_sigma, slope, sigma2, m, chi } => {
                    let mut s = chi.sample(rng);
                    if under_q {
                        s *= sigma2;
                    }
                    l += -m * log_sigma - slope * s;
                }
                Term::Shift { mu, m } => {
                    let z: f64 = StandardNormal.sample(rng);
                    let sum = m.sqrt() * z + if under_q { m * mu } else { 0.0 };
                    l += mu * sum - 0.5 * m * mu * mu;
                }
                Term::General { mu, sigma, m } => {
                    for _ in 0..*m {
                        let z: f64 = StandardNormal.sample(rng);
                        let x = if under_q { mu + sigma * z } else { z };
                        let r = (x - mu) / sigma;
                        l += -sigma.ln() - 0.5 * r * r + 0.5 * x * x;
                    }
                }
            }
        }
        l
    }

    fn draw_sorted(&self, samples: usize, seed: u64, under_q: bool) -> Vec<f64> {
        let dom = if under_q { domain::LLR_Q } else { domain::LLR_P };
        let mut v: Vec<f64> =
            (0..samples as u64).into_par_iter().map(|i| self.sample(&mut stream(seed, dom, i), under_q)).collect();
        v.par_sort_unstable_by(f64::total_cmp);
        v
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::param(format!("at least {MIN_MC_SAMPLES} Monte Carlo samples are required, got {samples}")));
    }
    Ok(())
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param("alpha grid is empty"));
    }
    if grid.iter().any(|a| !(0.0..=1.0).contains(a)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("alpha grid must be strictly increasing within [0, 1]"));
    }
    Ok(())
}

/// Type II error of the randomized empirical Neyman-Pearson test of size `alpha`.
pub(crate) fn empirical_beta(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let m = p.len();
    let k = alpha * m as f64;
    let idx = if k >= m as f64 { 0 } else { m - 1 - (k.floor() as usize).min(m - 1) };
    let t = p[idx];
    let lb = p.partition_point(|x| *x < t);
    let ub = p.partition_point(|x| *x <= t);
    let gt = (m - ub) as f64;
    let eq = (ub - lb) as f64;
    let c = ((k - gt) / eq).clamp(0.0, 1.0);
    let q_lt = q.partition_point(|x| *x < t) as f64;
    let q_eq = (q.partition_point(|x| *x <= t) as f64) - q_lt;
    ((q_lt + (1.0 - c) * q_eq) / q.len() as f64).clamp(0.0, 1.0 - alpha)
}

/// Monte Carlo trade-off curve of a Gaussian product, evaluated on `alpha_grid`.
pub fn product_mc(pair: &ProductPair, alpha_grid: &[f64], samples: usize, seed: u64) -> Result<TradeoffCurve> {
    check_samples(samples)?;
    check_grid(alpha_grid)?;
    let sampler = LlrSampler::new(pair);
    let p = sampler.draw_sorted(samples, seed, false);
    let q = sampler.draw_sorted(samples, seed, true);
    Ok(roc_curve(&p, &q, alpha_grid, "product_mc"))
}

/// All pairs here are mutually absolutely continuous, so the size-0 test
/// never rejects and `β(0) = 1` exactly.
pub(crate) fn roc_curve(p: &[f64], q: &[f64], alpha_grid: &[f64], meta: &str) -> TradeoffCurve {
    let mut beta: Vec<f64> = alpha_grid.iter().map(|&a| if a == 0.0 { 1.0 } else { empirical_beta(p, q, a) }).collect();
    for i in 1..beta.len() {
        beta[i] = beta[i].min(beta[i - 1]);
    }
    let pts = alpha_grid.iter().zip(beta).map(|(&a, b)| [a, b]).collect();
    TradeoffCurve::grid_unchecked(pts, meta)
}

/// One weighted term of a mixture envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub pair: ProductPair,
    pub label: String,
}

/// Weighted family of Gaussian product pairs evaluated with a shared
/// log-likelihood-ratio threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixtureEnvelope {
    components: Vec<Component>,
}

impl MixtureEnvelope {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.iter().any(|c| !(c.weight.is_finite() && c.weight >= 0.0)) {
            return Err(Error::param("component weights must be non-negative"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.is_empty() || (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("component weights must sum to 1, got {total}")));
        }
        Ok(MixtureEnvelope { components: components.into_iter().filter(|c| c.weight > 0.0).collect() })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }
}

/// Threshold set for [`envelope_mc`].
#[derive(Debug, Clone, PartialEq)]
pub enum Threshold {
    /// Quantiles of every component's LLR under both hypotheses.
    Auto,
    Explicit(Vec<f64>),
}

enum Law {
    Identity,
    Gaussian(f64),
    Sampled(LlrSampler),
}

impl Law {
    fn of(pair: &ProductPair) -> Law {
        match pair.closed_form().map(|c| c.kind()) {
            Some(super::CurveKind::Identity) => Law::Identity,
            Some(super::CurveKind::Gaussian { mu: 0.0 }) => Law::Identity,
            Some(super::CurveKind::Gaussian { mu }) => Law::Gaussian(mu),
            _ => Law::Sampled(LlrSampler::new(pair)),
        }
    }
}

const AUTO_LEVELS: usize = 2000;
const AUTO_TAIL_LEVELS: usize = 200;

fn quantile_levels(samples: usize) -> Vec<f64> {
    let mut lv: Vec<f64> = (0..AUTO_LEVELS).map(|j| (j as f64 + 0.5) / AUTO_LEVELS as f64).collect();
    let lo = (1.0 / samples as f64).ln();
    let hi = (0.5 / AUTO_LEVELS as f64).ln();
    for j in 0..AUTO_TAIL_LEVELS {
        let u = (lo + (hi - lo) * j as f64 / (AUTO_TAIL_LEVELS - 1) as f64).exp();
        lv.push(u);
        lv.push(1.0 - u);
    }
    lv
}

/// Parametric envelope `(Σ wᵢ αᵢ(t), Σ wᵢ βᵢ(t))` over a shared threshold `t`,
/// returned as a grid curve sorted by α.
///
/// Each test rejects when the component LLR exceeds `t`. Consecutive threshold
/// points are joined linearly, which traces the randomized tests at atoms.
pub fn envelope_mc(env: &MixtureEnvelope, thresholds: &Threshold, samples: usize, seed: u64) -> Result<TradeoffCurve> {
    check_samples(samples)?;
    let laws: Vec<Law> = env.components.iter().map(|c| Law::of(&c.pair)).collect();
    let comp_seed = |i: usize| derive(seed, i as u64);

    let mut ts: Vec<f64> = match thresholds {
        Threshold::Explicit(t) => {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("thresholds must be finite"));
            }
            t.clone()
        }
        Threshold::Auto => {
            let levels = quantile_levels(samples);
            let mut t = vec![0.0];
            for (i, law) in laws.iter().enumerate() {
                match law {
                    Law::Identity => {}
                    Law::Gaussian(mu) => {
                        for &u in &levels {
                            let z = norm_ppf(u);
                            t.push(mu * z - 0.5 * mu * mu);
                            t.push(mu * z + 0.5 * mu * mu);
                        }
                    }
                    Law::Sampled(s) => {
                        for under_q in [false, true] {
                            let v = s.draw_sorted(samples, comp_seed(i), under_q);
                            for &u in &levels {
                                let k = ((u * samples as f64) as usize).min(samples - 1);
                                t.push(v[k]);
                            }
                        }
                    }
                }
            }
            t
        }
    };
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let span = ts.last().copied().unwrap_or(0.0).abs().max(ts.first().copied().unwrap_or(0.0).abs()).max(1.0);
    ts.insert(0, -2.0 * span - 1.0);
    ts.push(2.0 * span + 1.0);

    let mut alpha = vec![0.0; ts.len()];
    let mut beta = vec![0.0; ts.len()];
    for (i, (law, comp)) in laws.iter().zip(&env.components).enumerate() {
        let w = comp.weight;
        match law {
            Law::Identity => {
                for (j, &t) in ts.iter().enumerate() {
                    if 0.0 > t {
                        alpha[j] += w;
                    } else {
                        beta[j] += w;
                    }
                }
            }
            Law::Gaussian(mu) => {
                for (j, &t) in ts.iter().enumerate() {
                    alpha[j] += w * norm_sf((t + 0.5 * mu * mu) / mu);
                    beta[j] += w * norm_cdf((t - 0.5 * mu * mu) / mu);
                }
            }
            Law::Sampled(s) => {
                let p = s.draw_sorted(samples, comp_seed(i), false);
                let q = s.draw_sorted(samples, comp_seed(i), true);
                let m = samples as f64;
                for (j, &t) in ts.iter().enumerate() {
                    alpha[j] += w * (samples - p.partition_point(|x| *x <= t)) as f64 / m;
                    beta[j] += w * q.partition_point(|x| *x <= t) as f64 / m;
                }
            }
        }
    }

    let mut pts: Vec<[f64; 2]> = vec![[0.0, 1.0]];
    for j in (0..ts.len()).rev() {
        let a = alpha[j].clamp(0.0, 1.0);
        let b = beta[j].clamp(0.0, 1.0 - a);
        let last = pts.last_mut().expect("non-empty");
        if a <= last[0] {
            last[1] = last[1].min(b);
        } else {
            pts.push([a, b]);
        }
    }
    let last = pts.last_mut().expect("non-empty");
    if last[0] >= 1.0 {
        last[1] = 0.0;
    } else {
        pts.push([1.0, 0.0]);
    }
    for i in 1..pts.len() {
        pts[i][1] = pts[i][1].min(pts[i - 1][1]);
    }
    Ok(TradeoffCurve::grid_unchecked(pts, "envelope_mc"))
}
