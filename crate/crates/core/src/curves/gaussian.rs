use super::{gdp_curve, identity_curve, TradeoffCurve};
use crate::error::{check_prob, Error, Result};
use crate::special::{interval_prob, norm_cdf, norm_isf};

/// The pair `(N(0, 1), N(μ, σ²))` with `σ ∈ (0, 1]` and `μ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPair {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianPair {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::param(format!("mu must be finite and non-negative, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::param(format!("sigma must lie in (0, 1], got {sigma}")));
        }
        Ok(GaussianPair { mu, sigma })
    }

    pub fn is_identity(&self) -> bool {
        self.mu == 0.0 && self.sigma == 1.0
    }

    /// Log-likelihood ratio `log q(x) - log p(x)`.
    pub fn llr(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        -self.sigma.ln() - 0.5 * z * z + 0.5 * x * x
    }

    pub fn tradeoff(&self, alpha: f64) -> Result<f64> {
        np_gaussian_pair(self.mu, self.sigma, alpha)
    }
}

/// Product of Gaussian pairs, stored as `(factor, multiplicity)` runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProductPair {
    factors: Vec<(GaussianPair, u64)>,
}

impl ProductPair {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn identical(pair: GaussianPair, copies: u64) -> Self {
        let mut p = Self::new();
        p.push(pair, copies);
        p
    }

    /// Append `copies` copies of `pair`, merging with an equal trailing factor.
    pub fn push(&mut self, pair: GaussianPair, copies: u64) -> &mut Self {
        if copies == 0 {
            return self;
        }
        match self.factors.iter_mut().find(|(f, _)| *f == pair) {
            Some((_, c)) => *c += copies,
            None => self.factors.push((pair, copies)),
        }
        self
    }

    pub fn factors(&self) -> &[(GaussianPair, u64)] {
        &self.factors
    }

    pub fn len(&self) -> u64 {
        self.factors.iter().map(|(_, c)| c).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact trade-off curve when every factor has unit variance.
    pub fn closed_form(&self) -> Option<TradeoffCurve> {
        let active: Vec<_> = self.factors.iter().filter(|(f, _)| !f.is_identity()).collect();
        if active.is_empty() {
            return Some(identity_curve());
        }
        if active.iter().all(|(f, _)| f.sigma == 1.0) {
            let mu2: f64 = active.iter().map(|(f, c)| f.mu * f.mu * *c as f64).sum();
            return gdp_curve(mu2.sqrt()).ok();
        }
        None
    }
}

/// Exact trade-off `T(N(0,1), N(μ,σ²))(α)` via the Neyman-Pearson interval test.
///
/// For `σ < 1` the most powerful test rejects inside an interval centred at
/// `μ / (1 - σ²)`; its half-width is found by bisection to `|Δα| ≤ 1e-12`.
pub fn np_gaussian_pair(mu: f64, sigma: f64, alpha: f64) -> Result<f64> {
    let pair = GaussianPair::new(mu, sigma)?;
    check_prob("alpha", alpha)?;
    if alpha == 0.0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    if pair.sigma == 1.0 {
        return Ok(norm_cdf(norm_isf(alpha) - mu));
    }
    let z = mu / (1.0 - sigma * sigma);
    let size = |t: f64| interval_prob(z - t, z + t);
    let mut hi = 1.0;
    while size(hi) < alpha {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical(format!("no rejection interval of size {alpha}")));
        }
    }
    let mut lo = 0.0;
    let mut t = hi;
    let mut converged = false;
    for _ in 0..300 {
        t = 0.5 * (lo + hi);
        let a = size(t);
        if (a - alpha).abs() <= 1e-12 {
            converged = true;
            break;
        }
        if a < alpha {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= f64::EPSILON * hi {
            converged = (size(hi) - alpha).abs() <= 1e-12 || (size(lo) - alpha).abs() <= 1e-12;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!("interval search did not converge for alpha = {alpha}")));
    }
    let power = interval_prob((z - t - mu) / sigma, (z + t - mu) / sigma);
    Ok((1.0 - power).clamp(0.0, 1.0 - alpha))
}
