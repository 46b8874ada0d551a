//! Mixture-aware distinguisher built from the Gaussian structure of the outputs.
//!
//! Conditioned on the batch size `k` (and, for `D'`, on whether the added
//! record is sampled), each output is Gaussian with a known mean and isotropic
//! scale. A component standardizes the output under each hypothesis and
//! checks whether the result looks like `N(0, I)`. Components vote and the
//! final guess is their weighted majority.

use crate::error::{Error, Result};
use crate::mechanisms::{clip, divisor, MechanismConfig, NeighboringPair};
use crate::special::{chi2_ppf, norm_isf};
use rand::Rng;
use statrs::distribution::{Binomial, Discrete};

/// Largest dataset size the distinguisher enumerates batch sizes for.
pub const MAX_AUDIT_N: usize = 4096;

/// Anything that guesses whether an output came from `D'` (`true`) or `D`.
pub trait Distinguish: Sync {
    fn guess<R: Rng>(&self, output: &[f64], rng: &mut R) -> bool;
}

/// Two-sided Gaussianity check of a standardized vector.
///
/// With a direction `u`, the projection `y·u` gets a z-test and the residual
/// `‖y‖² - (y·u)²` a chi-square test on `n - 1` degrees of freedom; the two are
/// independent under `N(0, I)` and each runs at level `1 - √(1 - a)`, so the
/// joint pass rate is exactly `1 - a`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalityTest {
    z_crit: f64,
    resid: Option<(f64, f64)>,
    full: (f64, f64),
}

impl NormalityTest {
    pub fn new(dim: usize, level: f64) -> Self {
        let n = dim as f64;
        let full = (chi2_ppf(0.5 * level, n), chi2_ppf(1.0 - 0.5 * level, n));
        if dim == 1 {
            return NormalityTest { z_crit: norm_isf(0.5 * level), resid: None, full };
        }
        let split = 1.0 - (1.0 - level).sqrt();
        let resid = Some((chi2_ppf(0.5 * split, n - 1.0), chi2_ppf(1.0 - 0.5 * split, n - 1.0)));
        NormalityTest { z_crit: norm_isf(0.5 * split), resid, full }
    }

    /// Whether `y` passes; `dir` must be a unit vector.
    pub fn passes(&self, y: &[f64], dir: Option<&[f64]>) -> bool {
        let norm2: f64 = y.iter().map(|v| v * v).sum();
        match dir {
            None => norm2 >= self.full.0 && norm2 <= self.full.1,
            Some(u) => {
                let z: f64 = y.iter().zip(u).map(|(a, b)| a * b).sum();
                if z.abs() > self.z_crit {
                    return false;
                }
                match self.resid {
                    None => true,
                    Some((lo, hi)) => {
                        let r = (norm2 - z * z).max(0.0);
                        r >= lo && r <= hi
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Hypothesis {
    mean: Vec<f64>,
    sd: f64,
}

impl Hypothesis {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).map(|(v, m)| (v - m) / self.sd).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    weight: f64,
    p: Hypothesis,
    q: Hypothesis,
    dir: Option<Vec<f64>>,
}

/// Weighted-majority distinguisher over batch-size components.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDistinguisher {
    components: Vec<Component>,
    test: NormalityTest,
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

impl MixtureDistinguisher {
    /// Build the distinguisher for `config` on the neighbouring pair, testing at `level`.
    pub fn new(config: &MechanismConfig, pair: &NeighboringPair, level: f64) -> Result<Self> {
        config.validate()?;
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::param(format!("test level must lie in (0, 1), got {level}")));
        }
        let n = pair.d.len();
        if n != config.dataset_size || pair.d.dim != config.dim {
            return Err(Error::InvalidInput("neighbouring pair does not match the mechanism configuration".into()));
        }
        if n > MAX_AUDIT_N {
            return Err(Error::Capacity(format!("distinguisher supports N <= {MAX_AUDIT_N}, got {n}")));
        }
        let dim = config.dim;
        let mut total = vec![0.0; dim];
        for r in &pair.d.records {
            for (t, x) in total.iter_mut().zip(clip(r, config.clip)) {
                *t += x;
            }
        }
        let extra = clip(&pair.d_prime.records[n], config.clip);
        let noise = config.sigma * config.clip;
        let binom = Binomial::new(config.q, n as u64).map_err(|e| Error::param(e.to_string()))?;
        let mode = config.mode;
        let hyp = |sum: &[f64], size: usize, batch: usize| {
            let (div, _) = divisor(mode, size, batch, config.q);
            let s = if mode == crate::mechanisms::Mode::Sgm { 1.0 } else { 1.0 / div };
            Hypothesis { mean: scaled(sum, s), sd: noise * s }
        };
        let mut components = Vec::new();
        for k in 0..=n {
            let wk = binom.pmf(k as u64);
            if wk == 0.0 {
                continue;
            }
            let sum_k = scaled(&total, k as f64 / n as f64);
            let p = hyp(&sum_k, n, k);
            let with_extra: Vec<f64> = sum_k.iter().zip(&extra).map(|(a, b)| a + b).collect();
            for (w, q) in
                [(wk * (1.0 - config.q), hyp(&sum_k, n + 1, k)), (wk * config.q, hyp(&with_extra, n + 1, k + 1))]
            {
                if w == 0.0 {
                    continue;
                }
                let diff: Vec<f64> = q.mean.iter().zip(&p.mean).map(|(a, b)| a - b).collect();
                let len = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dir = (len > 0.0).then(|| scaled(&diff, 1.0 / len));
                components.push(Component { weight: w, p: p.clone(), q, dir });
            }
        }
        Ok(MixtureDistinguisher { components, test: NormalityTest::new(dim, level) })
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Per component, whether the output passes the test after the `D` and
    /// after the `D'` standardization.
    pub fn checks(&self, output: &[f64]) -> Vec<(bool, bool)> {
        self.components
            .iter()
            .map(|c| {
                let dir = c.dir.as_deref();
                (self.test.passes(&c.p.standardize(output), dir), self.test.passes(&c.q.standardize(output), dir))
            })
            .collect()
    }
}

impl Distinguish for MixtureDistinguisher {
    fn guess<R: Rng>(&self, output: &[f64], rng: &mut R) -> bool {
        let mut score = 0.0;
        for (c, (pass_p, pass_q)) in self.components.iter().zip(self.checks(output)) {
            let vote = match (pass_p, pass_q) {
                (true, false) => false,
                (false, true) => true,
                _ => rng.gen::<bool>(),
            };
            score += if vote { c.weight } else { -c.weight };
        }
        if score == 0.0 {
            rng.gen::<bool>()
        } else {
            score > 0.0
        }
    }
}
