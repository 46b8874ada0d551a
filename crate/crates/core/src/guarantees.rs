//! Privacy guarantees for SGM, EASGM, ASGM and FEASGM as trade-off curves.
//!
//! Every curve is standardized so that the null is `N(0, I)` and the
//! alternative has per-coordinate standard deviation `ratio < 1`: `N/(N+1)` for
//! EASGM, `k/(k+1)` for an ASGM batch of size `k`, and `K/(K+1)` with
//! `K = ⌊Nq⌋` for FEASGM.

use crate::curves::{
    envelope_mc, gdp_curve, identity_curve, mix, product_mc, uniform_grid, CltEnvelope, Component, GaussianPair,
    MixtureEnvelope, ProductPair, Threshold, TradeoffCurve,
};
use crate::error::{check_positive, check_prob, Error, Result};
use crate::mechanisms::{floor_product, Mode};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

/// Largest dataset size for which the per-pair mixture is enumerated.
pub const MAX_PER_PAIR_N: usize = 12;

/// Default number of factors above which products switch from Monte Carlo to the CLT envelope.
pub const DEFAULT_CLT_SWITCHOVER: u64 = 10_000;

/// Resolution and randomness budget shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub grid: usize,
    pub samples: usize,
    pub seed: u64,
    pub clt_switchover: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            grid: crate::curves::DEFAULT_GRID,
            samples: 1_000_000,
            seed: 0,
            clt_switchover: DEFAULT_CLT_SWITCHOVER,
        }
    }
}

impl Budget {
    fn alpha_grid(&self) -> Result<Vec<f64>> {
        if self.grid < 2 {
            return Err(Error::param("grid must have at least 2 points"));
        }
        Ok(uniform_grid(self.grid))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    ClosedForm,
    Mc,
    Clt,
}

/// FEASGM branch: whether the two neighbours share the divisor `⌊Nq⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "sgm-branch")]
    Sgm,
    #[serde(rename = "easgm-branch")]
    Easgm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub samples: Option<usize>,
}

/// A curve together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub curve: TradeoffCurve,
    pub estimator: Estimator,
    pub diagnostics: Diagnostics,
}

impl Bound {
    fn closed(curve: TradeoffCurve, grid: &[f64]) -> Self {
        Bound { curve: curve.resample(grid), estimator: Estimator::ClosedForm, diagnostics: Diagnostics::default() }
    }
}

/// SGM baseline `q G_{1/σ} + (1 - q) Id`.
pub fn sgm_baseline(q: f64, sigma: f64) -> Result<TradeoffCurve> {
    check_prob("q", q)?;
    check_positive("sigma", sigma)?;
    let c = mix(&[q, 1.0 - q], &[gdp_curve(1.0 / sigma)?, identity_curve()])?;
    Ok(c.with_meta(format!("sgm_baseline q={q} sigma={sigma}")))
}

/// `T(P^{⊗m}, Q^{⊗m})` with `Q = N(0, ratio²)`.
fn zero_mean_product(ratio: f64, copies: u64, budget: &Budget) -> Result<Bound> {
    let grid = budget.alpha_grid()?;
    if copies == 0 || ratio == 1.0 {
        return Ok(Bound::closed(identity_curve(), &grid));
    }
    if copies <= budget.clt_switchover {
        let pair = ProductPair::identical(GaussianPair::new(0.0, ratio)?, copies);
        let curve = product_mc(&pair, &grid, budget.samples, budget.seed)?;
        return Ok(Bound {
            curve,
            estimator: Estimator::Mc,
            diagnostics: Diagnostics { samples: Some(budget.samples), ..Default::default() },
        });
    }
    clt_product(ratio, copies, &grid)
}

fn clt_product(ratio: f64, copies: u64, grid: &[f64]) -> Result<Bound> {
    let env = CltEnvelope::new(ratio, copies)?;
    Ok(Bound {
        curve: env.upper_curve(grid)?,
        estimator: Estimator::Clt,
        diagnostics: Diagnostics { mu: Some(env.mu), gamma: Some(env.gamma), samples: None },
    })
}

fn ratio(k: u64) -> f64 {
    k as f64 / (k as f64 + 1.0)
}

fn check_dims(n_records: usize, dim: usize) -> Result<()> {
    if n_records == 0 {
        return Err(Error::param("dataset size N must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::param("dimension n must be at least 1"));
    }
    Ok(())
}

/// EASGM upper bound `T(P^{⊗(n-1)}, Q_N^{⊗(n-1)})`, independent of `q`.
pub fn easgm_upper(n_records: usize, dim: usize, budget: &Budget) -> Result<Bound> {
    check_dims(n_records, dim)?;
    zero_mean_product(ratio(n_records as u64), dim as u64 - 1, budget)
}

/// ASGM upper bound: the EASGM product with weight `q - q(1-q)^N`, identity otherwise.
pub fn asgm_upper(n_records: usize, q: f64, dim: usize, budget: &Budget) -> Result<Bound> {
    check_dims(n_records, dim)?;
    check_prob("q", q)?;
    let w = q - q * (1.0 - q).powi(n_records as i32);
    let grid = budget.alpha_grid()?;
    if w <= 0.0 {
        return Ok(Bound::closed(identity_curve(), &grid));
    }
    let inner = zero_mean_product(ratio(n_records as u64), dim as u64 - 1, budget)?;
    let curve = mix(&[w, 1.0 - w], &[inner.curve, identity_curve()])?.resample(&grid);
    Ok(Bound { curve, ..inner })
}

/// FEASGM branch predicate: SGM when `⌊Nq⌋ = ⌊(N+1)q⌋`.
pub fn feasgm_branch(n_records: usize, q: f64) -> Branch {
    if floor_product(n_records, q) == floor_product(n_records + 1, q) {
        Branch::Sgm
    } else {
        Branch::Easgm
    }
}

/// FEASGM upper bound and the branch it came from.
pub fn feasgm_upper(n_records: usize, q: f64, sigma: f64, dim: usize, budget: &Budget) -> Result<(Bound, Branch)> {
    check_dims(n_records, dim)?;
    check_prob("q", q)?;
    check_positive("sigma", sigma)?;
    let grid = budget.alpha_grid()?;
    match feasgm_branch(n_records, q) {
        Branch::Sgm => Ok((Bound::closed(sgm_baseline(q, sigma)?, &grid), Branch::Sgm)),
        Branch::Easgm => {
            let k = floor_product(n_records, q);
            if k == 0 {
                return Err(Error::InvalidParameter(format!(
                    "floor(N q) = 0 for N = {n_records}, q = {q}: the divisor convention makes this branch undefined"
                )));
            }
            Ok((zero_mean_product(ratio(k), dim as u64 - 1, budget)?, Branch::Easgm))
        }
    }
}

/// Parameters of a guarantee computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeRequest {
    pub mode: Mode,
    pub dataset_size: usize,
    pub dim: usize,
    pub q: f64,
    pub sigma: f64,
    #[serde(default = "one")]
    pub rounds: u64,
    #[serde(default)]
    pub budget: Budget,
}

fn one() -> u64 {
    1
}

impl GuaranteeRequest {
    fn validate(&self) -> Result<()> {
        check_dims(self.dataset_size, self.dim)?;
        check_prob("q", self.q)?;
        check_positive("sigma", self.sigma)?;
        if self.rounds == 0 {
            return Err(Error::param("rounds must be at least 1"));
        }
        self.budget.alpha_grid()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuaranteeKind {
    Baseline,
    Upper,
    PerPair,
    MultiRound,
}

/// Serializable result of any guarantee computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeResult {
    pub request: GuaranteeRequest,
    pub kind: GuaranteeKind,
    pub branch: Option<Branch>,
    pub estimator: Estimator,
    /// Whether the curve is known to be the exact trade-off function.
    pub tight: bool,
    pub curve: TradeoffCurve,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

fn pmf(n: usize, q: f64, k: usize) -> Result<f64> {
    let b = Binomial::new(q, n as u64).map_err(|e| Error::param(e.to_string()))?;
    Ok(b.pmf(k as u64))
}

fn shifted(ratio: f64, dim: usize, shift: f64) -> Result<ProductPair> {
    let mut p = ProductPair::identical(GaussianPair::new(0.0, ratio)?, dim as u64 - 1);
    p.push(GaussianPair::new(shift, ratio)?, 1);
    Ok(p)
}

/// Mixture components of the per-pair guarantee, with every mean shift
/// multiplied by `shift_scale` (1 gives the guarantee itself).
pub fn per_pair_envelope(req: &GuaranteeRequest, shift_scale: f64) -> Result<MixtureEnvelope> {
    req.validate()?;
    if !(shift_scale.is_finite() && shift_scale >= 0.0) {
        return Err(Error::param("shift scale must be finite and non-negative"));
    }
    let n = req.dataset_size;
    if n > MAX_PER_PAIR_N {
        return Err(Error::Capacity(format!("per-pair enumeration supports N <= {MAX_PER_PAIR_N}, got {n}")));
    }
    let (q, s) = (req.q, req.sigma);
    let mut comps = Vec::new();
    let mut add = |weight: f64, pair: ProductPair, label: String| {
        if weight > 0.0 {
            comps.push(Component { weight, pair, label });
        }
    };
    match req.mode {
        Mode::Easgm | Mode::Feasgm => {
            let big = if req.mode == Mode::Easgm {
                n as u64
            } else {
                match feasgm_branch(n, q) {
                    Branch::Sgm => return Err(Error::Unsupported("FEASGM sgm-branch has no mixture envelope".into())),
                    Branch::Easgm => floor_product(n, q),
                }
            };
            if big == 0 {
                return Err(Error::InvalidParameter("floor(N q) = 0 leaves the FEASGM divisor undefined".into()));
            }
            let r = ratio(big);
            let b = big as f64 + 1.0;
            for k in 0..=n {
                let w = pmf(n, q, k)?;
                let kf = k as f64;
                add(w * (1.0 - q), shifted(r, req.dim, shift_scale * kf / (b * s))?, format!("k={k} case=1"));
                add(w * q, shifted(r, req.dim, shift_scale * (big as f64 + kf) / (b * s))?, format!("k={k} case=2"));
            }
        }
        Mode::Asgm => {
            for k in 0..=n {
                let w = pmf(n, q, k)?;
                add(w * (1.0 - q), ProductPair::new(), format!("k={k} case=1"));
                let pair = if k == 0 {
                    ProductPair::identical(GaussianPair::new(shift_scale / s, 1.0)?, 1)
                } else {
                    let kf = k as f64;
                    shifted(ratio(k as u64), req.dim, shift_scale * 2.0 * kf / ((kf + 1.0) * s))?
                };
                add(w * q, pair, format!("k={k} case=2"));
            }
        }
        Mode::Sgm => return Err(Error::Unsupported("SGM has a closed-form guarantee; use sgm_baseline".into())),
    }
    MixtureEnvelope::new(comps)
}

/// Per-pair guarantee for a fixed neighbouring pair of size `N ≤ 12`.
pub fn per_pair_guarantee(req: &GuaranteeRequest) -> Result<GuaranteeResult> {
    req.validate()?;
    let grid = req.budget.alpha_grid()?;
    let mut warnings = Vec::new();
    let base = |curve: TradeoffCurve, branch, estimator, tight, warnings| GuaranteeResult {
        request: req.clone(),
        kind: GuaranteeKind::PerPair,
        branch,
        estimator,
        tight,
        curve,
        diagnostics: Diagnostics::default(),
        warnings,
    };
    if req.mode == Mode::Sgm {
        return Ok(base(sgm_baseline(req.q, req.sigma)?.resample(&grid), None, Estimator::ClosedForm, false, warnings));
    }
    if req.dataset_size > MAX_PER_PAIR_N {
        return Err(Error::Capacity(format!(
            "per-pair enumeration supports N <= {MAX_PER_PAIR_N}, got {}",
            req.dataset_size
        )));
    }
    let branch = (req.mode == Mode::Feasgm).then(|| feasgm_branch(req.dataset_size, req.q));
    if branch == Some(Branch::Sgm) {
        let c = sgm_baseline(req.q, req.sigma)?.resample(&grid);
        return Ok(base(c, branch, Estimator::ClosedForm, false, warnings));
    }
    if req.q == 0.0 && req.mode == Mode::Easgm {
        warnings.push("q = 0: both neighbours release pure noise".into());
        return Ok(base(identity_curve().resample(&grid), branch, Estimator::ClosedForm, true, warnings));
    }
    let env = per_pair_envelope(req, 1.0)?;
    let curve = envelope_mc(&env, &Threshold::Auto, req.budget.samples, req.budget.seed)?.resample(&grid);
    let tight = req.q == 1.0;
    if tight {
        warnings.push("q = 1: the envelope is the exact trade-off function".into());
    }
    let mut r = base(curve.with_meta("per_pair"), branch, Estimator::Mc, tight, warnings);
    r.diagnostics.samples = Some(req.budget.samples);
    Ok(r)
}

/// Upper bound of any kind as a [`GuaranteeResult`].
pub fn upper_guarantee(req: &GuaranteeRequest) -> Result<GuaranteeResult> {
    req.validate()?;
    let (bound, branch) = match req.mode {
        Mode::Sgm => {
            let grid = req.budget.alpha_grid()?;
            (Bound::closed(sgm_baseline(req.q, req.sigma)?, &grid), None)
        }
        Mode::Easgm => (easgm_upper(req.dataset_size, req.dim, &req.budget)?, None),
        Mode::Asgm => (asgm_upper(req.dataset_size, req.q, req.dim, &req.budget)?, None),
        Mode::Feasgm => {
            let (b, br) = feasgm_upper(req.dataset_size, req.q, req.sigma, req.dim, &req.budget)?;
            (b, Some(br))
        }
    };
    let kind = if req.mode == Mode::Sgm { GuaranteeKind::Baseline } else { GuaranteeKind::Upper };
    Ok(GuaranteeResult {
        request: req.clone(),
        kind,
        branch,
        estimator: bound.estimator,
        tight: req.mode == Mode::Sgm,
        curve: bound.curve,
        diagnostics: bound.diagnostics,
        warnings: Vec::new(),
    })
}

/// `T`-round upper bound `T(P^{⊗T(n-1)}, Q^{⊗T(n-1)})` via the CLT envelope.
pub fn multi_round_upper(req: &GuaranteeRequest) -> Result<GuaranteeResult> {
    req.validate()?;
    let (r, branch) = match req.mode {
        Mode::Easgm => (ratio(req.dataset_size as u64), None),
        Mode::Feasgm => match feasgm_branch(req.dataset_size, req.q) {
            Branch::Easgm => {
                let k = floor_product(req.dataset_size, req.q);
                if k == 0 {
                    return Err(Error::InvalidParameter("floor(N q) = 0 leaves the FEASGM divisor undefined".into()));
                }
                (ratio(k), Some(Branch::Easgm))
            }
            Branch::Sgm => {
                return Err(Error::Unsupported(
                    "FEASGM rounds on the sgm-branch contribute no product term; compose the SGM baseline instead"
                        .into(),
                ))
            }
        },
        Mode::Asgm | Mode::Sgm => {
            return Err(Error::Unsupported(format!(
                "multi-round composition is not provided for {}",
                req.mode.as_str()
            )))
        }
    };
    let grid = req.budget.alpha_grid()?;
    let copies = req.rounds * (req.dim as u64 - 1);
    let bound = if copies == 0 { Bound::closed(identity_curve(), &grid) } else { clt_product(r, copies, &grid)? };
    Ok(GuaranteeResult {
        request: req.clone(),
        kind: GuaranteeKind::MultiRound,
        branch,
        estimator: bound.estimator,
        tight: false,
        curve: bound.curve,
        diagnostics: bound.diagnostics,
        warnings: Vec::new(),
    })
}
