//! Empirical privacy auditing: challenge trials, Clopper-Pearson bounds and verdicts.

mod distinguisher;
mod stats;

pub use distinguisher::{Distinguish, MixtureDistinguisher, NormalityTest, MAX_AUDIT_N};
pub use stats::{audited_delta, audited_epsilon, clopper_pearson, AuditedEpsilon};

use crate::curves::{delta_of_eps, eps_of_delta, TradeoffCurve};
use crate::error::{check_prob, Error, Result};
use crate::guarantees::{feasgm_branch, Branch};
use crate::mechanisms::{run_mechanism, trial_seed, Dataset, MechanismConfig, Mode, NeighboringPair};
use crate::rng::{domain, stream};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

/// Minimum number of audit trials.
pub const MIN_TRIALS: u64 = 100;

pub(crate) fn ser_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

/// A randomized release that can be audited.
pub trait Mechanism: Sync {
    fn release(&self, data: &Dataset, seed: u64) -> Result<Vec<f64>>;
}

impl Mechanism for MechanismConfig {
    fn release(&self, data: &Dataset, seed: u64) -> Result<Vec<f64>> {
        Ok(run_mechanism(self, data, seed)?.output)
    }
}

/// Which side of the privacy profile is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditTarget {
    /// Audit ε at this δ.
    Delta(f64),
    /// Audit δ at this ε.
    Epsilon(f64),
}

impl Default for AuditTarget {
    fn default() -> Self {
        AuditTarget::Delta(1e-5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub mechanism: MechanismConfig,
    pub trials: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub target: AuditTarget,
    #[serde(default)]
    pub seed: u64,
    /// Level of each Gaussianity test inside the distinguisher.
    #[serde(default = "default_level")]
    pub test_level: f64,
}

fn default_confidence() -> f64 {
    0.95
}

fn default_level() -> f64 {
    0.05
}

impl AuditConfig {
    pub fn new(mechanism: MechanismConfig, trials: u64, seed: u64) -> Self {
        AuditConfig {
            mechanism,
            trials,
            confidence: default_confidence(),
            target: AuditTarget::default(),
            seed,
            test_level: default_level(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.mechanism.validate()?;
        if self.trials < MIN_TRIALS {
            return Err(Error::param(format!("at least {MIN_TRIALS} trials are required, got {}", self.trials)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::param("confidence must lie in (0, 1)"));
        }
        match self.target {
            AuditTarget::Delta(d) => check_prob("delta", d)?,
            AuditTarget::Epsilon(e) if !(e.is_finite() && e >= 0.0) => {
                return Err(Error::param("target epsilon must be finite and non-negative"))
            }
            AuditTarget::Epsilon(_) => {}
        }
        Ok(())
    }
}

/// The `(ε, δ)` pair claimed by a guarantee curve at the audit's fixed coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClaimedPair {
    #[serde(serialize_with = "ser_extended")]
    pub eps: f64,
    pub delta: f64,
}

impl ClaimedPair {
    pub fn from_curve(curve: &TradeoffCurve, target: AuditTarget) -> Result<Self> {
        match target {
            AuditTarget::Delta(delta) => Ok(ClaimedPair { eps: eps_of_delta(curve, delta)?, delta }),
            AuditTarget::Epsilon(eps) => Ok(ClaimedPair { eps, delta: delta_of_eps(curve, eps)? }),
        }
    }
}

/// `true` iff the audited lower bounds strictly exceed the claim.
pub fn verdict(eps_lower: f64, delta_lower: f64, claimed: ClaimedPair) -> bool {
    eps_lower > claimed.eps || delta_lower > claimed.delta
}

/// The four tally cells of the challenge game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    /// Challenge `D`, guessed `D`.
    pub type1_correct: u64,
    /// Challenge `D`, guessed `D'`.
    pub type1_incorrect: u64,
    /// Challenge `D'`, guessed `D'`.
    pub type2_correct: u64,
    /// Challenge `D'`, guessed `D`.
    pub type2_incorrect: u64,
}

impl Counts {
    fn merge(self, o: Counts) -> Counts {
        Counts {
            type1_correct: self.type1_correct + o.type1_correct,
            type1_incorrect: self.type1_incorrect + o.type1_incorrect,
            type2_correct: self.type2_correct + o.type2_correct,
            type2_incorrect: self.type2_incorrect + o.type2_incorrect,
        }
    }

    pub fn trials_d(&self) -> u64 {
        self.type1_correct + self.type1_incorrect
    }

    pub fn trials_d_prime(&self) -> u64 {
        self.type2_correct + self.type2_incorrect
    }

    pub fn total(&self) -> u64 {
        self.trials_d() + self.trials_d_prime()
    }
}

/// Provenance recorded with every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditMetadata {
    pub seed: u64,
    pub distinguisher: String,
    pub branch: Option<Branch>,
    pub dataset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub counts: Counts,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub alpha_ci: (f64, f64),
    pub beta_ci: (f64, f64),
    pub epsilon_lower: AuditedEpsilon,
    pub delta_lower: f64,
    pub claimed: ClaimedPair,
    pub violation: bool,
    pub metadata: AuditMetadata,
}

impl AuditReport {
    pub fn csv_header() -> &'static str {
        "mode,N,n,q,sigma,C,trials,seed,alpha_hat,beta_hat,alpha_upper,beta_upper,eps_lower,eps_saturated,delta_lower,eps_claimed,delta_claimed,violation"
    }

    pub fn csv_row(&self) -> String {
        let m = &self.config.mechanism;
        let f = |v: f64| if v.is_infinite() { "inf".to_string() } else { format!("{v:.16e}") };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.mode.as_str(),
            m.dataset_size,
            m.dim,
            m.q,
            m.sigma,
            m.clip,
            self.config.trials,
            self.config.seed,
            f(self.alpha_hat),
            f(self.beta_hat),
            f(self.alpha_ci.1),
            f(self.beta_ci.1),
            f(self.epsilon_lower.value),
            self.epsilon_lower.saturated,
            f(self.delta_lower),
            f(self.claimed.eps),
            f(self.claimed.delta),
            self.violation
        )
    }
}

/// Run challenge trials with an arbitrary mechanism and distinguisher.
///
/// Trial `r` draws the challenge bit, the mechanism seed and the
/// distinguisher's coins from streams indexed by `r`, so the counts do not
/// depend on the thread count.
pub fn run_trials<M: Mechanism, D: Distinguish>(
    mech: &M,
    dist: &D,
    pair: &NeighboringPair,
    trials: u64,
    seed: u64,
) -> Result<Counts> {
    (0..trials)
        .into_par_iter()
        .map(|r| -> Result<Counts> {
            let b = stream(seed, domain::CHALLENGE, r).gen::<bool>();
            let data = if b { &pair.d_prime } else { &pair.d };
            let out = mech.release(data, trial_seed(seed, r)).map_err(|e| e.context(format!("trial {r}")))?;
            let g = dist.guess(&out, &mut stream(seed, domain::COIN, r));
            Ok(Counts {
                type1_correct: u64::from(!b && !g),
                type1_incorrect: u64::from(!b && g),
                type2_correct: u64::from(b && g),
                type2_incorrect: u64::from(b && !g),
            })
        })
        .try_reduce(Counts::default, |a, b| Ok(a.merge(b)))
}

/// Summarize counts into a report against `claimed`.
pub fn summarize(
    config: &AuditConfig,
    counts: Counts,
    claimed: ClaimedPair,
    metadata: AuditMetadata,
) -> Result<AuditReport> {
    if counts.trials_d() == 0 || counts.trials_d_prime() == 0 {
        return Err(Error::Numerical("one challenge side received no trials".into()));
    }
    let alpha_ci = clopper_pearson(counts.type1_incorrect, counts.trials_d(), config.confidence)?;
    let beta_ci = clopper_pearson(counts.type2_incorrect, counts.trials_d_prime(), config.confidence)?;
    let eps_l = audited_epsilon(alpha_ci.1, beta_ci.1, claimed.delta)?;
    let delta_l = audited_delta(alpha_ci.1, beta_ci.1, claimed.eps)?;
    Ok(AuditReport {
        config: config.clone(),
        counts,
        alpha_hat: counts.type1_incorrect as f64 / counts.trials_d() as f64,
        beta_hat: counts.type2_incorrect as f64 / counts.trials_d_prime() as f64,
        alpha_ci,
        beta_ci,
        epsilon_lower: eps_l,
        delta_lower: delta_l,
        claimed,
        violation: verdict(eps_l.value, delta_l, claimed),
        metadata,
    })
}

/// Audit the configured mechanism on `pair` against the `claimed` curve.
pub fn run_audit(config: &AuditConfig, pair: &NeighboringPair, claimed: &TradeoffCurve) -> Result<AuditReport> {
    config.validate()?;
    let dist = MixtureDistinguisher::new(&config.mechanism, pair, config.test_level)?;
    let counts = run_trials(&config.mechanism, &dist, pair, config.trials, config.seed)?;
    let claim = ClaimedPair::from_curve(claimed, config.target)?;
    let m = &config.mechanism;
    let metadata = AuditMetadata {
        seed: config.seed,
        distinguisher: format!(
            "gaussianity-mixture ({} components, test level {})",
            dist.component_count(),
            config.test_level
        ),
        branch: (m.mode == Mode::Feasgm).then(|| feasgm_branch(m.dataset_size, m.q)),
        dataset: format!("{} records, dim {}", pair.d.len(), pair.d.dim),
    };
    summarize(config, counts, claim, metadata)
}
