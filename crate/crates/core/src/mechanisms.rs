//! Reference implementations of SGM, EASGM, ASGM and FEASGM.

use crate::error::{check_positive, check_prob, Error, Result};
use crate::rng::{derive, domain, stream};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Normalization rule applied to the noisy clipped sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// No normalization.
    Sgm,
    /// Divide by the expected batch size `N q`.
    Easgm,
    /// Divide by the realized batch size `|B|`.
    Asgm,
    /// Divide by `⌊N q⌋`.
    Feasgm,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sgm => "sgm",
            Mode::Easgm => "easgm",
            Mode::Asgm => "asgm",
            Mode::Feasgm => "feasgm",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgm" => Ok(Mode::Sgm),
            "easgm" => Ok(Mode::Easgm),
            "asgm" => Ok(Mode::Asgm),
            "feasgm" => Ok(Mode::Feasgm),
            other => Err(Error::param(format!("unknown mechanism mode '{other}'"))),
        }
    }
}

/// Mechanism parameters. `dataset_size` is the size `N` of the smaller
/// neighbour; runs on the `N + 1` neighbour are also accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub mode: Mode,
    pub dataset_size: usize,
    pub q: f64,
    pub clip: f64,
    pub sigma: f64,
    pub dim: usize,
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dataset_size == 0 {
            return Err(Error::param("dataset size must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        check_prob("q", self.q)?;
        check_positive("clip norm", self.clip)?;
        check_positive("sigma", self.sigma)?;
        Ok(())
    }
}

/// `⌊N q⌋`, snapping products within a relative `1e-9` of an integer so that
/// decimal inputs such as `q = 0.1` floor as written.
pub fn floor_product(n: usize, q: f64) -> u64 {
    let x = n as f64 * q;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        x.floor() as u64
    }
}

/// Divisor applied by `mode` for a dataset of `size` records and realized
/// batch size `batch`. A zero divisor is replaced by 1 and flagged.
pub fn divisor(mode: Mode, size: usize, batch: usize, q: f64) -> (f64, bool) {
    let d = match mode {
        Mode::Sgm => return (1.0, false),
        Mode::Easgm => size as f64 * q,
        Mode::Asgm => batch as f64,
        Mode::Feasgm => floor_product(size, q) as f64,
    };
    if d == 0.0 {
        (1.0, true)
    } else {
        (d, false)
    }
}

/// Poisson subsampling: each index is kept independently with probability `q`.
pub fn poisson_sample(size: usize, q: f64, seed: u64) -> Result<Vec<usize>> {
    check_prob("q", q)?;
    let mut rng = stream(seed, domain::BATCH, 0);
    Ok((0..size).filter(|_| rng.gen::<f64>() < q).collect())
}

/// Scale `g` to norm at most `c`.
pub fn clip(g: &[f64], c: f64) -> Vec<f64> {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = (norm / c).max(1.0);
    g.iter().map(|x| x / s).collect()
}

/// Per-example gradients of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: usize,
    #[serde(rename = "vectors")]
    pub records: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(dim: usize, records: Vec<Vec<f64>>) -> Result<Self> {
        let d = Dataset { dim, records };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidInput("dataset dimension must be at least 1".into()));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.len() != self.dim {
                return Err(Error::InvalidInput(format!("record {i} has length {} but dim is {}", r.len(), self.dim)));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("record {i} has a non-finite entry")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Neighbouring datasets `D` and `D' = D ∪ {g}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighboringPair {
    pub d: Dataset,
    pub d_prime: Dataset,
}

impl NeighboringPair {
    pub fn new(d: Dataset, extra: Vec<f64>) -> Result<Self> {
        d.validate()?;
        let mut d_prime = d.clone();
        d_prime.records.push(extra);
        d_prime.validate()?;
        Ok(NeighboringPair { d, d_prime })
    }

    /// Worst-case style canary: the added record is `C e₀`; the others are
    /// `C e_{1 + (i mod (n-1))}`, orthogonal to it whenever `n ≥ 2`.
    pub fn canary(size: usize, dim: usize, clip_norm: f64) -> Result<Self> {
        if size == 0 || dim == 0 {
            return Err(Error::param("canary size and dimension must be at least 1"));
        }
        check_positive("clip norm", clip_norm)?;
        let basis = |k: usize| {
            let mut v = vec![0.0; dim];
            v[k] = clip_norm;
            v
        };
        let records = (0..size).map(|i| if dim >= 2 { basis(1 + i % (dim - 1)) } else { basis(0) }).collect();
        NeighboringPair::new(Dataset { dim, records }, basis(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Canary,
}

/// Dataset input: a generator spec `{kind: "canary", N, dim, C}`, or explicit
/// vectors `{dim, vectors, extra?}` where `extra` (or, if absent, the last
/// vector) is the record added to form `D'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    Generated {
        kind: Generator,
        #[serde(rename = "N")]
        size: usize,
        dim: usize,
        #[serde(rename = "C")]
        clip: f64,
    },
    Explicit {
        dim: usize,
        vectors: Vec<Vec<f64>>,
        #[serde(default)]
        extra: Option<Vec<f64>>,
    },
}

impl DatasetSpec {
    pub fn build(&self) -> Result<NeighboringPair> {
        match self {
            DatasetSpec::Generated { size, dim, clip, .. } => NeighboringPair::canary(*size, *dim, *clip),
            DatasetSpec::Explicit { dim, vectors, extra } => {
                let mut records = vectors.clone();
                let extra = match extra {
                    Some(e) => e.clone(),
                    None => records.pop().ok_or_else(|| Error::InvalidInput("dataset has no vectors".into()))?,
                };
                NeighboringPair::new(Dataset::new(*dim, records)?, extra)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DatasetSpec::Generated { size, dim, clip, .. } => {
                format!("canary N={size} dim={dim} C={clip}: added record C*e_0, others orthogonal basis vectors")
            }
            DatasetSpec::Explicit { vectors, extra, .. } => {
                format!(
                    "explicit vectors ({} records{})",
                    vectors.len(),
                    if extra.is_some() { " plus extra" } else { "" }
                )
            }
        }
    }
}

/// One release of the mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismOutput {
    pub output: Vec<f64>,
    pub batch_size: usize,
    pub divisor: f64,
    /// Set when a zero divisor was replaced by 1.
    pub zero_divisor_fallback: bool,
}

/// Seed for trial `r` of a run seeded with `seed`.
pub fn trial_seed(seed: u64, r: u64) -> u64 {
    derive(derive(seed, domain::TRIAL), r)
}

/// Run the mechanism once on `data`.
pub fn run_mechanism(config: &MechanismConfig, data: &Dataset, seed: u64) -> Result<MechanismOutput> {
    config.validate()?;
    if data.dim != config.dim {
        return Err(Error::InvalidInput(format!(
            "dataset dimension {} does not match config {}",
            data.dim, config.dim
        )));
    }
    let size = data.len();
    if size != config.dataset_size && size != config.dataset_size + 1 {
        return Err(Error::InvalidInput(format!(
            "dataset has {size} records; expected {} or {}",
            config.dataset_size,
            config.dataset_size + 1
        )));
    }
    let batch = poisson_sample(size, config.q, seed)?;
    let mut sum = vec![0.0; config.dim];
    for &i in &batch {
        for (s, x) in sum.iter_mut().zip(clip(&data.records[i], config.clip)) {
            *s += x;
        }
    }
    let mut rng = stream(seed, domain::NOISE, 0);
    let scale = config.sigma * config.clip;
    for s in sum.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *s += scale * z;
    }
    let (div, fallback) = divisor(config.mode, size, batch.len(), config.q);
    if config.mode != Mode::Sgm {
        for s in sum.iter_mut() {
            *s /= div;
        }
    }
    Ok(MechanismOutput { output: sum, batch_size: batch.len(), divisor: div, zero_divisor_fallback: fallback })
}

/// One JSON-lines record for a simulated release.
pub fn output_json_line(seed: u64, trial: u64, dataset: &str, out: &MechanismOutput) -> String {
    serde_json::json!({
        "seed": seed,
        "trial": trial,
        "dataset": dataset,
        "batch_size": out.batch_size,
        "divisor": out.divisor,
        "zero_divisor_fallback": out.zero_divisor_fallback,
        "vector": out.output,
    })
    .to_string()
}
