//! Curve specs of the form `KIND[:key=value,...]`.

use crate::args::{require, GuaranteeArgs, GuaranteeMode};
use crate::error::CliError;
use fdp_core::curves::{eps_delta_curve, gdp_curve, identity_curve, TradeoffCurve};
use fdp_core::guarantees::{
    multi_round_upper, per_pair_guarantee, upper_guarantee, Budget, GuaranteeRequest, GuaranteeResult,
    DEFAULT_CLT_SWITCHOVER,
};
use fdp_core::mechanisms::Mode;
use serde_json::{Map, Value};
use std::path::Path;

pub const DEFAULT_SAMPLES: usize = 1_000_000;

/// Split a spec into its kind and parameters. Values that parse as JSON
/// scalars keep their type; anything else is a string.
pub fn parse(spec: &str) -> Result<(String, Map<String, Value>), CliError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = Map::new();
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("curve spec '{spec}': expected key=value, got '{kv}'")))?;
        let value = match serde_json::from_str::<Value>(v) {
            Ok(x @ (Value::Number(_) | Value::Bool(_))) => x,
            _ => Value::String(v.to_string()),
        };
        params.insert(k.trim().to_string(), value);
    }
    Ok((kind.trim().to_string(), params))
}

fn number(params: &Map<String, Value>, key: &str, spec: &str) -> Result<f64, CliError> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::validation(format!("curve spec '{spec}' needs numeric {key}")))
}

fn only(params: &Map<String, Value>, keys: &[&str], spec: &str) -> Result<(), CliError> {
    match params.keys().find(|k| !keys.contains(&k.as_str())) {
        Some(k) => Err(CliError::validation(format!("curve spec '{spec}': unknown key '{k}'"))),
        None => Ok(()),
    }
}

/// Resolve guarantee parameters into a mode and request, filling the budget
/// defaults and checking that the mode's required parameters are present.
pub fn guarantee_request(a: &GuaranteeArgs) -> Result<(GuaranteeMode, GuaranteeRequest), CliError> {
    let mode = require(a.mode, "mode")?;
    let mechanism = match mode {
        GuaranteeMode::Sgm => Mode::Sgm,
        GuaranteeMode::EasgmUpper => Mode::Easgm,
        GuaranteeMode::AsgmUpper => Mode::Asgm,
        GuaranteeMode::FeasgmUpper => Mode::Feasgm,
        GuaranteeMode::PerPair | GuaranteeMode::MultiRound => require(a.mechanism, "mechanism")?,
    };
    let needs_records = mode != GuaranteeMode::Sgm && mechanism != Mode::Sgm;
    let needs_q = match mode {
        GuaranteeMode::EasgmUpper => false,
        GuaranteeMode::MultiRound => mechanism == Mode::Feasgm,
        _ => true,
    };
    let needs_sigma = matches!(mode, GuaranteeMode::Sgm | GuaranteeMode::FeasgmUpper | GuaranteeMode::PerPair);
    let pick = |x: Option<usize>, name: &str| if needs_records { require(x, name) } else { Ok(x.unwrap_or(1)) };
    let req = GuaranteeRequest {
        mode: mechanism,
        dataset_size: pick(a.dataset_size, "N")?,
        dim: pick(a.dim, "n")?,
        q: if needs_q { require(a.q, "q")? } else { a.q.unwrap_or(1.0) },
        sigma: if needs_sigma { require(a.sigma, "sigma")? } else { a.sigma.unwrap_or(1.0) },
        rounds: a.rounds.unwrap_or(1),
        budget: budget(a.grid, a.samples, a.seed, a.clt_switchover),
    };
    Ok((mode, req))
}

pub fn budget(grid: Option<usize>, samples: Option<usize>, seed: Option<u64>, switchover: Option<u64>) -> Budget {
    Budget {
        grid: grid.unwrap_or(fdp_core::curves::DEFAULT_GRID),
        samples: samples.unwrap_or(DEFAULT_SAMPLES),
        seed: seed.unwrap_or(0),
        clt_switchover: switchover.unwrap_or(DEFAULT_CLT_SWITCHOVER),
    }
}

pub fn compute(mode: GuaranteeMode, req: &GuaranteeRequest) -> Result<GuaranteeResult, CliError> {
    let r = match mode {
        GuaranteeMode::PerPair => per_pair_guarantee(req)?,
        GuaranteeMode::MultiRound => multi_round_upper(req)?,
        _ => upper_guarantee(req)?,
    };
    Ok(r)
}

/// Build the curve named by `spec`. Guarantee kinds start from `base`
/// (budget and any inherited parameters) and are overridden by the spec.
pub fn build(spec: &str, base: &GuaranteeArgs) -> Result<TradeoffCurve, CliError> {
    let (kind, params) = parse(spec)?;
    let curve = match kind.as_str() {
        "id" => {
            only(&params, &[], spec)?;
            identity_curve()
        }
        "gdp" => {
            only(&params, &["mu"], spec)?;
            gdp_curve(number(&params, "mu", spec)?)?
        }
        "eps-delta" => {
            only(&params, &["eps", "delta"], spec)?;
            eps_delta_curve(number(&params, "eps", spec)?, number(&params, "delta", spec)?)?
        }
        "file" => {
            only(&params, &["path"], spec)?;
            let path = params
                .get("path")
                .and_then(Value::as_str)
                .ok_or_else(|| CliError::validation(format!("curve spec '{spec}' needs path")))?;
            load(Path::new(path))?
        }
        _ => {
            let mut merged = match serde_json::to_value(base) {
                Ok(Value::Object(m)) => m,
                _ => Map::new(),
            };
            merged.insert("mode".into(), Value::String(kind.clone()));
            merged.extend(params);
            let args: GuaranteeArgs = serde_json::from_value(Value::Object(merged))
                .map_err(|e| CliError::validation(format!("curve spec '{spec}': {e}")))?;
            let (mode, req) = guarantee_request(&args)?;
            compute(mode, &req)?.curve
        }
    };
    Ok(curve.with_meta(spec))
}

/// Load a curve from CSV (`alpha,beta` rows, `#` comments) or JSON (a bare
/// curve or a `guarantee` output).
pub fn load(path: &Path) -> Result<TradeoffCurve, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::infra(format!("cannot read {}: {e}", path.display())))?;
    let bad = |m: String| CliError::validation(format!("{}: {m}", path.display()));
    if path.extension().is_some_and(|e| e == "csv") {
        let mut points = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') || line.starts_with("alpha") {
                continue;
            }
            let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
            match (cols.next(), cols.next()) {
                (Some(Ok(a)), Some(Ok(b))) => points.push([a, b]),
                _ => return Err(bad(format!("malformed row '{line}'"))),
            }
        }
        return Ok(TradeoffCurve::from_points(points, path.display().to_string())?);
    }
    let v: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let curve = v.pointer("/result/curve").cloned().unwrap_or(v);
    serde_json::from_value(curve).map_err(|e| bad(e.to_string()))
}
