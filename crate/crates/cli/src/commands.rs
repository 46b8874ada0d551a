use crate::args::{merge, require, to_value, AuditArgs, CompareArgs, Format, GuaranteeArgs, Side, SimulateArgs};
use crate::error::CliError;
use crate::spec;
use fdp_core::auditing::{run_audit, AuditConfig, AuditReport, AuditTarget, MIN_TRIALS};
use fdp_core::curves::uniform_grid;
use fdp_core::mechanisms::{
    output_json_line, run_mechanism, trial_seed, DatasetSpec, MechanismConfig, Mode, NeighboringPair,
};
use fdp_core::Error;
use serde_json::{json, Map, Value};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT: &str = concat!("fdp ", env!("CARGO_PKG_VERSION"));

const DEFAULT_CLIP: f64 = 0.1;
const DEFAULT_DELTA: f64 = 1e-5;
const DEFAULT_TRIALS: u64 = 10_000;
const DEFAULT_RELEASES: u64 = 10;
const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Rendered output together with the resolved configuration it embeds.
pub struct Rendered {
    pub text: String,
    pub config: Value,
}

fn envelope(command: &str, config: &Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("toolkit".into(), json!(TOOLKIT));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), config.clone());
    m
}

fn comments(command: &str, config: &Value) -> Vec<String> {
    vec![
        format!("schema_version={SCHEMA_VERSION}"),
        format!("toolkit={TOOLKIT}"),
        format!("command={command}"),
        format!("config={config}"),
    ]
}

fn json_text(m: Map<String, Value>) -> String {
    let mut s = Value::Object(m).to_string();
    s.push('\n');
    s
}

fn prefixed(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

pub fn guarantee(a: &GuaranteeArgs) -> Result<Rendered, CliError> {
    let m = merge(a, a.out.config.as_deref())?;
    let (mode, req) = spec::guarantee_request(&m)?;
    let resolved = GuaranteeArgs {
        rounds: Some(req.rounds),
        grid: Some(req.budget.grid),
        samples: Some(req.budget.samples),
        seed: Some(req.budget.seed),
        clt_switchover: Some(req.budget.clt_switchover),
        ..m
    };
    let config = to_value(&resolved)?;
    let result = spec::compute(mode, &req)?;
    let text = match a.out.format {
        Format::Json => {
            let mut e = envelope("guarantee", &config);
            e.insert("result".into(), to_value(&result)?);
            json_text(e)
        }
        Format::Csv => {
            let mut c = comments("guarantee", &config);
            c.push(format!("kind={}", to_value(&result.kind)?));
            c.push(format!("estimator={}", to_value(&result.estimator)?));
            c.push(format!("branch={}", to_value(&result.branch)?));
            c.push(format!("tight={}", result.tight));
            c.push(format!("diagnostics={}", to_value(&result.diagnostics)?));
            c.extend(result.warnings.iter().map(|w| format!("warning={w}")));
            result.curve.to_csv(&c)
        }
    };
    Ok(Rendered { text, config })
}

fn load_pair(path: &Path) -> Result<NeighboringPair, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::infra(format!("cannot read {}: {e}", path.display())))?;
    let s: DatasetSpec =
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("dataset {}: {e}", path.display())))?;
    Ok(s.build()?)
}

/// Neighbouring pair from `--dataset`, or the canary construction. Sizes
/// given alongside a dataset must agree with it.
fn neighbours(
    dataset: Option<&Path>,
    size: Option<usize>,
    dim: Option<usize>,
    clip: f64,
) -> Result<(NeighboringPair, usize, usize), CliError> {
    let Some(path) = dataset else {
        let (n_records, dim) = (require(size, "N")?, require(dim, "n")?);
        return Ok((NeighboringPair::canary(n_records, dim, clip)?, n_records, dim));
    };
    let pair = load_pair(path)?;
    let (n_records, d) = (pair.d.len(), pair.d.dim);
    if size.is_some_and(|s| s != n_records) || dim.is_some_and(|x| x != d) {
        return Err(CliError::validation(format!(
            "dataset has N = {n_records}, n = {d}, which disagrees with the given N or n"
        )));
    }
    Ok((pair, n_records, d))
}

/// Failures inside the trial loop carry a `trial r:` context and count as
/// infrastructure errors; everything else keeps its usual class.
fn audit_error(e: Error) -> CliError {
    let in_trial = e.to_string().split_once(": ").is_some_and(|(_, rest)| rest.starts_with("trial "));
    if in_trial {
        CliError::infra(e.to_string())
    } else {
        e.into()
    }
}

pub fn audit(a: &AuditArgs) -> Result<Rendered, CliError> {
    let m = merge(a, a.out.config.as_deref())?;
    if m.delta.is_some() && m.eps.is_some() {
        return Err(CliError::validation("give either --delta or --eps, not both"));
    }
    let trials = m.trials.unwrap_or(DEFAULT_TRIALS);
    if trials < MIN_TRIALS {
        return Err(CliError::validation(format!("at least {MIN_TRIALS} trials are required, got {trials}")));
    }
    let clip = m.clip.unwrap_or(DEFAULT_CLIP);
    let (pair, n_records, dim) = neighbours(m.dataset.as_deref(), m.dataset_size, m.dim, clip)?;
    let (q, sigma) = (require(m.q, "q")?, require(m.sigma, "sigma")?);
    let mechanism = MechanismConfig { mode: require(m.mode, "mode")?, dataset_size: n_records, q, clip, sigma, dim };
    let target = match m.eps {
        Some(e) => AuditTarget::Epsilon(e),
        None => AuditTarget::Delta(m.delta.unwrap_or(DEFAULT_DELTA)),
    };
    let mut cfg = AuditConfig::new(mechanism, trials, m.seed.unwrap_or(0));
    cfg.target = target;
    cfg.confidence = m.confidence.unwrap_or(cfg.confidence);
    cfg.test_level = m.level.unwrap_or(cfg.test_level);
    let claim_spec = m.claim.clone().unwrap_or_else(|| "sgm".into());
    let budget = spec::budget(m.grid, m.samples, m.seed, m.clt_switchover);
    let base = GuaranteeArgs {
        dataset_size: Some(n_records),
        dim: Some(dim),
        q: Some(q),
        sigma: Some(sigma),
        grid: Some(budget.grid),
        samples: Some(budget.samples),
        seed: Some(budget.seed),
        clt_switchover: Some(budget.clt_switchover),
        ..GuaranteeArgs::default()
    };
    let resolved = AuditArgs {
        dataset_size: Some(n_records),
        dim: Some(dim),
        clip: Some(clip),
        trials: Some(trials),
        delta: match target {
            AuditTarget::Delta(d) => Some(d),
            AuditTarget::Epsilon(_) => None,
        },
        confidence: Some(cfg.confidence),
        level: Some(cfg.test_level),
        seed: Some(cfg.seed),
        claim: Some(claim_spec.clone()),
        grid: Some(budget.grid),
        samples: Some(budget.samples),
        clt_switchover: Some(budget.clt_switchover),
        ..m
    };
    let config = to_value(&resolved)?;
    let claim = spec::build(&claim_spec, &base)?;
    let report = run_audit(&cfg, &pair, &claim).map_err(audit_error)?;
    let verdict = if report.violation { "violation" } else { "no violation" };
    let text = match a.out.format {
        Format::Json => {
            let mut e = envelope("audit", &config);
            e.insert("verdict".into(), json!(verdict));
            e.insert("report".into(), to_value(&report)?);
            json_text(e)
        }
        Format::Csv => {
            let mut c = comments("audit", &config);
            c.push(format!("verdict={verdict}"));
            c.push(format!("distinguisher={}", report.metadata.distinguisher));
            format!("{}{}\n{}\n", prefixed(&c), AuditReport::csv_header(), report.csv_row())
        }
    };
    Ok(Rendered { text, config })
}

/// Maximal runs of grid points where `a < b - tol`, as closed α-intervals.
fn below_intervals(grid: &[f64], a: &[f64], b: &[f64], tol: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=grid.len() {
        let below = i < grid.len() && a[i] < b[i] - tol;
        match (below, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push([grid[s], grid[i - 1]]);
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn compare(a: &CompareArgs) -> Result<Rendered, CliError> {
    let m = merge(a, a.out.config.as_deref())?;
    if m.curves.len() < 2 {
        return Err(CliError::validation("compare needs at least two --curve specs"));
    }
    let budget = spec::budget(m.grid, m.samples, m.seed, m.clt_switchover);
    if budget.grid < 2 {
        return Err(CliError::validation("grid must have at least 2 points"));
    }
    let tol = m.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(CliError::validation("tolerance must be finite and non-negative"));
    }
    let resolved = CompareArgs {
        grid: Some(budget.grid),
        samples: Some(budget.samples),
        seed: Some(budget.seed),
        clt_switchover: Some(budget.clt_switchover),
        tolerance: Some(tol),
        ..m.clone()
    };
    let config = to_value(&resolved)?;
    let base = GuaranteeArgs {
        grid: Some(budget.grid),
        samples: Some(budget.samples),
        seed: Some(budget.seed),
        clt_switchover: Some(budget.clt_switchover),
        ..GuaranteeArgs::default()
    };
    let grid = uniform_grid(budget.grid);
    let mut values = Vec::with_capacity(m.curves.len());
    for s in &m.curves {
        let c = spec::build(s, &base)?;
        values.push(grid.iter().map(|&x| c.eval(x)).collect::<Vec<f64>>());
    }
    let mut crossings = Vec::new();
    for (i, a_vals) in values.iter().enumerate() {
        for (j, b_vals) in values.iter().enumerate() {
            if i == j {
                continue;
            }
            let iv = below_intervals(&grid, a_vals, b_vals, tol);
            if !iv.is_empty() {
                crossings.push(json!({ "below": m.curves[i], "above": m.curves[j], "intervals": iv }));
            }
        }
    }
    let text = match a.out.format {
        Format::Json => {
            let mut table = Vec::with_capacity(grid.len() * values.len());
            for (label, v) in m.curves.iter().zip(&values) {
                for (x, y) in grid.iter().zip(v) {
                    table.push(json!({ "alpha": x, "beta": y, "series": label }));
                }
            }
            let mut e = envelope("compare", &config);
            e.insert("crossings".into(), Value::Array(crossings));
            e.insert("table".into(), Value::Array(table));
            json_text(e)
        }
        Format::Csv => {
            let mut c = comments("compare", &config);
            c.extend(crossings.iter().map(|x| format!("crossing={x}")));
            let mut s = prefixed(&c);
            s.push_str("alpha,beta,series\n");
            for (label, v) in m.curves.iter().zip(&values) {
                let field = csv_field(label);
                for (x, y) in grid.iter().zip(v) {
                    s.push_str(&format!("{x:.16e},{y:.16e},{field}\n"));
                }
            }
            s
        }
    };
    Ok(Rendered { text, config })
}

pub fn simulate(a: &SimulateArgs) -> Result<Rendered, CliError> {
    if a.out.format == Format::Csv {
        return Err(CliError::validation("simulate writes JSON lines only"));
    }
    let m = merge(a, a.out.config.as_deref())?;
    let clip = m.clip.unwrap_or(DEFAULT_CLIP);
    let (pair, n_records, dim) = neighbours(m.dataset.as_deref(), m.dataset_size, m.dim, clip)?;
    let mode = require(m.mode, "mode")?;
    let q = if mode == Mode::Sgm { m.q.unwrap_or(1.0) } else { require(m.q, "q")? };
    let cfg = MechanismConfig { mode, dataset_size: n_records, q, clip, sigma: require(m.sigma, "sigma")?, dim };
    cfg.validate()?;
    let (trials, seed, side) =
        (m.trials.unwrap_or(DEFAULT_RELEASES), m.seed.unwrap_or(0), m.side.unwrap_or(Side::Both));
    let resolved = SimulateArgs {
        dataset_size: Some(n_records),
        dim: Some(dim),
        q: Some(q),
        clip: Some(clip),
        trials: Some(trials),
        seed: Some(seed),
        side: Some(side),
        ..m
    };
    let config = to_value(&resolved)?;
    let sides: Vec<(&str, &fdp_core::mechanisms::Dataset)> = match side {
        Side::D => vec![("D", &pair.d)],
        Side::DPrime => vec![("D'", &pair.d_prime)],
        Side::Both => vec![("D", &pair.d), ("D'", &pair.d_prime)],
    };
    let mut text = json_text(envelope("simulate", &config));
    for r in 0..trials {
        let s = trial_seed(seed, r);
        for (label, data) in &sides {
            let out = run_mechanism(&cfg, data, s)?;
            text.push_str(&output_json_line(seed, r, label, &out));
            text.push('\n');
        }
    }
    Ok(Rendered { text, config })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intervals_cover_maximal_runs() {
        let g = [0.0, 0.25, 0.5, 0.75, 1.0];
        let a = [1.0, 0.5, 0.6, 0.1, 0.0];
        let b = [1.0, 0.7, 0.6, 0.2, 0.0];
        assert_eq!(below_intervals(&g, &a, &b, 0.0), vec![[0.25, 0.25], [0.75, 0.75]]);
        assert!(below_intervals(&g, &a, &a, 0.0).is_empty());
        let b = [2.0; 5];
        assert_eq!(below_intervals(&g, &a, &b, 0.0), vec![[0.0, 1.0]]);
    }

    #[test]
    fn trial_failures_are_infrastructure_errors() {
        assert_eq!(audit_error(Error::InvalidInput("trial 3: boom".into())).code, crate::error::EXIT_INFRA);
        assert_eq!(audit_error(Error::InvalidParameter("bad q".into())).code, crate::error::EXIT_VALIDATION);
        assert_eq!(audit_error(Error::Numerical("no trials".into())).code, crate::error::EXIT_NUMERICAL);
    }

    #[test]
    fn csv_fields_are_quoted() {
        assert_eq!(csv_field("sgm:q=0.5,sigma=10"), "\"sgm:q=0.5,sigma=10\"");
        assert_eq!(csv_field("a\"b"), "\"a\"\"b\"");
    }
}
