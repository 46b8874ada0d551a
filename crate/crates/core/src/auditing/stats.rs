use crate::error::{check_prob, Error, Result};
use crate::special::beta_ppf;
use serde::Serialize;

/// Two-sided Clopper-Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::param(format!("need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let a = 0.5 * (1.0 - confidence);
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 { 0.0 } else { beta_ppf(a, x, n - x + 1.0) };
    let hi = if successes == trials { 1.0 } else { beta_ppf(1.0 - a, x + 1.0, n - x) };
    Ok((lo, hi))
}

/// Lower bound on ε, with `saturated` set when it is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditedEpsilon {
    #[serde(serialize_with = "super::ser_extended")]
    pub value: f64,
    pub saturated: bool,
}

fn check_rates(alpha: f64, beta: f64) -> Result<()> {
    check_prob("alpha", alpha)?;
    check_prob("beta", beta)
}

/// `max{log((1-δ-α)/β), log((1-δ-β)/α), 0}`.
pub fn audited_epsilon(alpha: f64, beta: f64, delta: f64) -> Result<AuditedEpsilon> {
    check_rates(alpha, beta)?;
    check_prob("delta", delta)?;
    let term = |num: f64, den: f64| -> f64 {
        if num <= 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            (num / den).ln()
        }
    };
    let v = term(1.0 - delta - alpha, beta).max(term(1.0 - delta - beta, alpha)).max(0.0);
    Ok(AuditedEpsilon { value: v, saturated: v.is_infinite() })
}

/// `max{0, 1 - α - e^ε β, 1 - β - e^ε α}`.
pub fn audited_delta(alpha: f64, beta: f64, eps: f64) -> Result<f64> {
    check_rates(alpha, beta)?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::param(format!("eps must be non-negative, got {eps}")));
    }
    if eps.is_infinite() {
        return Ok(if alpha == 0.0 && beta == 0.0 { 1.0 } else { 0.0 });
    }
    let e = eps.exp();
    Ok((1.0 - alpha - e * beta).max(1.0 - beta - e * alpha).max(0.0))
}
