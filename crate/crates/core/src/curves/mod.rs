//! Trade-off functions: closed forms, grid curves and the operations on them.

mod functionals;
mod gaussian;
mod montecarlo;

pub use functionals::{
    clt_bounds, functionals, symmetrized_product_mc, CltEnvelope, Functionals, SymmetrizedPair,
    DEFAULT_QUADRATURE_POINTS,
};
pub use gaussian::{np_gaussian_pair, GaussianPair, ProductPair};
pub use montecarlo::{envelope_mc, product_mc, Component, MixtureEnvelope, Threshold, MIN_MC_SAMPLES};

use crate::error::{check_prob, Error, Result};
use crate::special::{norm_cdf, norm_isf};
use serde::{Deserialize, Serialize};

/// Number of points in the default uniform α-grid.
pub const DEFAULT_GRID: usize = 2001;

const SHAPE_TOL: f64 = 1e-9;

/// Parametric family of a curve. Closed forms are evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum CurveKind {
    Gaussian { mu: f64 },
    Identity,
    EpsDelta { eps: f64, delta: f64 },
    Grid,
}

/// A trade-off function on `[0, 1]`.
///
/// Closed-form curves also carry their values on the default grid so that
/// serialization is uniform; grid curves are piecewise linear between knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve")]
pub struct TradeoffCurve {
    #[serde(flatten)]
    kind: CurveKind,
    points: Vec<[f64; 2]>,
    #[serde(default)]
    meta: String,
}

#[derive(Deserialize)]
struct RawCurve {
    #[serde(flatten)]
    kind: CurveKind,
    points: Vec<[f64; 2]>,
    #[serde(default)]
    meta: String,
}

impl TryFrom<RawCurve> for TradeoffCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        match raw.kind {
            CurveKind::Gaussian { mu } => Ok(gdp_curve(mu)?.with_meta(raw.meta)),
            CurveKind::Identity => Ok(identity_curve().with_meta(raw.meta)),
            CurveKind::EpsDelta { eps, delta } => Ok(eps_delta_curve(eps, delta)?.with_meta(raw.meta)),
            CurveKind::Grid => TradeoffCurve::from_points(raw.points, raw.meta),
        }
    }
}

/// Uniform grid of `m` points on `[0, 1]`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    let m = m.max(2);
    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
}

/// Uniform grid with extra log-spaced knots near both endpoints.
pub(crate) fn refined_grid(m: usize, tail_lo: f64, tail_points: usize) -> Vec<f64> {
    let mut g = uniform_grid(m);
    let hi = 1.0 / (m - 1) as f64;
    let (l0, l1) = (tail_lo.ln(), hi.ln());
    for i in 0..tail_points {
        let x = (l0 + (l1 - l0) * i as f64 / (tail_points - 1) as f64).exp();
        g.push(x);
        g.push(1.0 - x);
    }
    sort_dedup(&mut g);
    g
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.retain(|x| (0.0..=1.0).contains(x));
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// Gaussian trade-off function `G_μ`.
pub fn gdp_curve(mu: f64) -> Result<TradeoffCurve> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::param(format!("mu must be finite and non-negative, got {mu}")));
    }
    Ok(TradeoffCurve::closed(CurveKind::Gaussian { mu }))
}

/// The identity trade-off `1 - α`.
pub fn identity_curve() -> TradeoffCurve {
    TradeoffCurve::closed(CurveKind::Identity)
}

/// Trade-off function of an `(ε, δ)`-DP mechanism.
pub fn eps_delta_curve(eps: f64, delta: f64) -> Result<TradeoffCurve> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::param(format!("eps must be finite and non-negative, got {eps}")));
    }
    check_prob("delta", delta)?;
    Ok(TradeoffCurve::closed(CurveKind::EpsDelta { eps, delta }))
}

fn gaussian_tradeoff(mu: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        1.0
    } else if mu == 0.0 {
        1.0 - alpha
    } else if alpha >= 1.0 {
        0.0
    } else {
        norm_cdf(norm_isf(alpha) - mu)
    }
}

impl TradeoffCurve {
    fn closed(kind: CurveKind) -> Self {
        let mut c = TradeoffCurve { kind, points: Vec::new(), meta: String::new() };
        c.points = uniform_grid(DEFAULT_GRID).into_iter().map(|a| [a, c.eval(a)]).collect();
        c
    }

    /// Build a grid curve, checking that it is a valid trade-off function shape.
    pub fn from_points(points: Vec<[f64; 2]>, meta: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("a grid curve needs at least two points".into()));
        }
        let first = points[0][0];
        let last = points[points.len() - 1][0];
        if first != 0.0 || last != 1.0 {
            return Err(Error::InvalidInput("grid must start at alpha = 0 and end at alpha = 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p[1].is_finite() && (-SHAPE_TOL..=1.0 + SHAPE_TOL).contains(&p[1])) {
                return Err(Error::InvalidInput(format!("beta out of range at point {i}")));
            }
            if p[1] > 1.0 - p[0] + SHAPE_TOL {
                return Err(Error::InvalidInput(format!("curve exceeds 1 - alpha at point {i}")));
            }
            if i > 0 {
                let q = points[i - 1];
                if p[0].partial_cmp(&q[0]) != Some(std::cmp::Ordering::Greater) {
                    return Err(Error::InvalidInput(format!("alpha not strictly increasing at point {i}")));
                }
                if p[1] > q[1] + SHAPE_TOL {
                    return Err(Error::InvalidInput(format!("curve increases at point {i}")));
                }
            }
        }
        Ok(Self::grid_unchecked(points, meta))
    }

    pub(crate) fn grid_unchecked(points: Vec<[f64; 2]>, meta: impl Into<String>) -> Self {
        TradeoffCurve { kind: CurveKind::Grid, points, meta: meta.into() }
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = meta.into();
        self
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn meta(&self) -> &str {
        &self.meta
    }

    pub fn is_closed_form(&self) -> bool {
        self.kind != CurveKind::Grid
    }

    /// Evaluate at `alpha`, clamped to `[0, 1]`.
    pub fn eval(&self, alpha: f64) -> f64 {
        let a = alpha.clamp(0.0, 1.0);
        match self.kind {
            CurveKind::Gaussian { mu } => gaussian_tradeoff(mu, a),
            CurveKind::Identity => 1.0 - a,
            CurveKind::EpsDelta { eps, delta } => {
                let e = eps.exp();
                (1.0 - delta - e * a).max((-eps).exp() * (1.0 - delta - a)).max(0.0)
            }
            CurveKind::Grid => interp(&self.points, a),
        }
    }

    /// Evaluate on a grid and return the result as a grid curve.
    pub fn resample(&self, grid: &[f64]) -> TradeoffCurve {
        let pts = grid.iter().map(|&a| [a, self.eval(a)]).collect();
        TradeoffCurve::grid_unchecked(pts, self.meta.clone())
    }

    /// Knots at which this curve is exact. Closed forms use a refined grid.
    pub(crate) fn knots(&self) -> Vec<f64> {
        match self.kind {
            CurveKind::Grid => self.points.iter().map(|p| p[0]).collect(),
            CurveKind::Identity => vec![0.0, 1.0],
            CurveKind::EpsDelta { eps, delta } => {
                let mut k = uniform_grid(DEFAULT_GRID);
                let e = eps.exp();
                k.push((1.0 - delta) / (1.0 + e));
                k.push(1.0 - delta);
                k.push((1.0 - delta) / e);
                sort_dedup(&mut k);
                k
            }
            CurveKind::Gaussian { .. } => refined_grid(DEFAULT_GRID, 1e-12, 241),
        }
    }

    /// Whether the curve is convex on its knots, within `tol` plus the
    /// rounding error of the chord slopes.
    pub fn is_convex(&self, tol: f64) -> bool {
        let k = self.knots();
        let v: Vec<f64> = k.iter().map(|&a| self.eval(a)).collect();
        k.windows(3).zip(v.windows(3)).all(|(a, b)| {
            let (h1, h2) = (a[1] - a[0], a[2] - a[1]);
            let s1 = (b[1] - b[0]) / h1;
            let s2 = (b[2] - b[1]) / h2;
            let round = 8.0 * f64::EPSILON * (1.0 / h1 + 1.0 / h2);
            s2 >= s1 - tol * (1.0 + s1.abs()) - round
        })
    }

    /// Whether the curve is non-increasing on its knots, within `tol`.
    pub fn is_non_increasing(&self, tol: f64) -> bool {
        let k = self.knots();
        k.windows(2).all(|w| self.eval(w[1]) <= self.eval(w[0]) + tol)
    }

    /// Render as CSV: `# ` comment lines, an `alpha,beta` header and values at
    /// 17 significant digits.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str("alpha,beta\n");
        for p in &self.points {
            out.push_str(&format!("{:.16e},{:.16e}\n", p[0], p[1]));
        }
        out
    }
}

fn interp(points: &[[f64; 2]], a: f64) -> f64 {
    let i = points.partition_point(|p| p[0] < a);
    if i == 0 {
        return points[0][1];
    }
    if i >= points.len() {
        return points[points.len() - 1][1];
    }
    let (p, q) = (points[i - 1], points[i]);
    if q[0] == a {
        return q[1];
    }
    let t = (a - p[0]) / (q[0] - p[0]);
    p[1] + t * (q[1] - p[1])
}

/// Generalized inverse `f⁻¹(α) = inf{t : f(t) ≤ α}`.
pub fn invert(curve: &TradeoffCurve) -> TradeoffCurve {
    if curve.is_closed_form() {
        return curve.clone();
    }
    let mut pts: Vec<[f64; 2]> = curve.points.iter().rev().map(|p| [p[1], p[0]]).collect();
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(pts.len() + 2);
    if pts[0][0] > 0.0 {
        out.push([0.0, 1.0]);
    }
    for p in pts.drain(..) {
        match out.last_mut() {
            Some(last) if last[0] == p[0] => last[1] = last[1].min(p[1]),
            _ => out.push(p),
        }
    }
    if out[out.len() - 1][0] < 1.0 {
        out.push([1.0, 0.0]);
    }
    TradeoffCurve::grid_unchecked(out, curve.meta.clone())
}

/// Symmetrization `max{f, f⁻¹}`, exact for piecewise-linear curves.
pub fn symmetrize(curve: &TradeoffCurve) -> TradeoffCurve {
    if curve.is_closed_form() {
        return curve.clone();
    }
    let inv = invert(curve);
    let mut knots: Vec<f64> = curve.points.iter().chain(inv.points.iter()).map(|p| p[0]).collect();
    sort_dedup(&mut knots);
    let mut pts = Vec::with_capacity(knots.len() * 2);
    for w in 0..knots.len() {
        let a = knots[w];
        if w > 0 {
            let a0 = knots[w - 1];
            let d0 = curve.eval(a0) - inv.eval(a0);
            let d1 = curve.eval(a) - inv.eval(a);
            if d0 * d1 < 0.0 {
                let x = a0 + (a - a0) * d0 / (d0 - d1);
                if x > a0 && x < a {
                    pts.push([x, curve.eval(x).max(inv.eval(x))]);
                }
            }
        }
        pts.push([a, curve.eval(a).max(inv.eval(a))]);
    }
    TradeoffCurve::grid_unchecked(pts, curve.meta.clone())
}

/// Pointwise mixture `Σ wᵢ fᵢ`.
pub fn mix(weights: &[f64], curves: &[TradeoffCurve]) -> Result<TradeoffCurve> {
    if weights.is_empty() || weights.len() != curves.len() {
        return Err(Error::param("weights and curves must be non-empty and of equal length"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::param("weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("weights must sum to 1, got {total}")));
    }
    if let Some(i) = weights.iter().position(|&w| w == 1.0) {
        return Ok(curves[i].clone());
    }
    let mut knots = uniform_grid(DEFAULT_GRID);
    for (w, c) in weights.iter().zip(curves) {
        if *w > 0.0 {
            knots.extend(c.knots());
        }
    }
    sort_dedup(&mut knots);
    let pts = knots
        .iter()
        .map(|&a| {
            let b: f64 = weights.iter().zip(curves).filter(|(w, _)| **w > 0.0).map(|(w, c)| w * c.eval(a)).sum();
            [a, b.clamp(0.0, 1.0 - a)]
        })
        .collect();
    Ok(TradeoffCurve::grid_unchecked(pts, "mixture"))
}

fn delta_objective(curve: &TradeoffCurve, e: f64, a: f64) -> f64 {
    let f = curve.eval(a);
    (1.0 - e * a - f).max(1.0 - a - e * f)
}

/// Smallest δ such that the curve is dominated by `f_{ε,δ}`.
pub fn delta_of_eps(curve: &TradeoffCurve, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::param(format!("eps must be finite and non-negative, got {eps}")));
    }
    let e = eps.exp();
    let knots = match curve.kind {
        CurveKind::Grid => curve.knots(),
        _ => refined_grid(10_001, 1e-16, 400),
    };
    let vals: Vec<f64> = knots.iter().map(|&a| delta_objective(curve, e, a)).collect();
    let (best_i, mut best) =
        vals.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if curve.is_closed_form() && knots.len() > 2 {
        let lo = knots[best_i.saturating_sub(1)];
        let hi = knots[(best_i + 1).min(knots.len() - 1)];
        best = best.max(golden_max(|a| delta_objective(curve, e, a), lo, hi));
    }
    Ok(best.clamp(0.0, 1.0))
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-18 + 1e-14 * c.abs() {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Smallest ε with `delta_of_eps(curve, ε) ≤ δ`; `+inf` if no finite ε works.
pub fn eps_of_delta(curve: &TradeoffCurve, delta: f64) -> Result<f64> {
    check_prob("delta", delta)?;
    // absorbs the rounding of `1 - (1 - δ)` at α = 0
    let delta = delta + 4.0 * f64::EPSILON;
    if delta_of_eps(curve, 0.0)? <= delta {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while delta_of_eps(curve, hi)? > delta {
        hi *= 2.0;
        if hi > 512.0 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * hi.max(1e-3) {
            break;
        }
        if delta_of_eps(curve, mid)? > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
