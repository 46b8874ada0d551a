//! Functionals of the symmetrized zero-mean pair and the Berry-Esseen CLT envelope.
//!
//! With `f* = T(N(0,1), N(0,σ²))` and `f̄ = max{f*, f*⁻¹}`, both branches are
//! integrated in the normal-quantile variable `u`, where `dα = 2φ(u) du`:
//! on the `f*` branch `u = Φ⁻¹((1+α)/2)` and `log|f̄'| = -log σ - c u²`; on the
//! inverse branch `u = Φ̄⁻¹(α/2)` and `log|f̄'| = log σ + c σ² u²`, with
//! `c = (1 - σ²) / (2σ²)`.

use super::gaussian::GaussianPair;
use super::montecarlo::{check_grid, roc_curve};
use super::{gdp_curve, TradeoffCurve};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::special::{gauss_legendre, integrate, norm_isf, norm_pdf, norm_sf};
use rand::Rng;
use rayon::prelude::*;

/// Default number of composite quadrature panels per branch segment.
pub const DEFAULT_QUADRATURE_POINTS: usize = 64;

const CROSSING_GRID: usize = 10_000;
const U_MAX: f64 = 14.0;
const GL_ORDER: usize = 16;

/// `f̄ = max{f*, f*⁻¹}` for the zero-mean pair with variance ratio `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedPair {
    sigma: f64,
    c: f64,
    /// Branch breakpoints including 0 and 1.
    breaks: Vec<f64>,
    /// `true` where the segment follows `f*`, `false` where it follows `f*⁻¹`.
    primal: Vec<bool>,
}

impl SymmetrizedPair {
    pub fn new(sigma: f64) -> Result<Self> {
        GaussianPair::new(0.0, sigma)?;
        let c = (1.0 - sigma * sigma) / (2.0 * sigma * sigma);
        let mut s = SymmetrizedPair { sigma, c, breaks: vec![0.0, 1.0], primal: vec![true] };
        if sigma == 1.0 {
            return Ok(s);
        }
        let h = |a: f64| s.forward(a) - s.inverse(a);
        let mut breaks = vec![0.0];
        let mut prev_a = 1.0 / CROSSING_GRID as f64;
        let mut prev_h = h(prev_a);
        for i in 2..CROSSING_GRID {
            let a = i as f64 / CROSSING_GRID as f64;
            let ha = h(a);
            if prev_h != 0.0 && ha != 0.0 && (prev_h < 0.0) != (ha < 0.0) {
                let (mut lo, mut hi) = (prev_a, a);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if (h(mid) < 0.0) == (prev_h < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                breaks.push(0.5 * (lo + hi));
            }
            prev_a = a;
            prev_h = ha;
        }
        breaks.push(1.0);
        let primal = breaks
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                s.forward(m) >= s.inverse(m)
            })
            .collect();
        s.breaks = breaks;
        s.primal = primal;
        Ok(s)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Interior crossing points of `f*` and `f*⁻¹`.
    pub fn crossings(&self) -> &[f64] {
        &self.breaks[1..self.breaks.len() - 1]
    }

    /// `f*(α) = 2Φ̄(Φ⁻¹((1+α)/2) / σ)`.
    pub fn forward(&self, alpha: f64) -> f64 {
        2.0 * norm_sf(norm_isf(0.5 * (1.0 - alpha)) / self.sigma)
    }

    /// `f*⁻¹(α) = 2Φ(σ Φ⁻¹(1 - α/2)) - 1`.
    pub fn inverse(&self, alpha: f64) -> f64 {
        1.0 - 2.0 * norm_sf(self.sigma * norm_isf(0.5 * alpha))
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        let a = alpha.clamp(0.0, 1.0);
        self.forward(a).max(self.inverse(a))
    }

    fn segment(&self, alpha: f64) -> usize {
        let i = self.breaks.partition_point(|b| *b <= alpha);
        i.clamp(1, self.primal.len()) - 1
    }

    /// `log|f̄'(α)|`.
    pub fn log_slope(&self, alpha: f64) -> f64 {
        if self.primal[self.segment(alpha)] {
            let u = norm_isf(0.5 * (1.0 - alpha));
            -self.sigma.ln() - self.c * u * u
        } else {
            let u = norm_isf(0.5 * alpha);
            self.sigma.ln() + self.c * self.sigma * self.sigma * u * u
        }
    }

    /// Integrate `g(log|f̄'|)` over `[0, 1]`, splitting at `kinks` in the LLR value.
    fn integrate_moment<G: Fn(f64) -> f64>(
        &self,
        g: G,
        kinks: &[f64],
        panels: usize,
        rule: &(Vec<f64>, Vec<f64>),
    ) -> f64 {
        let ls = self.sigma.ln();
        let mut total = 0.0;
        for (w, &primal) in self.breaks.windows(2).zip(&self.primal) {
            let (a0, a1) = (w[0], w[1]);
            let (u0, u1, base, slope) = if primal {
                (norm_isf(0.5 * (1.0 - a0)), norm_isf(0.5 * (1.0 - a1)), -ls, -self.c)
            } else {
                (norm_isf(0.5 * a1), norm_isf(0.5 * a0), ls, self.c * self.sigma * self.sigma)
            };
            let (u0, u1) = (u0.max(0.0), u1.min(U_MAX));
            let mut cuts = vec![u0];
            if slope != 0.0 {
                for &k in kinks {
                    let r = (k - base) / slope;
                    if r > 0.0 {
                        let u = r.sqrt();
                        if u > u0 && u < u1 {
                            cuts.push(u);
                        }
                    }
                }
            }
            cuts.push(u1);
            cuts.sort_by(f64::total_cmp);
            for c in cuts.windows(2) {
                total += integrate(|u| g(base + slope * u * u) * 2.0 * norm_pdf(u), c[0], c[1], panels, rule);
            }
        }
        total
    }
}

/// Functionals of `f̄`: `kl = -∫ log|f̄'|`, `κ₂ = ∫ log²|f̄'|`, `κ₃ = ∫ |log|f̄'||³`
/// and the centred `κ̄₃ = ∫ |log|f̄'| + kl|³`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Functionals {
    pub kl: f64,
    pub k2: f64,
    pub k3: f64,
    pub k3bar: f64,
}

fn functionals_at(s: &SymmetrizedPair, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> Functionals {
    let kl = -s.integrate_moment(|l| l, &[], panels, rule);
    let k2 = s.integrate_moment(|l| l * l, &[], panels, rule);
    let k3 = s.integrate_moment(|l| l.abs().powi(3), &[0.0], panels, rule);
    let k3bar = s.integrate_moment(|l| (l + kl).abs().powi(3), &[-kl], panels, rule);
    Functionals { kl, k2, k3, k3bar }
}

/// Functionals of the symmetrized pair, with a panel-doubling convergence check.
pub fn functionals(sigma: f64, quadrature_points: usize) -> Result<Functionals> {
    if quadrature_points == 0 {
        return Err(Error::param("quadrature_points must be positive"));
    }
    let s = SymmetrizedPair::new(sigma)?;
    if sigma == 1.0 {
        return Ok(Functionals { kl: 0.0, k2: 0.0, k3: 0.0, k3bar: 0.0 });
    }
    let rule = gauss_legendre(GL_ORDER);
    let a = functionals_at(&s, quadrature_points, &rule);
    let b = functionals_at(&s, 2 * quadrature_points, &rule);
    let scale = a.k2.sqrt().max(f64::MIN_POSITIVE);
    let pairs = [(a.kl, b.kl, scale), (a.k2, b.k2, a.k2), (a.k3, b.k3, a.k3), (a.k3bar, b.k3bar, a.k3bar)];
    if pairs.iter().any(|(x, y, s)| (x - y).abs() > 1e-9 * s.abs().max(1e-300)) {
        return Err(Error::Numerical(format!(
            "functional quadrature did not converge with {quadrature_points} panels"
        )));
    }
    Ok(b)
}

/// Berry-Esseen CLT envelope for `m` copies of the symmetrized zero-mean pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CltEnvelope {
    pub mu: f64,
    pub gamma: f64,
    pub copies: u64,
}

impl CltEnvelope {
    pub fn new(sigma: f64, copies: u64) -> Result<Self> {
        if copies == 0 {
            return Err(Error::param("copies must be at least 1"));
        }
        let f = functionals(sigma, DEFAULT_QUADRATURE_POINTS)?;
        let m = copies as f64;
        let var = m * (f.k2 - f.kl * f.kl);
        if var.is_nan() || var <= 0.0 {
            return Err(Error::AssumptionViolated("zero variance: the pair is the identity".into()));
        }
        let mu = 2.0 * m * f.kl / var.sqrt();
        let gamma = 0.56 * m * f.k3bar / var.powf(1.5);
        if gamma >= 0.5 {
            return Err(Error::AssumptionViolated(format!("Berry-Esseen gamma = {gamma} is not below 1/2")));
        }
        Ok(CltEnvelope { mu, gamma, copies })
    }

    fn g(&self, a: f64) -> f64 {
        gdp_curve(self.mu).expect("finite mu").eval(a)
    }

    /// Lower bound `G_μ(α + γ) - γ`.
    pub fn lower(&self, alpha: f64) -> f64 {
        self.g(alpha + self.gamma) - self.gamma
    }

    /// Upper bound `G_μ(α - γ) + γ`.
    pub fn upper(&self, alpha: f64) -> f64 {
        self.g(alpha - self.gamma) + self.gamma
    }

    /// `(lower, upper)` at `alpha`; defined on `[γ, 1 - γ]`.
    pub fn bounds(&self, alpha: f64) -> Result<(f64, f64)> {
        if !(alpha >= self.gamma && alpha <= 1.0 - self.gamma) {
            return Err(Error::Domain(format!("alpha = {alpha} outside [{0}, {1}]", self.gamma, 1.0 - self.gamma)));
        }
        Ok((self.lower(alpha), self.upper(alpha)))
    }

    /// Convex, non-increasing curve lying above the product on all of `[0, 1]`:
    /// the greatest convex minorant of `min{upper, 1 - α}` (with `1 - α`
    /// outside `[γ, 1 - γ]`).
    pub fn upper_curve(&self, grid: &[f64]) -> Result<TradeoffCurve> {
        check_grid(grid)?;
        let mut knots: Vec<f64> = grid.to_vec();
        knots.extend([0.0, self.gamma, 1.0 - self.gamma, 1.0]);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let raw: Vec<[f64; 2]> = knots
            .iter()
            .map(|&a| {
                let id = 1.0 - a;
                let v = if a >= self.gamma && a <= 1.0 - self.gamma { self.upper(a).min(id) } else { id };
                [a, v]
            })
            .collect();
        let hull = lower_hull(&raw);
        let pts = grid.iter().map(|&a| [a, interp_hull(&hull, a)]).collect();
        Ok(TradeoffCurve::grid_unchecked(pts, "clt_upper"))
    }
}

fn lower_hull(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut h: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for &p in pts {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            if cross <= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(p);
    }
    h
}

fn interp_hull(h: &[[f64; 2]], a: f64) -> f64 {
    let i = h.partition_point(|p| p[0] < a);
    if i == 0 {
        return h[0][1];
    }
    if i >= h.len() {
        return h[h.len() - 1][1];
    }
    let (p, q) = (h[i - 1], h[i]);
    p[1] + (a - p[0]) / (q[0] - p[0]) * (q[1] - p[1])
}

/// `(G_μ(α+γ) - γ, G_μ(α-γ) + γ)` for `m` copies of the symmetrized pair.
pub fn clt_bounds(pair: GaussianPair, copies: u64, alpha: f64) -> Result<(f64, f64)> {
    if pair.mu != 0.0 {
        return Err(Error::param("the CLT envelope applies to zero-mean pairs"));
    }
    CltEnvelope::new(pair.sigma, copies)?.bounds(alpha)
}

/// Monte Carlo trade-off curve of `m` copies of the symmetrized pair.
///
/// Under the null the per-copy LLR is `log|f̄'(U)|` with `U` uniform; since
/// `f̄` is symmetric, the alternative's LLR is the negation of a null draw.
pub fn symmetrized_product_mc(
    sigma: f64,
    copies: u64,
    alpha_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<TradeoffCurve> {
    if samples < super::MIN_MC_SAMPLES {
        return Err(Error::param(format!("at least {} Monte Carlo samples are required", super::MIN_MC_SAMPLES)));
    }
    check_grid(alpha_grid)?;
    let s = SymmetrizedPair::new(sigma)?;
    let draw = |dom: u64, sign: f64| {
        let mut v: Vec<f64> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, dom, i);
                let mut l = 0.0;
                for _ in 0..copies {
                    let u: f64 = rng.gen();
                    l += s.log_slope(u);
                }
                sign * l
            })
            .collect();
        v.par_sort_unstable_by(f64::total_cmp);
        v
    };
    let p = draw(domain::LLR_P, 1.0);
    let q = draw(domain::LLR_Q, -1.0);
    Ok(roc_curve(&p, &q, alpha_grid, "symmetrized_product_mc"))
}
