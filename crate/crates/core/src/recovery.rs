//! Recovery of the integrand from a functional through the probes `u_xi`, the
//! constancy probe over shrinking balls, and the uniqueness check.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{probe_field, HorizontalVector, ScalarField};
use crate::domain::GridDomain;
use crate::error::{check_dim, Error, Result};
use crate::functional::Functional;
use crate::group::{HomogeneousNorm, StratifiedGroup};
use crate::integrand::Growth;

/// Uniform grid of probe directions on `[-radius, radius]^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiGrid {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_radius() -> f64 {
    4.0
}

fn default_points() -> usize {
    17
}

impl Default for XiGrid {
    fn default() -> Self {
        Self { radius: default_radius(), points: default_points() }
    }
}

impl XiGrid {
    /// Grid points, last axis fastest. A single point per axis gives the origin.
    pub fn points(&self, m: usize) -> Vec<Vec<f64>> {
        let k = self.points.max(1);
        let total = k.pow(m as u32);
        (0..total)
            .map(|idx| {
                let mut rest = idx;
                let mut xi = vec![0.0; m];
                for c in xi.iter_mut().rev() {
                    let i = rest % k;
                    rest /= k;
                    *c = if k == 1 { 0.0 } else { -self.radius + 2.0 * self.radius * i as f64 / (k - 1) as f64 };
                }
                xi
            })
            .collect()
    }
}

/// `f_rec(xi) = F(u_xi, A_0) / |A_0|` on a set of directions, with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredIntegrand {
    pub xi: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub a0_volume: f64,
    /// Largest `f(mid) - (f(left) + f(right)) / 2` over grid triples with midpoint at this entry.
    pub convexity_violation: Vec<f64>,
    pub max_convexity_violation: f64,
    pub growth: Option<Growth>,
    /// Where the growth constants come from: "certificate" or "fitted".
    pub growth_source: String,
    /// `a + b |xi|^p - f_rec(xi)`.
    pub growth_slack: Vec<f64>,
    pub min_growth_slack: f64,
}

/// Probe a functional with `u_xi` on `A_0`.
pub fn recover_integrand(f: &Functional, a0: &GridDomain, xis: &[Vec<f64>]) -> Result<RecoveredIntegrand> {
    let g = f.group();
    let vol = a0.volume();
    if a0.is_empty() || !(vol > 0.0) {
        return Err(Error::EmptyDomain("recovery set A_0 has zero volume".into()));
    }
    for xi in xis {
        check_dim(g.horizontal_dim(), xi.len())?;
    }
    let values: Vec<f64> = xis
        .par_iter()
        .map(|xi| {
            let u = probe_field(g, &HorizontalVector(xi.clone()))?;
            Ok(f.eval(&u, a0)? / vol)
        })
        .collect::<Result<_>>()?;
    let convexity_violation = midpoint_convexity(xis, &values);
    let max_convexity_violation = convexity_violation.iter().cloned().fold(0.0, f64::max);
    let (growth, growth_source) = match f.hypotheses().growth {
        Some(gr) => (Some(gr), "certificate"),
        None => (fit_growth(xis, &values, 2.0), "fitted"),
    };
    let growth_slack: Vec<f64> = match growth {
        Some(gr) => xis.iter().zip(&values).map(|(xi, v)| gr.bound(norm(xi)) - v).collect(),
        None => vec![f64::NAN; xis.len()],
    };
    let min_growth_slack = growth_slack.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RecoveredIntegrand {
        xi: xis.to_vec(),
        values,
        a0_volume: vol,
        convexity_violation,
        max_convexity_violation,
        growth,
        growth_source: growth_source.into(),
        growth_slack,
        min_growth_slack,
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|c| (c * 1e9).round() as i64).collect()
}

/// Midpoint convexity violations over all pairs whose midpoint is also a sample.
pub fn midpoint_convexity(xis: &[Vec<f64>], values: &[f64]) -> Vec<f64> {
    let index: HashMap<Vec<i64>, usize> = xis.iter().enumerate().map(|(i, x)| (key(x), i)).collect();
    let mut out = vec![0.0f64; xis.len()];
    let mut mid = vec![0.0; xis.first().map_or(0, |x| x.len())];
    for i in 0..xis.len() {
        for j in i + 1..xis.len() {
            for (k, c) in mid.iter_mut().enumerate() {
                *c = 0.5 * (xis[i][k] + xis[j][k]);
            }
            if let Some(&k) = index.get(&key(&mid)) {
                let avg = 0.5 * (values[i] + values[j]);
                if values[k].is_finite() && avg.is_finite() {
                    out[k] = out[k].max(values[k] - avg);
                }
            }
        }
    }
    out
}

/// Smallest `(a, b)` for exponent `p` with `a = f(0)` (or the minimum) and
/// `f(xi) <= a + b |xi|^p` on the samples.
pub fn fit_growth(xis: &[Vec<f64>], values: &[f64], p: f64) -> Option<Growth> {
    if values.iter().any(|v| !v.is_finite()) || values.is_empty() {
        return None;
    }
    let a = xis
        .iter()
        .zip(values)
        .find(|(x, _)| norm(x) == 0.0)
        .map(|(_, v)| *v)
        .unwrap_or_else(|| values.iter().cloned().fold(f64::INFINITY, f64::min))
        .max(0.0);
    let b = xis
        .iter()
        .zip(values)
        .filter(|(x, _)| norm(x) > 0.0)
        .map(|(x, v)| (v - a) / norm(x).powf(p))
        .fold(0.0, f64::max);
    Some(Growth { a, b, p })
}

/// Averages `F(u_xi, B_rho(x_i)) / |B_rho(x_i)|` over centers and radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstancyRow {
    pub radius: f64,
    pub values: Vec<f64>,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    pub xi: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub rows: Vec<ConstancyRow>,
    pub max_spread: f64,
    /// Spread across radii at each center.
    pub radius_spread: f64,
    pub tolerance: f64,
    /// The spread exceeds the tolerance: the functional depends on position.
    pub detected: bool,
}

/// Settings for [`constancy_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstancySettings {
    pub norm: HomogeneousNorm,
    /// Cells across the diameter of each ball.
    pub cells_per_axis: usize,
    /// Relative tolerance on the spread, scaled by `1 + max |value|`.
    pub tolerance: f64,
}

impl Default for ConstancySettings {
    fn default() -> Self {
        Self { norm: HomogeneousNorm::WeightedMax, cells_per_axis: 8, tolerance: 1e-9 }
    }
}

pub fn constancy_probe(
    f: &Functional,
    xi: &[f64],
    centers: &[Vec<f64>],
    radii: &[f64],
    settings: &ConstancySettings,
) -> Result<ConstancyReport> {
    let g: &StratifiedGroup = f.group();
    let u: ScalarField = probe_field(g, &HorizontalVector(xi.to_vec()))?;
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::Config("constancy probe needs centers and radii".into()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    let mut scale: f64 = 0.0;
    for &rho in radii {
        let values: Vec<f64> = centers
            .par_iter()
            .map(|x| {
                let ball = GridDomain::ball(g, settings.norm, x, rho, settings.cells_per_axis)?;
                Ok(f.eval(&u, &ball)? / ball.volume())
            })
            .collect::<Result<_>>()?;
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        scale = scale.max(hi.abs()).max(lo.abs());
        rows.push(ConstancyRow { radius: rho, values, spread: hi - lo });
    }
    let max_spread = rows.iter().map(|r| r.spread).fold(0.0, f64::max);
    let radius_spread = (0..centers.len())
        .map(|i| {
            let col = rows.iter().map(|r| r.values[i]);
            col.clone().fold(f64::NEG_INFINITY, f64::max) - col.fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let tolerance = settings.tolerance * (1.0 + scale);
    Ok(ConstancyReport {
        xi: xi.to_vec(),
        centers: centers.to_vec(),
        rows,
        max_spread,
        radius_spread,
        tolerance,
        detected: max_spread > tolerance,
    })
}

/// Tolerances for [`verify_uniqueness`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessSettings {
    /// Probe values `F(u_xi, A_0)` and `G(u_xi, A_0)` within this are treated as equal.
    pub probe_tol: f64,
    pub abs_tol: f64,
    /// Multiplier on the midpoint error bounds of both functionals.
    pub refinement_factor: f64,
}

impl Default for UniquenessSettings {
    fn default() -> Self {
        Self { probe_tol: 1e-10, abs_tol: 1e-12, refinement_factor: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessVerdict {
    /// Probes agree and so do all sampled values.
    Equal,
    /// Probes disagree: the functionals differ.
    Distinct,
    /// Probes agree but a sampled value does not.
    Counterexample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub probe_gap: f64,
    pub probes_agree: bool,
    pub residuals: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub max_residual: f64,
    pub counterexamples: Vec<usize>,
    pub verdict: UniquenessVerdict,
}

/// Compare `F` and `G` on the probes over `A_0`, then on the sampled `(u, A)`.
/// Each sample is allowed the sum of both midpoint error bounds (times the
/// refinement factor) when the functionals are built from integrands.
pub fn verify_uniqueness(
    f: &Functional,
    g: &Functional,
    a0: &GridDomain,
    xis: &[Vec<f64>],
    samples: &[(ScalarField, GridDomain)],
    settings: &UniquenessSettings,
) -> Result<UniquenessReport> {
    let rf = recover_integrand(f, a0, xis)?;
    let rg = recover_integrand(g, a0, xis)?;
    let probe_gap = rf
        .values
        .iter()
        .zip(&rg.values)
        .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() * rf.a0_volume })
        .fold(0.0, f64::max);
    let probes_agree = probe_gap <= settings.probe_tol;
    let rows: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|(u, a)| {
            let (x, y) = (f.eval(u, a)?, g.eval(u, a)?);
            let mut tol = settings.abs_tol;
            for h in [f, g] {
                if h.is_built() {
                    tol += settings.refinement_factor * h.midpoint_error_bound(u, a)?;
                }
            }
            Ok((if x == y { 0.0 } else { (x - y).abs() }, tol))
        })
        .collect::<Result<_>>()?;
    let counterexamples: Vec<usize> = rows.iter().enumerate().filter(|(_, (r, t))| r > t).map(|(i, _)| i).collect();
    let verdict = if !probes_agree {
        UniquenessVerdict::Distinct
    } else if counterexamples.is_empty() {
        UniquenessVerdict::Equal
    } else {
        UniquenessVerdict::Counterexample
    };
    Ok(UniquenessReport {
        probe_gap,
        probes_agree,
        max_residual: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        residuals: rows.iter().map(|r| r.0).collect(),
        tolerances: rows.iter().map(|r| r.1).collect(),
        counterexamples,
        verdict,
    })
}
