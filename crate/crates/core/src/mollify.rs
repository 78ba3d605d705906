//! Mollifier families, right-distance erosion and the group-local convolution
//! `(phi_eps * u)(x) = int_{B(0,eps)} phi_eps(y) u(y^{-1} . x) dy`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{horizontal_gradient_into, Evaluator, GradientMode, ScalarField};
use crate::domain::GridDomain;
use crate::error::{check_dim, Error, Result};
use crate::group::{HomogeneousNorm, StratifiedGroup, MAX_DIM};

/// Nodes per axis of the unit-ball rule.
pub const DEFAULT_RESOLUTION: usize = 17;
/// Upper bound on the node count of the unit-ball rule (`17^4`).
pub const MAX_NODES: usize = 83_521;

/// Unnormalized bump `exp(-1/(1 - r^2))` on `r < 1`.
fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Radial bump profile in a homogeneous norm, normalized against a fixed
/// midpoint rule on the box enclosing the unit ball.
#[derive(Clone, Debug)]
pub struct MollifierFamily {
    group: StratifiedGroup,
    norm: HomogeneousNorm,
    resolution: usize,
    normalization: f64,
    /// Nodes `z_k` with `rho(z_k) < 1`, flattened.
    nodes: Arc<[f64]>,
    /// `phi(z_k) * cell volume`, summing to one.
    weights: Arc<[f64]>,
}

/// Outcome of checking the defining properties of a mollifier family at one scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MollifierLaws {
    pub epsilon: f64,
    pub min_value: f64,
    pub support_violation: f64,
    pub mass: f64,
    pub mass_residual: f64,
    /// Mass measured with a finer rule of the same kind, for reference.
    pub refined_mass: f64,
    pub symmetric: bool,
}

impl MollifierLaws {
    pub fn passes(&self, mass_tol: f64) -> bool {
        self.min_value >= 0.0 && self.support_violation == 0.0 && self.mass_residual <= mass_tol
    }
}

impl MollifierFamily {
    pub fn new(g: &StratifiedGroup, norm: HomogeneousNorm, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::Config("mollifier resolution must be positive".into()));
        }
        let n = g.dim();
        let resolution = Self::capped_resolution(n, resolution);
        let (raw_nodes, raw_weights, cell) = Self::rule(g, norm, resolution);
        let total: f64 = raw_weights.iter().sum::<f64>() * cell;
        if !(total > 0.0) {
            return Err(Error::Config("mollifier rule has no interior nodes".into()));
        }
        let weights: Vec<f64> = raw_weights.iter().map(|w| w * cell / total).collect();
        Ok(Self {
            group: g.clone(),
            norm,
            resolution,
            normalization: total,
            nodes: raw_nodes.into(),
            weights: weights.into(),
        })
    }

    pub fn standard(g: &StratifiedGroup, norm: HomogeneousNorm) -> Result<Self> {
        Self::new(g, norm, DEFAULT_RESOLUTION)
    }

    /// Largest resolution not above `requested` keeping the node count within [`MAX_NODES`].
    pub fn capped_resolution(n: usize, requested: usize) -> usize {
        let mut r = requested.max(1);
        while r > 1 && (r as f64).powi(n as i32) > MAX_NODES as f64 {
            r -= 1;
        }
        r
    }

    /// Midpoint nodes of `[-1, 1]^n` strictly inside the unit ball, their raw
    /// profile values and the cell volume.
    fn rule(g: &StratifiedGroup, norm: HomogeneousNorm, resolution: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let n = g.dim();
        let h = 2.0 / resolution as f64;
        let cell = h.powi(n as i32);
        let total = resolution.pow(n as u32);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut z = vec![0.0; n];
        for idx in 0..total {
            let mut rest = idx;
            for k in (0..n).rev() {
                z[k] = -1.0 + (rest % resolution) as f64 * h + 0.5 * h;
                rest /= resolution;
            }
            let w = bump(norm.eval(g, &z));
            if w > 0.0 {
                nodes.extend_from_slice(&z);
                weights.push(w);
            }
        }
        (nodes, weights, cell)
    }

    pub fn group(&self) -> &StratifiedGroup {
        &self.group
    }

    pub fn norm(&self) -> HomogeneousNorm {
        self.norm
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// The profile depends on `rho` only, and every supported norm is even.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// Normalized profile `phi(z)`.
    pub fn profile(&self, z: &[f64]) -> f64 {
        bump(self.norm.eval(&self.group, z)) / self.normalization
    }

    /// `phi_eps(y) = eps^{-Q} phi(delta_{1/eps} y)`.
    pub fn kernel(&self, eps: f64, y: &[f64]) -> f64 {
        let n = y.len();
        let mut z = [0.0; MAX_DIM];
        self.group.dilate_into(1.0 / eps, y, &mut z[..n]);
        self.profile(&z[..n]) / eps.powi(self.group.homogeneous_dimension() as i32)
    }

    /// Checks nonnegativity, support in `B(0, eps)` and unit mass at scale `eps`.
    pub fn laws(&self, eps: f64) -> Result<MollifierLaws> {
        if !(eps > 0.0) {
            return Err(Error::NonPositiveScale(eps));
        }
        let g = &self.group;
        let n = g.dim();
        let q = g.homogeneous_dimension() as i32;
        // mass of phi_eps on the dilated rule: nodes delta_eps z_k, cell volume eps^Q h^n
        let cell = (2.0 / self.resolution as f64).powi(n as i32) * eps.powi(q);
        let mut y = vec![0.0; n];
        let mut mass = 0.0;
        let mut min_value = f64::INFINITY;
        for z in self.nodes.chunks(n) {
            g.dilate_into(eps, z, &mut y);
            let v = self.kernel(eps, &y);
            min_value = min_value.min(v);
            mass += v * cell;
        }
        // sample the kernel on a box twice the size of the ball: outside B(0, eps) it must vanish
        let probe_res = 9usize.min(Self::capped_resolution(n, 9));
        let (blo, bhi) = g.ball_box(2.0 * eps);
        let mut support_violation: f64 = 0.0;
        let total = probe_res.pow(n as u32);
        for idx in 0..total {
            let mut rest = idx;
            for k in (0..n).rev() {
                let t = (rest % probe_res) as f64 / (probe_res - 1).max(1) as f64;
                y[k] = blo[k] + t * (bhi[k] - blo[k]);
                rest /= probe_res;
            }
            let v = self.kernel(eps, &y);
            min_value = min_value.min(v);
            if self.norm.eval(g, &y) >= eps {
                support_violation = support_violation.max(v.abs());
            }
        }
        let (_, fine, fine_cell) = Self::rule(g, self.norm, 2 * self.resolution + 1);
        let refined_mass = fine.iter().sum::<f64>() * fine_cell / self.normalization;
        Ok(MollifierLaws {
            epsilon: eps,
            min_value,
            support_violation,
            mass,
            mass_residual: (mass - 1.0).abs(),
            refined_mass,
            symmetric: self.is_symmetric(),
        })
    }

    /// Weights and nodes `(w_k, delta_eps z_k)` of the rule for `int_{B(0,eps)} phi_eps(y) ... dy`.
    pub fn scaled_rule(&self, eps: f64) -> Vec<(f64, Vec<f64>)> {
        let n = self.group.dim();
        self.nodes
            .chunks(n)
            .zip(self.weights.iter())
            .map(|(z, w)| {
                let mut y = vec![0.0; n];
                self.group.dilate_into(eps, z, &mut y);
                (*w, y)
            })
            .collect()
    }

    /// The nodes `-(delta_eps z_k)` of the scaled rule, flattened.
    fn shifts(&self, eps: f64) -> Vec<f64> {
        let n = self.group.dim();
        let mut out = vec![0.0; self.nodes.len()];
        for (z, s) in self.nodes.chunks(n).zip(out.chunks_mut(n)) {
            self.group.dilate_into(eps, z, s);
            s.iter_mut().for_each(|c| *c = -*c);
        }
        out
    }
}

/// `Omega_eps^R`: masked cells whose center has right distance greater than
/// `eps` from every center of the complement lattice.
pub fn erode_domain(g: &StratifiedGroup, norm: HomogeneousNorm, omega: &GridDomain, eps: f64) -> Result<GridDomain> {
    check_dim(g.dim(), omega.dim())?;
    if !(eps > 0.0) {
        return Err(Error::NonPositiveScale(eps));
    }
    let cap = eps * (1.0 + 1e-9) + 1e-300;
    let keep = omega.map_masked(|c| Ok(omega.right_distance_to_complement(g, norm, c, cap) > eps))?;
    let mut mask = vec![false; omega.total_cells()];
    for (idx, k) in omega.masked_indices().into_iter().zip(keep) {
        mask[idx] = k;
    }
    omega.with_mask(mask)
}

/// `phi_eps * u`, defined on the eroded domain it carries.
#[derive(Clone)]
pub struct Mollified {
    group: StratifiedGroup,
    epsilon: f64,
    weights: Arc<[f64]>,
    shifts: Arc<[f64]>,
    inner: ScalarField,
    domain: GridDomain,
}

impl Mollified {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The eroded domain `Omega_eps^R`.
    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn field(&self) -> ScalarField {
        ScalarField::new(self.clone())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        match self.domain.locate(x) {
            Some(i) if self.domain.is_masked(i) => Ok(()),
            _ => Err(Error::OutsideDomain(x.to_vec())),
        }
    }
}

impl Evaluator for Mollified {
    fn dim(&self) -> usize {
        self.group.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let n = x.len();
        let mut w = [0.0; MAX_DIM];
        let mut total = 0.0;
        for (s, wk) in self.shifts.chunks(n).zip(self.weights.iter()) {
            self.group.mul_into(s, x, &mut w[..n]);
            total += wk * self.inner.value(&w[..n])?;
        }
        Ok(total)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<bool> {
        self.check(x)?;
        let n = x.len();
        let mut w = [0.0; MAX_DIM];
        let mut gw = [0.0; MAX_DIM];
        let mut e = [0.0; MAX_DIM];
        let mut col = [0.0; MAX_DIM];
        out.fill(0.0);
        for (s, wk) in self.shifts.chunks(n).zip(self.weights.iter()) {
            self.group.mul_into(s, x, &mut w[..n]);
            if !self.inner.euclidean_gradient(&w[..n], &mut gw[..n])? {
                return Ok(false);
            }
            for k in 0..n {
                e[k] = 1.0;
                self.group.left_translation_differential(s, x, &e[..n], &mut col[..n]);
                e[k] = 0.0;
                out[k] += wk * (0..n).map(|l| gw[l] * col[l]).sum::<f64>();
            }
        }
        Ok(true)
    }
}

/// Convolve `u` with `phi_eps` over `omega`; the result lives on `Omega_eps^R`.
pub fn convolve(mf: &MollifierFamily, eps: f64, u: &ScalarField, omega: &GridDomain) -> Result<Mollified> {
    let g = &mf.group;
    check_dim(g.dim(), u.dim())?;
    let domain = erode_domain(g, mf.norm, omega, eps)?;
    Ok(Mollified {
        group: g.clone(),
        epsilon: eps,
        weights: mf.weights.clone(),
        shifts: mf.shifts(eps).into(),
        inner: u.clone(),
        domain,
    })
}

/// Worst disagreement between `X_j(phi_eps * u)` and `phi_eps * (X_j u)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutationReport {
    pub epsilon: f64,
    pub component: usize,
    pub samples: usize,
    pub max_residual: f64,
    pub max_abs_lhs: f64,
}

/// At most this many eroded-domain centers are sampled by the commutation check.
const COMMUTATION_SAMPLES: usize = 2000;

/// Compares `X_j(phi_eps * u)`, differentiated with `mode`, with the convolution of
/// the analytic `X_j u` (component `j` is 0-based) over the centers of `Omega_eps^R`.
pub fn convolve_commutes_with_xj(
    mf: &MollifierFamily,
    eps: f64,
    u: &ScalarField,
    omega: &GridDomain,
    j: usize,
    mode: GradientMode,
) -> Result<CommutationReport> {
    let g = mf.group.clone();
    let m = g.horizontal_dim();
    if j >= m {
        return Err(Error::Config(format!("component {j} out of range for {m} horizontal directions")));
    }
    let conv = convolve(mf, eps, u, omega)?;
    let xj = {
        let g = g.clone();
        let u = u.clone();
        ScalarField::from_fn(g.dim(), move |x| {
            let mut grad = vec![0.0; g.horizontal_dim()];
            match horizontal_gradient_into(&g, &u, x, GradientMode::Analytic, &mut grad) {
                Ok(()) => grad[j],
                Err(_) => f64::NAN,
            }
        })
    };
    let conv_xj = convolve(mf, eps, &xj, omega)?;
    let lhs_field = conv.field();
    let rhs_field = conv_xj.field();
    let cells = conv.domain().masked_indices();
    let stride = cells.len().div_ceil(COMMUTATION_SAMPLES).max(1);
    let sample: Vec<usize> = cells.into_iter().step_by(stride).collect();
    let rows: Vec<(f64, f64)> = sample
        .par_iter()
        .map(|&idx| {
            let c = conv.domain().center(idx);
            let mut grad = vec![0.0; m];
            horizontal_gradient_into(&g, &lhs_field, &c, mode, &mut grad)?;
            let rhs = rhs_field.value(&c)?;
            if !rhs.is_finite() {
                return Err(Error::GradientUnavailable("commutation check needs a closed-form gradient".into()));
            }
            Ok(((grad[j] - rhs).abs(), grad[j].abs()))
        })
        .collect::<Result<_>>()?;
    Ok(CommutationReport {
        epsilon: eps,
        component: j,
        samples: rows.len(),
        max_residual: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        max_abs_lhs: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    #[serde(rename = "Lp_err")]
    pub lp_err: f64,
    #[serde(rename = "W1p_err")]
    pub w1p_err: f64,
}

/// `||phi_eps * u - u||_{L^p(V)}` and `||grad_G(phi_eps * u) - grad_G u||_{L^p(V)}`
/// for each `eps`, with `V` required to sit inside `Omega_eps^R` for the largest `eps`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_table(
    mf: &MollifierFamily,
    u: &ScalarField,
    omega: &GridDomain,
    v: &GridDomain,
    p: f64,
    eps_list: &[f64],
    mode: GradientMode,
) -> Result<Vec<ConvergenceRow>> {
    let g = &mf.group;
    if !(p >= 1.0) {
        return Err(Error::Config(format!("exponent p = {p} must be at least 1")));
    }
    if v.is_empty() {
        return Err(Error::EmptyDomain("convergence table over an empty set".into()));
    }
    let max_eps = eps_list.iter().cloned().fold(0.0, f64::max);
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("epsilon schedule must be a nonempty list of positive numbers".into()));
    }
    let margin = v.right_margin_in(omega, g, mf.norm, 2.0 * max_eps);
    if !(margin > max_eps) {
        return Err(Error::MarginViolation(format!(
            "inner set has right margin {margin:.6} inside the outer set, not above the largest epsilon {max_eps}"
        )));
    }
    let m = g.horizontal_dim();
    let reference = v.map_masked(|c| {
        let mut grad = vec![0.0; m];
        horizontal_gradient_into(g, u, c, mode, &mut grad)?;
        Ok((u.value(c)?, grad))
    })?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let conv = convolve(mf, eps, u, omega)?.field();
        let diffs = v.map_masked(|c| {
            let mut grad = vec![0.0; m];
            horizontal_gradient_into(g, &conv, c, mode, &mut grad)?;
            Ok((conv.value(c)?, grad))
        })?;
        let mut lp = 0.0;
        let mut w1p = 0.0;
        for ((val, grad), (rv, rg)) in diffs.iter().zip(&reference) {
            lp += (val - rv).abs().powf(p);
            let d: f64 = grad.iter().zip(rg).map(|(a, b)| (a - b) * (a - b)).sum();
            w1p += d.sqrt().powf(p);
        }
        let vol = v.cell_volume();
        rows.push(ConvergenceRow {
            epsilon: eps,
            lp_err: (lp * vol).powf(1.0 / p),
            w1p_err: (w1p * vol).powf(1.0 / p),
        });
    }
    Ok(rows)
}
