//! Integral functionals `F(u, A) = int_A f(grad_G u) dx` and checkers for the
//! structural properties of functionals on fields and grid domains.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{horizontal_gradient_into, translate_domain, translate_field, GradientMode, ScalarField};
use crate::domain::GridDomain;
use crate::error::{check_dim, Error, Result};
use crate::expr::Expr;
use crate::group::StratifiedGroup;
use crate::integrand::{Growth, Integrand};
use crate::mollify::{convolve, MollifierFamily};
use crate::sampling::{random_field, random_subdomain, rng};

/// Quadrature used by built-from-integrand functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePolicy {
    /// Midpoint sub-cells per axis inside every grid cell.
    #[serde(default = "one")]
    pub subdivisions: usize,
    /// Gradient evaluation; by default analytic when the field has a closed-form
    /// gradient and group differences with the grid spacing otherwise.
    #[serde(default)]
    pub gradient: Option<GradientMode>,
}

fn one() -> usize {
    1
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        Self { subdivisions: 1, gradient: None }
    }
}

impl QuadraturePolicy {
    pub fn midpoint() -> Self {
        Self::default()
    }

    pub fn subdivided(subdivisions: usize) -> Self {
        Self { subdivisions: subdivisions.max(1), gradient: None }
    }
}

pub type BlackBoxFn = dyn Fn(&ScalarField, &GridDomain) -> Result<f64> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Integral(Integrand),
    /// `int_A w(x) f(grad_G u(x)) dx`.
    Weighted(Expr, Integrand),
    BlackBox(Arc<BlackBoxFn>),
}

/// Which structural hypotheses a functional carries by construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    /// (a) `F(u, A)` depends on `u` restricted to `A` only.
    pub locality: bool,
    /// (b) `F(u, .)` is additive over disjoint sets.
    pub measure: bool,
    /// (c) convex in `u`.
    pub convexity: bool,
    /// (d) `F(u + c, A) = F(u, A)`.
    pub constant_shift: bool,
    /// (e) `F(u, A) <= int_A (a + b |grad_G u|^p)`.
    pub growth: Option<Growth>,
    pub left_invariant: bool,
}

impl Hypotheses {
    pub fn none() -> Self {
        Self {
            locality: false,
            measure: false,
            convexity: false,
            constant_shift: false,
            growth: None,
            left_invariant: false,
        }
    }
}

/// A nonnegative functional of a field and a grid domain.
#[derive(Clone)]
pub struct Functional {
    group: StratifiedGroup,
    kind: Kind,
    quadrature: QuadraturePolicy,
    hypotheses: Hypotheses,
    label: String,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("label", &self.label)
            .field("quadrature", &self.quadrature)
            .field("hypotheses", &self.hypotheses)
            .finish_non_exhaustive()
    }
}

impl Functional {
    /// `F(u, A) = int_A f(grad_G u)`.
    pub fn integral(g: &StratifiedGroup, integrand: Integrand, quadrature: QuadraturePolicy) -> Result<Self> {
        check_dim(g.horizontal_dim(), integrand.dim())?;
        let hypotheses = Hypotheses {
            locality: true,
            measure: true,
            convexity: true,
            constant_shift: true,
            growth: integrand.growth(),
            left_invariant: true,
        };
        let label = serde_json::to_string(&integrand)?;
        Ok(Self { group: g.clone(), kind: Kind::Integral(integrand), quadrature, hypotheses, label })
    }

    /// `F(u, A) = int_A w(x) f(grad_G u(x)) dx` for a nonnegative weight `w`;
    /// local, additive and convex, but not left-invariant unless `w` is constant.
    pub fn weighted(
        g: &StratifiedGroup,
        weight: Expr,
        integrand: Integrand,
        quadrature: QuadraturePolicy,
    ) -> Result<Self> {
        check_dim(g.horizontal_dim(), integrand.dim())?;
        weight.validate(g.dim(), g.horizontal_dim())?;
        let hypotheses = Hypotheses {
            locality: true,
            measure: true,
            convexity: true,
            constant_shift: true,
            growth: None,
            left_invariant: false,
        };
        let label = format!("weighted {}", serde_json::to_string(&integrand)?);
        Ok(Self { group: g.clone(), kind: Kind::Weighted(weight, integrand), quadrature, hypotheses, label })
    }

    /// An opaque functional; checkers can only sample it.
    pub fn black_box(
        g: &StratifiedGroup,
        label: impl Into<String>,
        f: impl Fn(&ScalarField, &GridDomain) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            group: g.clone(),
            kind: Kind::BlackBox(Arc::new(f)),
            quadrature: QuadraturePolicy::default(),
            hypotheses: Hypotheses::none(),
            label: label.into(),
        }
    }

    /// Wrap another functional as a black box.
    pub fn opaque(inner: &Functional) -> Self {
        let inner = inner.clone();
        let label = format!("opaque({})", inner.label);
        let g = inner.group.clone();
        Self::black_box(&g, label, move |u, a| inner.eval(u, a))
    }

    pub fn group(&self) -> &StratifiedGroup {
        &self.group
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn hypotheses(&self) -> &Hypotheses {
        &self.hypotheses
    }

    pub fn quadrature(&self) -> QuadraturePolicy {
        self.quadrature
    }

    pub fn integrand(&self) -> Option<&Integrand> {
        match &self.kind {
            Kind::Integral(f) | Kind::Weighted(_, f) => Some(f),
            Kind::BlackBox(_) => None,
        }
    }

    pub fn is_built(&self) -> bool {
        !matches!(self.kind, Kind::BlackBox(_))
    }

    pub fn with_quadrature(&self, quadrature: QuadraturePolicy) -> Self {
        Self { quadrature, ..self.clone() }
    }

    /// `F(u, A)`; an empty `A` gives 0 and `+inf` saturates.
    pub fn eval(&self, u: &ScalarField, a: &GridDomain) -> Result<f64> {
        check_dim(self.group.dim(), u.dim())?;
        check_dim(self.group.dim(), a.dim())?;
        match &self.kind {
            Kind::BlackBox(f) => {
                let v = f(u, a)?;
                if v.is_nan() || v < 0.0 {
                    return Err(Error::Hypothesis(format!("black-box functional returned {v}")));
                }
                Ok(v)
            }
            _ => Ok(self.cell_contributions(u, a)?.iter().sum()),
        }
    }

    /// Per-cell contributions, in masked-index order.
    pub fn cell_contributions(&self, u: &ScalarField, a: &GridDomain) -> Result<Vec<f64>> {
        if !self.is_built() {
            return Err(Error::Config("black-box functionals have no cell decomposition".into()));
        }
        if a.is_empty() {
            return Ok(Vec::new());
        }
        let mode = self.gradient_mode(u, a)?;
        let m = self.group.horizontal_dim();
        self.sub_point_sums(a, |x, _| {
            let mut eta = vec![0.0; m];
            self.density(u, mode, x, &mut eta)
        })
    }

    /// Leading-order bound on the error of the midpoint rule,
    /// `sum_cells vol * sum_k |second difference of the density along axis k| / 24`,
    /// with differences taken at the sub-cell spacing.
    pub fn midpoint_error_bound(&self, u: &ScalarField, a: &GridDomain) -> Result<f64> {
        if !self.is_built() {
            return Err(Error::Config("black-box functionals have no quadrature error bound".into()));
        }
        if a.is_empty() {
            return Ok(0.0);
        }
        let mode = self.gradient_mode(u, a)?;
        let n = self.group.dim();
        let m = self.group.horizontal_dim();
        let parts = self.sub_point_sums(a, |x, hs| {
            let mut eta = vec![0.0; m];
            let mut y = x.to_vec();
            let centre = self.density(u, mode, x, &mut eta)?;
            let mut total = 0.0;
            for k in 0..n {
                y[k] = x[k] + hs[k];
                let up = self.density(u, mode, &y, &mut eta)?;
                y[k] = x[k] - hs[k];
                let down = self.density(u, mode, &y, &mut eta)?;
                y[k] = x[k];
                total += (up - 2.0 * centre + down).abs() / 24.0;
            }
            Ok(total)
        })?;
        Ok(parts.iter().sum())
    }

    fn density(&self, u: &ScalarField, mode: GradientMode, x: &[f64], eta: &mut [f64]) -> Result<f64> {
        horizontal_gradient_into(&self.group, u, x, mode, eta)?;
        Ok(match &self.kind {
            Kind::Integral(f) => f.eval(eta),
            Kind::Weighted(w, f) => w.eval(x) * f.eval(eta),
            Kind::BlackBox(_) => unreachable!("black boxes have no density"),
        })
    }

    fn gradient_mode(&self, u: &ScalarField, a: &GridDomain) -> Result<GradientMode> {
        if let Some(mode) = self.quadrature.gradient {
            return Ok(mode);
        }
        let probe = a.center(a.masked_indices()[0]);
        let mut scratch = vec![0.0; self.group.dim()];
        if u.euclidean_gradient(&probe, &mut scratch)? {
            Ok(GradientMode::Analytic)
        } else {
            let h = a.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(GradientMode::fd(h / self.quadrature.subdivisions.max(1) as f64))
        }
    }

    /// `sum over sub-cells of point(center, sub-spacing) * sub-volume`, per masked cell.
    fn sub_point_sums(&self, a: &GridDomain, point: impl Fn(&[f64], &[f64]) -> Result<f64> + Sync) -> Result<Vec<f64>> {
        let n = self.group.dim();
        let s = self.quadrature.subdivisions.max(1);
        let subs = s.pow(n as u32);
        let sub_vol = a.cell_volume() / subs as f64;
        let spacing = a.spacing().to_vec();
        let sub_spacing: Vec<f64> = spacing.iter().map(|h| h / s as f64).collect();
        a.map_masked(|c| {
            let mut x = vec![0.0; n];
            let mut total = 0.0;
            for code in 0..subs {
                let mut rest = code;
                for k in (0..n).rev() {
                    let i = rest % s;
                    rest /= s;
                    x[k] = c[k] + ((i as f64 + 0.5) / s as f64 - 0.5) * spacing[k];
                }
                total += point(&x, &sub_spacing)?;
            }
            Ok(total * sub_vol)
        })
    }

    /// `|F(u, A) - F_refined(u, A)|` with twice the sub-cells per axis.
    pub fn quadrature_error(&self, u: &ScalarField, a: &GridDomain) -> Result<f64> {
        if !self.is_built() {
            return Ok(0.0);
        }
        let fine = self.with_quadrature(QuadraturePolicy {
            subdivisions: 2 * self.quadrature.subdivisions.max(1),
            ..self.quadrature
        });
        let (v, w) = (self.eval(u, a)?, fine.eval(u, a)?);
        if v.is_infinite() && w.is_infinite() {
            return Ok(0.0);
        }
        Ok((v - w).abs())
    }
}

/// Outcome of one sampled property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub witness: Option<String>,
}

impl PropertyCheck {
    pub fn new(name: &str, tolerance: f64) -> Self {
        Self { name: name.into(), samples: 0, max_violation: 0.0, tolerance, passed: true, witness: None }
    }

    pub fn record(&mut self, violation: f64, witness: impl FnOnce() -> String) {
        self.samples += 1;
        if violation > self.max_violation || violation.is_nan() {
            self.max_violation = if violation.is_nan() { f64::INFINITY } else { violation };
            if self.max_violation > self.tolerance {
                self.passed = false;
                self.witness = Some(witness());
            }
        }
    }

    /// "no violation found on N samples", or the worst witness.
    pub fn summary(&self) -> String {
        if self.passed {
            format!("{}: no violation found on {} samples (max {:.3e})", self.name, self.samples, self.max_violation)
        } else {
            format!(
                "{}: violation {:.3e} > {:.3e} ({})",
                self.name,
                self.max_violation,
                self.tolerance,
                self.witness.as_deref().unwrap_or("")
            )
        }
    }
}

fn rel(scale: f64) -> f64 {
    1e-12 * (1.0 + scale.abs())
}

/// `max_y |F(tau_y u, tau_y A) - F(u, A)|` and its companions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeftInvarianceReport {
    pub base_value: f64,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub mean_residual: f64,
    /// Root mean square over the samples; the boundary-cell part of the residual
    /// fluctuates from one translation to the next, and this averages it out.
    pub rms_residual: f64,
    /// Largest grid spacing of `A`.
    pub h: f64,
    /// Largest `| |tau_y A| - |A| |` over the samples.
    pub volume_defect: f64,
}

pub fn check_left_invariance(
    f: &Functional,
    u: &ScalarField,
    a: &GridDomain,
    ys: &[Vec<f64>],
) -> Result<LeftInvarianceReport> {
    let g = f.group();
    let base = f.eval(u, a)?;
    let mut residuals = Vec::with_capacity(ys.len());
    let mut volume_defect: f64 = 0.0;
    for y in ys {
        let tu = translate_field(g, y, u)?;
        let ta = translate_domain(g, y, a)?;
        volume_defect = volume_defect.max((ta.volume() - a.volume()).abs());
        residuals.push((f.eval(&tu, &ta)? - base).abs());
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    let count = residuals.len().max(1) as f64;
    let mean_residual = residuals.iter().sum::<f64>() / count;
    let rms_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / count).sqrt();
    Ok(LeftInvarianceReport {
        base_value: base,
        residuals,
        max_residual,
        mean_residual,
        rms_residual,
        h: a.spacing().iter().cloned().fold(0.0, f64::max),
        volume_defect,
    })
}

/// Set-function properties of `A -> F(u, A)` over a family of domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetFunctionReport {
    pub increasing: PropertyCheck,
    pub subadditive: PropertyCheck,
    pub superadditive: PropertyCheck,
    pub inner_regular: PropertyCheck,
}

impl SetFunctionReport {
    pub fn all_passed(&self) -> bool {
        self.increasing.passed && self.subadditive.passed && self.superadditive.passed && self.inner_regular.passed
    }
}

/// Checks monotonicity, subadditivity and superadditivity over all pairs of the
/// family sharing a lattice, and inner regularity along the exhaustion of each
/// member by refinement followed by removal of one boundary ring.
pub fn check_set_function(f: &Functional, u: &ScalarField, family: &[GridDomain]) -> Result<SetFunctionReport> {
    let values: Vec<f64> = family.iter().map(|a| f.eval(u, a)).collect::<Result<_>>()?;
    let mut increasing = PropertyCheck::new("increasing", 0.0);
    let mut subadditive = PropertyCheck::new("subadditive", 0.0);
    let mut superadditive = PropertyCheck::new("superadditive", 0.0);
    let mut inner_regular = PropertyCheck::new("inner_regular", 0.0);
    for i in 0..family.len() {
        for j in 0..family.len() {
            if i == j || !family[i].same_lattice(&family[j]) {
                continue;
            }
            let (a, b) = (&family[i], &family[j]);
            let (fa, fb) = (values[i], values[j]);
            if a.is_subset_of(b) {
                increasing.tolerance = rel(fb);
                increasing.record((fa - fb).max(0.0) - rel(fb), || format!("domains {i} within {j}"));
            }
            if i < j {
                let union = a.union(b)?;
                let fu = f.eval(u, &union)?;
                subadditive.record((fu - fa - fb).max(0.0) - rel(fu), || format!("union of {i} and {j}"));
                if a.intersection(b)?.is_empty() {
                    superadditive.record((fa + fb - fu).max(0.0) - rel(fu), || format!("disjoint {i} and {j}"));
                }
            }
        }
    }
    for (i, a) in family.iter().enumerate() {
        let mut gaps = Vec::new();
        for factor in [1usize, 2, 4] {
            let fine = a.refine(factor);
            let inner = fine.erode_rings(1);
            let full = f.eval(u, &fine)?;
            gaps.push(full - f.eval(u, &inner)?);
        }
        let negative = gaps.iter().map(|g| (-g).max(0.0)).fold(0.0, f64::max);
        let rising = gaps.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max);
        let scale = rel(values[i]);
        inner_regular.record(negative.max(rising) - scale, || format!("domain {i}: exhaustion gaps {gaps:?}"));
    }
    Ok(SetFunctionReport { increasing, subadditive, superadditive, inner_regular })
}

/// Sampling settings for [`check_hypotheses`].
#[derive(Clone, Debug)]
pub struct HypothesisSampling {
    pub samples: usize,
    pub seed: u64,
    /// Lattice from which random subdomains are drawn.
    pub base: GridDomain,
}

/// Sampled evidence for hypotheses (a)-(e): locality, additivity, monotonicity,
/// constant-shift invariance, convexity in `u` and the growth bound.
pub fn check_hypotheses(f: &Functional, settings: &HypothesisSampling) -> Result<Vec<PropertyCheck>> {
    let g = f.group();
    let base = &settings.base;
    let mut r = rng(settings.seed);
    let mut locality = PropertyCheck::new("locality", 0.0);
    let mut additivity = PropertyCheck::new("additivity", 0.0);
    let mut monotonicity = PropertyCheck::new("monotonicity", 0.0);
    let mut shift = PropertyCheck::new("constant_shift", 0.0);
    let mut convexity = PropertyCheck::new("convexity", 1e-10);
    let mut growth = PropertyCheck::new("growth", 0.0);
    let h = base.spacing()[0];
    for s in 0..settings.samples {
        let u = random_field(g, &mut r)?;
        let a = random_subdomain(base, &mut r);
        let fa = f.eval(&u, &a)?;

        // (a) add a field vanishing to second order on the half-space containing A
        let edge = a.masked_indices().iter().map(|&i| a.center(i)[0]).fold(f64::NEG_INFINITY, f64::max) + h;
        let bump = Expr::piecewise(
            Expr::add(vec![Expr::coord(1), Expr::constant(-edge)]),
            Expr::constant(0.0),
            Expr::add(vec![Expr::coord(1), Expr::constant(-edge)]).pow(3).scale(r.random_range(1.0..5.0)),
        );
        let w = ScalarField::linear_combination(vec![(1.0, u.clone()), (1.0, ScalarField::from_expr(g, bump)?)], 0.0)?;
        let d = (f.eval(&w, &a)? - fa).abs();
        locality.record(d, || format!("sample {s}"));

        // (b) split A along a random axis
        let axis = r.random_range(0..g.dim());
        let at = r.random_range(base.lo()[axis]..base.hi()[axis]);
        let (a1, a2) = a.split(axis, at);
        let d = (f.eval(&u, &a1)? + f.eval(&u, &a2)? - fa).abs();
        additivity.record(d - rel(fa), || format!("sample {s}: split axis {axis} at {at}"));

        // monotonicity: a random subset of A
        let sub = a.intersection(&random_subdomain(base, &mut r))?;
        let d = (f.eval(&u, &sub)? - fa).max(0.0);
        monotonicity.record(d - rel(fa), || format!("sample {s}"));

        // (d)
        let c = r.random_range(-10.0..10.0);
        let d = (f.eval(&u.plus_constant(c), &a)? - fa).abs();
        shift.record(d - rel(fa), || format!("sample {s}: c = {c}"));

        // (c)
        let v = random_field(g, &mut r)?;
        let lambda: f64 = r.random_range(0.0..=1.0);
        let mix = ScalarField::linear_combination(vec![(lambda, u.clone()), (1.0 - lambda, v.clone())], 0.0)?;
        let d = f.eval(&mix, &a)? - lambda * fa - (1.0 - lambda) * f.eval(&v, &a)?;
        convexity.record(d.max(0.0), || format!("sample {s}: lambda = {lambda}"));

        // (e)
        if let Some(gr) = f.hypotheses().growth {
            let bound = growth_integral(f, &u, &a, gr)?;
            growth.record((fa - bound).max(0.0) - rel(bound), || format!("sample {s}: F = {fa}, bound = {bound}"));
        }
    }
    let mut out = vec![locality, additivity, monotonicity, shift, convexity];
    if f.hypotheses().growth.is_some() {
        out.push(growth);
    }
    for check in out.iter_mut() {
        check.max_violation = check.max_violation.max(0.0);
    }
    Ok(out)
}

/// `int_A (a + b |grad_G u|^p)` with the functional's own quadrature.
pub fn growth_integral(f: &Functional, u: &ScalarField, a: &GridDomain, gr: Growth) -> Result<f64> {
    let bound = Integrand::new(crate::integrand::IntegrandSpec::power(gr.p), f.group().horizontal_dim())?;
    let b_part = Functional::integral(f.group(), bound, f.quadrature())?.eval(u, a)?;
    Ok(gr.a * a.volume() + gr.b * b_part)
}

/// Both sides of Jensen's inequality for the mollifier:
/// `F(phi_eps * u, A') <= int F(tau_y u, A') phi_eps(y) dy`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
}

pub fn jensen_check(
    f: &Functional,
    u: &ScalarField,
    omega: &GridDomain,
    a_prime: &GridDomain,
    mf: &MollifierFamily,
    eps: f64,
) -> Result<JensenReport> {
    if !f.is_built() {
        return Err(Error::Config("Jensen check needs a functional built from an integrand".into()));
    }
    let g = f.group();
    let margin = a_prime.right_margin_in(omega, g, mf.norm(), 2.0 * eps);
    if !(margin > eps) {
        return Err(Error::MarginViolation(format!("inner set has right margin {margin:.6}, not above epsilon {eps}")));
    }
    let conv = convolve(mf, eps, u, omega)?.field();
    let lhs = f.eval(&conv, a_prime)?;
    let mut rhs = 0.0;
    for (w, y) in mf.scaled_rule(eps) {
        rhs += w * f.eval(&translate_field(g, &y, u)?, a_prime)?;
    }
    Ok(JensenReport { epsilon: eps, lhs, rhs, violation: (lhs - rhs).max(0.0) })
}

/// One scale of the sandwich `F(u, A') <= F(phi_eps * u, A') <= F(u, A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub epsilon: f64,
    pub value: f64,
    /// `value - F(u, A')`
    pub lower_gap: f64,
    /// `F(u, A) - value`
    pub upper_gap: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub inner: f64,
    pub outer: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub rows: Vec<SandwichRow>,
    /// Distance from the value to `[inner, outer]` does not grow as epsilon shrinks.
    pub trend_ok: bool,
    pub passed: bool,
}

/// Runs the sandwich at every scale; the tolerance is twice the refinement
/// estimate of the quadrature error of `F(u, A')` and `F(u, A)`.
pub fn sandwich_check(
    f: &Functional,
    u: &ScalarField,
    a_prime: &GridDomain,
    a: &GridDomain,
    mf: &MollifierFamily,
    eps_schedule: &[f64],
) -> Result<SandwichReport> {
    if !f.is_built() {
        return Err(Error::Config("sandwich check needs a functional built from an integrand".into()));
    }
    if eps_schedule.is_empty() || eps_schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("epsilon schedule must be a nonempty list of positive numbers".into()));
    }
    let g = f.group();
    let max_eps = eps_schedule.iter().cloned().fold(0.0, f64::max);
    let margin = a_prime.right_margin_in(a, g, mf.norm(), 2.0 * max_eps);
    if !(margin > max_eps) {
        return Err(Error::MarginViolation(format!(
            "inner set has right margin {margin:.6}, not above the largest epsilon {max_eps}"
        )));
    }
    let inner = f.eval(u, a_prime)?;
    let outer = f.eval(u, a)?;
    let quad = f.quadrature_error(u, a_prime)? + f.quadrature_error(u, a)?;
    let tolerance = 2.0 * quad + rel(outer);
    let mut sorted = eps_schedule.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut rows = Vec::with_capacity(sorted.len());
    for eps in sorted {
        let conv = convolve(mf, eps, u, a)?.field();
        let value = f.eval(&conv, a_prime)?;
        let lower_gap = value - inner;
        let upper_gap = outer - value;
        rows.push(SandwichRow {
            epsilon: eps,
            value,
            lower_gap,
            upper_gap,
            lower_ok: lower_gap >= -tolerance,
            upper_ok: upper_gap >= -tolerance,
        });
    }
    let outside: Vec<f64> = rows.iter().map(|r| (-r.lower_gap).max(-r.upper_gap).max(0.0)).collect();
    let trend_ok = outside.windows(2).all(|w| w[1] <= w[0] + tolerance);
    let passed = trend_ok && rows.iter().all(|r| r.lower_ok && r.upper_ok);
    Ok(SandwichReport { inner, outer, margin, tolerance, rows, trend_ok, passed })
}

/// `F(u, A)` against the tail of `F(u_h, A)` for `u_h -> u` in `L^1(A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LscReport {
    pub limit_value: f64,
    pub values: Vec<f64>,
    pub l1_distances: Vec<f64>,
    pub tail_min: f64,
    /// `tail_min - limit_value`; positive when the inequality is strict.
    pub gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn lsc_check(
    f: &Functional,
    u: &ScalarField,
    sequence: &[ScalarField],
    a: &GridDomain,
    tail: usize,
) -> Result<LscReport> {
    if sequence.is_empty() {
        return Err(Error::Config("lower semicontinuity needs a nonempty sequence".into()));
    }
    let limit_value = f.eval(u, a)?;
    let reference = a.map_masked(|c| u.value(c))?;
    let mut values = Vec::with_capacity(sequence.len());
    let mut l1_distances = Vec::with_capacity(sequence.len());
    for uh in sequence {
        values.push(f.eval(uh, a)?);
        let vals = a.map_masked(|c| uh.value(c))?;
        l1_distances.push(vals.iter().zip(&reference).map(|(x, y)| (x - y).abs()).sum::<f64>() * a.cell_volume());
    }
    let start = sequence.len().saturating_sub(tail.max(1));
    let tail_min = values[start..].iter().cloned().fold(f64::INFINITY, f64::min);
    let tolerance = 1e-10 * (1.0 + limit_value.abs());
    Ok(LscReport {
        limit_value,
        values,
        l1_distances,
        tail_min,
        gap: tail_min - limit_value,
        tolerance,
        passed: limit_value <= tail_min + tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::probe_field;
    use crate::group::HomogeneousNorm;
    use crate::integrand::IntegrandSpec;

    fn h1() -> StratifiedGroup {
        StratifiedGroup::heisenberg(1).unwrap()
    }

    fn energy(g: &StratifiedGroup) -> Functional {
        Functional::integral(g, Integrand::power(2.0, g.horizontal_dim()).unwrap(), QuadraturePolicy::midpoint())
            .unwrap()
    }

    #[test]
    fn probe_energy_is_exact() {
        let g = h1();
        let a = GridDomain::new_box(&[-1.0, -0.5, 0.0], &[1.0, 0.5, 2.0], &[6, 4, 5]).unwrap();
        let u = probe_field(&g, &vec![1.0, 0.0].into()).unwrap();
        assert!((energy(&g).eval(&u, &a).unwrap() - a.volume()).abs() < 1e-13);
        let zero = Functional::integral(
            &g,
            Integrand::power(1.0, 2).unwrap().with_offset(0.0).unwrap(),
            QuadraturePolicy::midpoint(),
        )
        .unwrap();
        assert_eq!(zero.eval(&ScalarField::constant(3, 4.0), &a).unwrap(), 0.0);
        let empty = a.with_mask(vec![false; a.total_cells()]).unwrap();
        assert_eq!(energy(&g).eval(&u, &empty).unwrap(), 0.0);
    }

    #[test]
    fn vertical_coordinate_energy_matches_closed_form() {
        // |grad x3|^2 = (x1^2 + x2^2)/4 integrates to 4/3 over [-1,1]^3
        let g = h1();
        let u = ScalarField::from_expr(&g, Expr::coord(3)).unwrap();
        let exact = 2.0 * (2.0 / 3.0) * 2.0 * 2.0 / 4.0;
        let mut errs = Vec::new();
        for cells in [8usize, 16] {
            let a = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[cells; 3]).unwrap();
            errs.push((energy(&g).eval(&u, &a).unwrap() - exact).abs());
        }
        assert!(errs[0] < 3e-2 && (errs[1] / errs[0] - 0.25).abs() < 0.01, "{errs:?}");
    }

    #[test]
    fn infinite_integrand_saturates() {
        let g = h1();
        let capped = Integrand::new(
            IntegrandSpec {
                shape: crate::integrand::IntegrandShape::Power { p: 2.0, radius: Some(1.0) },
                offset: 0.0,
                shift: None,
            },
            2,
        )
        .unwrap();
        let f = Functional::integral(&g, capped, QuadraturePolicy::midpoint()).unwrap();
        let a = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[4, 4, 4]).unwrap();
        let u = probe_field(&g, &vec![2.0, 0.0].into()).unwrap();
        assert_eq!(f.eval(&u, &a).unwrap(), f64::INFINITY);
        assert!(f.eval(&ScalarField::constant(3, 0.0), &a).unwrap().is_finite());
    }

    #[test]
    fn abelian_aligned_translation_is_exact() {
        let g = StratifiedGroup::euclidean(2).unwrap();
        let f = energy(&g);
        let a =
            GridDomain::from_predicate(&[-1.0, -1.0], &[1.0, 1.0], &[16, 16], |c| c[0] * c[0] + c[1] < 0.5).unwrap();
        let u =
            ScalarField::from_expr(&g, Expr::add(vec![Expr::coord(1).sin(), Expr::monomial(0.5, &[1, 2])])).unwrap();
        let ys = vec![vec![0.25, -0.5], vec![0.0, 0.0], vec![-1.125, 0.375]];
        let rep = check_left_invariance(&f, &u, &a, &ys).unwrap();
        assert!(rep.max_residual <= 1e-12, "{rep:?}");
        assert_eq!(rep.volume_defect, 0.0);
    }

    #[test]
    fn set_function_properties_of_built_functional() {
        let g = h1();
        let f = energy(&g);
        let base = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[6, 6, 6]).unwrap();
        let (lower, upper) = base.split(2, 0.0);
        let mut r = rng(11);
        let mut family = vec![base.clone(), lower, upper];
        family.extend((0..3).map(|_| random_subdomain(&base, &mut r)));
        let u = random_field(&g, &mut r).unwrap();
        let rep = check_set_function(&f, &u, &family).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
        assert!(rep.superadditive.samples >= 1);
    }

    #[test]
    fn hypotheses_hold_for_the_menu() {
        let g = h1();
        let base = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[5, 5, 5]).unwrap();
        let settings = HypothesisSampling { samples: 10, seed: 5, base };
        for spec in [IntegrandSpec::power(3.0), IntegrandSpec::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]])] {
            let f = Functional::integral(&g, Integrand::new(spec, 2).unwrap(), QuadraturePolicy::midpoint()).unwrap();
            for check in check_hypotheses(&f, &settings).unwrap() {
                assert!(check.passed, "{}", check.summary());
            }
        }
    }

    #[test]
    fn weighted_fixture_breaks_left_invariance() {
        let g = h1();
        let weight = Expr::add(vec![Expr::constant(1.0), Expr::coord(1).pow(2)]);
        let f =
            Functional::weighted(&g, weight, Integrand::power(2.0, 2).unwrap(), QuadraturePolicy::midpoint()).unwrap();
        let a = GridDomain::new_box(&[-0.5; 3], &[0.5; 3], &[4, 4, 4]).unwrap();
        let u = probe_field(&g, &vec![1.0, 0.0].into()).unwrap();
        let rep = check_left_invariance(&f, &u, &a, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(rep.max_residual > 0.5);
        assert!(!f.hypotheses().left_invariant);
    }

    #[test]
    fn jensen_and_sandwich_on_probe() {
        let g = h1();
        let f = energy(&g);
        let mf = MollifierFamily::new(&g, HomogeneousNorm::WeightedMax, 5).unwrap();
        let a = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[8, 8, 8]).unwrap();
        let a_prime = a.erode_rings(3);
        let u = probe_field(&g, &vec![0.6, -0.8].into()).unwrap();
        let j = jensen_check(&f, &u, &a, &a_prime, &mf, 0.2).unwrap();
        assert!((j.lhs - j.rhs).abs() < 1e-12 && (j.lhs - a_prime.volume()).abs() < 1e-12);
        let s = sandwich_check(&f, &u, &a_prime, &a, &mf, &[0.2, 0.1]).unwrap();
        assert!(s.passed, "{s:?}");
        assert!(matches!(sandwich_check(&f, &u, &a_prime, &a, &mf, &[1.5]), Err(Error::MarginViolation(_))));
    }

    #[test]
    fn sawtooth_sequence_shows_strict_lsc() {
        let g = h1();
        let f = energy(&g);
        let a = GridDomain::new_box(&[0.0; 3], &[1.0; 3], &[8, 8, 8]).unwrap();
        let u = ScalarField::constant(3, 0.0);
        // teeth offset by a quarter period so no cell center sits on a kink
        let seq: Vec<ScalarField> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&k: &f64| {
                let arg = Expr::add(vec![Expr::coord(1).scale(k), Expr::constant(0.25)]);
                ScalarField::from_expr(&g, arg.tri().scale(1.0 / k)).unwrap()
            })
            .collect();
        let rep = lsc_check(&f, &u, &seq, &a, 2).unwrap();
        assert!(rep.passed && rep.gap > 0.9, "{rep:?}");
        assert!(rep.l1_distances.windows(2).all(|w| w[1] < w[0]));
    }
}
