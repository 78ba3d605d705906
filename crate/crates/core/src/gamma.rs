//! Gamma-limit experiments: a first-order convex minimizer over grid fields in an
//! `L^p` ball around an anchor, sequences of integrands `f_h`, and the per-`h`
//! bracket of lower and upper estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{DiscreteGradient, GridField, ScalarField};
use crate::domain::GridDomain;
use crate::error::{check_dim, Error, Result};
use crate::functional::{Functional, QuadraturePolicy};
use crate::group::StratifiedGroup;
use crate::integrand::{Growth, Integrand, IntegrandSpec};
use crate::recovery::{recover_integrand, RecoveredIntegrand, XiGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// FISTA when the integrand has a Lipschitz gradient, subgradient steps otherwise.
    Auto,
    Subgradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizerSettings {
    pub rule: StepRule,
    pub max_iter: usize,
    /// Relative stationarity tolerance: gradient-mapping norm for FISTA,
    /// best-value progress over the last quarter of the run for subgradient steps.
    pub tol: f64,
}

impl Default for MinimizerSettings {
    fn default() -> Self {
        Self { rule: StepRule::Auto, max_iter: 3000, tol: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fista,
    Subgradient,
}

#[derive(Clone, Debug)]
pub struct Minimization {
    pub field: GridField,
    pub value: f64,
    /// Discrete energy of the anchor, the value at the feasible point `v = u`.
    pub initial_value: f64,
    /// Best value after each iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
}

/// `J(v) = vol * sum_cells f(D v)` on the masked cells.
struct Objective<'a> {
    d: &'a DiscreteGradient,
    f: &'a Integrand,
    vol: f64,
}

impl Objective<'_> {
    fn value(&self, v: &[f64]) -> f64 {
        let m = self.d.horizontal_dim();
        let mut eta = vec![0.0; m];
        let mut total = 0.0;
        for c in 0..self.d.cells() {
            self.d.apply_at(v, c, &mut eta);
            total += self.f.eval(&eta);
        }
        total * self.vol
    }

    /// Value and a (sub)gradient; `false` when some cell is at `+inf`.
    fn gradient(&self, v: &[f64], out: &mut [f64]) -> (f64, bool) {
        let m = self.d.horizontal_dim();
        let mut eta = vec![0.0; m];
        let mut s = vec![0.0; m];
        let mut total = 0.0;
        out.fill(0.0);
        for c in 0..self.d.cells() {
            self.d.apply_at(v, c, &mut eta);
            total += self.f.eval(&eta);
            if !self.f.subgradient(&eta, &mut s) {
                return (f64::INFINITY, false);
            }
            s.iter_mut().for_each(|x| *x *= self.vol);
            self.d.add_transpose_at(c, &s, out);
        }
        (total * self.vol, true)
    }
}

/// Largest eigenvalue of `D^T D` by power iteration.
fn operator_norm_sq(d: &DiscreteGradient) -> f64 {
    let n = d.cells();
    let m = d.horizontal_dim();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    let mut eta = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..60 {
        let norm = l2(&v);
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        w.fill(0.0);
        for c in 0..n {
            d.apply_at(&v, c, &mut eta);
            d.add_transpose_at(c, &eta, &mut w);
        }
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        std::mem::swap(&mut v, &mut w);
    }
    lambda
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pull `v` back into `{ ||v - u||_{L^p} <= delta }` by scaling `v - u`.
struct Ball<'a> {
    anchor: &'a [f64],
    delta: f64,
    p: f64,
    vol: f64,
}

impl Ball<'_> {
    fn distance(&self, v: &[f64]) -> f64 {
        let s: f64 = v.iter().zip(self.anchor).map(|(a, b)| (a - b).abs().powf(self.p)).sum();
        (s * self.vol).powf(1.0 / self.p)
    }

    fn project(&self, v: &mut [f64]) {
        if self.delta.is_infinite() {
            return;
        }
        let dist = self.distance(v);
        if dist > self.delta {
            let scale = if dist > 0.0 { self.delta / dist } else { 0.0 };
            for (x, a) in v.iter_mut().zip(self.anchor) {
                *x = a + (*x - a) * scale;
            }
        }
    }
}

/// Minimize the discrete energy of `f` over grid fields `v` on `A` with
/// `||v - u||_{L^p(A)} <= delta`, starting from the anchor sampled at the
/// cell centers. The returned value never exceeds `initial_value`.
pub fn minimize_convex(
    f: &Functional,
    u: &ScalarField,
    a: &GridDomain,
    delta: f64,
    p: f64,
    settings: &MinimizerSettings,
) -> Result<Minimization> {
    let integrand = match f.integrand() {
        Some(i) if f.hypotheses().left_invariant => i,
        _ => return Err(Error::Hypothesis("the minimizer needs a functional built from an integrand".into())),
    };
    if integrand.growth().is_none() {
        return Err(Error::Hypothesis("the minimizer needs a finite integrand".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Config(format!("radius {delta} must be nonnegative")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Config(format!("exponent {p} must be finite and at least 1")));
    }
    if a.is_empty() {
        return Err(Error::EmptyDomain("minimization domain".into()));
    }
    check_dim(f.group().dim(), a.dim())?;
    let d = DiscreteGradient::new(f.group(), a)?;
    let anchor_field = GridField::sample(u, a)?;
    let anchor = anchor_field.masked_values();
    let obj = Objective { d: &d, f: integrand, vol: a.cell_volume() };
    let ball = Ball { anchor: &anchor, delta, p, vol: a.cell_volume() };
    let initial_value = obj.value(&anchor);
    if !initial_value.is_finite() {
        return Err(Error::Hypothesis("energy of the anchor is not finite".into()));
    }
    let use_fista = settings.rule == StepRule::Auto && integrand.gradient_lipschitz().is_some();
    let (best, history, converged) = if use_fista {
        let lf = integrand.gradient_lipschitz().unwrap_or(0.0);
        fista(&obj, &ball, &anchor, lf * obj.vol * operator_norm_sq(&d) * 1.05, settings)
    } else {
        subgradient(&obj, &ball, &anchor, settings)
    };
    let value = obj.value(&best).min(initial_value);
    let best = if value < initial_value { best } else { anchor.clone() };
    Ok(Minimization {
        field: anchor_field.with_masked_values(&best)?,
        value,
        initial_value,
        iterations: history.len(),
        history,
        converged,
        method: if use_fista { Method::Fista } else { Method::Subgradient },
    })
}

/// Accelerated projected gradient with function-value restarts.
fn fista(
    obj: &Objective,
    ball: &Ball,
    anchor: &[f64],
    lipschitz: f64,
    settings: &MinimizerSettings,
) -> (Vec<f64>, Vec<f64>, bool) {
    let n = anchor.len();
    let mut x = anchor.to_vec();
    let mut best = x.clone();
    let mut best_value = obj.value(&x);
    let mut prev_value = best_value;
    let mut history = Vec::new();
    if lipschitz <= 0.0 {
        return (best, history, true);
    }
    let mut y = x.clone();
    let mut grad = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut t = 1.0f64;
    let mut first_gap: Option<f64> = None;
    for _ in 0..settings.max_iter {
        obj.gradient(&y, &mut grad);
        for i in 0..n {
            next[i] = y[i] - grad[i] / lipschitz;
        }
        ball.project(&mut next);
        let gap = lipschitz * next.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let value = obj.value(&next);
        if value < best_value {
            best_value = value;
            best.copy_from_slice(&next);
        }
        history.push(best_value);
        let reference = *first_gap.get_or_insert(gap);
        if gap == 0.0 || gap <= settings.tol * reference {
            return (best, history, true);
        }
        if value > prev_value {
            t = 1.0;
            y.copy_from_slice(&next);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..n {
                y[i] = next[i] + beta * (next[i] - x[i]);
            }
            t = t_next;
        }
        x.copy_from_slice(&next);
        prev_value = value;
    }
    (best, history, false)
}

/// Normalized projected subgradient steps `s_t = s_0 / sqrt(t)`, with `s_0` picked
/// by a geometric line probe along the first direction.
fn subgradient(
    obj: &Objective,
    ball: &Ball,
    anchor: &[f64],
    settings: &MinimizerSettings,
) -> (Vec<f64>, Vec<f64>, bool) {
    let n = anchor.len();
    let mut x = anchor.to_vec();
    let mut best = x.clone();
    let mut best_value = obj.value(&x);
    let mut history = Vec::new();
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let (_, finite) = obj.gradient(&x, &mut grad);
    let gnorm = l2(&grad);
    if !finite || gnorm == 0.0 {
        return (best, history, finite);
    }
    let scale = l2(anchor) + 1.0;
    let mut s0 = scale * 2f64.powi(-40);
    let mut probe_best = best_value;
    for k in 0..40 {
        let s = scale * 2f64.powi(-k);
        for i in 0..n {
            trial[i] = x[i] - s * grad[i] / gnorm;
        }
        ball.project(&mut trial);
        let v = obj.value(&trial);
        if v < probe_best {
            probe_best = v;
            s0 = s;
        }
    }
    for t in 1..=settings.max_iter {
        let (_, finite) = obj.gradient(&x, &mut grad);
        let gnorm = l2(&grad);
        if !finite || gnorm == 0.0 {
            return (best, history, finite);
        }
        let s = s0 / (t as f64).sqrt();
        for i in 0..n {
            x[i] -= s * grad[i] / gnorm;
        }
        ball.project(&mut x);
        let value = obj.value(&x);
        if value < best_value {
            best_value = value;
            best.copy_from_slice(&x);
        }
        history.push(best_value);
    }
    let quarter = history.len() - history.len() * 3 / 4;
    let start = history[history.len() - quarter.max(1)];
    let converged = start - best_value <= settings.tol * (1.0 + best_value.abs());
    (best, history, converged)
}

/// A sequence of integrands indexed by `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SequenceFamily {
    /// `f_h(eta) = |eta|^p + 1/h`.
    PowerPlusInverseH { p: f64 },
    /// `f_h(eta) = |eta + (-1)^h c|^2`.
    AlternatingShift { c: Vec<f64> },
    /// `f_h = f` for every `h`.
    Constant { integrand: IntegrandSpec },
    /// One integrand per entry of the `h` schedule.
    Explicit { members: Vec<IntegrandSpec> },
}

impl SequenceFamily {
    pub fn label(&self) -> &'static str {
        match self {
            Self::PowerPlusInverseH { .. } => "power_plus_inverse_h",
            Self::AlternatingShift { .. } => "alternating_shift",
            Self::Constant { .. } => "constant",
            Self::Explicit { .. } => "explicit",
        }
    }

    /// The member at position `index` of the schedule, where `h = hs[index]`.
    pub fn member(&self, h: u32, index: usize, m: usize) -> Result<Integrand> {
        if h == 0 {
            return Err(Error::Config("h must be positive".into()));
        }
        let spec = match self {
            Self::PowerPlusInverseH { p } => IntegrandSpec::power(*p).with_offset(1.0 / h as f64),
            Self::AlternatingShift { c } => {
                let sign = if h.is_multiple_of(2) { 1.0 } else { -1.0 };
                IntegrandSpec::power(2.0).with_shift(c.iter().map(|x| sign * x).collect())
            }
            Self::Constant { integrand } => integrand.clone(),
            Self::Explicit { members } => members
                .get(index)
                .cloned()
                .ok_or_else(|| Error::Config(format!("no explicit member for schedule entry {index}")))?,
        };
        Integrand::new(spec, m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GammaSettings {
    pub hs: Vec<u32>,
    pub deltas: Vec<f64>,
    pub xi: XiGrid,
    pub minimizer: MinimizerSettings,
    /// Allowed excess of a lower estimate over the upper one.
    pub bracket_tol: f64,
}

impl Default for GammaSettings {
    fn default() -> Self {
        Self {
            hs: vec![1, 2, 4, 8, 16],
            deltas: vec![0.1],
            xi: XiGrid::default(),
            minimizer: MinimizerSettings::default(),
            bracket_tol: 1e-9,
        }
    }
}

/// One `(h, field, delta)` instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub h: u32,
    pub field: usize,
    pub delta: f64,
    /// Minimum of the discrete energy over the `delta` ball.
    pub lower: f64,
    /// Discrete energy of the sampled field.
    pub upper: f64,
    /// `F_h(u, A)` under the functional's own quadrature.
    pub upper_quadrature: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bracket_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceReport {
    pub even_limit: Vec<f64>,
    pub odd_limit: Vec<f64>,
    pub even_cauchy_gap: f64,
    pub odd_cauchy_gap: f64,
    /// `max |even - odd|` over the xi-grid.
    pub separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaExperiment {
    pub family: SequenceFamily,
    pub p: f64,
    pub hs: Vec<u32>,
    pub deltas: Vec<f64>,
    pub entries: Vec<GammaEntry>,
    pub xi: Vec<Vec<f64>>,
    /// `f_h(xi)` recovered from `F_h`, one row per `h`.
    pub recovered: Vec<Vec<f64>>,
    /// The recovered integrand at the largest `h`.
    pub limit: RecoveredIntegrand,
    /// `|f_h - f_h'|` per xi for the last two schedule entries.
    pub cauchy_gap: Vec<f64>,
    pub max_cauchy_gap: f64,
    pub subsequences: Option<SubsequenceReport>,
    pub all_converged: bool,
    pub brackets_ok: bool,
}

/// Exponent of the family, read off the growth certificates of its members.
fn family_exponent(members: &[Integrand]) -> Result<f64> {
    let mut p: Option<f64> = None;
    for f in members {
        let Growth { p: q, .. } =
            f.growth().ok_or_else(|| Error::Hypothesis("every f_h needs a growth bound".into()))?;
        p = Some(p.map_or(q, |x: f64| x.max(q)));
    }
    p.ok_or_else(|| Error::Config("empty h schedule".into()))
}

/// Run the experiment on `A` with recovery on `A_0`. Requires `p > 1`.
pub fn gamma_experiment(
    g: &StratifiedGroup,
    family: &SequenceFamily,
    fields: &[ScalarField],
    a: &GridDomain,
    a0: &GridDomain,
    settings: &GammaSettings,
) -> Result<GammaExperiment> {
    if settings.hs.is_empty() {
        return Err(Error::Config("empty h schedule".into()));
    }
    if settings.deltas.is_empty() {
        return Err(Error::Config("empty delta schedule".into()));
    }
    if fields.is_empty() {
        return Err(Error::Config("no target fields".into()));
    }
    let m = g.horizontal_dim();
    let members: Vec<Integrand> =
        settings.hs.iter().enumerate().map(|(i, &h)| family.member(h, i, m)).collect::<Result<_>>()?;
    let p = family_exponent(&members)?;
    if p <= 1.0 {
        return Err(Error::Hypothesis(format!(
            "the Gamma experiment needs p > 1 (got p = {p}); compactness can fail for p = 1"
        )));
    }
    let functionals: Vec<Functional> =
        members.into_iter().map(|f| Functional::integral(g, f, QuadraturePolicy::midpoint())).collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for (hi, _) in settings.hs.iter().enumerate() {
        for fi in 0..fields.len() {
            for &delta in &settings.deltas {
                jobs.push((hi, fi, delta));
            }
        }
    }
    let entries: Vec<GammaEntry> = jobs
        .par_iter()
        .map(|&(hi, fi, delta)| {
            let f = &functionals[hi];
            let min = minimize_convex(f, &fields[fi], a, delta, p, &settings.minimizer)?;
            let upper_quadrature = f.eval(&fields[fi], a)?;
            Ok(GammaEntry {
                h: settings.hs[hi],
                field: fi,
                delta,
                lower: min.value,
                upper: min.initial_value,
                upper_quadrature,
                iterations: min.iterations,
                converged: min.converged,
                bracket_ok: min.value.is_finite() && min.value <= min.initial_value + settings.bracket_tol,
            })
        })
        .collect::<Result<_>>()?;

    let xis = settings.xi.points(m);
    let recoveries: Vec<RecoveredIntegrand> =
        functionals.par_iter().map(|f| recover_integrand(f, a0, &xis)).collect::<Result<_>>()?;
    let recovered: Vec<Vec<f64>> = recoveries.iter().map(|r| r.values.clone()).collect();
    let last = recovered.len() - 1;
    let cauchy_gap: Vec<f64> =
        if last == 0 { vec![0.0; xis.len()] } else { gap(&recovered[last], &recovered[last - 1]) };
    let max_cauchy_gap = cauchy_gap.iter().cloned().fold(0.0, f64::max);
    let subsequences = subsequence_report(&settings.hs, &recovered);
    let all_converged = entries.iter().all(|e| e.converged);
    let brackets_ok = entries.iter().all(|e| e.bracket_ok);
    Ok(GammaExperiment {
        family: family.clone(),
        p,
        hs: settings.hs.clone(),
        deltas: settings.deltas.clone(),
        entries,
        xi: xis,
        recovered,
        limit: recoveries.into_iter().next_back().expect("nonempty schedule"),
        cauchy_gap,
        max_cauchy_gap,
        subsequences,
        all_converged,
        brackets_ok,
    })
}

fn gap(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() }).collect()
}

/// Limits along even and odd `h`, when each parity occurs at least once.
fn subsequence_report(hs: &[u32], recovered: &[Vec<f64>]) -> Option<SubsequenceReport> {
    let pick = |parity: u32| -> Option<(Vec<f64>, f64)> {
        let rows: Vec<&Vec<f64>> = hs.iter().zip(recovered).filter(|(h, _)| *h % 2 == parity).map(|(_, r)| r).collect();
        let last = rows.last()?;
        let cauchy =
            if rows.len() >= 2 { gap(last, rows[rows.len() - 2]).into_iter().fold(0.0, f64::max) } else { 0.0 };
        Some(((*last).clone(), cauchy))
    };
    let (even_limit, even_cauchy_gap) = pick(0)?;
    let (odd_limit, odd_cauchy_gap) = pick(1)?;
    let separation = gap(&even_limit, &odd_limit).into_iter().fold(0.0, f64::max);
    Some(SubsequenceReport { even_limit, odd_limit, even_cauchy_gap, odd_cauchy_gap, separation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::group::HomogeneousNorm;

    fn h1() -> StratifiedGroup {
        StratifiedGroup::heisenberg(1).unwrap()
    }

    fn cube(k: usize) -> GridDomain {
        GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[k; 3]).unwrap()
    }

    fn energy(g: &StratifiedGroup, offset: f64) -> Functional {
        let f = Integrand::new(IntegrandSpec::power(2.0).with_offset(offset), 2).unwrap();
        Functional::integral(g, f, QuadraturePolicy::midpoint()).unwrap()
    }

    fn bumpy(g: &StratifiedGroup) -> ScalarField {
        let e =
            Expr::add(vec![Expr::monomial(1.0, &[2, 0, 0]), Expr::monomial(-0.5, &[0, 1, 1]), Expr::coord(1).sin()]);
        ScalarField::from_expr(g, e).unwrap()
    }

    #[test]
    fn zero_radius_returns_anchor() {
        let g = h1();
        let f = energy(&g, 0.0);
        let u = bumpy(&g);
        let a = cube(6);
        let r = minimize_convex(&f, &u, &a, 0.0, 2.0, &MinimizerSettings::default()).unwrap();
        assert_eq!(r.value, r.initial_value);
        assert_eq!(r.field.masked_values(), GridField::sample(&u, &a).unwrap().masked_values());
        assert!(r.converged);
    }

    #[test]
    fn large_radius_flattens() {
        let g = h1();
        let f = energy(&g, 0.25);
        let a = cube(6);
        let r = minimize_convex(&f, &bumpy(&g), &a, f64::INFINITY, 2.0, &MinimizerSettings::default()).unwrap();
        let floor = 0.25 * a.volume();
        assert!((r.value - floor).abs() <= 1e-6 * r.initial_value, "{} vs {floor}", r.value);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn subgradient_path_is_monotone_and_improves() {
        let g = h1();
        let f = Functional::integral(&g, Integrand::power(3.0, 2).unwrap(), QuadraturePolicy::midpoint()).unwrap();
        let a = cube(5);
        let r =
            minimize_convex(&f, &bumpy(&g), &a, 0.5, 3.0, &MinimizerSettings { max_iter: 400, ..Default::default() })
                .unwrap();
        assert_eq!(r.method, Method::Subgradient);
        assert!(r.value < r.initial_value);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        let anchor = GridField::sample(&bumpy(&g), &a).unwrap().masked_values();
        let dist: f64 = r.field.masked_values().iter().zip(&anchor).map(|(x, y)| (x - y).abs().powi(3)).sum::<f64>()
            * a.cell_volume();
        assert!(dist.cbrt() <= 0.5 + 1e-12);
    }

    #[test]
    fn rejects_opaque_and_p_one() {
        let g = h1();
        let f = energy(&g, 0.0);
        let err =
            minimize_convex(&Functional::opaque(&f), &bumpy(&g), &cube(4), 0.1, 2.0, &MinimizerSettings::default());
        assert!(matches!(err, Err(Error::Hypothesis(_))));
        let ball = GridDomain::ball(&g, HomogeneousNorm::WeightedMax, &[0.0; 3], 1.0, 4).unwrap();
        let settings = GammaSettings { hs: vec![1, 2], xi: XiGrid { radius: 1.0, points: 3 }, ..Default::default() };
        let err = gamma_experiment(
            &g,
            &SequenceFamily::PowerPlusInverseH { p: 1.0 },
            &[bumpy(&g)],
            &cube(4),
            &ball,
            &settings,
        );
        assert!(matches!(err, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn alternating_family_splits() {
        let g = h1();
        let ball = GridDomain::ball(&g, HomogeneousNorm::WeightedMax, &[0.0; 3], 1.0, 4).unwrap();
        let settings = GammaSettings {
            hs: vec![1, 2, 3, 4, 5, 6],
            deltas: vec![0.05],
            xi: XiGrid { radius: 2.0, points: 5 },
            minimizer: MinimizerSettings { max_iter: 200, ..Default::default() },
            ..Default::default()
        };
        let c = vec![0.5, 0.0];
        let exp =
            gamma_experiment(&g, &SequenceFamily::AlternatingShift { c }, &[bumpy(&g)], &cube(5), &ball, &settings)
                .unwrap();
        let sub = exp.subsequences.unwrap();
        assert_eq!(sub.even_cauchy_gap, 0.0);
        assert_eq!(sub.odd_cauchy_gap, 0.0);
        // |xi + c|^2 - |xi - c|^2 = 4 <xi, c>, largest at xi_1 = 2
        assert!((sub.separation - 4.0).abs() < 1e-10);
        assert!(exp.brackets_ok);
    }
}
