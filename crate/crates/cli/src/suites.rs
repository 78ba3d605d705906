//! The verification suites behind `carnot verify`.

use carnot_core::calculus::probe_field;
use carnot_core::functional::{
    check_hypotheses, check_left_invariance, check_set_function, jensen_check, lsc_check, sandwich_check, Functional,
    HypothesisSampling, PropertyCheck, QuadraturePolicy,
};
use carnot_core::integrand::Integrand;
use carnot_core::laws::{check_frame_invariance, check_group_laws, check_probe_identity};
use carnot_core::mollify::{convergence_table, convolve_commutes_with_xj};
use carnot_core::sampling::{random_point, random_polynomial_expr, random_subdomain, rng};
use carnot_core::{
    convolve, erode_domain, Error, Expr, GradientMode, GridDomain, HorizontalVector, MollifierFamily, Result,
    ScalarField, StratifiedGroup,
};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Tolerances};
use crate::report::Row;

pub const SUITES: [&str; 5] = ["axioms", "mollify", "functional", "sandwich", "lsc"];

/// Default lattice resolution of the verification grid.
pub const DEFAULT_CELLS: usize = 8;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub group: StratifiedGroup,
    pub tol: Tolerances,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, tol_scale: f64) -> Result<Self> {
        let group = cfg.group()?;
        let tol = cfg.tolerances.scaled(tol_scale);
        Ok(Self { cfg, group, tol })
    }

    pub fn grid(&self) -> Result<GridDomain> {
        self.cfg.grid.build(self.group.dim(), DEFAULT_CELLS)
    }

    pub fn fields(&self) -> Result<Vec<ScalarField>> {
        let n = self.group.dim();
        let exprs = if self.cfg.fields.is_empty() {
            vec![random_polynomial_expr(&mut rng(self.cfg.seed), n, 2)]
        } else {
            self.cfg.fields.clone()
        };
        exprs.into_iter().map(|e| ScalarField::from_expr(&self.group, e)).collect()
    }

    pub fn integrand(&self) -> Result<Integrand> {
        Integrand::new(self.cfg.integrand.clone(), self.group.horizontal_dim())
    }

    /// The configured functional: weighted when a weight is given.
    pub fn functional(&self) -> Result<Functional> {
        let f = self.integrand()?;
        match &self.cfg.weight {
            Some(w) => Functional::weighted(&self.group, w.clone(), f, QuadraturePolicy::midpoint()),
            None => Functional::integral(&self.group, f, QuadraturePolicy::midpoint()),
        }
    }

    fn mollifier(&self) -> Result<MollifierFamily> {
        MollifierFamily::new(&self.group, self.cfg.norm, self.cfg.mollifier_resolution)
    }

    fn epsilons(&self) -> Result<Vec<f64>> {
        let e = self.cfg.schedules.epsilon.clone();
        if e.is_empty() {
            return Err(Error::Config("this suite needs a nonempty epsilon schedule".into()));
        }
        Ok(e)
    }
}

fn from_check(prefix: &str, c: &PropertyCheck) -> Row {
    Row::flag(format!("{prefix}{}", c.name), c.max_violation, c.tolerance, c.passed)
}

pub fn run(ctx: &Context, suite: &str) -> Result<(Vec<Row>, Value)> {
    match suite {
        "axioms" => axioms(ctx),
        "mollify" => mollify(ctx),
        "functional" => functional(ctx),
        "sandwich" => sandwich(ctx),
        "lsc" => lsc(ctx),
        other => Err(Error::Config(format!("unknown suite {other:?}; expected one of {}", SUITES.join(", ")))),
    }
}

fn axioms(ctx: &Context) -> Result<(Vec<Row>, Value)> {
    let g = &ctx.group;
    let mut rows: Vec<Row> = g
        .axiom_report()
        .into_iter()
        .map(|c| Row::flag(format!("structure:{}", c.name), c.residual, 0.0, c.passed))
        .collect();
    for c in check_group_laws(g, ctx.cfg.norm, ctx.cfg.samples, ctx.cfg.seed, ctx.tol.group) {
        rows.push(from_check("law:", &c));
    }
    let frame = check_frame_invariance(g, ctx.cfg.samples.min(100), ctx.cfg.seed, ctx.tol.frame)?;
    rows.push(from_check("", &frame));
    let probe = check_probe_identity(g, 20, 8, 0.05, ctx.cfg.seed)?;
    rows.push(Row::at_most("probe_analytic_error", probe.analytic_error, 0.0));
    rows.push(Row::at_least("probe_fd_order_min_ratio", probe.min_ratio, 3.2));
    rows.push(Row::at_most("probe_fd_order_max_ratio", probe.max_ratio, 4.8));
    Ok((rows, json!({ "probe_identity": probe })))
}

/// Largest `|phi_eps * u - u_ref|` over the centers of the eroded domain.
fn max_deviation(
    mf: &MollifierFamily,
    eps: f64,
    u: &ScalarField,
    reference: &ScalarField,
    omega: &GridDomain,
) -> Result<f64> {
    let conv = convolve(mf, eps, u, omega)?;
    let field = conv.field();
    let d = conv.domain().map_masked(|c| Ok((field.value(c)? - reference.value(c)?).abs()))?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

fn mollify(ctx: &Context) -> Result<(Vec<Row>, Value)> {
    let g = &ctx.group;
    let n = g.dim();
    let m = g.horizontal_dim();
    let mf = ctx.mollifier()?;
    let omega = ctx.grid()?;
    let eps_list = ctx.epsilons()?;
    let mut rows = Vec::new();
    let mut laws = Vec::new();
    for &eps in &eps_list {
        let l = mf.laws(eps)?;
        rows.push(Row::at_least(format!("nonnegative@{eps}"), l.min_value, 0.0));
        rows.push(Row::at_most(format!("support@{eps}"), l.support_violation, 0.0));
        rows.push(Row::at_most(format!("unit_mass@{eps}"), l.mass_residual, ctx.tol.mass));
        laws.push(l);
    }
    let eps0 = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let c = ScalarField::constant(n, 1.7);
    rows.push(Row::at_most("constant_exact", max_deviation(&mf, eps0, &c, &c, &omega)?, ctx.tol.constant));
    if mf.is_symmetric() {
        let xi: Vec<f64> = (0..m).map(|j| if j % 2 == 0 { 0.6 } else { -0.8 }).collect();
        let u = probe_field(g, &HorizontalVector(xi))?;
        rows.push(Row::at_most("probe_fixed_point", max_deviation(&mf, eps0, &u, &u, &omega)?, ctx.tol.fixed_point));
    }
    let mut commutation = Vec::new();
    for (i, u) in ctx.fields()?.iter().enumerate() {
        for j in 0..m {
            let r = convolve_commutes_with_xj(&mf, eps0, u, &omega, j, GradientMode::Analytic)?;
            rows.push(Row::at_most(format!("commutation:field{i}:X{}", j + 1), r.max_residual, ctx.tol.commutation));
            commutation.push(r);
        }
    }
    let conv_field = ctx.cfg.convergence_field.clone().unwrap_or_else(|| {
        Expr::add(vec![Expr::mul(vec![Expr::coord(1).scale(2.0).sin(), Expr::coord(2).cos()]), Expr::coord(n).sin()])
    });
    let u = ScalarField::from_expr(g, conv_field)?;
    let max_eps = eps_list.iter().cloned().fold(0.0, f64::max);
    let v = erode_domain(g, ctx.cfg.norm, &omega, max_eps)?;
    let table = convergence_table(&mf, &u, &omega, &v, ctx.cfg.p, &eps_list, GradientMode::Analytic)?;
    let mut sorted = table.clone();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    for (label, col) in [
        ("Lp", sorted.iter().map(|r| r.lp_err).collect::<Vec<_>>()),
        ("W1p", sorted.iter().map(|r| r.w1p_err).collect()),
    ] {
        let worst_step = col.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        rows.push(Row::flag(format!("convergence_{label}_decreasing"), worst_step, 1.0, worst_step < 1.0));
        let last = *col.last().unwrap_or(&0.0);
        let first = *col.first().unwrap_or(&1.0);
        rows.push(Row::at_most(format!("convergence_{label}_final_ratio"), last / first, 0.25));
    }
    Ok((rows, json!({ "laws": laws, "commutation": commutation, "convergence": table })))
}

fn functional(ctx: &Context) -> Result<(Vec<Row>, Value)> {
    let g = &ctx.group;
    let n = g.dim();
    let f = ctx.functional()?;
    let base = ctx.grid()?;
    let mut rows = Vec::new();
    let settings = HypothesisSampling { samples: ctx.cfg.samples, seed: ctx.cfg.seed, base: base.clone() };
    let mut checks = check_hypotheses(&f, &settings)?;
    for c in checks.iter_mut() {
        if c.name == "convexity" {
            c.tolerance = ctx.tol.convexity;
            c.passed = c.max_violation <= c.tolerance;
        }
        rows.push(from_check("hypothesis:", c));
    }
    let mut r = rng(ctx.cfg.seed.wrapping_add(1));
    let fields = ctx.fields()?;
    let u = &fields[0];
    let (lower, upper) = base.split(n - 1, 0.5 * (base.lo()[n - 1] + base.hi()[n - 1]));
    let mut family = vec![base.clone(), lower, upper];
    family.extend((0..4).map(|_| random_subdomain(&base, &mut r)));
    let sets = check_set_function(&f, u, &family)?;
    for c in [&sets.increasing, &sets.subadditive, &sets.superadditive, &sets.inner_regular] {
        rows.push(from_check("set_function:", c));
    }
    let invariance =
        if f.hypotheses().left_invariant { Some(left_invariance(ctx, &f, u, &base, &mut r, &mut rows)?) } else { None };
    Ok((rows, json!({ "hypotheses": checks, "set_function": sets, "left_invariance": invariance })))
}

fn left_invariance(
    ctx: &Context,
    f: &Functional,
    u: &ScalarField,
    base: &GridDomain,
    r: &mut carnot_core::sampling::SampleRng,
    rows: &mut Vec<Row>,
) -> Result<Value> {
    let g = &ctx.group;
    let n = g.dim();
    if g.is_abelian() {
        // translations by whole cells map the lattice onto itself
        let ys: Vec<Vec<f64>> = (0..8)
            .map(|_| random_point(r, n, 4.0).iter().zip(base.spacing()).map(|(c, h)| c.round() * h).collect())
            .collect();
        let rep = check_left_invariance(f, u, base, &ys)?;
        let tol = 1e-12 * (1.0 + rep.base_value.abs());
        rows.push(Row::at_most("left_invariance_aligned", rep.max_residual, tol));
        return Ok(json!(rep));
    }
    let ys: Vec<Vec<f64>> = (0..64).map(|_| random_point(r, n, 0.7)).collect();
    let levels = [1usize, 2]
        .into_iter()
        .map(|factor| check_left_invariance(f, u, &base.refine(factor), &ys))
        .collect::<Result<Vec<_>>>()?;
    let c = levels.iter().map(|l| l.rms_residual / l.h).fold(0.0, f64::max);
    let ratio = levels[1].rms_residual / levels[0].rms_residual;
    rows.push(Row::at_most(format!("left_invariance_ratio@h={:.4}", levels[0].h), ratio, 0.6));
    rows.push(Row::flag("left_invariance_C", c, c, true));
    Ok(json!({ "levels": levels, "C": c }))
}

fn sandwich(ctx: &Context) -> Result<(Vec<Row>, Value)> {
    let g = &ctx.group;
    let f = ctx.functional()?;
    let a = ctx.grid()?;
    let eps_list = ctx.epsilons()?;
    let mf = ctx.mollifier()?;
    let max_eps = eps_list.iter().cloned().fold(0.0, f64::max);
    let margin = ctx.cfg.margin.unwrap_or(1.25 * max_eps);
    if !(margin > max_eps) {
        return Err(Error::MarginViolation(format!("margin {margin} must exceed the largest epsilon {max_eps}")));
    }
    let a_prime = erode_domain(g, ctx.cfg.norm, &a, margin)?;
    if a_prime.is_empty() {
        return Err(Error::EmptyDomain(format!("no cell of the grid has right margin {margin}")));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut jensen = Vec::new();
    for (i, u) in ctx.fields()?.iter().enumerate() {
        let s = sandwich_check(&f, u, &a_prime, &a, &mf, &eps_list)?;
        for row in &s.rows {
            let worst = (-row.lower_gap).max(-row.upper_gap);
            rows.push(Row::flag(
                format!("sandwich:field{i}@{}", row.epsilon),
                worst,
                s.tolerance,
                row.lower_ok && row.upper_ok,
            ));
        }
        rows.push(Row::flag(format!("sandwich:field{i}:trend"), 0.0, s.tolerance, s.trend_ok));
        for &eps in &eps_list {
            let j = jensen_check(&f, u, &a, &a_prime, &mf, eps)?;
            rows.push(Row::at_most(
                format!("jensen:field{i}@{eps}"),
                j.violation,
                ctx.tol.jensen * (1.0 + j.rhs.abs()),
            ));
            jensen.push(j);
        }
        reports.push(s);
    }
    Ok((rows, json!({ "sandwich": reports, "jensen": jensen })))
}

fn lsc(ctx: &Context) -> Result<(Vec<Row>, Value)> {
    let g = &ctx.group;
    let n = g.dim();
    let f = ctx.functional()?;
    let a = ctx.grid()?;
    let fields = ctx.fields()?;
    let u = &fields[0];
    let constant = lsc_check(&f, u, &vec![u.clone(); 4], &a, 2)?;
    let tol = 1e-12 * (1.0 + constant.limit_value.abs());
    let mut rows = vec![Row::at_most("lsc_constant_gap", constant.gap.abs(), tol)];
    let zero = ScalarField::constant(n, 0.0);
    let teeth: Vec<ScalarField> = [2.0f64, 4.0, 8.0, 16.0]
        .iter()
        .map(|&k| {
            let arg = Expr::add(vec![Expr::coord(1).scale(k), Expr::constant(0.25)]);
            ScalarField::from_expr(g, arg.tri().scale(1.0 / k))
        })
        .collect::<Result<_>>()?;
    let saw = lsc_check(&f, &zero, &teeth, &a, 2)?;
    rows.push(Row::flag("lsc_sawtooth", saw.gap, saw.tolerance, saw.passed));
    let l1 = saw.l1_distances.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    rows.push(Row::flag("lsc_sawtooth_l1_decreasing", l1, 1.0, l1 < 1.0));
    Ok((rows, json!({ "constant": constant, "sawtooth": saw })))
}
