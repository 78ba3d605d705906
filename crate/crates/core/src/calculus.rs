//! Scalar fields on the group, left translations, the horizontal frame and
//! horizontal gradients.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::GridDomain;
use crate::error::{check_dim, Error, Result};
use crate::expr::Expr;
use crate::group::{StratifiedGroup, MAX_DIM};

/// Pointwise evaluation behind a [`ScalarField`].
pub trait Evaluator: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Euclidean gradient at `x`. Returns `Ok(false)` when no closed form exists.
    fn gradient(&self, _x: &[f64], _out: &mut [f64]) -> Result<bool> {
        Ok(false)
    }
}

/// A real-valued function on the group.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<dyn Evaluator>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("dim", &self.dim()).finish_non_exhaustive()
    }
}

impl ScalarField {
    pub fn new(eval: impl Evaluator + 'static) -> Self {
        Self { eval: Arc::new(eval) }
    }

    /// Closed-form field from an expression, checked against the group's dimensions.
    pub fn from_expr(g: &StratifiedGroup, expr: Expr) -> Result<Self> {
        expr.validate(g.dim(), g.horizontal_dim())?;
        Ok(Self::new(ExprField { n: g.dim(), expr }))
    }

    /// Opaque evaluator without a closed-form gradient.
    pub fn from_fn(n: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(FnField { n, f })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(ExprField { n, expr: Expr::constant(c) })
    }

    pub fn dim(&self) -> usize {
        self.eval.dim()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        self.eval.value(x)
    }

    /// Euclidean gradient, or `Ok(false)` when unavailable in closed form.
    pub fn euclidean_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        self.eval.gradient(x, out)
    }

    /// `sum_k c_k u_k + constant`.
    pub fn linear_combination(terms: Vec<(f64, ScalarField)>, constant: f64) -> Result<Self> {
        let n = terms.first().map(|(_, u)| u.dim()).ok_or_else(|| Error::Config("empty combination".into()))?;
        for (_, u) in &terms {
            check_dim(n, u.dim())?;
        }
        Ok(Self::new(Combination { n, terms, constant }))
    }

    pub fn plus_constant(&self, c: f64) -> Self {
        Self::new(Combination { n: self.dim(), terms: vec![(1.0, self.clone())], constant: c })
    }
}

struct ExprField {
    n: usize,
    expr: Expr,
}

impl Evaluator for ExprField {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.expr.eval(x))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<bool> {
        self.expr.eval_grad(x, out);
        Ok(true)
    }
}

struct FnField<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Evaluator for FnField<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

struct Combination {
    n: usize,
    terms: Vec<(f64, ScalarField)>,
    constant: f64,
}

impl Evaluator for Combination {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.constant;
        for (c, u) in &self.terms {
            v += c * u.eval.value(x)?;
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<bool> {
        out.fill(0.0);
        let mut tmp = vec![0.0; self.n];
        for (c, u) in &self.terms {
            if !u.eval.gradient(x, &mut tmp)? {
                return Ok(false);
            }
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += c * t);
        }
        Ok(true)
    }
}

/// `tau_y u (x) = u(y^{-1} . x)`.
struct Translated {
    group: StratifiedGroup,
    /// `y^{-1}`
    shift: Vec<f64>,
    inner: ScalarField,
}

impl Evaluator for Translated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let n = x.len();
        let mut w = [0.0; MAX_DIM];
        self.group.mul_into(&self.shift, x, &mut w[..n]);
        self.inner.eval.value(&w[..n])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<bool> {
        let n = x.len();
        let mut w = [0.0; MAX_DIM];
        self.group.mul_into(&self.shift, x, &mut w[..n]);
        let mut gw = [0.0; MAX_DIM];
        if !self.inner.eval.gradient(&w[..n], &mut gw[..n])? {
            return Ok(false);
        }
        // chain rule through the left translation: out = J^T grad u(w)
        let mut e = [0.0; MAX_DIM];
        let mut col = [0.0; MAX_DIM];
        for k in 0..n {
            e[k] = 1.0;
            self.group.left_translation_differential(&self.shift, x, &e[..n], &mut col[..n]);
            e[k] = 0.0;
            out[k] = (0..n).map(|l| gw[l] * col[l]).sum();
        }
        Ok(true)
    }
}

/// Left translation of a field, `tau_y u (x) = u(y^{-1} . x)`.
pub fn translate_field(g: &StratifiedGroup, y: &[f64], u: &ScalarField) -> Result<ScalarField> {
    check_dim(g.dim(), y.len())?;
    check_dim(g.dim(), u.dim())?;
    Ok(ScalarField::new(Translated { group: g.clone(), shift: y.iter().map(|c| -c).collect(), inner: u.clone() }))
}

/// Left translation of a domain, `tau_y A = y . A`.
pub fn translate_domain(g: &StratifiedGroup, y: &[f64], a: &GridDomain) -> Result<GridDomain> {
    a.left_translate(g, y)
}

/// Grid samples at the cell centers of a domain, multilinearly interpolated in between.
#[derive(Clone, Debug)]
pub struct GridField {
    domain: GridDomain,
    values: Vec<f64>,
}

impl GridField {
    /// `values` holds one entry per lattice cell; entries of unmasked cells are ignored.
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        check_dim(domain.total_cells(), values.len())?;
        Ok(Self { domain, values })
    }

    /// Sample `u` at every masked center.
    pub fn sample(u: &ScalarField, domain: &GridDomain) -> Result<Self> {
        let sampled = domain.map_masked(|c| u.value(c))?;
        let mut values = vec![0.0; domain.total_cells()];
        for (idx, v) in domain.masked_indices().into_iter().zip(sampled) {
            values[idx] = v;
        }
        Ok(Self { domain: domain.clone(), values })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of the masked cells, in masked-index order.
    pub fn masked_values(&self) -> Vec<f64> {
        self.domain.masked_indices().into_iter().map(|i| self.values[i]).collect()
    }

    /// Replace the masked values, in masked-index order.
    pub fn with_masked_values(&self, masked: &[f64]) -> Result<Self> {
        let idx = self.domain.masked_indices();
        check_dim(idx.len(), masked.len())?;
        let mut values = self.values.clone();
        for (i, v) in idx.into_iter().zip(masked) {
            values[i] = *v;
        }
        Ok(Self { domain: self.domain.clone(), values })
    }

    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let d = &self.domain;
        let n = d.dim();
        check_dim(n, x.len())?;
        let mut base = [0i64; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..n {
            let t = (x[k] - d.lo()[k]) / d.spacing()[k] - 0.5;
            let f = t.floor();
            base[k] = f as i64;
            frac[k] = t - f;
        }
        let mut total = 0.0;
        let mut corner = [0i64; MAX_DIM];
        for code in 0..(1usize << n) {
            let mut w = 1.0;
            for k in 0..n {
                if code >> k & 1 == 1 {
                    corner[k] = base[k] + 1;
                    w *= frac[k];
                } else {
                    corner[k] = base[k];
                    w *= 1.0 - frac[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            match d.flat_index_signed(&corner[..n]) {
                Some(i) if d.is_masked(i) => total += w * self.values[i],
                _ => return Err(Error::OutsideDomain(x.to_vec())),
            }
        }
        Ok(total)
    }

    pub fn into_field(self) -> ScalarField {
        ScalarField::new(self)
    }
}

impl Evaluator for GridField {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.interpolate(x)
    }
}

/// A vector in the horizontal layer `V_1 ~ R^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HorizontalVector(pub Vec<f64>);

impl HorizontalVector {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Euclidean length.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for HorizontalVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Coefficients of the left-invariant horizontal frame `X_1..X_m` at a point:
/// column `j` holds the components of `X_j(x)` in the coordinate basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalFrame {
    n: usize,
    m: usize,
    cols: Vec<f64>,
}

impl HorizontalFrame {
    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.cols[col * self.n + row]
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    /// `(X_1 u, .., X_m u)` from a Euclidean gradient.
    pub fn apply(&self, euclidean: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(self.m) {
            *o = self.column(j).iter().zip(euclidean).map(|(a, b)| a * b).sum();
        }
    }
}

/// `X_j(x) = d/dt (x . t e_j)|_{t=0} = e_j + [x, e_j]/2 + [x, [x, e_j]]/12`.
pub fn vector_field_coeffs(g: &StratifiedGroup, x: &[f64]) -> Result<HorizontalFrame> {
    check_dim(g.dim(), x.len())?;
    let n = g.dim();
    let m = g.horizontal_dim();
    let mut cols = vec![0.0; n * m];
    let mut e = vec![0.0; n];
    let mut b1 = vec![0.0; n];
    let mut b2 = vec![0.0; n];
    for j in 0..m {
        e[j] = 1.0;
        g.bracket_into(x, &e, &mut b1);
        let col = &mut cols[j * n..(j + 1) * n];
        for k in 0..n {
            col[k] = e[k] + 0.5 * b1[k];
        }
        if g.step() >= 3 {
            g.bracket_into(x, &b1, &mut b2);
            for k in 0..n {
                col[k] += b2[k] / 12.0;
            }
        }
        e[j] = 0.0;
    }
    Ok(HorizontalFrame { n, m, cols })
}

/// How to differentiate along the horizontal frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GradientMode {
    /// Closed-form Euclidean gradient pushed through the frame.
    Analytic,
    /// Central group difference `(u(x . h e_j) - u(x . (-h e_j))) / 2h`,
    /// optionally Richardson-extrapolated from steps `h` and `h/2`.
    GroupFd {
        step: f64,
        #[serde(default)]
        richardson: bool,
    },
}

impl GradientMode {
    pub fn fd(step: f64) -> Self {
        GradientMode::GroupFd { step, richardson: false }
    }
}

fn group_difference(g: &StratifiedGroup, u: &ScalarField, x: &[f64], j: usize, h: f64) -> Result<f64> {
    let n = x.len();
    let mut e = [0.0; MAX_DIM];
    let mut p = [0.0; MAX_DIM];
    e[j] = h;
    g.mul_into(x, &e[..n], &mut p[..n]);
    let up = u.value(&p[..n])?;
    e[j] = -h;
    g.mul_into(x, &e[..n], &mut p[..n]);
    let um = u.value(&p[..n])?;
    Ok((up - um) / (2.0 * h))
}

/// Horizontal gradient `(X_1 u(x), .., X_m u(x))` written into `out`.
pub fn horizontal_gradient_into(
    g: &StratifiedGroup,
    u: &ScalarField,
    x: &[f64],
    mode: GradientMode,
    out: &mut [f64],
) -> Result<()> {
    check_dim(g.dim(), x.len())?;
    check_dim(g.horizontal_dim(), out.len())?;
    match mode {
        GradientMode::Analytic => {
            let n = g.dim();
            let mut e = [0.0; MAX_DIM];
            if !u.euclidean_gradient(x, &mut e[..n])? {
                return Err(Error::GradientUnavailable("field has no closed-form gradient; use group-fd mode".into()));
            }
            vector_field_coeffs(g, x)?.apply(&e[..n], out);
        }
        GradientMode::GroupFd { step, richardson } => {
            if !(step > 0.0) {
                return Err(Error::NonPositiveScale(step));
            }
            for (j, o) in out.iter_mut().enumerate() {
                let coarse = group_difference(g, u, x, j, step)?;
                *o = if richardson {
                    let fine = group_difference(g, u, x, j, step / 2.0)?;
                    (4.0 * fine - coarse) / 3.0
                } else {
                    coarse
                };
            }
        }
    }
    Ok(())
}

pub fn horizontal_gradient(
    g: &StratifiedGroup,
    u: &ScalarField,
    x: &[f64],
    mode: GradientMode,
) -> Result<HorizontalVector> {
    let mut out = vec![0.0; g.horizontal_dim()];
    horizontal_gradient_into(g, u, x, mode, &mut out)?;
    Ok(HorizontalVector(out))
}

/// The probe `u_xi(x) = <xi, Pi(x)>`, whose horizontal gradient is `xi` everywhere.
pub fn probe_field(g: &StratifiedGroup, xi: &HorizontalVector) -> Result<ScalarField> {
    check_dim(g.horizontal_dim(), xi.dim())?;
    if !xi.0.iter().all(|c| c.is_finite()) {
        return Err(Error::Config(format!("probe direction {:?} is not finite", xi.0)));
    }
    ScalarField::from_expr(g, Expr::probe(xi.as_slice()))
}

/// `(int_A |grad_G u|^p)^{1/p}` by the midpoint rule.
pub fn sobolev_seminorm(
    g: &StratifiedGroup,
    u: &ScalarField,
    a: &GridDomain,
    p: f64,
    mode: GradientMode,
) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyDomain("seminorm over an empty domain".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::Config(format!("exponent p = {p} must be at least 1")));
    }
    let m = g.horizontal_dim();
    let terms = a.map_masked(|c| {
        let mut grad = vec![0.0; m];
        horizontal_gradient_into(g, u, c, mode, &mut grad)?;
        Ok(grad.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
    })?;
    Ok((terms.iter().sum::<f64>() * a.cell_volume()).powf(1.0 / p))
}

/// Linear map from masked-cell values of a grid field to its discrete horizontal
/// gradient at every masked cell: `X_j v(c) = sum_k X_j^k(c) D_k v(c)`, with
/// `D_k` a central difference where both neighbours are masked and one-sided otherwise.
#[derive(Clone, Debug)]
pub struct DiscreteGradient {
    m: usize,
    cells: usize,
    /// Row `(cell, j)` as `(masked position, weight)` pairs.
    rows: Vec<Vec<(usize, f64)>>,
}

impl DiscreteGradient {
    pub fn new(g: &StratifiedGroup, domain: &GridDomain) -> Result<Self> {
        check_dim(g.dim(), domain.dim())?;
        let n = g.dim();
        let m = g.horizontal_dim();
        let masked = domain.masked_indices();
        let mut position = vec![usize::MAX; domain.total_cells()];
        for (p, &idx) in masked.iter().enumerate() {
            position[idx] = p;
        }
        let mut rows = Vec::with_capacity(masked.len() * m);
        let mut multi = vec![0usize; n];
        let mut nb = vec![0i64; n];
        let mut center = vec![0.0; n];
        for (p, &idx) in masked.iter().enumerate() {
            domain.multi_index(idx, &mut multi);
            domain.center_into(idx, &mut center);
            let frame = vector_field_coeffs(g, &center)?;
            // Euclidean difference stencils per axis
            let mut axis_stencils: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
            for k in 0..n {
                let h = domain.spacing()[k];
                let mut neighbour = |offset: i64| {
                    for (t, (&mi, nbi)) in multi.iter().zip(nb.iter_mut()).enumerate() {
                        *nbi = mi as i64 + if t == k { offset } else { 0 };
                    }
                    domain.flat_index_signed(&nb).filter(|&i| domain.is_masked(i)).map(|i| position[i])
                };
                let stencil = match (neighbour(-1), neighbour(1)) {
                    (Some(l), Some(r)) => vec![(r, 0.5 / h), (l, -0.5 / h)],
                    (None, Some(r)) => vec![(r, 1.0 / h), (p, -1.0 / h)],
                    (Some(l), None) => vec![(p, 1.0 / h), (l, -1.0 / h)],
                    (None, None) => Vec::new(),
                };
                axis_stencils.push(stencil);
            }
            for j in 0..m {
                let mut row: Vec<(usize, f64)> = Vec::new();
                for (k, stencil) in axis_stencils.iter().enumerate() {
                    let a = frame.entry(k, j);
                    if a == 0.0 {
                        continue;
                    }
                    for &(q, w) in stencil {
                        match row.iter_mut().find(|(r, _)| *r == q) {
                            Some(entry) => entry.1 += a * w,
                            None => row.push((q, a * w)),
                        }
                    }
                }
                rows.push(row);
            }
        }
        Ok(Self { m, cells: masked.len(), rows })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn horizontal_dim(&self) -> usize {
        self.m
    }

    /// Gradient at masked cell `cell` of the masked-value vector `v`.
    pub fn apply_at(&self, v: &[f64], cell: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.rows[cell * self.m + j].iter().map(|&(q, w)| w * v[q]).sum();
        }
    }

    /// Accumulate `D_cell^T w` into `out`.
    pub fn add_transpose_at(&self, cell: usize, w: &[f64], out: &mut [f64]) {
        for (j, &wj) in w.iter().enumerate() {
            if wj == 0.0 {
                continue;
            }
            for &(q, a) in &self.rows[cell * self.m + j] {
                out[q] += a * wj;
            }
        }
    }
}

impl GridDomain {
    /// Evaluate `f` at every masked center in parallel; results come back in
    /// masked-index order so that later reductions are deterministic.
    pub fn map_masked<T: Send>(&self, f: impl Fn(&[f64]) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.masked_indices()
            .into_par_iter()
            .map(|idx| {
                let c = self.center(idx);
                f(&c)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> StratifiedGroup {
        StratifiedGroup::heisenberg(1).unwrap()
    }

    #[test]
    fn frame_at_origin_is_standard_basis() {
        for g in [h1(), StratifiedGroup::engel().unwrap(), StratifiedGroup::heisenberg(2).unwrap()] {
            let f = vector_field_coeffs(&g, &vec![0.0; g.dim()]).unwrap();
            for j in 0..g.horizontal_dim() {
                for k in 0..g.dim() {
                    assert_eq!(f.entry(k, j), if k == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn heisenberg_frame_is_classical() {
        let f = vector_field_coeffs(&h1(), &[0.7, -1.3, 2.0]).unwrap();
        assert_eq!(f.column(0), &[1.0, 0.0, 1.3 / 2.0]);
        assert_eq!(f.column(1), &[0.0, 1.0, 0.7 / 2.0]);
    }

    #[test]
    fn gradient_of_vertical_coordinate() {
        let g = h1();
        let u = ScalarField::from_expr(&g, Expr::coord(3)).unwrap();
        let x = [0.4, -0.9, 1.7];
        let grad = horizontal_gradient(&g, &u, &x, GradientMode::Analytic).unwrap();
        assert_eq!(grad.0, vec![0.9 / 2.0, 0.4 / 2.0]);
        // x3 is linear along group lines through x, so the central difference is exact
        let fd = horizontal_gradient(&g, &u, &x, GradientMode::fd(0.1)).unwrap();
        for (a, b) in fd.0.iter().zip(&grad.0) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let g = StratifiedGroup::engel().unwrap();
        let u = ScalarField::constant(4, 3.5);
        let grad = horizontal_gradient(&g, &u, &[1.0, 2.0, 3.0, 4.0], GradientMode::Analytic).unwrap();
        assert_eq!(grad.0, vec![0.0, 0.0]);
    }

    #[test]
    fn probe_examples() {
        let g = h1();
        let u = probe_field(&g, &vec![1.0, 0.0].into()).unwrap();
        assert_eq!(u.value(&[2.0, 3.0, 7.0]).unwrap(), 2.0);
        let zero = probe_field(&g, &HorizontalVector::zeros(2)).unwrap();
        assert_eq!(zero.value(&[2.0, 3.0, 7.0]).unwrap(), 0.0);
        assert!(probe_field(&g, &vec![1.0].into()).is_err());
        assert!(probe_field(&g, &vec![f64::NAN, 0.0].into()).is_err());
    }

    #[test]
    fn translated_probe_differs_by_a_constant() {
        let g = StratifiedGroup::engel().unwrap();
        let xi = HorizontalVector(vec![0.8, -1.7]);
        let u = probe_field(&g, &xi).unwrap();
        let x = [0.3, -0.4, 1.1, 2.2];
        let tu = translate_field(&g, &x, &u).unwrap();
        for y in [[1.0, 2.0, 3.0, 4.0], [-0.5, 0.25, 0.0, 1.0]] {
            let lhs = tu.value(&y).unwrap();
            let rhs = u.value(&y).unwrap() - u.value(&x).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn translation_identities() {
        let g = h1();
        let u = ScalarField::from_expr(&g, Expr::monomial(1.0, &[1, 2, 1])).unwrap();
        let y = [0.5, -0.25, 1.5];
        let t0 = translate_field(&g, &[0.0; 3], &u).unwrap();
        let back = translate_field(&g, &[-0.5, 0.25, -1.5], &translate_field(&g, &y, &u).unwrap()).unwrap();
        for x in [[0.1, 0.2, 0.3], [-1.0, 0.7, 2.0]] {
            assert_eq!(t0.value(&x).unwrap(), u.value(&x).unwrap());
            assert!((back.value(&x).unwrap() - u.value(&x).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn grid_field_interpolates_and_reports_outside() {
        let g = StratifiedGroup::euclidean(2).unwrap();
        let dom = GridDomain::new_box(&[0.0, 0.0], &[1.0, 1.0], &[10, 10]).unwrap();
        let lin = ScalarField::from_expr(&g, Expr::add(vec![Expr::coord(1).scale(2.0), Expr::coord(2)])).unwrap();
        let gf = GridField::sample(&lin, &dom).unwrap();
        // linear fields are reproduced at and between nodes
        assert!((gf.interpolate(&[0.35, 0.45]).unwrap() - lin.value(&[0.35, 0.45]).unwrap()).abs() < 1e-14);
        assert!((gf.interpolate(&[0.52, 0.31]).unwrap() - 1.35).abs() < 1e-14);
        assert!(matches!(gf.interpolate(&[0.01, 0.5]), Err(Error::OutsideDomain(_))));
        let field = gf.into_field();
        assert!(field.value(&[0.99, 0.5]).is_err());
        let mut grad = [0.0; 2];
        assert!(!field.euclidean_gradient(&[0.5, 0.5], &mut grad).unwrap());
        assert!(matches!(
            horizontal_gradient(&g, &field, &[0.5, 0.5], GradientMode::Analytic),
            Err(Error::GradientUnavailable(_))
        ));
    }

    #[test]
    fn seminorm_of_probe_is_exact() {
        let g = h1();
        let xi = HorizontalVector(vec![3.0, 4.0]);
        let u = probe_field(&g, &xi).unwrap();
        let a = GridDomain::new_box(&[-1.0, -1.0, -0.5], &[1.0, 0.5, 0.5], &[8, 6, 4]).unwrap();
        for p in [1.0, 2.0, 3.5] {
            let s = sobolev_seminorm(&g, &u, &a, p, GradientMode::Analytic).unwrap();
            let expected = 5.0 * a.volume().powf(1.0 / p);
            assert!((s - expected).abs() < 1e-12 * expected);
        }
        let c = ScalarField::constant(3, 2.0);
        assert_eq!(sobolev_seminorm(&g, &c, &a, 2.0, GradientMode::Analytic).unwrap(), 0.0);
        let empty = a.with_mask(vec![false; a.total_cells()]).unwrap();
        assert!(matches!(sobolev_seminorm(&g, &c, &empty, 2.0, GradientMode::Analytic), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn discrete_gradient_is_exact_on_probes() {
        let g = h1();
        let a = GridDomain::from_predicate(&[-1.0; 3], &[1.0; 3], &[6, 6, 6], |c| c[0] + c[2] < 0.8).unwrap();
        let d = DiscreteGradient::new(&g, &a).unwrap();
        let u = probe_field(&g, &vec![1.5, -0.5].into()).unwrap();
        let v = GridField::sample(&u, &a).unwrap().masked_values();
        let mut grad = [0.0; 2];
        for cell in 0..d.cells() {
            d.apply_at(&v, cell, &mut grad);
            assert!((grad[0] - 1.5).abs() < 1e-12 && (grad[1] + 0.5).abs() < 1e-12);
        }
    }
}
