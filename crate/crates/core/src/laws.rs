//! Sampled checks of the group law, the homogeneous norms, left-invariance of the
//! horizontal frame and the probe identity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{
    horizontal_gradient_into, probe_field, translate_field, GradientMode, HorizontalVector, ScalarField,
};
use crate::error::Result;
use crate::expr::Expr;
use crate::functional::PropertyCheck;
use crate::group::{HomogeneousNorm, StratifiedGroup};
use crate::sampling::{random_point, random_polynomial_expr, rng};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fmt_point(x: &[f64]) -> String {
    format!("{x:?}")
}

/// Associativity, identity, inverse, dilation automorphism and the three norm
/// properties on `samples` random triples with coordinates in `[-1, 1]`.
pub fn check_group_laws(
    g: &StratifiedGroup,
    norm: HomogeneousNorm,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Vec<PropertyCheck> {
    let n = g.dim();
    let mut r = rng(seed);
    let names = [
        "associativity",
        "identity",
        "inverse",
        "dilation_automorphism",
        "norm_definite",
        "norm_symmetric",
        "norm_homogeneous",
        "dist_left_invariant",
        "dist_right_invariant",
    ];
    let mut checks: Vec<PropertyCheck> = names.iter().map(|s| PropertyCheck::new(s, tol)).collect();
    let zero = vec![0.0; n];
    let (mut xy, mut yz, mut l, mut rr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..samples {
        let x = random_point(&mut r, n, 1.0);
        let y = random_point(&mut r, n, 1.0);
        let z = random_point(&mut r, n, 1.0);
        let lambda = r.random_range(0.1..4.0);
        let w = || format!("x={} y={} z={}", fmt_point(&x), fmt_point(&y), fmt_point(&z));

        g.mul_into(&x, &y, &mut xy);
        g.mul_into(&y, &z, &mut yz);
        g.mul_into(&xy, &z, &mut l);
        g.mul_into(&x, &yz, &mut rr);
        checks[0].record(max_diff(&l, &rr), w);

        g.mul_into(&x, &zero, &mut a);
        g.mul_into(&zero, &x, &mut b);
        checks[1].record(max_diff(&a, &x).max(max_diff(&b, &x)), w);

        let inv: Vec<f64> = x.iter().map(|v| -v).collect();
        g.mul_into(&x, &inv, &mut a);
        g.mul_into(&inv, &x, &mut b);
        checks[2].record(max_diff(&a, &zero).max(max_diff(&b, &zero)), w);

        g.dilate_into(lambda, &xy, &mut a);
        g.dilate_into(lambda, &x, &mut b);
        g.dilate_into(lambda, &y, &mut c);
        g.mul_into(&b, &c, &mut l);
        checks[3].record(max_diff(&a, &l) / (1.0 + lambda.powi(g.step() as i32)), w);

        let rho = norm.eval(g, &x);
        let definite = if norm.eval(g, &zero) != 0.0 || !(rho > 0.0) { 1.0 } else { 0.0 };
        checks[4].record(definite, w);
        checks[5].record((norm.eval(g, &inv) - rho).abs(), w);
        checks[6].record((norm.eval(g, &b) - lambda * rho).abs() / (1.0 + lambda), w);

        checks[7].record((g.dist_left_raw(norm, &xy, &l_mul(g, &x, &z)) - g.dist_left_raw(norm, &y, &z)).abs(), || {
            format!("{} (left factor x)", w())
        });
        g.mul_into(&y, &x, &mut a);
        g.mul_into(&z, &x, &mut b);
        checks[8].record((g.dist_right_raw(norm, &a, &b) - g.dist_right_raw(norm, &y, &z)).abs(), w);
    }
    checks
}

fn l_mul(g: &StratifiedGroup, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.dim()];
    g.mul_into(x, y, &mut out);
    out
}

/// `max |X_j(tau_y u)(x) - (X_j u)(y^{-1} x)|` over random `(y, x, u)` with `u` a
/// random polynomial of degree at most 3.
pub fn check_frame_invariance(g: &StratifiedGroup, samples: usize, seed: u64, tol: f64) -> Result<PropertyCheck> {
    let n = g.dim();
    let m = g.horizontal_dim();
    let mut r = rng(seed);
    let mut check = PropertyCheck::new("frame_left_invariance", tol);
    let (mut lhs, mut rhs) = (vec![0.0; m], vec![0.0; m]);
    for _ in 0..samples {
        let expr = random_polynomial_expr(&mut r, n, 3);
        let u = ScalarField::from_expr(g, expr)?;
        let y = random_point(&mut r, n, 1.0);
        let x = random_point(&mut r, n, 1.0);
        let tu = translate_field(g, &y, &u)?;
        horizontal_gradient_into(g, &tu, &x, GradientMode::Analytic, &mut lhs)?;
        let y_inv: Vec<f64> = y.iter().map(|c| -c).collect();
        let yx = l_mul(g, &y_inv, &x);
        horizontal_gradient_into(g, &u, &yx, GradientMode::Analytic, &mut rhs)?;
        check.record(max_diff(&lhs, &rhs), || format!("y={y:?} x={x:?}"));
    }
    Ok(check)
}

/// Outcome of [`check_probe_identity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeIdentityReport {
    /// `max |grad_G u_xi - xi|` in analytic mode.
    pub analytic_error: f64,
    /// `max |grad_G u_xi - xi|` for the group difference at the coarse step.
    pub fd_probe_error: f64,
    /// Error ratio between steps `h` and `h/2` per direction.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// The probe identity `grad_G u_xi = xi` on random directions, and the order of
/// the group difference. Central differences along `x . (t e_j)` are exact on
/// `u_xi` itself, since horizontal coordinates add under the group law; the order
/// is read off `w = sin(u_xi) + u_xi x_n`, whose gradient is known in closed form.
pub fn check_probe_identity(
    g: &StratifiedGroup,
    directions: usize,
    points: usize,
    step: f64,
    seed: u64,
) -> Result<ProbeIdentityReport> {
    let n = g.dim();
    let m = g.horizontal_dim();
    let mut r = rng(seed);
    let mut grad = vec![0.0; m];
    let mut analytic_error: f64 = 0.0;
    let mut fd_probe_error: f64 = 0.0;
    let mut ratios = Vec::with_capacity(directions);
    for _ in 0..directions {
        let xi = random_point(&mut r, m, 2.0);
        let u = probe_field(g, &HorizontalVector(xi.clone()))?;
        let w = ScalarField::from_expr(
            g,
            Expr::add(vec![Expr::probe(&xi).sin(), Expr::mul(vec![Expr::probe(&xi), Expr::coord(n)])]),
        )?;
        let xs: Vec<Vec<f64>> = (0..points).map(|_| random_point(&mut r, n, 1.0)).collect();
        let mut errs = [0.0f64; 2];
        for x in &xs {
            horizontal_gradient_into(g, &u, x, GradientMode::Analytic, &mut grad)?;
            analytic_error = analytic_error.max(max_diff(&grad, &xi));
            horizontal_gradient_into(g, &u, x, GradientMode::fd(step), &mut grad)?;
            fd_probe_error = fd_probe_error.max(max_diff(&grad, &xi));
            let mut exact = vec![0.0; m];
            horizontal_gradient_into(g, &w, x, GradientMode::Analytic, &mut exact)?;
            for (k, h) in [step, step / 2.0].into_iter().enumerate() {
                horizontal_gradient_into(g, &w, x, GradientMode::fd(h), &mut grad)?;
                errs[k] += grad.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
            }
        }
        ratios.push(errs[0] / errs[1]);
    }
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ProbeIdentityReport { analytic_error, fd_probe_error, ratios, min_ratio, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_satisfy_the_laws() {
        for name in ["euclidean:2", "heisenberg:1", "engel"] {
            let g = StratifiedGroup::preset(name).unwrap();
            for norm in [HomogeneousNorm::WeightedMax, HomogeneousNorm::Koranyi] {
                for c in check_group_laws(&g, norm, 100, 1, 1e-12) {
                    assert!(c.passed, "{name}: {}", c.summary());
                }
            }
        }
    }

    #[test]
    fn frame_is_left_invariant() {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let c = check_frame_invariance(&g, 30, 2, 1e-10).unwrap();
        assert!(c.passed, "{}", c.summary());
    }

    #[test]
    fn probe_identity_and_second_order() {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let rep = check_probe_identity(&g, 5, 6, 0.05, 3).unwrap();
        assert_eq!(rep.analytic_error, 0.0);
        assert!(rep.fd_probe_error < 1e-12);
        assert!(rep.min_ratio > 3.2 && rep.max_ratio < 4.8, "{rep:?}");
    }
}
