//! Seeded random points, fields and domains for the property checkers.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::ScalarField;
use crate::domain::GridDomain;
use crate::error::Result;
use crate::expr::Expr;
use crate::group::StratifiedGroup;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A point with coordinates uniform in `[-scale, scale]`.
pub fn random_point(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

/// A random polynomial of degree at most `degree` (1 to 3) in the coordinates,
/// coefficients uniform in `[-1, 1]`.
pub fn random_polynomial_expr(rng: &mut impl Rng, n: usize, degree: u32) -> Expr {
    let mut terms = vec![Expr::constant(rng.random_range(-1.0..=1.0))];
    for i in 0..n {
        let mut powers = vec![0u32; n];
        powers[i] = 1;
        terms.push(Expr::monomial(rng.random_range(-1.0..=1.0), &powers));
    }
    if degree >= 2 {
        for i in 0..n {
            for j in i..n {
                let mut powers = vec![0u32; n];
                powers[i] += 1;
                powers[j] += 1;
                terms.push(Expr::monomial(rng.random_range(-1.0..=1.0), &powers));
            }
        }
    }
    if degree >= 3 {
        for _ in 0..n {
            let mut powers = vec![0u32; n];
            for _ in 0..3 {
                powers[rng.random_range(0..n)] += 1;
            }
            terms.push(Expr::monomial(rng.random_range(-1.0..=1.0), &powers));
        }
    }
    Expr::add(terms)
}

/// A random smooth field: a quadratic polynomial plus a random sine wave.
pub fn random_field_expr(rng: &mut impl Rng, n: usize) -> Expr {
    let poly = random_polynomial_expr(rng, n, 2);
    let k: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..=2.0)).collect();
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut arg = vec![Expr::constant(phase)];
    for (i, ki) in k.iter().enumerate() {
        arg.push(Expr::coord(i + 1).scale(*ki));
    }
    let wave = Expr::add(arg).sin().scale(rng.random_range(-1.0..=1.0));
    Expr::add(vec![poly, wave])
}

pub fn random_field(g: &StratifiedGroup, rng: &mut impl Rng) -> Result<ScalarField> {
    ScalarField::from_expr(g, random_field_expr(rng, g.dim()))
}

/// A nonempty random sub-box or ellipsoid of `base`, on the same lattice.
pub fn random_subdomain(base: &GridDomain, rng: &mut impl Rng) -> GridDomain {
    let n = base.dim();
    let lo = base.lo().to_vec();
    let hi = base.hi();
    loop {
        let center: Vec<f64> = (0..n).map(|k| rng.random_range(lo[k]..hi[k])).collect();
        let radii: Vec<f64> = (0..n).map(|k| rng.random_range(0.2..0.8) * (hi[k] - lo[k])).collect();
        let ellipsoid = rng.random_bool(0.5);
        let mask: Vec<bool> = (0..base.total_cells())
            .map(|idx| {
                if !base.is_masked(idx) {
                    return false;
                }
                let c = base.center(idx);
                if ellipsoid {
                    (0..n).map(|k| ((c[k] - center[k]) / radii[k]).powi(2)).sum::<f64>() < 1.0
                } else {
                    (0..n).all(|k| (c[k] - center[k]).abs() < 0.5 * radii[k])
                }
            })
            .collect();
        if mask.iter().any(|&b| b) {
            return base.with_mask(mask).expect("mask length matches the lattice");
        }
    }
}
