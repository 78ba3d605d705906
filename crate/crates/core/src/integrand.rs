//! Convex nonnegative integrands `f: R^m -> [0, +inf]`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// An affine map `eta -> <a, eta> + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Plane {
    pub fn eval(&self, eta: &[f64]) -> f64 {
        self.a.iter().zip(eta).map(|(a, e)| a * e).sum::<f64>() + self.b
    }
}

/// The integrand menu as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegrandShape {
    /// `|eta|^p`, or `+inf` beyond `radius` when one is given.
    Power {
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    /// `eta^T M eta` with `M` symmetric positive semidefinite.
    Quadratic {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
    },
    /// `max(0, max_i <a_i, eta> + b_i)`.
    MaxAffine { planes: Vec<Plane> },
    /// Convex data on a uniform grid of `[lo, hi]` (row-major, last axis fastest),
    /// extended as the maximum of supporting planes through the nodes.
    Tabulated { lo: Vec<f64>, hi: Vec<f64>, points: Vec<usize>, values: Vec<f64> },
}

/// Serialized integrand: `f(eta) = shape(eta + shift) + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrandSpec {
    #[serde(flatten)]
    pub shape: IntegrandShape,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl IntegrandSpec {
    pub fn power(p: f64) -> Self {
        Self { shape: IntegrandShape::Power { p, radius: None }, offset: 0.0, shift: None }
    }

    pub fn quadratic(m: Vec<Vec<f64>>) -> Self {
        Self { shape: IntegrandShape::Quadratic { m }, offset: 0.0, shift: None }
    }

    pub fn max_affine(planes: Vec<Plane>) -> Self {
        Self { shape: IntegrandShape::MaxAffine { planes }, offset: 0.0, shift: None }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_shift(mut self, shift: Vec<f64>) -> Self {
        self.shift = Some(shift);
        self
    }
}

/// Growth certificate `(a, b, p)`: `f(eta) <= a + b |eta|^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl Growth {
    pub fn bound(&self, eta_norm: f64) -> f64 {
        self.a + self.b * eta_norm.powf(self.p)
    }
}

/// A validated integrand on `R^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Integrand {
    spec: IntegrandSpec,
    m: usize,
    /// Supporting planes of a tabulated shape.
    planes: Vec<Plane>,
}

impl Serialize for Integrand {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl Integrand {
    pub fn new(spec: IntegrandSpec, m: usize) -> Result<Self> {
        if !(spec.offset >= 0.0 && spec.offset.is_finite()) {
            return Err(Error::Config(format!("offset {} must be finite and nonnegative", spec.offset)));
        }
        if let Some(s) = &spec.shift {
            check_dim(m, s.len())?;
            if s.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config("shift must be finite".into()));
            }
        }
        let mut planes = Vec::new();
        match &spec.shape {
            IntegrandShape::Power { p, radius } => {
                if !(*p >= 1.0 && p.is_finite()) {
                    return Err(Error::Config(format!("power exponent {p} must be at least 1")));
                }
                if let Some(r) = radius {
                    if !(*r > 0.0) {
                        return Err(Error::Config(format!("radius {r} must be positive")));
                    }
                }
            }
            IntegrandShape::Quadratic { m: mat } => check_psd(mat, m)?,
            IntegrandShape::MaxAffine { planes } => {
                for pl in planes {
                    check_dim(m, pl.a.len())?;
                    if pl.a.iter().chain([&pl.b]).any(|c| !c.is_finite()) {
                        return Err(Error::Config("plane coefficients must be finite".into()));
                    }
                }
            }
            IntegrandShape::Tabulated { lo, hi, points, values } => {
                planes = supporting_planes(lo, hi, points, values, m)?;
            }
        }
        Ok(Self { spec, m, planes })
    }

    pub fn power(p: f64, m: usize) -> Result<Self> {
        Self::new(IntegrandSpec::power(p), m)
    }

    pub fn spec(&self) -> &IntegrandSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    fn shifted<'a>(&self, eta: &'a [f64], buf: &'a mut [f64]) -> &'a [f64] {
        match &self.spec.shift {
            Some(s) => {
                for (k, b) in buf.iter_mut().enumerate().take(eta.len()) {
                    *b = eta[k] + s[k];
                }
                &buf[..eta.len()]
            }
            None => eta,
        }
    }

    pub fn eval(&self, eta: &[f64]) -> f64 {
        let mut buf = [0.0; crate::group::MAX_DIM];
        let e = self.shifted(eta, &mut buf);
        let base = match &self.spec.shape {
            IntegrandShape::Power { p, radius } => {
                let r2: f64 = e.iter().map(|c| c * c).sum();
                match radius {
                    Some(rad) if r2 > rad * rad => f64::INFINITY,
                    _ if *p == 2.0 => r2,
                    _ if *p == 1.0 => r2.sqrt(),
                    _ => r2.powf(0.5 * p),
                }
            }
            IntegrandShape::Quadratic { m } => quad_form(m, e),
            IntegrandShape::MaxAffine { planes } => planes.iter().map(|pl| pl.eval(e)).fold(0.0, f64::max),
            IntegrandShape::Tabulated { .. } => self.planes.iter().map(|pl| pl.eval(e)).fold(0.0, f64::max),
        };
        base + self.spec.offset
    }

    /// A subgradient at `eta`; infinite values give `false`.
    pub fn subgradient(&self, eta: &[f64], out: &mut [f64]) -> bool {
        let mut buf = [0.0; crate::group::MAX_DIM];
        let e = self.shifted(eta, &mut buf);
        out.fill(0.0);
        match &self.spec.shape {
            IntegrandShape::Power { p, radius } => {
                let r = norm2(e);
                if radius.is_some_and(|rad| r > rad) {
                    return false;
                }
                if r > 0.0 {
                    let scale = p * r.powf(p - 2.0);
                    out.iter_mut().zip(e).for_each(|(o, x)| *o = scale * x);
                }
            }
            IntegrandShape::Quadratic { m } => {
                for (i, row) in m.iter().enumerate() {
                    out[i] = 2.0 * row.iter().zip(e).map(|(a, x)| a * x).sum::<f64>();
                }
            }
            IntegrandShape::MaxAffine { planes } => active_plane(planes, e, out),
            IntegrandShape::Tabulated { .. } => active_plane(&self.planes, e, out),
        }
        true
    }

    /// Lipschitz constant of the gradient, when the integrand has one.
    pub fn gradient_lipschitz(&self) -> Option<f64> {
        match &self.spec.shape {
            IntegrandShape::Power { p, radius: None } if *p == 2.0 => Some(2.0),
            IntegrandShape::Quadratic { m } => Some(2.0 * frobenius(m)),
            _ => None,
        }
    }

    /// `(a, b, p)` with `f(eta) <= a + b |eta|^p`, when one is known.
    pub fn growth(&self) -> Option<Growth> {
        let s = self.spec.shift.as_deref().map(norm2).unwrap_or(0.0);
        let c = self.spec.offset;
        match &self.spec.shape {
            IntegrandShape::Power { radius: Some(_), .. } => None,
            IntegrandShape::Power { p, radius: None } => {
                if s == 0.0 {
                    Some(Growth { a: c, b: 1.0, p: *p })
                } else {
                    let k = 2f64.powf(p - 1.0);
                    Some(Growth { a: c + k * s.powf(*p), b: k, p: *p })
                }
            }
            IntegrandShape::Quadratic { m } => {
                let fr = frobenius(m);
                if s == 0.0 {
                    Some(Growth { a: c, b: fr, p: 2.0 })
                } else {
                    Some(Growth { a: c + 2.0 * fr * s * s, b: 2.0 * fr, p: 2.0 })
                }
            }
            IntegrandShape::MaxAffine { planes } => Some(affine_growth(planes, s, c)),
            IntegrandShape::Tabulated { .. } => Some(affine_growth(&self.planes, s, c)),
        }
    }

    /// Same shape with another offset.
    pub fn with_offset(&self, offset: f64) -> Result<Self> {
        Self::new(IntegrandSpec { offset, ..self.spec.clone() }, self.m)
    }

    /// Same shape with another shift.
    pub fn with_shift(&self, shift: Option<Vec<f64>>) -> Result<Self> {
        Self::new(IntegrandSpec { shift, ..self.spec.clone() }, self.m)
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn quad_form(m: &[Vec<f64>], e: &[f64]) -> f64 {
    let v: f64 = m.iter().zip(e).map(|(row, ei)| ei * row.iter().zip(e).map(|(a, x)| a * x).sum::<f64>()).sum();
    v.max(0.0)
}

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().map(|a| a * a).sum::<f64>().sqrt()
}

fn active_plane(planes: &[Plane], e: &[f64], out: &mut [f64]) {
    let mut best = 0.0;
    for pl in planes {
        let v = pl.eval(e);
        if v > best {
            best = v;
            out.copy_from_slice(&pl.a);
        }
    }
}

fn affine_growth(planes: &[Plane], s: f64, c: f64) -> Growth {
    // <a, eta + s> + b <= |a| |eta| + (|a| s + b)
    let a = planes.iter().map(|pl| norm2(&pl.a) * s + pl.b).fold(0.0, f64::max);
    let b = planes.iter().map(|pl| norm2(&pl.a)).fold(0.0, f64::max);
    Growth { a: a + c, b, p: 1.0 }
}

/// Rejects matrices that are not square, symmetric and positive semidefinite.
fn check_psd(mat: &[Vec<f64>], m: usize) -> Result<()> {
    check_dim(m, mat.len())?;
    for row in mat {
        check_dim(m, row.len())?;
    }
    let scale = frobenius(mat).max(1.0);
    for i in 0..m {
        for j in 0..m {
            if !mat[i][j].is_finite() || (mat[i][j] - mat[j][i]).abs() > 1e-12 * scale {
                return Err(Error::Config("quadratic form must be finite and symmetric".into()));
            }
        }
    }
    // Cholesky of M + tau I succeeds for every tau > 0 iff M is PSD
    let tau = 1e-10 * scale;
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = mat[i][j] + if i == j { tau } else { 0.0 };
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Config("quadratic form is not positive semidefinite".into()));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(())
}

/// For every node a plane through it lying below the data elsewhere, found by a
/// linear program maximizing the plane's total height at the nodes.
fn supporting_planes(lo: &[f64], hi: &[f64], points: &[usize], values: &[f64], m: usize) -> Result<Vec<Plane>> {
    check_dim(m, lo.len())?;
    check_dim(m, hi.len())?;
    check_dim(m, points.len())?;
    let total: usize = points.iter().product();
    check_dim(total, values.len())?;
    if points.iter().any(|&p| p < 2) || lo.iter().zip(hi).any(|(l, h)| !(h > l)) {
        return Err(Error::Config("tabulated integrand needs at least two points per axis on a proper box".into()));
    }
    if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Config("tabulated values must be finite and nonnegative".into()));
    }
    let mut nodes = vec![0.0; total * m];
    for idx in 0..total {
        let mut rest = idx;
        for k in (0..m).rev() {
            let t = (rest % points[k]) as f64 / (points[k] - 1) as f64;
            nodes[idx * m + k] = lo[k] + t * (hi[k] - lo[k]);
            rest /= points[k];
        }
    }
    let slack = 1e-12 * values.iter().cloned().fold(1.0, f64::max);
    let mut planes = Vec::with_capacity(total);
    for i in 0..total {
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let a: Vec<_> = (0..m)
            .map(|k| {
                let weight: f64 = (0..total).map(|j| nodes[j * m + k]).sum();
                problem.add_var(weight, (f64::NEG_INFINITY, f64::INFINITY))
            })
            .collect();
        let b = problem.add_var(total as f64, (f64::NEG_INFINITY, f64::INFINITY));
        for j in 0..total {
            let mut terms: Vec<_> = (0..m).map(|k| (a[k], nodes[j * m + k])).collect();
            terms.push((b, 1.0));
            let (op, rhs) = if j == i { (ComparisonOp::Eq, values[j]) } else { (ComparisonOp::Le, values[j] + slack) };
            problem.add_constraint(terms.as_slice(), op, rhs);
        }
        let sol =
            problem.solve().map_err(|e| Error::Config(format!("tabulated data are not convex at node {i}: {e}")))?;
        planes.push(Plane { a: a.iter().map(|v| sol[*v]).collect(), b: sol[b] });
    }
    Ok(planes)
}
