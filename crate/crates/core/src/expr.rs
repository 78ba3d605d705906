//! Closed-form scalar expressions with exact first derivatives.
//!
//! Expressions are the serialized field menu: probes, polynomials, elementary
//! functions, sums, products and piecewise definitions. Coordinates are
//! 1-based in the serialized form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    Const {
        value: f64,
    },
    /// The coordinate `x_index`, 1-based.
    Coord {
        index: usize,
    },
    /// `<xi, Pi(x)>` where `Pi` keeps the first `xi.len()` coordinates.
    Probe {
        xi: Vec<f64>,
    },
    Add {
        args: Vec<Expr>,
    },
    Mul {
        args: Vec<Expr>,
    },
    Neg {
        arg: Box<Expr>,
    },
    Pow {
        arg: Box<Expr>,
        exp: i32,
    },
    Sin {
        arg: Box<Expr>,
    },
    Cos {
        arg: Box<Expr>,
    },
    Exp {
        arg: Box<Expr>,
    },
    Abs {
        arg: Box<Expr>,
    },
    /// Triangle wave: distance from `arg` to the nearest integer (slope +-1).
    Tri {
        arg: Box<Expr>,
    },
    /// `below` where `test < 0`, `above` elsewhere.
    Piecewise {
        test: Box<Expr>,
        below: Box<Expr>,
        above: Box<Expr>,
    },
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    /// Coordinate `x_index` with a 1-based index.
    pub fn coord(index: usize) -> Self {
        Expr::Coord { index }
    }

    pub fn probe(xi: &[f64]) -> Self {
        Expr::Probe { xi: xi.to_vec() }
    }

    pub fn add(args: Vec<Expr>) -> Self {
        Expr::Add { args }
    }

    pub fn mul(args: Vec<Expr>) -> Self {
        Expr::Mul { args }
    }

    pub fn pow(self, exp: i32) -> Self {
        Expr::Pow { arg: Box::new(self), exp }
    }

    pub fn scale(self, c: f64) -> Self {
        Expr::mul(vec![Expr::constant(c), self])
    }

    pub fn sin(self) -> Self {
        Expr::Sin { arg: Box::new(self) }
    }

    pub fn cos(self) -> Self {
        Expr::Cos { arg: Box::new(self) }
    }

    pub fn exp(self) -> Self {
        Expr::Exp { arg: Box::new(self) }
    }

    pub fn abs(self) -> Self {
        Expr::Abs { arg: Box::new(self) }
    }

    pub fn tri(self) -> Self {
        Expr::Tri { arg: Box::new(self) }
    }

    pub fn piecewise(test: Expr, below: Expr, above: Expr) -> Self {
        Expr::Piecewise { test: Box::new(test), below: Box::new(below), above: Box::new(above) }
    }

    /// `coeff * prod_k x_k^{powers[k]}`.
    pub fn monomial(coeff: f64, powers: &[u32]) -> Self {
        let mut factors = vec![Expr::constant(coeff)];
        for (k, &p) in powers.iter().enumerate() {
            match p {
                0 => {}
                1 => factors.push(Expr::coord(k + 1)),
                _ => factors.push(Expr::coord(k + 1).pow(p as i32)),
            }
        }
        Expr::mul(factors)
    }

    /// Check coordinate indices against the dimension `n` and probe lengths against `m`.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        match self {
            Expr::Const { value } if !value.is_finite() => Err(Error::Config(format!("non-finite constant {value}"))),
            Expr::Const { .. } => Ok(()),
            Expr::Coord { index } if *index == 0 || *index > n => {
                Err(Error::Config(format!("coordinate index {index} out of range 1..={n}")))
            }
            Expr::Coord { .. } => Ok(()),
            Expr::Probe { xi } if xi.len() != m => Err(Error::DimensionMismatch { expected: m, got: xi.len() }),
            Expr::Probe { .. } => Ok(()),
            Expr::Add { args } | Expr::Mul { args } => args.iter().try_for_each(|a| a.validate(n, m)),
            Expr::Neg { arg }
            | Expr::Pow { arg, .. }
            | Expr::Sin { arg }
            | Expr::Cos { arg }
            | Expr::Exp { arg }
            | Expr::Abs { arg }
            | Expr::Tri { arg } => arg.validate(n, m),
            Expr::Piecewise { test, below, above } => {
                test.validate(n, m)?;
                below.validate(n, m)?;
                above.validate(n, m)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const { value } => *value,
            Expr::Coord { index } => x[index - 1],
            Expr::Probe { xi } => xi.iter().zip(x).map(|(a, b)| a * b).sum(),
            Expr::Add { args } => args.iter().map(|a| a.eval(x)).sum(),
            Expr::Mul { args } => args.iter().map(|a| a.eval(x)).product(),
            Expr::Neg { arg } => -arg.eval(x),
            Expr::Pow { arg, exp } => arg.eval(x).powi(*exp),
            Expr::Sin { arg } => arg.eval(x).sin(),
            Expr::Cos { arg } => arg.eval(x).cos(),
            Expr::Exp { arg } => arg.eval(x).exp(),
            Expr::Abs { arg } => arg.eval(x).abs(),
            Expr::Tri { arg } => {
                let s = arg.eval(x);
                (s - s.round()).abs()
            }
            Expr::Piecewise { test, below, above } => {
                if test.eval(x) < 0.0 {
                    below.eval(x)
                } else {
                    above.eval(x)
                }
            }
        }
    }

    /// Value and Euclidean gradient (written to `grad`, which is overwritten).
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Expr::Const { value } => {
                grad.fill(0.0);
                *value
            }
            Expr::Coord { index } => {
                grad.fill(0.0);
                grad[index - 1] = 1.0;
                x[index - 1]
            }
            Expr::Probe { xi } => {
                grad.fill(0.0);
                grad[..xi.len()].copy_from_slice(xi);
                xi.iter().zip(x).map(|(a, b)| a * b).sum()
            }
            Expr::Add { args } => {
                grad.fill(0.0);
                let mut tmp = vec![0.0; grad.len()];
                let mut v = 0.0;
                for a in args {
                    v += a.eval_grad(x, &mut tmp);
                    grad.iter_mut().zip(&tmp).for_each(|(g, t)| *g += t);
                }
                v
            }
            Expr::Mul { args } => {
                let n = grad.len();
                let mut vals = Vec::with_capacity(args.len());
                let mut grads = vec![0.0; n * args.len()];
                for (k, a) in args.iter().enumerate() {
                    vals.push(a.eval_grad(x, &mut grads[k * n..(k + 1) * n]));
                }
                grad.fill(0.0);
                for k in 0..args.len() {
                    let others: f64 = vals.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, v)| v).product();
                    if others != 0.0 {
                        for (g, d) in grad.iter_mut().zip(&grads[k * n..(k + 1) * n]) {
                            *g += others * d;
                        }
                    }
                }
                vals.iter().product()
            }
            Expr::Neg { arg } => {
                let v = arg.eval_grad(x, grad);
                grad.iter_mut().for_each(|g| *g = -*g);
                -v
            }
            Expr::Pow { arg, exp } => {
                let v = arg.eval_grad(x, grad);
                let d = if *exp == 0 { 0.0 } else { *exp as f64 * v.powi(exp - 1) };
                grad.iter_mut().for_each(|g| *g *= d);
                v.powi(*exp)
            }
            Expr::Sin { arg } => chain(arg, x, grad, |v| (v.sin(), v.cos())),
            Expr::Cos { arg } => chain(arg, x, grad, |v| (v.cos(), -v.sin())),
            Expr::Exp { arg } => chain(arg, x, grad, |v| (v.exp(), v.exp())),
            Expr::Abs { arg } => chain(arg, x, grad, |v| (v.abs(), v.signum())),
            Expr::Tri { arg } => chain(arg, x, grad, |v| {
                let t = v - v.round();
                (t.abs(), t.signum())
            }),
            Expr::Piecewise { test, below, above } => {
                if test.eval(x) < 0.0 {
                    below.eval_grad(x, grad)
                } else {
                    above.eval_grad(x, grad)
                }
            }
        }
    }
}

fn chain(arg: &Expr, x: &[f64], grad: &mut [f64], f: impl Fn(f64) -> (f64, f64)) -> f64 {
    let v = arg.eval_grad(x, grad);
    let (value, slope) = f(v);
    grad.iter_mut().for_each(|g| *g *= slope);
    value
}
