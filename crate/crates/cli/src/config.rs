use std::path::{Path, PathBuf};

use carnot_core::gamma::{MinimizerSettings, SequenceFamily};
use carnot_core::integrand::IntegrandSpec;
use carnot_core::mollify::DEFAULT_RESOLUTION;
use carnot_core::recovery::XiGrid;
use carnot_core::{Error, Expr, GridDomain, GroupRef, HomogeneousNorm, Result, StratifiedGroup};
use serde::{Deserialize, Serialize};

/// A box lattice; bounds default to `[-1, 1]` on every axis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    /// Cells per axis: one number for all axes or one per axis.
    pub cells: Option<Cells>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cells {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl GridSpec {
    pub fn build(&self, n: usize, default_cells: usize) -> Result<GridDomain> {
        let lo = self.lo.clone().unwrap_or_else(|| vec![-1.0; n]);
        let hi = self.hi.clone().unwrap_or_else(|| vec![1.0; n]);
        let cells = match &self.cells {
            None => vec![default_cells; n],
            Some(Cells::Uniform(k)) => vec![*k; n],
            Some(Cells::PerAxis(v)) => v.clone(),
        };
        if lo.len() != n || hi.len() != n || cells.len() != n {
            return Err(Error::Config(format!("grid needs {n} entries per bound and per cell count")));
        }
        GridDomain::new_box(&lo, &hi, &cells)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedules {
    pub epsilon: Vec<f64>,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub h: Vec<u32>,
}

impl Default for Schedules {
    fn default() -> Self {
        Self { epsilon: vec![0.4, 0.2, 0.1], rho: vec![0.5, 0.25], delta: vec![0.1], h: vec![1, 2, 4, 8, 16] }
    }
}

/// Tolerances; every entry is multiplied by `--tol-scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub group: f64,
    pub frame: f64,
    pub mass: f64,
    pub constant: f64,
    pub fixed_point: f64,
    pub commutation: f64,
    pub convexity: f64,
    pub jensen: f64,
    pub recovery: f64,
    pub constancy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            group: 1e-12,
            frame: 1e-10,
            mass: 1e-6,
            constant: 1e-10,
            fixed_point: 1e-6,
            commutation: 1e-4,
            convexity: 1e-10,
            jensen: 1e-10,
            recovery: 1e-10,
            constancy: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            group: self.group * k,
            frame: self.frame * k,
            mass: self.mass * k,
            constant: self.constant * k,
            fixed_point: self.fixed_point * k,
            commutation: self.commutation * k,
            convexity: self.convexity * k,
            jensen: self.jensen * k,
            recovery: self.recovery * k,
            constancy: self.constancy * k,
        }
    }
}

/// The recovery set `A_0`: a ball of the configured norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallSpec {
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub cells_per_axis: usize,
}

impl Default for BallSpec {
    fn default() -> Self {
        Self { center: None, radius: 1.0, cells_per_axis: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub group: GroupRef,
    pub norm: HomogeneousNorm,
    pub grid: GridSpec,
    /// Test fields; empty means one seeded random quadratic polynomial.
    pub fields: Vec<Expr>,
    /// Smooth field for the mollifier convergence table; defaults to
    /// `sin(2 x_1) cos(x_2) + sin(x_n)`.
    pub convergence_field: Option<Expr>,
    /// Right margin of the inner set of the sandwich; defaults to 1.25 times the largest epsilon.
    pub margin: Option<f64>,
    pub integrand: IntegrandSpec,
    /// Weight `w(x)` making the functional `int w(x) f(grad u)`, which is not left-invariant.
    pub weight: Option<Expr>,
    pub suite: Option<String>,
    pub schedules: Schedules,
    pub tolerances: Tolerances,
    pub samples: usize,
    pub xi: XiGrid,
    pub a0: BallSpec,
    /// Centers for the constancy probe; empty means a default unit-scale set.
    pub centers: Vec<Vec<f64>>,
    pub family: SequenceFamily,
    pub minimizer: MinimizerSettings,
    pub mollifier_resolution: usize,
    /// Exponent of the `L^p` norms.
    pub p: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            group: GroupRef::Preset("heisenberg:1".into()),
            norm: HomogeneousNorm::WeightedMax,
            grid: GridSpec::default(),
            fields: Vec::new(),
            convergence_field: None,
            margin: None,
            integrand: IntegrandSpec::power(2.0),
            weight: None,
            suite: None,
            schedules: Schedules::default(),
            tolerances: Tolerances::default(),
            samples: 200,
            xi: XiGrid::default(),
            a0: BallSpec::default(),
            centers: Vec::new(),
            family: SequenceFamily::PowerPlusInverseH { p: 2.0 },
            minimizer: MinimizerSettings::default(),
            mollifier_resolution: DEFAULT_RESOLUTION,
            p: 2.0,
            seed: 0,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn group(&self) -> Result<StratifiedGroup> {
        self.group.resolve()
    }

    pub fn centers(&self, n: usize) -> Vec<Vec<f64>> {
        if !self.centers.is_empty() {
            return self.centers.clone();
        }
        let mut out = vec![vec![0.0; n]];
        for k in 0..n.min(3) {
            let mut c = vec![0.0; n];
            c[k] = 1.0;
            out.push(c);
        }
        let mut c = vec![0.0; n];
        c[0] = -0.5;
        c[n - 1] = 0.75;
        out.push(c);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.group().unwrap().homogeneous_dimension(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"grpu": "engel"}"#).is_err());
    }

    #[test]
    fn grid_shapes() {
        let spec: GridSpec = serde_json::from_str(r#"{"cells": [2, 3, 4]}"#).unwrap();
        assert_eq!(spec.build(3, 8).unwrap().total_cells(), 24);
        assert!(spec.build(2, 8).is_err());
    }
}
