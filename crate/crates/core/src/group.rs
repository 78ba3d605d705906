//! Carnot group arithmetic in exponential coordinates.
//!
//! A group is described by its layer dimensions and the structure constants
//! of its Lie algebra. The group law is the Baker-Campbell-Hausdorff series
//! truncated after the third-order brackets, which is exact for nilpotent
//! groups of step at most three.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Largest topological dimension supported by the stack-allocated kernels.
pub const MAX_DIM: usize = 32;

/// Largest supported nilpotency step.
pub const MAX_STEP: usize = 3;

const AXIOM_TOL: f64 = 1e-12;

/// A point of the group in exponential coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupPoint {
    coords: Vec<f64>,
}

impl GroupPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn origin(n: usize) -> Self {
        Self { coords: vec![0.0; n] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &GroupPoint) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for GroupPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self::new(coords)
    }
}

impl AsRef<[f64]> for GroupPoint {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// One bracket entry of a group configuration: `[e_i, e_j] = sum_l out[l] e_l`,
/// with 1-based indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub i: usize,
    pub j: usize,
    pub out: BTreeMap<String, f64>,
}

/// Declarative group description, as read from a JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<BracketSpec>,
}

/// Either a preset name (`euclidean:n`, `heisenberg:n`, `engel`) or an explicit spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRef {
    Preset(String),
    Spec(GroupSpec),
}

impl GroupRef {
    pub fn resolve(&self) -> Result<StratifiedGroup> {
        match self {
            GroupRef::Preset(name) => StratifiedGroup::preset(name),
            GroupRef::Spec(spec) => spec.build(),
        }
    }
}

/// Outcome of one structural check on a group description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
    pub witness: Option<String>,
}

impl GroupSpec {
    fn entries(&self) -> Result<Vec<(usize, usize, usize, f64)>> {
        let n: usize = self.layer_dims.iter().sum();
        let mut entries = Vec::new();
        for b in &self.brackets {
            if b.i == 0 || b.j == 0 || b.i > n || b.j > n {
                return Err(Error::Config(format!("bracket indices ({}, {}) out of range 1..={n}", b.i, b.j)));
            }
            for (key, &c) in &b.out {
                let l: usize = key
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bracket output index {key:?} is not an integer")))?;
                if l == 0 || l > n {
                    return Err(Error::Config(format!("bracket output index {l} out of range 1..={n}")));
                }
                entries.push((b.i - 1, b.j - 1, l - 1, c));
            }
        }
        Ok(entries)
    }

    /// Run every structural check without failing early.
    pub fn axiom_report(&self) -> Result<Vec<AxiomCheck>> {
        let entries = self.entries()?;
        let table = StructureTable::assemble(&self.layer_dims, &entries)?;
        Ok(table.checks(&self.layer_dims))
    }

    pub fn build(&self) -> Result<StratifiedGroup> {
        StratifiedGroup::from_entries(self.layer_dims.clone(), &self.entries()?, "custom".into())
    }
}

/// Dense structure constants `c[i][j][l]`.
#[derive(Clone, Debug)]
struct StructureTable {
    n: usize,
    dense: Vec<f64>,
}

impl StructureTable {
    fn at(&self, i: usize, j: usize, l: usize) -> f64 {
        self.dense[(i * self.n + j) * self.n + l]
    }

    fn assemble(layer_dims: &[usize], entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        if layer_dims.is_empty() || layer_dims.contains(&0) {
            return Err(Error::InvalidGroup(format!("layer dimensions must be positive, got {layer_dims:?}")));
        }
        let n: usize = layer_dims.iter().sum();
        if n > MAX_DIM {
            return Err(Error::InvalidGroup(format!("dimension {n} exceeds the supported maximum {MAX_DIM}")));
        }
        let mut dense = vec![0.0; n * n * n];
        let mut given = vec![false; n * n * n];
        for &(i, j, l, c) in entries {
            let k = (i * n + j) * n + l;
            dense[k] += c;
            given[k] = true;
        }
        // Complete the table by antisymmetry where only one ordering was supplied.
        for &(i, j, l, _) in entries {
            let k = (i * n + j) * n + l;
            let kt = (j * n + i) * n + l;
            if i != j && !given[kt] {
                dense[kt] = -dense[k];
            }
        }
        Ok(Self { n, dense })
    }

    fn bracket_basis(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.n).map(|l| self.at(i, j, l)).collect()
    }

    fn bracket_vec(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0.0 {
                    continue;
                }
                for (l, o) in out.iter_mut().enumerate() {
                    *o += self.at(i, j, l) * x[i] * y[j];
                }
            }
        }
        out
    }

    fn checks(&self, layer_dims: &[usize]) -> Vec<AxiomCheck> {
        let n = self.n;
        let weights = weights_of(layer_dims);
        let mut out = Vec::new();

        out.push(AxiomCheck {
            name: "step",
            passed: layer_dims.len() <= MAX_STEP,
            residual: layer_dims.len() as f64,
            witness: (layer_dims.len() > MAX_STEP)
                .then(|| format!("step {} exceeds the supported maximum {MAX_STEP}", layer_dims.len())),
        });

        let mut worst = (0.0, None);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let r = (self.at(i, j, l) + self.at(j, i, l)).abs();
                    if r > worst.0 {
                        worst = (
                            r,
                            Some(format!(
                                "c[{}][{}][{}] + c[{}][{}][{}] = {r:e}",
                                i + 1,
                                j + 1,
                                l + 1,
                                j + 1,
                                i + 1,
                                l + 1
                            )),
                        );
                    }
                }
            }
        }
        out.push(AxiomCheck {
            name: "antisymmetry",
            passed: worst.0 <= AXIOM_TOL,
            residual: worst.0,
            witness: worst.1,
        });

        let mut worst = (0.0, None);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let c = self.at(i, j, l).abs();
                    if c > 0.0 && weights[l] != weights[i] + weights[j] && c > worst.0 {
                        worst = (
                            c,
                            Some(format!(
                                "[e{}, e{}] has component {c:e} on e{} (weights {} + {} != {})",
                                i + 1,
                                j + 1,
                                l + 1,
                                weights[i],
                                weights[j],
                                weights[l]
                            )),
                        );
                    }
                }
            }
        }
        out.push(AxiomCheck { name: "grading", passed: worst.0 <= AXIOM_TOL, residual: worst.0, witness: worst.1 });

        let mut worst = (0.0, None);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let ei = basis(n, i);
                    let ej = basis(n, j);
                    let ek = basis(n, k);
                    let a = self.bracket_vec(&ei, &self.bracket_vec(&ej, &ek));
                    let b = self.bracket_vec(&ej, &self.bracket_vec(&ek, &ei));
                    let c = self.bracket_vec(&ek, &self.bracket_vec(&ei, &ej));
                    let r = (0..n).map(|l| (a[l] + b[l] + c[l]).abs()).fold(0.0, f64::max);
                    if r > worst.0 {
                        worst = (r, Some(format!("Jacobi sum on (e{}, e{}, e{}) = {r:e}", i + 1, j + 1, k + 1)));
                    }
                }
            }
        }
        out.push(AxiomCheck { name: "jacobi", passed: worst.0 <= AXIOM_TOL, residual: worst.0, witness: worst.1 });

        // [V_1, V_i] must span V_{i+1}.
        let m = layer_dims[0];
        let mut offset = 0;
        let mut gen = (true, 0.0, None);
        for (layer, &dim) in layer_dims.iter().enumerate().skip(1) {
            let prev_start = offset;
            let prev_dim = layer_dims[layer - 1];
            offset += prev_dim;
            let mut vectors = Vec::new();
            for a in 0..m {
                for b in prev_start..prev_start + prev_dim {
                    let v = self.bracket_basis(a, b);
                    vectors.push(v[offset..offset + dim].to_vec());
                }
            }
            let rank = numeric_rank(vectors, dim);
            if rank < dim {
                gen = (
                    false,
                    (dim - rank) as f64,
                    Some(format!("[V1, V{}] spans a subspace of dimension {rank} < dim V{} = {dim}", layer, layer + 1)),
                );
                break;
            }
        }
        out.push(AxiomCheck { name: "generation", passed: gen.0, residual: gen.1, witness: gen.2 });
        out
    }
}

fn basis(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn weights_of(layer_dims: &[usize]) -> Vec<u32> {
    layer_dims.iter().enumerate().flat_map(|(layer, &dim)| std::iter::repeat_n(layer as u32 + 1, dim)).collect()
}

/// Rank by Gaussian elimination with partial pivoting.
fn numeric_rank(mut rows: Vec<Vec<f64>>, cols: usize) -> usize {
    let mut rank = 0;
    for col in 0..cols {
        let pivot = (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() <= 1e-10 {
            continue;
        }
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            let factor = row[col] / pivot_row[col];
            for (r, pv) in row.iter_mut().zip(&pivot_row) {
                *r -= factor * pv;
            }
        }
        rank += 1;
    }
    rank
}

/// A stratified nilpotent Lie group of step at most three, in exponential coordinates.
#[derive(Clone, Debug)]
pub struct StratifiedGroup {
    name: String,
    layer_dims: Vec<usize>,
    weights: Vec<u32>,
    table: StructureTable,
    /// Nonzero structure constants `(i, j, l, c)`.
    nonzero: Vec<(usize, usize, usize, f64)>,
}

impl fmt::Display for StratifiedGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (layers {:?})", self.name, self.layer_dims)
    }
}

impl StratifiedGroup {
    /// Build a group from 0-based structure-constant entries `(i, j, l, c)`.
    /// Entries whose transposed counterpart is missing are completed by antisymmetry.
    pub fn from_entries(layer_dims: Vec<usize>, entries: &[(usize, usize, usize, f64)], name: String) -> Result<Self> {
        let n: usize = layer_dims.iter().sum();
        if let Some(&(i, j, l, _)) = entries.iter().find(|&&(i, j, l, _)| i >= n || j >= n || l >= n) {
            return Err(Error::InvalidGroup(format!(
                "structure constant index ({i}, {j}, {l}) out of range for n = {n}"
            )));
        }
        let table = StructureTable::assemble(&layer_dims, entries)?;
        if let Some(bad) = table.checks(&layer_dims).into_iter().find(|c| !c.passed) {
            return Err(Error::InvalidGroup(format!("{} check failed: {}", bad.name, bad.witness.unwrap_or_default())));
        }
        let mut nonzero = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let c = table.at(i, j, l);
                    if c != 0.0 {
                        nonzero.push((i, j, l, c));
                    }
                }
            }
        }
        Ok(Self { name, weights: weights_of(&layer_dims), layer_dims, table, nonzero })
    }

    /// The Abelian group `(R^n, +)`.
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::from_entries(vec![n], &[], format!("euclidean:{n}"))
    }

    /// The Heisenberg group `H^k` with `[e_i, e_{k+i}] = e_{2k+1}`.
    pub fn heisenberg(k: usize) -> Result<Self> {
        let entries: Vec<_> = (0..k).map(|i| (i, k + i, 2 * k, 1.0)).collect();
        Self::from_entries(vec![2 * k, 1], &entries, format!("heisenberg:{k}"))
    }

    /// The Engel group: `[e1, e2] = e3`, `[e1, e3] = e4`.
    pub fn engel() -> Result<Self> {
        Self::from_entries(vec![2, 1, 1], &[(0, 1, 2, 1.0), (0, 2, 3, 1.0)], "engel".into())
    }

    /// Resolve a preset name such as `heisenberg:1`.
    pub fn preset(name: &str) -> Result<Self> {
        let (kind, arg) = match name.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (name.trim(), None),
        };
        let size = |default: Option<usize>| -> Result<usize> {
            match arg {
                Some(a) => a
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k > 0)
                    .ok_or_else(|| Error::Config(format!("invalid size in preset {name:?}"))),
                None => default.ok_or_else(|| Error::Config(format!("preset {name:?} needs a size"))),
            }
        };
        match kind {
            "euclidean" => Self::euclidean(size(None)?),
            "heisenberg" => Self::heisenberg(size(Some(1))?),
            "engel" if arg.is_none() => Self::engel(),
            _ => Err(Error::Config(format!("unknown group preset {name:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Topological dimension `n`.
    pub fn dim(&self) -> usize {
        self.table.n
    }

    /// Dimension of the horizontal layer.
    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Dilation weight of every coordinate.
    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn is_abelian(&self) -> bool {
        self.nonzero.is_empty()
    }

    pub fn structure_constant(&self, i: usize, j: usize, l: usize) -> f64 {
        self.table.at(i, j, l)
    }

    /// Nonzero structure constants `(i, j, l, c)`, 0-based.
    pub fn structure_constants(&self) -> &[(usize, usize, usize, f64)] {
        &self.nonzero
    }

    /// `Q = sum_i i * dim V_i`.
    pub fn homogeneous_dimension(&self) -> u32 {
        self.weights.iter().sum()
    }

    pub fn axiom_report(&self) -> Vec<AxiomCheck> {
        self.table.checks(&self.layer_dims)
    }

    /// Lie bracket, accumulated into `out` (which is overwritten).
    pub fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, l, c) in &self.nonzero {
            out[l] += c * x[i] * y[j];
        }
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.bracket_into(x, y, &mut out);
        out
    }

    /// Group law on raw coordinate slices.
    pub fn mul_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert!(x.len() == n && y.len() == n && out.len() == n);
        for k in 0..n {
            out[k] = x[k] + y[k];
        }
        if self.nonzero.is_empty() {
            return;
        }
        let mut xy = [0.0; MAX_DIM];
        self.bracket_into(x, y, &mut xy[..n]);
        for k in 0..n {
            out[k] += 0.5 * xy[k];
        }
        if self.step() >= 3 {
            // (1/12)([x,[x,y]] + [y,[y,x]]) = (1/12)[x - y, [x,y]]
            let mut diff = [0.0; MAX_DIM];
            for k in 0..n {
                diff[k] = x[k] - y[k];
            }
            let mut third = [0.0; MAX_DIM];
            self.bracket_into(&diff[..n], &xy[..n], &mut third[..n]);
            for k in 0..n {
                out[k] += third[k] / 12.0;
            }
        }
    }

    fn check_point(&self, x: &GroupPoint) -> Result<()> {
        check_dim(self.dim(), x.dim())
    }

    pub fn multiply(&self, x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(x)?;
        self.check_point(y)?;
        let mut out = vec![0.0; self.dim()];
        self.mul_into(x.coords(), y.coords(), &mut out);
        Ok(GroupPoint::new(out))
    }

    /// Inverse: coordinate negation in exponential coordinates.
    pub fn inverse(&self, x: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(x)?;
        Ok(GroupPoint::new(x.coords().iter().map(|c| -c).collect()))
    }

    pub fn dilate_into(&self, lambda: f64, x: &[f64], out: &mut [f64]) {
        for ((o, &xi), &d) in out.iter_mut().zip(x).zip(&self.weights) {
            *o = lambda.powi(d as i32) * xi;
        }
    }

    pub fn dilate(&self, lambda: f64, x: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(x)?;
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveScale(lambda));
        }
        let mut out = vec![0.0; self.dim()];
        self.dilate_into(lambda, x.coords(), &mut out);
        Ok(GroupPoint::new(out))
    }

    /// Left translation `gamma_y(x) = y . x`.
    pub fn translate_point(&self, y: &GroupPoint, x: &GroupPoint) -> Result<GroupPoint> {
        self.multiply(y, x)
    }

    pub fn norm(&self, norm: HomogeneousNorm, x: &GroupPoint) -> Result<f64> {
        self.check_point(x)?;
        Ok(norm.eval(self, x.coords()))
    }

    /// Left-invariant distance `d(x, y) = |y^{-1} . x|`.
    pub fn dist_left(&self, norm: HomogeneousNorm, x: &GroupPoint, y: &GroupPoint) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.dist_left_raw(norm, x.coords(), y.coords()))
    }

    /// Right-invariant distance `d^R(x, y) = |x . y^{-1}|`.
    pub fn dist_right(&self, norm: HomogeneousNorm, x: &GroupPoint, y: &GroupPoint) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.dist_right_raw(norm, x.coords(), y.coords()))
    }

    pub(crate) fn dist_left_raw(&self, norm: HomogeneousNorm, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut yinv = [0.0; MAX_DIM];
        let mut z = [0.0; MAX_DIM];
        for k in 0..n {
            yinv[k] = -y[k];
        }
        self.mul_into(&yinv[..n], x, &mut z[..n]);
        norm.eval(self, &z[..n])
    }

    pub(crate) fn dist_right_raw(&self, norm: HomogeneousNorm, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut yinv = [0.0; MAX_DIM];
        let mut z = [0.0; MAX_DIM];
        for k in 0..n {
            yinv[k] = -y[k];
        }
        self.mul_into(x, &yinv[..n], &mut z[..n]);
        norm.eval(self, &z[..n])
    }

    /// Differential of the left translation `x -> a . x`, evaluated at `x` and applied to `v`.
    pub fn left_translation_differential(&self, a: &[f64], x: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        out[..n].copy_from_slice(&v[..n]);
        if self.nonzero.is_empty() {
            return;
        }
        let mut av = [0.0; MAX_DIM];
        self.bracket_into(a, v, &mut av[..n]);
        for k in 0..n {
            out[k] += 0.5 * av[k];
        }
        if self.step() >= 3 {
            // d/dx of (1/12)([a,[a,x]] + [x,[x,a]]) in direction v
            let mut t1 = [0.0; MAX_DIM];
            self.bracket_into(a, &av[..n], &mut t1[..n]);
            let mut xa = [0.0; MAX_DIM];
            self.bracket_into(x, a, &mut xa[..n]);
            let mut t2 = [0.0; MAX_DIM];
            self.bracket_into(v, &xa[..n], &mut t2[..n]);
            let mut va = [0.0; MAX_DIM];
            self.bracket_into(v, a, &mut va[..n]);
            let mut t3 = [0.0; MAX_DIM];
            self.bracket_into(x, &va[..n], &mut t3[..n]);
            for k in 0..n {
                out[k] += (t1[k] + t2[k] + t3[k]) / 12.0;
            }
        }
    }

    /// Componentwise bound `|[a, b]|_l <= sum |c_ij^l| a_i b_j` for nonnegative `a`, `b`.
    fn abs_bracket(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, l, c) in &self.nonzero {
            out[l] += c.abs() * a[i] * b[j];
        }
    }

    /// A coordinate box containing `y . box` (left) or `box . y` (right).
    pub fn translated_box(&self, y: &[f64], lo: &[f64], hi: &[f64], side: Side) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut new_lo: Vec<f64> = (0..n).map(|k| y[k] + lo[k]).collect();
        let mut new_hi: Vec<f64> = (0..n).map(|k| y[k] + hi[k]).collect();
        if self.nonzero.is_empty() {
            return (new_lo, new_hi);
        }
        let ya: Vec<f64> = y.iter().map(|c| c.abs()).collect();
        let xa: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| l.abs().max(h.abs())).collect();
        let mut b1 = vec![0.0; n];
        match side {
            Side::Left => self.abs_bracket(&ya, &xa, &mut b1),
            Side::Right => self.abs_bracket(&xa, &ya, &mut b1),
        }
        let mut slack: Vec<f64> = b1.iter().map(|b| 0.5 * b).collect();
        if self.step() >= 3 {
            let mut t = vec![0.0; n];
            let mut s = vec![0.0; n];
            self.abs_bracket(&ya, &b1, &mut t);
            self.abs_bracket(&xa, &b1, &mut s);
            for k in 0..n {
                slack[k] += (t[k] + s[k]) / 12.0;
            }
        }
        for k in 0..n {
            new_lo[k] -= slack[k];
            new_hi[k] += slack[k];
        }
        (new_lo, new_hi)
    }

    /// Coordinate box containing the ball `B(0, r)` of any supported homogeneous norm.
    pub fn ball_box(&self, r: f64) -> (Vec<f64>, Vec<f64>) {
        let hi: Vec<f64> = self.weights.iter().map(|&d| r.powi(d as i32)).collect();
        (hi.iter().map(|h| -h).collect(), hi)
    }
}

/// Which side a translation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Homogeneous norms available on every registered group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomogeneousNorm {
    /// `max_i |x_i|^{1/d_i}`.
    #[default]
    WeightedMax,
    /// `(sum_i |x_{V_i}|^{L/i})^{1/L}` with `L = 2 lcm(1..k)`; the Koranyi gauge on step-2 groups.
    Koranyi,
}

impl HomogeneousNorm {
    pub fn eval(&self, g: &StratifiedGroup, x: &[f64]) -> f64 {
        match self {
            HomogeneousNorm::WeightedMax => x
                .iter()
                .zip(g.weights())
                .map(|(&xi, &d)| match d {
                    1 => xi.abs(),
                    2 => xi.abs().sqrt(),
                    3 => xi.abs().cbrt(),
                    _ => xi.abs().powf(1.0 / d as f64),
                })
                .fold(0.0, f64::max),
            HomogeneousNorm::Koranyi => {
                let big_l = match g.step() {
                    1 => 2,
                    2 => 4,
                    _ => 12,
                };
                let mut offset = 0;
                let mut total = 0.0;
                for (layer, &dim) in g.layer_dims().iter().enumerate() {
                    let sq: f64 = x[offset..offset + dim].iter().map(|c| c * c).sum();
                    // |x_V|^{L/i} = (|x_V|^2)^{L/(2i)}
                    total += sq.powf(big_l as f64 / (2.0 * (layer + 1) as f64));
                    offset += dim;
                }
                total.powf(1.0 / big_l as f64)
            }
        }
    }
}
