//! Bounded open sets discretized as cell masks over a Cartesian box.

use crate::error::{check_dim, Error, Result};
use crate::group::{HomogeneousNorm, Side, StratifiedGroup, MAX_DIM};

/// Snap tolerance, in units of the cell width, used when aligning lattices.
const ALIGN_EPS: f64 = 1e-9;

/// A set `A` realized as the union of the masked cells of a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    lo: Vec<f64>,
    spacing: Vec<f64>,
    cells: Vec<usize>,
    mask: Vec<bool>,
}

impl GridDomain {
    /// A full box `[lo, hi]` cut into `cells[k]` cells along axis `k`.
    pub fn new_box(lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Self> {
        Self::from_predicate(lo, hi, cells, |_| true)
    }

    /// Cells of the box whose center satisfies `keep`.
    pub fn from_predicate(lo: &[f64], hi: &[f64], cells: &[usize], keep: impl Fn(&[f64]) -> bool) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        check_dim(lo.len(), cells.len())?;
        if lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::Config(format!("grid dimension {} out of range", lo.len())));
        }
        if cells.contains(&0) {
            return Err(Error::Config("every axis needs at least one cell".into()));
        }
        if lo.iter().zip(hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Config(format!("degenerate box {lo:?}..{hi:?}")));
        }
        let spacing: Vec<f64> = (0..lo.len()).map(|k| (hi[k] - lo[k]) / cells[k] as f64).collect();
        let total: usize = cells.iter().product();
        let mut dom = Self { lo: lo.to_vec(), spacing, cells: cells.to_vec(), mask: vec![false; total] };
        let mut c = vec![0.0; lo.len()];
        for idx in 0..total {
            dom.center_into(idx, &mut c);
            dom.mask[idx] = keep(&c);
        }
        Ok(dom)
    }

    /// Same lattice as `self`, with an explicit mask.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        check_dim(self.mask.len(), mask.len())?;
        Ok(Self { mask, ..self.clone() })
    }

    /// Left ball `B(x, r) = {z : |x^{-1} z| < r}`, resolved with about
    /// `cells_per_axis` cells across the diameter of `B(0, r)` on every axis.
    pub fn ball(
        g: &StratifiedGroup,
        norm: HomogeneousNorm,
        center: &[f64],
        radius: f64,
        cells_per_axis: usize,
    ) -> Result<Self> {
        check_dim(g.dim(), center.len())?;
        if !(radius > 0.0) {
            return Err(Error::NonPositiveScale(radius));
        }
        let (blo, bhi) = g.ball_box(radius);
        let (lo, hi) = g.translated_box(center, &blo, &bhi, Side::Left);
        let cells: Vec<usize> = (0..g.dim())
            .map(|k| {
                let h = (bhi[k] - blo[k]) / cells_per_axis.max(1) as f64;
                ((hi[k] - lo[k]) / h).ceil().max(1.0) as usize
            })
            .collect();
        let hi: Vec<f64> =
            (0..g.dim()).map(|k| lo[k] + cells[k] as f64 * (bhi[k] - blo[k]) / cells_per_axis.max(1) as f64).collect();
        let dom = Self::from_predicate(&lo, &hi, &cells, |z| g.dist_left_raw(norm, z, center) < radius)?;
        if dom.is_empty() {
            return Err(Error::EmptyDomain(format!("ball of radius {radius} has no cell centers at this resolution")));
        }
        Ok(dom)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.lo[k] + self.cells[k] as f64 * self.spacing[k]).collect()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of lattice cells in the box, masked or not.
    pub fn total_cells(&self) -> usize {
        self.mask.len()
    }

    /// Number of masked cells.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lebesgue (= Haar) measure of the masked set.
    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.cell_volume()
    }

    pub fn is_masked(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    /// Indices of masked cells, in increasing order.
    pub fn masked_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for k in (0..self.dim()).rev() {
            out[k] = idx % self.cells[k];
            idx /= self.cells[k];
        }
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.cells).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    /// Flat index of a signed lattice index, or `None` outside the box.
    pub fn flat_index_signed(&self, multi: &[i64]) -> Option<usize> {
        let mut acc = 0usize;
        for (&i, &c) in multi.iter().zip(&self.cells) {
            if i < 0 || i as usize >= c {
                return None;
            }
            acc = acc * c + i as usize;
        }
        Some(acc)
    }

    pub fn center_into(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for k in (0..self.dim()).rev() {
            let i = rest % self.cells[k];
            rest /= self.cells[k];
            out[k] = self.lo[k] + (i as f64 + 0.5) * self.spacing[k];
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.center_into(idx, &mut c);
        c
    }

    /// Center of a lattice cell that may lie outside the box.
    pub fn lattice_center(&self, multi: &[i64], out: &mut [f64]) {
        for k in 0..self.dim() {
            out[k] = self.lo[k] + (multi[k] as f64 + 0.5) * self.spacing[k];
        }
    }

    /// Cell of the box containing `x`, masked or not.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut acc = 0usize;
        for k in 0..self.dim() {
            let t = (x[k] - self.lo[k]) / self.spacing[k];
            if !(t >= 0.0) || t >= self.cells[k] as f64 {
                return None;
            }
            acc = acc * self.cells[k] + t.floor() as usize;
        }
        Some(acc)
    }

    /// Whether `x` lies in a masked cell.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.locate(x).is_some_and(|i| self.mask[i])
    }

    pub fn same_lattice(&self, other: &GridDomain) -> bool {
        self.lo == other.lo && self.spacing == other.spacing && self.cells == other.cells
    }

    fn combine(&self, other: &GridDomain, op: impl Fn(bool, bool) -> bool) -> Result<GridDomain> {
        if !self.same_lattice(other) {
            return Err(Error::Config("set operations need domains on the same lattice".into()));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| op(a, b)).collect();
        self.with_mask(mask)
    }

    pub fn union(&self, other: &GridDomain) -> Result<GridDomain> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &GridDomain) -> Result<GridDomain> {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &GridDomain) -> Result<GridDomain> {
        self.combine(other, |a, b| a && !b)
    }

    /// Mask inclusion on a shared lattice.
    pub fn is_subset_of(&self, other: &GridDomain) -> bool {
        self.same_lattice(other) && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    /// Split into the cells whose center coordinate on `axis` is below `at`, and the rest.
    pub fn split(&self, axis: usize, at: f64) -> (GridDomain, GridDomain) {
        let mut below = self.mask.clone();
        let mut above = self.mask.clone();
        let mut c = vec![0.0; self.dim()];
        for idx in 0..self.mask.len() {
            self.center_into(idx, &mut c);
            if c[axis] < at {
                above[idx] = false;
            } else {
                below[idx] = false;
            }
        }
        (Self { mask: below, ..self.clone() }, Self { mask: above, ..self.clone() })
    }

    /// Same set on a lattice refined by `factor` along every axis.
    pub fn refine(&self, factor: usize) -> GridDomain {
        let factor = factor.max(1);
        let cells: Vec<usize> = self.cells.iter().map(|c| c * factor).collect();
        let spacing: Vec<f64> = self.spacing.iter().map(|h| h / factor as f64).collect();
        let total: usize = cells.iter().product();
        let mut fine = GridDomain { lo: self.lo.clone(), spacing, cells, mask: vec![false; total] };
        let mut multi = vec![0usize; self.dim()];
        for idx in 0..total {
            fine.multi_index(idx, &mut multi);
            for m in multi.iter_mut() {
                *m /= factor;
            }
            fine.mask[idx] = self.mask[self.flat_index(&multi)];
        }
        fine
    }

    /// Masked cells having an unmasked (or out-of-box) neighbour in the full 3^n stencil.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let n = self.dim();
        let mut multi = vec![0usize; n];
        let mut nb = vec![0i64; n];
        let mut out = Vec::new();
        for idx in 0..self.mask.len() {
            if !self.mask[idx] {
                continue;
            }
            self.multi_index(idx, &mut multi);
            let mut touches = false;
            for code in 0..3usize.pow(n as u32) {
                let mut rest = code;
                for k in 0..n {
                    nb[k] = multi[k] as i64 + (rest % 3) as i64 - 1;
                    rest /= 3;
                }
                if !self.flat_index_signed(&nb).is_some_and(|j| self.mask[j]) {
                    touches = true;
                    break;
                }
            }
            if touches {
                out.push(idx);
            }
        }
        out
    }

    /// Remove `rings` layers of boundary cells.
    pub fn erode_rings(&self, rings: usize) -> GridDomain {
        let mut dom = self.clone();
        for _ in 0..rings {
            for idx in dom.boundary_cells() {
                dom.mask[idx] = false;
            }
        }
        dom
    }

    /// Number of masked cells of either domain whose center is not covered by the other.
    pub fn symmetric_difference_count(&self, other: &GridDomain) -> usize {
        let mut c = vec![0.0; self.dim()];
        let mut count = 0;
        for idx in self.masked_indices() {
            self.center_into(idx, &mut c);
            if !other.contains(&c) {
                count += 1;
            }
        }
        for idx in other.masked_indices() {
            other.center_into(idx, &mut c);
            if !self.contains(&c) {
                count += 1;
            }
        }
        count
    }

    /// Left translate `y . A`: a cell of the new lattice is masked iff
    /// `y^{-1} . (its center)` lies in `A`. The new lattice is aligned with this one.
    pub fn left_translate(&self, g: &StratifiedGroup, y: &[f64]) -> Result<GridDomain> {
        check_dim(g.dim(), y.len())?;
        check_dim(g.dim(), self.dim())?;
        let n = self.dim();
        let (blo, bhi) = g.translated_box(y, &self.lo, &self.hi(), Side::Left);
        let mut lo = vec![0.0; n];
        let mut cells = vec![0usize; n];
        for k in 0..n {
            let h = self.spacing[k];
            let shift = ((blo[k] - self.lo[k]) / h + ALIGN_EPS).floor();
            lo[k] = self.lo[k] + shift * h;
            cells[k] = ((bhi[k] - lo[k]) / h - ALIGN_EPS).ceil().max(1.0) as usize;
        }
        let total: usize = cells.iter().product();
        let mut out = GridDomain { lo, spacing: self.spacing.clone(), cells, mask: vec![false; total] };
        let yinv: Vec<f64> = y.iter().map(|c| -c).collect();
        let mut c = vec![0.0; n];
        let mut p = vec![0.0; n];
        for idx in 0..total {
            out.center_into(idx, &mut c);
            g.mul_into(&yinv, &c, &mut p);
            out.mask[idx] = self.contains(&p);
        }
        if out.is_empty() {
            return Err(Error::EmptyDomain("left translate has no masked cells".into()));
        }
        Ok(out)
    }

    /// Smallest right distance `|x . y^{-1}|` from `x` to a center `y` of the
    /// complement lattice (unmasked cells and the lattice continued outside the
    /// box). Only complement centers inside `B^R(x, cap)`'s enclosing box are
    /// inspected; `f64::INFINITY` means none was found there.
    pub fn right_distance_to_complement(&self, g: &StratifiedGroup, norm: HomogeneousNorm, x: &[f64], cap: f64) -> f64 {
        let n = self.dim();
        let (blo, bhi) = g.ball_box(cap);
        let (lo, hi) = g.translated_box(x, &blo, &bhi, Side::Right);
        let mut first = vec![0i64; n];
        let mut last = vec![0i64; n];
        for k in 0..n {
            first[k] = ((lo[k] - self.lo[k]) / self.spacing[k] - 0.5).floor() as i64;
            last[k] = ((hi[k] - self.lo[k]) / self.spacing[k] - 0.5).ceil() as i64;
        }
        let mut multi = first.clone();
        let mut y = vec![0.0; n];
        let mut best = f64::INFINITY;
        loop {
            let masked = self.flat_index_signed(&multi).is_some_and(|j| self.mask[j]);
            if !masked {
                self.lattice_center(&multi, &mut y);
                best = best.min(g.dist_right_raw(norm, x, &y));
            }
            // odometer over the index box
            let mut k = n;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                if multi[k] < last[k] {
                    multi[k] += 1;
                    break;
                }
                multi[k] = first[k];
            }
        }
    }

    /// `inf` over masked centers of `self` of the right distance to the
    /// complement of `outer`, capped at `cap`.
    pub fn right_margin_in(&self, outer: &GridDomain, g: &StratifiedGroup, norm: HomogeneousNorm, cap: f64) -> f64 {
        let mut c = vec![0.0; self.dim()];
        let mut margin = cap;
        for idx in self.masked_indices() {
            self.center_into(idx, &mut c);
            margin = margin.min(outer.right_distance_to_complement(g, norm, &c, cap));
        }
        margin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_volume_and_lookup() {
        let d = GridDomain::new_box(&[0.0, 0.0], &[1.0, 2.0], &[4, 8]).unwrap();
        assert_eq!(d.count(), 32);
        assert!((d.volume() - 2.0).abs() < 1e-15);
        assert_eq!(d.center(0), vec![0.125, 0.125]);
        assert_eq!(d.locate(&[0.9, 1.9]), Some(31));
        assert!(d.locate(&[1.0, 0.5]).is_none());
        assert!(!d.contains(&[-0.1, 0.5]));
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(GridDomain::new_box(&[0.0], &[0.0], &[3]).is_err());
        assert!(GridDomain::new_box(&[0.0], &[1.0], &[0]).is_err());
        assert!(GridDomain::new_box(&[0.0, 1.0], &[1.0], &[3]).is_err());
    }

    #[test]
    fn set_operations_on_shared_lattice() {
        let d = GridDomain::new_box(&[0.0, 0.0], &[1.0, 1.0], &[10, 10]).unwrap();
        let (a, b) = d.split(0, 0.5);
        assert_eq!(a.count() + b.count(), d.count());
        assert_eq!(a.intersection(&b).unwrap().count(), 0);
        assert_eq!(a.union(&b).unwrap(), d);
        assert!(a.is_subset_of(&d));
        assert_eq!(d.difference(&a).unwrap(), b);
        let other = GridDomain::new_box(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        assert!(d.union(&other).is_err());
    }

    #[test]
    fn refinement_keeps_volume() {
        let d = GridDomain::from_predicate(&[-1.0, -1.0], &[1.0, 1.0], &[8, 8], |c| c[0] * c[0] + c[1] * c[1] < 0.6)
            .unwrap();
        let f = d.refine(3);
        assert_eq!(f.count(), 9 * d.count());
        assert!((f.volume() - d.volume()).abs() < 1e-12);
    }

    #[test]
    fn ring_erosion_shrinks_box() {
        let d = GridDomain::new_box(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &[6, 6, 6]).unwrap();
        assert_eq!(d.boundary_cells().len(), 216 - 64);
        assert_eq!(d.erode_rings(1).count(), 64);
        assert_eq!(d.erode_rings(3).count(), 0);
    }

    #[test]
    fn abelian_translation_shifts_the_box() {
        let g = StratifiedGroup::euclidean(2).unwrap();
        let d = GridDomain::new_box(&[0.0, 0.0], &[1.0, 1.0], &[10, 10]).unwrap();
        let t = d.left_translate(&g, &[0.3, -0.2]).unwrap();
        assert_eq!(t.count(), d.count());
        let shifted = GridDomain::new_box(&[0.3, -0.2], &[1.3, 0.8], &[10, 10]).unwrap();
        assert_eq!(t.symmetric_difference_count(&shifted), 0);
        let back = t.left_translate(&g, &[-0.3, 0.2]).unwrap();
        assert_eq!(back.symmetric_difference_count(&d), 0);
        let same = d.left_translate(&g, &[0.0, 0.0]).unwrap();
        assert_eq!(same.symmetric_difference_count(&d), 0);
    }

    #[test]
    fn heisenberg_translation_preserves_volume() {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let d = GridDomain::new_box(&[-0.5; 3], &[0.5; 3], &[16, 16, 16]).unwrap();
        let y = [0.37, -0.61, 0.23];
        let t = d.left_translate(&g, &y).unwrap();
        assert!((t.volume() - d.volume()).abs() <= t.boundary_cells().len() as f64 * d.cell_volume());
        let back = t.left_translate(&g, &[-0.37, 0.61, -0.23]).unwrap();
        let diff = back.symmetric_difference_count(&d);
        assert!(diff <= d.boundary_cells().len() + back.boundary_cells().len(), "{diff}");
    }

    #[test]
    fn balls_and_right_distances() {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let b = GridDomain::ball(&g, HomogeneousNorm::WeightedMax, &[0.0; 3], 1.0, 10).unwrap();
        // the weighted-max unit ball is the cube [-1,1]^3
        assert_eq!(b.count(), 1000);
        let shifted = GridDomain::ball(&g, HomogeneousNorm::WeightedMax, &[2.0, -1.0, 0.5], 0.5, 8).unwrap();
        assert!(shifted.contains(&[2.0, -1.0, 0.5]));

        let e = StratifiedGroup::euclidean(1).unwrap();
        let seg = GridDomain::new_box(&[0.0], &[1.0], &[10]).unwrap();
        let d = seg.right_distance_to_complement(&e, HomogeneousNorm::WeightedMax, &[0.25], 1.0);
        assert!((d - 0.3).abs() < 1e-12);
        assert_eq!(seg.right_distance_to_complement(&e, HomogeneousNorm::WeightedMax, &[0.55], 0.1), f64::INFINITY);
    }
}
