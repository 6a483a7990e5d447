//! Regular grids in one or two dimensions, boolean node masks and nodal
//! grid functions.
//!
//! Nodes are ordered row-major (`x` fastest). Every node carries the same
//! quadrature weight `h^dim`; there is no trapezoid correction at the
//! boundary.

use serde::Serialize;

use crate::error::{config, domain, Error, Result};

/// Relative slack used in all geometric comparisons, in units of `h`.
const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    origin: [f64; 2],
    spacing: f64,
    shape: [usize; 2],
}

impl Grid {
    /// Builds the node lattice `origin + i*h` covering every extent.
    ///
    /// Each extent must be at least `2h` long; the last node reproduces the
    /// upper end of the extent within `h/2`.
    pub fn new(dim: usize, extents: &[(f64, f64)], h: f64) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return config(format!("dim must be 1 or 2, got {dim}"));
        }
        if extents.len() != dim {
            return config(format!("expected {dim} extents, got {}", extents.len()));
        }
        if !(h.is_finite() && h > 0.0) {
            return config(format!("spacing must be positive and finite, got {h}"));
        }
        let mut origin = [0.0; 2];
        let mut shape = [1usize; 2];
        for (axis, &(a, b)) in extents.iter().enumerate() {
            if !(a.is_finite() && b.is_finite()) || b - a < 2.0 * h * (1.0 - GEOM_EPS) {
                return config(format!(
                    "extent [{a}, {b}] on axis {axis} is shorter than two grid steps (h = {h})"
                ));
            }
            let steps = ((b - a) / h).round() as usize;
            origin[axis] = a;
            shape[axis] = steps + 1;
        }
        Ok(Grid {
            dim,
            origin,
            spacing: h,
            shape,
        })
    }

    /// Grid with `shape` nodes per axis starting at `origin`.
    pub fn from_shape(dim: usize, origin: [f64; 2], h: f64, shape: [usize; 2]) -> Result<Grid> {
        let extents: Vec<(f64, f64)> = (0..dim.min(2))
            .map(|k| (origin[k], origin[k] + shape[k].saturating_sub(1) as f64 * h))
            .collect();
        let grid = Grid::new(dim, &extents, h)?;
        if grid.shape[..dim] != shape[..dim] {
            return config(format!(
                "shape {:?} cannot be reproduced with spacing {h}",
                &shape[..dim]
            ));
        }
        Ok(grid)
    }

    pub fn line(a: f64, b: f64, h: f64) -> Result<Grid> {
        Grid::new(1, &[(a, b)], h)
    }

    pub fn rect(x: (f64, f64), y: (f64, f64), h: f64) -> Result<Grid> {
        Grid::new(2, &[x, y], h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Nodes per axis; the second entry is 1 for one-dimensional grids.
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn nx(&self) -> usize {
        self.shape[0]
    }

    pub fn ny(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of a single node, `h^dim`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Discrete measure of the whole grid.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_measure()
    }

    /// Per-axis `(first, last)` node coordinates.
    pub fn extents(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|k| {
                let a = self.origin[k];
                (a, a + (self.shape[k] - 1) as f64 * self.spacing)
            })
            .collect()
    }

    /// Shortest side length of the grid box.
    pub fn min_extent_length(&self) -> f64 {
        (0..self.dim)
            .map(|k| (self.shape[k] - 1) as f64 * self.spacing)
            .fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.shape[0] + ix
    }

    #[inline]
    pub fn unindex(&self, i: usize) -> (usize, usize) {
        (i % self.shape[0], i / self.shape[0])
    }

    /// Coordinates of node `i`; the second entry is 0 in one dimension.
    #[inline]
    pub fn coord(&self, i: usize) -> [f64; 2] {
        let (ix, iy) = self.unindex(i);
        let x = self.origin[0] + ix as f64 * self.spacing;
        let y = if self.dim == 2 {
            self.origin[1] + iy as f64 * self.spacing
        } else {
            0.0
        };
        [x, y]
    }

    /// Index of the node nearest to `point`, clamped into the grid.
    pub fn nearest(&self, point: [f64; 2]) -> usize {
        let snap = |axis: usize| {
            let t = ((point[axis] - self.origin[axis]) / self.spacing).round();
            t.clamp(0.0, (self.shape[axis] - 1) as f64) as usize
        };
        if self.dim == 1 {
            snap(0)
        } else {
            self.index(snap(0), snap(1))
        }
    }

    pub(crate) fn check_same(&self, other: &Grid, what: &'static str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(what))
        }
    }

    /// Integer offsets `(dx, dy)` with `|(dx, dy)| h <= radius`.
    pub(crate) fn ball_offsets(&self, radius: f64) -> Vec<(isize, isize)> {
        let reach = (radius / self.spacing * (1.0 + GEOM_EPS)).floor().max(0.0) as isize;
        let limit =
            (radius / self.spacing) * (radius / self.spacing) * (1.0 + 2.0 * GEOM_EPS) + GEOM_EPS;
        let ry = if self.dim == 2 { reach } else { 0 };
        let mut out = Vec::new();
        for dy in -ry..=ry {
            for dx in -reach..=reach {
                if ((dx * dx + dy * dy) as f64) <= limit {
                    out.push((dx, dy));
                }
            }
        }
        out
    }

    /// Node reached from `i` by an integer offset, if it stays on the grid.
    #[inline]
    pub(crate) fn offset(&self, i: usize, dx: isize, dy: isize) -> Option<usize> {
        let (ix, iy) = self.unindex(i);
        let jx = ix as isize + dx;
        let jy = iy as isize + dy;
        if jx < 0 || jy < 0 || jx >= self.shape[0] as isize || jy >= self.shape[1] as isize {
            None
        } else {
            Some(self.index(jx as usize, jy as usize))
        }
    }

    /// Like [`Grid::offset`] but clamps to the boundary (nearest-value extension).
    #[inline]
    pub(crate) fn offset_clamped(&self, i: usize, dx: isize, dy: isize) -> usize {
        let (ix, iy) = self.unindex(i);
        let jx = (ix as isize + dx).clamp(0, self.shape[0] as isize - 1) as usize;
        let jy = (iy as isize + dy).clamp(0, self.shape[1] as isize - 1) as usize;
        self.index(jx, jy)
    }
}

/// A subset of grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    grid: Grid,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn empty(grid: &Grid) -> RegionMask {
        RegionMask {
            grid: *grid,
            bits: vec![false; grid.len()],
        }
    }

    pub fn full(grid: &Grid) -> RegionMask {
        RegionMask {
            grid: *grid,
            bits: vec![true; grid.len()],
        }
    }

    pub fn from_bits(grid: &Grid, bits: Vec<bool>) -> Result<RegionMask> {
        if bits.len() != grid.len() {
            return domain(format!(
                "mask has {} entries, grid has {} nodes",
                bits.len(),
                grid.len()
            ));
        }
        Ok(RegionMask { grid: *grid, bits })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> bool) -> RegionMask {
        let bits = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        RegionMask { grid: *grid, bits }
    }

    /// Nodes with `a <= x <= b` (one dimension) up to a tiny slack.
    pub fn interval(grid: &Grid, a: f64, b: f64) -> RegionMask {
        let eps = GEOM_EPS * grid.spacing();
        RegionMask::from_fn(grid, |p| p[0] >= a - eps && p[0] <= b + eps)
    }

    /// Axis-aligned closed box; the `y` range is ignored in one dimension.
    pub fn boxed(grid: &Grid, x: (f64, f64), y: (f64, f64)) -> RegionMask {
        let eps = GEOM_EPS * grid.spacing();
        let two_d = grid.dim() == 2;
        RegionMask::from_fn(grid, |p| {
            p[0] >= x.0 - eps
                && p[0] <= x.1 + eps
                && (!two_d || (p[1] >= y.0 - eps && p[1] <= y.1 + eps))
        })
    }

    /// Closed Euclidean ball.
    pub fn ball(grid: &Grid, center: [f64; 2], radius: f64) -> RegionMask {
        let eps = GEOM_EPS * grid.spacing();
        RegionMask::from_fn(grid, |p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            (dx * dx + dy * dy).sqrt() <= radius + eps
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn insert(&mut self, i: usize) {
        self.bits[i] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    fn zip_with(&self, other: &RegionMask, f: impl Fn(bool, bool) -> bool) -> Result<RegionMask> {
        self.grid.check_same(&other.grid, "mask set operation")?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(RegionMask {
            grid: self.grid,
            bits,
        })
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<RegionMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &RegionMask) -> Result<RegionMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> RegionMask {
        RegionMask {
            grid: self.grid,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    pub fn is_subset(&self, other: &RegionMask) -> Result<bool> {
        self.grid.check_same(&other.grid, "mask inclusion")?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    /// All nodes within Euclidean distance `radius` of some node of the mask.
    ///
    /// This is the discrete open neighbourhood used by the capacity
    /// admissibility constraint. `dilate(0)` is the identity.
    pub fn dilate(&self, radius: f64) -> Result<RegionMask> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return domain(format!(
                "dilation radius must be finite and >= 0, got {radius}"
            ));
        }
        let offsets = self.grid.ball_offsets(radius);
        let mut bits = vec![false; self.bits.len()];
        for i in self.indices() {
            for &(dx, dy) in &offsets {
                if let Some(j) = self.grid.offset(i, dx, dy) {
                    bits[j] = true;
                }
            }
        }
        Ok(RegionMask {
            grid: self.grid,
            bits,
        })
    }
}

/// A real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != grid.len() {
            return domain(format!(
                "function has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite value {} at node {i}", values[i]));
        }
        Ok(GridFunction {
            grid: *grid,
            values,
        })
    }

    /// Wraps values without the finiteness check; used where the values are
    /// produced by arithmetic on finite inputs.
    pub(crate) fn from_vec_unchecked(grid: &Grid, values: Vec<f64>) -> GridFunction {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction {
            grid: *grid,
            values,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> GridFunction {
        let values = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        GridFunction {
            grid: *grid,
            values,
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> GridFunction {
        GridFunction {
            grid: *grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: &Grid) -> GridFunction {
        GridFunction::constant(grid, 0.0)
    }

    /// Characteristic function of a mask.
    pub fn indicator(mask: &RegionMask) -> GridFunction {
        let values = mask
            .bits()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        GridFunction {
            grid: *mask.grid(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> GridFunction {
        self.map(|v| alpha * v)
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.grid
            .check_same(&other.grid, "grid function arithmetic")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Nodewise maximum.
    pub fn max(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, f64::max)
    }

    /// Nodewise minimum.
    pub fn min(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, f64::min)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum(u) * h^dim`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    /// Convolution with the normalised bump `(1 - (|x|/delta)^2)^2`,
    /// truncated at `delta` and renormalised on the grid.
    ///
    /// Values outside the grid are taken from the nearest boundary node, so
    /// constants are reproduced exactly. `delta = 0` (or any `delta < h`) is
    /// the identity.
    pub fn mollify(&self, delta: f64) -> Result<GridFunction> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return domain(format!(
                "mollifier radius must be finite and >= 0, got {delta}"
            ));
        }
        if delta >= self.grid.min_extent_length() / 2.0 {
            return domain(format!(
                "mollifier radius {delta} is not below half the shortest extent ({})",
                self.grid.min_extent_length() / 2.0
            ));
        }
        let kernel = bump_kernel(&self.grid, delta);
        if kernel.len() == 1 {
            return Ok(self.clone());
        }
        let values = (0..self.grid.len())
            .map(|i| {
                kernel
                    .iter()
                    .map(|&(dx, dy, w)| w * self.values[self.grid.offset_clamped(i, dx, dy)])
                    .sum::<f64>()
            })
            .collect();
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }
}

/// Discrete bump kernel as `(dx, dy, weight)` triples summing to one.
fn bump_kernel(grid: &Grid, delta: f64) -> Vec<(isize, isize, f64)> {
    let h = grid.spacing();
    let mut taps: Vec<(isize, isize, f64)> = grid
        .ball_offsets(delta)
        .into_iter()
        .filter_map(|(dx, dy)| {
            let r = ((dx * dx + dy * dy) as f64).sqrt() * h / delta;
            let s = 1.0 - r * r;
            (s > 0.0).then(|| (dx, dy, s * s))
        })
        .collect();
    if taps.is_empty() {
        taps.push((0, 0, 1.0));
    }
    let mass: f64 = taps.iter().map(|t| t.2).sum();
    for t in &mut taps {
        t.2 /= mass;
    }
    taps
}
