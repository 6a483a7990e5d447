//! Variable exponents sampled at grid nodes and their regularity
//! diagnostics: bounds, the local log-Hölder constant, the strong
//! log-Hölder condition at points where the exponent equals one, and the
//! set `Y = {p = 1}` itself.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::grid::{Grid, RegionMask};

/// Pair budget above which [`ExponentField::log_holder_constant`] stops
/// enumerating all node pairs.
pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;

/// Number of dyadic annuli kept when estimating the strong log-Hölder limit.
const ANNULI: usize = 5;

/// A variable exponent `p(x) >= 1` sampled at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    grid: Grid,
    values: Vec<f64>,
    inf: f64,
    sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogHolderEstimate {
    /// Smallest `c` with `|p(x) - p(y)| <= c / log(e + 1/|x - y|)` over the examined pairs.
    pub constant: f64,
    pub pairs_examined: usize,
    /// `false` when the pair budget forced the displacement subsample.
    pub exhaustive: bool,
    /// Number of distinct displacement vectors used when subsampling (0 if exhaustive).
    pub displacements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongLogHolderReport {
    pub holds: bool,
    /// Node of `Y` with the largest limit estimate, if `Y` is nonempty.
    pub worst_point: Option<[f64; 2]>,
    pub worst_limit_estimate: f64,
    pub points_checked: usize,
    /// `(annulus outer radius, sup of |p(x)-1| log(1/|x-y|) on the annulus)` at the worst point, coarse to fine.
    pub worst_trace: Vec<(f64, f64)>,
}

impl ExponentField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<ExponentField> {
        if values.len() != grid.len() {
            return domain(format!(
                "exponent has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        for (i, &p) in values.iter().enumerate() {
            if !p.is_finite() || p < 1.0 {
                return domain(format!(
                    "exponent must be finite and >= 1, got {p} at node {i}"
                ));
            }
            inf = inf.min(p);
            sup = sup.max(p);
        }
        Ok(ExponentField {
            grid: *grid,
            values,
            inf,
            sup,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Result<ExponentField> {
        ExponentField::new(grid, (0..grid.len()).map(|i| f(grid.coord(i))).collect())
    }

    pub fn constant(grid: &Grid, p: f64) -> Result<ExponentField> {
        ExponentField::new(grid, vec![p; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `p⁻` over the whole grid.
    pub fn inf(&self) -> f64 {
        self.inf
    }

    /// `p⁺` over the whole grid.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// `(p⁻_E, p⁺_E)` over the nodes of `mask`.
    pub fn exponent_bounds(&self, mask: &RegionMask) -> Result<(f64, f64)> {
        self.grid.check_same(mask.grid(), "exponent bounds")?;
        let mut it = mask.indices().map(|i| self.values[i]).peekable();
        if it.peek().is_none() {
            return domain("exponent bounds over an empty mask");
        }
        Ok(it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p), hi.max(p))
        }))
    }

    /// Nodes with `p(x) <= 1 + eq_tol`.
    pub fn one_region(&self, eq_tol: f64) -> RegionMask {
        let bits = self.values.iter().map(|&p| p <= 1.0 + eq_tol).collect();
        RegionMask::from_bits(&self.grid, bits).expect("lengths agree")
    }

    pub fn log_holder_constant(&self) -> Result<LogHolderEstimate> {
        self.log_holder_constant_with_budget(DEFAULT_PAIR_BUDGET)
    }

    /// Local log-Hölder constant over sampled node pairs.
    ///
    /// All pairs are examined when there are at most `pair_budget` of them.
    /// Otherwise every node is paired with a deterministic set of
    /// displacements: all short ones, the dyadic lengths and an even stride
    /// across the grid, along the axes and (in two dimensions) diagonals.
    pub fn log_holder_constant_with_budget(&self, pair_budget: usize) -> Result<LogHolderEstimate> {
        let n = self.grid.len();
        if n < 2 {
            return domain("log-Hölder constant needs at least two nodes");
        }
        let total_pairs = n * (n - 1) / 2;
        let h = self.grid.spacing();
        if total_pairs <= pair_budget {
            let coords: Vec<[f64; 2]> = (0..n).map(|i| self.grid.coord(i)).collect();
            let mut c = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let dp = (self.values[i] - self.values[j]).abs();
                    if dp > 0.0 {
                        let d = dist(coords[i], coords[j]);
                        c = c.max(dp * (std::f64::consts::E + 1.0 / d).ln());
                    }
                }
            }
            return Ok(LogHolderEstimate {
                constant: c,
                pairs_examined: total_pairs,
                exhaustive: true,
                displacements: 0,
            });
        }

        let disps = self.displacements((pair_budget / n).max(1));
        let mut c = 0.0f64;
        let mut pairs = 0usize;
        for &(dx, dy) in &disps {
            let d = ((dx * dx + dy * dy) as f64).sqrt() * h;
            let weight = (std::f64::consts::E + 1.0 / d).ln();
            for i in 0..n {
                if let Some(j) = self.grid.offset(i, dx, dy) {
                    pairs += 1;
                    c = c.max((self.values[i] - self.values[j]).abs() * weight);
                }
            }
        }
        Ok(LogHolderEstimate {
            constant: c,
            pairs_examined: pairs,
            exhaustive: false,
            displacements: disps.len(),
        })
    }

    fn displacements(&self, max_count: usize) -> Vec<(isize, isize)> {
        let [nx, ny] = self.grid.shape();
        let span = nx.max(ny) as isize - 1;
        let mut lengths: Vec<isize> = Vec::new();
        let mut k = 1;
        while k <= span {
            lengths.push(k);
            k *= 2;
        }
        let stride = (span / 64).max(1);
        lengths.extend((1..=span / stride).map(|m| m * stride));
        lengths.push(span);
        let directions: &[(isize, isize)] = if self.grid.dim() == 1 {
            &[(1, 0)]
        } else {
            &[(1, 0), (0, 1), (1, 1), (1, -1)]
        };
        // short displacements first, they decide jump detection
        let per_length = directions.len();
        let dense = (max_count / (2 * per_length)).max(1) as isize;
        lengths.extend(1..=dense.min(span));
        lengths.sort_unstable();
        lengths.dedup();
        let mut out: Vec<(isize, isize)> = Vec::new();
        for &len in &lengths {
            for &(ax, ay) in directions {
                out.push((ax * len, ay * len));
            }
        }
        if out.len() > max_count {
            // keep all of the shortest ones and thin the rest evenly
            let keep_short = max_count / 2;
            let rest = &out[keep_short..];
            let step = rest.len().div_ceil(max_count - keep_short).max(1);
            let mut thinned: Vec<(isize, isize)> = out[..keep_short].to_vec();
            thinned.extend(rest.iter().step_by(step).copied());
            out = thinned;
        }
        out
    }

    /// Checks `lim_{x→y} |p(x) - 1| log(1/|x - y|) = 0` at every node of `Y`.
    ///
    /// For each `y` in `Y` the supremum of the quantity is evaluated on
    /// dyadic annuli `r/2 < |x - y| <= r`, `r = 2^-k <= 1/2`, keeping the
    /// finest annuli that contain at least one node. The limit estimate is
    /// the larger of the two finest annulus values, and the condition holds
    /// when every estimate is below `tol`.
    pub fn strong_log_holder_report(&self, tol: f64, eq_tol: f64) -> Result<StrongLogHolderReport> {
        if !(tol > 0.0) {
            return domain(format!("tolerance must be positive, got {tol}"));
        }
        let h = self.grid.spacing();
        // finest dyadic radius whose annulus can contain a node at distance >= h
        let mut radii: Vec<f64> = Vec::new();
        let mut r = 0.5f64;
        while r >= h * (1.0 - 1e-9) {
            radii.push(r);
            r *= 0.5;
        }
        if radii.len() > ANNULI {
            radii.drain(..radii.len() - ANNULI);
        }
        let outer = radii.first().copied().unwrap_or(0.0);
        let offsets: Vec<(isize, isize, f64)> = self
            .grid
            .ball_offsets(outer)
            .into_iter()
            .filter(|&(dx, dy)| dx != 0 || dy != 0)
            .map(|(dx, dy)| (dx, dy, ((dx * dx + dy * dy) as f64).sqrt() * h))
            .collect();

        let mut report = StrongLogHolderReport {
            holds: true,
            worst_point: None,
            worst_limit_estimate: 0.0,
            points_checked: 0,
            worst_trace: Vec::new(),
        };
        let y_mask = self.one_region(eq_tol);
        for y in y_mask.indices() {
            report.points_checked += 1;
            let mut sup = vec![f64::NEG_INFINITY; radii.len()];
            for &(dx, dy, d) in &offsets {
                let Some(x) = self.grid.offset(y, dx, dy) else {
                    continue;
                };
                let q = (self.values[x] - 1.0).abs() * (1.0 / d).ln();
                for (k, &rk) in radii.iter().enumerate() {
                    if d > rk / 2.0 * (1.0 + 1e-12) && d <= rk * (1.0 + 1e-12) {
                        sup[k] = sup[k].max(q);
                    }
                }
            }
            let trace: Vec<(f64, f64)> = radii
                .iter()
                .zip(&sup)
                .filter(|(_, s)| s.is_finite())
                .map(|(&r, &s)| (r, s))
                .collect();
            let estimate = trace.iter().rev().take(2).map(|t| t.1).fold(0.0, f64::max);
            if report.worst_point.is_none() || estimate > report.worst_limit_estimate {
                report.worst_point = Some(self.grid.coord(y));
                report.worst_limit_estimate = estimate;
                report.worst_trace = trace;
            }
        }
        report.holds = report.worst_limit_estimate < tol;
        Ok(report)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
