//! Variable-exponent modular `ρ(u) = ∫ |u|^{p(x)}`, the Luxemburg norm and
//! the first-order Sobolev modular.

use serde::Serialize;

use crate::bv::{forward_difference, GradientMode};
use crate::error::{domain, Result};
use crate::exponent::ExponentField;
use crate::grid::{GridFunction, RegionMask};

/// Required `|ρ(u/λ) - 1|` at the returned root.
pub const ROOT_RESIDUAL: f64 = 1e-10;

/// Itemised energy of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub lebesgue_part: f64,
    pub gradient_part: f64,
    pub tv_part: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(lebesgue_part: f64, gradient_part: f64, tv_part: f64) -> EnergyBreakdown {
        EnergyBreakdown {
            lebesgue_part,
            gradient_part,
            tv_part,
            total: lebesgue_part + gradient_part + tv_part,
        }
    }
}

/// `|x|^p`, exact for `x = 0` and `p = 1`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        (p * a.ln()).exp()
    }
}

/// `Σ_{x ∈ mask} |u(x)|^{p(x)} h^dim`.
pub fn modular(u: &GridFunction, field: &ExponentField, mask: &RegionMask) -> Result<f64> {
    u.grid()
        .check_same(field.grid(), "modular: function vs exponent")?;
    u.grid()
        .check_same(mask.grid(), "modular: function vs mask")?;
    let s: f64 = mask
        .indices()
        .map(|i| abs_pow(u.get(i), field.get(i)))
        .sum();
    Ok(s * u.grid().cell_measure())
}

/// Modular over the whole grid, scaled: `ρ(u / λ)`.
fn scaled_modular(values: &[f64], exps: &[f64], inv_lambda: f64, weight: f64) -> f64 {
    values
        .iter()
        .zip(exps)
        .map(|(&v, &p)| abs_pow(v * inv_lambda, p))
        .sum::<f64>()
        * weight
}

/// Gradient modular `Σ_{x ∈ mask} |∇_h u(x)|^{p(x)} h^dim`.
///
/// In anisotropic mode the energy is edgewise, `Σ_k |D_k u(x)|^{p(x)}`.
pub fn gradient_modular(
    u: &GridFunction,
    field: &ExponentField,
    mask: &RegionMask,
    mode: GradientMode,
) -> Result<f64> {
    u.grid()
        .check_same(field.grid(), "gradient modular: function vs exponent")?;
    u.grid()
        .check_same(mask.grid(), "gradient modular: function vs mask")?;
    let grid = u.grid();
    let s: f64 = mask
        .indices()
        .map(|i| node_gradient_energy(forward_difference(grid, u.values(), i), field.get(i), mode))
        .sum();
    Ok(s * grid.cell_measure())
}

#[inline]
pub(crate) fn node_gradient_energy(d: [f64; 2], p: f64, mode: GradientMode) -> f64 {
    match mode {
        GradientMode::Isotropic => abs_pow(d[0].hypot(d[1]), p),
        GradientMode::Anisotropic => abs_pow(d[0], p) + abs_pow(d[1], p),
    }
}

/// Root `λ > 0` of `f(λ) = 1` for a continuous, strictly decreasing `f`
/// with `f(λ) → ∞` as `λ → 0` and `f(λ) → 0` as `λ → ∞`.
///
/// Brackets in `[2^-40, 2^40]`, widening geometrically when needed, then
/// bisects in `log λ` until the residual is at most [`ROOT_RESIDUAL`] or
/// the bracket collapses to adjacent floats.
pub(crate) fn decreasing_unit_root(f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut lo = 2f64.powi(-40);
    let mut hi = 2f64.powi(40);
    let mut widen = 0;
    while f(lo) < 1.0 {
        lo *= 2f64.powi(-40);
        widen += 1;
        if widen > 20 || lo == 0.0 {
            return domain("could not bracket the norm root from below");
        }
    }
    widen = 0;
    while f(hi) > 1.0 {
        hi *= 2f64.powi(40);
        widen += 1;
        if widen > 20 || !hi.is_finite() {
            return domain("could not bracket the norm root from above");
        }
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let mid = if mid > lo && mid < hi {
            mid
        } else {
            0.5 * (lo + hi)
        };
        if !(mid > lo && mid < hi) {
            break;
        }
        let val = f(mid);
        let residual = (val - 1.0).abs();
        if residual < best.0 {
            best = (residual, mid);
        }
        if residual <= ROOT_RESIDUAL * 1e-3 {
            break;
        }
        if val > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for cand in [lo, hi] {
        let r = (f(cand) - 1.0).abs();
        if r < best.0 {
            best = (r, cand);
        }
    }
    Ok(best.1)
}

/// Luxemburg norm `inf{λ > 0 : ρ(u/λ) <= 1}` over the whole grid.
pub fn luxemburg_norm(u: &GridFunction, field: &ExponentField) -> Result<f64> {
    u.grid().check_same(field.grid(), "luxemburg norm")?;
    if !u.is_finite() {
        return domain("luxemburg norm of a non-finite function");
    }
    if u.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let weight = u.grid().cell_measure();
    decreasing_unit_root(|lambda| scaled_modular(u.values(), field.values(), 1.0 / lambda, weight))
}

/// `ρ_{1,p}(u) = ρ(u) + ρ(∇u)`; `tv_part` is always 0 here.
pub fn sobolev_modular(
    u: &GridFunction,
    field: &ExponentField,
    mode: GradientMode,
) -> Result<EnergyBreakdown> {
    let full = RegionMask::full(u.grid());
    let lebesgue_part = modular(u, field, &full)?;
    let gradient_part = gradient_modular(u, field, &full, mode)?;
    Ok(EnergyBreakdown::new(lebesgue_part, gradient_part, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn unit() -> Grid {
        Grid::line(0.0, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn modular_examples() {
        let g = unit();
        let full = RegionMask::full(&g);
        let p2 = ExponentField::constant(&g, 2.0).unwrap();
        assert_eq!(modular(&GridFunction::zeros(&g), &p2, &full).unwrap(), 0.0);
        let two = GridFunction::constant(&g, 2.0);
        assert!((modular(&two, &p2, &full).unwrap() - 4.0).abs() < 4.0 * 2e-3);
        let piece = ExponentField::from_fn(&g, |x| if x[0] <= 0.5 { 1.0 } else { 2.0 }).unwrap();
        assert!((modular(&two, &piece, &full).unwrap() - 3.0).abs() < 5e-3);
    }

    #[test]
    fn luxemburg_examples() {
        let g = unit();
        let p2 = ExponentField::constant(&g, 2.0).unwrap();
        assert_eq!(luxemburg_norm(&GridFunction::zeros(&g), &p2).unwrap(), 0.0);
        let two = GridFunction::constant(&g, 2.0);
        let n = luxemburg_norm(&two, &p2).unwrap();
        // discrete measure is 1.001
        assert!((n - 2.0 * 1.001f64.sqrt()).abs() < 1e-12, "{n}");

        // Piecewise exponent: t/2 + t²/2 = 1 with t = 2/λ has t = 1, λ = 2.
        // Use an even split of nodes so the discrete halves have equal measure.
        let g = Grid::line(0.0, 1.0, 1.0 / 1001.0).unwrap();
        let half = g.len() / 2;
        let piece = ExponentField::new(
            &g,
            (0..g.len())
                .map(|i| if i < half { 1.0 } else { 2.0 })
                .collect(),
        )
        .unwrap();
        let two = GridFunction::constant(&g, 2.0);
        let lam = luxemburg_norm(&two, &piece).unwrap();
        // Oracle: closed-form root of the discrete quadratic a t + b t² = 1.
        let w = g.cell_measure();
        let (a, b) = (half as f64 * w, (g.len() - half) as f64 * w);
        let t = (-a + (a * a + 4.0 * b).sqrt()) / (2.0 * b);
        assert!((lam - 2.0 / t).abs() < 1e-9, "{lam} vs {}", 2.0 / t);
        assert!((lam - 2.0).abs() < 5e-3);
        let res = modular(&two.scale(1.0 / lam), &piece, &RegionMask::full(&g)).unwrap() - 1.0;
        assert!(res.abs() <= ROOT_RESIDUAL);
    }

    #[test]
    fn luxemburg_rejects_non_finite() {
        let g = unit();
        let p2 = ExponentField::constant(&g, 2.0).unwrap();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        let u = GridFunction::from_vec_unchecked(&g, v);
        assert!(luxemburg_norm(&u, &p2).is_err());
    }

    #[test]
    fn sobolev_modular_examples() {
        let g = unit();
        let p2 = ExponentField::constant(&g, 2.0).unwrap();
        let c = sobolev_modular(
            &GridFunction::constant(&g, 0.5),
            &p2,
            GradientMode::Isotropic,
        )
        .unwrap();
        assert_eq!(c.gradient_part, 0.0);
        assert!((c.total - 0.25 * g.measure()).abs() < 1e-12);
        let x = sobolev_modular(
            &GridFunction::from_fn(&g, |p| p[0]),
            &p2,
            GradientMode::Isotropic,
        )
        .unwrap();
        assert!((x.total - 4.0 / 3.0).abs() < 3e-3, "{x:?}");
        assert_eq!(x.tv_part, 0.0);
        let z = sobolev_modular(&GridFunction::zeros(&g), &p2, GradientMode::Isotropic).unwrap();
        assert_eq!(z, EnergyBreakdown::default());
    }

    #[test]
    fn lambda_map_is_strictly_decreasing() {
        let g = Grid::line(0.0, 1.0, 0.01).unwrap();
        let p = ExponentField::from_fn(&g, |x| 1.0 + 2.0 * x[0]).unwrap();
        let u = GridFunction::from_fn(&g, |x| (5.0 * x[0]).sin() + 0.3);
        let w = g.cell_measure();
        let vals: Vec<f64> = (1..200)
            .map(|k| scaled_modular(u.values(), p.values(), 1.0 / (k as f64 * 0.05), w))
            .collect();
        assert!(vals.windows(2).all(|v| v[1] < v[0]));
    }
}
