//! The mixed BV-Sobolev pseudo-modulars and probes for their structural
//! properties.
//!
//! * The split form charges total variation on `Y = {p = 1}` and the
//!   gradient modular elsewhere.
//! * The relaxed form is the lower semicontinuous envelope of `∫ |∇u|^{p(x)}`.
//!   On a fixed grid every nodal function is the trace of a Lipschitz
//!   interpolant, so the envelope is attained at `u` itself and equals the
//!   discrete gradient modular. Its sequential structure is exercised by
//!   [`relaxation_probe`] through mollifier families instead.

use serde::Serialize;

use crate::bv::{forward_difference, total_variation, GradientMode};
use crate::error::{domain, Result};
use crate::exponent::ExponentField;
use crate::grid::{GridFunction, RegionMask};
use crate::lebesgue::{
    abs_pow, decreasing_unit_root, gradient_modular, luxemburg_norm, node_gradient_energy,
    EnergyBreakdown,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedFlavor {
    Split,
    Relaxed,
}

/// `‖Du‖(E ∩ Y) + ρ_{L^p(E \ Y)}(∇u)` with `E = mask`.
pub fn rho_mixed_split(
    u: &GridFunction,
    field: &ExponentField,
    mask: &RegionMask,
    eq_tol: f64,
    mode: GradientMode,
) -> Result<EnergyBreakdown> {
    u.grid().check_same(field.grid(), "split pseudo-modular")?;
    let y = field.one_region(eq_tol);
    let on_y = mask.intersection(&y)?;
    let off_y = mask.difference(&y)?;
    let tv_part = total_variation(u, &on_y, mode)?;
    let gradient_part = gradient_modular(u, field, &off_y, mode)?;
    Ok(EnergyBreakdown::new(0.0, gradient_part, tv_part))
}

/// Relaxed pseudo-modular over the whole grid, `Σ |∇_h u|^{p(x)} h^d`.
pub fn rho_mixed_relaxed(
    u: &GridFunction,
    field: &ExponentField,
    mode: GradientMode,
) -> Result<f64> {
    gradient_modular(u, field, &RegionMask::full(u.grid()), mode)
}

/// `‖u‖_{L^p} + inf{λ > 0 : ρ_mixed(u/λ) <= 1}` for the chosen pseudo-modular.
pub fn mixed_norm(
    u: &GridFunction,
    field: &ExponentField,
    flavor: MixedFlavor,
    mode: GradientMode,
    eq_tol: f64,
) -> Result<f64> {
    u.grid().check_same(field.grid(), "mixed norm")?;
    if !u.is_finite() {
        return domain("mixed norm of a non-finite function");
    }
    let lebesgue = luxemburg_norm(u, field)?;
    let grid = u.grid();
    // Per-node difference vectors and the exponent each node is charged with
    // (1 on Y for the split flavour).
    let terms: Vec<([f64; 2], f64)> = (0..grid.len())
        .map(|i| {
            let d = forward_difference(grid, u.values(), i);
            let p = field.get(i);
            let p = match flavor {
                MixedFlavor::Split if p <= 1.0 + eq_tol => 1.0,
                _ => p,
            };
            (d, p)
        })
        .filter(|(d, _)| d[0] != 0.0 || d[1] != 0.0)
        .collect();
    if terms.is_empty() {
        return Ok(lebesgue);
    }
    let weight = grid.cell_measure();
    let pseudo = |lambda: f64| -> f64 {
        let s = 1.0 / lambda;
        terms
            .iter()
            .map(|&(d, p)| energy_with_tv(d, s, p, mode))
            .sum::<f64>()
            * weight
    };
    Ok(lebesgue + decreasing_unit_root(pseudo)?)
}

#[inline]
fn energy_with_tv(d: [f64; 2], scale: f64, p: f64, mode: GradientMode) -> f64 {
    let d = [d[0] * scale, d[1] * scale];
    if p == 1.0 {
        match mode {
            GradientMode::Isotropic => d[0].hypot(d[1]),
            GradientMode::Anisotropic => d[0].abs() + d[1].abs(),
        }
    } else {
        node_gradient_energy(d, p, mode)
    }
}

/// `ρ̃(max{u,v}) + ρ̃(min{u,v}) - ρ̃(u) - ρ̃(v)` in anisotropic mode.
///
/// The anisotropic relaxed modular is a sum of convex functions of single
/// edge differences, so the defect is accumulated edge by edge; edges where
/// `u - v` does not change sign contribute exactly zero.
pub fn lattice_defect(u: &GridFunction, v: &GridFunction, field: &ExponentField) -> Result<f64> {
    u.grid().check_same(v.grid(), "lattice defect")?;
    u.grid().check_same(field.grid(), "lattice defect")?;
    let hi = u.max(v)?;
    let lo = u.min(v)?;
    let grid = u.grid();
    let mut defect = 0.0;
    for i in 0..grid.len() {
        let p = field.get(i);
        let du = forward_difference(grid, u.values(), i);
        let dv = forward_difference(grid, v.values(), i);
        let dh = forward_difference(grid, hi.values(), i);
        let dl = forward_difference(grid, lo.values(), i);
        for k in 0..2 {
            defect +=
                (abs_pow(dh[k], p) + abs_pow(dl[k], p)) - (abs_pow(du[k], p) + abs_pow(dv[k], p));
        }
    }
    Ok(defect * grid.cell_measure())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeOptions {
    pub eq_tol: f64,
    pub mode: GradientMode,
    /// Allowed constant is `exp(kappa * c)` with `c` the log-Hölder constant,
    /// unless `upper_bound` is given.
    pub kappa: f64,
    pub upper_bound: Option<f64>,
    /// Relative slack for the lower semicontinuity check.
    pub lsc_rel_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            eq_tol: crate::DEFAULT_EQ_TOL,
            mode: GradientMode::Isotropic,
            kappa: 3.0,
            upper_bound: None,
            lsc_rel_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationReport {
    pub lsc_ok: bool,
    pub upper_ok: bool,
    /// Largest ratio `ρ(u_δ) / ρ(u)` over the tail of the sweep.
    pub c_observed: f64,
    /// Constant `c_observed` was compared against.
    pub c_allowed: f64,
    /// `ρ_split` of `u` over the probe set.
    pub base: f64,
    /// `(delta, ρ(u_δ), ratio)` in sweep order.
    pub trace: Vec<(f64, f64, f64)>,
    /// Index into `trace` where the tail starts.
    pub tail_start: usize,
}

/// Evaluates the split pseudo-modular over `probe_set` along the mollified
/// family `u_δ`, `δ ∈ deltas`.
///
/// The tail is the second half of the sweep (the finest radii). The lower
/// semicontinuity flag asks that no tail value fall below `ρ(u)` by more
/// than `lsc_rel_tol`; the upper flag asks that the worst tail ratio stay
/// below the allowed constant.
pub fn relaxation_probe(
    u: &GridFunction,
    field: &ExponentField,
    probe_set: &RegionMask,
    deltas: &[f64],
    opts: &ProbeOptions,
) -> Result<RelaxationReport> {
    let grid = u.grid();
    grid.check_same(field.grid(), "relaxation probe")?;
    grid.check_same(probe_set.grid(), "relaxation probe")?;
    if deltas.is_empty() {
        return domain("relaxation probe needs at least one radius");
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return domain("mollifier radii must be strictly decreasing");
    }
    let h = grid.spacing();
    let finest = *deltas.last().unwrap();
    if finest < h * (1.0 - 1e-9) {
        return domain(format!(
            "mollifier radius {finest} is below the grid resolution {h}"
        ));
    }
    let band = deltas[0];
    let extents = grid.extents();
    for i in probe_set.indices() {
        let x = grid.coord(i);
        for (k, &(a, b)) in extents.iter().enumerate() {
            if x[k] - a < band * (1.0 - 1e-9) || b - x[k] < band * (1.0 - 1e-9) {
                return domain(format!(
                    "probe set touches the boundary band of width {band}"
                ));
            }
        }
    }

    let rho = |w: &GridFunction| -> Result<f64> {
        Ok(rho_mixed_split(w, field, probe_set, opts.eq_tol, opts.mode)?.total)
    };
    let base = rho(u)?;
    let mut trace = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let value = rho(&u.mollify(delta)?)?;
        let ratio = if base > 0.0 {
            value / base
        } else if value == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        trace.push((delta, value, ratio));
    }
    let tail_start = deltas.len() / 2;
    let tail = &trace[tail_start..];
    let c_observed = tail.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
    let min_tail = tail.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let c_allowed = match opts.upper_bound {
        Some(c) => c,
        None => (opts.kappa * field.log_holder_constant()?.constant).exp(),
    };
    Ok(RelaxationReport {
        lsc_ok: min_tail >= base * (1.0 - opts.lsc_rel_tol),
        upper_ok: c_observed <= c_allowed,
        c_observed,
        c_allowed,
        base,
        trace,
        tail_start,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub split: f64,
    pub relaxed: f64,
    /// `split / relaxed`, 1 when both vanish.
    pub ratio: f64,
    pub log_holder_c: f64,
    pub kappa: f64,
    /// `ratio ∈ [exp(-κc), exp(κc)]`.
    pub within_bounds: bool,
    /// Set when the exponent's oscillation looks concentrated at the grid scale.
    pub warning: Option<String>,
}

/// Both pseudo-modulars over the whole grid and their ratio.
pub fn equivalence_ratio(
    u: &GridFunction,
    field: &ExponentField,
    eq_tol: f64,
    mode: GradientMode,
    kappa: f64,
) -> Result<EquivalenceReport> {
    if !u.is_finite() {
        return domain("equivalence ratio of a non-finite function");
    }
    let full = RegionMask::full(u.grid());
    let split = rho_mixed_split(u, field, &full, eq_tol, mode)?.total;
    let relaxed = rho_mixed_relaxed(u, field, mode)?;
    let ratio = if split == 0.0 && relaxed == 0.0 {
        1.0
    } else {
        split / relaxed
    };
    let c = field.log_holder_constant()?.constant;
    let bound = (kappa * c).exp();
    let h = u.grid().spacing();
    let osc = field.sup() - field.inf();
    let warning = (osc > 0.0 && c >= 0.5 * osc * (std::f64::consts::E + 1.0 / h).ln()).then(|| {
        format!("log-Hölder constant {c:.4} is of the order of a grid-scale jump; the exponent may not be log-Hölder")
    });
    Ok(EquivalenceReport {
        split,
        relaxed,
        ratio,
        log_holder_c: c,
        kappa,
        within_bounds: ratio >= 1.0 / bound && ratio <= bound,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::lebesgue::sobolev_modular;
    use crate::DEFAULT_EQ_TOL;

    const ISO: GradientMode = GradientMode::Isotropic;

    #[test]
    fn split_examples() {
        let g = Grid::line(0.0, 1.0, 1e-3).unwrap();
        let full = RegionMask::full(&g);
        let u = GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin());
        let ones = ExponentField::constant(&g, 1.0).unwrap();
        let s = rho_mixed_split(&u, &ones, &full, DEFAULT_EQ_TOL, ISO).unwrap();
        assert_eq!(s.total, total_variation(&u, &full, ISO).unwrap());
        let twos = ExponentField::constant(&g, 2.0).unwrap();
        let s = rho_mixed_split(&u, &twos, &full, DEFAULT_EQ_TOL, ISO).unwrap();
        assert_eq!(s.tv_part, 0.0);
        assert_eq!(s.total, gradient_modular(&u, &twos, &full, ISO).unwrap());

        let x = GridFunction::from_fn(&g, |p| p[0]);
        let piece = ExponentField::from_fn(&g, |p| if p[0] <= 0.5 { 1.0 } else { 2.0 }).unwrap();
        let s = rho_mixed_split(&x, &piece, &full, DEFAULT_EQ_TOL, ISO).unwrap();
        assert!(
            (s.tv_part - 0.5).abs() < 2e-3 && (s.gradient_part - 0.5).abs() < 2e-3,
            "{s:?}"
        );
        assert!((s.total - 1.0).abs() < 2e-3);
    }

    #[test]
    fn relaxed_sine_converges_to_dirichlet_energy() {
        // ∫_0^1 (2π cos 2πx)^2 dx = 2π²
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        let mut errs = Vec::new();
        for &h in &[1e-2, 1e-3, 1e-4] {
            let g = Grid::line(0.0, 1.0, h).unwrap();
            let u = GridFunction::from_fn(&g, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
            let p = ExponentField::constant(&g, 2.0).unwrap();
            errs.push((rho_mixed_relaxed(&u, &p, ISO).unwrap() - exact).abs());
        }
        assert!(
            errs[0] < 0.5 && errs[1] < 0.05 && errs[2] < 0.005,
            "{errs:?}"
        );
        assert!(errs.windows(2).all(|e| e[1] < 0.2 * e[0]));
    }

    #[test]
    fn relaxed_step_energy() {
        for &h in &[1e-2, 1e-3, 1e-4] {
            let g = Grid::line(0.0, 1.0, h).unwrap();
            let chi = GridFunction::indicator(&RegionMask::interval(&g, 0.4, 0.6));
            let ones = ExponentField::constant(&g, 1.0).unwrap();
            assert!((rho_mixed_relaxed(&chi, &ones, ISO).unwrap() - 2.0).abs() < 1e-9);
        }
        // p = 2: energy 2/h, a power law with exponent 1 - p = -1.
        let mut pts = Vec::new();
        for &h in &[1e-2, 1e-3, 1e-4] {
            let g = Grid::line(0.0, 1.0, h).unwrap();
            let chi = GridFunction::indicator(&RegionMask::interval(&g, 0.4, 0.6));
            let twos = ExponentField::constant(&g, 2.0).unwrap();
            pts.push((h.ln(), rho_mixed_relaxed(&chi, &twos, ISO).unwrap().ln()));
        }
        let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
        assert!((slope + 1.0).abs() < 1e-6, "{slope}");
    }

    #[test]
    fn mixed_norm_examples() {
        let g = Grid::line(0.0, 1.0, 1e-3).unwrap();
        let p = ExponentField::constant(&g, 2.0).unwrap();
        assert_eq!(
            mixed_norm(
                &GridFunction::zeros(&g),
                &p,
                MixedFlavor::Relaxed,
                ISO,
                DEFAULT_EQ_TOL
            )
            .unwrap(),
            0.0
        );
        let x = GridFunction::from_fn(&g, |q| q[0]);
        let n = mixed_norm(&x, &p, MixedFlavor::Relaxed, ISO, DEFAULT_EQ_TOL).unwrap();
        let exact = 1.0 / 3f64.sqrt() + 1.0;
        assert!((n - exact).abs() < 2e-3, "{n} vs {exact}");
        // Oracle on the grid: both roots are closed-form square roots.
        let w = g.cell_measure();
        let l2 = (x.values().iter().map(|v| v * v).sum::<f64>() * w).sqrt();
        let grad = ((g.len() - 1) as f64 * w).sqrt();
        assert!((n - (l2 + grad)).abs() < 1e-9);
        for flavor in [MixedFlavor::Split, MixedFlavor::Relaxed] {
            let a = mixed_norm(&x, &p, flavor, ISO, DEFAULT_EQ_TOL).unwrap();
            let b = mixed_norm(&x.scale(2.0), &p, flavor, ISO, DEFAULT_EQ_TOL).unwrap();
            assert!((b - 2.0 * a).abs() <= 1e-9 * b);
        }
        let c = GridFunction::constant(&g, 0.7);
        assert_eq!(
            mixed_norm(&c, &p, MixedFlavor::Split, ISO, DEFAULT_EQ_TOL).unwrap(),
            luxemburg_norm(&c, &p).unwrap()
        );
    }

    #[test]
    fn lattice_examples() {
        let g = Grid::line(0.0, 1.0, 1.0 / 11.0).unwrap();
        let p = ExponentField::constant(&g, 2.0).unwrap();
        let x = GridFunction::from_fn(&g, |q| q[0]);
        assert_eq!(lattice_defect(&x, &x, &p).unwrap(), 0.0);
        let half = GridFunction::constant(&g, 0.5);
        let d = lattice_defect(&x, &half, &p).unwrap();
        // Oracle: only the edge [5/11, 6/11] crosses 0.5; there max and min
        // each rise by 1/22 while u rises by 1/11 and v is flat.
        let h = g.spacing();
        let edge = |rise: f64| (rise / h).powi(2) * h;
        let expected = 2.0 * edge(0.5 - 5.0 / 11.0) - edge(1.0 / 11.0);
        assert!(d < 0.0);
        assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");

        let u = GridFunction::indicator(&RegionMask::interval(&g, 0.0, 0.3));
        let v = GridFunction::indicator(&RegionMask::interval(&g, 0.6, 1.0));
        assert_eq!(lattice_defect(&u, &v, &p).unwrap(), 0.0);
    }

    #[test]
    fn equivalence_collapses_on_constant_one() {
        let g = Grid::line(0.0, 1.0, 1e-3).unwrap();
        let ones = ExponentField::constant(&g, 1.0).unwrap();
        let step = GridFunction::from_fn(&g, |x| if x[0] > 0.5 { 1.0 } else { 0.0 });
        let r = equivalence_ratio(&step, &ones, DEFAULT_EQ_TOL, ISO, 3.0).unwrap();
        assert_eq!(r.split, r.relaxed);
        assert_eq!(r.ratio, 1.0);
        assert!(r.within_bounds);
        let zero =
            equivalence_ratio(&GridFunction::zeros(&g), &ones, DEFAULT_EQ_TOL, ISO, 3.0).unwrap();
        assert_eq!(zero.ratio, 1.0);
    }

    #[test]
    fn relaxed_matches_sobolev_gradient_part() {
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 0.02).unwrap();
        let u = GridFunction::from_fn(&g, |x| (x[0] * 4.0).cos() * x[1]);
        let p = ExponentField::constant(&g, 1.6).unwrap();
        for mode in [GradientMode::Isotropic, GradientMode::Anisotropic] {
            assert_eq!(
                rho_mixed_relaxed(&u, &p, mode).unwrap(),
                sobolev_modular(&u, &p, mode).unwrap().gradient_part
            );
        }
    }

    #[test]
    fn probe_rejects_bad_sweeps() {
        let g = Grid::line(0.0, 1.0, 1e-2).unwrap();
        let p = ExponentField::constant(&g, 2.0).unwrap();
        let u = GridFunction::from_fn(&g, |x| x[0]);
        let f = RegionMask::interval(&g, 0.3, 0.7);
        let o = ProbeOptions::default();
        assert!(relaxation_probe(&u, &p, &f, &[0.1, 0.2], &o).is_err());
        assert!(relaxation_probe(&u, &p, &f, &[0.1, 0.005], &o).is_err());
        assert!(relaxation_probe(&u, &p, &RegionMask::full(&g), &[0.1, 0.05], &o).is_err());
        assert!(relaxation_probe(&u, &p, &f, &[0.1, 0.05], &o).is_ok());
    }
}
