//! Primal-dual minimisation of capacity energies
//!
//! ```text
//! J(u) = Σ_x |u(x)|^{p(x)} h^d + Σ_x |∇_h u(x)|^{p(x)} h^d
//! ```
//!
//! over `0 <= u <= 1` with `u = 1` on a fixed node set. The gradient term is
//! handled through its conjugate in a Chambolle-Pock iteration; both proximal
//! maps reduce to the scalar [`prox_power`]. The objective is divided by the
//! cell measure `h^d` internally so the step sizes only depend on `h`
//! through the operator norm of `∇_h`.

use serde::Serialize;

use crate::bv::GradientMode;
use crate::error::{config, Result};
use crate::exponent::ExponentField;
use crate::grid::{Grid, GridFunction, RegionMask};
use crate::lebesgue::{abs_pow, EnergyBreakdown};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Target for the relative primal-dual gap.
    pub tol_gap: f64,
    /// Fallback target for the relative change of the iterates.
    pub tol_change: f64,
    /// Primal step in normalised units; `None` picks `0.99 / ‖∇_h‖`.
    pub tau: Option<f64>,
    /// Dual step in normalised units; `None` picks `0.99 / ‖∇_h‖`.
    pub sigma: Option<f64>,
    /// Recorded for reproducibility. The node sweep is in fixed order, so
    /// no randomness is drawn from it at present.
    pub seed: u64,
    /// Fixed reduction order. The iteration is sequential, so this always holds.
    pub deterministic: bool,
    pub mode: GradientMode,
    /// Gap evaluation period in iterations (the first iteration is always checked).
    /// While the relative gap is above `100 * tol_gap` the period is four times longer.
    pub gap_every: usize,
    /// Keep `J(u_k)` for every iteration in the certificate.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200_000,
            tol_gap: 1e-7,
            tol_change: 1e-10,
            tau: None,
            sigma: None,
            seed: 0,
            deterministic: true,
            mode: GradientMode::Isotropic,
            gap_every: 10,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    /// Upper bound for `‖∇_h‖`: `sqrt(4 dim) / h`.
    pub fn operator_norm_bound(grid: &Grid) -> f64 {
        (4.0 * grid.dim() as f64).sqrt() / grid.spacing()
    }

    /// Validated `(tau, sigma)` for `grid`.
    pub fn steps(&self, grid: &Grid) -> Result<(f64, f64)> {
        if self.max_iters < 1 {
            return config("max_iters must be at least 1");
        }
        if !(self.tol_gap >= 0.0) || !(self.tol_change >= 0.0) {
            return config("solver tolerances must be nonnegative");
        }
        if self.gap_every < 1 {
            return config("gap_every must be at least 1");
        }
        let l = Self::operator_norm_bound(grid);
        let tau = self.tau.unwrap_or(0.99 / l);
        let sigma = self.sigma.unwrap_or(0.99 / l);
        if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
            return config(format!(
                "step sizes must be positive, got tau={tau}, sigma={sigma}"
            ));
        }
        if tau * sigma * l * l > 1.0 + 1e-12 {
            return config(format!(
                "step sizes violate tau*sigma*L^2 <= 1 (L = {l}): tau={tau}, sigma={sigma}"
            ));
        }
        Ok((tau, sigma))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveCertificate {
    pub iterations: usize,
    /// Relative primal-dual gap at the last evaluation (`inf` when not computable).
    pub final_gap: f64,
    /// Absolute primal-dual gap in energy units (`inf` when not computable).
    pub final_gap_abs: f64,
    pub final_change: f64,
    pub converged: bool,
    pub energy: EnergyBreakdown,
    pub mode: GradientMode,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl SolveCertificate {
    /// Slack to add to any inequality between energies computed by this solve.
    pub fn slack(&self) -> f64 {
        if self.final_gap_abs.is_finite() {
            self.final_gap_abs
        } else {
            0.0
        }
    }
}

/// Proximal map of `t ↦ weight |t|^p`: the minimiser of
/// `weight |t|^p + (t - z)^2 / 2`.
///
/// Closed forms for `p = 1` (soft threshold) and `p = 2`; otherwise a
/// bracketed Newton iteration on `t + weight p t^{p-1} = |z|`.
pub fn prox_power(z: f64, weight: f64, p: f64) -> f64 {
    debug_assert!(
        weight >= 0.0 && p >= 1.0,
        "prox_power needs weight >= 0, p >= 1"
    );
    if z == 0.0 || weight == 0.0 {
        return z;
    }
    let a = z.abs();
    let t = if p == 1.0 {
        (a - weight).max(0.0)
    } else if p == 2.0 {
        a / (1.0 + 2.0 * weight)
    } else {
        prox_power_magnitude(a, weight, p)
    };
    if z < 0.0 {
        -t
    } else {
        t
    }
}

/// Positive root of `t + wp t^{p-1} = z` for `z > 0`, `p > 1`.
fn prox_power_magnitude(z: f64, weight: f64, p: f64) -> f64 {
    let wp = weight * p;
    let q = 1.0 / (p - 1.0);
    // φ(lo) <= 0 <= φ(hi)
    let mut hi = z.min((z / wp).powf(q));
    let mut lo = (0.5 * z).min((0.5 * z / wp).powf(q));
    if hi == 0.0 {
        return 0.0;
    }
    let phi = |t: f64| -> (f64, f64) {
        let s = ((p - 1.0) * t.ln()).exp();
        (t + wp * s - z, 1.0 + wp * (p - 1.0) * s / t)
    };
    // φ is concave for p < 2 and convex for p > 2, so Newton started on the
    // matching side of the root approaches it monotonically.
    let mut t = if p < 2.0 && lo > 0.0 { lo } else { hi };
    let mut best = (f64::INFINITY, t);
    for _ in 0..200 {
        let (f, df) = phi(t);
        if f.abs() < best.0 {
            best = (f.abs(), t);
        }
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - f / df;
        if !(next > lo && next < hi) {
            next = if lo > 0.0 && hi > 4.0 * lo {
                (lo * hi).sqrt()
            } else if lo > 0.0 {
                0.5 * (lo + hi)
            } else {
                hi / 16.0
            };
        }
        if (next - t).abs() <= 2.0 * f64::EPSILON * next || hi - lo <= 2.0 * f64::EPSILON * hi {
            let (fn_, _) = phi(next);
            if fn_.abs() < best.0 {
                best = (fn_.abs(), next);
            }
            break;
        }
        t = next;
    }
    best.1
}

/// Relative Newton step below which the next iterate is accepted as the root.
const NEWTON_QUADRATIC_STEP: f64 = 1e-8;

/// Positive root of `t + wp t^{p-1} = z` (`z > 0`, `p > 1`, `p != 2`) by
/// Newton from `guess`, returning `(t, t^{p-1})`.
///
/// `φ(t) = t + wp t^{p-1} - z` is concave for `p < 2` and convex for `p > 2`,
/// so after the first step the iterates approach the root monotonically from
/// one side. Falls back to [`prox_power_magnitude`] if the iteration leaves
/// the positive axis or stalls.
fn prox_root_from(z: f64, weight: f64, p: f64, guess: f64) -> (f64, f64) {
    let wp = weight * p;
    let pm1 = p - 1.0;
    let mut t = if guess > 0.0 && guess.is_finite() {
        guess.min(z)
    } else {
        0.5 * z
    };
    for _ in 0..60 {
        let s = (pm1 * t.ln()).exp();
        let f = t + wp * s - z;
        if f.abs() <= 2.0 * f64::EPSILON * z {
            return (t, s);
        }
        let next = t - f / (1.0 + wp * pm1 * s / t);
        if !(next > 0.0) {
            break;
        }
        let step = (next - t) / t;
        if step.abs() <= NEWTON_QUADRATIC_STEP {
            // Quadratic convergence leaves `next` within rounding of the
            // root; first order in `step` is exact enough for `t^{p-1}`.
            return (next, s * (1.0 + pm1 * step));
        }
        t = next;
    }
    let t = prox_power_magnitude(z, weight, p);
    (t, abs_pow(t, pm1))
}

/// Per-node constraint kind for the primal update.
#[derive(Clone, Copy, PartialEq)]
enum Node {
    Free,
    Fixed,
}

struct Problem<'a> {
    nx: usize,
    inv_h: f64,
    exps: &'a [f64],
    nodes: Vec<Node>,
    /// Neighbour bits per node: `HAS_X`, `HAS_Y`, `HAS_LEFT`, `HAS_DOWN`.
    links: Vec<u8>,
    mode: GradientMode,
}

const HAS_X: u8 = 1;
const HAS_Y: u8 = 2;
const HAS_LEFT: u8 = 4;
const HAS_DOWN: u8 = 8;

fn neighbour_links(nx: usize, ny: usize, dim: usize) -> Vec<u8> {
    let mut links = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let mut b = 0;
            if ix + 1 < nx {
                b |= HAS_X;
            }
            if ix > 0 {
                b |= HAS_LEFT;
            }
            if dim == 2 && iy + 1 < ny {
                b |= HAS_Y;
            }
            if dim == 2 && iy > 0 {
                b |= HAS_DOWN;
            }
            links.push(b);
        }
    }
    links
}

#[inline]
fn magnitude(d: [f64; 2]) -> f64 {
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

impl Problem<'_> {
    #[inline]
    fn grad(&self, u: &[f64], i: usize) -> [f64; 2] {
        let l = self.links[i];
        let dx = if l & HAS_X != 0 {
            (u[i + 1] - u[i]) * self.inv_h
        } else {
            0.0
        };
        let dy = if l & HAS_Y != 0 {
            (u[i + self.nx] - u[i]) * self.inv_h
        } else {
            0.0
        };
        [dx, dy]
    }

    /// `(∇_h^T y)_j`, the negative discrete divergence.
    #[inline]
    fn grad_adjoint(&self, y: &[[f64; 2]], j: usize) -> f64 {
        let l = self.links[j];
        let mut s = -y[j][0] - y[j][1];
        if l & HAS_LEFT != 0 {
            s += y[j - 1][0];
        }
        if l & HAS_DOWN != 0 {
            s += y[j - self.nx][1];
        }
        s * self.inv_h
    }

    /// Normalised gradient energy at a node.
    #[inline]
    fn flux_energy(&self, d: [f64; 2], p: f64) -> f64 {
        match self.mode {
            GradientMode::Isotropic => abs_pow(magnitude(d), p),
            GradientMode::Anisotropic => abs_pow(d[0], p) + abs_pow(d[1], p),
        }
    }

    fn energy(&self, u: &[f64], weight: f64) -> EnergyBreakdown {
        let (mut leb, mut grad, mut tv) = (0.0, 0.0, 0.0);
        for i in 0..u.len() {
            let p = self.exps[i];
            leb += abs_pow(u[i], p);
            let e = self.flux_energy(self.grad(u, i), p);
            if p == 1.0 {
                tv += e;
            } else {
                grad += e;
            }
        }
        EnergyBreakdown::new(leb * weight, grad * weight, tv * weight)
    }

    fn primal_value(&self, u: &[f64]) -> f64 {
        (0..u.len())
            .map(|i| abs_pow(u[i], self.exps[i]) + self.flux_energy(self.grad(u, i), self.exps[i]))
            .sum()
    }

    /// Dual objective `-Σ G*(-∇^T y) - Σ F*(y)`; `-inf` if `y` is infeasible.
    fn dual_value(&self, y: &[[f64; 2]]) -> f64 {
        let mut total = 0.0;
        for j in 0..y.len() {
            let v = -self.grad_adjoint(y, j);
            let p = self.exps[j];
            total -= match self.nodes[j] {
                Node::Fixed => v - 1.0,
                Node::Free => box_power_conjugate(v, p),
            };
            let fc = match self.mode {
                GradientMode::Isotropic => power_conjugate(magnitude(y[j]), p),
                GradientMode::Anisotropic => {
                    power_conjugate(y[j][0].abs(), p) + power_conjugate(y[j][1].abs(), p)
                }
            };
            total -= fc;
        }
        total
    }

    /// Prox of `σ F*` for `F = |·|^p` in magnitude form (`a >= 0`).
    ///
    /// `inner` carries the root of the previous call at this node as a Newton
    /// start and is updated in place.
    #[inline]
    fn dual_prox(&self, a: f64, sigma: f64, p: f64, inner: &mut f64) -> f64 {
        if p == 1.0 {
            a.min(1.0)
        } else if p == 2.0 {
            a / (1.0 + 0.5 * sigma)
        } else if a == 0.0 {
            *inner = 0.0;
            0.0
        } else {
            // Moreau: prox_{σF*}(a) = ∇F(prox_{F/σ}(a/σ))
            let (t, s) = prox_root_from(a / sigma, 1.0 / sigma, p, *inner);
            *inner = t;
            p * s
        }
    }
}

/// Conjugate of `|·|^p` at magnitude `s`.
#[inline]
fn power_conjugate(s: f64, p: f64) -> f64 {
    if p == 1.0 {
        if s <= 1.0 + 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else if s == 0.0 {
        0.0
    } else {
        (p - 1.0) * abs_pow(s / p, p / (p - 1.0))
    }
}

/// `sup_{0 <= t <= 1} (v t - t^p)`.
#[inline]
fn box_power_conjugate(v: f64, p: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return (v - 1.0).max(0.0);
    }
    let t = abs_pow(v / p, 1.0 / (p - 1.0)).min(1.0);
    v * t - abs_pow(t, p)
}

fn norm2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimises `modular(u) + relaxed gradient modular(u)` subject to
/// `0 <= u <= 1` and `u = 1` on `fixed_one`.
///
/// Always returns the last iterate; `converged` in the certificate tells
/// whether the gap or change target was met within `max_iters`.
pub fn minimize_capacity_energy(
    field: &ExponentField,
    fixed_one: &RegionMask,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveCertificate)> {
    let grid = *field.grid();
    grid.check_same(fixed_one.grid(), "exponent vs fixed set")?;
    let (tau, sigma) = cfg.steps(&grid)?;
    let n = grid.len();
    let problem = Problem {
        nx: grid.nx(),
        inv_h: 1.0 / grid.spacing(),
        exps: field.values(),
        nodes: fixed_one
            .bits()
            .iter()
            .map(|&b| if b { Node::Fixed } else { Node::Free })
            .collect(),
        links: neighbour_links(grid.nx(), grid.ny(), grid.dim()),
        mode: cfg.mode,
    };
    let weight = grid.cell_measure();

    let mut u: Vec<f64> = fixed_one
        .bits()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let mut u_bar = u.clone();
    let mut u_prev = vec![0.0; n];
    let mut y = vec![[0.0f64; 2]; n];
    let mut inner = vec![[0.0f64; 2]; n];
    let mut trace = Vec::new();

    let mut cert = SolveCertificate {
        iterations: 0,
        final_gap: f64::INFINITY,
        final_gap_abs: f64::INFINITY,
        final_change: f64::INFINITY,
        converged: false,
        energy: EnergyBreakdown::default(),
        mode: cfg.mode,
        objective_trace: Vec::new(),
    };

    let mut next_check = 1;
    for k in 1..=cfg.max_iters {
        let check = k == next_check || k == cfg.max_iters;
        // dual ascent on the gradient term
        let mut dy_sq = 0.0;
        let mut y_sq = 0.0;
        for i in 0..n {
            let g = problem.grad(&u_bar, i);
            let a = [y[i][0] + sigma * g[0], y[i][1] + sigma * g[1]];
            let p = problem.exps[i];
            let new = match problem.mode {
                GradientMode::Isotropic => {
                    let m = magnitude(a);
                    if m == 0.0 {
                        [0.0, 0.0]
                    } else {
                        let s = problem.dual_prox(m, sigma, p, &mut inner[i][0]) / m;
                        [a[0] * s, a[1] * s]
                    }
                }
                GradientMode::Anisotropic => [
                    problem
                        .dual_prox(a[0].abs(), sigma, p, &mut inner[i][0])
                        .copysign(a[0]),
                    problem
                        .dual_prox(a[1].abs(), sigma, p, &mut inner[i][1])
                        .copysign(a[1]),
                ],
            };
            dy_sq += (new[0] - y[i][0]).powi(2) + (new[1] - y[i][1]).powi(2);
            y_sq += new[0] * new[0] + new[1] * new[1];
            y[i] = new;
        }

        // primal descent with box and equality constraints
        u_prev.copy_from_slice(&u);
        for j in 0..n {
            u[j] = match problem.nodes[j] {
                Node::Fixed => 1.0,
                Node::Free => {
                    let v = u_prev[j] - tau * problem.grad_adjoint(&y, j);
                    if v <= 0.0 {
                        0.0
                    } else {
                        let p = problem.exps[j];
                        if p == 1.0 || p == 2.0 {
                            prox_power(v, tau, p).min(1.0)
                        } else {
                            prox_root_from(v, tau, p, u_prev[j]).0.min(1.0)
                        }
                    }
                }
            };
        }
        for j in 0..n {
            u_bar[j] = 2.0 * u[j] - u_prev[j];
        }

        let du = norm2(u.iter().zip(&u_prev).map(|(a, b)| a - b));
        let un = norm2(u.iter().copied());
        let rel_u = if du == 0.0 {
            0.0
        } else {
            du / un.max(f64::MIN_POSITIVE)
        };
        let rel_y = if dy_sq == 0.0 {
            0.0
        } else {
            (dy_sq / y_sq.max(f64::MIN_POSITIVE)).sqrt()
        };
        cert.final_change = rel_u.max(rel_y);
        cert.iterations = k;
        if cfg.record_trace {
            trace.push(problem.primal_value(&u) * weight);
        }

        if check {
            let primal = problem.primal_value(&u);
            let dual = problem.dual_value(&y);
            let gap = primal - dual;
            if gap.is_finite() {
                let gap = gap.max(0.0);
                cert.final_gap_abs = gap * weight;
                cert.final_gap = if gap == 0.0 {
                    0.0
                } else {
                    gap / primal.abs().max(f64::MIN_POSITIVE)
                };
            } else {
                cert.final_gap_abs = f64::INFINITY;
                cert.final_gap = f64::INFINITY;
            }
            if cert.final_gap <= cfg.tol_gap || (k > 1 && cert.final_change <= cfg.tol_change) {
                cert.converged = true;
                break;
            }
            let period = if cert.final_gap > 100.0 * cfg.tol_gap {
                4 * cfg.gap_every
            } else {
                cfg.gap_every
            };
            next_check = (k / cfg.gap_every) * cfg.gap_every + period;
        }
    }

    cert.energy = problem.energy(&u, weight);
    cert.objective_trace = trace;
    Ok((GridFunction::from_vec_unchecked(&grid, u), cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(z: f64, w: f64, p: f64, t: f64) -> f64 {
        let r = if p == 1.0 {
            if t == 0.0 {
                (z.abs() - w).max(0.0)
            } else {
                (z - t - w * t.signum()).abs()
            }
        } else {
            (z - t - w * p * t.abs().powf(p - 1.0) * t.signum()).abs()
        };
        r / z.abs().max(1.0)
    }

    #[test]
    fn prox_closed_forms() {
        for &z in &[-3.0, -0.2, 0.0, 0.7, 5.0] {
            for &w in &[0.0, 0.1, 1.0, 4.0] {
                assert_eq!(prox_power(z, w, 2.0), z / (1.0 + 2.0 * w));
                let soft = z.signum() * (z.abs() - w).max(0.0);
                assert_eq!(prox_power(z, w, 1.0), soft);
            }
        }
    }

    #[test]
    fn prox_three_halves_against_grid_search() {
        let t = prox_power(2.0, 1.0, 1.5);
        assert!(residual(2.0, 1.0, 1.5, t) <= 1e-13);
        // Oracle: dense search of |t|^1.5 + (t - 2)^2 / 2 on [0, 2].
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=2_000_000 {
            let s = k as f64 * 1e-6;
            let f = s.powf(1.5) + 0.5 * (s - 2.0) * (s - 2.0);
            if f < best.0 {
                best = (f, s);
            }
        }
        assert!((t - best.1).abs() < 2e-6, "{t} vs {}", best.1);
        // closed form via s = sqrt(t): s^2 + 1.5 s - 2 = 0
        let s = (-1.5 + (2.25f64 + 8.0).sqrt()) / 2.0;
        assert!((t - s * s).abs() < 1e-14);
    }

    #[test]
    fn prox_shrinks_and_keeps_sign() {
        for &p in &[1.0, 1.05, 1.3, 1.7, 2.0, 2.5, 4.0] {
            for &z in &[-7.0, -1.0, -1e-3, 1e-6, 0.4, 3.0, 100.0] {
                for &w in &[1e-4, 0.3, 2.0, 50.0] {
                    let t = prox_power(z, w, p);
                    assert!(t.abs() <= z.abs());
                    assert!(t == 0.0 || t.signum() == z.signum());
                    assert!(residual(z, w, p, t) <= 1e-12, "z={z} w={w} p={p} t={t}");
                }
            }
        }
    }

    #[test]
    fn invalid_steps_are_rejected() {
        let g = Grid::line(0.0, 1.0, 0.01).unwrap();
        let mut cfg = SolverConfig {
            tau: Some(1.0),
            sigma: Some(1.0),
            ..Default::default()
        };
        assert!(cfg.steps(&g).is_err());
        cfg.tau = Some(-1.0);
        assert!(cfg.steps(&g).is_err());
        let cfg = SolverConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(cfg.steps(&g).is_err());
        let (t, s) = SolverConfig::default().steps(&g).unwrap();
        assert!((t * s * SolverConfig::operator_norm_bound(&g).powi(2) - 0.9801).abs() < 1e-12);
    }

    #[test]
    fn empty_fixed_set_is_trivial() {
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 0.05).unwrap();
        let p = ExponentField::from_fn(&g, |x| 1.0 + x[0]).unwrap();
        let (u, cert) =
            minimize_capacity_energy(&p, &RegionMask::empty(&g), &SolverConfig::default()).unwrap();
        assert!(cert.converged);
        assert!(cert.iterations <= 2);
        assert_eq!(cert.energy.total, 0.0);
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_fixed_set_gives_measure() {
        let g = Grid::line(0.0, 1.0, 0.01).unwrap();
        let p = ExponentField::from_fn(&g, |x| 1.0 + 3.0 * x[0]).unwrap();
        let (u, cert) =
            minimize_capacity_energy(&p, &RegionMask::full(&g), &SolverConfig::default()).unwrap();
        assert!(cert.converged);
        assert!(u.values().iter().all(|&v| v == 1.0));
        assert!((cert.energy.total - g.measure()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_masks_are_rejected() {
        let g = Grid::line(0.0, 1.0, 0.01).unwrap();
        let other = Grid::line(0.0, 2.0, 0.01).unwrap();
        let p = ExponentField::constant(&g, 2.0).unwrap();
        assert!(
            minimize_capacity_energy(&p, &RegionMask::full(&other), &SolverConfig::default())
                .is_err()
        );
    }
}
