//! Reference values computed without the primal-dual solver.
//!
//! Both oracles work on a 1D grid and take the fixed set `u = 1` directly,
//! so they see exactly the discrete problem the solver is given.

use vexcap_core::{Grid, RegionMask};

/// Discrete 1D capacity for p = 2 by a direct tridiagonal solve:
/// minimise `Σ h u² + Σ (u_{i+1} - u_i)² / h` with `u = 1` on the fixed nodes.
/// The free nodes split into independent runs with Dirichlet data from the
/// fixed set and natural ends at the domain boundary.
pub fn thomas_capacity_p2(g: &Grid, fixed: &RegionMask) -> f64 {
    let n = g.len();
    let h = g.spacing();
    // Normal equations of the quadratic, with fixed nodes as identity rows.
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        if fixed.contains(i) {
            b[i] = 1.0;
            d[i] = 1.0;
            continue;
        }
        b[i] = 2.0 * h;
        if i > 0 {
            b[i] += 2.0 / h;
            a[i] = -2.0 / h;
        }
        if i + 1 < n {
            b[i] += 2.0 / h;
            c[i] = -2.0 / h;
        }
    }
    for i in 1..n {
        let m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    let mut u = vec![0.0; n];
    u[n - 1] = d[n - 1] / b[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = (d[i] - c[i] * u[i + 1]) / b[i];
    }
    let leb: f64 = u.iter().map(|v| v * v * h).sum();
    let grad: f64 = u.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum();
    leb + grad
}

/// Discrete 1D capacity for p = 1 by dynamic programming over `levels + 1`
/// equally spaced values in `[0, 1]`:
/// minimise `Σ h |u_i| + Σ |u_{i+1} - u_i|` with `u = 1` on the fixed nodes.
pub fn dp_capacity_p1(g: &Grid, fixed: &RegionMask, levels: usize) -> f64 {
    let h = g.spacing();
    let vals: Vec<f64> = (0..=levels).map(|k| k as f64 / levels as f64).collect();
    let allowed = |i: usize, k: usize| !fixed.contains(i) || k == levels;
    let mut cost: Vec<f64> = vals
        .iter()
        .enumerate()
        .map(|(k, &v)| if allowed(0, k) { h * v } else { f64::INFINITY })
        .collect();
    for i in 1..g.len() {
        let next: Vec<f64> = (0..=levels)
            .map(|k| {
                if !allowed(i, k) {
                    return f64::INFINITY;
                }
                let best = (0..=levels)
                    .map(|j| cost[j] + (vals[k] - vals[j]).abs())
                    .fold(f64::INFINITY, f64::min);
                best + h * vals[k]
            })
            .collect();
        cost = next;
    }
    cost.into_iter().fold(f64::INFINITY, f64::min)
}
