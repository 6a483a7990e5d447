//! One test per acceptance criterion. Each prints a single `PASS` / `FAIL`
//! line with the measured quantities, then asserts.
//!
//! Criteria run one at a time behind a lock so their wall-clock budgets are
//! not inflated by each other.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vexcap_core::bv::{coarea_sum, total_variation};
use vexcap_core::capacity::MeasuredCapacity;
use vexcap_core::lebesgue::{luxemburg_norm, modular, ROOT_RESIDUAL};
use vexcap_core::mixed::{equivalence_ratio, lattice_defect, relaxation_probe, ProbeOptions};
use vexcap_core::*;
use vexcap_validation::{dp_capacity_p1, thomas_capacity_p2};

static SERIAL: Mutex<()> = Mutex::new(());

fn run(id: &str, budget: Duration, body: impl FnOnce() -> (bool, String)) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_budget = elapsed <= budget;
    let pass = ok && in_budget;
    // straight to stderr so the line survives the test harness's output capture
    let _ = writeln!(
        std::io::stderr(),
        "{} {id}: {detail}; runtime {:.2}s (budget {}s{})",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_budget { "" } else { ", exceeded" }
    );
    assert!(pass, "{id} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn c01_one_dimensional_capacity_reference() {
    let g = Grid::line(-5.0, 5.0, 1e-3).unwrap();
    let e = RegionMask::interval(&g, -0.5, 0.5);
    let radius = 2.0 * g.spacing();
    let fixed = e.dilate(radius).unwrap();
    for (p, rel_tol) in [(2.0, 0.02), (1.0, 0.03)] {
        run(
            &format!("c01 1d capacity p={p}"),
            Duration::from_secs(30),
            || {
                let f = ExponentField::constant(&g, p).unwrap();
                let r = capacity(
                    &e,
                    &f,
                    CapacityKind::Mixed,
                    radius,
                    &SolverConfig::default(),
                )
                .unwrap();
                let oracle = if p == 2.0 {
                    thomas_capacity_p2(&g, &fixed)
                } else {
                    dp_capacity_p1(&g, &fixed, 8)
                };
                let slack = r.certificate.slack() + 1e-9 * oracle;
                let ok = rel(r.value, 3.0) <= rel_tol
                    && r.value >= oracle - slack
                    && r.value <= oracle + 2.0 * slack + 1e-6
                    && r.certificate.converged;
                (
                ok,
                format!(
                    "value {:.6} vs 3.0 (rel {:.4}, tol {rel_tol}); discrete oracle {oracle:.6}; gap {:.2e}",
                    r.value,
                    rel(r.value, 3.0),
                    r.certificate.final_gap_abs
                ),
            )
            },
        );
    }
}

#[test]
fn c02_luxemburg_norm_constant_exponent() {
    run(
        "c02 luxemburg constant-p reduction",
        Duration::from_secs(5),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut worst_rel: f64 = 0.0;
            let mut worst_res: f64 = 0.0;
            for case in 0..50 {
                let g = if case % 2 == 0 {
                    Grid::line(0.0, rng.gen_range(0.5..3.0), rng.gen_range(1e-3..2e-2)).unwrap()
                } else {
                    let h = rng.gen_range(0.02..0.05);
                    Grid::rect((0.0, 1.0), (-0.5, rng.gen_range(0.5..1.5)), h).unwrap()
                };
                let q = rng.gen_range(1.0..5.0);
                let amp = 10f64.powf(rng.gen_range(-3.0..3.0));
                let u = GridFunction::new(
                    &g,
                    (0..g.len())
                        .map(|_| amp * rng.gen_range(-1.0..1.0))
                        .collect(),
                )
                .unwrap();
                let f = ExponentField::constant(&g, q).unwrap();
                let lam = luxemburg_norm(&u, &f).unwrap();
                let closed = (u.values().iter().map(|v| v.abs().powf(q)).sum::<f64>()
                    * g.cell_measure())
                .powf(1.0 / q);
                worst_rel = worst_rel.max(rel(lam, closed));
                let res =
                    (modular(&u.scale(1.0 / lam), &f, &RegionMask::full(&g)).unwrap() - 1.0).abs();
                worst_res = worst_res.max(res);
            }
            (
            worst_rel <= 1e-9 && worst_res <= ROOT_RESIDUAL,
            format!("50 cases, worst relative error {worst_rel:.2e} (tol 1e-9), worst residual {worst_res:.2e} (tol 1e-10)"),
        )
        },
    );
}

#[test]
fn c03_discrete_coarea() {
    run("c03 discrete coarea", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 1.0 / 127.0).unwrap();
        assert_eq!(g.len(), 128 * 128);
        let full = RegionMask::full(&g);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            // sum of a few weighted random rectangles
            let mut v = vec![0.0; g.len()];
            for _ in 0..rng.gen_range(1..8) {
                let (x0, x1) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let (y0, y1) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let w = rng.gen_range(-2.0..2.0);
                let b = RegionMask::boxed(
                    &g,
                    (f64::min(x0, x1), f64::max(x0, x1)),
                    (f64::min(y0, y1), f64::max(y0, y1)),
                );
                for i in b.indices() {
                    v[i] += w;
                }
            }
            let u = GridFunction::new(&g, v).unwrap();
            let tv = total_variation(&u, &full, GradientMode::Anisotropic).unwrap();
            let co = coarea_sum(&u, &full, GradientMode::Anisotropic).unwrap();
            if tv > 0.0 {
                worst = worst.max(rel(co, tv));
            } else {
                worst = worst.max(co.abs());
            }
        }
        (
            worst <= 1e-10,
            format!("20 fields on 128², worst relative mismatch {worst:.2e} (tol 1e-10)"),
        )
    });
}

#[test]
fn c04_lattice_lemma() {
    run("c04 lattice lemma", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 1.0 / 31.0).unwrap();
        let mut worst = f64::NEG_INFINITY;
        let mut kinds = [0usize; 3];
        for case in 0..100 {
            let f = {
                let (a, k) = (rng.gen_range(0.0..2.0), rng.gen_range(0.5..4.0));
                ExponentField::from_fn(&g, |x| 1.0 + a * (0.5 + 0.5 * (k * x[0] + x[1]).sin()))
                    .unwrap()
            };
            let random = |rng: &mut ChaCha8Rng| -> GridFunction {
                GridFunction::new(&g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap()
            };
            let (u, v) = match case % 3 {
                0 => (random(&mut rng), random(&mut rng)),
                1 => {
                    let u = random(&mut rng);
                    let v = u.map(|x| x - 0.5);
                    (u, v)
                }
                _ => {
                    let a = RegionMask::boxed(&g, (0.0, 0.4), (0.0, 1.0));
                    let b = RegionMask::boxed(&g, (0.6, 1.0), (0.0, 1.0));
                    let mut u = random(&mut rng).into_values();
                    let mut v = random(&mut rng).into_values();
                    for i in 0..g.len() {
                        if !a.contains(i) {
                            u[i] = 0.0;
                        }
                        if !b.contains(i) {
                            v[i] = 0.0;
                        }
                    }
                    (
                        GridFunction::new(&g, u).unwrap(),
                        GridFunction::new(&g, v).unwrap(),
                    )
                }
            };
            kinds[case % 3] += 1;
            worst = worst.max(lattice_defect(&u, &v, &f).unwrap());
        }
        (
            worst <= 1e-12,
            format!(
                "100 pairs ({} crossing, {} nested, {} disjoint support), largest defect {worst:.3e} (tol 1e-12)",
                kinds[0], kinds[1], kinds[2]
            ),
        )
    });
}

fn random_box(rng: &mut ChaCha8Rng, g: &Grid) -> RegionMask {
    let w = rng.gen_range(0.1..0.45);
    let hgt = rng.gen_range(0.1..0.45);
    let x0 = rng.gen_range(0.1..0.9 - w);
    let y0 = rng.gen_range(0.1..0.9 - hgt);
    RegionMask::boxed(g, (x0, x0 + w), (y0, y0 + hgt))
}

fn sine_field(g: &Grid) -> ExponentField {
    ExponentField::from_fn(g, |x| 1.5 + 0.4 * (std::f64::consts::PI * x[0]).sin()).unwrap()
}

fn worst_gap(values: &[MeasuredCapacity]) -> f64 {
    values.iter().map(|v| v.gap_abs).fold(0.0, f64::max)
}

#[test]
fn c05_strong_subadditivity() {
    run("c05 strong subadditivity", Duration::from_secs(300), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 1.0 / 63.0).unwrap();
        let f = sine_field(&g);
        let mut worst = f64::NEG_INFINITY;
        let mut failures = 0;
        let mut gaps: f64 = 0.0;
        for _ in 0..20 {
            let family = vec![random_box(&mut rng, &g), random_box(&mut rng, &g)];
            let sc = AxiomScenario::new(f.clone(), family, g.spacing());
            let r = check_capacity_axioms(Axiom::StrongSubadditivity, &sc).unwrap();
            worst = worst.max(r.margin - r.tolerance);
            gaps = gaps.max(worst_gap(&r.values));
            failures += usize::from(!r.pass);
        }
        (
            failures == 0,
            format!("20 pairs on 64², {failures} violations, worst margin minus tolerance {worst:.3e}, largest gap {gaps:.2e}"),
        )
    });
}

#[test]
fn c06_monotonicity_and_outer_measure() {
    run(
        "c06 monotonicity and outer measure",
        Duration::from_secs(300),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 1.0 / 31.0).unwrap();
            let f = sine_field(&g);
            let mut failures = 0;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..10 {
                let inner = random_box(&mut rng, &g);
                let mid = inner.dilate(rng.gen_range(0.03..0.1)).unwrap();
                let outer = mid.dilate(rng.gen_range(0.03..0.1)).unwrap();
                let nested = AxiomScenario::new(f.clone(), vec![inner, mid, outer], g.spacing());
                let four = AxiomScenario::new(
                    f.clone(),
                    (0..4).map(|_| random_box(&mut rng, &g)).collect(),
                    g.spacing(),
                );
                for sc in [nested, four] {
                    let r = check_capacity_axioms(Axiom::OuterMeasure, &sc).unwrap();
                    worst = worst.max(r.margin - r.tolerance);
                    failures += usize::from(!r.pass);
                }
            }
            (
            failures == 0,
            format!("10 scenarios (nested triple + 4-set family), {failures} failures, worst subadditivity margin minus tolerance {worst:.3e}"),
        )
        },
    );
}

#[test]
fn c07_outer_regularity() {
    run("c07 outer regularity", Duration::from_secs(120), || {
        let g = Grid::line(-5.0, 5.0, 1e-3).unwrap();
        let h = g.spacing();
        let f = ExponentField::constant(&g, 2.0).unwrap();
        let mut sc = AxiomScenario::new(f, vec![RegionMask::interval(&g, -0.5, 0.5)], h);
        sc.radii = vec![8.0 * h, 4.0 * h, 2.0 * h, h];
        let r = check_capacity_axioms(Axiom::OuterRegularity, &sc).unwrap();
        let vals: Vec<String> = r.values.iter().map(|v| format!("{:.6}", v.value)).collect();
        (
            r.pass,
            format!(
                "capacities [{}], Cauchy deficit {:.3e} (tol {:.3e})",
                vals.join(", "),
                r.margin,
                r.tolerance
            ),
        )
    });
}

#[test]
fn c08_relaxation_probe() {
    run("c08 relaxation probe", Duration::from_secs(60), || {
        let g = Grid::line(0.0, 1.0, 1e-3).unwrap();
        let probe = RegionMask::interval(&g, 0.1, 0.9);
        let deltas = [0.08, 0.04, 0.02, 0.01, 0.005, 0.0025];
        let opts = ProbeOptions::default();

        let step = GridFunction::from_fn(&g, |x| if x[0] > 0.5 + 1e-9 { 1.0 } else { 0.0 });
        let p_step = ExponentField::from_fn(&g, |x| 1.0 + (x[0] - 0.5).abs()).unwrap();
        let c = p_step.log_holder_constant().unwrap().constant;
        let a = relaxation_probe(&step, &p_step, &probe, &deltas, &opts).unwrap();

        let smooth = GridFunction::from_fn(&g, |x| {
            (2.0 * std::f64::consts::PI * x[0]).sin() + 0.5 * x[0]
        });
        let p_smooth = ExponentField::from_fn(&g, |x| 1.6 + 0.3 * (3.0 * x[0]).cos()).unwrap();
        let b = relaxation_probe(&smooth, &p_smooth, &probe, &deltas, &opts).unwrap();

        let ok =
            a.upper_ok && a.c_observed <= (3.0 * c).exp() && (0.98..=1.02).contains(&b.c_observed);
        (
            ok,
            format!(
                "step: C_observed {:.4} <= exp(3c) = {:.4}, upper_ok {}; smooth: C_observed {:.5} in [0.98, 1.02]",
                a.c_observed,
                (3.0 * c).exp(),
                a.upper_ok,
                b.c_observed
            ),
        )
    });
}

#[test]
fn c09_equivalence_probe() {
    run("c09 equivalence probe", Duration::from_secs(120), || {
        let mut ok = true;
        let mut worst: f64 = 1.0;
        let mut bound: f64 = f64::INFINITY;
        for h in [1e-2, 1e-3, 1e-4] {
            let g = Grid::line(0.0, 1.0, h).unwrap();
            let family: Vec<(GridFunction, ExponentField)> = vec![
                (
                    GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin()),
                    ExponentField::from_fn(&g, |x| 1.5 + 0.25 * (4.0 * x[0]).sin()).unwrap(),
                ),
                (
                    GridFunction::from_fn(&g, |x| if x[0] > 0.5 + 1e-9 { 1.0 } else { 0.0 }),
                    ExponentField::constant(&g, 1.0).unwrap(),
                ),
                (
                    GridFunction::from_fn(&g, |x| if x[0] > 0.5 + 1e-9 { 1.0 } else { 0.0 }),
                    ExponentField::from_fn(&g, |x| 1.0 + (x[0] - 0.5).abs()).unwrap(),
                ),
            ];
            for (u, p) in &family {
                let r =
                    equivalence_ratio(u, p, DEFAULT_EQ_TOL, GradientMode::Isotropic, 3.0).unwrap();
                ok &= r.within_bounds;
                if (r.ratio - 1.0).abs() > (worst - 1.0).abs() {
                    worst = r.ratio;
                }
                bound = bound.min((3.0 * r.log_holder_c).exp());
            }
        }
        (ok, format!("9 cases over h in {{1e-2, 1e-3, 1e-4}}, ratio furthest from 1 is {worst:.6}, tightest bound exp(3c) = {bound:.4}"))
    });
}

#[test]
fn c10_null_set_trend() {
    run("c10 null-set trend", Duration::from_secs(600), || {
        let g = Grid::rect((-1.0, 1.0), (-1.0, 1.0), 2.0 / 511.0).unwrap();
        assert_eq!(g.len(), 512 * 512);
        let f = ExponentField::constant(&g, 2.0).unwrap();
        let radii = [0.2, 0.1, 0.05, 0.02];
        let family = radii
            .iter()
            .map(|&r| RegionMask::ball(&g, [0.0, 0.0], r))
            .collect();
        let sc = AxiomScenario::new(f, family, g.spacing());
        let r = check_capacity_axioms(Axiom::NullEquivalence, &sc).unwrap();
        let n = radii.len();
        let mixed: Vec<String> = r.values[..n]
            .iter()
            .map(|v| format!("{:.4}", v.value))
            .collect();
        let sobolev: Vec<String> = r.values[n..]
            .iter()
            .map(|v| format!("{:.4}", v.value))
            .collect();
        (
            r.pass,
            format!(
                "radii {radii:?}; mixed [{}]; sobolev [{}]; smallest {:.4} vs threshold {}",
                mixed.join(", "),
                sobolev.join(", "),
                r.lhs,
                r.rhs
            ),
        )
    });
}

#[test]
fn c11_solver_unit_contracts() {
    run("c11 prox contracts", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst_res: f64 = 0.0;
        for _ in 0..10_000 {
            let z: f64 = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..3.0));
            let w = 10f64.powf(rng.gen_range(-3.0..2.0));
            let p = match rng.gen_range(0..10) {
                0 => 1.0,
                1 => 2.0,
                _ => rng.gen_range(1.05..4.0),
            };
            let t = prox_power(z, w, p);
            let res = if p == 1.0 {
                // subgradient condition for the soft threshold
                if t == 0.0 {
                    (z.abs() - w).max(0.0)
                } else {
                    (t - z + w * t.signum()).abs()
                }
            } else {
                (t - z + w * p * t.abs().powf(p - 1.0) * t.signum()).abs()
            };
            worst_res = worst_res.max(res / z.abs().max(1.0));
        }
        let mut worst_closed: f64 = 0.0;
        for _ in 0..10_000 {
            let z: f64 = rng.gen_range(-50.0..50.0);
            let w = rng.gen_range(0.0..10.0);
            let soft = z.signum() * (z.abs() - w).max(0.0);
            worst_closed = worst_closed.max((prox_power(z, w, 1.0) - soft).abs());
            worst_closed = worst_closed.max((prox_power(z, w, 2.0) - z / (1.0 + 2.0 * w)).abs());
        }
        (
            worst_res <= 1e-12 && worst_closed <= 1e-14,
            format!("10^4 triples, worst scaled residual {worst_res:.2e} (tol 1e-12); closed forms worst {worst_closed:.2e} (tol 1e-14)"),
        )
    });
}

#[test]
fn example_disk_perimeter() {
    run("example disk perimeter", Duration::from_secs(10), || {
        // Isotropic perimeter of a disk against 2πr, target 3% at h = r/100.
        let r = 0.3;
        let exact = 2.0 * std::f64::consts::PI * r;
        let mut errors = Vec::new();
        for &h in &[r / 25.0, r / 50.0, r / 100.0] {
            let g = Grid::rect((-0.5, 0.5), (-0.5, 0.5), h).unwrap();
            let disk = RegionMask::ball(&g, [0.0, 0.0], r);
            let per =
                vexcap_core::bv::perimeter(&disk, &RegionMask::full(&g), GradientMode::Isotropic)
                    .unwrap();
            errors.push(rel(per, exact));
        }
        (
            errors[2] <= 0.03,
            format!("relative errors at h = r/25, r/50, r/100: {errors:.4?} (tol 0.03 at r/100)"),
        )
    });
}
