//! Capacities of grid sets and finite-family checks of the capacity axioms.
//!
//! `C(E) = inf { ρ(u) + ρ̃(∇u) : 0 <= u <= 1, u = 1 on a neighbourhood of E }`
//! where the neighbourhood is the closed dilation of `E` by a radius of at
//! least one grid step.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config, domain, Result};
use crate::exponent::ExponentField;
use crate::grid::{Grid, GridFunction, RegionMask};
use crate::solver::{minimize_capacity_energy, SolveCertificate, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityKind {
    /// Gradient term is the relaxed mixed pseudo-modular.
    Mixed,
    /// Gradient term is `|∇u|^{p(x)}`.
    Sobolev,
}

impl CapacityKind {
    pub fn name(self) -> &'static str {
        match self {
            CapacityKind::Mixed => "mixed",
            CapacityKind::Sobolev => "sobolev",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub value: f64,
    #[serde(skip)]
    pub minimizer: GridFunction,
    pub certificate: SolveCertificate,
    pub kind: CapacityKind,
    pub neighborhood_radius: f64,
    pub grid: Grid,
}

/// Capacity of `set` with the constraint imposed on its dilation by `radius`.
///
/// On a grid the relaxed mixed pseudo-modular of a nodal function is its
/// discrete gradient modular, so both kinds minimise the same functional and
/// differ only in labelling.
pub fn capacity(
    set: &RegionMask,
    field: &ExponentField,
    kind: CapacityKind,
    radius: f64,
    cfg: &SolverConfig,
) -> Result<CapacityResult> {
    let grid = *field.grid();
    grid.check_same(set.grid(), "capacity: set vs exponent")?;
    let h = grid.spacing();
    if !(radius >= h * (1.0 - 1e-9)) {
        return domain(format!(
            "neighbourhood radius {radius} is below the grid step {h}"
        ));
    }
    let fixed = set.dilate(radius)?;
    let (minimizer, certificate) = minimize_capacity_energy(field, &fixed, cfg)?;
    Ok(CapacityResult {
        value: certificate.energy.total,
        minimizer,
        certificate,
        kind,
        neighborhood_radius: radius,
        grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    OuterMeasure,
    IncreasingSets,
    OuterRegularity,
    DecreasingCompacts,
    StrongSubadditivity,
    NullEquivalence,
}

impl Axiom {
    pub const ALL: [Axiom; 6] = [
        Axiom::OuterMeasure,
        Axiom::IncreasingSets,
        Axiom::OuterRegularity,
        Axiom::DecreasingCompacts,
        Axiom::StrongSubadditivity,
        Axiom::NullEquivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::OuterMeasure => "outer_measure",
            Axiom::IncreasingSets => "increasing_sets",
            Axiom::OuterRegularity => "outer_regularity",
            Axiom::DecreasingCompacts => "decreasing_compacts",
            Axiom::StrongSubadditivity => "strong_subadd",
            Axiom::NullEquivalence => "null_equivalence",
        }
    }

    pub fn parse(s: &str) -> Option<Axiom> {
        Axiom::ALL.into_iter().find(|a| a.name() == s)
    }
}

/// Inputs of an axiom check.
///
/// `family` is interpreted per axiom: arbitrary sets (outer measure), an
/// increasing chain, a decreasing chain of compacts, exactly two sets
/// (strong subadditivity), one set swept over `radii` (outer regularity),
/// or a shrinking chain (null equivalence).
#[derive(Debug, Clone)]
pub struct AxiomScenario {
    pub field: ExponentField,
    pub family: Vec<RegionMask>,
    pub radius: f64,
    /// Neighbourhood radii for outer regularity, strictly decreasing.
    pub radii: Vec<f64>,
    pub kind: CapacityKind,
    pub solver: SolverConfig,
    pub axiom_tol: f64,
    pub null_threshold: f64,
    pub agreement_rel_tol: f64,
    /// Run the independent solves of a check on the rayon pool.
    pub parallel: bool,
}

impl AxiomScenario {
    pub fn new(field: ExponentField, family: Vec<RegionMask>, radius: f64) -> AxiomScenario {
        AxiomScenario {
            field,
            family,
            radius,
            radii: Vec::new(),
            kind: CapacityKind::Mixed,
            solver: SolverConfig::default(),
            axiom_tol: 1e-6,
            null_threshold: 0.05,
            agreement_rel_tol: 0.1,
            parallel: true,
        }
    }
}

/// One capacity evaluation that went into a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredCapacity {
    pub label: String,
    pub kind: CapacityKind,
    pub radius: f64,
    pub value: f64,
    pub gap_abs: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed amount by which the checked inequality is violated; for
    /// limits, the distance between the two sides.
    pub margin: f64,
    pub tolerance: f64,
    pub values: Vec<MeasuredCapacity>,
    pub notes: Vec<String>,
}

struct Job {
    label: String,
    set: RegionMask,
    kind: CapacityKind,
    radius: f64,
}

fn run_jobs(sc: &AxiomScenario, jobs: Vec<Job>) -> Result<Vec<MeasuredCapacity>> {
    let solve = |job: &Job| -> Result<MeasuredCapacity> {
        let r = capacity(&job.set, &sc.field, job.kind, job.radius, &sc.solver)?;
        Ok(MeasuredCapacity {
            label: job.label.clone(),
            kind: job.kind,
            radius: job.radius,
            value: r.value,
            gap_abs: r.certificate.slack(),
            iterations: r.certificate.iterations,
            converged: r.certificate.converged,
        })
    };
    if sc.parallel {
        jobs.par_iter().map(solve).collect()
    } else {
        jobs.iter().map(solve).collect()
    }
}

fn union_all(grid: &Grid, sets: &[RegionMask]) -> Result<RegionMask> {
    sets.iter()
        .try_fold(RegionMask::empty(grid), |acc, s| acc.union(s))
}

fn intersection_all(grid: &Grid, sets: &[RegionMask]) -> Result<RegionMask> {
    sets.iter()
        .try_fold(RegionMask::full(grid), |acc, s| acc.intersection(s))
}

/// `axiom_tol + 2 Σ gaps` over the given evaluations.
fn tolerance_for<'a>(
    sc: &AxiomScenario,
    vals: impl IntoIterator<Item = &'a MeasuredCapacity>,
) -> f64 {
    sc.axiom_tol + 2.0 * vals.into_iter().map(|v| v.gap_abs).sum::<f64>()
}

fn unconverged_notes(vals: &[MeasuredCapacity], notes: &mut Vec<String>) {
    for v in vals.iter().filter(|v| !v.converged) {
        notes.push(format!(
            "{} did not converge in {} iterations",
            v.label, v.iterations
        ));
    }
}

fn check_chain(family: &[RegionMask], increasing: bool) -> Result<()> {
    for w in family.windows(2) {
        let ok = if increasing {
            w[0].is_subset(&w[1])?
        } else {
            w[1].is_subset(&w[0])?
        };
        if !ok {
            let what = if increasing {
                "increasing"
            } else {
                "decreasing"
            };
            return config(format!("family is not an {what} chain"));
        }
    }
    Ok(())
}

/// Checks one axiom on the scenario's finite family.
pub fn check_capacity_axioms(axiom: Axiom, sc: &AxiomScenario) -> Result<AxiomReport> {
    let grid = *sc.field.grid();
    for s in &sc.family {
        grid.check_same(s.grid(), "axiom family vs exponent")?;
    }
    if !(sc.axiom_tol >= 0.0) {
        return config("axiom_tol must be non-negative");
    }
    match axiom {
        Axiom::OuterMeasure => outer_measure(sc, &grid),
        Axiom::IncreasingSets => monotone_limit(sc, &grid, true),
        Axiom::DecreasingCompacts => monotone_limit(sc, &grid, false),
        Axiom::OuterRegularity => outer_regularity(sc),
        Axiom::StrongSubadditivity => strong_subadditivity(sc),
        Axiom::NullEquivalence => null_equivalence(sc),
    }
}

fn outer_measure(sc: &AxiomScenario, grid: &Grid) -> Result<AxiomReport> {
    let n = sc.family.len();
    if n == 0 || n > 8 {
        return config(format!("outer measure check takes 1 to 8 sets, got {n}"));
    }
    let union = union_all(grid, &sc.family)?;
    let mut jobs = vec![Job {
        label: "empty".into(),
        set: RegionMask::empty(grid),
        kind: sc.kind,
        radius: sc.radius,
    }];
    for (i, s) in sc.family.iter().enumerate() {
        jobs.push(Job {
            label: format!("set{i}"),
            set: s.clone(),
            kind: sc.kind,
            radius: sc.radius,
        });
    }
    jobs.push(Job {
        label: "union".into(),
        set: union.clone(),
        kind: sc.kind,
        radius: sc.radius,
    });
    let vals = run_jobs(sc, jobs)?;
    let empty = &vals[0];
    let sets = &vals[1..=n];
    let whole = &vals[n + 1];
    let mut notes = Vec::new();
    let mut pass = true;

    let empty_tol = tolerance_for(sc, [empty]);
    if empty.value > empty_tol {
        pass = false;
        notes.push(format!("capacity of the empty set is {}", empty.value));
    }
    let mut pairs = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j && sc.family[i].is_subset(&sc.family[j])? {
                pairs += 1;
                let tol = tolerance_for(sc, [&sets[i], &sets[j]]);
                if sets[i].value > sets[j].value + tol {
                    pass = false;
                    notes.push(format!("monotonicity fails for set{i} ⊆ set{j}"));
                }
            }
        }
        let tol = tolerance_for(sc, [&sets[i], whole]);
        if sets[i].value > whole.value + tol {
            pass = false;
            notes.push(format!("monotonicity fails for set{i} ⊆ union"));
        }
    }
    notes.push(format!("{pairs} nested pairs checked for monotonicity"));
    notes.push("countable subadditivity checked on a finite family".into());

    let rhs: f64 = sets.iter().map(|v| v.value).sum();
    let tolerance = tolerance_for(sc, sets.iter().chain([whole]));
    let margin = whole.value - rhs;
    pass &= margin <= tolerance;
    unconverged_notes(&vals, &mut notes);
    Ok(AxiomReport {
        axiom: Axiom::OuterMeasure,
        pass,
        lhs: whole.value,
        rhs,
        margin,
        tolerance,
        values: vals,
        notes,
    })
}

fn monotone_limit(sc: &AxiomScenario, grid: &Grid, increasing: bool) -> Result<AxiomReport> {
    let axiom = if increasing {
        Axiom::IncreasingSets
    } else {
        Axiom::DecreasingCompacts
    };
    if sc.family.len() < 2 {
        return config(format!("{} needs a chain of at least 2 sets", axiom.name()));
    }
    check_chain(&sc.family, increasing)?;
    let (limit_set, limit_label) = if increasing {
        (union_all(grid, &sc.family)?, "union")
    } else {
        (intersection_all(grid, &sc.family)?, "intersection")
    };
    let mut jobs: Vec<Job> = sc
        .family
        .iter()
        .enumerate()
        .map(|(i, s)| Job {
            label: format!("set{i}"),
            set: s.clone(),
            kind: sc.kind,
            radius: sc.radius,
        })
        .collect();
    let last = sc.family.last().unwrap();
    let mut notes = Vec::new();
    let reuse = &limit_set == last;
    if reuse {
        notes.push(format!(
            "{limit_label} equals the last set of the chain; its capacity is reused"
        ));
    } else {
        jobs.push(Job {
            label: limit_label.into(),
            set: limit_set,
            kind: sc.kind,
            radius: sc.radius,
        });
    }
    let vals = run_jobs(sc, jobs)?;
    let chain = &vals[..sc.family.len()];
    let limit = if reuse {
        chain.last().unwrap()
    } else {
        vals.last().unwrap()
    };

    let mut pass = true;
    for (i, w) in chain.windows(2).enumerate() {
        let tol = tolerance_for(sc, [&w[0], &w[1]]);
        let bad = if increasing {
            w[1].value < w[0].value - tol
        } else {
            w[1].value > w[0].value + tol
        };
        if bad {
            pass = false;
            notes.push(format!(
                "capacities of set{i} and set{} are out of order",
                i + 1
            ));
        }
    }
    let tail = chain.last().unwrap();
    let tolerance = tolerance_for(sc, [tail, limit]);
    let margin = (limit.value - tail.value).abs();
    pass &= margin <= tolerance;
    notes.push("limit taken as the last term of a finite chain".into());
    unconverged_notes(&vals, &mut notes);
    Ok(AxiomReport {
        axiom,
        pass,
        lhs: limit.value,
        rhs: tail.value,
        margin,
        tolerance,
        values: vals,
        notes,
    })
}

fn outer_regularity(sc: &AxiomScenario) -> Result<AxiomReport> {
    let set = match sc.family.as_slice() {
        [s] => s,
        _ => return config("outer regularity takes exactly one set"),
    };
    let radii = &sc.radii;
    if radii.len() < 3 {
        return config("outer regularity needs at least 3 neighbourhood radii");
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return config("neighbourhood radii must be strictly decreasing");
    }
    let jobs = radii
        .iter()
        .map(|&r| Job {
            label: format!("r={r}"),
            set: set.clone(),
            kind: sc.kind,
            radius: r,
        })
        .collect();
    let vals = run_jobs(sc, jobs)?;
    let mut notes = Vec::new();
    let mut pass = true;
    for w in vals.windows(2) {
        let tol = tolerance_for(sc, [&w[0], &w[1]]);
        if w[1].value > w[0].value + tol {
            pass = false;
            notes.push(format!(
                "capacity grows when the radius shrinks from {} to {}",
                w[0].radius, w[1].radius
            ));
        }
    }
    // Differences should contract at least geometrically with ratio 1/2
    // on average; the deficit is the averaged failure of d_k >= 2 d_{k+1}.
    let d: Vec<f64> = vals.windows(2).map(|w| w[0].value - w[1].value).collect();
    let deficit = -d.windows(2).map(|w| w[0] - 2.0 * w[1]).sum::<f64>() / (d.len() - 1) as f64;
    let tolerance = tolerance_for(sc, &vals);
    pass &= deficit <= tolerance;
    let last = vals.last().unwrap().value;
    let extrapolated = last - d.last().copied().unwrap_or(0.0);
    notes.push("rhs is the geometric extrapolation of the last difference".into());
    unconverged_notes(&vals, &mut notes);
    Ok(AxiomReport {
        axiom: Axiom::OuterRegularity,
        pass,
        lhs: last,
        rhs: extrapolated,
        margin: deficit,
        tolerance,
        values: vals,
        notes,
    })
}

fn strong_subadditivity(sc: &AxiomScenario) -> Result<AxiomReport> {
    let (a, b) = match sc.family.as_slice() {
        [a, b] => (a, b),
        _ => return config("strong subadditivity takes exactly two sets"),
    };
    let jobs = vec![
        Job {
            label: "set0".into(),
            set: a.clone(),
            kind: sc.kind,
            radius: sc.radius,
        },
        Job {
            label: "set1".into(),
            set: b.clone(),
            kind: sc.kind,
            radius: sc.radius,
        },
        Job {
            label: "union".into(),
            set: a.union(b)?,
            kind: sc.kind,
            radius: sc.radius,
        },
        Job {
            label: "intersection".into(),
            set: a.intersection(b)?,
            kind: sc.kind,
            radius: sc.radius,
        },
    ];
    let vals = run_jobs(sc, jobs)?;
    let lhs = vals[2].value + vals[3].value;
    let rhs = vals[0].value + vals[1].value;
    let tolerance = tolerance_for(sc, &vals);
    let margin = lhs - rhs;
    let mut notes = Vec::new();
    unconverged_notes(&vals, &mut notes);
    Ok(AxiomReport {
        axiom: Axiom::StrongSubadditivity,
        pass: margin <= tolerance,
        lhs,
        rhs,
        margin,
        tolerance,
        values: vals,
        notes,
    })
}

fn null_equivalence(sc: &AxiomScenario) -> Result<AxiomReport> {
    if sc.family.is_empty() {
        return config("null equivalence needs a shrinking family");
    }
    check_chain(&sc.family, false)?;
    // Both kinds minimise the same discrete functional, so each set is solved
    // once and the Sobolev entries repeat the mixed solve.
    let jobs = sc
        .family
        .iter()
        .enumerate()
        .map(|(i, s)| Job {
            label: format!("mixed:set{i}"),
            set: s.clone(),
            kind: CapacityKind::Mixed,
            radius: sc.radius,
        })
        .collect();
    let mut vals = run_jobs(sc, jobs)?;
    let n = sc.family.len();
    for i in 0..n {
        let mut v = vals[i].clone();
        v.label = format!("sobolev:set{i}");
        v.kind = CapacityKind::Sobolev;
        vals.push(v);
    }
    let (mixed, sobolev) = vals.split_at(n);
    let mut notes =
        vec!["sobolev values reuse the mixed solves: the discrete energies coincide".to_string()];
    let mut pass = true;
    for seq in [mixed, sobolev] {
        for w in seq.windows(2) {
            if w[1].value > w[0].value + tolerance_for(sc, [&w[0], &w[1]]) {
                pass = false;
                notes.push(format!("{} is not below {}", w[1].label, w[0].label));
            }
        }
    }
    for (m, s) in mixed.iter().zip(sobolev) {
        let allowed = sc.agreement_rel_tol * m.value.max(s.value) + tolerance_for(sc, [m, s]);
        if (m.value - s.value).abs() > allowed {
            pass = false;
            notes.push(format!(
                "{} and {} disagree beyond the relative tolerance",
                m.label, s.label
            ));
        }
    }
    let (lm, ls) = (mixed[n - 1].value, sobolev[n - 1].value);
    let margin = lm.max(ls) - sc.null_threshold;
    let tolerance = tolerance_for(sc, [&mixed[n - 1], &sobolev[n - 1]]);
    if margin > tolerance {
        pass = false;
        notes.push(format!(
            "smallest capacities ({lm:.6}, {ls:.6}) stay above the null threshold {}",
            sc.null_threshold
        ));
    }
    unconverged_notes(&vals, &mut notes);
    Ok(AxiomReport {
        axiom: Axiom::NullEquivalence,
        pass,
        lhs: lm,
        rhs: sc.null_threshold,
        margin,
        tolerance,
        values: vals,
        notes,
    })
}
