//! Subcommand pipelines.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use vexcap_core::bv::{coarea_sum, total_variation};
use vexcap_core::gf::{parse_gf, to_gf_string};
use vexcap_core::lebesgue::{
    gradient_modular, luxemburg_norm, modular, sobolev_modular, ROOT_RESIDUAL,
};
use vexcap_core::mixed::{mixed_norm, rho_mixed_split, MixedFlavor};
use vexcap_core::{
    capacity, check_capacity_axioms, Axiom, AxiomScenario, ExponentField, GradientMode, Grid,
    GridFunction, RegionMask,
};

use crate::config::{parse_axiom, parse_mode, ExponentSpec, Scenario, SweepParam};
use crate::error::CliError;
use crate::report::{
    build_report, csv_table, diagnostics_json, exponent_hash, ResultEntry, ScenarioInfo,
};

type Res<T> = Result<T, CliError>;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub strict: bool,
    pub deterministic: bool,
    pub seed: Option<u64>,
}

/// Inputs of the pointwise commands (`norm`, `modular`, `tv`).
#[derive(Debug, Clone, Default)]
pub struct FieldInput {
    pub gf: Option<PathBuf>,
    pub exponent: Option<String>,
    pub mode: Option<String>,
}

fn load_scenario(opts: &Options, command: &str) -> Res<Scenario> {
    let path = match &opts.config {
        Some(p) => p,
        None => return Err(CliError::Config(format!("{command} needs --config"))),
    };
    let mut sc = Scenario::load(path)?;
    if let Some(seed) = opts.seed {
        sc.solver.seed = seed;
    }
    if opts.deterministic {
        sc.solver.deterministic = true;
    }
    Ok(sc)
}

struct Built {
    grid: Grid,
    field: ExponentField,
    exponent: ExponentSpec,
}

fn build_base(sc: &Scenario, h: Option<f64>) -> Res<Built> {
    let spec = sc
        .grid_spec
        .as_ref()
        .ok_or_else(|| CliError::Config("scenario has no [grid] section".into()))?;
    let exponent = sc
        .exponent
        .clone()
        .ok_or_else(|| CliError::Config("scenario has no [exponent] section".into()))?;
    let grid = spec.build(h.unwrap_or(spec.h))?;
    let field = exponent.build(&grid)?;
    Ok(Built {
        grid,
        field,
        exponent,
    })
}

fn write_outputs(opts: &Options, report: &Value, csv: Option<String>) -> Res<()> {
    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(report).expect("report serialises");
        text.push('\n');
        std::fs::write(dir.join("report.json"), text)?;
    }
    if let (Some(path), Some(table)) = (&opts.csv, csv) {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, table)?;
    }
    Ok(())
}

fn elapsed(opts: &Options, sc_deterministic: bool, start: Instant) -> Option<f64> {
    if opts.deterministic || sc_deterministic {
        None
    } else {
        Some(start.elapsed().as_secs_f64())
    }
}

fn strict_check(opts: &Options, unconverged: &[String]) -> Res<()> {
    if opts.strict && !unconverged.is_empty() {
        return Err(CliError::NotConverged(unconverged.join(", ")));
    }
    Ok(())
}

pub fn run_capacity(opts: &Options) -> Res<()> {
    let start = Instant::now();
    let sc = load_scenario(opts, "capacity")?;
    let b = build_base(&sc, None)?;
    let sets = sc.build_sets(&b.grid)?;
    let section = sc
        .capacity
        .clone()
        .unwrap_or_else(|| crate::config::CapacitySection {
            sets: sc.sets.iter().map(|(n, _)| n.clone()).collect(),
            kind: vexcap_core::CapacityKind::Mixed,
            radius: b.grid.spacing(),
            dump: false,
        });
    if section.sets.is_empty() {
        return Err(CliError::Config(
            "no sets to evaluate; add [set.NAME] sections".into(),
        ));
    }
    let mut results = Vec::new();
    let mut unconverged = Vec::new();
    for name in &section.sets {
        let r = capacity(
            &sets[name],
            &b.field,
            section.kind,
            section.radius,
            &sc.solver,
        )?;
        let cert = &r.certificate;
        println!(
            "{name}: {} capacity = {} (gap {:.3e}, {} iterations{})",
            section.kind.name(),
            r.value,
            cert.final_gap_abs,
            cert.iterations,
            if cert.converged {
                ""
            } else {
                ", not converged"
            }
        );
        if !cert.converged {
            unconverged.push(name.clone());
        }
        if section.dump {
            if let Some(dir) = &opts.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join(format!("{name}.gf")), to_gf_string(&r.minimizer))?;
            }
        }
        results.push(ResultEntry {
            name: name.clone(),
            kind: section.kind.name().to_string(),
            value: r.value,
            certificate: serde_json::to_value(cert).expect("certificate serialises"),
            tolerances: json!({
                "tol_gap": sc.solver.tol_gap,
                "tol_change": sc.solver.tol_change,
                "slack": cert.slack(),
                "neighborhood_radius": r.neighborhood_radius,
            }),
            pass: Some(cert.converged),
        });
    }
    let info = scenario_info(&sc, "capacity", &b.exponent);
    let report = build_report(
        &info,
        &b.grid,
        diagnostics_json(&b.field)?,
        &results,
        elapsed(opts, false, start),
    );
    write_outputs(opts, &report, None)?;
    strict_check(opts, &unconverged)
}

fn scenario_info<'a>(
    sc: &'a Scenario,
    command: &'a str,
    exponent: &'a ExponentSpec,
) -> ScenarioInfo<'a> {
    ScenarioInfo {
        name: &sc.name,
        command,
        exponent: &exponent.source,
        exponent_hash: exponent_hash(&exponent.hash_text, exponent.eq_tol),
        eq_tol: exponent.eq_tol,
        solver: Some(&sc.solver),
        deterministic: sc.solver.deterministic,
        seed: sc.solver.seed,
    }
}

pub fn run_check(opts: &Options, axiom_flag: Option<&str>) -> Res<()> {
    let start = Instant::now();
    let sc = load_scenario(opts, "check")?;
    let b = build_base(&sc, None)?;
    let sets = sc.build_sets(&b.grid)?;
    let check = sc
        .check
        .clone()
        .ok_or_else(|| CliError::Config("check needs a [check] section".into()))?;
    let axiom: Axiom = match (axiom_flag, check.axiom) {
        (Some(a), _) => parse_axiom(a)?,
        (None, Some(a)) => a,
        (None, None) => {
            return Err(CliError::Config(
                "no axiom given; use --axiom or [check] axiom".into(),
            ))
        }
    };
    let names: Vec<String> = if check.family.is_empty() {
        sc.sets.iter().map(|(n, _)| n.clone()).collect()
    } else {
        check.family.clone()
    };
    let family: Vec<RegionMask> = names.iter().map(|n| sets[n].clone()).collect();
    let mut scenario = AxiomScenario::new(b.field.clone(), family, check.radius);
    scenario.radii = check.radii.clone();
    scenario.kind = check.kind;
    scenario.solver = sc.solver.clone();
    scenario.axiom_tol = check.axiom_tol;
    scenario.null_threshold = check.null_threshold;
    scenario.agreement_rel_tol = check.agreement_rel_tol;
    scenario.parallel = !sc.solver.deterministic;
    let r = check_capacity_axioms(axiom, &scenario)?;
    println!(
        "{}: {} (lhs {}, rhs {}, margin {:.3e}, tolerance {:.3e})",
        axiom.name(),
        if r.pass { "pass" } else { "fail" },
        r.lhs,
        r.rhs,
        r.margin,
        r.tolerance
    );
    for note in &r.notes {
        println!("  note: {note}");
    }
    let unconverged: Vec<String> = r
        .values
        .iter()
        .filter(|v| !v.converged)
        .map(|v| v.label.clone())
        .collect();
    let rows: Vec<(f64, f64, f64, usize)> = r
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            (
                if axiom == Axiom::OuterRegularity {
                    v.radius
                } else {
                    i as f64
                },
                v.value,
                v.gap_abs,
                v.iterations,
            )
        })
        .collect();
    let entry = ResultEntry {
        name: axiom.name().to_string(),
        kind: "axiom".into(),
        value: r.margin,
        certificate: serde_json::to_value(&r).expect("axiom report serialises"),
        tolerances: json!({ "axiom_tol": check.axiom_tol, "tolerance": r.tolerance }),
        pass: Some(r.pass),
    };
    let info = scenario_info(&sc, "check", &b.exponent);
    let report = build_report(
        &info,
        &b.grid,
        diagnostics_json(&b.field)?,
        &[entry],
        elapsed(opts, false, start),
    );
    write_outputs(opts, &report, Some(csv_table(&rows)))?;
    strict_check(opts, &unconverged)
}

pub fn run_sweep(opts: &Options) -> Res<()> {
    let start = Instant::now();
    let sc = load_scenario(opts, "sweep")?;
    let sweep = sc
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    let base = build_base(&sc, None)?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut unconverged = Vec::new();
    for &v in &sweep.values {
        let (b, radius) = match sweep.param {
            SweepParam::H => {
                let b = build_base(&sc, Some(v))?;
                let r = sweep.radius_cells * v;
                (b, r)
            }
            SweepParam::Radius => (build_base(&sc, None)?, v),
        };
        let sets = sc.build_sets(&b.grid)?;
        let r = capacity(&sets[&sweep.set], &b.field, sweep.kind, radius, &sc.solver)?;
        let label = match sweep.param {
            SweepParam::H => format!("h={v:e}"),
            SweepParam::Radius => format!("radius={v:e}"),
        };
        println!(
            "{label}: {} capacity = {} ({} iterations)",
            sweep.kind.name(),
            r.value,
            r.certificate.iterations
        );
        if !r.certificate.converged {
            unconverged.push(label.clone());
        }
        rows.push((v, r.value, r.certificate.slack(), r.certificate.iterations));
        results.push(ResultEntry {
            name: label,
            kind: sweep.kind.name().to_string(),
            value: r.value,
            certificate: serde_json::to_value(&r.certificate).expect("certificate serialises"),
            tolerances: json!({
                "tol_gap": sc.solver.tol_gap,
                "tol_change": sc.solver.tol_change,
                "slack": r.certificate.slack(),
                "neighborhood_radius": radius,
                "h": b.grid.spacing(),
            }),
            pass: Some(r.certificate.converged),
        });
    }
    let info = scenario_info(&sc, "sweep", &base.exponent);
    let report = build_report(
        &info,
        &base.grid,
        diagnostics_json(&base.field)?,
        &results,
        elapsed(opts, false, start),
    );
    write_outputs(opts, &report, Some(csv_table(&rows)))?;
    strict_check(opts, &unconverged)
}

/// Which pointwise quantity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointwise {
    Norm,
    Modular,
    Tv,
}

impl Pointwise {
    fn name(self) -> &'static str {
        match self {
            Pointwise::Norm => "norm",
            Pointwise::Modular => "modular",
            Pointwise::Tv => "tv",
        }
    }
}

fn read_gf(path: &Path) -> Res<GridFunction> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read grid function {}: {e}", path.display()))
    })?;
    Ok(parse_gf(&text)?)
}

pub fn run_pointwise(opts: &Options, input: &FieldInput, what: Pointwise) -> Res<()> {
    let start = Instant::now();
    let sc = match &opts.config {
        Some(_) => Some(load_scenario(opts, what.name())?),
        None => None,
    };
    let gf_path = input
        .gf
        .clone()
        .or_else(|| sc.as_ref().and_then(|s| s.input_gf.clone()))
        .ok_or_else(|| CliError::Config(format!("{} needs --gf or [input] gf", what.name())))?;
    let u = read_gf(&gf_path)?;
    let grid = *u.grid();
    let mode = match (&input.mode, sc.as_ref().and_then(|s| s.input_mode)) {
        (Some(m), _) => parse_mode(m)?,
        (None, Some(m)) => m,
        (None, None) => sc
            .as_ref()
            .map(|s| s.solver.mode)
            .unwrap_or(GradientMode::Isotropic),
    };
    let eq_tol = sc
        .as_ref()
        .and_then(|s| s.exponent.as_ref())
        .map(|e| e.eq_tol)
        .unwrap_or(vexcap_core::DEFAULT_EQ_TOL);
    let exponent = match (
        &input.exponent,
        sc.as_ref().and_then(|s| s.exponent.as_ref()),
    ) {
        (Some(src), _) => Some(ExponentSpec::parse(src, grid.dim(), eq_tol)?),
        (None, Some(e)) => Some(e.clone()),
        (None, None) => None,
    };
    let field = exponent.as_ref().map(|e| e.build(&grid)).transpose()?;
    let need_field = || -> Res<&ExponentField> {
        field.as_ref().ok_or_else(|| {
            CliError::Config(format!("{} needs --exponent or [exponent] p", what.name()))
        })
    };
    let full = RegionMask::full(&grid);
    let mode_json = serde_json::to_value(mode).expect("mode serialises");
    let mut values: Vec<(&str, f64, Value)> = Vec::new();
    match what {
        Pointwise::Norm => {
            let f = need_field()?;
            let tol = json!({ "root_residual": ROOT_RESIDUAL, "mode": mode_json });
            values.push(("luxemburg", luxemburg_norm(&u, f)?, tol.clone()));
            values.push((
                "mixed_split",
                mixed_norm(&u, f, MixedFlavor::Split, mode, eq_tol)?,
                tol.clone(),
            ));
            values.push((
                "mixed_relaxed",
                mixed_norm(&u, f, MixedFlavor::Relaxed, mode, eq_tol)?,
                tol,
            ));
        }
        Pointwise::Modular => {
            let f = need_field()?;
            let tol = json!({ "mode": mode_json });
            values.push(("modular", modular(&u, f, &full)?, tol.clone()));
            values.push((
                "gradient_modular",
                gradient_modular(&u, f, &full, mode)?,
                tol.clone(),
            ));
            values.push((
                "sobolev_modular",
                sobolev_modular(&u, f, mode)?.total,
                tol.clone(),
            ));
            values.push((
                "mixed_split",
                rho_mixed_split(&u, f, &full, eq_tol, mode)?.total,
                tol,
            ));
        }
        Pointwise::Tv => {
            let tol = json!({ "mode": mode_json });
            values.push((
                "total_variation",
                total_variation(&u, &full, mode)?,
                tol.clone(),
            ));
            values.push(("coarea_sum", coarea_sum(&u, &full, mode)?, tol));
        }
    }
    for (name, v, _) in &values {
        println!("{name} = {v}");
    }
    let results: Vec<ResultEntry> = values
        .into_iter()
        .map(|(name, value, tolerances)| ResultEntry {
            name: name.to_string(),
            kind: what.name().to_string(),
            value,
            certificate: Value::Null,
            tolerances,
            pass: None,
        })
        .collect();
    let name = sc.as_ref().map(|s| s.name.clone()).unwrap_or_else(|| {
        gf_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("input")
            .to_string()
    });
    let source = exponent
        .as_ref()
        .map(|e| e.source.clone())
        .unwrap_or_default();
    let hash_text = exponent
        .as_ref()
        .map(|e| e.hash_text.clone())
        .unwrap_or_default();
    let deterministic =
        opts.deterministic || sc.as_ref().map(|s| s.solver.deterministic).unwrap_or(true);
    let info = ScenarioInfo {
        name: &name,
        command: what.name(),
        exponent: &source,
        exponent_hash: exponent_hash(&hash_text, eq_tol),
        eq_tol,
        solver: None,
        deterministic,
        seed: opts
            .seed
            .or(sc.as_ref().map(|s| s.solver.seed))
            .unwrap_or(0),
    };
    let diagnostics = match &field {
        Some(f) => diagnostics_json(f)?,
        None => Value::Null,
    };
    let report = build_report(
        &info,
        &grid,
        diagnostics,
        &results,
        elapsed(opts, false, start),
    );
    write_outputs(opts, &report, None)
}
