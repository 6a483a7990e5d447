//! Scenario files: `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! [grid]
//! dim = 1
//! x = -5, 5
//! h = 1e-3
//!
//! [exponent]
//! p = 2
//!
//! [set.E]
//! shape = interval
//! x = -0.5, 0.5
//!
//! [capacity]
//! radius = 2h
//! ```
//!
//! `[exponent] file = p.gf` reads tabulated exponent values instead of `p`.
//! Relative paths are resolved against the directory of the config file.
//!
//! Lines starting with `#` or `;` are comments. Every key must be known to
//! its section; anything else is a config error naming the key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vexcap_core::gf::parse_gf;
use vexcap_core::{
    Axiom, CapacityKind, ExponentField, GradientMode, Grid, GridFunction, RegionMask, SolverConfig,
};

use crate::error::CliError;
use crate::expr::Expr;

type Res<T> = Result<T, CliError>;

fn cfg_err<T>(msg: impl Into<String>) -> Res<T> {
    Err(CliError::Config(msg.into()))
}

#[derive(Debug)]
struct RawSection {
    name: String,
    entries: Vec<(String, String, usize)>,
}

fn parse_sections(text: &str) -> Res<Vec<RawSection>> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => name.trim().to_string(),
                _ => return cfg_err(format!("line {lineno}: malformed section header '{line}'")),
            };
            if sections.iter().any(|s| s.name == name) {
                return cfg_err(format!("line {lineno}: duplicate section [{name}]"));
            }
            sections.push(RawSection {
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
            None => {
                return cfg_err(format!(
                    "line {lineno}: expected 'key = value', got '{line}'"
                ))
            }
        };
        let section = match sections.last_mut() {
            Some(s) => s,
            None => {
                return cfg_err(format!(
                    "line {lineno}: key '{key}' appears before any section"
                ))
            }
        };
        if section.entries.iter().any(|(k, _, _)| *k == key) {
            return cfg_err(format!(
                "line {lineno}: duplicate key '{key}' in [{}]",
                section.name
            ));
        }
        section.entries.push((key, value, lineno));
    }
    Ok(sections)
}

/// Hands out a section's values and remembers which keys were read.
struct Section<'a> {
    raw: &'a RawSection,
    used: Vec<bool>,
}

impl<'a> Section<'a> {
    fn new(raw: &'a RawSection) -> Section<'a> {
        Section {
            raw,
            used: vec![false; raw.entries.len()],
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a str> {
        let pos = self.raw.entries.iter().position(|(k, _, _)| k == key)?;
        self.used[pos] = true;
        Some(self.raw.entries[pos].1.as_str())
    }

    fn require(&mut self, key: &str) -> Res<&'a str> {
        match self.get(key) {
            Some(v) => Ok(v),
            None => cfg_err(format!("[{}] is missing '{key}'", self.raw.name)),
        }
    }

    fn finish(self) -> Res<()> {
        for (i, (key, _, line)) in self.raw.entries.iter().enumerate() {
            if !self.used[i] {
                return cfg_err(format!(
                    "line {line}: unknown key '{key}' in [{}]",
                    self.raw.name
                ));
            }
        }
        Ok(())
    }

    fn real(&mut self, key: &str) -> Res<Option<f64>> {
        let name = self.raw.name.clone();
        self.get(key)
            .map(|v| parse_real(v).map_err(|e| CliError::Config(format!("[{name}] {key}: {e}"))))
            .transpose()
    }

    fn int(&mut self, key: &str) -> Res<Option<u64>> {
        let name = self.raw.name.clone();
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::Config(format!("[{name}] {key}: bad integer '{v}'")))
            })
            .transpose()
    }

    fn boolean(&mut self, key: &str) -> Res<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(v) => cfg_err(format!(
                "[{}] {key}: expected true or false, got '{v}'",
                self.raw.name
            )),
        }
    }

    fn pair(&mut self, key: &str) -> Res<Option<(f64, f64)>> {
        let name = self.raw.name.clone();
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let xs =
                    parse_list(v).map_err(|e| CliError::Config(format!("[{name}] {key}: {e}")))?;
                match xs.as_slice() {
                    [a, b] if a < b => Ok(Some((*a, *b))),
                    _ => cfg_err(format!(
                        "[{name}] {key}: expected 'a, b' with a < b, got '{v}'"
                    )),
                }
            }
        }
    }

    /// Length that may be written as a number or as a multiple of `h`
    /// (`2h`, `h`, `0.5h`).
    fn length(&mut self, key: &str, h: f64) -> Res<Option<f64>> {
        let name = self.raw.name.clone();
        self.get(key)
            .map(|v| {
                parse_length(v, h).map_err(|e| CliError::Config(format!("[{name}] {key}: {e}")))
            })
            .transpose()
    }

    fn lengths(&mut self, key: &str, h: f64) -> Res<Option<Vec<f64>>> {
        let name = self.raw.name.clone();
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|t| {
                    parse_length(t.trim(), h)
                        .map_err(|e| CliError::Config(format!("[{name}] {key}: {e}")))
                })
                .collect::<Res<Vec<f64>>>()
                .map(Some),
        }
    }

    fn names(&mut self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect()
        })
    }
}

fn parse_real(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("bad number '{v}'")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|t| parse_real(t.trim())).collect()
}

fn parse_length(v: &str, h: f64) -> Result<f64, String> {
    match v.strip_suffix('h') {
        Some("") => Ok(h),
        Some(k) => parse_real(k.trim()).map(|k| k * h),
        None => parse_real(v),
    }
}

pub fn parse_mode(v: &str) -> Res<GradientMode> {
    match v {
        "isotropic" => Ok(GradientMode::Isotropic),
        "anisotropic" => Ok(GradientMode::Anisotropic),
        _ => cfg_err(format!("mode must be isotropic or anisotropic, got '{v}'")),
    }
}

fn parse_kind(v: &str) -> Res<CapacityKind> {
    match v {
        "mixed" => Ok(CapacityKind::Mixed),
        "sobolev" => Ok(CapacityKind::Sobolev),
        _ => cfg_err(format!("kind must be mixed or sobolev, got '{v}'")),
    }
}

pub fn parse_axiom(v: &str) -> Res<Axiom> {
    match Axiom::parse(v) {
        Some(a) => Ok(a),
        None => {
            let names: Vec<&str> = Axiom::ALL.iter().map(|a| a.name()).collect();
            cfg_err(format!(
                "unknown axiom '{v}'; expected one of {}",
                names.join(", ")
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub extents: Vec<(f64, f64)>,
    pub h: f64,
}

impl GridSpec {
    pub fn build(&self, h: f64) -> Res<Grid> {
        Ok(Grid::new(self.dim, &self.extents, h)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    Empty,
    Full,
    Interval(f64, f64),
    Box((f64, f64), (f64, f64)),
    Ball([f64; 2], f64),
    Union(Vec<String>),
}

/// Where exponent values come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ExponentDef {
    Expr(Expr),
    /// Nodal values read from a grid-function file; the grid must match.
    Values(GridFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSpec {
    /// Expression text, or `file:PATH` for tabulated exponents.
    pub source: String,
    pub def: ExponentDef,
    pub eq_tol: f64,
    /// Text fed to the report hash; the file contents for tabulated exponents.
    pub hash_text: String,
}

impl ExponentSpec {
    pub fn parse(source: &str, dim: usize, eq_tol: f64) -> Res<ExponentSpec> {
        let expr = Expr::parse(source, dim)
            .map_err(|e| CliError::Config(format!("exponent '{source}': {e}")))?;
        Ok(ExponentSpec {
            source: source.to_string(),
            def: ExponentDef::Expr(expr),
            eq_tol,
            hash_text: source.to_string(),
        })
    }

    pub fn from_file(path: &Path, eq_tol: f64) -> Res<ExponentSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read exponent file {}: {e}", path.display()))
        })?;
        let values = parse_gf(&text)
            .map_err(|e| CliError::Config(format!("exponent file {}: {e}", path.display())))?;
        Ok(ExponentSpec {
            source: format!("file:{}", path.display()),
            def: ExponentDef::Values(values),
            eq_tol,
            hash_text: text,
        })
    }

    pub fn build(&self, grid: &Grid) -> Res<ExponentField> {
        let values: Vec<f64> = match &self.def {
            ExponentDef::Expr(expr) => (0..grid.len())
                .map(|i| {
                    let x = grid.coord(i);
                    expr.eval(x[0], x[1])
                })
                .collect(),
            ExponentDef::Values(gf) => {
                let g = gf.grid();
                let same = g.dim() == grid.dim()
                    && g.shape() == grid.shape()
                    && (g.spacing() - grid.spacing()).abs() <= 1e-9 * grid.spacing()
                    && (0..2)
                        .all(|k| (g.origin()[k] - grid.origin()[k]).abs() <= 1e-9 * grid.spacing());
                if !same {
                    return cfg_err(format!(
                        "exponent {} is tabulated on a different grid",
                        self.source
                    ));
                }
                gf.values().to_vec()
            }
        };
        if let Some(i) = values.iter().position(|p| !(p.is_finite() && *p >= 1.0)) {
            let x = grid.coord(i);
            return cfg_err(format!(
                "exponent '{}' evaluates to {} at {:?}; values must be finite and >= 1",
                self.source,
                values[i],
                &x[..grid.dim()]
            ));
        }
        ExponentField::new(grid, values).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySection {
    pub sets: Vec<String>,
    pub kind: CapacityKind,
    pub radius: f64,
    pub dump: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSection {
    pub axiom: Option<Axiom>,
    pub family: Vec<String>,
    pub radius: f64,
    pub radii: Vec<f64>,
    pub kind: CapacityKind,
    pub axiom_tol: f64,
    pub null_threshold: f64,
    pub agreement_rel_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    H,
    Radius,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub set: String,
    pub kind: CapacityKind,
    /// Neighbourhood radius in units of `h` for `param = h`, absolute otherwise.
    pub radius_cells: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid_spec: Option<GridSpec>,
    pub exponent: Option<ExponentSpec>,
    pub sets: Vec<(String, SetSpec)>,
    pub solver: SolverConfig,
    pub capacity: Option<CapacitySection>,
    pub check: Option<CheckSection>,
    pub sweep: Option<SweepSection>,
    pub input_gf: Option<PathBuf>,
    pub input_mode: Option<GradientMode>,
}

impl Scenario {
    pub fn load(path: &Path) -> Res<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let default_name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario")
            .to_string();
        let base_dir = path.parent().unwrap_or(Path::new("."));
        Scenario::parse_in(&text, &default_name, base_dir)
    }

    #[cfg(test)]
    pub fn parse(text: &str, default_name: &str) -> Res<Scenario> {
        Scenario::parse_in(text, default_name, Path::new("."))
    }

    /// Parses `text`, resolving file references against `base_dir`.
    pub fn parse_in(text: &str, default_name: &str, base_dir: &Path) -> Res<Scenario> {
        let raw = parse_sections(text)?;
        let find = |name: &str| raw.iter().find(|s| s.name == name);
        for s in &raw {
            let known = matches!(
                s.name.as_str(),
                "scenario"
                    | "grid"
                    | "exponent"
                    | "solver"
                    | "capacity"
                    | "check"
                    | "sweep"
                    | "input"
            ) || s.name.starts_with("set.");
            if !known {
                return cfg_err(format!("unknown section [{}]", s.name));
            }
        }

        let mut name = default_name.to_string();
        if let Some(r) = find("scenario") {
            let mut s = Section::new(r);
            if let Some(n) = s.get("name") {
                name = n.to_string();
            }
            s.finish()?;
        }

        let grid_spec = find("grid").map(parse_grid).transpose()?;
        let h = grid_spec.as_ref().map(|g| g.h).unwrap_or(f64::NAN);
        let dim = grid_spec.as_ref().map(|g| g.dim).unwrap_or(2);

        let exponent = match find("exponent") {
            None => None,
            Some(r) => {
                let mut s = Section::new(r);
                let p = s.get("p").map(str::to_string);
                let file = s.get("file").map(str::to_string);
                let eq_tol = s.real("eq_tol")?.unwrap_or(vexcap_core::DEFAULT_EQ_TOL);
                if eq_tol < 0.0 {
                    return cfg_err("[exponent] eq_tol must be nonnegative");
                }
                s.finish()?;
                match (p, file) {
                    (Some(p), None) => Some(ExponentSpec::parse(&p, dim, eq_tol)?),
                    (None, Some(f)) => Some(ExponentSpec::from_file(&base_dir.join(f), eq_tol)?),
                    (Some(_), Some(_)) => {
                        return cfg_err("[exponent] takes either 'p' or 'file', not both")
                    }
                    (None, None) => return cfg_err("[exponent] is missing 'p'"),
                }
            }
        };

        let mut sets: Vec<(String, SetSpec)> = Vec::new();
        for r in raw.iter().filter(|s| s.name.starts_with("set.")) {
            let set_name = r.name["set.".len()..].to_string();
            if set_name.is_empty() {
                return cfg_err("set sections need a name, as in [set.E]");
            }
            let spec = parse_set(r, dim, &sets)?;
            sets.push((set_name, spec));
        }
        let known_set = |n: &str| -> Res<()> {
            if sets.iter().any(|(s, _)| s == n) {
                Ok(())
            } else {
                cfg_err(format!("unknown set '{n}'"))
            }
        };

        let solver = match find("solver") {
            None => SolverConfig::default(),
            Some(r) => parse_solver(r)?,
        };

        let needs_h = |section: &str| -> Res<()> {
            if h.is_nan() {
                cfg_err(format!("[{section}] needs a [grid] section"))
            } else {
                Ok(())
            }
        };

        let capacity = match find("capacity") {
            None => None,
            Some(r) => {
                needs_h("capacity")?;
                let mut s = Section::new(r);
                let names = s
                    .names("sets")
                    .unwrap_or_else(|| sets.iter().map(|(n, _)| n.clone()).collect());
                for n in &names {
                    known_set(n)?;
                }
                let kind = s
                    .get("kind")
                    .map(parse_kind)
                    .transpose()?
                    .unwrap_or(CapacityKind::Mixed);
                let radius = s.length("radius", h)?.unwrap_or(h);
                check_radius("capacity", radius, h)?;
                let dump = s.boolean("dump")?.unwrap_or(false);
                s.finish()?;
                Some(CapacitySection {
                    sets: names,
                    kind,
                    radius,
                    dump,
                })
            }
        };

        let check = match find("check") {
            None => None,
            Some(r) => {
                needs_h("check")?;
                let mut s = Section::new(r);
                let axiom = s.get("axiom").map(parse_axiom).transpose()?;
                let family = s.names("family").unwrap_or_default();
                for n in &family {
                    known_set(n)?;
                }
                let radius = s.length("radius", h)?.unwrap_or(h);
                check_radius("check", radius, h)?;
                let radii = s.lengths("radii", h)?.unwrap_or_default();
                for &r in &radii {
                    check_radius("check", r, h)?;
                }
                let kind = s
                    .get("kind")
                    .map(parse_kind)
                    .transpose()?
                    .unwrap_or(CapacityKind::Mixed);
                let axiom_tol = s.real("axiom_tol")?.unwrap_or(1e-6);
                let null_threshold = s.real("null_threshold")?.unwrap_or(0.05);
                let agreement_rel_tol = s.real("agreement_rel_tol")?.unwrap_or(0.1);
                if axiom_tol < 0.0 || null_threshold < 0.0 || agreement_rel_tol < 0.0 {
                    return cfg_err("[check] tolerances and thresholds must be nonnegative");
                }
                s.finish()?;
                Some(CheckSection {
                    axiom,
                    family,
                    radius,
                    radii,
                    kind,
                    axiom_tol,
                    null_threshold,
                    agreement_rel_tol,
                })
            }
        };

        let sweep = match find("sweep") {
            None => None,
            Some(r) => {
                needs_h("sweep")?;
                let mut s = Section::new(r);
                let param = match s.require("param")? {
                    "h" => SweepParam::H,
                    "radius" => SweepParam::Radius,
                    other => {
                        return cfg_err(format!("[sweep] param must be h or radius, got '{other}'"))
                    }
                };
                let values = match param {
                    SweepParam::H => s.lengths("values", h)?,
                    SweepParam::Radius => s.lengths("values", h)?,
                }
                .unwrap_or_default();
                if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
                    return cfg_err("[sweep] values must be a nonempty list of positive numbers");
                }
                let set = s.require("set")?.to_string();
                known_set(&set)?;
                let kind = s
                    .get("kind")
                    .map(parse_kind)
                    .transpose()?
                    .unwrap_or(CapacityKind::Mixed);
                let radius_cells = s.real("radius_cells")?.unwrap_or(1.0);
                if radius_cells < 1.0 {
                    return cfg_err("[sweep] radius_cells must be at least 1");
                }
                let radius = s.length("radius", h)?.unwrap_or(h);
                if param == SweepParam::Radius {
                    for &r in &values {
                        check_radius("sweep", r, h)?;
                    }
                } else {
                    check_radius("sweep", radius, h)?;
                }
                s.finish()?;
                Some(SweepSection {
                    param,
                    values,
                    set,
                    kind,
                    radius_cells,
                    radius,
                })
            }
        };

        let (mut input_gf, mut input_mode) = (None, None);
        if let Some(r) = find("input") {
            let mut s = Section::new(r);
            input_gf = s.get("gf").map(|f| base_dir.join(f));
            input_mode = s.get("mode").map(parse_mode).transpose()?;
            s.finish()?;
        }

        Ok(Scenario {
            name,
            grid_spec,
            exponent,
            sets,
            solver,
            capacity,
            check,
            sweep,
            input_gf,
            input_mode,
        })
    }

    /// Builds every named set on `grid`, resolving unions.
    pub fn build_sets(&self, grid: &Grid) -> Res<BTreeMap<String, RegionMask>> {
        let mut out: BTreeMap<String, RegionMask> = BTreeMap::new();
        for (name, spec) in &self.sets {
            let mask = match spec {
                SetSpec::Empty => RegionMask::empty(grid),
                SetSpec::Full => RegionMask::full(grid),
                SetSpec::Interval(a, b) => RegionMask::interval(grid, *a, *b),
                SetSpec::Box(x, y) => RegionMask::boxed(grid, *x, *y),
                SetSpec::Ball(c, r) => RegionMask::ball(grid, *c, *r),
                SetSpec::Union(parts) => {
                    let mut m = RegionMask::empty(grid);
                    for p in parts {
                        m = m.union(&out[p])?;
                    }
                    m
                }
            };
            out.insert(name.clone(), mask);
        }
        Ok(out)
    }
}

fn check_radius(section: &str, r: f64, h: f64) -> Res<()> {
    if r < h * (1.0 - 1e-9) {
        return cfg_err(format!(
            "[{section}] neighbourhood radius {r} is below the grid step {h}"
        ));
    }
    Ok(())
}

fn parse_grid(r: &RawSection) -> Res<GridSpec> {
    let mut s = Section::new(r);
    let dim = s.int("dim")?.unwrap_or(1) as usize;
    if dim != 1 && dim != 2 {
        return cfg_err(format!("[grid] dim must be 1 or 2, got {dim}"));
    }
    let x = s
        .pair("x")?
        .ok_or_else(|| CliError::Config("[grid] is missing 'x'".into()))?;
    let mut extents = vec![x];
    if dim == 2 {
        extents.push(
            s.pair("y")?
                .ok_or_else(|| CliError::Config("[grid] is missing 'y'".into()))?,
        );
    }
    let h = s
        .real("h")?
        .ok_or_else(|| CliError::Config("[grid] is missing 'h'".into()))?;
    if !(h > 0.0) {
        return cfg_err(format!("[grid] h must be positive, got {h}"));
    }
    s.finish()?;
    let spec = GridSpec { dim, extents, h };
    spec.build(h)?;
    Ok(spec)
}

fn parse_set(r: &RawSection, dim: usize, earlier: &[(String, SetSpec)]) -> Res<SetSpec> {
    let mut s = Section::new(r);
    let shape = s.require("shape")?;
    let spec = match shape {
        "empty" => SetSpec::Empty,
        "full" => SetSpec::Full,
        "interval" => {
            let (a, b) = s
                .pair("x")?
                .ok_or_else(|| CliError::Config(format!("[{}] is missing 'x'", r.name)))?;
            SetSpec::Interval(a, b)
        }
        "box" => {
            let x = s
                .pair("x")?
                .ok_or_else(|| CliError::Config(format!("[{}] is missing 'x'", r.name)))?;
            let y = if dim == 2 {
                s.pair("y")?
                    .ok_or_else(|| CliError::Config(format!("[{}] is missing 'y'", r.name)))?
            } else {
                (0.0, 0.0)
            };
            SetSpec::Box(x, y)
        }
        "ball" => {
            let c = parse_list(s.require("center")?)
                .map_err(|e| CliError::Config(format!("[{}] center: {e}", r.name)))?;
            if c.len() != dim {
                return cfg_err(format!("[{}] center needs {dim} coordinate(s)", r.name));
            }
            let radius = s
                .real("radius")?
                .ok_or_else(|| CliError::Config(format!("[{}] is missing 'radius'", r.name)))?;
            if radius < 0.0 {
                return cfg_err(format!("[{}] radius must be nonnegative", r.name));
            }
            SetSpec::Ball([c[0], c.get(1).copied().unwrap_or(0.0)], radius)
        }
        "union" => {
            let parts = s.names("of").unwrap_or_default();
            if parts.is_empty() {
                return cfg_err(format!("[{}] union needs 'of = A, B, ...'", r.name));
            }
            for p in &parts {
                if !earlier.iter().any(|(n, _)| n == p) {
                    return cfg_err(format!(
                        "[{}] union refers to '{p}', which is not defined above it",
                        r.name
                    ));
                }
            }
            SetSpec::Union(parts)
        }
        other => return cfg_err(format!("[{}] unknown shape '{other}'", r.name)),
    };
    s.finish()?;
    Ok(spec)
}

fn parse_solver(r: &RawSection) -> Res<SolverConfig> {
    let mut s = Section::new(r);
    let mut cfg = SolverConfig::default();
    if let Some(v) = s.int("max_iters")? {
        if v < 1 {
            return cfg_err("[solver] max_iters must be at least 1");
        }
        cfg.max_iters = v as usize;
    }
    if let Some(v) = s.real("tol_gap")? {
        if v < 0.0 {
            return cfg_err("[solver] tol_gap must be nonnegative");
        }
        cfg.tol_gap = v;
    }
    if let Some(v) = s.real("tol_change")? {
        if v < 0.0 {
            return cfg_err("[solver] tol_change must be nonnegative");
        }
        cfg.tol_change = v;
    }
    for key in ["tau", "sigma"] {
        if let Some(v) = s.real(key)? {
            if !(v > 0.0) {
                return cfg_err(format!("[solver] {key} must be positive"));
            }
            if key == "tau" {
                cfg.tau = Some(v);
            } else {
                cfg.sigma = Some(v);
            }
        }
    }
    if let Some(v) = s.get("mode") {
        cfg.mode = parse_mode(v)?;
    }
    if let Some(v) = s.int("gap_every")? {
        if v < 1 {
            return cfg_err("[solver] gap_every must be at least 1");
        }
        cfg.gap_every = v as usize;
    }
    if let Some(v) = s.int("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = s.boolean("deterministic")? {
        cfg.deterministic = v;
    }
    s.finish()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
# one-dimensional reference
[grid]
dim = 1
x = -5, 5
h = 1e-2

[exponent]
p = 1 + 0.5*abs(x)

[set.E]
shape = interval
x = -0.5, 0.5

[set.F]
shape = ball
center = 2
radius = 0.25

[set.U]
shape = union
of = E, F

[capacity]
sets = E, U
radius = 2h
";

    #[test]
    fn parses_a_full_scenario() {
        let sc = Scenario::parse(BASIC, "basic").unwrap();
        assert_eq!(sc.name, "basic");
        let g = sc.grid_spec.as_ref().unwrap();
        assert_eq!((g.dim, g.h), (1, 1e-2));
        let cap = sc.capacity.as_ref().unwrap();
        assert_eq!(cap.sets, vec!["E", "U"]);
        assert!((cap.radius - 2e-2).abs() < 1e-15);
        let grid = g.build(g.h).unwrap();
        let sets = sc.build_sets(&grid).unwrap();
        assert_eq!(sets["U"], sets["E"].union(&sets["F"]).unwrap());
        let field = sc.exponent.as_ref().unwrap().build(&grid).unwrap();
        assert_eq!(field.inf(), 1.0);
    }

    #[test]
    fn unknown_keys_and_sections_are_named() {
        let bad = BASIC.replace("h = 1e-2", "h = 1e-2\nspacing = 3");
        let err = Scenario::parse(&bad, "x").unwrap_err().to_string();
        assert!(err.contains("unknown key 'spacing'"), "{err}");
        let bad = format!("{BASIC}\n[plot]\ncolor = red\n");
        assert!(Scenario::parse(&bad, "x")
            .unwrap_err()
            .to_string()
            .contains("unknown section [plot]"));
    }

    #[test]
    fn out_of_range_values_are_config_errors() {
        for (from, to) in [
            ("h = 1e-2", "h = -1"),
            ("radius = 2h", "radius = 0.5h"),
            ("p = 1 + 0.5*abs(x)", "p = 0.5"),
            ("dim = 1", "dim = 3"),
            ("of = E, F", "of = E, G"),
        ] {
            let bad = BASIC.replace(from, to);
            let parsed = Scenario::parse(&bad, "x").and_then(|sc| {
                let g = sc.grid_spec.clone().unwrap();
                sc.exponent.as_ref().unwrap().build(&g.build(g.h)?)?;
                Ok(sc)
            });
            assert!(
                matches!(parsed, Err(CliError::Config(_))),
                "{to}: {parsed:?}"
            );
        }
    }

    #[test]
    fn lengths_accept_multiples_of_h() {
        assert_eq!(parse_length("h", 0.1).unwrap(), 0.1);
        assert_eq!(parse_length("3h", 0.1).unwrap(), 3.0 * 0.1);
        assert_eq!(parse_length("0.25", 0.1).unwrap(), 0.25);
        assert!(parse_length("xh", 0.1).is_err());
    }
}
