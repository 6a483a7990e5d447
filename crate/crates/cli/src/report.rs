//! JSON reports and CSV tables.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use vexcap_core::{ExponentField, Grid, SolverConfig};

use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the exponent definition and its `p = 1` tolerance.
pub fn exponent_hash(source: &str, eq_tol: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("p={source};eq_tol={eq_tol:e}").as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn grid_json(g: &Grid) -> Value {
    json!({
        "dim": g.dim(),
        "extents": g.extents().iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
        "h": g.spacing(),
        "shape": &g.shape()[..g.dim()],
        "nodes": g.len(),
    })
}

pub fn diagnostics_json(field: &ExponentField) -> Result<Value, CliError> {
    let c = field.log_holder_constant()?;
    Ok(json!({
        "p_inf": field.inf(),
        "p_sup": field.sup(),
        "log_holder_c": c.constant,
    }))
}

pub struct ResultEntry {
    pub name: String,
    pub kind: String,
    pub value: f64,
    pub certificate: Value,
    pub tolerances: Value,
    pub pass: Option<bool>,
}

impl ResultEntry {
    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), json!(self.name));
        m.insert("kind".into(), json!(self.kind));
        m.insert("value".into(), json!(self.value));
        m.insert("certificate".into(), self.certificate.clone());
        m.insert("tolerances".into(), self.tolerances.clone());
        if let Some(p) = self.pass {
            m.insert("pass".into(), json!(p));
        }
        Value::Object(m)
    }
}

pub struct ScenarioInfo<'a> {
    pub name: &'a str,
    pub command: &'a str,
    pub exponent: &'a str,
    pub exponent_hash: String,
    pub eq_tol: f64,
    pub solver: Option<&'a SolverConfig>,
    pub deterministic: bool,
    pub seed: u64,
}

pub fn build_report(
    info: &ScenarioInfo,
    grid: &Grid,
    diagnostics: Value,
    results: &[ResultEntry],
    elapsed_seconds: Option<f64>,
) -> Value {
    let mut scenario = Map::new();
    scenario.insert("name".into(), json!(info.name));
    scenario.insert("command".into(), json!(info.command));
    scenario.insert("tool_version".into(), json!(TOOL_VERSION));
    scenario.insert("exponent".into(), json!(info.exponent));
    scenario.insert("exponent_hash".into(), json!(info.exponent_hash));
    scenario.insert("eq_tol".into(), json!(info.eq_tol));
    if let Some(cfg) = info.solver {
        scenario.insert(
            "solver".into(),
            serde_json::to_value(cfg).unwrap_or(Value::Null),
        );
    }
    scenario.insert("deterministic".into(), json!(info.deterministic));
    scenario.insert("seed".into(), json!(info.seed));
    let timings = match elapsed_seconds {
        Some(s) => json!({ "total_seconds": s }),
        None => json!({}),
    };
    json!({
        "scenario": Value::Object(scenario),
        "grid": grid_json(grid),
        "exponent_diagnostics": diagnostics,
        "results": results.iter().map(ResultEntry::to_json).collect::<Vec<_>>(),
        "timings": timings,
    })
}

/// `param,value,gap,iters` rows.
pub fn csv_table(rows: &[(f64, f64, f64, usize)]) -> String {
    let mut out = String::from("param,value,gap,iters\n");
    for (param, value, gap, iters) in rows {
        out.push_str(&format!("{param:e},{value:e},{gap:e},{iters}\n"));
    }
    out
}
