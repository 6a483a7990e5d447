//! Plain-text grid-function files.
//!
//! ```text
//! vexcap-gf v1 dim=2 nx=3 ny=2 h=0.5 x0=0 y0=0
//! 0 0.5 1
//! 1 1 1
//! ```
//!
//! Values follow the header, whitespace separated, row-major. Numbers are
//! written in Rust's shortest round-trip exponent notation.

use std::fmt::Write;

use crate::error::{config, Result};
use crate::grid::{Grid, GridFunction};

const MAGIC: &str = "vexcap-gf";
const VERSION: &str = "v1";

/// Serialises `u`, one grid row per line.
pub fn to_gf_string(u: &GridFunction) -> String {
    let g = u.grid();
    let [x0, y0] = g.origin();
    let mut out = String::new();
    if g.dim() == 1 {
        let _ = writeln!(
            out,
            "{MAGIC} {VERSION} dim=1 nx={} h={:e} x0={:e}",
            g.nx(),
            g.spacing(),
            x0
        );
    } else {
        let _ = writeln!(
            out,
            "{MAGIC} {VERSION} dim=2 nx={} ny={} h={:e} x0={:e} y0={:e}",
            g.nx(),
            g.ny(),
            g.spacing(),
            x0,
            y0
        );
    }
    for row in u.values().chunks(g.nx()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a grid-function file; malformed input is a config error.
pub fn parse_gf(text: &str) -> Result<GridFunction> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return config("grid-function file does not start with 'vexcap-gf'");
    }
    match tokens.next() {
        Some(VERSION) => {}
        other => return config(format!("unsupported grid-function version {other:?}")),
    }
    let (mut dim, mut nx, mut ny, mut h, mut x0, mut y0) = (None, None, None, None, None, None);
    for tok in tokens {
        let (key, val) = match tok.split_once('=') {
            Some(kv) => kv,
            None => return config(format!("malformed header field '{tok}'")),
        };
        let int = || {
            val.parse::<usize>().map_err(|_| {
                crate::Error::Config(format!("header field {key}: bad integer '{val}'"))
            })
        };
        let real = || {
            val.parse::<f64>().map_err(|_| {
                crate::Error::Config(format!("header field {key}: bad number '{val}'"))
            })
        };
        match key {
            "dim" => dim = Some(int()?),
            "nx" => nx = Some(int()?),
            "ny" => ny = Some(int()?),
            "h" => h = Some(real()?),
            "x0" => x0 = Some(real()?),
            "y0" => y0 = Some(real()?),
            _ => return config(format!("unknown header field '{key}'")),
        }
    }
    let missing = |name: &str| crate::Error::Config(format!("header is missing {name}"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let nx = nx.ok_or_else(|| missing("nx"))?;
    let h = h.ok_or_else(|| missing("h"))?;
    let x0 = x0.ok_or_else(|| missing("x0"))?;
    let (ny, y0) = match dim {
        1 => {
            if ny.is_some() || y0.is_some() {
                return config("ny/y0 given for a one-dimensional grid");
            }
            (1, 0.0)
        }
        2 => (
            ny.ok_or_else(|| missing("ny"))?,
            y0.ok_or_else(|| missing("y0"))?,
        ),
        d => return config(format!("dim must be 1 or 2, got {d}")),
    };
    let grid = Grid::from_shape(dim, [x0, y0], h, [nx, ny])?;
    let mut values = Vec::with_capacity(grid.len());
    for tok in lines.flat_map(str::split_whitespace) {
        match tok.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) => return config(format!("bad value '{tok}' in grid-function body")),
        }
    }
    if values.len() != grid.len() {
        return config(format!(
            "expected {} values, found {}",
            grid.len(),
            values.len()
        ));
    }
    GridFunction::new(&grid, values).map_err(|e| crate::Error::Config(e.to_string()))
}
