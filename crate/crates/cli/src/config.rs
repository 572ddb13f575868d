//! Flat `key = value` run configuration with dotted keys. Lines starting
//! with `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dirac_spectral::model::{BoundaryParams, Bump, CanonicalPotential, Grid};

use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    FiniteInterval,
    HalfLineWindow,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub boundary: BoundaryParams,
    pub potential: CanonicalPotential,
    pub grid: Grid,
    pub scan_step: f64,
    pub refine_tol: f64,
    pub mode: Mode,
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "boundary.alpha",
    "boundary.beta",
    "potential.kind",
    "potential.p0",
    "potential.q0",
    "potential.p_cos",
    "potential.p_sin",
    "potential.q_cos",
    "potential.q_sin",
    "potential.p_bumps",
    "potential.q_bumps",
    "potential.file",
    "grid.x_end",
    "grid.n_points",
    "solver.scan_step",
    "solver.refine_tol",
];

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse(&text, base).with_context(|| format!("in config file {}", path.display()))
}

pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut kv = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got `{raw}`", lineno + 1);
        };
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key `{key}`", lineno + 1);
        }
        if kv.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", lineno + 1);
        }
    }

    let get_f64 = |key: &str, default: f64| -> Result<f64> {
        match kv.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .with_context(|| format!("key `{key}`: invalid number `{v}`")),
        }
    };

    let mode = match kv.get("mode").map(String::as_str) {
        None | Some("finite-interval") => Mode::FiniteInterval,
        Some("half-line-window") => Mode::HalfLineWindow,
        Some(other) => bail!("mode must be finite-interval or half-line-window, got `{other}`"),
    };

    let alpha = get_f64("boundary.alpha", 0.0)?;
    let beta = get_f64("boundary.beta", 0.0)?;
    let boundary = BoundaryParams::new(alpha, beta).map_err(anyhow::Error::new)?;

    let default_end = match mode {
        Mode::FiniteInterval => PI,
        Mode::HalfLineWindow => 8.0,
    };
    let x_end = get_f64("grid.x_end", default_end)?;
    let grid = match kv.get("grid.n_points") {
        Some(v) => {
            let n: usize = v
                .parse()
                .with_context(|| format!("key `grid.n_points`: invalid count `{v}`"))?;
            Grid::new(x_end, n).map_err(anyhow::Error::new)?
        }
        None => match mode {
            Mode::FiniteInterval => Grid::new(x_end, 4001).map_err(anyhow::Error::new)?,
            Mode::HalfLineWindow => Grid::default_window(x_end).map_err(anyhow::Error::new)?,
        },
    };

    let kind = kv.get("potential.kind").map(String::as_str).unwrap_or("zero");
    let potential = match kind {
        "zero" => CanonicalPotential::zero(x_end),
        "constant" => CanonicalPotential::constant(
            get_f64("potential.p0", 0.0)?,
            get_f64("potential.q0", 0.0)?,
            x_end,
        ),
        "fourier" => CanonicalPotential::fourier(
            get_f64("potential.p0", 0.0)?,
            get_f64("potential.q0", 0.0)?,
            parse_list(kv.get("potential.p_cos"))?,
            parse_list(kv.get("potential.p_sin"))?,
            parse_list(kv.get("potential.q_cos"))?,
            parse_list(kv.get("potential.q_sin"))?,
            x_end,
        ),
        "gauss-bumps" => CanonicalPotential::gauss_bumps(
            parse_bumps(kv.get("potential.p_bumps"))?,
            parse_bumps(kv.get("potential.q_bumps"))?,
            x_end,
        ),
        "sampled" => {
            let Some(file) = kv.get("potential.file") else {
                bail!("potential.kind = sampled requires potential.file");
            };
            let path = base_dir.join(file);
            let (pot_grid, p, q) = io::read_potential(&path)?;
            if pot_grid.x_end() < grid.x_end() * (1.0 - 1e-12) {
                bail!(
                    "sampled potential ends at {}, grid needs {}",
                    pot_grid.x_end(),
                    grid.x_end()
                );
            }
            CanonicalPotential::sampled(pot_grid, p, q).map_err(anyhow::Error::new)?
        }
        other => bail!("unknown potential.kind `{other}`"),
    };

    let scan_step = get_f64("solver.scan_step", 0.05)?;
    let refine_tol = get_f64("solver.refine_tol", 1e-11)?;
    if !(scan_step > 0.0) || !(refine_tol > 0.0) {
        bail!("solver.scan_step and solver.refine_tol must be positive");
    }

    Ok(RunConfig {
        boundary,
        potential,
        grid,
        scan_step,
        refine_tol,
        mode,
    })
}

fn parse_list(value: Option<&String>) -> Result<Vec<f64>> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .with_context(|| format!("invalid list entry `{s}`"))
        })
        .collect()
}

/// Bump lists are comma-separated `amplitude:center:width` triples.
fn parse_bumps(value: Option<&String>) -> Result<Vec<Bump>> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| {
            let parts: Vec<&str> = s.trim().split(':').collect();
            if parts.len() != 3 {
                bail!("bump `{s}` is not amplitude:center:width");
            }
            let nums: Vec<f64> = parts
                .iter()
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .with_context(|| format!("invalid bump field `{p}`"))
                })
                .collect::<Result<_>>()?;
            if !(nums[2] > 0.0) {
                bail!("bump `{s}`: width must be positive");
            }
            Ok(Bump {
                amplitude: nums[0],
                center: nums[1],
                width: nums[2],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<RunConfig> {
        parse(text, Path::new("."))
    }

    #[test]
    fn defaults_are_the_free_interval_problem() {
        let cfg = parse_str("").unwrap();
        assert_eq!(cfg.mode, Mode::FiniteInterval);
        assert_eq!(cfg.boundary.alpha(), 0.0);
        assert_eq!(cfg.grid.n_points(), 4001);
        assert_eq!(cfg.potential.kind_name(), "zero");
        assert!((cfg.grid.x_end() - PI).abs() < 1e-15);
    }

    #[test]
    fn constant_and_fourier_kinds() {
        let cfg = parse_str("potential.kind = constant\npotential.p0 = 0.5").unwrap();
        assert_eq!(cfg.potential.evaluate(1.0).unwrap(), (0.5, 0.0));
        let cfg = parse_str(
            "potential.kind = fourier\npotential.p_cos = 0.1, -0.2\npotential.q0 = 0.3",
        )
        .unwrap();
        assert_eq!(cfg.potential.kind_name(), "fourier");
        let (_, q) = cfg.potential.evaluate(0.0).unwrap();
        assert!((q - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bump_triples() {
        let cfg = parse_str(
            "potential.kind = gauss-bumps\npotential.p_bumps = 0.6:1.1:0.4, -0.3:2.0:0.5",
        )
        .unwrap();
        let (p, _) = cfg.potential.evaluate(1.1).unwrap();
        assert!((p - (0.6 + -0.3 * (-((1.1f64 - 2.0) / 0.5).powi(2)).exp())).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(parse_str("grid.npoints = 7").is_err());
        assert!(parse_str("just some words").is_err());
        assert!(parse_str("mode = diagonal").is_err());
        assert!(parse_str("boundary.alpha = 0.1\nboundary.alpha = 0.2").is_err());
    }

    #[test]
    fn window_mode_defaults() {
        let cfg = parse_str("mode = half-line-window\ngrid.x_end = 8.0").unwrap();
        assert_eq!(cfg.mode, Mode::HalfLineWindow);
        assert!(cfg.grid.spacing() <= PI / 4000.0);
    }
}
