//! CSV readers and writers. All numeric columns use 17 significant digits
//! so files round-trip exactly; scalar results ride on `#` comment lines.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dirac_spectral::model::{
    CanonicalPotential, Grid, GradientBundle, SpectrumTable, SurgeryPlan, SurgeryStep,
};

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_spectrum(path: &Path, table: &SpectrumTable) -> Result<()> {
    let mut out = String::from("n,lambda,a,b,r,c\n");
    for d in table.iter() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            d.n,
            fmt(d.lambda),
            fmt(d.a),
            fmt(d.b),
            fmt(d.r),
            fmt(d.c)
        ));
    }
    write_file(path, &out)
}

/// `x,p,q` rows sampled at the grid nodes, preceded by any comment lines.
pub fn write_potential(
    path: &Path,
    pot: &CanonicalPotential,
    grid: &Grid,
    comments: &[String],
) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str("x,p,q\n");
    for x in grid.points() {
        let (p, q) = pot.evaluate(x).map_err(anyhow::Error::new)?;
        out.push_str(&format!("{},{},{}\n", fmt(x), fmt(p), fmt(q)));
    }
    write_file(path, &out)
}

pub fn write_gradient(path: &Path, bundle: &GradientBundle, extra: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# d_alpha={}\n", fmt(bundle.d_alpha)));
    if let Some(d_beta) = bundle.d_beta {
        out.push_str(&format!("# d_beta={}\n", fmt(d_beta)));
    }
    for c in extra {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str("x,d_p,d_q\n");
    for (i, x) in bundle.grid.points().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt(x),
            fmt(bundle.d_p[i]),
            fmt(bundle.d_q[i])
        ));
    }
    write_file(path, &out)
}

pub fn write_history(path: &Path, history: &[(usize, f64)]) -> Result<()> {
    let mut out = String::from("iter,misfit\n");
    for &(iter, misfit) in history {
        out.push_str(&format!("{iter},{}\n", fmt(misfit)));
    }
    write_file(path, &out)
}

fn data_lines(text: &str, header: &str) -> Vec<(usize, String)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#') && l != header)
        .collect()
}

/// Read `x,p,q` rows into a uniformly sampled potential.
pub fn read_potential(path: &Path) -> Result<(Grid, Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read potential file {}", path.display()))?;
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    let mut qs = Vec::new();
    for (lineno, line) in data_lines(&text, "x,p,q") {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            bail!("{}:{lineno}: expected x,p,q", path.display());
        }
        let nums: Vec<f64> = fields
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}:{lineno}: invalid number `{f}`", path.display()))
            })
            .collect::<Result<_>>()?;
        xs.push(nums[0]);
        ps.push(nums[1]);
        qs.push(nums[2]);
    }
    if xs.len() < 2 {
        bail!("{}: need at least two samples", path.display());
    }
    if xs[0] != 0.0 {
        bail!("{}: samples must start at x = 0", path.display());
    }
    let grid = Grid::new(*xs.last().unwrap(), xs.len()).map_err(anyhow::Error::new)?;
    for (i, &x) in xs.iter().enumerate() {
        if (x - grid.point(i)).abs() > 1e-9 * (1.0 + x.abs()) {
            bail!("{}: samples are not uniformly spaced (row {i})", path.display());
        }
    }
    Ok((grid, ps, qs))
}

/// Schedule files: `n,t_n` rows.
pub fn read_schedule(path: &Path) -> Result<Vec<(i32, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read schedule file {}", path.display()))?;
    let mut pairs = Vec::new();
    for (lineno, line) in data_lines(&text, "n,t_n") {
        let Some((n, t)) = line.split_once(',') else {
            bail!("{}:{lineno}: expected n,t_n", path.display());
        };
        let n: i32 = n
            .trim()
            .parse()
            .with_context(|| format!("{}:{lineno}: invalid index `{n}`", path.display()))?;
        let t: f64 = t
            .trim()
            .parse()
            .with_context(|| format!("{}:{lineno}: invalid flow time `{t}`", path.display()))?;
        pairs.push((n, t));
    }
    Ok(pairs)
}

/// Target files for the fitter: `n,lambda` rows.
pub fn read_targets(path: &Path) -> Result<Vec<(i32, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read target file {}", path.display()))?;
    let mut targets = Vec::new();
    for (lineno, line) in data_lines(&text, "n,lambda") {
        let Some((n, lambda)) = line.split_once(',') else {
            bail!("{}:{lineno}: expected n,lambda", path.display());
        };
        let n: i32 = n
            .trim()
            .parse()
            .with_context(|| format!("{}:{lineno}: invalid index `{n}`", path.display()))?;
        let lambda: f64 = lambda
            .trim()
            .parse()
            .with_context(|| format!("{}:{lineno}: invalid eigenvalue `{lambda}`", path.display()))?;
        targets.push((n, lambda));
    }
    Ok(targets)
}

/// Plan files: `op,nu,t,c` rows; `t` applies to scale, `c` to add, and
/// either may be left empty for steps that do not use it.
pub fn read_plan(path: &Path, window_end: f64) -> Result<SurgeryPlan> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read plan file {}", path.display()))?;
    let mut steps = Vec::new();
    for (lineno, line) in data_lines(&text, "op,nu,t,c") {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            bail!("{}:{lineno}: expected op,nu,t,c", path.display());
        }
        let num = |s: &str, what: &str, default: f64| -> Result<f64> {
            if s.is_empty() {
                Ok(default)
            } else {
                s.parse::<f64>()
                    .with_context(|| format!("{}:{lineno}: invalid {what} `{s}`", path.display()))
            }
        };
        let nu = num(fields[1], "nu", f64::NAN)?;
        if nu.is_nan() {
            bail!("{}:{lineno}: every step needs nu", path.display());
        }
        let step = match fields[0] {
            "add" => SurgeryStep::Add {
                nu,
                c: num(fields[3], "c", 1.0)?,
            },
            "remove" => SurgeryStep::Remove { nu },
            "scale" => SurgeryStep::Scale {
                nu,
                t: num(fields[2], "t", 0.0)?,
            },
            other => bail!("{}:{lineno}: unknown op `{other}`", path.display()),
        };
        steps.push(step);
    }
    Ok(SurgeryPlan { steps, window_end })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [std::f64::consts::PI, -1.0 / 3.0, 1e-300, 6.02e23] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn potential_file_round_trip() {
        let dir = std::env::temp_dir().join("dirac-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pot.csv");
        let grid = Grid::new(2.0, 5).unwrap();
        let pot = CanonicalPotential::constant(0.25, -0.5, 2.0);
        write_potential(&path, &pot, &grid, &["note".into()]).unwrap();
        let (g, p, q) = read_potential(&path).unwrap();
        assert_eq!(g.n_points(), 5);
        assert_eq!(p, vec![0.25; 5]);
        assert_eq!(q, vec![-0.5; 5]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let dir = std::env::temp_dir().join("dirac-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("targets.csv");
        std::fs::write(&path, "n,lambda\n0,1.0\n1,oops\n").unwrap();
        let err = format!("{:#}", read_targets(&path).unwrap_err());
        assert!(err.contains(":3"), "{err}");
    }

    #[test]
    fn plan_rows_parse() {
        let dir = std::env::temp_dir().join("dirac-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("plan.csv");
        std::fs::write(&path, "op,nu,t,c\nadd,0.7,,1.0\nscale,0.7,1.0,\n").unwrap();
        let plan = read_plan(&path, 8.0).unwrap();
        assert_eq!(plan.steps.len(), 2);
        assert_eq!(plan.steps[0], SurgeryStep::Add { nu: 0.7, c: 1.0 });
        assert_eq!(plan.steps[1], SurgeryStep::Scale { nu: 0.7, t: 1.0 });
    }
}
