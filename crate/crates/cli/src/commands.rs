//! Subcommand implementations. Each command loads a run configuration,
//! drives the library, and writes plot-ready CSV files; scalar results are
//! appended as `#` comment lines and echoed to stdout.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dirac_spectral::gradient::{
    directional_derivative_analytic, directional_derivative_fd, gradient_bundle, FitProblem,
    fit_spectrum,
};
use dirac_spectral::isospectral::{deform_sequence, deform_single};
use dirac_spectral::model::{
    CanonicalPotential, Channel, DeformationSchedule, Grid, Perturbation, VectorSolution,
};
use dirac_spectral::ode::interior_residuals;
use dirac_spectral::spectrum::{locate_eigenvalues, SearchWindow};
use dirac_spectral::surgery::{
    add_eigenvalue, compose_surgery, halfline_normalized_seed, remove_eigenvalue, scale_norming,
    transformed_seed, window_eigenpair, window_solution, WindowContext,
};

use crate::config::{Mode, RunConfig};
use crate::io;
use crate::rng::{seeded_direction, Lcg};

fn search_window(cfg: &RunConfig, n_min: i32, n_max: i32) -> SearchWindow {
    SearchWindow {
        n_min,
        n_max,
        scan_step: cfg.scan_step,
        refine_tol: cfg.refine_tol,
    }
}

/// The grid a potential is written out on: its own sample nodes when it is
/// a sampled potential, otherwise the query-aligned refinement of the run
/// grid.
fn emission_grid(pot: &CanonicalPotential, cfg: &RunConfig) -> Grid {
    pot.sample_grid().copied().unwrap_or_else(|| cfg.grid.refine(6))
}

pub fn cmd_solve(cfg: &RunConfig, n_min: i32, n_max: i32, out: &Path) -> Result<()> {
    let window = search_window(cfg, n_min, n_max);
    let table = locate_eigenvalues(&cfg.potential, &cfg.boundary, &window, &cfg.grid)
        .map_err(anyhow::Error::new)?;
    io::write_spectrum(out, &table)?;
    println!("wrote {} rows to {}", table.len(), out.display());
    Ok(())
}

pub fn cmd_gradient(
    cfg: &RunConfig,
    n: i32,
    out: &Path,
    check_fd: bool,
    eps: f64,
    seed: u64,
) -> Result<()> {
    let window = search_window(cfg, n.min(0), n.max(0));
    let table = locate_eigenvalues(&cfg.potential, &cfg.boundary, &window, &cfg.grid)
        .map_err(anyhow::Error::new)?;
    let Some(datum) = table.get(n) else {
        bail!("index {n} outside the solved window");
    };
    let mut bundle = gradient_bundle(&cfg.potential, &cfg.boundary, datum, &cfg.grid)
        .map_err(anyhow::Error::new)?;
    if cfg.mode == Mode::HalfLineWindow {
        bundle.d_beta = None;
    }

    let mut extra = vec![format!("lambda={}", io::fmt(datum.lambda))];
    if check_fd {
        let mut rng = Lcg::new(seed);
        for channel in [Channel::P, Channel::Q] {
            let tag = match channel {
                Channel::P => "p",
                Channel::Q => "q",
            };
            for k in 0..3 {
                let v = seeded_direction(&mut rng, &cfg.grid);
                let pert = Perturbation::new(v, eps, channel).map_err(anyhow::Error::new)?;
                let an = directional_derivative_analytic(&bundle, &pert)
                    .map_err(anyhow::Error::new)?;
                let fd =
                    directional_derivative_fd(&cfg.potential, &cfg.boundary, datum, &pert, &cfg.grid)
                        .map_err(anyhow::Error::new)?;
                let rel = (fd - an).abs() / an.abs().max(1.0);
                extra.push(format!("fd_rel_err.{tag}.{k}={}", io::fmt(rel)));
            }
        }
    }
    io::write_gradient(out, &bundle, &extra)?;
    for line in &extra {
        println!("{line}");
    }
    Ok(())
}

fn report_deform(
    cfg: &RunConfig,
    before: &dirac_spectral::model::SpectrumTable,
    out_pot: &CanonicalPotential,
    window: &SearchWindow,
    touched: &[(i32, f64)],
) -> Result<Vec<String>> {
    let after = locate_eigenvalues(out_pot, &cfg.boundary, window, &cfg.grid)
        .map_err(anyhow::Error::new)?;
    let mut max_drift = 0.0f64;
    let mut other_err = 0.0f64;
    let mut lines = Vec::new();
    for d in before.iter() {
        let y = after
            .get(d.n)
            .with_context(|| format!("index {} lost after deformation", d.n))?;
        max_drift = max_drift.max((y.lambda - d.lambda).abs());
        let ratio = y.a / d.a;
        match touched.iter().find(|(n, _)| *n == d.n) {
            Some(&(_, t)) => {
                lines.push(format!(
                    "verify.a_ratio.{}={} (target {})",
                    d.n,
                    io::fmt(ratio),
                    io::fmt((-t).exp())
                ));
            }
            None => other_err = other_err.max((ratio - 1.0).abs()),
        }
    }
    lines.insert(0, format!("verify.max_drift={}", io::fmt(max_drift)));
    lines.push(format!("verify.untouched_ratio_err={}", io::fmt(other_err)));
    Ok(lines)
}

pub fn cmd_deform(cfg: &RunConfig, m: i32, t: f64, out: &Path, verify: bool) -> Result<()> {
    let out_pot = deform_single(&cfg.potential, &cfg.boundary, m, t, &cfg.grid)
        .map_err(anyhow::Error::new)?;
    let mut comments = vec![format!("deform m={m} t={}", io::fmt(t))];
    if verify {
        let window = search_window(cfg, m.min(-3), m.max(3));
        let before = locate_eigenvalues(&cfg.potential, &cfg.boundary, &window, &cfg.grid)
            .map_err(anyhow::Error::new)?;
        comments.extend(report_deform(cfg, &before, &out_pot, &window, &[(m, t)])?);
    }
    io::write_potential(out, &out_pot, &emission_grid(&out_pot, cfg), &comments)?;
    for line in &comments[1..] {
        println!("{line}");
    }
    Ok(())
}

pub fn cmd_deform_seq(
    cfg: &RunConfig,
    schedule_path: &Path,
    out: &Path,
    verify: bool,
) -> Result<()> {
    let pairs = io::read_schedule(schedule_path)?;
    let schedule = DeformationSchedule::from_pairs(&pairs);
    let (out_pot, records) = deform_sequence(&cfg.potential, &cfg.boundary, &schedule, &cfg.grid)
        .map_err(anyhow::Error::new)?;
    let mut comments: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "stage {} n={} t={} lambda={}",
                r.stage,
                r.n,
                io::fmt(r.t),
                io::fmt(r.lambda)
            )
        })
        .collect();
    if verify {
        let touched: Vec<(i32, f64)> = pairs.iter().filter(|(_, t)| *t != 0.0).copied().collect();
        let lo = touched.iter().map(|(n, _)| *n).min().unwrap_or(0).min(-2);
        let hi = touched.iter().map(|(n, _)| *n).max().unwrap_or(0).max(2);
        let window = search_window(cfg, lo, hi);
        let before = locate_eigenvalues(&cfg.potential, &cfg.boundary, &window, &cfg.grid)
            .map_err(anyhow::Error::new)?;
        comments.extend(report_deform(cfg, &before, &out_pot, &window, &touched)?);
    }
    io::write_potential(out, &out_pot, &emission_grid(&out_pot, cfg), &comments)?;
    for line in &comments {
        println!("{line}");
    }
    Ok(())
}

pub enum SurgeryAction {
    Add { mu: f64, c: f64 },
    Remove { mu: f64, norm_window: Option<f64> },
    Scale { mu: f64, t: f64 },
    Plan { path: PathBuf },
}

fn trapezoid_norm(w: &VectorSolution) -> f64 {
    let h = w.grid.spacing();
    let mut sum = 0.0;
    let mut first_last = 0.0;
    for i in 0..w.len() {
        let (a, b) = w.at(i);
        let f = a * a + b * b;
        sum += f;
        if i == 0 || i == w.len() - 1 {
            first_last += f;
        }
    }
    h * (sum - 0.5 * first_last)
}

/// Max intertwining residual of `w` against the transformed potential,
/// skipping nodes where theta (reconstructed from the seed accumulator and
/// gamma) sits within a decade of the floor.
fn surgery_report(
    out_pot: &CanonicalPotential,
    seed: &VectorSolution,
    gamma: f64,
    lambda: f64,
    ctx: &WindowContext,
) -> Result<Vec<String>> {
    let w = transformed_seed(seed, gamma, ctx).map_err(anyhow::Error::new)?;
    let res = interior_residuals(out_pot, &w, lambda).map_err(anyhow::Error::new)?;
    let mut max = 0.0f64;
    for &(i, r) in &res {
        let theta = 1.0 + gamma * seed.norm_accum[i];
        if theta >= 10.0 * ctx.theta_floor() {
            max = max.max(r);
        }
    }
    let closed = w.total_norm_sq();
    let norm_err = (trapezoid_norm(&w) - closed).abs();
    Ok(vec![
        format!("lambda={}", io::fmt(lambda)),
        format!("max_residual={}", io::fmt(max)),
        format!("w_norm_sq={}", io::fmt(closed)),
        format!("w_norm_identity_err={}", io::fmt(norm_err)),
    ])
}

pub fn cmd_surgery(
    cfg: &RunConfig,
    action: &SurgeryAction,
    window: Option<f64>,
    out: &Path,
) -> Result<()> {
    if cfg.mode != Mode::HalfLineWindow {
        bail!("surgery requires mode = half-line-window");
    }
    let alpha = cfg.boundary.alpha();
    let window_end = window.unwrap_or_else(|| cfg.grid.x_end());
    let ctx = if (window_end - cfg.grid.x_end()).abs() <= 1e-12 * window_end {
        WindowContext::with_grid(window_end, cfg.grid).map_err(anyhow::Error::new)?
    } else {
        WindowContext::new(window_end).map_err(anyhow::Error::new)?
    };

    let (out_pot, comments) = match action {
        SurgeryAction::Add { mu, c } => {
            let pot = add_eigenvalue(&cfg.potential, alpha, *mu, *c, &ctx)
                .map_err(anyhow::Error::new)?;
            let h = window_solution(&cfg.potential, alpha, *mu, *c, &ctx)
                .map_err(anyhow::Error::new)?;
            let mut comments = vec![format!("surgery add mu={} c={}", io::fmt(*mu), io::fmt(*c))];
            comments.extend(surgery_report(&pot, &h, 1.0, *mu, &ctx)?);
            (pot, comments)
        }
        SurgeryAction::Remove { mu, norm_window } => {
            let norm_end = norm_window.unwrap_or(1.5 * window_end);
            let (lambda, h) =
                halfline_normalized_seed(&cfg.potential, alpha, *mu, norm_end, &ctx)
                    .map_err(anyhow::Error::new)?;
            let pot = remove_eigenvalue(&cfg.potential, alpha, lambda, &h, &ctx)
                .map_err(anyhow::Error::new)?;
            let mut comments = vec![format!(
                "surgery remove mu={} norm_end={}",
                io::fmt(*mu),
                io::fmt(norm_end)
            )];
            comments.extend(surgery_report(&pot, &h, -1.0, lambda, &ctx)?);
            (pot, comments)
        }
        SurgeryAction::Scale { mu, t } => {
            let (lambda, h) = window_eigenpair(&cfg.potential, alpha, *mu, &ctx)
                .map_err(anyhow::Error::new)?;
            let pot = scale_norming(&cfg.potential, alpha, lambda, *t, &h, &ctx)
                .map_err(anyhow::Error::new)?;
            let mut comments =
                vec![format!("surgery scale mu={} t={}", io::fmt(*mu), io::fmt(*t))];
            comments.extend(surgery_report(&pot, &h, (-t).exp_m1(), lambda, &ctx)?);
            (pot, comments)
        }
        SurgeryAction::Plan { path } => {
            let plan = io::read_plan(path, window_end)?;
            let (fin, inter) =
                compose_surgery(&cfg.potential, alpha, &plan).map_err(anyhow::Error::new)?;
            for (i, pot) in inter.iter().enumerate() {
                let side = sidecar_path(out, i + 1);
                io::write_potential(
                    &side,
                    pot,
                    &emission_grid(pot, cfg),
                    &[format!("plan step {}", i + 1)],
                )?;
                println!("wrote step {} to {}", i + 1, side.display());
            }
            let comments = vec![format!("surgery plan steps={}", plan.steps.len())];
            (fin, comments)
        }
    };

    io::write_potential(out, &out_pot, &emission_grid(&out_pot, cfg), &comments)?;
    for line in &comments[1..] {
        println!("{line}");
    }
    Ok(())
}

fn sidecar_path(out: &Path, step: usize) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".step{step}"));
    out.with_file_name(name)
}

pub fn cmd_fit(
    cfg: &RunConfig,
    target_path: &Path,
    iters: usize,
    lr: f64,
    out: &Path,
) -> Result<()> {
    let targets = io::read_targets(target_path)?;
    let problem = FitProblem {
        targets,
        boundary: cfg.boundary,
        grid: cfg.grid,
        learn_rate: lr,
        max_iters: iters,
        misfit_tol: 1e-9,
        fit_p: true,
        fit_q: true,
    };
    let result = fit_spectrum(&problem, &cfg.potential).map_err(anyhow::Error::new)?;
    let final_misfit = result.history.last().unwrap().1;
    let comments = vec![
        format!("fit iterations={}", result.history.len() - 1),
        format!("final_misfit={}", io::fmt(final_misfit)),
        format!("converged={}", result.converged),
    ];
    io::write_potential(
        out,
        &result.potential,
        &emission_grid(&result.potential, cfg),
        &comments,
    )?;
    io::write_history(&sidecar_history(out), &result.history)?;
    println!("final misfit {}", io::fmt(final_misfit));
    if let Some(why) = result.diverged {
        bail!("fit diverged: {why} (last stable iterate written)");
    }
    Ok(())
}

fn sidecar_history(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".history");
    out.with_file_name(name)
}
