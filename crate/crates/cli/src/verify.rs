//! Bundled verification suites: every module's invariants re-checked
//! against closed forms, finite differences, and re-solves at the default
//! grid resolution. One line per check, exit nonzero on any failure.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use dirac_spectral::gradient::{
    boundary_derivative_fd, directional_derivative_analytic, directional_derivative_fd,
    fit_spectrum, grad_boundary, gradient_bundle, BoundaryAngle, FitProblem,
};
use dirac_spectral::isospectral::{deform_sequence, deform_single, transformed_eigenfunction};
use dirac_spectral::model::{
    BoundaryParams, Bump, CanonicalPotential, Channel, DeformationSchedule, Grid, Perturbation,
    VectorSolution,
};
use dirac_spectral::ode::{integrate_left, integrate_right, interior_residuals};
use dirac_spectral::spectrum::{
    estimate_boundary_alpha, locate_eigenvalues, normalized_eigenfunction, SearchWindow, Side,
};
use dirac_spectral::surgery::{
    add_eigenvalue, remove_eigenvalue, scale_norming, transformed_seed, window_eigenpair,
    window_norming, window_solution, WindowContext,
};
use dirac_spectral::Error;

use crate::rng::{seeded_direction, Lcg};

pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    fn new(name: &str, value: f64, bound: f64) -> Check {
        Check {
            name: name.to_string(),
            value,
            bound,
        }
    }

    pub fn pass(&self) -> bool {
        self.value.is_finite() && self.value <= self.bound
    }
}

fn bump_potential() -> CanonicalPotential {
    CanonicalPotential::gauss_bumps(
        vec![Bump {
            amplitude: 0.6,
            center: 1.1,
            width: 0.4,
        }],
        vec![Bump {
            amplitude: -0.4,
            center: 2.1,
            width: 0.35,
        }],
        PI,
    )
}

fn trapezoid_norm(w: &VectorSolution) -> f64 {
    let h = w.grid.spacing();
    let mut sum = 0.0;
    for i in 0..w.len() {
        let (a, b) = w.at(i);
        let f = a * a + b * b;
        sum += if i == 0 || i == w.len() - 1 { 0.5 * f } else { f };
    }
    h * sum
}

fn max_residual(
    pot: &CanonicalPotential,
    w: &VectorSolution,
    lambda: f64,
) -> Result<f64> {
    let res = interior_residuals(pot, w, lambda).map_err(anyhow::Error::new)?;
    Ok(res.iter().map(|&(_, r)| r).fold(0.0f64, f64::max))
}

pub fn suite_ode() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let grid = Grid::default_interval();
    let free = CanonicalPotential::zero(PI);
    let b0 = BoundaryParams::new(0.0, 0.0).map_err(anyhow::Error::new)?;

    // free spectrum, |n| <= 20: lambda_n = n, a_n = b_n = pi
    let table = locate_eigenvalues(&free, &b0, &SearchWindow::new(-20, 20), &grid)
        .map_err(anyhow::Error::new)?;
    let mut lam_dev = 0.0f64;
    let mut a_dev = 0.0f64;
    for d in table.iter() {
        lam_dev = lam_dev.max((d.lambda - d.n as f64).abs());
        a_dev = a_dev.max((d.a - PI).abs()).max((d.b - PI).abs());
    }
    checks.push(Check::new("ode.free.lambda_dev", lam_dev, 1e-9));
    checks.push(Check::new("ode.free.norming_dev", a_dev, 1e-8));

    // constant potential closed form, c in {0.3, 0.5}
    for c in [0.3, 0.5] {
        let pot = CanonicalPotential::constant(c, 0.0, PI);
        let table = locate_eigenvalues(&pot, &b0, &SearchWindow::new(-1, 1), &grid)
            .map_err(anyhow::Error::new)?;
        let dev = (table.get(0).unwrap().lambda + c)
            .abs()
            .max((table.get(1).unwrap().lambda - (1.0 + c * c).sqrt()).abs())
            .max((table.get(-1).unwrap().lambda + (1.0 + c * c).sqrt()).abs());
        checks.push(Check::new(&format!("ode.constant.c={c}"), dev, 1e-8));
    }

    // Lagrange bracket of the two anchored solutions is constant
    let pot = bump_potential();
    let phi = integrate_left(&pot, 0.3, 1.3, &grid).map_err(anyhow::Error::new)?;
    let psi = integrate_right(&pot, -0.2, 1.3, &grid).map_err(anyhow::Error::new)?;
    let w0 = phi.y1[0] * psi.y2[0] - phi.y2[0] * psi.y1[0];
    let mut dev = 0.0f64;
    for i in 0..grid.n_points() {
        let w = phi.y1[i] * psi.y2[i] - phi.y2[i] * psi.y1[i];
        dev = dev.max((w - w0).abs());
    }
    checks.push(Check::new("ode.lagrange_bracket_dev", dev, 1e-8));

    // boundary-angle estimator from tail asymptotics
    let bq = BoundaryParams::new(PI / 4.0, 0.0).map_err(anyhow::Error::new)?;
    let table = locate_eigenvalues(&free, &bq, &SearchWindow::new(-10, 10), &grid)
        .map_err(anyhow::Error::new)?;
    let est = estimate_boundary_alpha(&table, 5).map_err(anyhow::Error::new)?;
    checks.push(Check::new("ode.alpha_estimate.free", (est - PI / 4.0).abs(), 1e-8));

    let bb = BoundaryParams::new(0.3, 0.0).map_err(anyhow::Error::new)?;
    let table = locate_eigenvalues(&pot, &bb, &SearchWindow::new(-14, 14), &grid)
        .map_err(anyhow::Error::new)?;
    let est = estimate_boundary_alpha(&table, 10).map_err(anyhow::Error::new)?;
    checks.push(Check::new("ode.alpha_estimate.bump", (est - 0.3).abs(), 5e-3));

    Ok(checks)
}

pub fn suite_gradient() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let grid = Grid::default_interval();
    let b0 = BoundaryParams::new(0.0, 0.0).map_err(anyhow::Error::new)?;

    // free case: (d/d alpha, d/d beta) = (-1/pi, 1/pi)
    let free = CanonicalPotential::zero(PI);
    let table = locate_eigenvalues(&free, &b0, &SearchWindow::new(-2, 2), &grid)
        .map_err(anyhow::Error::new)?;
    let mut dev = 0.0f64;
    for d in table.iter() {
        let (da, db) = grad_boundary(d);
        dev = dev.max((da + 1.0 / PI).abs()).max((db - 1.0 / PI).abs());
    }
    checks.push(Check::new("gradient.free_boundary_dev", dev, 1e-8));

    // bump case: boundary FD cross-check, eps = 1e-4
    let pot = bump_potential();
    let table = locate_eigenvalues(&pot, &b0, &SearchWindow::new(-3, 3), &grid)
        .map_err(anyhow::Error::new)?;
    let mut dev = 0.0f64;
    for n in -2..=2 {
        let d = table.get(n).unwrap();
        let (da, db) = grad_boundary(d);
        let da_fd = boundary_derivative_fd(&pot, &b0, d, BoundaryAngle::Alpha, 1e-4, &grid)
            .map_err(anyhow::Error::new)?;
        let db_fd = boundary_derivative_fd(&pot, &b0, d, BoundaryAngle::Beta, 1e-4, &grid)
            .map_err(anyhow::Error::new)?;
        dev = dev.max((da_fd - da).abs()).max((db_fd - db).abs());
    }
    checks.push(Check::new("gradient.boundary_fd_dev", dev, 1e-5));

    // seeded trigonometric directions, both channels, n in [-3, 3]
    let mut rng = Lcg::new(20240817);
    let mut rel = 0.0f64;
    for channel in [Channel::P, Channel::Q] {
        for _ in 0..3 {
            let v = seeded_direction(&mut rng, &grid);
            let pert = Perturbation::new(v, 1e-3, channel).map_err(anyhow::Error::new)?;
            for n in -3..=3 {
                let d = table.get(n).unwrap();
                let bundle =
                    gradient_bundle(&pot, &b0, d, &grid).map_err(anyhow::Error::new)?;
                let an = directional_derivative_analytic(&bundle, &pert)
                    .map_err(anyhow::Error::new)?;
                let fd = directional_derivative_fd(&pot, &b0, d, &pert, &grid)
                    .map_err(anyhow::Error::new)?;
                rel = rel.max((fd - an).abs() / an.abs().max(1.0));
            }
        }
    }
    checks.push(Check::new("gradient.fd_rel_err", rel, 1e-4));

    // constant direction on the constant model: d lambda_0 / d p0 = -1
    let cpot = CanonicalPotential::constant(0.3, 0.0, PI);
    let ctable = locate_eigenvalues(&cpot, &b0, &SearchWindow::new(0, 0), &grid)
        .map_err(anyhow::Error::new)?;
    let d = ctable.get(0).unwrap();
    let pert = Perturbation::new(vec![1.0; grid.n_points()], 1e-3, Channel::P)
        .map_err(anyhow::Error::new)?;
    let bundle = gradient_bundle(&cpot, &b0, d, &grid).map_err(anyhow::Error::new)?;
    let an = directional_derivative_analytic(&bundle, &pert).map_err(anyhow::Error::new)?;
    checks.push(Check::new("gradient.constant_direction", (an + 1.0).abs(), 1e-6));

    // fitter: recover the constant model from zero; misfit drop >= 1e4
    let targets: Vec<(i32, f64)> = locate_eigenvalues(&cpot, &b0, &SearchWindow::new(-2, 2), &grid)
        .map_err(anyhow::Error::new)?
        .iter()
        .map(|d| (d.n, d.lambda))
        .collect();
    let problem = FitProblem {
        targets,
        boundary: b0,
        grid,
        learn_rate: 0.5,
        max_iters: 200,
        misfit_tol: 1e-7,
        fit_p: true,
        fit_q: false,
    };
    let fit = fit_spectrum(&problem, &CanonicalPotential::zero(PI)).map_err(anyhow::Error::new)?;
    let first = fit.history.first().unwrap().1;
    let last = fit.history.last().unwrap().1;
    checks.push(Check::new("gradient.fit_misfit_drop", last / first, 1e-4));

    Ok(checks)
}

pub fn suite_isospectral() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let grid = Grid::default_interval();
    let b0 = BoundaryParams::new(0.0, 0.0).map_err(anyhow::Error::new)?;
    let fine = grid.refine(6);

    // closed form on the zero potential: q~ = g/(pi + g x), p~ = 0
    let free = CanonicalPotential::zero(PI);
    for t in [std::f64::consts::LN_2, -1.0] {
        let g = t.exp_m1();
        let out = deform_single(&free, &b0, 0, t, &grid).map_err(anyhow::Error::new)?;
        let mut q_dev = 0.0f64;
        let mut p_dev = 0.0f64;
        for x in fine.points() {
            let (p, q) = out.evaluate(x).map_err(anyhow::Error::new)?;
            q_dev = q_dev.max((q - g / (PI + g * x)).abs());
            p_dev = p_dev.max(p.abs());
        }
        checks.push(Check::new(&format!("isospectral.closed_form.q t={t:.3}"), q_dev, 1e-10));
        checks.push(Check::new(&format!("isospectral.closed_form.p t={t:.3}"), p_dev, 1e-12));
    }

    // bump model, m = 0, t = 1: re-solve oracle over |n| <= 8
    let pot = bump_potential();
    let window = SearchWindow::new(-8, 8);
    let before = locate_eigenvalues(&pot, &b0, &window, &grid).map_err(anyhow::Error::new)?;
    let out = deform_single(&pot, &b0, 0, 1.0, &grid).map_err(anyhow::Error::new)?;
    let after = locate_eigenvalues(&out, &b0, &window, &grid).map_err(anyhow::Error::new)?;
    let mut drift = 0.0f64;
    let mut ratio0 = 0.0f64;
    let mut others = 0.0f64;
    for d in before.iter() {
        let y = after.get(d.n).unwrap();
        drift = drift.max((y.lambda - d.lambda).abs());
        if d.n == 0 {
            ratio0 = (y.a / d.a - (-1.0f64).exp()).abs();
        } else {
            others = others.max((y.a / d.a - 1.0).abs());
        }
    }
    checks.push(Check::new("isospectral.bump.drift", drift, 1e-7));
    checks.push(Check::new("isospectral.bump.a0_ratio_dev", ratio0, 1e-6));
    checks.push(Check::new("isospectral.bump.other_ratio_dev", others, 1e-6));

    // intertwining: w = h/theta solves the deformed system at lambda_0
    let d0 = before.get(0).unwrap();
    let h = normalized_eigenfunction(&pot, &b0, d0, Side::Left, &fine)
        .map_err(anyhow::Error::new)?;
    let w = transformed_eigenfunction(&h, 1.0).map_err(anyhow::Error::new)?;
    checks.push(Check::new(
        "isospectral.intertwining_residual",
        max_residual(&out, &w, d0.lambda)?,
        1e-6,
    ));
    let closed = w.total_norm_sq();
    let norm_dev = (closed - (-1.0f64).exp())
        .abs()
        .max((trapezoid_norm(&w) - closed).abs());
    checks.push(Check::new("isospectral.norm_identity_dev", norm_dev, 1e-6));

    // staged sequence: t_0 = 0.4, t_1 = -0.3, t_{-1} = 0.6
    let schedule = DeformationSchedule::from_pairs(&[(0, 0.4), (1, -0.3), (-1, 0.6)]);
    let window = SearchWindow::new(-3, 3);
    let before = locate_eigenvalues(&pot, &b0, &window, &grid).map_err(anyhow::Error::new)?;
    let (out, _) = deform_sequence(&pot, &b0, &schedule, &grid).map_err(anyhow::Error::new)?;
    let after = locate_eigenvalues(&out, &b0, &window, &grid).map_err(anyhow::Error::new)?;
    let mut drift = 0.0f64;
    let mut touched = 0.0f64;
    let mut untouched = 0.0f64;
    for d in before.iter() {
        let y = after.get(d.n).unwrap();
        drift = drift.max((y.lambda - d.lambda).abs());
        let dev = (y.a / d.a - (-schedule.t(d.n)).exp()).abs();
        if schedule.t(d.n) != 0.0 {
            touched = touched.max(dev);
        } else {
            untouched = untouched.max(dev);
        }
    }
    checks.push(Check::new("isospectral.sequence.drift", drift, 1e-6));
    checks.push(Check::new("isospectral.sequence.touched_ratio_dev", touched, 1e-5));
    checks.push(Check::new("isospectral.sequence.untouched_ratio_dev", untouched, 1e-5));

    Ok(checks)
}

pub fn suite_surgery() -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // add on the zero potential, mu = 1, c = 1, X = 40: closed form
    let x_end = 40.0;
    let free = CanonicalPotential::zero(x_end);
    let ctx = WindowContext::new(x_end).map_err(anyhow::Error::new)?;
    let out = add_eigenvalue(&free, 0.0, 1.0, 1.0, &ctx).map_err(anyhow::Error::new)?;
    let fine = ctx.transform_grid();
    let mut dev = 0.0f64;
    for x in fine.points() {
        let (p, q) = out.evaluate(x).map_err(anyhow::Error::new)?;
        dev = dev
            .max((p + (2.0 * x).sin() / (1.0 + x)).abs())
            .max((q - (2.0 * x).cos() / (1.0 + x)).abs());
    }
    checks.push(Check::new("surgery.add.closed_form_dev", dev, 1e-9));

    let h = window_solution(&free, 0.0, 1.0, 1.0, &ctx).map_err(anyhow::Error::new)?;
    let w = transformed_seed(&h, 1.0, &ctx).map_err(anyhow::Error::new)?;
    let closed = w.total_norm_sq();
    checks.push(Check::new(
        "surgery.add.w_norm_dev",
        (closed - (1.0 - 1.0 / 41.0)).abs(),
        1e-6,
    ));
    checks.push(Check::new(
        "surgery.add.norm_identity_dev",
        (trapezoid_norm(&w) - closed).abs(),
        1e-6,
    ));
    checks.push(Check::new(
        "surgery.add.intertwining_residual",
        max_residual(&out, &w, 1.0)?,
        1e-6,
    ));

    // scale on the confining model p(x) = x: window norming picks up e^{t}
    let confining = CanonicalPotential::sampled(
        Grid::new(30.0, 2).map_err(anyhow::Error::new)?,
        vec![0.0, 30.0],
        vec![0.0, 0.0],
    )
    .map_err(anyhow::Error::new)?;
    let ctx = WindowContext::new(12.0).map_err(anyhow::Error::new)?;
    let t = 0.5f64;
    let (l0, a_before) = window_norming(&confining, 0.0, -0.8, &ctx).map_err(anyhow::Error::new)?;
    let (le, h) = window_eigenpair(&confining, 0.0, -0.8, &ctx).map_err(anyhow::Error::new)?;
    let out = scale_norming(&confining, 0.0, le, t, &h, &ctx).map_err(anyhow::Error::new)?;
    let (_, a_after) = window_norming(&out, 0.0, l0, &ctx).map_err(anyhow::Error::new)?;
    checks.push(Check::new(
        "surgery.scale.norming_ratio_dev",
        (a_after / a_before / t.exp() - 1.0).abs(),
        1e-3,
    ));
    let w = transformed_seed(&h, (-t).exp_m1(), &ctx).map_err(anyhow::Error::new)?;
    checks.push(Check::new(
        "surgery.scale.intertwining_residual",
        max_residual(&out, &w, le)?,
        1e-6,
    ));

    // removing a seed whose mass all sits in the window must be rejected
    let singular = match remove_eigenvalue(&confining, 0.0, le, &h, &ctx) {
        Err(Error::Singularity { .. }) => 0.0,
        _ => 1.0,
    };
    checks.push(Check::new("surgery.remove.singularity_contract", singular, 0.5));

    Ok(checks)
}

pub fn run_suite(suite: &str) -> Result<Vec<Check>> {
    match suite {
        "ode" => suite_ode(),
        "gradient" => suite_gradient(),
        "isospectral" => suite_isospectral(),
        "surgery" => suite_surgery(),
        "all" => {
            let mut checks = suite_ode()?;
            checks.extend(suite_gradient()?);
            checks.extend(suite_isospectral()?);
            checks.extend(suite_surgery()?);
            Ok(checks)
        }
        other => bail!("unknown suite `{other}` (ode|gradient|isospectral|surgery|all)"),
    }
}

/// Print one line per check; returns whether everything passed.
pub fn print_report(checks: &[Check]) -> bool {
    let color = std::env::var_os("NO_COLOR").is_none();
    let mut ok = true;
    for c in checks {
        let pass = c.pass();
        ok &= pass;
        let (tag, rel) = if pass { ("PASS", "<=") } else { ("FAIL", ">") };
        let tag = match (pass, color) {
            (true, true) => format!("\x1b[32m{tag}\x1b[0m"),
            (false, true) => format!("\x1b[31m{tag}\x1b[0m"),
            _ => tag.to_string(),
        };
        println!("{tag} {}: {:.3e} {rel} {:.1e}", c.name, c.value, c.bound);
    }
    ok
}
