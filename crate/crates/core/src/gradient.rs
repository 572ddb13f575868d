//! Eigenvalue derivatives with respect to the boundary angles and the two
//! potential channels, finite-difference cross-checks, and a gradient
//! descent fit of a potential to target eigenvalues.

use crate::model::{
    BoundaryParams, CanonicalPotential, Channel, GradientBundle, Grid, Perturbation,
    SpectralDatum,
};
use crate::ode::IntegratorSettings;
use crate::spectrum::{locate_eigenvalues, normalized_eigenfunction, refine_near, SearchWindow, Side};
use crate::xform::rank_one_matrix;
use crate::{Error, Result};

/// Boundary-angle derivatives `(d lambda / d alpha, d lambda / d beta)`,
/// which are `(-1/a, 1/b)` in terms of the norming constants.
pub fn grad_boundary(datum: &SpectralDatum) -> (f64, f64) {
    (-1.0 / datum.a, 1.0 / datum.b)
}

/// Full gradient of one eigenvalue: boundary derivatives plus the node-wise
/// functional derivatives `d_p = h1^2 - h2^2` and `d_q = 2 h1 h2` of the
/// unit-norm eigenfunction `h`.
pub fn gradient_bundle(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    datum: &SpectralDatum,
    grid: &Grid,
) -> Result<GradientBundle> {
    let h = normalized_eigenfunction(pot, boundary, datum, Side::Left, grid)?;
    let n = h.len();
    let mut d_p = Vec::with_capacity(n);
    let mut d_q = Vec::with_capacity(n);
    let mut field = Vec::with_capacity(n);
    for i in 0..n {
        let (h1, h2) = h.at(i);
        d_p.push(h1 * h1 - h2 * h2);
        d_q.push(2.0 * h1 * h2);
        field.push(rank_one_matrix(h1, h2));
    }
    let (h1_0, h2_0) = h.at(0);
    let (h1_e, h2_e) = h.at(n - 1);
    Ok(GradientBundle {
        grid: *grid,
        d_alpha: -(h1_0 * h1_0 + h2_0 * h2_0),
        d_beta: Some(h1_e * h1_e + h2_e * h2_e),
        d_p,
        d_q,
        matrix_field: field,
    })
}

fn lerp_to(fine: &Grid, coarse: &Grid, v: &[f64]) -> Vec<f64> {
    let ratio = (fine.n_points() - 1) / (coarse.n_points() - 1);
    (0..fine.n_points())
        .map(|j| {
            let i = j / ratio;
            let rem = j % ratio;
            if rem == 0 {
                v[i]
            } else {
                let frac = rem as f64 / ratio as f64;
                v[i] + frac * (v[i + 1] - v[i])
            }
        })
        .collect()
}

/// `Omega + sign * eps * v` in the perturbation's channel, materialized as a
/// sampled potential on a grid fine enough that the integrator reads it
/// without interpolation error. The direction is given as node samples on
/// `grid` and extended piecewise-linearly.
pub fn apply_perturbation(
    pot: &CanonicalPotential,
    pert: &Perturbation,
    sign: f64,
    grid: &Grid,
) -> Result<CanonicalPotential> {
    if pert.v.len() != grid.n_points() {
        return Err(Error::Shape(format!(
            "direction has {} samples, grid has {} nodes",
            pert.v.len(),
            grid.n_points()
        )));
    }
    let fine = grid.refine(IntegratorSettings::default().query_refine());
    let v_fine = lerp_to(&fine, grid, &pert.v);
    let mut p = Vec::with_capacity(fine.n_points());
    let mut q = Vec::with_capacity(fine.n_points());
    for (j, x) in fine.points().enumerate() {
        let (mut pv, mut qv) = pot.evaluate(x.min(pot.domain_end()))?;
        match pert.channel {
            Channel::P => pv += sign * pert.eps * v_fine[j],
            Channel::Q => qv += sign * pert.eps * v_fine[j],
        }
        p.push(pv);
        q.push(qv);
    }
    CanonicalPotential::sampled(fine, p, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryAngle {
    Alpha,
    Beta,
}

/// Central finite difference of the matched eigenvalue under a boundary
/// angle shift of `+-eps`.
pub fn boundary_derivative_fd(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    datum: &SpectralDatum,
    angle: BoundaryAngle,
    eps: f64,
    grid: &Grid,
) -> Result<f64> {
    let shifted = |s: f64| match angle {
        BoundaryAngle::Alpha => BoundaryParams::new(boundary.alpha() + s, boundary.beta()),
        BoundaryAngle::Beta => BoundaryParams::new(boundary.alpha(), boundary.beta() + s),
    };
    let lp = refine_near(pot, &shifted(eps)?, datum.lambda, grid)?;
    let lm = refine_near(pot, &shifted(-eps)?, datum.lambda, grid)?;
    Ok((lp - lm) / (2.0 * eps))
}

/// Central finite difference of the matched eigenvalue under `+-eps * v`,
/// tracking each perturbed root from the unperturbed one.
pub fn directional_derivative_fd(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    datum: &SpectralDatum,
    pert: &Perturbation,
    grid: &Grid,
) -> Result<f64> {
    let plus = apply_perturbation(pot, pert, 1.0, grid)?;
    let minus = apply_perturbation(pot, pert, -1.0, grid)?;
    let lp = refine_near(&plus, boundary, datum.lambda, grid)?;
    let lm = refine_near(&minus, boundary, datum.lambda, grid)?;
    Ok((lp - lm) / (2.0 * pert.eps))
}

/// Analytic directional derivative: the trapezoid quadrature of the
/// channel's functional derivative against the direction.
pub fn directional_derivative_analytic(
    bundle: &GradientBundle,
    pert: &Perturbation,
) -> Result<f64> {
    let d = match pert.channel {
        Channel::P => &bundle.d_p,
        Channel::Q => &bundle.d_q,
    };
    if pert.v.len() != d.len() {
        return Err(Error::Shape(format!(
            "direction has {} samples, gradient has {} nodes",
            pert.v.len(),
            d.len()
        )));
    }
    let h = bundle.grid.spacing();
    let mut acc = 0.0;
    for i in 0..d.len() - 1 {
        acc += 0.5 * h * (d[i] * pert.v[i] + d[i + 1] * pert.v[i + 1]);
    }
    Ok(acc)
}

/// Gradient-descent fit of the potential to target eigenvalues.
#[derive(Clone, Debug)]
pub struct FitProblem {
    /// `(index, target lambda)` pairs.
    pub targets: Vec<(i32, f64)>,
    pub boundary: BoundaryParams,
    pub grid: Grid,
    pub learn_rate: f64,
    pub max_iters: usize,
    /// Stop once the sum of squared eigenvalue errors drops below this.
    pub misfit_tol: f64,
    pub fit_p: bool,
    pub fit_q: bool,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub potential: CanonicalPotential,
    /// `(iteration, misfit)` after each accepted step; entry 0 is the
    /// initial misfit.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
    /// Set when the line search could not find a descent step; `potential`
    /// then holds the last stable iterate.
    pub diverged: Option<String>,
}

/// How far the backtracking line search may shrink the step before the fit
/// is declared diverged.
const BACKTRACK_LIMIT: u32 = 40;

fn fit_window(targets: &[(i32, f64)]) -> Result<SearchWindow> {
    let n_min = targets.iter().map(|(n, _)| *n).min();
    let n_max = targets.iter().map(|(n, _)| *n).max();
    match (n_min, n_max) {
        (Some(lo), Some(hi)) => Ok(SearchWindow::new(lo, hi)),
        _ => Err(Error::Invalid {
            what: "fit targets",
            why: "no targets given".into(),
        }),
    }
}

fn misfit_and_table(
    pot: &CanonicalPotential,
    problem: &FitProblem,
    window: &SearchWindow,
) -> Result<(f64, Vec<(SpectralDatum, f64)>)> {
    let table = locate_eigenvalues(pot, &problem.boundary, window, &problem.grid)?;
    let mut rows = Vec::with_capacity(problem.targets.len());
    let mut misfit = 0.0;
    for &(n, target) in &problem.targets {
        let d = table.get(n).expect("window covers every target index");
        misfit += (d.lambda - target) * (d.lambda - target);
        rows.push((*d, target));
    }
    Ok((misfit, rows))
}

/// Minimize the squared eigenvalue misfit by steepest descent on the
/// sampled potential channels, with a halving line search.
pub fn fit_spectrum(problem: &FitProblem, init: &CanonicalPotential) -> Result<FitResult> {
    if !(problem.learn_rate > 0.0) {
        return Err(Error::Invalid {
            what: "fit problem",
            why: format!("learn_rate = {} must be positive", problem.learn_rate),
        });
    }
    let window = fit_window(&problem.targets)?;
    let fine = problem
        .grid
        .refine(IntegratorSettings::default().query_refine());

    // Materialize the iterate as samples on the query-aligned fine grid.
    let mut p = Vec::with_capacity(fine.n_points());
    let mut q = Vec::with_capacity(fine.n_points());
    for x in fine.points() {
        let (pv, qv) = init.evaluate(x.min(init.domain_end()))?;
        p.push(pv);
        q.push(qv);
    }
    let mut pot = CanonicalPotential::sampled(fine, p.clone(), q.clone())?;

    let (mut misfit, mut rows) = misfit_and_table(&pot, problem, &window)?;
    let mut history = vec![(0usize, misfit)];
    if misfit <= problem.misfit_tol {
        return Ok(FitResult {
            potential: pot,
            history,
            converged: true,
            diverged: None,
        });
    }

    let mut rate = problem.learn_rate;
    for iter in 1..=problem.max_iters {
        // Gradient of the misfit on the fine grid.
        let mut g_p = vec![0.0; fine.n_points()];
        let mut g_q = vec![0.0; fine.n_points()];
        for (datum, target) in &rows {
            let bundle = gradient_bundle(&pot, &problem.boundary, datum, &fine)?;
            let w = 2.0 * (datum.lambda - target);
            if problem.fit_p {
                for (g, d) in g_p.iter_mut().zip(&bundle.d_p) {
                    *g += w * d;
                }
            }
            if problem.fit_q {
                for (g, d) in g_q.iter_mut().zip(&bundle.d_q) {
                    *g += w * d;
                }
            }
        }

        // Halving line search on the step size.
        let mut halvings = 0u32;
        loop {
            let p_new: Vec<f64> = p.iter().zip(&g_p).map(|(v, g)| v - rate * g).collect();
            let q_new: Vec<f64> = q.iter().zip(&g_q).map(|(v, g)| v - rate * g).collect();
            let cand = CanonicalPotential::sampled(fine, p_new.clone(), q_new.clone())?;
            match misfit_and_table(&cand, problem, &window) {
                Ok((m, r)) if m < misfit => {
                    p = p_new;
                    q = q_new;
                    pot = cand;
                    misfit = m;
                    rows = r;
                    break;
                }
                Ok(_) | Err(Error::Enumeration { .. }) => {
                    halvings += 1;
                    if halvings > BACKTRACK_LIMIT {
                        return Ok(FitResult {
                            potential: pot,
                            history,
                            converged: false,
                            diverged: Some(format!(
                                "no descent after {BACKTRACK_LIMIT} halvings at iteration \
                                 {iter} (misfit = {misfit:e})"
                            )),
                        });
                    }
                    rate *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        history.push((iter, misfit));
        if misfit <= problem.misfit_tol {
            return Ok(FitResult {
                potential: pot,
                history,
                converged: true,
                diverged: None,
            });
        }
    }
    Ok(FitResult {
        potential: pot,
        history,
        converged: false,
        diverged: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{locate_eigenvalues, SearchWindow};
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::default_interval()
    }

    fn free_datum(n: i32) -> (CanonicalPotential, BoundaryParams, SpectralDatum) {
        let pot = CanonicalPotential::zero(PI);
        let boundary = BoundaryParams::new(0.0, 0.0).unwrap();
        let table =
            locate_eigenvalues(&pot, &boundary, &SearchWindow::new(n, n), &grid()).unwrap();
        let d = *table.get(n).unwrap();
        (pot, boundary, d)
    }

    #[test]
    fn free_boundary_gradient() {
        let (_, _, d) = free_datum(1);
        let (da, db) = grad_boundary(&d);
        assert!((da + 1.0 / PI).abs() < 1e-8);
        assert!((db - 1.0 / PI).abs() < 1e-7);
    }

    #[test]
    fn free_bundle_closed_form() {
        let (pot, boundary, d) = free_datum(1);
        let b = gradient_bundle(&pot, &boundary, &d, &grid()).unwrap();
        assert!((b.d_alpha + 1.0 / PI).abs() < 1e-8);
        assert!((b.d_beta.unwrap() - 1.0 / PI).abs() < 1e-8);
        // h = (sin x, -cos x)/sqrt(pi): d_p = -cos(2x)/pi, d_q = -sin(2x)/pi
        for (i, x) in grid().points().enumerate().step_by(500) {
            assert!((b.d_p[i] + (2.0 * x).cos() / PI).abs() < 1e-8);
            assert!((b.d_q[i] + (2.0 * x).sin() / PI).abs() < 1e-8);
            let m = &b.matrix_field[i].0;
            assert!((m[0][0] - b.d_q[i]).abs() < 1e-14);
            assert!((m[0][1] + b.d_p[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_channels_satisfy_pythagoras() {
        let pot = CanonicalPotential::constant(0.3, -0.2, PI);
        let boundary = BoundaryParams::new(0.2, 0.0).unwrap();
        let table =
            locate_eigenvalues(&pot, &boundary, &SearchWindow::new(1, 1), &grid()).unwrap();
        let b = gradient_bundle(&pot, &boundary, table.get(1).unwrap(), &grid()).unwrap();
        let h = normalized_eigenfunction(
            &pot,
            &boundary,
            table.get(1).unwrap(),
            Side::Left,
            &grid(),
        )
        .unwrap();
        for i in (0..b.d_p.len()).step_by(700) {
            let (h1, h2) = h.at(i);
            let norm_sq = h1 * h1 + h2 * h2;
            let lhs = b.d_p[i] * b.d_p[i] + b.d_q[i] * b.d_q[i];
            assert!((lhs - norm_sq * norm_sq).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_derivative_free_cos_direction() {
        let (pot, boundary, d) = free_datum(1);
        let b = gradient_bundle(&pot, &boundary, &d, &grid()).unwrap();
        // d_p = -cos(2x)/pi, so v = cos(2x) integrates to -1/2.
        let v: Vec<f64> = grid().points().map(|x| (2.0 * x).cos()).collect();
        let pert = Perturbation::new(v, 1e-4, Channel::P).unwrap();
        let val = directional_derivative_analytic(&b, &pert).unwrap();
        assert!((val + 0.5).abs() < 1e-6, "val = {val}");
    }

    #[test]
    fn fd_matches_analytic_on_a_constant_potential() {
        let pot = CanonicalPotential::constant(0.2, 0.1, PI);
        let boundary = BoundaryParams::new(0.0, 0.0).unwrap();
        let table =
            locate_eigenvalues(&pot, &boundary, &SearchWindow::new(1, 1), &grid()).unwrap();
        let d = *table.get(1).unwrap();
        let b = gradient_bundle(&pot, &boundary, &d, &grid()).unwrap();
        let v: Vec<f64> = grid().points().map(|x| (x - 1.0).sin()).collect();
        let pert = Perturbation::new(v, 1e-4, Channel::Q).unwrap();
        let fd = directional_derivative_fd(&pot, &boundary, &d, &pert, &grid()).unwrap();
        let an = directional_derivative_analytic(&b, &pert).unwrap();
        assert!((fd - an).abs() < 1e-6, "fd = {fd}, analytic = {an}");
    }

    #[test]
    fn fit_converged_input_returns_immediately() {
        let pot = CanonicalPotential::zero(PI);
        let problem = FitProblem {
            targets: vec![(0, 0.0), (1, 1.0), (-1, -1.0)],
            boundary: BoundaryParams::new(0.0, 0.0).unwrap(),
            grid: Grid::new(PI, 801).unwrap(),
            learn_rate: 0.5,
            max_iters: 10,
            misfit_tol: 1e-12,
            fit_p: true,
            fit_q: true,
        };
        let res = fit_spectrum(&problem, &pot).unwrap();
        assert!(res.converged);
        assert_eq!(res.history.len(), 1);
    }

    #[test]
    fn fit_reduces_the_misfit() {
        let pot = CanonicalPotential::zero(PI);
        let problem = FitProblem {
            targets: vec![(0, 0.05), (1, 1.02)],
            boundary: BoundaryParams::new(0.0, 0.0).unwrap(),
            grid: Grid::new(PI, 801).unwrap(),
            learn_rate: 0.5,
            max_iters: 3,
            misfit_tol: 1e-30,
            fit_p: true,
            fit_q: true,
        };
        let res = fit_spectrum(&problem, &pot).unwrap();
        assert!(res.history.len() >= 2);
        for w in res.history.windows(2) {
            assert!(w[1].1 < w[0].1, "history not decreasing: {:?}", res.history);
        }
    }
}
