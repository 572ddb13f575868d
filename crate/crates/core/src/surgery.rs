//! Spectral surgery on a truncated half-line window [0, X]: add an
//! eigenvalue, remove one, or rescale a norming constant, plus finite
//! chains of such steps. All integrals are truncated at the window end;
//! every claim is about the truncated operator.

use crate::model::{
    BoundaryParams, CanonicalPotential, Grid, SurgeryPlan, SurgeryStep, VectorSolution,
};
use crate::ode::{DiscretizedPotential, IntegratorSettings};
use crate::spectrum::refine_near;
use crate::xform::{apply_rank_one, transformed_state};
use crate::{Error, Result};

/// Default minimal admissible theta value.
pub const DEFAULT_THETA_FLOOR: f64 = 1e-8;

/// The truncation window: its end, the grid resolving it, and the theta
/// floor below which a transform is rejected as singular.
#[derive(Clone, Copy, Debug)]
pub struct WindowContext {
    window_end: f64,
    theta_floor: f64,
    grid: Grid,
}

impl WindowContext {
    /// Window with the default grid (spacing at most pi/4000) and floor.
    pub fn new(window_end: f64) -> Result<WindowContext> {
        Ok(WindowContext {
            window_end,
            theta_floor: DEFAULT_THETA_FLOOR,
            grid: Grid::default_window(window_end)?,
        })
    }

    pub fn with_grid(window_end: f64, grid: Grid) -> Result<WindowContext> {
        if (grid.x_end() - window_end).abs() > 1e-12 * window_end {
            return Err(Error::Shape(format!(
                "grid ends at {}, window at {window_end}",
                grid.x_end()
            )));
        }
        Ok(WindowContext {
            window_end,
            theta_floor: DEFAULT_THETA_FLOOR,
            grid,
        })
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    pub fn theta_floor(&self) -> f64 {
        self.theta_floor
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The grid transforms are emitted on: refined so that the integrator
    /// re-reads emitted potentials without interpolation error.
    pub fn transform_grid(&self) -> Grid {
        self.grid.refine(IntegratorSettings::default().query_refine())
    }
}

/// The seed `h = c * phi(., nu, alpha, Omega)` on the transform grid, with
/// its running squared-norm accumulator (scaled by c^2).
pub fn window_solution(
    pot: &CanonicalPotential,
    alpha: f64,
    nu: f64,
    c: f64,
    ctx: &WindowContext,
) -> Result<VectorSolution> {
    if !(c > 0.0) {
        return Err(Error::Invalid {
            what: "normalization constant",
            why: format!("c = {c} must be positive"),
        });
    }
    let fine = ctx.transform_grid();
    let phi = crate::ode::integrate_left(pot, alpha, nu, &fine)?;
    Ok(phi.scaled(c))
}

/// Insert an eigenvalue at `mu`: the gamma = +1 transform seeded with
/// `c * phi(., mu)`. Theta >= 1 everywhere, so this never turns singular.
pub fn add_eigenvalue(
    pot: &CanonicalPotential,
    alpha: f64,
    mu: f64,
    c: f64,
    ctx: &WindowContext,
) -> Result<CanonicalPotential> {
    let h = window_solution(pot, alpha, mu, c, ctx)?;
    apply_rank_one(pot, &h, 1.0, ctx.theta_floor)
}

fn check_seed(
    alpha: f64,
    lambda0: f64,
    h: &VectorSolution,
    ctx: &WindowContext,
) -> Result<()> {
    if (h.grid.x_end() - ctx.window_end).abs() > 1e-12 * ctx.window_end {
        return Err(Error::Shape(format!(
            "seed trajectory ends at {}, window at {}",
            h.grid.x_end(),
            ctx.window_end
        )));
    }
    if (h.lambda - lambda0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "seed was integrated at lambda = {}, not at lambda0 = {lambda0}",
            h.lambda
        )));
    }
    // h(0) must be parallel to (sin alpha, -cos alpha).
    let (h1, h2) = h.at(0);
    let cross = h1 * alpha.cos() + h2 * alpha.sin();
    if cross.abs() > 1e-6 * h1.hypot(h2) {
        return Err(Error::Precondition(format!(
            "seed violates the boundary condition at 0 (defect {cross:e})"
        )));
    }
    Ok(())
}

/// Delete the eigenvalue at `lambda0`: the gamma = -1 transform. The seed
/// must be normalized over the half-line and supplied with its window
/// accumulator; theta = 1 - accumulator hits the floor near X whenever the
/// window already carries (almost) all of the seed's mass.
pub fn remove_eigenvalue(
    pot: &CanonicalPotential,
    alpha: f64,
    lambda0: f64,
    h: &VectorSolution,
    ctx: &WindowContext,
) -> Result<CanonicalPotential> {
    check_seed(alpha, lambda0, h, ctx)?;
    apply_rank_one(pot, h, -1.0, ctx.theta_floor)
}

/// Rescale the norming constant of the level at `lambda0`: the
/// gamma = e^{-t} - 1 transform on a normalized seed.
pub fn scale_norming(
    pot: &CanonicalPotential,
    alpha: f64,
    lambda0: f64,
    t: f64,
    h: &VectorSolution,
    ctx: &WindowContext,
) -> Result<CanonicalPotential> {
    check_seed(alpha, lambda0, h, ctx)?;
    if t == 0.0 {
        return Ok(pot.clone());
    }
    apply_rank_one(pot, h, (-t).exp_m1(), ctx.theta_floor)
}

/// Truncated eigen-solve: the eigenvalue of the window problem (beta = 0 at
/// X) nearest `seed`, and its eigenfunction normalized over the window, on
/// the transform grid. The eigenfunction is taken from the right-anchored
/// trajectory: under a confining potential the left-anchored one is
/// swamped by the exponentially growing mode long before X.
pub fn window_eigenpair(
    pot: &CanonicalPotential,
    alpha: f64,
    seed: f64,
    ctx: &WindowContext,
) -> Result<(f64, VectorSolution)> {
    let boundary = BoundaryParams::new(alpha, 0.0)?;
    let lambda = refine_near(pot, &boundary, seed, &ctx.grid)?;
    let fine = ctx.transform_grid();
    let disc = DiscretizedPotential::new(pot, &fine, IntegratorSettings::default())?;
    let psi = disc.integrate_right(0.0, lambda)?;
    let total = psi.total_norm_sq();
    Ok((lambda, psi.scaled(1.0 / total.sqrt())))
}

/// The level nearest `seed` and its window norming constant: the squared
/// norm of the eigenfunction scaled to unit length at 0, computed from the
/// right-anchored trajectory for stability.
pub fn window_norming(
    pot: &CanonicalPotential,
    alpha: f64,
    seed: f64,
    ctx: &WindowContext,
) -> Result<(f64, f64)> {
    let boundary = BoundaryParams::new(alpha, 0.0)?;
    let lambda = refine_near(pot, &boundary, seed, &ctx.grid)?;
    let psi = crate::ode::integrate_right(pot, 0.0, lambda, &ctx.grid)?;
    let (y1, y2) = psi.at(0);
    let at_zero = y1 * y1 + y2 * y2;
    if !(at_zero > 0.0) {
        return Err(Error::Precondition(format!(
            "eigenfunction at lambda = {lambda} vanishes at 0"
        )));
    }
    Ok((lambda, psi.total_norm_sq() / at_zero))
}

/// Removal seed: the eigenfunction at the level nearest `seed`, normalized
/// over the extended window [0, norm_end] (a stand-in for the half-line
/// norm), restricted to the transform grid of the surgery window. Returns
/// the refined eigenvalue with the seed.
pub fn halfline_normalized_seed(
    pot: &CanonicalPotential,
    alpha: f64,
    seed: f64,
    norm_end: f64,
    ctx: &WindowContext,
) -> Result<(f64, VectorSolution)> {
    if !(norm_end > ctx.window_end) {
        return Err(Error::Invalid {
            what: "norm window",
            why: format!(
                "norm_end = {norm_end} must exceed the surgery window {}",
                ctx.window_end
            ),
        });
    }
    // Extend the transform grid by whole steps so the surgery window's
    // nodes are a prefix of the extended ones.
    let fine = ctx.transform_grid();
    // Whole steps only, rounded down so the extension never leaves the
    // potential's domain.
    let extra = ((norm_end - ctx.window_end) / fine.spacing()).floor() as usize;
    if extra == 0 {
        return Err(Error::Invalid {
            what: "norm window",
            why: format!(
                "norm_end = {norm_end} is less than one grid step beyond the window"
            ),
        });
    }
    let ext = Grid::new(
        ctx.window_end + extra as f64 * fine.spacing(),
        fine.n_points() + extra,
    )?;
    let boundary = BoundaryParams::new(alpha, 0.0)?;
    let lambda = refine_near(pot, &boundary, seed, &ext)?;
    let psi = crate::ode::integrate_right(pot, 0.0, lambda, &ext)?;
    let psi = psi.scaled(1.0 / psi.total_norm_sq().sqrt());
    let n = fine.n_points();
    Ok((
        lambda,
        VectorSolution {
            grid: fine,
            y1: psi.y1[..n].to_vec(),
            y2: psi.y2[..n].to_vec(),
            norm_accum: psi.norm_accum[..n].to_vec(),
            lambda,
        },
    ))
}

/// The transformed seed `w = h / theta` for a given gamma, with its exact
/// accumulator; the oracle object for intertwining and norm-identity
/// checks.
pub fn transformed_seed(
    h: &VectorSolution,
    gamma: f64,
    ctx: &WindowContext,
) -> Result<VectorSolution> {
    transformed_state(h, gamma, ctx.theta_floor)
}

/// Apply a plan step by step, each seeded from the running potential.
/// Remove steps normalize their seed over the window itself, which puts
/// theta exactly at zero at X; plans therefore reject remove steps with the
/// singularity error unless the caller uses [`remove_eigenvalue`] directly
/// with a half-line-normalized seed.
pub fn compose_surgery(
    pot: &CanonicalPotential,
    alpha: f64,
    plan: &SurgeryPlan,
) -> Result<(CanonicalPotential, Vec<CanonicalPotential>)> {
    let ctx = WindowContext::new(plan.window_end)?;
    let mut current = pot.clone();
    let mut intermediates = Vec::with_capacity(plan.steps.len());
    for (index, step) in plan.steps.iter().enumerate() {
        let wrap = |e: Error| Error::SurgeryStep {
            index,
            source: Box::new(e),
        };
        let next = match *step {
            SurgeryStep::Add { nu, c } => add_eigenvalue(&current, alpha, nu, c, &ctx),
            SurgeryStep::Remove { nu } => window_eigenpair(&current, alpha, nu, &ctx)
                .and_then(|(l, h)| remove_eigenvalue(&current, alpha, l, &h, &ctx)),
            SurgeryStep::Scale { nu, t } => window_eigenpair(&current, alpha, nu, &ctx)
                .and_then(|(l, h)| scale_norming(&current, alpha, l, t, &h, &ctx)),
        }
        .map_err(wrap)?;
        intermediates.push(next.clone());
        current = next;
    }
    Ok((current, intermediates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ctx_pi() -> WindowContext {
        WindowContext::new(PI).unwrap()
    }

    #[test]
    fn free_window_solution_closed_form() {
        let pot = CanonicalPotential::zero(PI);
        let ctx = ctx_pi();
        let h = window_solution(&pot, 0.0, 1.0, 1.0, &ctx).unwrap();
        for (i, x) in h.grid.points().enumerate().step_by(3000) {
            assert!((h.y1[i] - x.sin()).abs() < 1e-9);
            assert!((h.y2[i] + x.cos()).abs() < 1e-9);
            assert!((h.norm_accum[i] - x).abs() < 1e-9);
        }
        let h2 = window_solution(&pot, 0.0, 1.0, 2.0, &ctx).unwrap();
        assert!((h2.total_norm_sq() - 4.0 * h.total_norm_sq()).abs() < 1e-12);

        let hc = window_solution(&pot, PI / 2.0, 0.0, 1.0, &ctx).unwrap();
        assert_eq!(hc.at(100).0, 1.0);
        assert!(hc.at(100).1.abs() < 1e-15);
        assert!((hc.norm_accum[hc.len() - 1] - PI).abs() < 1e-10);
    }

    #[test]
    fn window_solution_requires_positive_c() {
        let pot = CanonicalPotential::zero(PI);
        assert!(window_solution(&pot, 0.0, 1.0, 0.0, &ctx_pi()).is_err());
        assert!(window_solution(&pot, 0.0, 1.0, -1.0, &ctx_pi()).is_err());
    }

    #[test]
    fn add_on_zero_potential_closed_form() {
        // h = (sin x, -cos x), theta = 1 + x:
        // p~ = -sin(2x)/(1+x), q~ = cos(2x)/(1+x).
        let x_end = 5.0;
        let pot = CanonicalPotential::zero(x_end);
        let ctx = WindowContext::new(x_end).unwrap();
        let out = add_eigenvalue(&pot, 0.0, 1.0, 1.0, &ctx).unwrap();
        // check at emission nodes (between nodes only linear interpolation
        // accuracy is available)
        let fine = ctx.transform_grid();
        for i in [0, fine.n_points() / 3, fine.n_points() - 1] {
            let x = fine.point(i);
            let (p, q) = out.evaluate(x).unwrap();
            assert!((p + (2.0 * x).sin() / (1.0 + x)).abs() < 1e-9, "p({x}) = {p}");
            assert!((q - (2.0 * x).cos() / (1.0 + x)).abs() < 1e-9, "q({x}) = {q}");
        }
    }

    #[test]
    fn add_with_tiny_c_is_a_tiny_perturbation() {
        let pot = CanonicalPotential::constant(0.2, 0.0, PI);
        let ctx = ctx_pi();
        let c = 1e-3;
        let out = add_eigenvalue(&pot, 0.0, 0.5, c, &ctx).unwrap();
        let mut max_dev = 0.0_f64;
        for x in ctx.grid().points() {
            let (p, q) = out.evaluate(x).unwrap();
            max_dev = max_dev.max((p - 0.2).abs()).max(q.abs());
        }
        // |gamma / theta * M| <= 2 c^2 max|phi|^2, and |phi| stays O(1)
        assert!(max_dev < 10.0 * c * c, "max_dev = {max_dev}");
    }

    #[test]
    fn remove_rejects_inconsistent_seeds() {
        let pot = CanonicalPotential::zero(PI);
        let ctx = ctx_pi();
        let h = window_solution(&pot, 0.0, 1.0, 0.1, &ctx).unwrap();
        // wrong lambda
        assert!(matches!(
            remove_eigenvalue(&pot, 0.0, 2.0, &h, &ctx),
            Err(Error::Precondition(_))
        ));
        // wrong boundary angle
        assert!(matches!(
            remove_eigenvalue(&pot, 0.4, 1.0, &h, &ctx),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn remove_of_window_normalized_seed_is_singular_near_the_end() {
        let pot = CanonicalPotential::zero(PI);
        let ctx = ctx_pi();
        let (lambda, h) = window_eigenpair(&pot, 0.0, 1.0, &ctx).unwrap();
        assert!((lambda - 1.0).abs() < 1e-9);
        match remove_eigenvalue(&pot, 0.0, lambda, &h, &ctx) {
            Err(Error::Singularity { x, .. }) => assert!(x > 0.9 * PI),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn remove_with_partial_mass_is_regular() {
        // accumulated mass 0.9 over the window -> theta(X) = 0.1.
        let pot = CanonicalPotential::zero(PI);
        let ctx = ctx_pi();
        let c = (0.9 / PI).sqrt();
        let h = window_solution(&pot, 0.0, 1.0, c, &ctx).unwrap();
        let out = remove_eigenvalue(&pot, 0.0, 1.0, &h, &ctx).unwrap();
        assert_eq!(out.kind_name(), "sampled");
        let w = transformed_seed(&h, -1.0, &ctx).unwrap();
        // exact antiderivative identity: |w|^2 = (1/g)(1/theta(0) - 1/theta(X))
        let expect = -(1.0 - 1.0 / 0.1);
        assert!((w.total_norm_sq() - expect).abs() < 1e-9);
    }

    #[test]
    fn scale_with_zero_t_is_the_identity() {
        let pot = CanonicalPotential::constant(0.1, 0.0, PI);
        let ctx = ctx_pi();
        let (lambda, h) = window_eigenpair(&pot, 0.0, 1.0, &ctx).unwrap();
        let out = scale_norming(&pot, 0.0, lambda, 0.0, &h, &ctx).unwrap();
        assert_eq!(out, pot);
    }

    #[test]
    fn empty_plan_is_the_identity() {
        let pot = CanonicalPotential::zero(PI);
        let plan = SurgeryPlan {
            steps: vec![],
            window_end: PI,
        };
        let (out, inter) = compose_surgery(&pot, 0.0, &plan).unwrap();
        assert_eq!(out, pot);
        assert!(inter.is_empty());
    }

    #[test]
    fn single_add_plan_reduces_to_add_eigenvalue() {
        let pot = CanonicalPotential::zero(PI);
        let ctx = ctx_pi();
        let direct = add_eigenvalue(&pot, 0.0, 0.7, 1.0, &ctx).unwrap();
        let plan = SurgeryPlan {
            steps: vec![SurgeryStep::Add { nu: 0.7, c: 1.0 }],
            window_end: PI,
        };
        let (out, inter) = compose_surgery(&pot, 0.0, &plan).unwrap();
        assert_eq!(out, direct);
        assert_eq!(inter.len(), 1);
    }

    #[test]
    fn failing_step_reports_its_index() {
        let pot = CanonicalPotential::zero(PI);
        let plan = SurgeryPlan {
            steps: vec![
                SurgeryStep::Add { nu: 0.7, c: 1.0 },
                SurgeryStep::Remove { nu: 0.7 },
            ],
            window_end: PI,
        };
        match compose_surgery(&pot, 0.0, &plan) {
            Err(Error::SurgeryStep { index: 1, source }) => {
                assert!(matches!(*source, Error::Singularity { .. }));
            }
            other => panic!("expected step-1 failure, got {other:?}"),
        }
    }
}
