//! Rank-one isospectral deformations of the potential on the finite
//! interval. One flow parameter `t_m` per eigenvalue index: the spectrum is
//! left fixed while the left norming constant `a_m` is multiplied by
//! `e^{-t_m}`. Sequences of deformations are applied in the staged order
//! 0, 1, -1, 2, -2, ...

use crate::model::{
    BoundaryParams, CanonicalPotential, DeformationSchedule, Grid, VectorSolution,
    stage_target,
};
use crate::ode::{integrate_left, IntegratorSettings};
use crate::spectrum::{locate_eigenvalues, refine_near, SearchWindow};
use crate::xform::{apply_rank_one, theta_values, transformed_state};
use crate::{Error, Result};

/// Minimum admissible value of theta anywhere on the interval.
pub const THETA_FLOOR: f64 = 1e-8;

/// Unit-norm tolerance accepted for deformation seeds.
const NORM_TOL: f64 = 1e-8;

/// The scalar factor `theta_m(x, t) = 1 + (e^t - 1) int_0^x |h_m|^2`
/// evaluated on the trajectory grid.
#[derive(Clone, Debug)]
pub struct ThetaFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub t: f64,
    pub m: i32,
}

fn require_unit_norm(h: &VectorSolution) -> Result<()> {
    let total = h.total_norm_sq();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::Precondition(format!(
            "deformation seed must have unit norm, got |h|^2 = {total}"
        )));
    }
    Ok(())
}

/// Build theta from a unit-norm eigenfunction.
pub fn theta(h: &VectorSolution, t: f64, m: i32) -> Result<ThetaFunction> {
    require_unit_norm(h)?;
    Ok(ThetaFunction {
        grid: h.grid,
        values: theta_values(&h.norm_accum, t.exp_m1()),
        t,
        m,
    })
}

/// The deformed eigenfunction `w = h / theta`, still an eigenfunction of
/// the deformed operator at the same eigenvalue.
pub fn transformed_eigenfunction(h: &VectorSolution, t: f64) -> Result<VectorSolution> {
    require_unit_norm(h)?;
    transformed_state(h, t.exp_m1(), THETA_FLOOR)
}

/// Record of one applied deformation stage.
#[derive(Clone, Copy, Debug)]
pub struct StageRecord {
    /// Position in the staged order.
    pub stage: usize,
    /// Eigenvalue index the stage acts on.
    pub n: i32,
    pub t: f64,
    /// The eigenvalue as refined on the potential entering the stage.
    pub lambda: f64,
}

/// The staged application order of a schedule: `(stage, index, t)` for
/// every stage up to the schedule's support, including zero-flow stages.
pub fn schedule_stages(schedule: &DeformationSchedule) -> Vec<(usize, i32, f64)> {
    (0..=schedule.max_stage())
        .map(|m| (m, stage_target(m), schedule.t(stage_target(m))))
        .collect()
}

fn check_finite_interval(boundary: &BoundaryParams) -> Result<()> {
    if boundary.beta() != 0.0 {
        return Err(Error::Precondition(format!(
            "deformations are defined for beta = 0, got beta = {}",
            boundary.beta()
        )));
    }
    Ok(())
}

/// One deformation step at a seeded eigenvalue; returns the new potential
/// (sampled on the query-aligned refinement of `grid`) and the refined
/// eigenvalue.
fn deform_step(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    seed: f64,
    t: f64,
    grid: &Grid,
) -> Result<(CanonicalPotential, f64)> {
    let lambda = refine_near(pot, boundary, seed, grid)?;
    let fine = grid.refine(IntegratorSettings::default().query_refine());
    let raw = integrate_left(pot, boundary.alpha(), lambda, &fine)?;
    let h = raw.scaled(1.0 / raw.total_norm_sq().sqrt());
    let next = apply_rank_one(pot, &h, t.exp_m1(), THETA_FLOOR)?;
    Ok((next, lambda))
}

/// Deform a single index `m` with flow parameter `t`. The spectrum is
/// preserved; `a_m` scales by `e^{-t}`.
pub fn deform_single(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    m: i32,
    t: f64,
    grid: &Grid,
) -> Result<CanonicalPotential> {
    check_finite_interval(boundary)?;
    if t == 0.0 {
        return Ok(pot.clone());
    }
    let window = SearchWindow::new(m.min(0), m.max(0));
    let table = locate_eigenvalues(pot, boundary, &window, grid)?;
    let seed = table.get(m).expect("window covers m").lambda;
    Ok(deform_step(pot, boundary, seed, t, grid)?.0)
}

/// Apply a whole schedule in staged order, skipping zero-flow stages
/// exactly. Returns the final potential and one record per applied stage.
pub fn deform_sequence(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    schedule: &DeformationSchedule,
    grid: &Grid,
) -> Result<(CanonicalPotential, Vec<StageRecord>)> {
    check_finite_interval(boundary)?;
    if schedule.is_identity() {
        return Ok((pot.clone(), Vec::new()));
    }
    let mut n_lo = 0i32;
    let mut n_hi = 0i32;
    for (n, t) in schedule.entries() {
        if t != 0.0 {
            n_lo = n_lo.min(n);
            n_hi = n_hi.max(n);
        }
    }
    // The flow never moves eigenvalues, so one solve of the original
    // potential seeds every stage.
    let table = locate_eigenvalues(pot, boundary, &SearchWindow::new(n_lo, n_hi), grid)?;

    let mut current = pot.clone();
    let mut records = Vec::new();
    for (stage, n, t) in schedule_stages(schedule) {
        if t == 0.0 {
            continue;
        }
        let seed = table.get(n).expect("window covers the support").lambda;
        let (next, lambda) = deform_step(&current, boundary, seed, t, grid)?;
        current = next;
        records.push(StageRecord {
            stage,
            n,
            t,
            lambda,
        });
    }
    Ok((current, records))
}
