//! Shared machinery for rank-one transforms of the potential. Both the
//! isospectral deformations and the surgery operations have the form
//!
//! ```text
//! theta(x) = 1 + gamma * int_0^x |h|^2,
//! Omega~   = Omega + (gamma / theta) * (B h h* - h h* B),
//! w        = h / theta,
//! ```
//!
//! differing only in where `h` comes from and what `gamma` is.

use crate::model::{potential_from_matrix_field, CanonicalPotential, Mat2, VectorSolution};
use crate::{Error, Result};

/// Below this |gamma| the transform is treated as the identity in the
/// quadrature shortcut (the potential update still uses gamma as given).
const GAMMA_EPS: f64 = 1e-14;

/// The antisymmetric-commutator matrix `B h h* - h h* B` for a real
/// two-component vector; symmetric and trace-free by construction.
pub(crate) fn rank_one_matrix(h1: f64, h2: f64) -> Mat2 {
    Mat2([
        [2.0 * h1 * h2, h2 * h2 - h1 * h1],
        [h2 * h2 - h1 * h1, -2.0 * h1 * h2],
    ])
}

/// `theta(x_i) = 1 + gamma * norm_accum[i]` along a trajectory.
pub(crate) fn theta_values(accum: &[f64], gamma: f64) -> Vec<f64> {
    accum.iter().map(|a| 1.0 + gamma * a).collect()
}

/// Reject a theta profile that touches the floor; reports the first
/// offending node.
pub(crate) fn check_floor(theta: &[f64], sol: &VectorSolution, floor: f64) -> Result<()> {
    for (i, &t) in theta.iter().enumerate() {
        if t < floor {
            return Err(Error::Singularity {
                x: sol.grid.point(i),
                theta: t,
            });
        }
    }
    Ok(())
}

/// The transformed seed `w = h / theta`, with the exact running quadrature
/// `int_0^x |w|^2 = (1/gamma) (1 - 1/theta)` (theta is an antiderivative of
/// `gamma |h|^2`, so the integral telescopes).
pub(crate) fn transformed_state(
    h: &VectorSolution,
    gamma: f64,
    floor: f64,
) -> Result<VectorSolution> {
    let theta = theta_values(&h.norm_accum, gamma);
    check_floor(&theta, h, floor)?;
    let n = h.len();
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    let mut acc = Vec::with_capacity(n);
    for i in 0..n {
        y1.push(h.y1[i] / theta[i]);
        y2.push(h.y2[i] / theta[i]);
        if gamma.abs() < GAMMA_EPS {
            acc.push(h.norm_accum[i]);
        } else {
            acc.push((1.0 - 1.0 / theta[i]) / gamma);
        }
    }
    Ok(VectorSolution {
        grid: h.grid,
        y1,
        y2,
        norm_accum: acc,
        lambda: h.lambda,
    })
}

/// Apply the rank-one update to `base` along the trajectory `h`, producing
/// a sampled potential on `h`'s grid.
pub(crate) fn apply_rank_one(
    base: &CanonicalPotential,
    h: &VectorSolution,
    gamma: f64,
    floor: f64,
) -> Result<CanonicalPotential> {
    let theta = theta_values(&h.norm_accum, gamma);
    check_floor(&theta, h, floor)?;
    let mut field = Vec::with_capacity(h.len());
    for (i, x) in h.grid.points().enumerate() {
        let omega = base.matrix_at(x.min(base.domain_end()))?;
        let m = rank_one_matrix(h.y1[i], h.y2[i]).scale(gamma / theta[i]);
        field.push(omega.add(&m));
    }
    potential_from_matrix_field(&field, &h.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::matrices::B;
    use crate::model::Grid;

    #[test]
    fn rank_one_matrix_is_the_commutator() {
        let (h1, h2) = (0.7, -1.3);
        let hh = Mat2([[h1 * h1, h1 * h2], [h1 * h2, h2 * h2]]);
        let expect = B.mul(&hh).sub(&hh.mul(&B));
        assert_eq!(rank_one_matrix(h1, h2), expect);
        assert_eq!(expect.trace(), 0.0);
        assert_eq!(expect.asymmetry(), 0.0);
    }

    #[test]
    fn transformed_quadrature_telescopes() {
        // h = (sin x, -cos x) on [0, pi]: |h|^2 = 1, accum = x, and
        // int_0^x 1/(1 + g u)^2 du = (1/g)(1 - 1/(1 + g x)).
        let grid = Grid::new(std::f64::consts::PI, 2001).unwrap();
        let y1: Vec<f64> = grid.points().map(f64::sin).collect();
        let y2: Vec<f64> = grid.points().map(|x| -x.cos()).collect();
        let acc: Vec<f64> = grid.points().collect();
        let h = VectorSolution {
            grid,
            y1,
            y2,
            norm_accum: acc,
            lambda: 1.0,
        };
        let g = 0.8;
        let w = transformed_state(&h, g, 1e-8).unwrap();
        for (i, x) in grid.points().enumerate().step_by(250) {
            let theta = 1.0 + g * x;
            assert!((w.y1[i] - x.sin() / theta).abs() < 1e-15);
            let expect = (1.0 - 1.0 / theta) / g;
            assert!((w.norm_accum[i] - expect).abs() < 1e-15);
        }
        // tiny gamma falls back to the untransformed accumulator
        let w0 = transformed_state(&h, 0.0, 1e-8).unwrap();
        assert_eq!(w0.norm_accum, h.norm_accum);
    }

    #[test]
    fn floor_violation_reports_first_node() {
        let grid = Grid::new(1.0, 3).unwrap();
        let h = VectorSolution {
            grid,
            y1: vec![1.0; 3],
            y2: vec![0.0; 3],
            norm_accum: vec![0.0, 0.6, 1.2],
            lambda: 0.0,
        };
        match transformed_state(&h, -1.0, 1e-8) {
            Err(Error::Singularity { x, theta }) => {
                assert!((x - 1.0).abs() < 1e-15);
                assert!((theta + 0.2).abs() < 1e-15);
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }
}
