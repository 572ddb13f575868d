//! Seeded linear congruential generator for reproducible finite-difference
//! check directions: x_{k+1} = (6364136223846793005 x_k + 1442695040888963407)
//! mod 2^64, coefficients x_k / 2^64 - 0.5. Identical output on every
//! platform.

use dirac_spectral::model::Grid;

pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Lcg {
        Lcg { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    /// Coefficient in [-0.5, 0.5).
    pub fn next_coeff(&mut self) -> f64 {
        self.next_u64() as f64 / 2f64.powi(64) - 0.5
    }
}

/// One seeded trigonometric direction sampled on `grid`: three harmonics
/// with generator coefficients on both the sine and cosine parts.
pub fn seeded_direction(rng: &mut Lcg, grid: &Grid) -> Vec<f64> {
    let l = grid.x_end();
    let coeffs: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.next_coeff(), rng.next_coeff()))
        .collect();
    grid.points()
        .map(|x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, &(a, b))| {
                    let w = (j as f64 + 1.0) * std::f64::consts::PI * x / l;
                    a * w.sin() + b * w.cos()
                })
                .sum()
        })
        .collect()
}
