//! Eigenvalue location by sign-change scanning plus bracketed refinement of
//! the characteristic function, norming constants, normalized
//! eigenfunctions, and asymptotic diagnostics.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::model::{
    BoundaryParams, CanonicalPotential, Grid, SpectralDatum, SpectrumTable, VectorSolution,
    TIE_TOL,
};
use crate::ode::{DiscretizedPotential, IntegratorSettings};
use crate::{Error, Result};

/// Eigenvalue search parameters. The scan range covers
/// `[n_min + shift - 1, n_max + shift + 1]` (and always the neighborhood of
/// zero, which anchors the enumeration).
#[derive(Clone, Copy, Debug)]
pub struct SearchWindow {
    pub n_min: i32,
    pub n_max: i32,
    /// Lambda increment for sign-change detection.
    pub scan_step: f64,
    /// Bracket-width and |chi| tolerance for refinement.
    pub refine_tol: f64,
}

impl SearchWindow {
    pub fn new(n_min: i32, n_max: i32) -> SearchWindow {
        SearchWindow {
            n_min,
            n_max,
            scan_step: 0.05,
            refine_tol: 1e-11,
        }
    }

    pub fn with_scan_step(mut self, step: f64) -> SearchWindow {
        self.scan_step = step;
        self
    }
}

/// Which Cauchy anchor a normalized eigenfunction uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Illinois-style false position inside a sign-change bracket, with a final
/// secant polish that drives |chi| down to its rounding floor.
fn refine_root(
    f: &impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
    tol: f64,
    scale: f64,
) -> Result<f64> {
    let orig = (lo, hi);
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= tol || flo == 0.0 || fhi == 0.0 {
            if flo == 0.0 {
                return Ok(lo);
            }
            if fhi == 0.0 {
                return Ok(hi);
            }
            // Final secant polish; keep whichever point has the smallest
            // residual.
            let cand = (lo * fhi - hi * flo) / (fhi - flo);
            let mut best = if flo.abs() < fhi.abs() { (lo, flo) } else { (hi, fhi) };
            if cand.is_finite() {
                let fc = f(cand)?;
                if fc.abs() < best.1.abs() {
                    best = (cand, fc);
                }
            }
            return Ok(best.0);
        }
        let mut cand = (lo * fhi - hi * flo) / (fhi - flo);
        if !cand.is_finite() || cand <= lo || cand >= hi {
            cand = 0.5 * (lo + hi);
        }
        let fc = f(cand)?;
        if fc == 0.0 {
            return Ok(cand);
        }
        if fc.abs() <= 1e-15 * scale {
            return Ok(cand);
        }
        if fc.signum() == flo.signum() {
            lo = cand;
            flo = fc;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = cand;
            fhi = fc;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::Root {
        lo: orig.0,
        hi: orig.1,
    })
}

/// Locate every eigenvalue with index in `[window.n_min, window.n_max]` and
/// populate the full spectral record for each.
pub fn locate_eigenvalues(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    window: &SearchWindow,
    grid: &Grid,
) -> Result<SpectrumTable> {
    if window.n_min > window.n_max {
        return Err(Error::Invalid {
            what: "search window",
            why: format!("n_min = {} > n_max = {}", window.n_min, window.n_max),
        });
    }
    let disc = DiscretizedPotential::new(pot, grid, IntegratorSettings::default())?;
    let shift = boundary.guess_shift();
    // Margin of 1 covers either sign convention of the index offset; two
    // extra scan steps keep roots sitting exactly on the margin edge
    // bracketable.
    let pad = 1.0 + 2.0 * window.scan_step;
    let lo = (window.n_min as f64 + shift - pad).min(-pad);
    let hi = (window.n_max as f64 + shift + pad).max(pad);
    let n_scan = ((hi - lo) / window.scan_step).ceil() as usize;
    let points: Vec<f64> = (0..=n_scan)
        .map(|k| lo + (hi - lo) * k as f64 / n_scan as f64)
        .collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&l| disc.characteristic(boundary, l).map(|(chi, _)| chi))
        .collect::<Result<Vec<_>>>()?;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-30);

    // Brackets and exact scan hits.
    enum Site {
        Exact(f64),
        Bracket(f64, f64, f64, f64),
    }
    let mut sites = Vec::new();
    for k in 0..=n_scan {
        if values[k] == 0.0 {
            sites.push(Site::Exact(points[k]));
        } else if k < n_scan && values[k + 1] != 0.0 && values[k].signum() != values[k + 1].signum()
        {
            sites.push(Site::Bracket(points[k], points[k + 1], values[k], values[k + 1]));
        }
    }
    let chi = |l: f64| disc.characteristic(boundary, l).map(|(c, _)| c);
    let mut roots: Vec<f64> = sites
        .par_iter()
        .map(|site| match site {
            Site::Exact(l) => Ok(*l),
            Site::Bracket(a, b, fa, fb) => {
                refine_root(&chi, *a, *b, *fa, *fb, window.refine_tol, scale)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-7 * (1.0 + a.abs()));

    if roots.is_empty() {
        return Err(Error::Enumeration {
            why: "no roots found in the scan range".into(),
            roots,
        });
    }
    // Spacing heuristic: a gap well beyond the free-case spacing pi/x_end
    // is either a scan miss or a genuine spectral gap. Rescan suspicious
    // gaps at 8x resolution; whatever survives is accepted as genuine.
    let gap_tol = 1.9 * PI / grid.x_end();
    let mut extra = Vec::new();
    for w in roots.windows(2) {
        if w[1] - w[0] > gap_tol {
            let step = window.scan_step / 8.0;
            let m = ((w[1] - w[0]) / step).ceil() as usize;
            let mut prev = (w[0], chi(w[0])?);
            for k in 1..=m {
                let x = w[0] + (w[1] - w[0]) * k as f64 / m as f64;
                let fx = chi(x)?;
                if fx == 0.0 {
                    extra.push(x);
                } else if prev.1 != 0.0 && fx.signum() != prev.1.signum() {
                    extra.push(refine_root(
                        &chi,
                        prev.0,
                        x,
                        prev.1,
                        fx,
                        window.refine_tol,
                        scale,
                    )?);
                }
                prev = (x, fx);
            }
        }
    }
    roots.extend(extra);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-7 * (1.0 + a.abs()));

    // Anchor index 0 at the root nearest zero; a tie within TIE_TOL goes to
    // the negative candidate.
    let min_abs = roots.iter().fold(f64::INFINITY, |m, r| m.min(r.abs()));
    let mut j0 = 0usize;
    let mut found = false;
    for (j, r) in roots.iter().enumerate() {
        if r.abs() <= min_abs + TIE_TOL {
            if !found || *r < roots[j0] {
                j0 = j;
            }
            found = true;
        }
    }

    let wanted: Vec<(i32, f64)> = roots
        .iter()
        .enumerate()
        .map(|(j, &l)| (j as i32 - j0 as i32, l))
        .filter(|(n, _)| *n >= window.n_min && *n <= window.n_max)
        .collect();
    let have: Vec<i32> = wanted.iter().map(|(n, _)| *n).collect();
    for n in window.n_min..=window.n_max {
        if !have.contains(&n) {
            return Err(Error::Enumeration {
                why: format!("index {n} not covered by the scan"),
                roots,
            });
        }
    }

    let data: Vec<SpectralDatum> = wanted
        .par_iter()
        .map(|&(n, lambda)| {
            let (_, a) = disc.characteristic(boundary, lambda)?;
            let b = disc.integrate_right(boundary.beta(), lambda)?.total_norm_sq();
            Ok(SpectralDatum {
                n,
                lambda,
                a,
                b,
                r: lambda - (n as f64 + shift),
                c: a - PI,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    SpectrumTable::from_data(data, *boundary, pot.kind_name())
}

/// Refine the eigenvalue nearest `seed`, expanding a bracket around the
/// seed. Used for matched-index tracking across perturbations and for
/// per-stage re-solves of deformed potentials.
pub fn refine_near(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    seed: f64,
    grid: &Grid,
) -> Result<f64> {
    let disc = DiscretizedPotential::new(pot, grid, IntegratorSettings::default())?;
    let chi = |l: f64| disc.characteristic(boundary, l).map(|(c, _)| c);
    let f_seed = chi(seed)?;
    if f_seed == 0.0 {
        return Ok(seed);
    }
    let scale = f_seed.abs().max(1.0);
    for delta in [0.05, 0.1, 0.2, 0.4] {
        for (a, b) in [(seed - delta, seed), (seed, seed + delta)] {
            let (fa, fb) = (chi(a)?, chi(b)?);
            if fa == 0.0 {
                return Ok(a);
            }
            if fb == 0.0 {
                return Ok(b);
            }
            if fa.signum() != fb.signum() {
                return refine_root(&chi, a, b, fa, fb, 1e-11, scale.max(fa.abs().max(fb.abs())));
            }
        }
    }
    Err(Error::Tracking(format!(
        "no sign change of the characteristic function within 0.4 of seed {seed}"
    )))
}

/// Norming constants `(a, b)` at a located eigenvalue.
pub fn norming_constants(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    lambda: f64,
    grid: &Grid,
) -> Result<(f64, f64)> {
    let disc = DiscretizedPotential::new(pot, grid, IntegratorSettings::default())?;
    let (chi, a) = disc.characteristic(boundary, lambda)?;
    let near = disc
        .characteristic(boundary, lambda + 0.5)?
        .0
        .abs()
        .max(disc.characteristic(boundary, lambda - 0.5)?.0.abs());
    if chi.abs() > 1e-8 * near.max(1.0) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} is not an eigenvalue (|chi| = {})",
            chi.abs()
        )));
    }
    let b = disc.integrate_right(boundary.beta(), lambda)?.total_norm_sq();
    Ok((a, b))
}

/// Unit-norm eigenfunction `h_n = phi_n / sqrt(a_n)` (left) or
/// `psi_n / sqrt(b_n)` (right), on the requested grid.
pub fn normalized_eigenfunction(
    pot: &CanonicalPotential,
    boundary: &BoundaryParams,
    datum: &SpectralDatum,
    side: Side,
    grid: &Grid,
) -> Result<VectorSolution> {
    let disc = DiscretizedPotential::new(pot, grid, IntegratorSettings::default())?;
    let sol = match side {
        Side::Left => disc.integrate_left(boundary.alpha(), datum.lambda)?,
        Side::Right => disc.integrate_right(boundary.beta(), datum.lambda)?,
    };
    let total = sol.total_norm_sq();
    if !(total > 0.0) {
        return Err(Error::Precondition(format!(
            "eigenfunction at lambda = {} has zero norm",
            datum.lambda
        )));
    }
    Ok(sol.scaled(1.0 / total.sqrt()))
}

/// Per-index remainder diagnostics.
#[derive(Clone, Debug)]
pub struct RemainderReport {
    /// `(n, r_n, c_n)` triples in index order.
    pub rows: Vec<(i32, f64, f64)>,
    /// Cutoff used for the tail summaries.
    pub tail_from: i32,
    /// `max |r_n|` over `|n| >= tail_from`.
    pub tail_max_r: f64,
    /// Partial sum of `c_n^2` over the whole table.
    pub sum_c_sq: f64,
}

/// Remainders `r_n = lambda_n - (n + (beta - alpha)/pi)` and
/// `c_n = a_n - pi` with tail summaries.
pub fn asymptotic_remainders(table: &SpectrumTable, tail_from: i32) -> RemainderReport {
    let rows: Vec<(i32, f64, f64)> = table.iter().map(|d| (d.n, d.r, d.c)).collect();
    let tail_max_r = rows
        .iter()
        .filter(|(n, _, _)| n.abs() >= tail_from)
        .fold(0.0_f64, |m, (_, r, _)| m.max(r.abs()));
    let sum_c_sq = rows.iter().map(|(_, _, c)| c * c).sum();
    RemainderReport {
        rows,
        tail_from,
        tail_max_r,
        sum_c_sq,
    }
}

/// Recover `alpha` from eigenvalue tails of a `beta = 0` table:
/// `alpha = pi * lim (n - lambda_n)`.
pub fn estimate_boundary_alpha(table: &SpectrumTable, tail_from: i32) -> Result<f64> {
    if table.boundary().beta() != 0.0 {
        return Err(Error::Precondition(
            "alpha estimation requires a table built with beta = 0".into(),
        ));
    }
    let tail: Vec<f64> = table
        .iter()
        .filter(|d| d.n.abs() >= tail_from)
        .map(|d| d.n as f64 - d.lambda)
        .collect();
    if tail.len() < 2 {
        return Err(Error::Range(format!(
            "only {} eigenvalues with |n| >= {tail_from}",
            tail.len()
        )));
    }
    Ok(PI * tail.iter().sum::<f64>() / tail.len() as f64)
}
