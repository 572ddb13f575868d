//! Domain types shared by every module: matrices, boundary parameters,
//! potentials, grids, solution trajectories, spectra and transform plans.
//! No algorithms live here.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Symmetry / trace tolerance accepted by [`potential_from_matrix_field`].
pub const CANONICAL_TOL: f64 = 1e-10;

/// Tolerance for the negative-wins tie break when anchoring the index 0
/// eigenvalue.
pub const TIE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// A real 2x2 matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }

    pub fn sub(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let a = &self.0;
        Mat2([[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0[0][1] - self.0[1][0]).abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// A complex 2x2 matrix, split into real and imaginary parts. Only used to
/// house the first Pauli matrix and its algebra checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexMat2 {
    pub re: Mat2,
    pub im: Mat2,
}

impl ComplexMat2 {
    pub const fn real(re: Mat2) -> ComplexMat2 {
        ComplexMat2 {
            re,
            im: Mat2::ZERO,
        }
    }

    pub fn mul(&self, rhs: &ComplexMat2) -> ComplexMat2 {
        ComplexMat2 {
            re: self.re.mul(&rhs.re).sub(&self.im.mul(&rhs.im)),
            im: self.re.mul(&rhs.im).add(&self.im.mul(&rhs.re)),
        }
    }
}

/// The constant matrices of the canonical system.
pub mod matrices {
    use super::{ComplexMat2, Mat2};

    /// `B = [[0, 1], [-1, 0]]`, the symplectic unit; `B^2 = -E`.
    pub const B: Mat2 = Mat2([[0.0, 1.0], [-1.0, 0.0]]);

    /// First Pauli matrix `[[0, i], [-i, 0]]` (so that `B = sigma1 / i`).
    pub const SIGMA1: ComplexMat2 = ComplexMat2 {
        re: Mat2::ZERO,
        im: Mat2([[0.0, 1.0], [-1.0, 0.0]]),
    };

    /// Second Pauli matrix `diag(1, -1)`, the `p`-channel direction.
    pub const SIGMA2: Mat2 = Mat2([[1.0, 0.0], [0.0, -1.0]]);

    /// Third Pauli matrix `[[0, 1], [1, 0]]`, the `q`-channel direction.
    pub const SIGMA3: Mat2 = Mat2([[0.0, 1.0], [1.0, 0.0]]);
}

// ---------------------------------------------------------------------------
// Boundary parameters
// ---------------------------------------------------------------------------

/// Boundary angles, both constrained to `(-pi/2, pi/2]`. `beta` is unused in
/// half-line-window mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryParams {
    alpha: f64,
    beta: f64,
}

fn check_angle(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= -PI / 2.0 || v > PI / 2.0 {
        return Err(Error::Invalid {
            what: name,
            why: format!("{v} not in (-pi/2, pi/2]"),
        });
    }
    Ok(())
}

impl BoundaryParams {
    pub fn new(alpha: f64, beta: f64) -> Result<BoundaryParams> {
        check_angle("alpha", alpha)?;
        check_angle("beta", beta)?;
        Ok(BoundaryParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Free-case index offset `(beta - alpha) / pi`: for `Omega = 0` the
    /// eigenvalues are exactly `n + (beta - alpha)/pi`.
    pub fn guess_shift(&self) -> f64 {
        (self.beta - self.alpha) / PI
    }
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Default node count on `[0, pi]`.
pub const DEFAULT_N_POINTS: usize = 4001;

/// Uniform grid on `[0, x_end]`; the first node is exactly 0 and the last
/// exactly `x_end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_end: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_end: f64, n_points: usize) -> Result<Grid> {
        if !(x_end > 0.0) || !x_end.is_finite() {
            return Err(Error::Invalid {
                what: "grid",
                why: format!("x_end = {x_end} must be positive"),
            });
        }
        if n_points < 2 {
            return Err(Error::Invalid {
                what: "grid",
                why: format!("n_points = {n_points} must be at least 2"),
            });
        }
        Ok(Grid { x_end, n_points })
    }

    /// 4001 nodes on `[0, pi]`.
    pub fn default_interval() -> Grid {
        Grid {
            x_end: PI,
            n_points: DEFAULT_N_POINTS,
        }
    }

    /// Grid on `[0, x_end]` with spacing at most `pi / 4000`.
    pub fn default_window(x_end: f64) -> Result<Grid> {
        let n = (x_end / (PI / 4000.0)).ceil() as usize + 1;
        Grid::new(x_end, n.max(2))
    }

    pub fn x_end(&self) -> f64 {
        self.x_end
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.x_end / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_end * i as f64 / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    /// Same span, `factor` times as many intervals.
    pub fn refine(&self, factor: usize) -> Grid {
        Grid {
            x_end: self.x_end,
            n_points: (self.n_points - 1) * factor + 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// One Gaussian bump `amplitude * exp(-((x - center) / width)^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        self.amplitude * (-u * u).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Zero,
    Constant {
        p0: f64,
        q0: f64,
    },
    Fourier {
        p0: f64,
        q0: f64,
        p_cos: Vec<f64>,
        p_sin: Vec<f64>,
        q_cos: Vec<f64>,
        q_sin: Vec<f64>,
    },
    GaussBumps {
        p_bumps: Vec<Bump>,
        q_bumps: Vec<Bump>,
    },
    Sampled {
        grid: Grid,
        p: Vec<f64>,
        q: Vec<f64>,
    },
}

/// The trace-free symmetric matrix field `Omega(x) = [[p, q], [q, -p]]`,
/// in one of a few families. Sampled potentials interpolate linearly
/// between uniform nodes and clamp at the ends.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalPotential {
    kind: Kind,
    domain_end: f64,
}

fn trig_sum(x: f64, period: f64, cos_c: &[f64], sin_c: &[f64]) -> f64 {
    let w = 2.0 * PI / period;
    let mut acc = 0.0;
    for (k, c) in cos_c.iter().enumerate() {
        acc += c * ((k + 1) as f64 * w * x).cos();
    }
    for (k, s) in sin_c.iter().enumerate() {
        acc += s * ((k + 1) as f64 * w * x).sin();
    }
    acc
}

fn interp_clamped(grid: &Grid, samples: &[f64], x: f64) -> f64 {
    let u = x / grid.spacing();
    if u <= 0.0 {
        return samples[0];
    }
    let last = samples.len() - 1;
    if u >= last as f64 {
        return samples[last];
    }
    let i = u.floor() as usize;
    let frac = u - i as f64;
    samples[i] + frac * (samples[i + 1] - samples[i])
}

impl CanonicalPotential {
    pub fn zero(domain_end: f64) -> CanonicalPotential {
        CanonicalPotential {
            kind: Kind::Zero,
            domain_end,
        }
    }

    pub fn constant(p0: f64, q0: f64, domain_end: f64) -> CanonicalPotential {
        CanonicalPotential {
            kind: Kind::Constant { p0, q0 },
            domain_end,
        }
    }

    /// Trigonometric polynomials with period `domain_end` plus constant
    /// offsets in both channels.
    pub fn fourier(
        p0: f64,
        q0: f64,
        p_cos: Vec<f64>,
        p_sin: Vec<f64>,
        q_cos: Vec<f64>,
        q_sin: Vec<f64>,
        domain_end: f64,
    ) -> CanonicalPotential {
        CanonicalPotential {
            kind: Kind::Fourier {
                p0,
                q0,
                p_cos,
                p_sin,
                q_cos,
                q_sin,
            },
            domain_end,
        }
    }

    pub fn gauss_bumps(
        p_bumps: Vec<Bump>,
        q_bumps: Vec<Bump>,
        domain_end: f64,
    ) -> CanonicalPotential {
        CanonicalPotential {
            kind: Kind::GaussBumps { p_bumps, q_bumps },
            domain_end,
        }
    }

    pub fn sampled(grid: Grid, p: Vec<f64>, q: Vec<f64>) -> Result<CanonicalPotential> {
        if p.len() != grid.n_points() || q.len() != grid.n_points() {
            return Err(Error::Invalid {
                what: "sampled potential",
                why: format!(
                    "sample lengths ({}, {}) do not match grid ({})",
                    p.len(),
                    q.len(),
                    grid.n_points()
                ),
            });
        }
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid {
                what: "sampled potential",
                why: "non-finite sample".into(),
            });
        }
        Ok(CanonicalPotential {
            domain_end: grid.x_end(),
            kind: Kind::Sampled { grid, p, q },
        })
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Zero => "zero",
            Kind::Constant { .. } => "constant",
            Kind::Fourier { .. } => "fourier",
            Kind::GaussBumps { .. } => "gauss-bumps",
            Kind::Sampled { .. } => "sampled",
        }
    }

    /// Sample grid of a sampled-kind potential, if any.
    pub fn sample_grid(&self) -> Option<&Grid> {
        match &self.kind {
            Kind::Sampled { grid, .. } => Some(grid),
            _ => None,
        }
    }

    /// The two scalar fields `(p(x), q(x))`.
    pub fn evaluate(&self, x: f64) -> Result<(f64, f64)> {
        if !(0.0..=self.domain_end).contains(&x) {
            return Err(Error::Domain {
                x,
                domain_end: self.domain_end,
            });
        }
        Ok(self.eval_inner(x))
    }

    fn eval_inner(&self, x: f64) -> (f64, f64) {
        match &self.kind {
            Kind::Zero => (0.0, 0.0),
            Kind::Constant { p0, q0 } => (*p0, *q0),
            Kind::Fourier {
                p0,
                q0,
                p_cos,
                p_sin,
                q_cos,
                q_sin,
            } => (
                p0 + trig_sum(x, self.domain_end, p_cos, p_sin),
                q0 + trig_sum(x, self.domain_end, q_cos, q_sin),
            ),
            Kind::GaussBumps { p_bumps, q_bumps } => (
                p_bumps.iter().map(|b| b.eval(x)).sum(),
                q_bumps.iter().map(|b| b.eval(x)).sum(),
            ),
            Kind::Sampled { grid, p, q } => {
                (interp_clamped(grid, p, x), interp_clamped(grid, q, x))
            }
        }
    }

    /// The matrix value `[[p, q], [q, -p]]` at `x`.
    pub fn matrix_at(&self, x: f64) -> Result<Mat2> {
        let (p, q) = self.evaluate(x)?;
        Ok(Mat2([[p, q], [q, -p]]))
    }
}

/// Materialize a sampled potential from a grid of canonical matrices,
/// rejecting asymmetry or trace beyond [`CANONICAL_TOL`] (either signals a
/// bug in a transform).
pub fn potential_from_matrix_field(field: &[Mat2], grid: &Grid) -> Result<CanonicalPotential> {
    if field.len() != grid.n_points() {
        return Err(Error::Shape(format!(
            "field has {} nodes, grid has {}",
            field.len(),
            grid.n_points()
        )));
    }
    let mut p = Vec::with_capacity(field.len());
    let mut q = Vec::with_capacity(field.len());
    for (i, m) in field.iter().enumerate() {
        let scale = 1.0_f64.max(m.max_abs());
        if m.trace().abs() > CANONICAL_TOL * scale {
            return Err(Error::Structure {
                index: i,
                why: format!("trace = {}", m.trace()),
            });
        }
        if m.asymmetry() > CANONICAL_TOL * scale {
            return Err(Error::Structure {
                index: i,
                why: format!("asymmetry = {}", m.asymmetry()),
            });
        }
        p.push(m.0[0][0]);
        q.push(m.0[0][1]);
    }
    CanonicalPotential::sampled(*grid, p, q)
}

// ---------------------------------------------------------------------------
// Solutions and spectra
// ---------------------------------------------------------------------------

/// A two-component solution trajectory on a grid, with the running
/// quadrature of its squared norm.
#[derive(Clone, Debug)]
pub struct VectorSolution {
    pub grid: Grid,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    /// `norm_accum[i]` approximates the integral of `y1^2 + y2^2` from 0 to
    /// the i-th node; non-decreasing, zero at the first node.
    pub norm_accum: Vec<f64>,
    /// Spectral parameter the trajectory was integrated at.
    pub lambda: f64,
}

impl VectorSolution {
    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }

    pub fn at(&self, i: usize) -> (f64, f64) {
        (self.y1[i], self.y2[i])
    }

    /// Total squared norm over the grid span.
    pub fn total_norm_sq(&self) -> f64 {
        *self.norm_accum.last().unwrap()
    }

    /// Multiply the trajectory by `c` (the accumulator scales by `c^2`).
    pub fn scaled(&self, c: f64) -> VectorSolution {
        VectorSolution {
            grid: self.grid,
            y1: self.y1.iter().map(|v| c * v).collect(),
            y2: self.y2.iter().map(|v| c * v).collect(),
            norm_accum: self.norm_accum.iter().map(|v| c * c * v).collect(),
            lambda: self.lambda,
        }
    }
}

/// One indexed eigenvalue record.
#[derive(Clone, Copy, Debug)]
pub struct SpectralDatum {
    pub n: i32,
    pub lambda: f64,
    /// Left norming constant, the squared L2 norm of the left-anchored
    /// eigenfunction; positive.
    pub a: f64,
    /// Right norming constant; positive.
    pub b: f64,
    /// Asymptotic remainder `lambda - (n + (beta - alpha)/pi)`.
    pub r: f64,
    /// Norming remainder `a - pi`.
    pub c: f64,
}

/// Indexed eigenvalue table under the enumeration convention: strictly
/// increasing in the index, index 0 nearest zero (negative wins ties).
#[derive(Clone, Debug)]
pub struct SpectrumTable {
    boundary: BoundaryParams,
    provenance: String,
    data: BTreeMap<i32, SpectralDatum>,
}

impl SpectrumTable {
    pub fn from_data(
        data: Vec<SpectralDatum>,
        boundary: BoundaryParams,
        provenance: impl Into<String>,
    ) -> Result<SpectrumTable> {
        let mut map = BTreeMap::new();
        for d in data {
            if !(d.a > 0.0) || !(d.b > 0.0) {
                return Err(Error::Invalid {
                    what: "spectral datum",
                    why: format!("norming constants must be positive (n = {})", d.n),
                });
            }
            if map.insert(d.n, d).is_some() {
                return Err(Error::Invalid {
                    what: "spectrum table",
                    why: format!("duplicate index {}", d.n),
                });
            }
        }
        let table = SpectrumTable {
            boundary,
            provenance: provenance.into(),
            data: map,
        };
        table.check_ordering()?;
        Ok(table)
    }

    fn check_ordering(&self) -> Result<()> {
        let mut prev: Option<(i32, f64)> = None;
        for (&n, d) in &self.data {
            if let Some((pn, pl)) = prev {
                if pn + 1 == n && !(pl < d.lambda) {
                    return Err(Error::Invalid {
                        what: "spectrum table",
                        why: format!("lambda_{} = {} !< lambda_{} = {}", pn, pl, n, d.lambda),
                    });
                }
            }
            prev = Some((n, d.lambda));
        }
        if let Some(zero) = self.data.get(&0) {
            for d in self.data.values() {
                if d.lambda.abs() + TIE_TOL < zero.lambda.abs() {
                    return Err(Error::Invalid {
                        what: "spectrum table",
                        why: format!(
                            "lambda_{} = {} is nearer zero than lambda_0 = {}",
                            d.n, d.lambda, zero.lambda
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn boundary(&self) -> BoundaryParams {
        self.boundary
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn get(&self, n: i32) -> Option<&SpectralDatum> {
        self.data.get(&n)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpectralDatum> {
        self.data.values()
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> + '_ {
        self.data.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Components of `grad lambda_n`.
#[derive(Clone, Debug)]
pub struct GradientBundle {
    pub grid: Grid,
    /// `d lambda / d alpha = -|h(0)|^2`; never positive.
    pub d_alpha: f64,
    /// `d lambda / d beta = |h(x_end)|^2`; absent in half-line mode.
    pub d_beta: Option<f64>,
    pub d_p: Vec<f64>,
    pub d_q: Vec<f64>,
    /// Node-wise `B * (d lambda / d Omega)`; symmetric and trace-free.
    pub matrix_field: Vec<Mat2>,
}

// ---------------------------------------------------------------------------
// Deformation schedules and surgery plans
// ---------------------------------------------------------------------------

/// Sparse sequence `{t_n}` with staged application order 0, 1, -1, 2, -2, ...
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeformationSchedule {
    t: BTreeMap<i32, f64>,
    max_stage: usize,
}

/// Target index of stage `m`: `(m + 1) / 2` for odd `m`, `-m / 2` for even.
pub fn stage_target(m: usize) -> i32 {
    if m % 2 == 1 {
        (m as i32 + 1) / 2
    } else {
        -(m as i32) / 2
    }
}

impl DeformationSchedule {
    /// All-zero schedule: the identity deformation.
    pub fn empty() -> DeformationSchedule {
        DeformationSchedule::default()
    }

    /// Build from `(index, t)` pairs; the stage count is the smallest one
    /// covering every stored index.
    pub fn from_pairs(pairs: &[(i32, f64)]) -> DeformationSchedule {
        let mut t = BTreeMap::new();
        let mut max_stage = 0usize;
        for &(n, tn) in pairs {
            t.insert(n, tn);
            let stage = if n > 0 {
                2 * n as usize - 1
            } else {
                2 * (-n) as usize
            };
            max_stage = max_stage.max(stage);
        }
        DeformationSchedule { t, max_stage }
    }

    pub fn t(&self, n: i32) -> f64 {
        self.t.get(&n).copied().unwrap_or(0.0)
    }

    pub fn max_stage(&self) -> usize {
        self.max_stage
    }

    pub fn entries(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.t.iter().map(|(&n, &t)| (n, t))
    }

    pub fn is_identity(&self) -> bool {
        self.t.values().all(|&t| t == 0.0)
    }
}

/// One spectral surgery step; `gamma` is always derived from the kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurgeryStep {
    /// Insert a level at `nu`, seeding the transform with `c * phi(., nu)`.
    Add { nu: f64, c: f64 },
    /// Delete the level at `nu`.
    Remove { nu: f64 },
    /// Rescale the norming constant of the level at `nu` by `e^t`.
    Scale { nu: f64, t: f64 },
}

impl SurgeryStep {
    /// Rank-one coefficient: add -> 1, remove -> -1, scale -> `e^{-t} - 1`.
    pub fn gamma(&self) -> f64 {
        match self {
            SurgeryStep::Add { .. } => 1.0,
            SurgeryStep::Remove { .. } => -1.0,
            SurgeryStep::Scale { t, .. } => (-t).exp() - 1.0,
        }
    }

    pub fn nu(&self) -> f64 {
        match self {
            SurgeryStep::Add { nu, .. }
            | SurgeryStep::Remove { nu }
            | SurgeryStep::Scale { nu, .. } => *nu,
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            SurgeryStep::Add { .. } => "add",
            SurgeryStep::Remove { .. } => "remove",
            SurgeryStep::Scale { .. } => "scale",
        }
    }
}

/// An ordered chain of surgery steps on the window `[0, window_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurgeryPlan {
    pub steps: Vec<SurgeryStep>,
    pub window_end: f64,
}

/// A direction of potential variation in one channel, sampled on a grid.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub v: Vec<f64>,
    pub eps: f64,
    pub channel: Channel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    P,
    Q,
}

impl Perturbation {
    pub fn new(v: Vec<f64>, eps: f64, channel: Channel) -> Result<Perturbation> {
        if !(eps > 0.0) {
            return Err(Error::Invalid {
                what: "perturbation",
                why: format!("eps = {eps} must be positive"),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid {
                what: "perturbation",
                why: "non-finite direction sample".into(),
            });
        }
        Ok(Perturbation { v, eps, channel })
    }
}
