//! Inverse maps: from high-momenta phase data back to the fields and
//! fluxes that produced it.
//!
//! The forward model hands every beam line two phases,
//!
//! ```text
//!   θ₊ = ∫ A·v̂ − ∫ A₀,      θ₋ = −(∫ A·v̂ + ∫ A₀),
//! ```
//!
//! so the data side inverts in three stages:
//!
//! 1. **Decoupling** — per line, `∫A·v̂ = (θ₊−θ₋)/2` and `∫A₀ = −(θ₊+θ₋)/2`,
//!    after unwrapping the phases (measured mod 2π) by nearest-branch
//!    continuation along the transverse grid.
//! 2. **Field reconstruction** — the decoupled electric data over a pencil
//!    of in-plane directions is a parallel-beam sinogram of `A₀`, inverted
//!    by filtered backprojection with the Ram-Lak kernel. For the magnetic
//!    field, differentiating the decoupled magnetic data across offsets
//!    turns circulation into flux: with `(θ̂, p̂, n̂)` the beam frame of a
//!    plane with normal `n̂`,
//!
//!    ```text
//!      ∂_s ∫ A(x₀ + s p̂ + τ θ̂)·θ̂ dτ = −∫ B·n̂ dτ,
//!    ```
//!
//!    so the s-differentiated rows are a sinogram of `B·n̂` and the same
//!    backprojection recovers the normal field component on the plane —
//!    one Cartesian component per plane family.
//! 3. **Flux recovery** — class differences of θ₊ give hole fluxes mod 2π
//!    (mod π once an electric potential is present), the long-range flux
//!    `Φ_L` is the decoupled circulation minus the field flux through the
//!    half-plane swept to infinity, and the angular derivative of `Φ_L`
//!    assembles the tangential vector `A∞(v̂) + A∞(−v̂)`.
//!
//! Everything here consumes data (phase pairs over line grids); the only
//! field evaluations are the explicit correction integrals of stage 3,
//! which take the field as a separate input.

use crate::geometry::Obstacle;
use crate::lineflux::Never;
use crate::potentials::MagneticField;
use crate::quad::{self, QuadError};
use crate::scattering::PhasePair;
use crate::vec3::Vec3;
use thiserror::Error;

use std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("phase unwrap ambiguous: adjacent lines jump by {jump:.4} rad (limit {limit:.4}); refine the transverse grid")]
    UnwrapAmbiguity { jump: f64, limit: f64 },
    #[error("dataset shape mismatch: {rows} phase rows for {angles} angles")]
    ShapeMismatch { rows: usize, angles: usize },
    #[error("offset grid must be uniform, strictly increasing, and shared by all rows")]
    NonUniformGrid,
    #[error("{have} directions span the plane; backprojection needs at least {need}")]
    InsufficientAngles { have: usize, need: usize },
    #[error("a dataset line passes within {distance:.4} of the obstacle; the plane is shadowed")]
    PlaneBlocked { distance: f64 },
    #[error("{have} directions for the moment inversion; the differentiated backprojection needs at least {need}")]
    MomentInversionIllposed { have: usize, need: usize },
    #[error("flux modulus 2π is certified only for A₀ = 0 and B = 0 scenes (flags: a0_zero={a0_zero}, b_zero={b_zero})")]
    ModeMismatch { a0_zero: bool, b_zero: bool },
    #[error("field-flux correction did not settle: shell increment {residual:.3e} above {tol:.3e}")]
    BCorrectionNonConvergent { residual: f64, tol: f64 },
    #[error("angular probes do not span the plane transverse to the beam direction")]
    ProbeBasisDegenerate,
    #[error("quadrature of the flux correction failed: achieved {achieved:.3e}, wanted {requested:.3e}")]
    CorrectionQuadrature { achieved: f64, requested: f64 },
}

impl From<QuadError<InversionError>> for InversionError {
    fn from(e: QuadError<InversionError>) -> Self {
        match e {
            QuadError::Eval(inner) => inner,
            QuadError::NonConvergent { achieved, requested } => {
                InversionError::CorrectionQuadrature { achieved, requested }
            }
        }
    }
}

impl From<QuadError<Never>> for InversionError {
    fn from(e: QuadError<Never>) -> Self {
        match e {
            QuadError::Eval(never) => match never {},
            QuadError::NonConvergent { achieved, requested } => {
                InversionError::CorrectionQuadrature { achieved, requested }
            }
        }
    }
}

/// Wraps an angle to the principal branch `(−π, π]`.
fn wrap_angle(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if y <= -PI { y + 2.0 * PI } else { y }
}

/// Largest branch step [`decouple`] accepts between neighbouring lines.
/// Close to π the nearest branch is no longer meaningful — a physical jump
/// of `π + ε` and one of `−π + ε` produce identical wrapped data — so the
/// limit sits well inside the branch half-width.
const UNWRAP_JUMP_LIMIT: f64 = 0.9 * PI;

/// Nearest-branch continuation of a wrapped phase sequence outward from
/// `seed`, whose wrapped value anchors the absolute branch.
fn unwrap_from_seed(wrapped: &[f64], seed: usize) -> Result<Vec<f64>, InversionError> {
    let mut out = vec![0.0; wrapped.len()];
    out[seed] = wrapped[seed];
    let extend = |from: f64, w: f64| -> Result<f64, InversionError> {
        let step = wrap_angle(w - from);
        if step.abs() > UNWRAP_JUMP_LIMIT {
            return Err(InversionError::UnwrapAmbiguity { jump: step.abs(), limit: UNWRAP_JUMP_LIMIT });
        }
        Ok(from + step)
    };
    for i in seed + 1..wrapped.len() {
        out[i] = extend(out[i - 1], wrapped[i])?;
    }
    for i in (0..seed).rev() {
        out[i] = extend(out[i + 1], wrapped[i])?;
    }
    Ok(out)
}

/// One transverse row of phase data: lines of a common direction sampled
/// on a uniform offset grid (the along-row positions of the line bases).
#[derive(Debug, Clone)]
pub struct PhaseRow {
    pub offsets: Vec<f64>,
    pub pairs: Vec<PhasePair>,
}

/// Decoupled X-ray data of one row.
#[derive(Debug, Clone)]
pub struct XRayRow {
    pub offsets: Vec<f64>,
    /// `∫ A·v̂` per line.
    pub int_a: Vec<f64>,
    /// `∫ A₀` per line.
    pub int_a0: Vec<f64>,
}

fn offsets_uniform(offsets: &[f64]) -> bool {
    if offsets.len() < 2 {
        return true;
    }
    let d = offsets[1] - offsets[0];
    d > 0.0
        && offsets
            .windows(2)
            .all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d.max(1.0))
}

/// Splits a row of (possibly wrapped) phase pairs into the two line
/// integrals: `∫A·v̂ = (θ₊−θ₋)/2`, `∫A₀ = −(θ₊+θ₋)/2`.
///
/// Both phase sequences are unwrapped by nearest-branch continuation,
/// seeded at the line whose wrapped phases are smallest in magnitude. The
/// seed anchors the absolute branch, so the row must contain at least one
/// line with true phases inside `(−π, π)` — in practice an edge line
/// beyond the potential's core. Rows whose neighbouring lines move by
/// close to a half-turn are rejected rather than guessed at.
pub fn decouple(row: &PhaseRow) -> Result<XRayRow, InversionError> {
    assert_eq!(row.offsets.len(), row.pairs.len(), "one phase pair per offset");
    if !offsets_uniform(&row.offsets) {
        return Err(InversionError::NonUniformGrid);
    }
    let wrapped_plus: Vec<f64> = row.pairs.iter().map(|p| wrap_angle(p.theta_plus)).collect();
    let wrapped_minus: Vec<f64> = row.pairs.iter().map(|p| wrap_angle(p.theta_minus)).collect();
    let seed = (0..row.pairs.len())
        .min_by(|&i, &j| {
            let mi = wrapped_plus[i].abs().max(wrapped_minus[i].abs());
            let mj = wrapped_plus[j].abs().max(wrapped_minus[j].abs());
            mi.total_cmp(&mj)
        })
        .expect("row must not be empty");
    let plus = unwrap_from_seed(&wrapped_plus, seed)?;
    let minus = unwrap_from_seed(&wrapped_minus, seed)?;
    Ok(XRayRow {
        offsets: row.offsets.clone(),
        int_a: plus.iter().zip(&minus).map(|(p, m)| 0.5 * (p - m)).collect(),
        int_a0: plus.iter().zip(&minus).map(|(p, m)| -0.5 * (p + m)).collect(),
    })
}

/// Orthonormal frame of a reconstruction plane: the tile lives in
/// `origin + span{e1, e2}` and its normal is `e1 × e2`.
#[derive(Debug, Clone)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl PlaneFrame {
    /// Builds the frame, orthonormalizing `e2` against `e1`.
    pub fn new(origin: Vec3, e1: Vec3, e2: Vec3) -> Self {
        let e1 = e1.normalized();
        let e2 = (e2 - e1 * e2.dot(e1)).normalized();
        PlaneFrame { origin, e1, e2 }
    }

    pub fn normal(&self) -> Vec3 {
        self.e1.cross(self.e2)
    }

    /// In-plane beam direction at angle `φ`.
    pub fn beam_dir(&self, phi: f64) -> Vec3 {
        self.e1 * phi.cos() + self.e2 * phi.sin()
    }

    /// In-plane offset direction at angle `φ`; `(dir, perp, normal)` is
    /// right-handed.
    pub fn beam_perp(&self, phi: f64) -> Vec3 {
        self.e1 * (-phi.sin()) + self.e2 * phi.cos()
    }

    /// Base point of the line at angle `φ` and signed offset `s`.
    pub fn line_base(&self, phi: f64, s: f64) -> Vec3 {
        self.origin + self.beam_perp(phi) * s
    }

    /// A point of the plane in tile coordinates.
    pub fn point(&self, u: f64, v: f64) -> Vec3 {
        self.origin + self.e1 * u + self.e2 * v
    }
}

/// Which decoupled channel a sinogram holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// `∫ A·v̂` per line.
    Magnetic,
    /// `∫ A₀` per line.
    Electric,
}

/// Parallel-beam line-integral data over a plane: one row per angle of a
/// uniform pencil `φ_k = kπ/N`, each row sampled on a shared uniform
/// offset grid.
#[derive(Debug, Clone)]
pub struct Sinogram {
    pub frame: PlaneFrame,
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    /// `rows[k][j]` = line integral at angle `φ_k`, offset `s_j`.
    pub rows: Vec<Vec<f64>>,
}

impl Sinogram {
    /// Assembles a sinogram by decoupling one phase row per angle and
    /// keeping the requested channel.
    pub fn from_phase_rows(
        frame: PlaneFrame,
        angles: Vec<f64>,
        rows: &[PhaseRow],
        channel: Channel,
    ) -> Result<Self, InversionError> {
        if rows.len() != angles.len() {
            return Err(InversionError::ShapeMismatch { rows: rows.len(), angles: angles.len() });
        }
        let offsets = rows.first().map(|r| r.offsets.clone()).unwrap_or_default();
        let mut data = Vec::with_capacity(rows.len());
        for row in rows {
            if row.offsets.len() != offsets.len()
                || row
                    .offsets
                    .iter()
                    .zip(&offsets)
                    .any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
            {
                return Err(InversionError::NonUniformGrid);
            }
            let x = decouple(row)?;
            data.push(match channel {
                Channel::Magnetic => x.int_a,
                Channel::Electric => x.int_a0,
            });
        }
        Sinogram::from_values(frame, angles, offsets, data)
    }

    /// Wraps precomputed line-integral rows, validating the grids.
    pub fn from_values(
        frame: PlaneFrame,
        angles: Vec<f64>,
        offsets: Vec<f64>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, InversionError> {
        if rows.len() != angles.len() {
            return Err(InversionError::ShapeMismatch { rows: rows.len(), angles: angles.len() });
        }
        if !offsets_uniform(&offsets) || rows.iter().any(|r| r.len() != offsets.len()) {
            return Err(InversionError::NonUniformGrid);
        }
        Ok(Sinogram { frame, angles, offsets, rows })
    }

    fn spacing(&self) -> f64 {
        if self.offsets.len() < 2 { 1.0 } else { self.offsets[1] - self.offsets[0] }
    }

    /// Refuses sinograms whose lines pass through (or graze) the obstacle:
    /// those lines carry no scattering data, so the plane is shadowed.
    fn check_unblocked(&self, obstacle: Option<&Obstacle>) -> Result<(), InversionError> {
        let Some(obstacle) = obstacle else { return Ok(()) };
        if obstacle.components().is_empty() {
            return Ok(());
        }
        let mut worst = f64::INFINITY;
        for &phi in &self.angles {
            let dir = self.frame.beam_dir(phi);
            for &s in &self.offsets {
                let d = obstacle.distance_to_line(self.frame.line_base(phi, s), dir);
                worst = worst.min(d);
            }
        }
        if worst <= 1e-9 {
            return Err(InversionError::PlaneBlocked { distance: worst });
        }
        Ok(())
    }
}

/// Square reconstruction tile: `n × n` samples over
/// `[−half_width, half_width]²` in plane coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TileSpec {
    pub n: usize,
    pub half_width: f64,
}

impl TileSpec {
    /// Tile coordinate of sample `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        -self.half_width + 2.0 * self.half_width * i as f64 / (self.n - 1) as f64
    }
}

/// A reconstructed scalar field on a plane tile.
#[derive(Debug, Clone)]
pub struct ReconstructionGrid {
    pub frame: PlaneFrame,
    pub tile: TileSpec,
    /// Row-major `n × n`: `values[i * n + j]` at `(u_i, v_j)`.
    pub values: Vec<f64>,
}

impl ReconstructionGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.tile.n + j]
    }

    /// The 3D point a sample lives at.
    pub fn sample_point(&self, i: usize, j: usize) -> Vec3 {
        self.frame.point(self.tile.coord(i), self.tile.coord(j))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Relative L² error against a ground-truth field.
    pub fn rel_l2_error(&self, truth: impl Fn(Vec3) -> f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.tile.n {
            for j in 0..self.tile.n {
                let t = truth(self.sample_point(i, j));
                let d = self.at(i, j) - t;
                num += d * d;
                den += t * t;
            }
        }
        (num / den.max(1e-300)).sqrt()
    }
}

/// Band-limited Ram-Lak filter taps on the offset grid:
/// `h[0] = 1/(4Δs²)`, `h[k] = −1/(π²k²Δs²)` for odd `k`, zero otherwise.
fn ramlak_taps(n: usize, ds: f64) -> Vec<f64> {
    let mut h = vec![0.0; n];
    h[0] = 1.0 / (4.0 * ds * ds);
    for (k, tap) in h.iter_mut().enumerate().skip(1).step_by(2) {
        *tap = -1.0 / (PI * PI * (k * k) as f64 * ds * ds);
    }
    h
}

/// Discrete ramp filtering of one projection row: `q_j = Δs Σ_m p_m h_{|j−m|}`.
fn filter_row(row: &[f64], taps: &[f64], ds: f64) -> Vec<f64> {
    let n = row.len();
    let mut q = vec![0.0; n];
    for j in 0..n {
        let mut acc = 0.0;
        for (m, &p) in row.iter().enumerate() {
            acc += p * taps[j.abs_diff(m)];
        }
        q[j] = acc * ds;
    }
    q
}

/// Linear interpolation of a filtered row at offset `s`; zero outside the
/// sampled range (rows decay to zero at the edges by dataset design).
fn interp(offsets: &[f64], q: &[f64], s: f64) -> f64 {
    let ds = offsets[1] - offsets[0];
    let t = (s - offsets[0]) / ds;
    if t < 0.0 || t > (offsets.len() - 1) as f64 {
        return 0.0;
    }
    let i = (t.floor() as usize).min(offsets.len() - 2);
    let frac = t - i as f64;
    q[i] * (1.0 - frac) + q[i + 1] * frac
}

/// Shared filtered-backprojection core: filters every row and sums
/// `f(x) ≈ (π/N) Σ_k q_k(x·p̂_k)` over the tile.
fn backproject(sin: &Sinogram, tile: TileSpec) -> ReconstructionGrid {
    let ds = sin.spacing();
    let taps = ramlak_taps(sin.offsets.len(), ds);
    let filtered: Vec<Vec<f64>> = sin.rows.iter().map(|r| filter_row(r, &taps, ds)).collect();
    let mut values = vec![0.0; tile.n * tile.n];
    let scale = PI / sin.angles.len() as f64;
    for i in 0..tile.n {
        let u = tile.coord(i);
        for j in 0..tile.n {
            let v = tile.coord(j);
            let mut acc = 0.0;
            for (k, &phi) in sin.angles.iter().enumerate() {
                // x·p̂(φ) for x = u e1 + v e2.
                let s = -u * phi.sin() + v * phi.cos();
                acc += interp(&sin.offsets, &filtered[k], s);
            }
            values[i * tile.n + j] = acc * scale;
        }
    }
    ReconstructionGrid { frame: sin.frame.clone(), tile, values }
}

/// Minimum direction count for the scalar backprojection.
pub const MIN_ANGLES_A0: usize = 16;
/// Minimum direction count for the differentiated (moment) backprojection.
pub const MIN_ANGLES_B: usize = 32;

/// Filtered backprojection of the electric channel: reconstructs `A₀` on
/// the plane tile from its decoupled X-ray data.
pub fn reconstruct_a0(
    sin: &Sinogram,
    tile: TileSpec,
    obstacle: Option<&Obstacle>,
) -> Result<ReconstructionGrid, InversionError> {
    if sin.angles.len() < MIN_ANGLES_A0 {
        return Err(InversionError::InsufficientAngles { have: sin.angles.len(), need: MIN_ANGLES_A0 });
    }
    sin.check_unblocked(obstacle)?;
    Ok(backproject(sin, tile))
}

/// Differentiated backprojection of the magnetic channel: reconstructs the
/// plane-normal field component `B·n̂` on the tile.
///
/// Differentiating the decoupled circulation data across offsets converts
/// it into flux data, `∂_s ∫A·θ̂ dτ = −∫ B·n̂ dτ` (the boundary term dies
/// because `A` decays along the line), so the negated s-derivative of the
/// rows is a plain sinogram of `B·n̂` and filtered backprojection applies.
/// One plane family per Cartesian component assembles the full vector.
pub fn reconstruct_b_component(
    sin: &Sinogram,
    tile: TileSpec,
    obstacle: Option<&Obstacle>,
) -> Result<ReconstructionGrid, InversionError> {
    if sin.angles.len() < MIN_ANGLES_B {
        return Err(InversionError::MomentInversionIllposed { have: sin.angles.len(), need: MIN_ANGLES_B });
    }
    sin.check_unblocked(obstacle)?;
    let ds = sin.spacing();
    let diff_rows: Vec<Vec<f64>> = sin
        .rows
        .iter()
        .map(|r| {
            let n = r.len();
            let mut d = vec![0.0; n];
            for j in 0..n {
                d[j] = if j == 0 {
                    -(r[1] - r[0]) / ds
                } else if j == n - 1 {
                    -(r[n - 1] - r[n - 2]) / ds
                } else {
                    -(r[j + 1] - r[j - 1]) / (2.0 * ds)
                };
            }
            d
        })
        .collect();
    let diff_sin = Sinogram {
        frame: sin.frame.clone(),
        angles: sin.angles.clone(),
        offsets: sin.offsets.clone(),
        rows: diff_rows,
    };
    Ok(backproject(&diff_sin, tile))
}

/// What the scene construction promises about the fields; gates which
/// modulus a flux recovery may honestly claim.
#[derive(Debug, Clone, Copy)]
pub struct SceneFlags {
    pub a0_zero: bool,
    pub b_zero: bool,
}

/// The modulus a recovered flux is reduced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxModulus {
    /// Certified for field-free, electric-free scenes.
    TwoPi,
    /// The fallback once an electric potential is present.
    Pi,
}

/// Difference of the θ₊ phases of two homology classes, reduced to the
/// requested modulus: for field-free scenes this is `(F_{h₁} − F_{h₂}) mod
/// 2π` — what scattering data determines about hole fluxes.
///
/// The 2π modulus is refused unless the scene is flagged `A₀ = 0` and
/// `B = 0`: with an electric potential the pair phases mix `∫A₀` into θ₊
/// and only the mod-π reduction survives (and it assumes the two lines
/// were paired with matching electric X-rays).
pub fn recover_flux_mod(
    pair_a: &PhasePair,
    pair_b: &PhasePair,
    flags: SceneFlags,
    modulus: FluxModulus,
) -> Result<f64, InversionError> {
    if modulus == FluxModulus::TwoPi && !(flags.a0_zero && flags.b_zero) {
        return Err(InversionError::ModeMismatch { a0_zero: flags.a0_zero, b_zero: flags.b_zero });
    }
    let diff = pair_a.theta_plus - pair_b.theta_plus;
    let m = match modulus {
        FluxModulus::TwoPi => 2.0 * PI,
        FluxModulus::Pi => PI,
    };
    Ok(diff.rem_euclid(m))
}

/// Flux of `B` through the half-plane swept from the line to infinity on
/// the `+w` side, `{base + τ v̂ + r w : τ ∈ ℝ, r ≥ 0}`, with surface
/// normal `v̂ × w`. Integrated over doubling r-shells until an increment
/// falls below `tol`.
fn halfplane_flux(
    b: &MagneticField,
    base: Vec3,
    dir: Vec3,
    w: Vec3,
    tol: f64,
) -> Result<f64, InversionError> {
    if b.is_zero() {
        return Ok(0.0);
    }
    let n = dir.cross(w);
    let core = base.norm() + b.support_radius().unwrap_or(8.0) + 4.0;
    let strip = |r0: f64, r1: f64| -> Result<f64, InversionError> {
        let f = |r: f64| -> Result<f64, InversionError> {
            let g = |tau: f64| -> Result<f64, Never> {
                Ok(b.eval(base + dir * tau + w * r).dot(n))
            };
            Ok(quad::line_integral(&g, core, 0.01 * tol)?.value)
        };
        Ok(quad::adaptive(&f, r0, r1, 0.1 * tol)?.value)
    };
    let scale = b.support_radius().unwrap_or(8.0).max(1.0);
    let mut total = strip(0.0, scale)?;
    let mut lo = scale;
    let mut residual = f64::INFINITY;
    for _ in 0..24 {
        let hi = 2.0 * lo;
        let inc = strip(lo, hi)?;
        total += inc;
        residual = inc.abs();
        if residual < tol {
            return Ok(total);
        }
        lo = hi;
    }
    Err(InversionError::BCorrectionNonConvergent { residual, tol })
}

/// Recovers the long-range flux `Φ_L(A, v̂)` of a line's phase pair: the
/// decoupled circulation minus the field flux through the half-plane the
/// line sweeps toward infinity,
///
/// ```text
///   Φ_L = ∫_L A·v̂ − ∫_{H(L, w)} B · (v̂ × w) dA,
/// ```
///
/// where `w ⊥ v̂` fixes the sweeping side (the arc convention of the
/// forward flux). `B` is the reconstructed — or scene-known — field; the
/// correction converges once the shell increments drop below `tol`.
/// Scattering certifies the result mod π in general and mod 2π for
/// electric-free scenes.
pub fn recover_phi_l(
    pair: &PhasePair,
    b: &MagneticField,
    vperp: Vec3,
    tol: f64,
) -> Result<f64, InversionError> {
    let dir = pair.line.dir.normalized();
    let w = (vperp - dir * vperp.dot(dir)).normalized();
    let correction = halfplane_flux(b, pair.line.base, dir, w, tol)?;
    Ok(pair.int_a() - correction)
}

/// One angular probe for the `A∞` sum: the long-range flux recovered at
/// beam directions tilted by `±δϑ` toward `vperp`.
#[derive(Debug, Clone)]
pub struct PhiLProbe {
    pub vperp: Vec3,
    pub dtheta: f64,
    /// Recovered `Φ_L` at the `+δϑ` tilt.
    pub phi_plus: f64,
    /// Recovered `Φ_L` at the `−δϑ` tilt.
    pub phi_minus: f64,
}

impl PhiLProbe {
    fn derivative(&self) -> f64 {
        (self.phi_plus - self.phi_minus) / (2.0 * self.dtheta)
    }
}

/// Assembles the tangential vector `A∞(v̂) + A∞(−v̂)` from angular
/// derivatives of the recovered long-range flux:
/// `∂_ϑ Φ_L|₀ = [A∞(v̂) + A∞(−v̂)]·v̂⊥` per probe, solved over two
/// independent transverse directions. The radial component vanishes by
/// the tangentiality of `A∞`, so the result lies in the plane normal to
/// `v̂` by construction.
pub fn recover_ainf_sum(v: Vec3, probes: &[PhiLProbe]) -> Result<Vec3, InversionError> {
    let v = v.normalized();
    if probes.len() < 2 {
        return Err(InversionError::ProbeBasisDegenerate);
    }
    // Orthonormal transverse basis from the first probe.
    let w1 = {
        let p = probes[0].vperp - v * probes[0].vperp.dot(v);
        if p.norm() < 1e-12 {
            return Err(InversionError::ProbeBasisDegenerate);
        }
        p.normalized()
    };
    let w2 = v.cross(w1);
    // Least-squares normal equations for t = a w1 + b w2 over all probes:
    // each contributes the row  (u·w1) a + (u·w2) b = dΦ_L/dϑ.
    let (mut m11, mut m12, mut m22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for probe in probes {
        let p = probe.vperp - v * probe.vperp.dot(v);
        if p.norm() < 1e-12 {
            return Err(InversionError::ProbeBasisDegenerate);
        }
        let u = p.normalized();
        let (c1, c2) = (u.dot(w1), u.dot(w2));
        let d = probe.derivative();
        m11 += c1 * c1;
        m12 += c1 * c2;
        m22 += c2 * c2;
        r1 += c1 * d;
        r2 += c2 * d;
    }
    let det = m11 * m22 - m12 * m12;
    if det.abs() < 1e-8 {
        return Err(InversionError::ProbeBasisDegenerate);
    }
    let a = (m22 * r1 - m12 * r2) / det;
    let b = (m11 * r2 - m12 * r1) / det;
    Ok(w1 * a + w2 * b)
}
