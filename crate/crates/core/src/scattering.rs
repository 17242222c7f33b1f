//! The high-momenta scattering model.
//!
//! In the representation where the free two-component Klein-Gordon
//! Hamiltonian is diagonal, the scattering operator converges at high
//! momenta to multiplication by a pair of line-dependent phases: for the
//! beam line `L(x⊥, v̂)`,
//!
//! ```text
//!   θ₊ = ∫ (A·v̂ − A₀) dr,        θ₋ = −∫ (A·v̂ + A₀) dr,
//! ```
//!
//! acting as `diag(e^{iθ₊}, e^{iθ₋})` on the transverse profile of the
//! packet. The pair decouples the two potentials exactly:
//! `(θ₊ − θ₋)/2 = ∫ A·v̂` and `−(θ₊ + θ₋)/2 = ∫ A₀`.
//!
//! This module provides the diagonalization algebra (the unitary `Q` and
//! the relativistic dispersion/velocity maps), the phase pair computed from
//! X-ray data, the gauge-change action on the scattering operator, the
//! quadrature-free hole-sum phases available in field-free configurations,
//! and transverse-grid wavepacket pairings against the phase fields.

use crate::geometry::{classify_line, GeometryError, LineQuery, Obstacle};
use crate::grid2::Grid2;
use crate::lineflux::{xray, FluxRecord, LinefluxError};
use crate::potentials::{ElectricPotential, GaugeFunction, PotentialError, VectorPotential};
use crate::vec3::Vec3;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Default quadrature tolerance for phase computations.
pub const PHASE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("mass must be positive, got {mass}")]
    NonPositiveMass { mass: f64 },
    #[error("hole-sum phases require a field-free configuration (B = 0 outside the obstacle and A₀ = 0)")]
    ConfigNotFieldFree,
    #[error("no flux record stored for homology class {class:?}")]
    MissingFluxRecord { class: Vec<i64> },
    #[error("wavepacket support reaches the obstacle shadow (line distance {distance:.3e} ≤ collar {collar:.3e})")]
    SupportViolation { distance: f64, collar: f64 },
    #[error(transparent)]
    Lineflux(#[from] LinefluxError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// 2×2 complex matrix as nested arrays, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn mat_max_dev(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

/// The algebra that diagonalizes the two-component formulation of the free
/// Klein-Gordon equation: the unitary `Q = 2^{−1/2} [[1, i], [1, −i]]`
/// turning `β = [[0, i], [−i, 0]]` into `diag(1, −1)`, together with the
/// relativistic dispersion `b₀(p) = √(p² + m²)` and velocity
/// `v(p) = p / b₀(p)`.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalizerAlgebra {
    pub mass: f64,
}

impl DiagonalizerAlgebra {
    pub fn new(mass: f64) -> Result<Self, ScatteringError> {
        if !(mass > 0.0) {
            return Err(ScatteringError::NonPositiveMass { mass });
        }
        Ok(DiagonalizerAlgebra { mass })
    }

    /// The diagonalizing unitary `Q`.
    pub fn q(&self) -> Mat2 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [
            [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            [Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
        ]
    }

    /// `Q⁻¹ = Q*` (unitarity).
    pub fn q_inv(&self) -> Mat2 {
        mat_adjoint(&self.q())
    }

    /// The off-diagonal matrix `β` of the first-order system.
    pub fn beta(&self) -> Mat2 {
        [
            [Complex64::ZERO, Complex64::new(0.0, 1.0)],
            [Complex64::new(0.0, -1.0), Complex64::ZERO],
        ]
    }

    /// `max |(Q Q*)_{ij} − δ_{ij}|` — zero in exact arithmetic.
    pub fn unitarity_defect(&self) -> f64 {
        let identity: Mat2 = [
            [Complex64::ONE, Complex64::ZERO],
            [Complex64::ZERO, Complex64::ONE],
        ];
        mat_max_dev(&mat_mul(&self.q(), &self.q_inv()), &identity)
    }

    /// `max |(Q β Q⁻¹)_{ij} − diag(1, −1)_{ij}|`.
    pub fn diagonalization_defect(&self) -> f64 {
        let target: Mat2 = [
            [Complex64::ONE, Complex64::ZERO],
            [Complex64::ZERO, -Complex64::ONE],
        ];
        let got = mat_mul(&mat_mul(&self.q(), &self.beta()), &self.q_inv());
        mat_max_dev(&got, &target)
    }

    /// Dispersion `b₀(p) = √(p² + m²)`.
    pub fn dispersion(&self, p: Vec3) -> f64 {
        (p.norm_sq() + self.mass * self.mass).sqrt()
    }

    /// Velocity `v(p) = p / √(p² + m²)`; always subluminal.
    pub fn velocity(&self, p: Vec3) -> Vec3 {
        p / self.dispersion(p)
    }
}

/// The pair of diagonal scattering phases of one beam line.
#[derive(Debug, Clone)]
pub struct PhasePair {
    /// `θ₊ = ∫ (A·v̂ − A₀) dr`.
    pub theta_plus: f64,
    /// `θ₋ = −∫ (A·v̂ + A₀) dr`.
    pub theta_minus: f64,
    pub line: LineQuery,
    /// Beam momentum the pair belongs to (`∞` for the exact limit).
    pub momentum: f64,
}

impl PhasePair {
    /// Magnetic line integral recovered from the pair: `(θ₊ − θ₋)/2`.
    pub fn int_a(&self) -> f64 {
        0.5 * (self.theta_plus - self.theta_minus)
    }

    /// Electric line integral recovered from the pair: `−(θ₊ + θ₋)/2`.
    pub fn int_a0(&self) -> f64 {
        -0.5 * (self.theta_plus + self.theta_minus)
    }

    /// The diagonal of the scattering operator at this line.
    pub fn s_diag(&self) -> [Complex64; 2] {
        [
            Complex64::from_polar(1.0, self.theta_plus),
            Complex64::from_polar(1.0, self.theta_minus),
        ]
    }
}

/// High-momenta phase pair of one line, from X-ray quadrature.
pub fn hm_phase(
    a: &VectorPotential,
    a0: &ElectricPotential,
    line: &LineQuery,
) -> Result<PhasePair, ScatteringError> {
    let s = xray(a, a0, line, PHASE_TOL)?;
    Ok(PhasePair {
        theta_plus: s.int_a - s.int_a0,
        theta_minus: -(s.int_a + s.int_a0),
        line: s.line,
        momentum: f64::INFINITY,
    })
}

/// Gauge-change action on the scattering operator at beam direction `v̂`:
/// conjugation by the asymptotic gauge phases shifts
/// `θ₊ ↦ θ₊ + λ∞(v̂) − λ∞(−v̂)` and `θ₋ ↦ θ₋ − (λ∞(v̂) − λ∞(−v̂))`.
pub fn gauge_transform_s(
    phases: &[PhasePair],
    lambda: &GaugeFunction,
    v: Vec3,
) -> Result<Vec<PhasePair>, ScatteringError> {
    let jump = lambda.jump(v.normalized())?;
    Ok(phases
        .iter()
        .map(|p| PhasePair {
            theta_plus: p.theta_plus + jump,
            theta_minus: p.theta_minus - jump,
            line: p.line.clone(),
            momentum: p.momentum,
        })
        .collect())
}

/// Quadrature-free phase model for field-free configurations: the phase of
/// every line is the sum of the hole flux of its homology class and the
/// long-range flux of the beam direction, both stored as [`FluxRecord`]s.
#[derive(Debug)]
pub struct HoleSumModel<'a> {
    obstacle: &'a Obstacle,
    dir: Vec3,
    records: Vec<FluxRecord>,
}

impl<'a> HoleSumModel<'a> {
    /// Precomputes flux records for the given homology classes.
    ///
    /// Refuses configurations that are not field-free (`B ≠ 0` outside the
    /// obstacle or `A₀ ≠ 0`): outside that regime line phases are not class
    /// functions and the hole-sum decomposition does not apply.
    pub fn build(
        a: &VectorPotential,
        a0: &ElectricPotential,
        obstacle: &'a Obstacle,
        dir: Vec3,
        classes: &[Vec<i64>],
        s_schedule: &[f64],
    ) -> Result<Self, ScatteringError> {
        if !a.field().is_zero() || !a0.is_zero() {
            return Err(ScatteringError::ConfigNotFieldFree);
        }
        let dir = dir.normalized();
        let records = classes
            .iter()
            .map(|class| FluxRecord::compute(a, obstacle, class, dir, s_schedule))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HoleSumModel { obstacle, dir, records })
    }

    pub fn records(&self) -> &[FluxRecord] {
        &self.records
    }

    /// Phase pair of the line through transverse position `x`: classify,
    /// look up the class record, and set `θ₊ = F_h + Φ_L = −θ₋`. No line
    /// quadrature happens here.
    pub fn phase_at(&self, x: Vec3) -> Result<PhasePair, ScatteringError> {
        let class = classify_line(self.obstacle, x, self.dir)?;
        let record = self
            .records
            .iter()
            .find(|r| r.class == class)
            .ok_or_else(|| ScatteringError::MissingFluxRecord { class: class.clone() })?;
        let theta = record.hole_flux + record.long_range_flux;
        Ok(PhasePair {
            theta_plus: theta,
            theta_minus: -theta,
            line: LineQuery { base: x, dir: self.dir, class },
            momentum: f64::INFINITY,
        })
    }
}

/// A square patch of beam lines transverse to a common direction: the
/// discretization on which packets, phase fields, and overlaps live.
#[derive(Debug, Clone)]
pub struct TransverseGrid {
    pub center: Vec3,
    /// Beam direction (unit).
    pub dir: Vec3,
    /// Transverse frame; `(e1, e2, dir)` is right-handed.
    pub e1: Vec3,
    pub e2: Vec3,
    pub n: usize,
    /// Node spacing.
    pub h: f64,
}

impl TransverseGrid {
    /// `n × n` nodes covering `[−half_width, half_width]²` in the
    /// transverse frame around `center`.
    pub fn new(center: Vec3, dir: Vec3, half_width: f64, n: usize) -> Self {
        assert!(n >= 2 && half_width > 0.0);
        let dir = dir.normalized();
        let (e1, e2) = dir.orthonormal_frame();
        TransverseGrid { center, dir, e1, e2, n, h: 2.0 * half_width / (n - 1) as f64 }
    }

    /// In-plane coordinates of node `(i, j)` relative to the patch center.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let half = 0.5 * (self.n - 1) as f64 * self.h;
        (i as f64 * self.h - half, j as f64 * self.h - half)
    }

    /// Base point of the beam line at node `(i, j)`.
    pub fn base_point(&self, i: usize, j: usize) -> Vec3 {
        let (u, w) = self.coords(i, j);
        self.center + self.e1 * u + self.e2 * w
    }
}

/// Two-component transverse packet sampled on a [`TransverseGrid`].
#[derive(Debug, Clone)]
pub struct WavePacket {
    pub plus: Grid2<Complex64>,
    pub minus: Grid2<Complex64>,
}

impl WavePacket {
    /// Gaussian profile `w± · exp(−|x⊥ − c|²/width²)` in grid coordinates.
    pub fn gaussian(
        grid: &TransverseGrid,
        center: (f64, f64),
        width: f64,
        weights: [Complex64; 2],
    ) -> Self {
        let profile = |i: usize, j: usize| {
            let (u, w) = grid.coords(i, j);
            let du = u - center.0;
            let dw = w - center.1;
            (-(du * du + dw * dw) / (width * width)).exp()
        };
        WavePacket {
            plus: Grid2::from_fn(grid.n, grid.n, |i, j| weights[0] * profile(i, j)),
            minus: Grid2::from_fn(grid.n, grid.n, |i, j| weights[1] * profile(i, j)),
        }
    }

    /// `‖φ‖²` under the grid measure `h²`.
    pub fn norm_sq(&self, grid: &TransverseGrid) -> f64 {
        let s: f64 = self
            .plus
            .iter()
            .chain(self.minus.iter())
            .map(|z| z.norm_sqr())
            .sum();
        s * grid.h * grid.h
    }

    fn max_abs(&self) -> f64 {
        self.plus
            .iter()
            .chain(self.minus.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Scattering phases of every line of a transverse grid.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    pub plus: Grid2<f64>,
    pub minus: Grid2<f64>,
}

impl PhaseMap {
    pub fn zero(grid: &TransverseGrid) -> Self {
        PhaseMap {
            plus: Grid2::filled(grid.n, grid.n, 0.0),
            minus: Grid2::filled(grid.n, grid.n, 0.0),
        }
    }

    pub fn constant(grid: &TransverseGrid, plus: f64, minus: f64) -> Self {
        PhaseMap {
            plus: Grid2::filled(grid.n, grid.n, plus),
            minus: Grid2::filled(grid.n, grid.n, minus),
        }
    }
}

/// Computes the high-momenta phase field of a potential pair on a grid,
/// parallel over rows of lines.
pub fn phase_map(
    a: &VectorPotential,
    a0: &ElectricPotential,
    grid: &TransverseGrid,
) -> Result<PhaseMap, ScatteringError> {
    let rows: Vec<Vec<(f64, f64)>> = (0..grid.n)
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, f64)>, ScatteringError> {
            (0..grid.n)
                .map(|j| {
                    let line = LineQuery::new(grid.base_point(i, j), grid.dir);
                    let pair = hm_phase(a, a0, &line)?;
                    Ok((pair.theta_plus, pair.theta_minus))
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhaseMap {
        plus: Grid2::from_fn(grid.n, grid.n, |i, j| rows[i][j].0),
        minus: Grid2::from_fn(grid.n, grid.n, |i, j| rows[i][j].1),
    })
}

/// Applies the diagonal scattering phases to a packet.
pub fn apply_phases(phases: &PhaseMap, packet: &WavePacket) -> WavePacket {
    let n = packet.plus.nx();
    WavePacket {
        plus: Grid2::from_fn(n, n, |i, j| {
            packet.plus[(i, j)] * Complex64::from_polar(1.0, phases.plus[(i, j)])
        }),
        minus: Grid2::from_fn(n, n, |i, j| {
            packet.minus[(i, j)] * Complex64::from_polar(1.0, phases.minus[(i, j)])
        }),
    }
}

/// Matrix element `⟨diag(e^{iθ₊}, e^{iθ₋}) φ, ψ⟩` over the transverse grid
/// (inner product linear in the first argument), one complex value per
/// component.
///
/// Every line on which the packets are non-negligible must clear the
/// obstacle by at least `collar`; otherwise the beam geometry makes no
/// sense and the pairing refuses with [`ScatteringError::SupportViolation`].
pub fn wavepacket_overlap(
    phases: &PhaseMap,
    phi: &WavePacket,
    psi: &WavePacket,
    grid: &TransverseGrid,
    obstacle: &Obstacle,
    collar: f64,
) -> Result<[Complex64; 2], ScatteringError> {
    let threshold = 1e-9 * phi.max_abs().max(psi.max_abs());
    let mut out = [Complex64::ZERO; 2];
    for i in 0..grid.n {
        for j in 0..grid.n {
            let amp = phi.plus[(i, j)].norm()
                + phi.minus[(i, j)].norm()
                + psi.plus[(i, j)].norm()
                + psi.minus[(i, j)].norm();
            if amp > threshold {
                let distance = obstacle.distance_to_line(grid.base_point(i, j), grid.dir);
                if distance <= collar {
                    return Err(ScatteringError::SupportViolation { distance, collar });
                }
            }
            out[0] += phi.plus[(i, j)]
                * Complex64::from_polar(1.0, phases.plus[(i, j)])
                * psi.plus[(i, j)].conj();
            out[1] += phi.minus[(i, j)]
                * Complex64::from_polar(1.0, phases.minus[(i, j)])
                * psi.minus[(i, j)].conj();
        }
    }
    let cell = grid.h * grid.h;
    Ok([out[0] * cell, out[1] * cell])
}
