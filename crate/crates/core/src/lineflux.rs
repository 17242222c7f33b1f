//! Line, arc, and loop integrals of the electromagnetic data: X-ray
//! transforms, long-range fluxes, hole fluxes, and angular derivatives.
//!
//! The scattering phases of a line `L(x, v̂) = x + ℝv̂` are built from two
//! scalars computed here,
//!
//! ```text
//!   int_A  = ∫ A(x + r v̂) · v̂ dr,     int_A0 = ∫ A₀(x + r v̂) dr,
//! ```
//!
//! and two flux quantities that classify what survives at infinity:
//!
//! * the **hole flux** `F_h = ∫_{closure} A` over the closure of a line of
//!   homology class `h` — the topological (Aharonov-Bohm) content;
//! * the **long-range flux** `Φ_L(A, v̂) = −lim_s ∫_{𝔰(s)} A` over dilated
//!   half-circle arcs from `v̂` to `−v̂` — the contribution of the `1/|x|`
//!   tail, equal to `λ∞(v̂) − λ∞(−v̂)` for gauge tails.
//!
//! The angular derivative of `int_A` with respect to the beam direction
//! carries the first moment of `B` plus an `A∞` boundary term,
//!
//! ```text
//!   d/dϑ ∫_{L(x, cos ϑ v̂ + sin ϑ v̂⊥)} A
//!       = ∫ τ B(x+τv̂)·(v̂⊥ × v̂) dτ + [A∞(v̂) + A∞(−v̂)]·v̂⊥,
//! ```
//!
//! which is what makes magnetic-field reconstruction from phase data
//! possible. All fluxes are reported unreduced — reduction mod π or 2π is a
//! statement about what scattering determines and belongs to the inversion
//! side.

use crate::geometry::{classify_line, closure_curve, ArcChoice, ClosedCurve, GeometryError, LineQuery, Obstacle};
use crate::potentials::{
    a_infinity, eval_along, ClassTag, ElectricPotential, PotentialError, VectorPotential,
};
use crate::quad::{self, QuadError};
use crate::vec3::Vec3;
use crate::fitting;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinefluxError {
    #[error("line integral tail did not settle (achieved {achieved:.3e}, wanted {requested:.3e}); decay too slow along this line")]
    SlowDecay { achieved: f64, requested: f64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("arc-integral extrapolation stalled (last delta {delta:.3e})")]
    NonConvergent { delta: f64 },
    #[error("long-range flux cross-check failed: arc limit {arc:.6e} vs angular form {analytic:.6e}")]
    CrossCheckFailed { arc: f64, analytic: f64 },
    #[error("no representative line of class {class:?} found for this direction")]
    NoRepresentative { class: Vec<i64> },
    #[error("hole flux varies over representatives (spread {spread:.3e}); field is not zero outside")]
    RepresentativeDependent { spread: f64 },
    #[error("perturbed lines leave the homology class (or the obstacle's complement)")]
    ClassCrossing,
}

impl From<QuadError<PotentialError>> for LinefluxError {
    fn from(e: QuadError<PotentialError>) -> Self {
        match e {
            QuadError::Eval(inner) => LinefluxError::Potential(inner),
            QuadError::NonConvergent { achieved, requested } => {
                LinefluxError::SlowDecay { achieved, requested }
            }
        }
    }
}

/// Infallible-evaluator marker for quadrature over plain closures.
#[derive(Debug)]
pub enum Never {}

/// X-ray transform values of one line.
#[derive(Debug, Clone)]
pub struct XRaySample {
    pub line: LineQuery,
    pub int_a: f64,
    pub int_a0: f64,
    /// Combined quadrature error estimate.
    pub err: f64,
}

/// Precomputed flux data of one homology class and one beam direction:
/// everything a line's magnetic phase needs when the configuration is
/// field-free (`∫_L A = F_h + Φ_L`), with no further quadrature.
#[derive(Debug, Clone)]
pub struct FluxRecord {
    /// Winding vector `h`, one entry per handle.
    pub class: Vec<i64>,
    /// Hole flux `F_h`, stored unreduced.
    pub hole_flux: f64,
    /// Long-range flux `Φ_L(A, v̂)`, stored unreduced.
    pub long_range_flux: f64,
    /// Beam direction the record was computed for.
    pub dir: Vec3,
}

impl FluxRecord {
    /// Quadratures both fluxes of one class/direction pair.
    pub fn compute(
        a: &VectorPotential,
        obstacle: &Obstacle,
        class: &[i64],
        dir: Vec3,
        s_schedule: &[f64],
    ) -> Result<Self, LinefluxError> {
        let dir = dir.normalized();
        Ok(FluxRecord {
            class: class.to_vec(),
            hole_flux: hole_flux(a, obstacle, class, dir)?,
            long_range_flux: long_range_flux(a, dir, s_schedule)?,
            dir,
        })
    }
}

/// X-ray transform of `(A, A₀)` along a line: whole-line adaptive
/// quadrature with dyadic tail summation sized by the decay classes.
pub fn xray(
    a: &VectorPotential,
    a0: &ElectricPotential,
    line: &LineQuery,
    tol: f64,
) -> Result<XRaySample, LinefluxError> {
    let dir = line.dir;
    let core = line.base.norm() + a.far_scale().max(a0.far_scale()) + 4.0;
    let fa = |r: f64| -> Result<f64, PotentialError> {
        Ok(eval_along(a, line.point(r), dir)?.dot(dir))
    };
    let qa = quad::line_integral(&fa, core, tol)?;
    let fa0 = |r: f64| -> Result<f64, PotentialError> { Ok(a0.eval(line.point(r))) };
    let qa0 = quad::line_integral(&fa0, core, tol)?;
    Ok(XRaySample {
        line: line.clone(),
        int_a: qa.value,
        int_a0: qa0.value,
        err: qa.err + qa0.err,
    })
}

/// Batch X-ray sampling, parallel over lines.
pub fn xray_batch(
    a: &VectorPotential,
    a0: &ElectricPotential,
    lines: &[LineQuery],
    tol: f64,
) -> Result<Vec<XRaySample>, LinefluxError> {
    lines.par_iter().map(|line| xray(a, a0, line, tol)).collect()
}

/// Integral of `A` along a closed curve, segment by segment.
pub fn curve_integral(
    a: &VectorPotential,
    curve: &ClosedCurve,
    tol: f64,
) -> Result<f64, LinefluxError> {
    let mut total = 0.0;
    let seg_tol = tol / curve.segments().len() as f64;
    for seg in curve.segments() {
        let f = |t: f64| -> Result<f64, PotentialError> {
            let d = seg.deriv(t);
            Ok(eval_along(a, seg.point(t), d)?.dot(d))
        };
        total += quad::adaptive(&f, 0.0, 1.0, seg_tol)
            .map_err(LinefluxError::from)?
            .value;
    }
    Ok(total)
}

/// Long-range flux `Φ_L(A, v̂) = −lim_{s→∞} ∫_{𝔰(s)} A` over the dilated
/// half circles `𝔰(s): θ ↦ base + s(cos θ v̂ + sin θ v̂⊥)`, `θ: 0 → π`,
/// extrapolated over the dilation schedule.
///
/// For LRdelta potentials the same quantity is recomputed from the angular
/// coefficient as `−∫₀^π A∞(x̂(θ))·x̂'(θ)/|x̂'| dθ` and the two values are
/// required to agree within `1e−4`.
pub fn long_range_flux(
    a: &VectorPotential,
    v: Vec3,
    s_schedule: &[f64],
) -> Result<f64, LinefluxError> {
    long_range_flux_from(a, v, Vec3::ZERO, s_schedule)
}

/// [`long_range_flux`] with arcs dilated about an off-origin base point;
/// the limit is independent of the base, which the tests exercise.
pub fn long_range_flux_from(
    a: &VectorPotential,
    v: Vec3,
    base: Vec3,
    s_schedule: &[f64],
) -> Result<f64, LinefluxError> {
    assert!(s_schedule.len() >= 3, "dilation schedule needs at least 3 radii");
    assert!(
        s_schedule.windows(2).all(|w| w[0] < w[1]),
        "dilation schedule must be increasing"
    );
    let v = v.normalized();
    let vp = v.any_orthonormal();
    let mut vals = Vec::with_capacity(s_schedule.len());
    for &s in s_schedule {
        vals.push(arc_integral(a, base, v, vp, s)?);
    }
    let lim = fitting::extrapolate(&vals, 1e-7).ok_or(LinefluxError::NonConvergent {
        delta: vals
            .windows(2)
            .last()
            .map(|w| (w[1] - w[0]).abs())
            .unwrap_or(f64::NAN),
    })?;
    if lim.err > 1e-5 {
        return Err(LinefluxError::NonConvergent { delta: lim.err });
    }
    let flux = -lim.value;
    // Independent angular route for LRdelta classes.
    if matches!(a.class(), ClassTag::LrDelta { .. }) {
        let analytic = long_range_flux_angular(a, v, vp)?;
        if (flux - analytic).abs() > 1e-4 {
            return Err(LinefluxError::CrossCheckFailed { arc: flux, analytic });
        }
    }
    Ok(flux)
}

/// `∫_{𝔰(s)} A`: the arc integral at one dilation.
fn arc_integral(
    a: &VectorPotential,
    base: Vec3,
    v: Vec3,
    vp: Vec3,
    s: f64,
) -> Result<f64, LinefluxError> {
    let f = |th: f64| -> Result<f64, PotentialError> {
        let pos = base + (v * th.cos() + vp * th.sin()) * s;
        let tangent = (vp * th.cos() - v * th.sin()) * s;
        Ok(eval_along(a, pos, tangent)?.dot(tangent))
    };
    Ok(quad::adaptive(&f, 0.0, std::f64::consts::PI, 1e-10)
        .map_err(LinefluxError::from)?
        .value)
}

/// The dilation-free angular form of the long-range flux,
/// `Φ_L = −∫₀^π A∞(x̂(θ))·t̂(θ) dθ` with `x̂` sweeping from `v̂` to `−v̂`.
fn long_range_flux_angular(
    a: &VectorPotential,
    v: Vec3,
    vp: Vec3,
) -> Result<f64, LinefluxError> {
    let n = 64;
    // Gauss-Legendre in θ; A∞ per node via the extrapolation operation (or
    // its analytic shortcut when the potential carries one).
    let (xs, ws) = quad::gauss_legendre(n);
    let mut total = 0.0;
    for (&t, &w) in xs.iter().zip(&ws) {
        let th = 0.5 * (t + 1.0) * std::f64::consts::PI;
        let xhat = v * th.cos() + vp * th.sin();
        let tangent = vp * th.cos() - v * th.sin();
        let ainf = match a.analytic_a_inf(xhat) {
            Some(val) => val,
            None => a_infinity(a, xhat)?,
        };
        total += ainf.dot(tangent) * w * 0.5 * std::f64::consts::PI;
    }
    Ok(-total)
}

/// Hole flux `F_h`: the integral of `A` over the closure of a representative
/// line of homology class `h` in direction `v̂`.
///
/// Representative-independence is asserted by evaluating three distinct
/// representatives (spread < 1e−6) — a genuine check that the field
/// vanishes outside the obstacle, since otherwise the closure integral is
/// not a class function.
pub fn hole_flux(
    a: &VectorPotential,
    obstacle: &Obstacle,
    h: &[i64],
    v: Vec3,
) -> Result<f64, LinefluxError> {
    let v = v.normalized();
    let reps = find_representatives(obstacle, h, v, 3)?;
    let mut values = Vec::with_capacity(reps.len());
    for line in &reps {
        let radius = line.base.norm() + 2.0 * obstacle.bounding_radius().max(1.0) + 2.0;
        let closure = closure_curve(obstacle, line, radius, ArcChoice::Short)?;
        values.push(curve_integral(a, &closure, 1e-9)?);
    }
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread > 1e-6 {
        return Err(LinefluxError::RepresentativeDependent { spread });
    }
    Ok(values[0])
}

/// Finds `count` distinct admissible lines of class `h` in direction `v̂`,
/// by classifying a deterministic candidate set in the transverse plane
/// (hole-centered probes for threading classes, far offsets for the trivial
/// class).
fn find_representatives(
    obstacle: &Obstacle,
    h: &[i64],
    v: Vec3,
    count: usize,
) -> Result<Vec<LineQuery>, LinefluxError> {
    assert_eq!(h.len(), obstacle.n_handles(), "class label length mismatch");
    let (e1, e2) = v.orthonormal_frame();
    let rb = obstacle.bounding_radius().max(1.0);
    let mut candidates: Vec<Vec3> = Vec::new();
    // Probes around each hole center (for threading classes) …
    for core in obstacle.handle_curves() {
        let c = core.circle.center;
        let project = |p: Vec3| e1 * p.dot(e1) + e2 * p.dot(e2);
        candidates.push(project(c));
        for ring_r in [0.25, 0.5] {
            for k in 0..8 {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
                let offset = e1 * (th.cos() * ring_r * core.circle.radius)
                    + e2 * (th.sin() * ring_r * core.circle.radius);
                candidates.push(project(c) + offset);
            }
        }
    }
    // … and far offsets (for the trivial class).
    for k in 0..8 {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.3) / 8.0;
        candidates.push(e1 * ((rb + 2.0) * th.cos()) + e2 * ((rb + 2.0) * th.sin()));
    }
    for k in 0..4 {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.1) / 4.0;
        candidates.push(e1 * ((rb + 4.0) * th.cos()) + e2 * ((rb + 4.0) * th.sin()));
    }
    let mut found: Vec<LineQuery> = Vec::new();
    for base in candidates {
        if found.len() >= count {
            break;
        }
        if found.iter().any(|l| l.base.dist(base) < 0.2) {
            continue;
        }
        if let Ok(class) = classify_line(obstacle, base, v) {
            if class == h {
                found.push(LineQuery { base, dir: v, class });
            }
        }
    }
    if found.len() >= count {
        Ok(found)
    } else {
        Err(LinefluxError::NoRepresentative { class: h.to_vec() })
    }
}

/// Angular derivative of the magnetic X-ray data at a line, with one
/// Richardson refinement.
#[derive(Debug, Clone, Copy)]
pub struct AngularDerivative {
    /// Central difference at step `δϑ`.
    pub central: f64,
    /// Richardson combination of steps `δϑ` and `δϑ/2` (fourth order).
    pub refined: f64,
}

/// Derivative of `ϑ ↦ ∫_{L(x, cos ϑ v̂ + sin ϑ v̂⊥)} A · dl` at `ϑ = 0`.
///
/// All four perturbed lines must stay admissible and in the homology class
/// of the central line; otherwise the difference quotient mixes topological
/// sectors and the operation refuses.
pub fn angular_derivative_xray(
    a: &VectorPotential,
    obstacle: &Obstacle,
    x: Vec3,
    v: Vec3,
    vp: Vec3,
    dtheta: f64,
) -> Result<AngularDerivative, LinefluxError> {
    let v = v.normalized();
    let vp = (vp - v * vp.dot(v)).normalized();
    let zero = ElectricPotential::Zero;
    let class0 = classify_line(obstacle, x, v).map_err(|_| LinefluxError::ClassCrossing)?;
    let eval_at = |th: f64| -> Result<f64, LinefluxError> {
        let dir = v * th.cos() + vp * th.sin();
        let class = classify_line(obstacle, x, dir).map_err(|_| LinefluxError::ClassCrossing)?;
        if class != class0 {
            return Err(LinefluxError::ClassCrossing);
        }
        let line = LineQuery { base: x, dir, class };
        Ok(xray(a, &zero, &line, 1e-11)?.int_a)
    };
    let coarse = (eval_at(dtheta)? - eval_at(-dtheta)?) / (2.0 * dtheta);
    let fine = (eval_at(dtheta / 2.0)? - eval_at(-dtheta / 2.0)?) / dtheta;
    Ok(AngularDerivative {
        central: coarse,
        refined: (4.0 * fine - coarse) / 3.0,
    })
}

/// First transverse moment of the field along a line:
/// `∫ τ B(x+τv̂)·(v̂⊥ × v̂) dτ` — the field side of the angular-derivative
/// identity, computed by direct quadrature.
pub fn field_moment(
    b: &crate::potentials::MagneticField,
    x: Vec3,
    v: Vec3,
    vp: Vec3,
    tol: f64,
) -> Result<f64, LinefluxError> {
    let v = v.normalized();
    let vp = (vp - v * vp.dot(v)).normalized();
    let n = vp.cross(v);
    let core = x.norm() + b.support_radius().unwrap_or(8.0) + 4.0;
    let f = |tau: f64| -> Result<f64, Never> { Ok(tau * b.eval(x + v * tau).dot(n)) };
    let q = quad::line_integral(&f, core, tol).map_err(|e| match e {
        QuadError::Eval(never) => match never {},
        QuadError::NonConvergent { achieved, requested } => {
            LinefluxError::SlowDecay { achieved, requested }
        }
    })?;
    Ok(q.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Solid;
    use crate::potentials::{make_ab_torus_potential, make_longrange_potential, AngularFn};

    fn standard_torus() -> Obstacle {
        Obstacle::new(vec![Solid::Torus {
            center: Vec3::ZERO,
            axis: Vec3::EZ,
            major_radius: 2.0,
            minor_radius: 0.5,
        }])
        .unwrap()
    }

    fn schedule() -> Vec<f64> {
        vec![32.0, 64.0, 128.0, 256.0, 512.0]
    }

    #[test]
    fn xray_zero_and_gaussian() {
        let line = LineQuery::new(Vec3::new(0.3, -0.2, 0.1), Vec3::new(1.0, 2.0, -0.5));
        let s = xray(&VectorPotential::Zero, &ElectricPotential::Zero, &line, 1e-10).unwrap();
        assert_eq!(s.int_a, 0.0);
        assert_eq!(s.int_a0, 0.0);

        // Gaussian through its own center integrates to √π analytically.
        let a0 = ElectricPotential::Gaussian {
            center: Vec3::ZERO,
            width: 1.0,
            amplitude: 1.0,
        };
        let line = LineQuery::new(Vec3::ZERO, Vec3::new(0.2, 0.5, 1.0));
        let s = xray(&VectorPotential::Zero, &a0, &line, 1e-10).unwrap();
        assert!(
            (s.int_a0 - std::f64::consts::PI.sqrt()).abs() < 1e-9,
            "got {}",
            s.int_a0
        );
    }

    #[test]
    fn xray_ab_torus_sees_flux_by_class() {
        let obstacle = standard_torus();
        let flux = 1.3;
        let a = make_ab_torus_potential(&obstacle, 0, flux).unwrap();
        let zero = ElectricPotential::Zero;
        // Class (1): through the hole along the axis.
        let line1 = LineQuery::new(Vec3::new(0.2, 0.1, 0.0), Vec3::EZ);
        let s1 = xray(&a, &zero, &line1, 1e-10).unwrap();
        // Class (0): far outside.
        let line0 = LineQuery::new(Vec3::new(8.0, 0.0, 0.0), Vec3::EZ);
        let s0 = xray(&a, &zero, &line0, 1e-10).unwrap();
        assert!(
            (s1.int_a - s0.int_a - flux).abs() < 1e-7,
            "class difference {} vs flux {flux}",
            s1.int_a - s0.int_a
        );
        // With a short-range potential the class-(0) integral itself → 0…
        assert!(s0.int_a.abs() < 1e-7, "trivial-class integral {}", s0.int_a);
        // …so the class-(1) line alone carries the whole flux.
        assert!((s1.int_a - flux).abs() < 1e-7);
    }

    #[test]
    fn long_range_flux_of_short_range_potential_vanishes() {
        let obstacle = standard_torus();
        let a = make_ab_torus_potential(&obstacle, 0, 2.0).unwrap();
        let flux = long_range_flux(&a, Vec3::new(0.3, 0.4, 0.9), &schedule()).unwrap();
        assert!(flux.abs() < 1e-6, "SR long-range flux {flux}");
    }

    #[test]
    fn long_range_flux_matches_angular_jump() {
        // λ∞(v̂) = v̂_z: Φ_L(ẑ) = λ∞(ẑ) − λ∞(−ẑ) = 2, and the antisymmetry
        // Φ_L(v̂) + Φ_L(−v̂) = 0 for every direction.
        let (a, lam) = make_longrange_potential(AngularFn::Linear(Vec3::EZ), 3.0);
        let fz = long_range_flux(&a, Vec3::EZ, &schedule()).unwrap();
        assert!((fz - 2.0).abs() < 1e-5, "Φ_L(ẑ) = {fz}");
        for v in [
            Vec3::EX,
            Vec3::new(0.6, -0.3, 0.74).normalized(),
            Vec3::new(-0.2, 0.9, 0.4).normalized(),
        ] {
            let fp = long_range_flux(&a, v, &schedule()).unwrap();
            let fm = long_range_flux(&a, -v, &schedule()).unwrap();
            assert!((fp + fm).abs() < 1e-5, "antisymmetry defect {}", fp + fm);
            let jump = lam.jump(v).unwrap();
            assert!((fp - jump).abs() < 1e-5, "Φ_L {fp} vs λ∞ jump {jump}");
        }
    }

    #[test]
    fn long_range_flux_independent_of_base_point() {
        let (a, _) = make_longrange_potential(AngularFn::Linear(Vec3::new(0.4, 1.0, -0.3)), 3.0);
        let v = Vec3::new(0.2, -0.5, 1.0).normalized();
        // Off-centre dilation converges more slowly (the base offset enters
        // at first order), so the ladder is longer than the default one.
        let schedule: Vec<f64> = (0..9).map(|k| 32.0 * (1u64 << k) as f64).collect();
        let reference = long_range_flux(&a, v, &schedule).unwrap();
        let bases = [
            Vec3::new(1.0, 2.0, -0.5),
            Vec3::new(-3.0, 0.7, 1.1),
            Vec3::new(0.0, -2.0, 2.0),
            Vec3::new(2.5, 2.5, 0.1),
            Vec3::new(-1.0, -1.0, -1.0),
        ];
        for base in bases {
            let f = long_range_flux_from(&a, v, base, &schedule).unwrap();
            assert!(
                (f - reference).abs() < 1e-5,
                "base {base:?}: {f} vs {reference}"
            );
        }
    }

    #[test]
    fn hole_flux_recovers_ab_flux() {
        let obstacle = standard_torus();
        let flux = 0.8;
        let a = make_ab_torus_potential(&obstacle, 0, flux).unwrap();
        let f1 = hole_flux(&a, &obstacle, &[1], Vec3::EZ).unwrap();
        assert!((f1 - flux).abs() < 1e-7, "F_(1) = {f1}");
        let f0 = hole_flux(&a, &obstacle, &[0], Vec3::EZ).unwrap();
        assert!(f0.abs() < 1e-7, "F_(0) = {f0}");
        // Flux shifted by 2π shifts F_h by exactly 2π · h.
        let a_shift = make_ab_torus_potential(&obstacle, 0, flux + 2.0 * std::f64::consts::PI)
            .unwrap();
        let f1s = hole_flux(&a_shift, &obstacle, &[1], Vec3::EZ).unwrap();
        assert!(
            ((f1s - f1) - 2.0 * std::f64::consts::PI).abs() < 1e-6,
            "quantised shift {}",
            f1s - f1
        );
    }

    #[test]
    fn hole_flux_unreachable_class() {
        let obstacle = standard_torus();
        let a = make_ab_torus_potential(&obstacle, 0, 1.0).unwrap();
        // Lines along x̂ cannot thread the hole of a ẑ-axis torus.
        let err = hole_flux(&a, &obstacle, &[1], Vec3::EX).unwrap_err();
        assert!(matches!(err, LinefluxError::NoRepresentative { .. }));
    }

    #[test]
    fn line_data_decomposes_into_hole_and_longrange_flux() {
        // ∫_L A = F_h + Φ_L(A, v̂) for a combined potential: topological AB
        // part plus a pure long-range tail, each term independently
        // quadratured.
        let obstacle = standard_torus();
        let ab = make_ab_torus_potential(&obstacle, 0, 1.1).unwrap();
        let (tail, _) = make_longrange_potential(AngularFn::Linear(Vec3::new(0.2, -0.4, 1.0)), 3.0);
        let a = VectorPotential::Sum(vec![ab, tail]);
        let v = Vec3::EZ;
        let line = LineQuery::new(Vec3::new(0.3, -0.2, 0.0), v);
        let s = xray(&a, &ElectricPotential::Zero, &line, 1e-10).unwrap();
        let fh = hole_flux(&a, &obstacle, &[1], v).unwrap();
        let fl = long_range_flux(&a, v, &schedule()).unwrap();
        assert!(
            (s.int_a - (fh + fl)).abs() < 1e-5,
            "∫A = {} vs F_h + Φ_L = {}",
            s.int_a,
            fh + fl
        );
    }

    #[test]
    fn xray_gauge_covariance() {
        // A₂ = A₁ + ∇λ shifts every line integral by λ∞(v̂) − λ∞(−v̂).
        let obstacle = standard_torus();
        let a1 = make_ab_torus_potential(&obstacle, 0, 0.7).unwrap();
        let (tail, lam) =
            make_longrange_potential(AngularFn::Quadratic([[0.3, 0.1, 0.0], [0.1, -0.2, 0.2], [0.0, 0.2, 0.5]]), 3.0);
        let a2 = VectorPotential::Sum(vec![a1.clone(), tail]);
        let zero = ElectricPotential::Zero;
        for (base, dir) in [
            (Vec3::new(0.2, 0.1, 0.0), Vec3::EZ),
            (Vec3::new(6.0, 0.0, 1.0), Vec3::new(0.3, 1.0, 0.2)),
        ] {
            let line = LineQuery::new(base, dir);
            let s1 = xray(&a1, &zero, &line, 1e-10).unwrap();
            let s2 = xray(&a2, &zero, &line, 1e-10).unwrap();
            let jump = lam.jump(line.dir).unwrap();
            // Even-degree λ∞ has zero jump; exercise a direction where the
            // quadratic form still produces one through the symmetrisation…
            // (jump may be 0; the identity must hold regardless).
            assert!(
                ((s2.int_a - s1.int_a) - jump).abs() < 1e-6,
                "gauge shift {} vs jump {jump}",
                s2.int_a - s1.int_a
            );
        }
    }

    #[test]
    fn angular_derivative_of_field_free_data_vanishes() {
        let obstacle = standard_torus();
        let a = make_ab_torus_potential(&obstacle, 0, 1.0).unwrap();
        let d = angular_derivative_xray(
            &a,
            &obstacle,
            Vec3::new(0.2, 0.1, 0.0),
            Vec3::EZ,
            Vec3::EX,
            1e-3,
        )
        .unwrap();
        assert!(d.refined.abs() < 1e-5, "field-free angular derivative {}", d.refined);
    }

    #[test]
    fn angular_derivative_matches_tail_boundary_term() {
        // Pure tail potential: the moment term vanishes (B = 0) and the
        // derivative equals [A∞(v̂) + A∞(−v̂)]·v̂⊥.
        let (a, _) = make_longrange_potential(AngularFn::Linear(Vec3::new(0.3, 0.9, 0.5)), 3.0);
        let obstacle = Obstacle::empty();
        let (x, v, vp) = (Vec3::new(0.5, -0.3, 0.2), Vec3::EZ, Vec3::EX);
        let d = angular_derivative_xray(&a, &obstacle, x, v, vp, 1e-3).unwrap();
        let expect = (a.analytic_a_inf(v).unwrap() + a.analytic_a_inf(-v).unwrap()).dot(vp);
        assert!(
            (d.refined - expect).abs() < 1e-3,
            "derivative {} vs boundary term {expect}",
            d.refined
        );
    }

    #[test]
    fn angular_derivative_matches_field_moment() {
        // Compact-support field via the bump gauge: the derivative equals
        // the first moment ∫ τ B·(v̂⊥×v̂) dτ (boundary term zero for SR).
        let a = VectorPotential::BumpGauge {
            center: Vec3::new(0.8, 0.4, 0.0),
            radius: 1.1,
            amplitude: 0.7,
            m: Vec3::new(0.2, 1.0, 0.4),
        };
        let b = a.field();
        let obstacle = Obstacle::empty();
        let (x, v, vp) = (
            Vec3::new(0.5, -0.1, 0.3),
            Vec3::new(0.1, 0.2, 1.0).normalized(),
            Vec3::EX,
        );
        let d = angular_derivative_xray(&a, &obstacle, x, v, vp, 1e-3).unwrap();
        let moment = field_moment(&b, x, v, vp, 1e-11).unwrap();
        assert!(
            (d.refined - moment).abs() < 1e-4,
            "derivative {} vs moment {moment}",
            d.refined
        );
    }

    #[test]
    fn angular_derivative_full_identity_combined_scene() {
        // Compact field + long-range tail: derivative = moment + boundary
        // term, all three computed independently.
        let bump = VectorPotential::BumpGauge {
            center: Vec3::new(0.5, -0.6, 0.2),
            radius: 1.0,
            amplitude: 0.5,
            m: Vec3::new(1.0, 0.1, -0.3),
        };
        let (tail, _) = make_longrange_potential(AngularFn::Linear(Vec3::new(0.4, 0.7, -0.2)), 3.0);
        let a = VectorPotential::Sum(vec![bump.clone(), tail]);
        let b = a.field();
        let obstacle = Obstacle::empty();
        let (x, v, vp) = (
            Vec3::new(-0.2, 0.3, 0.1),
            Vec3::new(0.9, 0.1, 0.42).normalized(),
            Vec3::new(0.0, 1.0, 0.0),
        );
        let vp = (vp - v * vp.dot(v)).normalized();
        let d = angular_derivative_xray(&a, &obstacle, x, v, vp, 1e-3).unwrap();
        let moment = field_moment(&b, x, v, vp, 1e-11).unwrap();
        let boundary = (a.analytic_a_inf(v).unwrap() + a.analytic_a_inf(-v).unwrap()).dot(vp);
        let residual = (d.refined - moment - boundary).abs();
        assert!(
            residual < 1e-3,
            "identity residual {residual}: d={} moment={moment} boundary={boundary}",
            d.refined
        );
    }

    #[test]
    fn angular_derivative_rejects_class_crossing() {
        let obstacle = standard_torus();
        let a = make_ab_torus_potential(&obstacle, 0, 1.0).unwrap();
        // Base near the inner rim: a large tilt drives the line into the
        // tube (or across classes).
        let err = angular_derivative_xray(
            &a,
            &obstacle,
            Vec3::new(1.45, 0.0, 0.0),
            Vec3::EZ,
            Vec3::EX,
            0.5,
        )
        .unwrap_err();
        assert!(matches!(err, LinefluxError::ClassCrossing));
    }
}
