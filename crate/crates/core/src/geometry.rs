//! Obstacles, lines, closed curves, and the homology classification of lines.
//!
//! The obstacle is a disjoint union of solid balls and solid tori sitting
//! inside a ball `B(0; R)`. A straight beam line `L(x, v) = x + R v` that
//! avoids the obstacle is classified by how its *closure* — the chord of
//! `L ∩ B(0;R)` closed up by a geodesic arc on the sphere — winds through
//! the torus holes: one signed linking number with each torus core circle.
//! Lines in the same class acquire the same topological flux phase, which is
//! what makes the classification the backbone of flux recovery.
//!
//! Linking numbers are computed with the Gauss double integral
//!
//! ```text
//!   Lk(c1, c2) = (1/4π) ∮∮ (r1 − r2) · (dr1 × dr2) / |r1 − r2|³
//! ```
//!
//! over adaptively refined polylines; a result that refuses to settle within
//! `1e-3` of an integer is reported as an error rather than rounded, since a
//! non-integer value always indicates a geometry bug (curve touching the
//! obstacle, closure through a core circle, ...).

use crate::vec3::Vec3;
use thiserror::Error;

/// Residual distance from an integer at which a linking quadrature is
/// accepted (and below which it must sit after refinement).
pub const LINKING_INTEGER_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("solid {index} is invalid: {reason}")]
    InvalidSolid { index: usize, reason: String },
    #[error("components {i} and {j} are not disjoint (surface gap {gap:.3e})")]
    OverlappingComponents { i: usize, j: usize, gap: f64 },
    #[error("line intersects the obstacle (minimum distance {dist:.3e})")]
    LineIntersectsObstacle { dist: f64 },
    #[error("closure radius {given} too small: obstacle requires R > {required}")]
    RadiusTooSmall { required: f64, given: f64 },
    #[error("line misses the closure sphere B(0; {radius})")]
    LineMissesSphere { radius: f64 },
    #[error(
        "convex-hull condition violated: hull of the {side} rays comes within \
         {dist:.3e} of B(0; {required:.3e})"
    )]
    ConvexHullViolation { side: &'static str, dist: f64, required: f64 },
    #[error(
        "linking quadrature did not settle on an integer (value {value:.6}, \
         residual {residual:.2e} at resolution {resolution})"
    )]
    LinkingNotInteger { value: f64, residual: f64, resolution: usize },
    #[error("closed curve does not chain: gap {gap:.3e} between segments {at} and {next}")]
    CurveNotClosed { at: usize, next: usize, gap: f64 },
}

/// A solid obstacle component: genus 0 (ball) or genus 1 (torus).
#[derive(Debug, Clone)]
pub enum Solid {
    Ball { center: Vec3, radius: f64 },
    /// Solid torus: points within `minor_radius` of the circle of radius
    /// `major_radius` around `center` in the plane orthogonal to `axis`.
    Torus { center: Vec3, axis: Vec3, major_radius: f64, minor_radius: f64 },
}

impl Solid {
    /// Signed distance from a point to the solid's surface (negative inside).
    pub fn distance(&self, p: Vec3) -> f64 {
        match *self {
            Solid::Ball { center, radius } => p.dist(center) - radius,
            Solid::Torus { center, axis, major_radius, minor_radius } => {
                let d = p - center;
                let z = d.dot(axis);
                let radial = d - axis * z;
                let rho = radial.norm();
                // Distance to the core circle, then to the tube surface.
                ((rho - major_radius).hypot(z)) - minor_radius
            }
        }
    }

    /// Radius of the smallest origin-independent bounding sphere around the
    /// solid's own center.
    fn local_radius(&self) -> f64 {
        match *self {
            Solid::Ball { radius, .. } => radius,
            Solid::Torus { major_radius, minor_radius, .. } => major_radius + minor_radius,
        }
    }

    fn center(&self) -> Vec3 {
        match *self {
            Solid::Ball { center, .. } | Solid::Torus { center, .. } => center,
        }
    }
}

/// An oriented circle in space: `θ ↦ center + radius (u cos θ + v sin θ)`
/// with `(u, v, normal)` right-handed, traversed counterclockwise as seen
/// from the `+normal` side.
#[derive(Debug, Clone, Copy)]
pub struct Circle {
    pub center: Vec3,
    pub normal: Vec3,
    pub radius: f64,
    u: Vec3,
    v: Vec3,
}

impl Circle {
    pub fn new(center: Vec3, normal: Vec3, radius: f64) -> Self {
        let normal = normal.normalized();
        let (u, v) = normal.orthonormal_frame();
        // orthonormal_frame gives u × v = normal, i.e. the desired handedness.
        Circle { center, normal, radius, u, v }
    }

    pub fn point(&self, theta: f64) -> Vec3 {
        self.center + (self.u * theta.cos() + self.v * theta.sin()) * self.radius
    }

    /// Derivative with respect to `theta`.
    pub fn tangent(&self, theta: f64) -> Vec3 {
        (self.v * theta.cos() - self.u * theta.sin()) * self.radius
    }

    /// Distance from a point to the circle (as a curve).
    pub fn distance(&self, p: Vec3) -> f64 {
        let d = p - self.center;
        let z = d.dot(self.normal);
        let rho = (d - self.normal * z).norm();
        (rho - self.radius).hypot(z)
    }
}

/// The core circle of a torus: a basis element of the obstacle's first
/// homology, used as the linking partner for line classification.
#[derive(Debug, Clone)]
pub struct CoreCircle {
    pub torus_index: usize,
    pub circle: Circle,
}

/// A circle threading the torus hole once (linking the core circle once),
/// used to measure handle circulations of potentials.
#[derive(Debug, Clone)]
pub struct HoleCircle {
    pub torus_index: usize,
    pub circle: Circle,
}

/// Disjoint union of solids with the derived handle geometry.
#[derive(Debug, Clone)]
pub struct Obstacle {
    components: Vec<Solid>,
    handle_curves: Vec<CoreCircle>,
    dual_curves: Vec<HoleCircle>,
}

impl Obstacle {
    /// Validates the components (shape parameters, pairwise disjointness) and
    /// derives the handle and dual curves, one pair per torus in input order.
    pub fn new(components: Vec<Solid>) -> Result<Self, GeometryError> {
        for (index, s) in components.iter().enumerate() {
            match *s {
                Solid::Ball { radius, .. } => {
                    if !(radius > 0.0) {
                        return Err(GeometryError::InvalidSolid {
                            index,
                            reason: format!("ball radius {radius} must be positive"),
                        });
                    }
                }
                Solid::Torus { axis, major_radius, minor_radius, .. } => {
                    if !(minor_radius > 0.0 && minor_radius < major_radius) {
                        return Err(GeometryError::InvalidSolid {
                            index,
                            reason: format!(
                                "torus needs 0 < minor ({minor_radius}) < major ({major_radius})"
                            ),
                        });
                    }
                    if axis.norm() == 0.0 {
                        return Err(GeometryError::InvalidSolid {
                            index,
                            reason: "torus axis must be nonzero".into(),
                        });
                    }
                }
            }
        }
        // Pairwise disjointness via conservative bounding spheres first, then
        // a sampled surface-distance check for near pairs.
        for i in 0..components.len() {
            for j in (i + 1)..components.len() {
                let gap = solid_pair_gap(&components[i], &components[j]);
                if gap <= 0.0 {
                    return Err(GeometryError::OverlappingComponents { i, j, gap });
                }
            }
        }
        let mut handle_curves = Vec::new();
        let mut dual_curves = Vec::new();
        for (torus_index, s) in components.iter().enumerate() {
            if let Solid::Torus { center, axis, major_radius, minor_radius } = *s {
                let axis = axis.normalized();
                handle_curves.push(CoreCircle {
                    torus_index,
                    circle: Circle::new(center, axis, major_radius),
                });
                // The dual circle sits in the plane spanned by the axis and a
                // radial direction, centered on the core circle, with a radius
                // strictly between the tube radius and the major radius so it
                // clears both the tube and the far side of the torus.
                let (e1, _) = axis.orthonormal_frame();
                let dual_center = center + e1 * major_radius;
                let dual_radius = 0.5 * (minor_radius + major_radius);
                // Normal axis × e1 makes the dual circle link the core circle
                // with winding +1, the sign convention fixed by the tests.
                dual_curves.push(HoleCircle {
                    torus_index,
                    circle: Circle::new(dual_center, axis.cross(e1), dual_radius),
                });
            }
        }
        Ok(Obstacle { components, handle_curves, dual_curves })
    }

    /// The empty obstacle (free space).
    pub fn empty() -> Self {
        Obstacle { components: Vec::new(), handle_curves: Vec::new(), dual_curves: Vec::new() }
    }

    pub fn components(&self) -> &[Solid] {
        &self.components
    }

    pub fn handle_curves(&self) -> &[CoreCircle] {
        &self.handle_curves
    }

    pub fn dual_curves(&self) -> &[HoleCircle] {
        &self.dual_curves
    }

    /// Number of handles (tori), i.e. the length of class labels.
    pub fn n_handles(&self) -> usize {
        self.handle_curves.len()
    }

    /// Radius of a ball around the origin containing the whole obstacle.
    pub fn bounding_radius(&self) -> f64 {
        self.components
            .iter()
            .map(|s| s.center().norm() + s.local_radius())
            .fold(0.0, f64::max)
    }

    /// Distance from a point to the nearest solid (+∞ when empty).
    pub fn distance_to_point(&self, p: Vec3) -> f64 {
        self.components.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Distance from the full line `x + R v` to the nearest solid.
    pub fn distance_to_line(&self, x: Vec3, v: Vec3) -> f64 {
        self.components.iter().map(|s| line_solid_distance(x, v, s)).fold(f64::INFINITY, f64::min)
    }
}

/// Conservative surface gap between two solids: bounding-sphere gap when
/// positive, otherwise the minimum of sampled surface distances.
fn solid_pair_gap(a: &Solid, b: &Solid) -> f64 {
    let center_gap = a.center().dist(b.center()) - a.local_radius() - b.local_radius();
    if center_gap > 0.0 {
        return center_gap;
    }
    // Sample points on the surface of `a` and take distances to `b`.
    let mut min = f64::INFINITY;
    let n = 64;
    for i in 0..n {
        for j in 0..n / 2 {
            let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            let ph = std::f64::consts::PI * (j as f64 + 0.5) / (n / 2) as f64;
            let p = match *a {
                Solid::Ball { center, radius } => {
                    center
                        + Vec3::new(ph.sin() * th.cos(), ph.sin() * th.sin(), ph.cos()) * radius
                }
                Solid::Torus { center, axis, major_radius, minor_radius } => {
                    let axis = axis.normalized();
                    let (e1, e2) = axis.orthonormal_frame();
                    let ring = e1 * th.cos() + e2 * th.sin();
                    center
                        + ring * (major_radius + minor_radius * ph.cos())
                        + axis * (minor_radius * ph.sin())
                }
            };
            min = min.min(b.distance(p));
        }
    }
    min
}

/// Distance from the line `x + t v` (t over all reals) to a solid.
///
/// The restriction of the distance function to a line has a handful of local
/// minima for a torus, so this samples densely over the interval where the
/// solid's bounding sphere is reachable and polishes each local minimum by
/// golden-section search.
fn line_solid_distance(x: Vec3, v: Vec3, s: &Solid) -> f64 {
    let t0 = (s.center() - x).dot(v);
    let span = s.local_radius() + 1.0;
    let (lo, hi) = (t0 - 2.0 * span, t0 + 2.0 * span);
    let n = 1024;
    let f = |t: f64| s.distance(x + v * t);
    let mut best = f64::INFINITY;
    let h = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| f(lo + h * i as f64)).collect();
    for i in 0..=n {
        if vals[i] < best {
            best = vals[i];
        }
        // Polish interior local minima.
        if i > 0 && i < n && vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            let refined = golden_min(&f, lo + h * (i - 1) as f64, lo + h * (i + 1) as f64);
            if refined < best {
                best = refined;
            }
        }
    }
    best
}

/// Golden-section minimisation on `[a, b]`, returning the minimal value.
fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..64 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// An oriented line with an optional homology class label.
#[derive(Debug, Clone)]
pub struct LineQuery {
    pub base: Vec3,
    /// Unit direction.
    pub dir: Vec3,
    /// One signed winding integer per torus, in obstacle order.
    pub class: Vec<i64>,
}

impl LineQuery {
    pub fn new(base: Vec3, dir: Vec3) -> Self {
        LineQuery { base, dir: dir.normalized(), class: Vec::new() }
    }

    pub fn point(&self, r: f64) -> Vec3 {
        self.base + self.dir * r
    }
}

/// One C¹ piece of a closed curve, parameterised over `t ∈ [0, 1]`.
#[derive(Debug, Clone)]
pub enum Segment {
    Straight { from: Vec3, to: Vec3 },
    /// `θ(t) = angle0 + t (angle1 − angle0)`,
    /// `p(θ) = center + radius (u cos θ + v sin θ)`.
    Arc { center: Vec3, u: Vec3, v: Vec3, radius: f64, angle0: f64, angle1: f64 },
}

impl Segment {
    pub fn point(&self, t: f64) -> Vec3 {
        match *self {
            Segment::Straight { from, to } => from + (to - from) * t,
            Segment::Arc { center, u, v, radius, angle0, angle1 } => {
                let th = angle0 + t * (angle1 - angle0);
                center + (u * th.cos() + v * th.sin()) * radius
            }
        }
    }

    /// Derivative with respect to `t`.
    pub fn deriv(&self, t: f64) -> Vec3 {
        match *self {
            Segment::Straight { from, to } => to - from,
            Segment::Arc { center: _, u, v, radius, angle0, angle1 } => {
                let sweep = angle1 - angle0;
                let th = angle0 + t * sweep;
                (v * th.cos() - u * th.sin()) * (radius * sweep)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Straight { from, to } => from.dist(to),
            Segment::Arc { radius, angle0, angle1, .. } => radius * (angle1 - angle0).abs(),
        }
    }
}

/// A closed, oriented, piecewise-C¹ curve.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    segments: Vec<Segment>,
}

impl ClosedCurve {
    /// Builds a closed curve, verifying the segments chain end-to-start
    /// within `1e-12` relative to the curve size.
    pub fn new(segments: Vec<Segment>) -> Result<Self, GeometryError> {
        assert!(!segments.is_empty(), "a closed curve needs at least one segment");
        let scale = segments.iter().map(|s| s.length()).sum::<f64>().max(1.0);
        for (i, seg) in segments.iter().enumerate() {
            let next = &segments[(i + 1) % segments.len()];
            let gap = seg.point(1.0).dist(next.point(0.0));
            if gap > 1e-12 * scale {
                return Err(GeometryError::CurveNotClosed {
                    at: i,
                    next: (i + 1) % segments.len(),
                    gap,
                });
            }
        }
        Ok(ClosedCurve { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length()).sum()
    }

    /// Midpoints and chord vectors of a length-weighted polyline with roughly
    /// `n` total samples — the quadrature mesh for the Gauss integral.
    fn polyline_midpoints(&self, n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
        let total = self.total_length();
        let mut mids = Vec::with_capacity(n + self.segments.len() * 4);
        let mut deltas = Vec::with_capacity(mids.capacity());
        for seg in &self.segments {
            let k = ((n as f64 * seg.length() / total).ceil() as usize).max(4);
            let mut prev = seg.point(0.0);
            for i in 1..=k {
                let next = seg.point(i as f64 / k as f64);
                mids.push((prev + next) * 0.5);
                deltas.push(next - prev);
                prev = next;
            }
        }
        (mids, deltas)
    }
}

/// Gauss linking integral between a closed curve and a circle, evaluated on
/// polyline meshes with `n`-fold sampling of each curve.
fn gauss_linking_value(curve: &ClosedCurve, circle: &Circle, n: usize) -> f64 {
    let (mids_a, del_a) = curve.polyline_midpoints(n);
    let mut mids_b = Vec::with_capacity(n);
    let mut del_b = Vec::with_capacity(n);
    let mut prev = circle.point(0.0);
    for i in 1..=n {
        let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let next = circle.point(th);
        mids_b.push((prev + next) * 0.5);
        del_b.push(next - prev);
        prev = next;
    }
    let mut sum = 0.0;
    for (a, da) in mids_a.iter().zip(&del_a) {
        for (b, db) in mids_b.iter().zip(&del_b) {
            let r = *a - *b;
            let r2 = r.norm_sq();
            let cr = da.cross(*db);
            sum += cr.dot(r) / (r2 * r2.sqrt());
        }
    }
    sum / (4.0 * std::f64::consts::PI)
}

/// Linking number of a closed curve with a circle.
///
/// Refines the polyline resolution dyadically until two successive values
/// agree within `LINKING_INTEGER_TOL` and the last sits within that
/// tolerance of an integer; errors out otherwise instead of rounding.
pub fn linking_number(curve: &ClosedCurve, circle: &Circle) -> Result<i64, GeometryError> {
    let mut n = 128;
    let mut prev = gauss_linking_value(curve, circle, n);
    loop {
        n *= 2;
        let val = gauss_linking_value(curve, circle, n);
        let nearest = val.round();
        if (val - prev).abs() < 0.5 * LINKING_INTEGER_TOL
            && (val - nearest).abs() < LINKING_INTEGER_TOL
        {
            return Ok(nearest as i64);
        }
        prev = val;
        if n >= 8192 {
            return Err(GeometryError::LinkingNotInteger {
                value: val,
                residual: (val - nearest).abs(),
                resolution: n,
            });
        }
    }
}

/// Which of the two geodesic arcs closes the chord.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArcChoice {
    #[default]
    Short,
    Long,
}

/// The closure of a line within `B(0; radius)`: the chord oriented along the
/// line direction, closed by a geodesic sphere arc from the exit point back
/// to the entry point.
///
/// The arc lies in the plane spanned by the two intersection points (a
/// diametral chord perturbs the plane by `1e-9` to stay deterministic);
/// `arc_choice` picks the short or the long geodesic.
pub fn closure_curve(
    obstacle: &Obstacle,
    line: &LineQuery,
    radius: f64,
    arc_choice: ArcChoice,
) -> Result<ClosedCurve, GeometryError> {
    let required = obstacle.bounding_radius();
    if radius <= required {
        return Err(GeometryError::RadiusTooSmall { required, given: radius });
    }
    // Intersect |x + t v|² = radius².
    let b = line.base.dot(line.dir);
    let c = line.base.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return Err(GeometryError::LineMissesSphere { radius });
    }
    let sq = disc.sqrt();
    let entry = line.point(-b - sq);
    let exit = line.point(-b + sq);
    // Geodesic from exit back to entry in span(exit, entry).
    let u = exit / radius;
    let mut w = entry - u * entry.dot(u);
    if w.norm() < 1e-9 * radius {
        // Diametral chord: perturb the arc plane deterministically.
        let tilt = u.any_orthonormal();
        w = entry + tilt * (1e-9 * radius) - u * entry.dot(u);
    }
    let w = w.normalized();
    let alpha = entry.dot(u).clamp(-radius, radius) / radius;
    let alpha = alpha.acos();
    let angle1 = match arc_choice {
        ArcChoice::Short => alpha,
        ArcChoice::Long => alpha - 2.0 * std::f64::consts::PI,
    };
    // Snap the arc endpoint to the exact chord entry to keep the loop closed
    // at machine precision even after the diametral perturbation.
    let arc = Segment::Arc { center: Vec3::ZERO, u, v: w, radius, angle0: 0.0, angle1 };
    let arc_end = arc.point(1.0);
    let mut segments = vec![Segment::Straight { from: entry, to: exit }, arc];
    if arc_end.dist(entry) > 0.0 {
        segments.push(Segment::Straight { from: arc_end, to: entry });
    }
    ClosedCurve::new(segments)
}

/// Per-torus linking classification of an admissible line.
///
/// Returns one signed integer per torus: the linking number of the line's
/// closure with that torus's core circle. The label is independent of the
/// closure radius and arc choice, which the test suite exercises.
pub fn classify_line(
    obstacle: &Obstacle,
    base: Vec3,
    dir: Vec3,
) -> Result<Vec<i64>, GeometryError> {
    let dir = dir.normalized();
    let dist = obstacle.distance_to_line(base, dir);
    if dist <= 0.0 {
        return Err(GeometryError::LineIntersectsObstacle { dist });
    }
    if obstacle.n_handles() == 0 {
        return Ok(Vec::new());
    }
    // A radius this large keeps the sphere arc far from every solid while
    // still intersecting the line.
    let line_offset = (base - dir * base.dot(dir)).norm();
    let radius = (2.0 * obstacle.bounding_radius()).max(1.5 * line_offset + 1.0).max(1.0);
    let line = LineQuery { base, dir, class: Vec::new() };
    let closure = closure_curve(obstacle, &line, radius, ArcChoice::Short)?;
    obstacle
        .handle_curves()
        .iter()
        .map(|core| linking_number(&closure, &core.circle))
        .collect()
}

/// The oriented loop made of two line chords `x + [−ρ, ρ] v` (along `v`) and
/// `y + [ρ, −ρ] w` (against `w`) joined by straight bridges at both ends.
///
/// Valid only when the convex hulls of the two backward rays and of the two
/// forward rays each stay clear of `B(0; r)` with `r` the obstacle bounding
/// radius; then the bridges cannot cross the obstacle and the loop's linking
/// with each core circle is the difference of the two line classes.
pub fn gamma_curve(
    obstacle: &Obstacle,
    x: Vec3,
    v: Vec3,
    y: Vec3,
    w: Vec3,
    rho: f64,
) -> Result<ClosedCurve, GeometryError> {
    let v = v.normalized();
    let w = w.normalized();
    let r = obstacle.bounding_radius();
    for (side, sign) in [("backward", -1.0), ("forward", 1.0)] {
        let dist = ray_hull_distance(x, v * sign, y, w * sign, rho);
        if dist <= r {
            return Err(GeometryError::ConvexHullViolation { side, dist, required: r });
        }
    }
    let (xm, xp) = (x - v * rho, x + v * rho);
    let (ym, yp) = (y - w * rho, y + w * rho);
    ClosedCurve::new(vec![
        Segment::Straight { from: xm, to: xp },
        Segment::Straight { from: xp, to: yp },
        Segment::Straight { from: yp, to: ym },
        Segment::Straight { from: ym, to: xm },
    ])
}

/// Distance from the origin to the convex hull of the two rays
/// `x + (ρ + t) v` and `y + (ρ + s) w`, `t, s ≥ 0`.
///
/// Points of the hull are `α(x + ρv) + (1−α)(y + ρw) + a v + b w` with
/// `α ∈ [0,1]`, `a, b ≥ 0`; for fixed `α` the inner problem is a tiny
/// nonnegative least squares solved in closed form, and the outer profile is
/// convex in `α`, so golden-section search is exact enough.
fn ray_hull_distance(x: Vec3, v: Vec3, y: Vec3, w: Vec3, rho: f64) -> f64 {
    let inner = |alpha: f64| -> f64 {
        let q = (x + v * rho) * alpha + (y + w * rho) * (1.0 - alpha);
        // Minimise |q + a v + b w| over a, b ≥ 0 (note the +: rays extend
        // along +v/+w from the combined base point).
        let qv = q.dot(v);
        let qw = q.dot(w);
        let vw = v.dot(w);
        let det = 1.0 - vw * vw;
        let mut best = q.norm_sq();
        if det > 1e-12 {
            let a = (-qv + vw * qw) / det;
            let b = (-qw + vw * qv) / det;
            if a >= 0.0 && b >= 0.0 {
                best = best.min((q + v * a + w * b).norm_sq());
            }
        }
        let a = (-qv).max(0.0);
        best = best.min((q + v * a).norm_sq());
        let b = (-qw).max(0.0);
        best = best.min((q + w * b).norm_sq());
        best
    };
    // Convex in α: golden-section over [0, 1].
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (inner(c), inner(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = inner(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = inner(d);
        }
    }
    fc.min(fd).min(inner(0.0)).min(inner(1.0)).sqrt()
}

/// True iff the plane through `y` orthogonal to `normal` misses the obstacle
/// inflated by `collar`: the membership test for the reconstruction domain.
pub fn lambda_rec_check(obstacle: &Obstacle, y: Vec3, normal: Vec3, collar: f64) -> bool {
    let n = normal.normalized();
    obstacle.components().iter().all(|s| plane_solid_distance(y, n, s) > collar)
}

/// Distance from the plane `{p : (p − y)·n = 0}` to a solid.
fn plane_solid_distance(y: Vec3, n: Vec3, s: &Solid) -> f64 {
    match *s {
        Solid::Ball { center, radius } => ((center - y).dot(n)).abs() - radius,
        Solid::Torus { center, axis, major_radius, minor_radius } => {
            let axis = axis.normalized();
            let (e1, e2) = axis.orthonormal_frame();
            let d0 = (center - y).dot(n);
            // Normal offsets of core-circle points oscillate as
            // d0 + R g cos(φ − φ0) with g the in-plane projection of n.
            let g = (n.dot(e1)).hypot(n.dot(e2));
            let core_min = (d0.abs() - major_radius * g).max(0.0);
            core_min - minor_radius
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_torus() -> Obstacle {
        Obstacle::new(vec![Solid::Torus {
            center: Vec3::ZERO,
            axis: Vec3::EZ,
            major_radius: 2.0,
            minor_radius: 0.5,
        }])
        .unwrap()
    }

    /// Independent linking oracle for circle-circle pairs: plain midpoint
    /// quadrature of the Gauss integral at fixed high resolution, without
    /// the adaptive loop.
    fn circle_pair_linking_oracle(a: &Circle, b: &Circle) -> f64 {
        let n = 2048;
        let mut sum = 0.0;
        for i in 0..n {
            let ta = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            let pa = a.point(ta);
            let da = a.tangent(ta) * (2.0 * std::f64::consts::PI / n as f64);
            for j in 0..n {
                let tb = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                let r = pa - b.point(tb);
                let db = b.tangent(tb) * (2.0 * std::f64::consts::PI / n as f64);
                let r2 = r.norm_sq();
                sum += da.cross(db).dot(r) / (r2 * r2.sqrt());
            }
        }
        sum / (4.0 * std::f64::consts::PI)
    }

    #[test]
    fn torus_distance_function() {
        let t = Solid::Torus {
            center: Vec3::ZERO,
            axis: Vec3::EZ,
            major_radius: 2.0,
            minor_radius: 0.5,
        };
        // On the core circle: inside by the full tube radius.
        assert!((t.distance(Vec3::new(2.0, 0.0, 0.0)) + 0.5).abs() < 1e-14);
        // Center of the hole.
        assert!((t.distance(Vec3::ZERO) - 1.5).abs() < 1e-14);
        // On the axis above: distance to circle = hypot(2, 3) minus tube.
        let d = t.distance(Vec3::new(0.0, 0.0, 3.0));
        assert!((d - ((2.0f64).hypot(3.0) - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn hole_circle_links_core_once() {
        // Classic reference configuration: the dual circle must link the
        // core circle exactly once (up to orientation sign, fixed = +1 here).
        let obstacle = standard_torus();
        let core = &obstacle.handle_curves()[0].circle;
        let dual = &obstacle.dual_curves()[0].circle;
        let lk = circle_pair_linking_oracle(dual, core);
        assert!((lk - 1.0).abs() < 1e-3, "dual-core linking {lk}");
        // And the dual circle stays clear of the solid.
        let mut min_dist: f64 = f64::INFINITY;
        for i in 0..256 {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 256.0;
            min_dist = min_dist.min(obstacle.distance_to_point(dual.point(th)));
        }
        assert!(min_dist > 0.5, "dual circle too close to torus: {min_dist}");
    }

    #[test]
    fn classify_line_through_hole_and_outside() {
        let obstacle = standard_torus();
        // Through the hole, parallel to the axis.
        let h = classify_line(&obstacle, Vec3::new(0.1, 0.0, 0.0), Vec3::EZ).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].abs(), 1, "axis-parallel line through the hole must link once");
        // Far outside.
        let h0 = classify_line(&obstacle, Vec3::new(10.0, 0.0, 0.0), Vec3::EZ).unwrap();
        assert_eq!(h0, vec![0]);
        // Balls only: empty label.
        let balls =
            Obstacle::new(vec![Solid::Ball { center: Vec3::ZERO, radius: 1.0 }]).unwrap();
        let hb = classify_line(&balls, Vec3::new(3.0, 0.0, 0.0), Vec3::EZ).unwrap();
        assert!(hb.is_empty());
    }

    #[test]
    fn classify_line_sign_matches_direction_reversal() {
        let obstacle = standard_torus();
        let up = classify_line(&obstacle, Vec3::new(0.3, -0.2, 0.0), Vec3::EZ).unwrap();
        let down = classify_line(&obstacle, Vec3::new(0.3, -0.2, 0.0), -Vec3::EZ).unwrap();
        assert_eq!(up[0], -down[0], "reversing the line flips the winding sign");
    }

    #[test]
    fn classify_rejects_intersecting_line() {
        let obstacle = standard_torus();
        // A line through the tube itself.
        let err = classify_line(&obstacle, Vec3::new(2.0, 0.0, 0.0), Vec3::EZ).unwrap_err();
        assert!(matches!(err, GeometryError::LineIntersectsObstacle { .. }));
    }

    #[test]
    fn closure_curve_has_expected_total_length() {
        // Line through the origin: chord is a diameter, arc a half circle.
        let obstacle = Obstacle::empty();
        let line = LineQuery::new(Vec3::ZERO, Vec3::EX);
        let c = closure_curve(&obstacle, &line, 5.0, ArcChoice::Short).unwrap();
        let expect = 10.0 + 5.0 * std::f64::consts::PI;
        assert!(
            (c.total_length() - expect).abs() < 1e-6,
            "length {} vs {expect}",
            c.total_length()
        );
    }

    #[test]
    fn closure_label_independent_of_radius_and_arc() {
        let obstacle = standard_torus();
        let core = &obstacle.handle_curves()[0].circle;
        let line = LineQuery::new(Vec3::new(0.2, 0.1, 0.0), Vec3::EZ);
        let mut labels = Vec::new();
        for radius in [6.0, 12.0, 30.0] {
            for arc in [ArcChoice::Short, ArcChoice::Long] {
                let c = closure_curve(&obstacle, &line, radius, arc).unwrap();
                labels.push(linking_number(&c, core).unwrap());
            }
        }
        assert!(labels.windows(2).all(|w| w[0] == w[1]), "labels {labels:?}");
    }

    #[test]
    fn closure_radius_too_small_is_rejected() {
        let obstacle = standard_torus();
        let line = LineQuery::new(Vec3::new(0.2, 0.1, 0.0), Vec3::EZ);
        let err = closure_curve(&obstacle, &line, 2.0, ArcChoice::Short).unwrap_err();
        assert!(matches!(err, GeometryError::RadiusTooSmall { .. }));
    }

    #[test]
    fn gamma_curve_links_by_class_difference() {
        let obstacle = standard_torus();
        let core = &obstacle.handle_curves()[0].circle;
        // Class (1) line through the hole and class (0) line far outside,
        // both along ẑ; bases in the z = 0 plane, chords of half-length 40.
        let gamma = gamma_curve(
            &obstacle,
            Vec3::new(0.2, 0.0, 0.0),
            Vec3::EZ,
            Vec3::new(9.0, 0.0, 0.0),
            Vec3::EZ,
            40.0,
        )
        .unwrap();
        let lk = linking_number(&gamma, core).unwrap();
        assert_eq!(lk.abs(), 1, "class (1) vs class (0) loop must link once, got {lk}");

        // Two class-(0) lines: contractible loop.
        let gamma0 = gamma_curve(
            &obstacle,
            Vec3::new(9.0, 0.0, 0.0),
            Vec3::EZ,
            Vec3::new(12.0, 0.0, 0.0),
            Vec3::EZ,
            40.0,
        )
        .unwrap();
        assert_eq!(linking_number(&gamma0, core).unwrap(), 0);

        // Reversing the roles of the two lines negates the label.
        let gamma_rev = gamma_curve(
            &obstacle,
            Vec3::new(9.0, 0.0, 0.0),
            Vec3::EZ,
            Vec3::new(0.2, 0.0, 0.0),
            Vec3::EZ,
            40.0,
        )
        .unwrap();
        assert_eq!(linking_number(&gamma_rev, core).unwrap(), -lk);
    }

    #[test]
    fn gamma_curve_rejects_short_chords() {
        // With ρ too small the bridge hull passes straight through B(0; r).
        let obstacle = standard_torus();
        let err = gamma_curve(
            &obstacle,
            Vec3::new(0.2, 0.0, 0.0),
            Vec3::EZ,
            Vec3::new(9.0, 0.0, 0.0),
            Vec3::EZ,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::ConvexHullViolation { .. }));
    }

    #[test]
    fn lambda_rec_check_cases() {
        let obstacle = standard_torus();
        // Far plane, normal along x̂: misses easily.
        assert!(lambda_rec_check(&obstacle, Vec3::new(30.0, 0.0, 0.0), Vec3::EX, 0.5));
        // Plane through the torus midplane: blocked.
        assert!(!lambda_rec_check(&obstacle, Vec3::ZERO, Vec3::EZ, 0.5));
        // Plane through the hole center orthogonal to x̂ slices the tube.
        assert!(!lambda_rec_check(&obstacle, Vec3::ZERO, Vec3::EX, 0.5));
        // Empty obstacle: always true.
        assert!(lambda_rec_check(&Obstacle::empty(), Vec3::ZERO, Vec3::EZ, 0.5));
    }

    #[test]
    fn class_stable_under_in_class_perturbations() {
        use rand::{Rng, SeedableRng};
        let obstacle = standard_torus();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let base = Vec3::new(0.4, -0.3, 0.0);
        let reference = classify_line(&obstacle, base, Vec3::EZ).unwrap();
        for _ in 0..20 {
            // Translate along the direction and jitter transversally without
            // leaving the hole region.
            let along = rng.gen_range(-5.0..5.0);
            let dx = rng.gen_range(-0.2..0.2);
            let dy = rng.gen_range(-0.2..0.2);
            let b = base + Vec3::EZ * along + Vec3::new(dx, dy, 0.0);
            let h = classify_line(&obstacle, b, Vec3::EZ).unwrap();
            assert_eq!(h, reference);
        }
    }

    #[test]
    fn obstacle_validation_errors() {
        let bad_torus = Obstacle::new(vec![Solid::Torus {
            center: Vec3::ZERO,
            axis: Vec3::EZ,
            major_radius: 0.5,
            minor_radius: 2.0,
        }]);
        assert!(matches!(bad_torus, Err(GeometryError::InvalidSolid { .. })));

        let overlapping = Obstacle::new(vec![
            Solid::Ball { center: Vec3::ZERO, radius: 1.0 },
            Solid::Ball { center: Vec3::new(1.5, 0.0, 0.0), radius: 1.0 },
        ]);
        assert!(matches!(overlapping, Err(GeometryError::OverlappingComponents { .. })));
    }
}
