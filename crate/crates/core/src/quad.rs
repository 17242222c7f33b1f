//! Adaptive one-dimensional quadrature and Gauss-Legendre rules.
//!
//! All line, circulation and arc integrals in the crate funnel through
//! [`adaptive`] (a classic Gauss-Kronrod 7/15 pair with recursive
//! bisection) or [`line_integral`] (whole-line integrals with dyadically
//! extended tails). Tensor-product surface and volume quadratures build on
//! [`gauss_legendre`].
//!
//! Integrands are fallible: potential evaluation can be rejected near its
//! principal-value set, and that error must travel out of the innermost
//! loop, so every integrand returns `Result<f64, E>`.

/// Result of a quadrature: the value and an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    /// Conservative absolute error estimate.
    pub err: f64,
}

/// Failure of an adaptive quadrature.
#[derive(Debug)]
pub enum QuadError<E> {
    /// The integrand itself failed at some node.
    Eval(E),
    /// The requested tolerance was not reached within the subdivision budget.
    NonConvergent { achieved: f64, requested: f64 },
}

// Nodes and weights of the 15-point Kronrod extension of 7-point
// Gauss-Legendre on [-1, 1]. Odd-indexed entries are the embedded Gauss
// nodes; `WG` are the Gauss weights matched to those positions.
const XK: [f64; 15] = [
    -0.991455371120813,
    -0.949107912342759,
    -0.864864423359769,
    -0.741531185599394,
    -0.586087235467691,
    -0.405845151377397,
    -0.207784955007898,
    0.0,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];
const WK: [f64; 15] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];
const WG: [f64; 7] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

/// One Gauss-Kronrod 7/15 evaluation on `[a, b]`.
fn gk15<E>(f: &impl Fn(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<Quad, QuadError<E>> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut ik = 0.0;
    let mut ig = 0.0;
    for (i, (&x, &wk)) in XK.iter().zip(WK.iter()).enumerate() {
        let v = f(c + h * x).map_err(QuadError::Eval)?;
        ik += wk * v;
        if i % 2 == 1 {
            ig += WG[i / 2] * v;
        }
    }
    let value = ik * h;
    // The classic QUADPACK error model (|IK - IG| scaled) is conservative on
    // smooth integrands; plain difference with a safety power keeps panels
    // from terminating prematurely on oscillatory ones.
    let diff = ((ik - ig) * h).abs();
    let err = if diff == 0.0 { 0.0 } else { diff.min((200.0 * diff).powf(1.5)) };
    Ok(Quad { value, err })
}

/// Adaptive quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Recursive bisection with a depth limit of 48; returns
/// [`QuadError::NonConvergent`] with the achieved error estimate when the
/// tolerance cannot be met (typically an integrand far rougher than any
/// produced by the potential classes handled here).
pub fn adaptive<E>(
    f: &impl Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Quad, QuadError<E>> {
    fn go<E>(
        f: &impl Fn(f64) -> Result<f64, E>,
        a: f64,
        b: f64,
        tol: f64,
        whole: Quad,
        depth: u32,
    ) -> Result<Quad, QuadError<E>> {
        if whole.err <= tol || depth >= 48 {
            return Ok(whole);
        }
        let c = 0.5 * (a + b);
        let left = gk15(f, a, c)?;
        let right = gk15(f, c, b)?;
        if left.err + right.err >= whole.err && depth > 3 {
            // Subdivision is no longer improving the estimate (roundoff floor).
            return Ok(whole);
        }
        let l = go(f, a, c, 0.5 * tol, left, depth + 1)?;
        let r = go(f, c, b, 0.5 * tol, right, depth + 1)?;
        Ok(Quad { value: l.value + r.value, err: l.err + r.err })
    }
    if a == b {
        return Ok(Quad { value: 0.0, err: 0.0 });
    }
    // Seed with a uniform split so integrands supported on a small part of
    // the interval cannot slip between the nodes of a single wide panel
    // (where the rule would report value 0 with error estimate 0).
    let n0 = 8;
    let mut out = Quad { value: 0.0, err: 0.0 };
    for i in 0..n0 {
        let pa = a + (b - a) * i as f64 / n0 as f64;
        let pb = a + (b - a) * (i + 1) as f64 / n0 as f64;
        let whole = gk15(f, pa, pb)?;
        let part = go(f, pa, pb, tol / n0 as f64, whole, 0)?;
        out.value += part.value;
        out.err += part.err;
    }
    if out.err > tol.max(1e-14 * out.value.abs()) * 16.0 {
        return Err(QuadError::NonConvergent { achieved: out.err, requested: tol });
    }
    Ok(out)
}

/// Integral of `f` over the whole real line.
///
/// Integrates `[-r0, r0]` adaptively, then extends both tails over dyadic
/// segments `[r, 2r]` until two consecutive increments on each side stay
/// below `tol / 8`. Suitable for integrands decaying at least like
/// `r^{-(1+δ)}`, which every admissible potential class guarantees along
/// admissible lines.
pub fn line_integral<E>(
    f: &impl Fn(f64) -> Result<f64, E>,
    r0: f64,
    tol: f64,
) -> Result<Quad, QuadError<E>> {
    assert!(r0 > 0.0 && tol > 0.0);
    let core = adaptive(f, -r0, r0, 0.5 * tol)?;
    let mut value = core.value;
    let mut err = core.err;
    let seg_tol = tol / 16.0;
    for sign in [1.0f64, -1.0] {
        let mut r = r0;
        let mut calm = 0u32;
        let mut doublings = 0u32;
        while calm < 2 {
            let (a, b) = if sign > 0.0 { (r, 2.0 * r) } else { (-2.0 * r, -r) };
            let seg = adaptive(f, a, b, seg_tol)?;
            value += seg.value;
            err += seg.err;
            if seg.value.abs() < tol / 8.0 {
                calm += 1;
            } else {
                calm = 0;
            }
            r *= 2.0;
            doublings += 1;
            if doublings > 40 {
                return Err(QuadError::NonConvergent { achieved: seg.value.abs(), requested: tol });
            }
        }
        // Bound the discarded remainder by geometric continuation of the last
        // two (sub-threshold) increments.
        err += tol / 4.0;
    }
    Ok(Quad { value, err })
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; accurate to machine
/// precision for the modest `n` used by the surface and volume quadratures.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}
