//! Sequence extrapolation and small least-squares fits.
//!
//! Three recurring needs are collected here: accelerating the limit of a
//! slowly converging sequence (tail coefficients of a potential, fluxes read
//! off expanding arcs), Richardson improvement of centred finite differences,
//! and fitting a decay exponent to log-log data with a crude confidence
//! band.

/// Outcome of [`extrapolate`].
#[derive(Debug, Clone, Copy)]
pub struct Limit {
    pub value: f64,
    /// Spread of the last accepted estimates; treat as an error bar.
    pub err: f64,
}

/// Aitken Δ² acceleration of a sequence assumed to converge geometrically.
///
/// Returns the accelerated limit once two consecutive accelerated values
/// agree within `tol`, or `None` if the sequence is exhausted first.
/// Falls back to the plain tail values when the Aitken denominator
/// degenerates (sequence already converged).
pub fn extrapolate(seq: &[f64], tol: f64) -> Option<Limit> {
    if seq.len() < 3 {
        return None;
    }
    let mut prev: Option<f64> = None;
    for w in seq.windows(3) {
        let (s0, s1, s2) = (w[0], w[1], w[2]);
        let denom = s2 - 2.0 * s1 + s0;
        let acc = if denom.abs() < 1e-300 { s2 } else { s2 - (s2 - s1) * (s2 - s1) / denom };
        if let Some(p) = prev {
            if (acc - p).abs() <= tol {
                return Some(Limit { value: acc, err: (acc - p).abs() });
            }
        }
        prev = Some(acc);
    }
    // Plain convergence without acceleration also counts.
    let n = seq.len();
    if (seq[n - 1] - seq[n - 2]).abs() <= tol && (seq[n - 2] - seq[n - 3]).abs() <= tol {
        return Some(Limit { value: seq[n - 1], err: (seq[n - 1] - seq[n - 2]).abs() });
    }
    None
}

/// One Richardson step for a quantity with leading error `O(h^2)`:
/// given estimates at steps `h` and `h/2`, returns the `O(h^4)` combination.
pub fn richardson2(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Least-squares line through `(x, y)` pairs.
///
/// Returns `(slope, intercept, slope_stderr)`. The standard error comes from
/// the usual unbiased residual variance; with fewer than three points it is
/// reported as infinite.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .sum();
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    (slope, intercept, stderr)
}

/// Fit `|f| ≈ C r^slope` on log-log axes from samples `(r_i, |f_i|)`.
///
/// Samples with `|f| = 0` are dropped (they carry no slope information and
/// would break the logarithm); returns `None` if fewer than two usable
/// samples remain — callers treat that as "decays faster than any power".
pub fn loglog_slope(rs: &[f64], fs: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = rs
        .iter()
        .zip(fs)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&r, &f)| (r.ln(), f.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, _, stderr) = linear_fit(&xs, &ys);
    Some((slope, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_accelerates_geometric_sequences() {
        // s_k = L + 0.5^k converges to 3.
        let seq: Vec<f64> = (0..12).map(|k| 3.0 + 0.5f64.powi(k)).collect();
        let lim = extrapolate(&seq, 1e-10).expect("should converge");
        assert!((lim.value - 3.0).abs() < 1e-9, "value {}", lim.value);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (m, b, se) = linear_fit(&xs, &ys);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((b + 1.0).abs() < 1e-12);
        assert!(se < 1e-10);
    }

    #[test]
    fn loglog_slope_finds_power_law() {
        let rs: Vec<f64> = (0..8).map(|k| 2.0f64.powi(k)).collect();
        let fs: Vec<f64> = rs.iter().map(|r| 7.0 * r.powf(-2.5)).collect();
        let (slope, _) = loglog_slope(&rs, &fs).unwrap();
        assert!((slope + 2.5).abs() < 1e-10);
    }
}
