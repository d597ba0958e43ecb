//! Shared numerical routines: adaptive quadrature, root bracketing, small fits.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("quadrature failed to reach tolerance {tol:e} on [{a}, {b}] (estimate {err:e})")]
    QuadStalled { a: f64, b: f64, tol: f64, err: f64 },
    #[error("no sign change on bracket [{a}, {b}] (f: {fa:e}, {fb:e})")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root iteration did not converge within {0} steps")]
    RootNotConverged(usize),
}

/// Complementary error function, |error| within 2 ulp (musl/FreeBSD lineage).
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let v = f(c - x) + f(c + x);
        kronrod += v * WGK[j];
        if j % 2 == 1 {
            gauss += v * WG[j / 2];
        }
    }
    kronrod *= h;
    gauss *= h;
    (kronrod, (kronrod - gauss).abs())
}

/// Result of an adaptive quadrature, with the error estimate and (for
/// truncated infinite ranges) the bound on the discarded tail.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub truncation: Option<f64>,
}

/// Adaptive Gauss-Kronrod bisection with an absolute tolerance.
pub fn adaptive_quad<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult, NumericsError> {
    // (a, b, estimate, err), worst interval split first
    let (v0, e0) = gk15(&f, a, b);
    let mut segs = vec![(a, b, v0, e0)];
    let max_segs = 4000;
    loop {
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= tol {
            return Ok(QuadResult {
                value: segs.iter().map(|s| s.2).sum(),
                abs_err: err,
                truncation: None,
            });
        }
        if segs.len() >= max_segs {
            return Err(NumericsError::QuadStalled { a, b, tol, err });
        }
        let (i, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (sa, sb, _, se) = segs.swap_remove(i);
        let m = 0.5 * (sa + sb);
        if m <= sa || m >= sb {
            // interval cannot be split further in f64
            return Err(NumericsError::QuadStalled { a, b, tol, err: se });
        }
        let left = gk15(&f, sa, m);
        let right = gk15(&f, m, sb);
        segs.push((sa, m, left.0, left.1));
        segs.push((m, sb, right.0, right.1));
    }
}

/// Brent's method on a bracketing interval; `fa * fb <= 0` is required.
/// Stops when the bracket is below `xtol_abs + xtol_rel * |x|` or |f| <= ftol.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol_rel: f64,
    xtol_abs: f64,
    ftol: f64,
) -> Result<(f64, f64, usize), NumericsError> {
    if fa == 0.0 {
        return Ok((a, 0.0, 0));
    }
    if fb == 0.0 {
        return Ok((b, 0.0, 0));
    }
    if fa * fb > 0.0 {
        return Err(NumericsError::NoBracket { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    let max_iter = 200;
    for it in 0..max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (xtol_abs + xtol_rel * b.abs());
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= ftol {
            return Ok((b, fb, it));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0));
                q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
    }
    Err(NumericsError::RootNotConverged(max_iter))
}

/// Chebyshev points of the first kind mapped to [a, b], ordered increasing.
pub fn chebyshev_points(a: f64, b: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let theta = std::f64::consts::PI * (2.0 * j as f64 + 1.0) / (2.0 * m as f64);
        out.push(0.5 * (a + b) + 0.5 * (b - a) * theta.cos());
    }
    out.reverse();
    out
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    sxy / sxx
}

/// Least squares of y ≈ c0 + c1 * u for a single regressor u.
pub fn ls_affine(u: &[f64], y: &[f64]) -> (f64, f64) {
    let slope = ls_slope(u, y);
    let n = u.len() as f64;
    let c0 = y.iter().sum::<f64>() / n - slope * u.iter().sum::<f64>() / n;
    (c0, slope)
}
