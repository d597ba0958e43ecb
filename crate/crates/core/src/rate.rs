//! Propagation rate constant a: the unique root of (h1 - 2c) - h1 I_H(a) = 0,
//! certified against the two equivalent equations in I_F and I_G.

use crate::kernels::{integral_i, IntegralForm, ProfileId};
use crate::numerics::brent;
use crate::sim::Params;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RateError {
    #[error("condition h1 > 2c > 0 violated: c={c}, h1={h1}")]
    Precondition { c: f64, h1: f64 },
    #[error("bracketing failed for target I_H = {target}")]
    Bracket { target: f64 },
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RateSolution {
    pub a: f64,
    pub residual_f: f64,
    pub residual_g: f64,
    pub residual_h: f64,
    pub iterations: usize,
}

/// Solve I_H(a) = (h1 - 2c)/h1 by geometric bracket expansion and Brent.
/// I_H decreases from 1 to 0, so a bracket always exists.
pub fn solve_a(params: &Params, tol: f64) -> Result<RateSolution, RateError> {
    if !(params.h1 > 2.0 * params.c && params.c > 0.0) {
        return Err(RateError::Precondition {
            c: params.c,
            h1: params.h1,
        });
    }
    let (c, h1) = (params.c, params.h1);
    let target = (h1 - 2.0 * c) / h1;
    let quad_tol = tol * 0.1; // one decade tighter than the root tolerance
    let ih = |a: f64| -> Result<f64, RateError> {
        Ok(integral_i(ProfileId::H, a, IntegralForm::Substituted, quad_tol)?.value)
    };
    let mut lo = 1e-4;
    let mut hi = 1e4;
    let mut flo = ih(lo)? - target;
    let mut fhi = ih(hi)? - target;
    let mut guard = 0;
    while flo < 0.0 {
        lo /= 10.0;
        flo = ih(lo)? - target;
        guard += 1;
        if guard > 60 {
            return Err(RateError::Bracket { target });
        }
    }
    while fhi > 0.0 {
        hi *= 10.0;
        fhi = ih(hi)? - target;
        guard += 1;
        if guard > 60 {
            return Err(RateError::Bracket { target });
        }
    }
    let mut evals = 0usize;
    let (a, _fa, iters) = brent(
        |x| {
            evals += 1;
            integral_i(ProfileId::H, x, IntegralForm::Substituted, quad_tol)
                .map(|q| q.value - target)
                .unwrap_or(f64::NAN)
        },
        lo,
        hi,
        flo,
        fhi,
        0.0,
        0.0,
        tol,
    )?;
    let ih_a = ih(a)?;
    let ig_a = integral_i(ProfileId::G, a, IntegralForm::Substituted, quad_tol)?.value;
    let if_a = integral_i(ProfileId::F, a, IntegralForm::Substituted, quad_tol)?.value;
    Ok(RateSolution {
        a,
        residual_f: -c + (h1 - 2.0 * c) * a - h1 * if_a,
        residual_g: -2.0 * c - h1 * ig_a,
        residual_h: (h1 - 2.0 * c) - h1 * ih_a,
        iterations: iters + evals,
    })
}

/// Rate curve over an h1 grid; a must come out strictly decreasing in h1.
pub fn a_sweep(c: f64, h1_list: &[f64], tol: f64) -> Result<Vec<(f64, RateSolution)>, RateError> {
    let mut out = Vec::with_capacity(h1_list.len());
    for &h1 in h1_list {
        let params = Params::new(c, h1, 0.0, 1.0).map_err(|_| RateError::Precondition { c, h1 })?;
        out.push((h1, solve_a(&params, tol)?));
    }
    for w in out.windows(2) {
        // duplicates are allowed (deterministic repeats); strict decrease otherwise
        if w[1].0 > w[0].0 && w[1].1.a >= w[0].1.a {
            return Err(RateError::Bracket { target: w[1].0 });
        }
    }
    Ok(out)
}
