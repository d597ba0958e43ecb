//! Scalar kernels h, f, g, f~ and the profile functions F, G, H, H1, F~
//! together with the integrals I_F, I_G, I_H over (-1, 1).
//!
//! All kernels are smooth on [0, inf) and decay faster than any exponential.
//! Closed forms used throughout:
//!   h(x)  = e^{-x^2/4} / (2 sqrt(pi))
//!   g(x)  = -erfc(x/2) / 2          (antiderivative of h with g(0) = -1/2)
//!   f(x)  = 2 h(x) + x g(x)
//!   f~(x) = -(6 - x^2) h(x) / 48    (equals -h'''(x)/(6x), removable at 0)

use crate::numerics::{self, adaptive_quad, NumericsError, QuadResult};
use thiserror::Error;

pub const SQRT_PI: f64 = 1.772453850905516;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("h derivative order must be 1..=4, got {0}")]
    BadDerivativeOrder(u8),
    #[error("profile argument must satisfy |x| < 1, got {0}")]
    OutOfDomain(f64),
    #[error("scale parameter a must be positive, got {0}")]
    BadScale(f64),
    #[error(transparent)]
    Quadrature(#[from] NumericsError),
}

/// Identifies one of the scalar kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelId {
    H,
    F,
    G,
    Ftilde,
    /// k-th derivative of h, k = 1..=4.
    HDeriv(u8),
}

/// Identifies one of the profile functions on (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileId {
    F,
    G,
    H,
    H1,
    Ftilde,
}

/// Which representation of I_F / I_G / I_H to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralForm {
    /// Integral over x in (-1, 1), endpoint singularity removed by u = sqrt(1-x).
    Original,
    /// Substituted integral over y in (0, inf), truncated where the integrand
    /// falls below 1e-16 of scale.
    Substituted,
}

#[inline]
pub fn kernel_h(x: f64) -> f64 {
    (-0.25 * x * x).exp() / (2.0 * SQRT_PI)
}

/// k-th derivative of h; the polynomial factors follow from p_{k+1} = p_k' - (x/2) p_k.
#[inline]
pub fn kernel_h_deriv(k: u8, x: f64) -> f64 {
    let h = kernel_h(x);
    match k {
        0 => h,
        1 => -0.5 * x * h,
        2 => (0.25 * x * x - 0.5) * h,
        3 => (0.75 * x - 0.125 * x * x * x) * h,
        4 => {
            let x2 = x * x;
            (0.75 - 0.75 * x2 + 0.0625 * x2 * x2) * h
        }
        _ => unreachable!("derivative order checked by caller"),
    }
}

#[inline]
pub fn kernel_g(x: f64) -> f64 {
    -0.5 * numerics::erfc(0.5 * x)
}

#[inline]
pub fn kernel_f(x: f64) -> f64 {
    2.0 * kernel_h(x) + x * kernel_g(x)
}

#[inline]
pub fn kernel_ftilde(x: f64) -> f64 {
    // -h'''(x)/(6x) with the x -> 0 limit -h''''(0)/6 built in
    -(6.0 - x * x) * kernel_h(x) / 48.0
}

/// Evaluate a scalar kernel at x >= 0.
pub fn eval_kernel(id: KernelId, x: f64) -> Result<f64, KernelError> {
    if !(x >= 0.0) {
        return Err(KernelError::NegativeArgument(x));
    }
    Ok(match id {
        KernelId::H => kernel_h(x),
        KernelId::F => kernel_f(x),
        KernelId::G => kernel_g(x),
        KernelId::Ftilde => kernel_ftilde(x),
        KernelId::HDeriv(k) => {
            if !(1..=4).contains(&k) {
                return Err(KernelError::BadDerivativeOrder(k));
            }
            kernel_h_deriv(k, x)
        }
    })
}

/// Profile value from the exact factors 1 - x and 1 + x.
///
/// Riemann sums call this with omx = (n-k)/n, opx = (n+k)/n so that the
/// argument (1/sqrt(a)) sqrt((1-x)/(1+x)) never loses precision near x = 1.
/// At opx = 0 every profile tends to 0 (super-exponential kernel decay wins).
pub fn profile_from_parts(id: ProfileId, a: f64, omx: f64, opx: f64) -> f64 {
    if opx == 0.0 {
        return 0.0;
    }
    if omx == 0.0 {
        // finite limits exist only for F and G; callers guard the rest
        return match id {
            ProfileId::F => 0.0,
            ProfileId::G => -0.5,
            _ => f64::INFINITY,
        };
    }
    let u = (omx / opx).sqrt() / a.sqrt();
    match id {
        ProfileId::F => (a * omx * opx).sqrt() * kernel_f(u),
        ProfileId::G => kernel_g(u),
        ProfileId::H => kernel_h(u) / (a * omx * opx).sqrt(),
        ProfileId::H1 => kernel_h_deriv(1, u) / (a * omx * opx),
        ProfileId::Ftilde => kernel_ftilde(u) / (a * omx * opx).sqrt(),
    }
}

/// Evaluate a profile at x in (-1, 1); F and G extend continuously to x = 1.
pub fn eval_profile(id: ProfileId, a: f64, x: f64) -> Result<f64, KernelError> {
    if !(a > 0.0) {
        return Err(KernelError::BadScale(a));
    }
    let in_domain = match id {
        ProfileId::F | ProfileId::G => x.abs() <= 1.0,
        _ => x.abs() < 1.0,
    };
    if !in_domain {
        return Err(KernelError::OutOfDomain(x));
    }
    Ok(profile_from_parts(id, a, 1.0 - x, 1.0 + x))
}

/// Integral of a profile over (-1, 1) in the requested form.
///
/// The original form integrates [-1, 0] directly and substitutes u = sqrt(1-x)
/// on [0, 1], which removes the (1-x)^{±1/2} endpoint behavior of H and F~.
pub fn integral_profile(
    id: ProfileId,
    a: f64,
    form: IntegralForm,
    tol: f64,
) -> Result<QuadResult, KernelError> {
    if !(a > 0.0) {
        return Err(KernelError::BadScale(a));
    }
    match form {
        IntegralForm::Original => {
            let left = adaptive_quad(
                |x| profile_from_parts(id, a, 1.0 - x, 1.0 + x),
                -1.0,
                0.0,
                0.5 * tol,
            )?;
            let right = adaptive_quad(
                |u| 2.0 * u * profile_from_parts(id, a, u * u, 2.0 - u * u),
                0.0,
                1.0,
                0.5 * tol,
            )?;
            Ok(QuadResult {
                value: left.value + right.value,
                abs_err: left.abs_err + right.abs_err,
                truncation: None,
            })
        }
        IntegralForm::Substituted => {
            let integrand: Box<dyn Fn(f64) -> f64> = match id {
                ProfileId::H => Box::new(move |y: f64| 2.0 * kernel_h(y) / (1.0 + a * y * y)),
                ProfileId::G => Box::new(move |y: f64| {
                    let d = 1.0 + a * y * y;
                    4.0 * a * y * kernel_g(y) / (d * d)
                }),
                ProfileId::F => Box::new(move |y: f64| {
                    let d = 1.0 + a * y * y;
                    8.0 * a * a * y * y * kernel_f(y) / (d * d * d)
                }),
                ProfileId::H1 | ProfileId::Ftilde => {
                    return Err(KernelError::OutOfDomain(f64::NAN));
                }
            };
            // kernels decay like e^{-y^2/4}: by y = 20 the integrand is below
            // 1e-16 of its scale for every a > 0
            let y_max = 20.0;
            let tail_bound = numerics::erfc(0.5 * y_max);
            let q = adaptive_quad(|y| integrand(y), 0.0, y_max, tol)?;
            Ok(QuadResult {
                value: q.value,
                abs_err: q.abs_err,
                truncation: Some(tail_bound),
            })
        }
    }
}

/// I_F, I_G or I_H (spec surface; use `integral_profile` for F~ internally).
pub fn integral_i(
    id: ProfileId,
    a: f64,
    form: IntegralForm,
    tol: f64,
) -> Result<QuadResult, KernelError> {
    match id {
        ProfileId::F | ProfileId::G | ProfileId::H => integral_profile(id, a, form, tol),
        _ => Err(KernelError::OutOfDomain(f64::NAN)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FROZEN_H0: f64 = 0.28209479177387814; // 1/(2 sqrt(pi))
    const FROZEN_H1: f64 = 0.21969564473386120;
    const FROZEN_F1: f64 = 0.19964122837424567; // matches the defining integral
    const FROZEN_FT0: f64 = -0.035261848971734768;
    const FROZEN_IH_1: f64 = 0.5456413607650470;
    const FROZEN_IG_1: f64 = -0.4543586392349530;
    const FROZEN_IF_1: f64 = 0.31846204114757056;

    #[test]
    fn kernel_point_values() {
        assert!((eval_kernel(KernelId::H, 0.0).unwrap() - FROZEN_H0).abs() < 1e-15);
        assert_eq!(eval_kernel(KernelId::G, 0.0).unwrap(), -0.5);
        assert!((eval_kernel(KernelId::HDeriv(2), 0.0).unwrap() + 1.0 / (4.0 * SQRT_PI)).abs() < 1e-16);
        assert_eq!(eval_kernel(KernelId::HDeriv(1), 0.0).unwrap(), 0.0);
        assert!((eval_kernel(KernelId::HDeriv(4), 0.0).unwrap() - 3.0 / (8.0 * SQRT_PI)).abs() < 1e-16);
        assert!((kernel_h(1.0) - FROZEN_H1).abs() < 1e-15);
        assert!((eval_kernel(KernelId::Ftilde, 0.0).unwrap() - FROZEN_FT0).abs() < 1e-15);
    }

    #[test]
    fn kernel_domain_errors() {
        assert!(eval_kernel(KernelId::H, -0.5).is_err());
        assert!(eval_kernel(KernelId::HDeriv(5), 1.0).is_err());
    }

    /// The closed forms for f and g are derived, so f must reproduce its
    /// defining integral 2x \int_x^inf y^{-2} h(y) dy.
    #[test]
    fn f_matches_defining_integral() {
        for &x in &[0.25, 0.5, 1.0, 2.0, 4.0, 7.0] {
            let oracle = 2.0
                * x
                * adaptive_quad(|y| kernel_h(y) / (y * y), x, 30.0, 1e-14)
                    .unwrap()
                    .value;
            let closed = kernel_f(x);
            assert!(
                (oracle - closed).abs() <= 1e-12,
                "x={x}: {oracle} vs {closed}"
            );
        }
        assert!((kernel_f(1.0) - FROZEN_F1).abs() < 1e-13);
    }

    #[test]
    fn identity_suite() {
        // 64 samples of x in [0, 8]
        for j in 0..64 {
            let x = 8.0 * (j as f64) / 63.0;
            let d = 1e-5;
            if x >= d {
                let gp = (kernel_g(x + d) - kernel_g(x - d)) / (2.0 * d);
                assert!((gp - kernel_h(x)).abs() <= 1e-9, "g' at {x}: {gp}");
            }
            let df = 1e-4;
            if x >= df {
                let fpp = (kernel_f(x + df) - 2.0 * kernel_f(x) + kernel_f(x - df)) / (df * df);
                assert!((fpp - kernel_h(x)).abs() <= 1e-6, "f'' at {x}: {fpp}");
            }
            let id = 2.0 * kernel_h(x) + x * kernel_g(x) - kernel_f(x);
            assert!(id.abs() <= 1e-12);
        }
    }

    #[test]
    fn decay_beyond_12() {
        for &x in &[12.0, 14.0, 20.0] {
            assert!(kernel_h(x).abs() <= 1e-12);
            assert!(kernel_f(x).abs() <= 1e-12);
            assert!(kernel_g(x).abs() <= 1e-12);
            assert!(kernel_ftilde(x).abs() <= 1e-12);
            for k in 1..=4 {
                assert!(kernel_h_deriv(k, x).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn profile_endpoints_and_values() {
        assert_eq!(eval_profile(ProfileId::F, 2.0, 1.0).unwrap(), 0.0);
        assert_eq!(eval_profile(ProfileId::G, 2.0, 1.0).unwrap(), -0.5);
        let g_near = eval_profile(ProfileId::G, 0.7, 1.0 - 1e-12).unwrap();
        assert!((g_near + 0.5).abs() < 1e-6);
        // H(1, 0) = h(1)
        let h10 = eval_profile(ProfileId::H, 1.0, 0.0).unwrap();
        assert!((h10 - FROZEN_H1).abs() < 1e-15);
        assert!(eval_profile(ProfileId::H, 1.0, 1.0).is_err());
        assert!(eval_profile(ProfileId::F, 1.0, 1.5).is_err());
        assert!(eval_profile(ProfileId::H, 0.0, 0.5).is_err());
    }

    #[test]
    fn integral_identities_at_one() {
        let tol = 1e-12;
        let ih = integral_i(ProfileId::H, 1.0, IntegralForm::Substituted, tol).unwrap();
        let ig = integral_i(ProfileId::G, 1.0, IntegralForm::Substituted, tol).unwrap();
        let if_ = integral_i(ProfileId::F, 1.0, IntegralForm::Substituted, tol).unwrap();
        assert!((ih.value - FROZEN_IH_1).abs() < 1e-11);
        assert!((ig.value - FROZEN_IG_1).abs() < 1e-11);
        assert!((if_.value - FROZEN_IF_1).abs() < 1e-11);
        let ih_orig = integral_i(ProfileId::H, 1.0, IntegralForm::Original, tol).unwrap();
        assert!(
            (ih_orig.value - ih.value).abs() <= 1e-10,
            "forms disagree: {} vs {}",
            ih_orig.value,
            ih.value
        );
    }

    #[test]
    fn ih_limits_and_monotone() {
        let tol = 1e-11;
        let mut prev = f64::INFINITY;
        for &a in &[1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0, 1e4] {
            let v = integral_i(ProfileId::H, a, IntegralForm::Substituted, tol)
                .unwrap()
                .value;
            assert!(v < prev, "I_H not strictly decreasing at a={a}");
            prev = v;
        }
        let lo = integral_i(ProfileId::H, 1e-4, IntegralForm::Substituted, tol)
            .unwrap()
            .value;
        let hi = integral_i(ProfileId::H, 1e4, IntegralForm::Substituted, tol)
            .unwrap()
            .value;
        assert!(lo >= 0.99, "I_H(1e-4) = {lo}");
        assert!(hi <= 0.02, "I_H(1e4) = {hi}");
    }
}
