//! Post-processing of switch histories: the q_n = t_n - a n^2 series, the
//! gradient asymptotics toward -3 h1/4, the C_n values, the fixed-point
//! candidate solver for q_{n+1}, and rattling statistics for h2 > 0 runs.

use crate::green::{eval_green, GreenMethod, GreenWorkspace};
use crate::numerics::ls_slope;
use crate::sim::{Params, SwitchHistory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("history is empty or lacks node {0}")]
    MissingNode(u32),
    #[error("history must contain at least {0} records")]
    TooShort(usize),
    #[error("q - F(q) has no sign change on [-{0}, {0}]; E too small or pre-asymptotic n")]
    NoSignChange(f64),
    #[error(transparent)]
    Green(#[from] crate::green::GreenError),
}

/// The deviation series q_n = t_n - a n^2 together with q_n / sqrt(n).
#[derive(Debug, Clone, serde::Serialize)]
pub struct QnSeries {
    pub a: f64,
    pub entries: Vec<(u32, f64, f64)>,
}

impl QnSeries {
    /// max |q_n| / sqrt(n) over n in [lo, hi] (the fitted envelope constant).
    pub fn fitted_envelope(&self, lo: u32, hi: u32) -> f64 {
        self.entries
            .iter()
            .filter(|(n, _, _)| *n >= lo.max(1) && *n <= hi)
            .map(|(_, _, r)| r.abs())
            .fold(0.0, f64::max)
    }
}

pub fn extract_qn(hist: &SwitchHistory, a: f64) -> Result<QnSeries, AnalysisError> {
    if hist.records.is_empty() {
        return Err(AnalysisError::TooShort(1));
    }
    let entries = hist
        .records
        .iter()
        .map(|r| {
            let q = r.t - a * (r.n as f64) * (r.n as f64);
            let rq = if r.n == 0 { 0.0 } else { q / (r.n as f64).sqrt() };
            (r.n, q, rq)
        })
        .collect();
    Ok(QnSeries { a, entries })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GradReport {
    /// max over the window of |grad u_n(t_n) + 3 h1/4| sqrt(n)
    pub a_grad_fit: f64,
    pub residuals: Vec<(u32, f64)>,
    /// least-squares slope of log |residual| against log n over the window
    pub log_slope: f64,
    /// whether grad u_n(t_n) <= -3 h1/8 for every window n
    pub grad_below_strict: bool,
}

pub fn grad_asymptotics(
    hist: &SwitchHistory,
    params: &Params,
    window_lo: u32,
) -> Result<GradReport, AnalysisError> {
    if hist.records.len() < 20 {
        return Err(AnalysisError::TooShort(20));
    }
    let mut residuals = Vec::new();
    let mut a_fit = 0.0f64;
    let mut strict = true;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &hist.records {
        if r.n == 0 {
            continue;
        }
        let resid = (r.grad + 0.75 * params.h1) * (r.n as f64).sqrt();
        residuals.push((r.n, resid));
        if r.n >= window_lo {
            a_fit = a_fit.max(resid.abs());
            if r.grad > -3.0 * params.h1 / 8.0 {
                strict = false;
            }
            if resid.abs() > 0.0 {
                xs.push((r.n as f64).ln());
                ys.push(resid.abs().ln());
            }
        }
    }
    let log_slope = if xs.len() >= 2 { ls_slope(&xs, &ys) } else { 0.0 };
    Ok(GradReport {
        a_grad_fit: a_fit,
        residuals,
        log_slope,
        grad_below_strict: strict,
    })
}

/// C_n = -c n^2 + (h1 - 2c) a n^2 - h1 sum_{|k| <= n-1} y_{n-k}(a(n^2 - k^2)).
pub fn compute_cn(
    n: u32,
    a: f64,
    params: &Params,
    method: GreenMethod,
) -> Result<f64, AnalysisError> {
    assert!(n >= 1);
    let nf = n as f64;
    let mut sum = 0.0f64;
    let mut ws = GreenWorkspace::new();
    for k in 0..n {
        let t = a * (nf * nf - (k as f64) * (k as f64));
        match method {
            GreenMethod::Bessel => {
                let hi = (n + k) as usize;
                ws.prepare(t, hi);
                sum += ws.y((n - k) as usize);
                if k > 0 {
                    sum += ws.y(hi);
                }
            }
            GreenMethod::Fourier => {
                sum += eval_green((n - k) as i64, t, 1e-12)?.y;
                if k > 0 {
                    sum += eval_green((n + k) as i64, t, 1e-12)?.y;
                }
            }
        }
    }
    Ok(-params.c * nf * nf + (params.h1 - 2.0 * params.c) * a * nf * nf - params.h1 * sum)
}

/// State of the fixed-point candidate recursion: accepted q_0..q_n.
#[derive(Debug, Clone)]
pub struct CandidateState {
    pub n: u32,
    pub q: Vec<f64>,
}

impl CandidateState {
    pub fn new(q: Vec<f64>) -> Self {
        assert!(!q.is_empty());
        Self {
            n: (q.len() - 1) as u32,
            q,
        }
    }

    /// Seed from a simulated history up to node n inclusive.
    pub fn from_history(hist: &SwitchHistory, a: f64, n: u32) -> Result<Self, AnalysisError> {
        let mut q = Vec::with_capacity(n as usize + 1);
        for k in 0..=n {
            let r = hist.record_for(k).ok_or(AnalysisError::MissingNode(k))?;
            q.push(r.t - a * (k as f64) * (k as f64));
        }
        Ok(Self::new(q))
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CandidateStep {
    pub q_next: f64,
    pub c_next: f64,
    pub d_next: f64,
    pub j_min: f64,
    pub iterations: u32,
}

// below this gap the difference quotient loses to cancellation; use the
// Taylor form (1/2) yddot * delta instead
const QUOTIENT_MIN_GAP: f64 = 1e-6;

struct JEvaluator {
    m: u32, // target node n+1
    t_base: Vec<f64>,
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
    alpha: Vec<f64>,
    yddot_pair: Vec<f64>,
    ws: GreenWorkspace,
}

impl JEvaluator {
    fn new(m: u32, a: f64) -> Self {
        let mf = m as f64;
        let mut ws = GreenWorkspace::new();
        let count = m as usize;
        let mut t_base = Vec::with_capacity(count);
        let mut y_lo = Vec::with_capacity(count);
        let mut y_hi = Vec::with_capacity(count);
        let mut alpha = Vec::with_capacity(count);
        let mut yddot_pair = Vec::with_capacity(count);
        for k in 0..m {
            let kf = k as f64;
            let t = a * (mf * mf - kf * kf);
            let lo = (m - k) as usize;
            let hi = (m + k) as usize;
            ws.prepare(t, hi);
            t_base.push(t);
            y_lo.push(ws.y(lo));
            alpha.push(ws.ydot(lo) + if k > 0 { ws.ydot(hi) } else { 0.0 });
            yddot_pair.push(ws.yddot(lo) + if k > 0 { ws.yddot(hi) } else { 0.0 });
            y_hi.push(if k > 0 { ws.y(hi) } else { 0.0 });
        }
        Self {
            m,
            t_base,
            y_lo,
            y_hi,
            alpha,
            yddot_pair,
            ws,
        }
    }

    /// J_{m,k}(q) by the difference-quotient formula
    /// [y(T + q - q_k) - y(T)]/(q - q_k) - alpha added back to alpha,
    /// i.e. the full coefficient alpha_{m,k} + beta_{m,k} for the +-k pair.
    fn j_k(&mut self, k: u32, q: f64, q_k: f64) -> f64 {
        let delta = q - q_k;
        let i = k as usize;
        if delta.abs() <= QUOTIENT_MIN_GAP {
            return self.alpha[i] + 0.5 * self.yddot_pair[i] * delta;
        }
        let t = self.t_base[i] + delta;
        let lo = (self.m - k) as usize;
        let hi = (self.m + k) as usize;
        self.ws.prepare(t, hi);
        let mut shifted = self.ws.y(lo);
        if k > 0 {
            shifted += self.ws.y(hi);
        }
        let base = self.y_lo[i] + self.y_hi[i];
        (shifted - base) / delta
    }
}

/// One step of the candidate recursion: solve q = F(q) for q_{n+1} on
/// [-E sqrt(n+1), E sqrt(n+1)] by bisection on the residual
/// C_{n+1} + D_{n+1}(q) q + h1 sum_k J_{n+1,k}(q) q_k.
pub fn candidate_step(
    state: &CandidateState,
    e: f64,
    a: f64,
    params: &Params,
) -> Result<CandidateStep, AnalysisError> {
    let n = state.n;
    let m = n + 1;
    let mf = m as f64;
    let mut jev = JEvaluator::new(m, a);
    let c_next = {
        let mut sum = 0.0;
        for k in 0..m {
            sum += jev.y_lo[k as usize] + jev.y_hi[k as usize];
        }
        -params.c * mf * mf + (params.h1 - 2.0 * params.c) * a * mf * mf - params.h1 * sum
    };
    let h1 = params.h1;
    let mut d_last = 0.0;
    let mut j_min = f64::INFINITY;
    let residual = |q: f64, jev: &mut JEvaluator, track: bool, d_out: &mut f64, jm: &mut f64| {
        let mut j_sum = 0.0;
        let mut cross = 0.0;
        for k in 0..m {
            let jk = jev.j_k(k, q, state.q[k as usize]);
            if track {
                *jm = jm.min(jk);
            }
            j_sum += jk;
            cross += jk * state.q[k as usize];
        }
        let d = h1 - 2.0 * params.c - h1 * j_sum;
        *d_out = d;
        c_next + d * q + h1 * cross
    };
    let bound = e * mf.sqrt();
    let mut lo = -bound;
    let mut hi = bound;
    let mut f_lo = residual(lo, &mut jev, false, &mut d_last, &mut j_min);
    let f_hi = residual(hi, &mut jev, false, &mut d_last, &mut j_min);
    if f_lo == 0.0 {
        return Ok(CandidateStep {
            q_next: lo,
            c_next,
            d_next: d_last,
            j_min,
            iterations: 0,
        });
    }
    if f_lo * f_hi > 0.0 {
        return Err(AnalysisError::NoSignChange(bound));
    }
    let mut iterations = 0u32;
    while hi - lo > 1e-10 && iterations < 80 {
        let mid = 0.5 * (lo + hi);
        let f_mid = residual(mid, &mut jev, false, &mut d_last, &mut j_min);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
        iterations += 1;
    }
    let q_next = 0.5 * (lo + hi);
    // final pass records D and the minimum J at the accepted root
    j_min = f64::INFINITY;
    let _ = residual(q_next, &mut jev, true, &mut d_last, &mut j_min);
    Ok(CandidateStep {
        q_next,
        c_next,
        d_next: d_last,
        j_min,
        iterations,
    })
}

/// Margins of the three coefficient inequalities behind the rescaled map:
///   1. min_k J_{n,k}
///   2. min_k ( J_{n,k} - (1 + kappa/n) J_{n+1,k} ),  k = 0..n-1
///   3. D_n - h1 (1 + kappa/n) J_{n+1,n}
/// with J_{n,k} evaluated at q_n and J_{n+1,k} at q_{n+1}.
pub fn fixed_point_prop_margins(
    q: &[f64],
    n: u32,
    a: f64,
    params: &Params,
    kappa: f64,
) -> (f64, f64, f64) {
    assert!(q.len() as u32 >= n + 2, "need q_0..q_{{n+1}}");
    let q_n = q[n as usize];
    let q_n1 = q[(n + 1) as usize];
    let mut jev_n = JEvaluator::new(n, a);
    let mut jev_n1 = JEvaluator::new(n + 1, a);
    let factor = 1.0 + kappa / n as f64;
    let mut item1 = f64::INFINITY;
    let mut item2 = f64::INFINITY;
    let mut j_sum_n = 0.0;
    for k in 0..n {
        let jn = jev_n.j_k(k, q_n, q[k as usize]);
        let jn1 = jev_n1.j_k(k, q_n1, q[k as usize]);
        item1 = item1.min(jn);
        item2 = item2.min(jn - factor * jn1);
        j_sum_n += jn;
    }
    let d_n = params.h1 - 2.0 * params.c - params.h1 * j_sum_n;
    let j_n1_n = jev_n1.j_k(n, q_n1, q_n);
    let item3 = d_n - params.h1 * factor * j_n1_n;
    (item1, item2, item3)
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PatternStats {
    pub n1: u32,
    pub n2: u32,
    pub ratio: f64,
}

/// Counts of switched (N1) and non-switched (N2) nodes among 0..=j.
pub fn pattern_stats(hist: &SwitchHistory, j: u32) -> PatternStats {
    let switched: std::collections::BTreeSet<u32> = hist.records.iter().map(|r| r.n).collect();
    let n1 = (0..=j).filter(|n| switched.contains(n)).count() as u32;
    let n2 = j + 1 - n1;
    PatternStats {
        n1,
        n2,
        ratio: n2 as f64 / n1 as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, DEFAULT_ROOT_TOL};

    fn params_15() -> Params {
        Params::new(0.5, 1.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn qn_extraction_is_exact_subtraction() {
        let params = params_15();
        let hist = simulate(&params, 10, DEFAULT_ROOT_TOL).unwrap();
        let series = extract_qn(&hist, hist.a).unwrap();
        assert_eq!(series.entries[0], (0, 0.0, 0.0));
        for ((n, q, rq), r) in series.entries.iter().zip(&hist.records) {
            assert_eq!(*q, r.t - hist.a * (*n as f64) * (*n as f64));
            if *n > 0 {
                assert_eq!(*rq, q / (*n as f64).sqrt());
            }
        }
        assert!(series.fitted_envelope(1, 10).is_finite());
    }

    #[test]
    fn perturbed_a_drifts_linearly() {
        // t_n - (a + eps) n^2 = q_n - eps n^2: the drift of (q/sqrt n) grows
        let params = params_15();
        let hist = simulate(&params, 12, DEFAULT_ROOT_TOL).unwrap();
        let good = extract_qn(&hist, hist.a).unwrap();
        let bad = extract_qn(&hist, hist.a * 1.01).unwrap();
        let drift = |s: &QnSeries| {
            let (n1, _, r1) = s.entries[6];
            let (n2, _, r2) = s.entries[12];
            (r2 - r1) / (n2 as f64 - n1 as f64)
        };
        assert!(drift(&bad).abs() > 10.0 * drift(&good).abs());
    }

    #[test]
    fn cn_methods_agree() {
        let params = Params::new(0.5, 2.0, 0.0, 1.0).unwrap();
        let a = crate::rate::solve_a(&params, 1e-12).unwrap().a;
        for n in [2u32, 5, 12, 20] {
            let fast = compute_cn(n, a, &params, GreenMethod::Bessel).unwrap();
            let slow = compute_cn(n, a, &params, GreenMethod::Fourier).unwrap();
            assert!(
                (fast - slow).abs() <= 1e-8 * fast.abs().max(1.0),
                "C_{n}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn cn_matches_eval_u_at_formal_times() {
        // substituting t = a n^2, t_k = a k^2 into the solution formula
        let params = Params::new(0.5, 2.0, 0.0, 1.0).unwrap();
        let a = crate::rate::solve_a(&params, 1e-12).unwrap().a;
        let n = 20u32;
        let mut hist = simulate(&params, 1, DEFAULT_ROOT_TOL).unwrap();
        hist.records.clear();
        for k in 0..n {
            hist.records.push(crate::sim::SwitchRecord {
                n: k,
                t: a * (k as f64) * (k as f64),
                q: 0.0,
                grad: 0.0,
            });
        }
        let u = crate::sim::eval_u(n as i64, a * (n as f64) * (n as f64), &hist, &params);
        let cn = compute_cn(n, a, &params, GreenMethod::Bessel).unwrap();
        assert!((u - cn).abs() <= 1e-9 * cn.abs().max(1.0), "{u} vs {cn}");
    }

    #[test]
    fn candidate_step_reproduces_simulation() {
        let params = params_15();
        let hist = simulate(&params, 16, DEFAULT_ROOT_TOL).unwrap();
        let a = hist.a;
        for n in [10u32, 14] {
            let state = CandidateState::from_history(&hist, a, n).unwrap();
            let step = candidate_step(&state, 4.0, a, &params).unwrap();
            let q_sim = hist.record_for(n + 1).unwrap().q;
            assert!(
                (step.q_next - q_sim).abs() <= 1e-6 * ((n + 1) as f64).sqrt(),
                "n={n}: fixed point {} vs sim {q_sim}",
                step.q_next
            );
            assert!(step.j_min >= 0.0, "J_min = {}", step.j_min);
            assert!(step.d_next > 0.0, "D = {}", step.d_next);
            assert!((step.q_next).abs() <= 4.0 * ((n + 1) as f64).sqrt());
        }
    }

    #[test]
    fn candidate_step_rejects_tiny_interval() {
        let params = params_15();
        let hist = simulate(&params, 12, DEFAULT_ROOT_TOL).unwrap();
        let state = CandidateState::from_history(&hist, hist.a, 10).unwrap();
        // |q_11| is about 0.6 sqrt(11); an interval of 0.01 sqrt(11) cannot
        // contain the root
        assert!(matches!(
            candidate_step(&state, 0.01, hist.a, &params),
            Err(AnalysisError::NoSignChange(_))
        ));
    }

    #[test]
    fn rescaled_map_coefficient_inequalities() {
        // the three coefficient inequalities behind the rescaled fixed-point
        // map, checked on simulated q's in the certified regime (n >= n0)
        let params = Params::new(0.5, 2.0, 0.0, 1.0).unwrap();
        let table = crate::admissibility::assemble_constants(
            &params,
            None,
            &crate::admissibility::AssemblyOptions::default(),
        )
        .unwrap();
        let hist = simulate(&params, 57, DEFAULT_ROOT_TOL).unwrap();
        let q: Vec<f64> = hist.records.iter().map(|r| r.q).collect();
        for n in [52u32, 55] {
            let (i1, i2, i3) = fixed_point_prop_margins(&q, n, hist.a, &params, table.kappa);
            assert!(i1 >= 0.0, "item 1 margin {i1} at n={n}");
            assert!(i2 >= 0.0, "item 2 margin {i2} at n={n}");
            assert!(i3 >= 0.0, "item 3 margin {i3} at n={n}");
        }
    }

    #[test]
    fn pattern_stats_all_switch_when_h2_zero() {
        let params = params_15();
        let hist = simulate(&params, 10, DEFAULT_ROOT_TOL).unwrap();
        let s = pattern_stats(&hist, 10);
        assert_eq!(s.n2, 0);
        assert_eq!(s.n1, 11);
    }
}
