//! Discrete Green function y_n(t) of the lattice heat equation with a unit
//! source at node 0, evaluated by two independent methods:
//!
//! * `eval_green`: trapezoidal quadrature of the Fourier integral, with
//!   time derivatives obtained by differentiating under the integral and
//!   gradients from paired evaluations sharing quadrature nodes;
//! * `eval_green_bessel` / `GreenWorkspace`: exponentially scaled modified
//!   Bessel functions via Miller's backward recurrence (ydot = e^{-2t} I_n(2t)),
//!   with y itself recovered from the downward recurrence for
//!   Phi_m(z) = \int_0^z e^{-s} I_m(s) ds, y_n(t) = Phi_n(2t) / 2.
//!
//! The asymptotic-remainder functions r_0, r~_1, r_1, r_2, w_0, w_1 subtract
//! the leading kernel terms from the exact values.

use crate::kernels::{kernel_ftilde, kernel_g, kernel_h, kernel_h_deriv};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GreenError {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("Fourier quadrature did not converge below {tol:e} within 2^22 points (n={n}, t={t})")]
    NotConverged { n: i64, t: f64, tol: f64 },
    #[error("remainder functions require t >= tau0 = {tau0}, got {t}")]
    BeforeReferenceTime { t: f64, tau0: f64 },
    #[error("cache i/o: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("cache header mismatch (wrong magic or version)")]
    CacheHeader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GreenMethod {
    Fourier,
    Bessel,
}

/// Value bundle at one (n, t).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GreenEval {
    pub n: i64,
    pub t: f64,
    pub y: f64,
    pub ydot: f64,
    pub yddot: f64,
    pub grad_y: f64,
    pub grad_ydot: f64,
    pub grad_yddot: f64,
    pub method: GreenMethod,
    pub quad_points: u32,
}

const MAX_POINTS: u32 = 1 << 22;

/// One trapezoid pass with M panels on [0, pi]; returns the six quantities.
fn fourier_pass(n: i64, t: f64, m: u32) -> [f64; 6] {
    let mf = m as f64;
    let nf = n as f64;
    let mut acc = [0.0f64; 6];
    for j in 0..=m {
        let theta = std::f64::consts::PI * (j as f64) / mf;
        let half = 0.5 * theta;
        let s = 4.0 * half.sin().powi(2); // 2(1 - cos theta)
        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
        let es = (-t * s).exp();
        let kernel = if s == 0.0 {
            t
        } else {
            -f64::exp_m1(-t * s) / s
        };
        let cn = (nf * theta).cos();
        let cn1 = ((nf + 1.0) * theta).cos();
        acc[0] += w * kernel * cn;
        acc[1] += w * kernel * cn1;
        acc[2] += w * es * cn;
        acc[3] += w * es * cn1;
        acc[4] += w * (-s) * es * cn;
        acc[5] += w * (-s) * es * cn1;
    }
    acc.map(|v| v / mf)
}

/// Fourier-integral evaluation; the integrand is smooth and 2 pi periodic in
/// theta so the trapezoid rule converges spectrally. The theta = 0 singularity
/// of the y kernel is removable with limit value t.
pub fn eval_green(n: i64, t: f64, tol: f64) -> Result<GreenEval, GreenError> {
    if !(t >= 0.0) {
        return Err(GreenError::NegativeTime(t));
    }
    if t == 0.0 {
        // ydot(0) is the Kronecker delta; yddot(0) its lattice Laplacian
        let delta = |k: i64| if k == 0 { 1.0 } else { 0.0 };
        let lap = |k: i64| delta(k - 1) - 2.0 * delta(k) + delta(k + 1);
        return Ok(GreenEval {
            n,
            t,
            y: 0.0,
            ydot: delta(n),
            yddot: lap(n),
            grad_y: 0.0,
            grad_ydot: delta(n + 1) - delta(n),
            grad_yddot: lap(n + 1) - lap(n),
            method: GreenMethod::Fourier,
            quad_points: 0,
        });
    }
    let m0 = 256u32
        .max(8 * n.unsigned_abs().min(1 << 20) as u32)
        .max(8 * (8.0 * t).sqrt().ceil() as u32);
    let mut m = m0.min(MAX_POINTS);
    let mut prev = fourier_pass(n, t, m);
    loop {
        if m >= MAX_POINTS {
            return Err(GreenError::NotConverged { n, t, tol });
        }
        m *= 2;
        let cur = fourier_pass(n, t, m);
        let y_scale = prev[0].abs().max(1.0);
        let ok = (cur[0] - prev[0]).abs() <= tol * y_scale
            && (cur[1] - prev[1]).abs() <= tol * y_scale
            && cur[2..]
                .iter()
                .zip(&prev[2..])
                .all(|(c, p)| (c - p).abs() <= tol);
        if ok {
            return Ok(GreenEval {
                n,
                t,
                y: cur[0],
                ydot: cur[2],
                yddot: cur[4],
                grad_y: cur[1] - cur[0],
                grad_ydot: cur[3] - cur[2],
                grad_yddot: cur[5] - cur[4],
                method: GreenMethod::Fourier,
                quad_points: m,
            });
        }
        prev = cur;
    }
}

/// Reusable buffers for the Bessel path; the simulation hot loop calls this
/// thousands of times per event.
#[derive(Debug, Default)]
pub struct GreenWorkspace {
    b: Vec<f64>,   // scaled Bessel e^{-z} I_m(z)
    phi: Vec<f64>, // Phi_m(z)
}

impl GreenWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fill `b[m] = e^{-z} I_m(z)` for m = 0..=m_need via Miller's backward
    /// recurrence normalized by e^{-z}(I_0 + 2 sum I_m) = 1.
    fn fill_scaled_iv(&mut self, z: f64, m_need: usize) -> usize {
        debug_assert!(z > 0.0);
        let m_top = m_need.max((7.0 * z.sqrt()).ceil() as usize) + 40;
        self.b.clear();
        self.b.resize(m_top + 2, 0.0);
        self.b[m_top + 1] = 0.0;
        self.b[m_top] = 1e-300;
        let mut m = m_top;
        while m >= 1 {
            let next = self.b[m + 1] + (2.0 * m as f64 / z) * self.b[m];
            self.b[m - 1] = next;
            if next > 1e250 {
                for v in self.b[m - 1..].iter_mut() {
                    *v *= 1e-250;
                }
            }
            m -= 1;
        }
        let mut sum = self.b[0];
        for v in &self.b[1..] {
            sum += 2.0 * v;
        }
        let inv = 1.0 / sum;
        for v in self.b.iter_mut() {
            *v *= inv;
        }
        m_top
    }

    /// Fill `phi[m] = Phi_m(z)` for m = 0..=m_top using the downward
    /// recurrence (m+1) Phi_m - m Phi_{m+1} = z e^{-z} (I_m + I_{m+1}),
    /// seeded with Phi_{m_top} = 0 (super-exponentially small there).
    fn fill_phi(&mut self, z: f64, m_top: usize) {
        self.phi.clear();
        self.phi.resize(m_top + 1, 0.0);
        let mut phi_next = 0.0f64;
        let mut m = m_top;
        while m >= 1 {
            let gm = z * (self.b[m] + self.b[m + 1]);
            let phi_m = (m as f64 * phi_next + gm) / (m as f64 + 1.0);
            self.phi[m] = phi_m;
            phi_next = phi_m;
            m -= 1;
        }
        self.phi[0] = z * (self.b[0] + self.b[1]);
    }

    /// Prepare y and ydot values for all orders 0..=m_need at time t > 0.
    pub fn prepare(&mut self, t: f64, m_need: usize) {
        let z = 2.0 * t;
        let m_top = self.fill_scaled_iv(z, m_need + 2);
        self.fill_phi(z, m_top);
    }

    /// y_m(t) for the prepared t (m within the prepared range).
    #[inline]
    pub fn y(&self, m: usize) -> f64 {
        0.5 * self.phi[m]
    }

    /// ydot_m(t) = e^{-2t} I_m(2t) for the prepared t.
    #[inline]
    pub fn ydot(&self, m: usize) -> f64 {
        self.b[m]
    }

    /// yddot_m(t) = b_{m-1} - 2 b_m + b_{m+1} for the prepared t.
    #[inline]
    pub fn yddot(&self, m: usize) -> f64 {
        let prev = if m == 0 { self.b[1] } else { self.b[m - 1] };
        prev - 2.0 * self.b[m] + self.b[m + 1]
    }
}

/// Full value bundle via the Bessel route.
pub fn eval_green_bessel(n: i64, t: f64) -> Result<GreenEval, GreenError> {
    if !(t >= 0.0) {
        return Err(GreenError::NegativeTime(t));
    }
    if t == 0.0 {
        let mut e = eval_green(n, 0.0, 1e-12)?;
        e.method = GreenMethod::Bessel;
        return Ok(e);
    }
    let na = n.unsigned_abs() as usize;
    let na1 = (n + 1).unsigned_abs() as usize;
    // pass length chosen from |n| alone so that y, ydot, yddot come out
    // bit-identical under n -> -n
    let mut ws = GreenWorkspace::new();
    ws.prepare(t, na + 2);
    Ok(GreenEval {
        n,
        t,
        y: ws.y(na),
        ydot: ws.ydot(na),
        yddot: ws.yddot(na),
        grad_y: ws.y(na1) - ws.y(na),
        grad_ydot: ws.ydot(na1) - ws.ydot(na),
        grad_yddot: ws.yddot(na1) - ws.yddot(na),
        method: GreenMethod::Bessel,
        quad_points: 0,
    })
}

/// ydot_n(t) = e^{-2t} I_n(2t): Miller recurrence for t > 1, the series
/// e^{-2t} t^n sum_m t^{2m} / (m! (m+n)!) for t <= 1.
pub fn eval_ydot_bessel(n: i64, t: f64) -> f64 {
    let na = n.unsigned_abs() as usize;
    if t == 0.0 {
        return if na == 0 { 1.0 } else { 0.0 };
    }
    if t <= 1.0 {
        // series of the modified Bessel function, scaled by e^{-2t}
        let mut term = 1.0f64;
        for j in 1..=na {
            term *= t / j as f64;
        }
        let mut sum = term;
        let mut m = 1usize;
        loop {
            term *= t * t / (m as f64 * (m + na) as f64);
            sum += term;
            if term < 1e-18 * sum || m > 200 {
                break;
            }
            m += 1;
        }
        return (-2.0 * t).exp() * sum;
    }
    let mut ws = GreenWorkspace::new();
    let z = 2.0 * t;
    ws.fill_scaled_iv(z, na);
    ws.b[na]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderId {
    R0,
    Rtilde1,
    R1,
    R2,
    W0,
    W1,
}

/// Difference between the exact Green quantity and its leading kernel term(s).
pub fn eval_remainder(
    id: RemainderId,
    n: u32,
    t: f64,
    tau0: f64,
    tol: f64,
) -> Result<f64, GreenError> {
    if t < tau0 {
        return Err(GreenError::BeforeReferenceTime { t, tau0 });
    }
    let e = eval_green(n as i64, t, tol)?;
    let rt = t.sqrt();
    let x = n as f64 / rt;
    Ok(match id {
        RemainderId::R0 => e.y - rt * crate::kernels::kernel_f(x),
        RemainderId::Rtilde1 => e.y - rt * crate::kernels::kernel_f(x) - kernel_ftilde(x) / rt,
        RemainderId::R1 => e.ydot - kernel_h(x) / rt,
        RemainderId::R2 => e.yddot - kernel_h_deriv(2, x) / (t * rt),
        RemainderId::W0 => e.grad_y - kernel_g(x) - kernel_h(x) / (2.0 * rt),
        RemainderId::W1 => e.grad_ydot - kernel_h_deriv(1, x) / t,
    })
}

/// Exact-key evaluation cache with insert-if-absent semantics and a versioned
/// little-endian binary dump for sweep restarts.
#[derive(Debug, Default)]
pub struct GreenCache {
    map: Mutex<HashMap<(i64, u64), GreenEval>>,
}

const CACHE_MAGIC: &[u8; 8] = b"RTLGCV01";

impl GreenCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_insert_with<F: FnOnce() -> GreenEval>(&self, n: i64, t: f64, make: F) -> GreenEval {
        let key = (n, t.to_bits());
        if let Some(hit) = self.map.lock().unwrap().get(&key) {
            return *hit;
        }
        let value = make();
        *self
            .map
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(value)
    }

    pub fn dump<W: Write>(&self, mut w: W) -> Result<(), GreenError> {
        let map = self.map.lock().unwrap();
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&(map.len() as u64).to_le_bytes())?;
        let mut keys: Vec<_> = map.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let e = &map[&key];
            w.write_all(&key.0.to_le_bytes())?;
            w.write_all(&key.1.to_le_bytes())?;
            for v in [e.y, e.ydot, e.yddot, e.grad_y, e.grad_ydot, e.grad_yddot] {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&[match e.method {
                GreenMethod::Fourier => 0u8,
                GreenMethod::Bessel => 1u8,
            }])?;
            w.write_all(&e.quad_points.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, GreenError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(GreenError::CacheHeader);
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let count = u64::from_le_bytes(buf8);
        let mut map = HashMap::with_capacity(count as usize);
        for _ in 0..count {
            r.read_exact(&mut buf8)?;
            let n = i64::from_le_bytes(buf8);
            r.read_exact(&mut buf8)?;
            let tbits = u64::from_le_bytes(buf8);
            let mut vals = [0.0f64; 6];
            for v in vals.iter_mut() {
                r.read_exact(&mut buf8)?;
                *v = f64::from_le_bytes(buf8);
            }
            let mut mb = [0u8; 1];
            r.read_exact(&mut mb)?;
            let mut qb = [0u8; 4];
            r.read_exact(&mut qb)?;
            map.insert(
                (n, tbits),
                GreenEval {
                    n,
                    t: f64::from_bits(tbits),
                    y: vals[0],
                    ydot: vals[1],
                    yddot: vals[2],
                    grad_y: vals[3],
                    grad_ydot: vals[4],
                    grad_yddot: vals[5],
                    method: if mb[0] == 0 {
                        GreenMethod::Fourier
                    } else {
                        GreenMethod::Bessel
                    },
                    quad_points: u32::from_le_bytes(qb),
                },
            );
        }
        Ok(Self {
            map: Mutex::new(map),
        })
    }
}
