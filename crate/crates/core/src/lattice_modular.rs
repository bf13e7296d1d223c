//! Lattice and modular-function numerics on the real-j fundamental set.
//!
//! Every τ handled here lies on one of three arcs carrying all real j:
//! `C1 = {ib : b >= 1}`, `C2 = {e^{iθ} : π/3 <= θ < π/2}` and
//! `C3 = {1/2 + ib : b > √3/2}`. On all of them `|q| <= e^{-π√3}`, so the
//! q-series below converge in a few dozen terms.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::curve_models::ShortCurve;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    C1,
    C2,
    C3,
}

/// A point of the fundamental set with its nome `q = e^{2πiτ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub value: Complex64,
    pub region: Region,
    pub q: Complex64,
}

impl TauPoint {
    /// `ib`, `b >= 1`.
    pub fn c1(b: f64) -> Result<Self> {
        if !(b >= 1.0) || !b.is_finite() {
            return Err(Error::DomainError(format!("C1 needs b >= 1, got {b}")));
        }
        Ok(Self::raw(c(0.0, b), Region::C1))
    }

    /// `e^{iθ}`, `π/3 <= θ < π/2`.
    pub fn c2(theta: f64) -> Result<Self> {
        if !(FRAC_PI_3 - 1e-15..FRAC_PI_2).contains(&theta) {
            return Err(Error::DomainError(format!("C2 needs π/3 <= θ < π/2, got {theta}")));
        }
        let value = if theta <= FRAC_PI_3 {
            c(0.5, 3f64.sqrt() / 2.0)
        } else {
            Complex64::from_polar(1.0, theta)
        };
        Ok(Self::raw(value, Region::C2))
    }

    /// `1/2 + ib`, `b > √3/2`.
    pub fn c3(b: f64) -> Result<Self> {
        if !(b > 3f64.sqrt() / 2.0) || !b.is_finite() {
            return Err(Error::DomainError(format!("C3 needs b > √3/2, got {b}")));
        }
        Ok(Self::raw(c(0.5, b), Region::C3))
    }

    /// The lattice point `i` (j = 1728).
    pub fn i() -> Self {
        Self::raw(c(0.0, 1.0), Region::C1)
    }

    /// The hexagonal point `e^{iπ/3}` (j = 0).
    pub fn rho() -> Self {
        Self::raw(c(0.5, 3f64.sqrt() / 2.0), Region::C2)
    }

    fn raw(value: Complex64, region: Region) -> Self {
        TauPoint {
            value,
            region,
            q: nome(value),
        }
    }

    pub fn im(&self) -> f64 {
        self.value.im
    }

    pub fn log_abs_q(&self) -> f64 {
        -TWO_PI * self.value.im
    }
}

/// `e^{2πiτ}`.
pub fn nome(tau: Complex64) -> Complex64 {
    (c(0.0, TWO_PI) * tau).exp()
}

/// `e^{z} - 1` without cancellation near 0.
fn expm1_c(z: Complex64) -> Complex64 {
    let s = (z.im / 2.0).sin();
    let cos_m1 = -2.0 * s * s;
    let e = z.re.exp_m1();
    c(e * z.im.cos() + cos_m1, z.re.exp() * z.im.sin())
}

/// `u = u1 + u2 τ` with `u1, u2` in `(-1/2, 1/2]` and `t = e^{2πiu}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalPoint {
    pub u1: f64,
    pub u2: f64,
    pub t: Complex64,
}

fn reduce_half(x: f64) -> f64 {
    let r = x - x.round();
    if r <= -0.5 {
        r + 1.0
    } else {
        r
    }
}

impl FundamentalPoint {
    pub fn new(u1: f64, u2: f64, tau: &TauPoint) -> Self {
        let (u1, u2) = (reduce_half(u1), reduce_half(u2));
        let u = c(u1, 0.0) + tau.value * u2;
        FundamentalPoint {
            u1,
            u2,
            t: (c(0.0, TWO_PI) * u).exp(),
        }
    }

    /// Reduce an arbitrary `u` into the fundamental parallelogram.
    pub fn from_u(u: Complex64, tau: &TauPoint) -> Self {
        let u2 = u.im / tau.value.im;
        let u1 = u.re - u2 * tau.value.re;
        Self::new(u1, u2, tau)
    }

    pub fn u(&self, tau: &TauPoint) -> Complex64 {
        c(self.u1, 0.0) + tau.value * self.u2
    }

    pub fn neg(&self, tau: &TauPoint) -> Self {
        Self::new(-self.u1, -self.u2, tau)
    }
}

/// Truncation control shared by every series in this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub term_tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            term_tolerance: 1e-18,
            max_terms: 100_000,
        }
    }
}

impl SeriesControl {
    pub fn with_tolerance(term_tolerance: f64) -> Self {
        SeriesControl {
            term_tolerance,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if self.term_tolerance > 0.0 && self.term_tolerance.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("term_tolerance must be positive".into()))
        }
    }
}

/// A series value with its estimated absolute truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

fn zeta_even(s: u32) -> f64 {
    // Direct sum plus Euler-Maclaurin tail.
    let s = s as f64;
    let m = 64usize;
    let mut sum = 0.0;
    for n in (1..m).rev() {
        sum += (n as f64).powf(-s);
    }
    let mf = m as f64;
    sum + mf.powf(1.0 - s) / (s - 1.0) + 0.5 * mf.powf(-s) + s * mf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * mf.powf(-s - 3.0) / 720.0
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn ln_sigma(n: u64, k: u32) -> f64 {
    // ln Σ_{d|n} d^k = k ln n + ln Σ_{d|n} d^{-k}
    let mut s = 0.0;
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            s += (d as f64).powi(-(k as i32));
            let e = n / d;
            if e != d {
                s += (e as f64).powi(-(k as i32));
            }
        }
        d += 1;
    }
    k as f64 * (n as f64).ln() + s.ln()
}

/// `G_{k2}(τ) = Σ_{ω≠0} ω^{-k2}` over `Λ = Z + Zτ`, for any τ in the upper half plane.
///
/// Summing each row `m + nτ` over `m` first gives
/// `2ζ(k2) + 2(2πi)^{k2}/(k2-1)! Σ σ_{k2-1}(n) q^n`.
pub fn eisenstein_g_raw(k2: u32, tau: Complex64, ctl: &SeriesControl) -> Result<Estimate> {
    ctl.check()?;
    if k2 < 4 || k2 % 2 != 0 {
        return Err(Error::InvalidInput(format!("weight must be even and >= 4, got {k2}")));
    }
    if tau.im <= 0.0 {
        return Err(Error::DomainError("τ must lie in the upper half plane".into()));
    }
    let q = nome(tau);
    let ln_q = q.norm().ln();
    let arg_q = q.arg();
    let ln_pref = k2 as f64 * TWO_PI.ln() - ln_factorial(k2 - 1);
    let sign = if (k2 / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let constant = 2.0 * zeta_even(k2);
    let peak = (k2 as f64 - 1.0) / -ln_q;
    let mut sum = Complex64::zero();
    for n in 1..=ctl.max_terms as u64 {
        let mag = (ln_pref + ln_sigma(n, k2 - 1) + n as f64 * ln_q).exp();
        sum += Complex64::from_polar(mag, n as f64 * arg_q);
        if (n as f64) > peak && mag < ctl.term_tolerance * (1.0 + sum.norm()) {
            let ratio = (ln_q + (k2 as f64) / n as f64).exp().min(0.5);
            let value = constant + 2.0 * sign * sum;
            let error = 2.0 * mag * ratio / (1.0 - ratio) + 4.0 * f64::EPSILON * (constant + 2.0 * sum.norm());
            return Ok(Estimate { value, error });
        }
    }
    Err(Error::NonConvergence {
        max_terms: ctl.max_terms,
    })
}

/// `G_{k2}` on the fundamental set.
pub fn eisenstein_g(k2: u32, tau: &TauPoint, ctl: &SeriesControl) -> Result<Estimate> {
    eisenstein_g_raw(k2, tau.value, ctl)
}

/// Upper bound for `Σ_{max(|m|,|n|) > R} |m + nτ|^{-k2}` when `Im τ >= √3/2`, `|Re τ| <= 1/2`.
///
/// Every lattice vector on the square shell of radius r has `|ω|^2 >= r^2/2`,
/// and the shell has 8r points. For k2 = 4 this is `16 R^{-2}`.
pub fn lattice_tail_bound(k2: u32, radius: u64) -> f64 {
    let k = k2 as f64;
    8.0 * 2f64.powf(k / 2.0) / (k - 2.0) * (radius as f64).powf(2.0 - k)
}

/// Square-truncated lattice sums: `(Σ ω^{-k2}, Σ |ω|^{-k2}, tail bound)`.
///
/// The truncation radius is the least R with tail bound below the tolerance;
/// it may not exceed `max_terms`.
pub fn lattice_sums(
    k2: u32,
    tau: &TauPoint,
    ctl: &SeriesControl,
) -> Result<(Complex64, f64, f64)> {
    ctl.check()?;
    if k2 < 4 || k2 % 2 != 0 {
        return Err(Error::InvalidInput(format!("weight must be even and >= 4, got {k2}")));
    }
    let k = k2 as f64;
    let pre = 8.0 * 2f64.powf(k / 2.0) / (k - 2.0);
    let radius = (pre / ctl.term_tolerance).powf(1.0 / (k - 2.0)).ceil();
    if !radius.is_finite() || radius > ctl.max_terms as f64 {
        return Err(Error::NonConvergence {
            max_terms: ctl.max_terms,
        });
    }
    let r = radius.max(1.0) as i64;
    let t = tau.value;
    let (mut signed, mut abs) = (Complex64::zero(), 0.0);
    // Use the symmetry ω -> -ω: sum over n > 0, and n = 0 with m > 0, then double.
    for n in 0..=r {
        let m_lo = if n == 0 { 1 } else { -r };
        let mut row = Complex64::zero();
        let mut row_abs = 0.0;
        for m in m_lo..=r {
            let w = c(m as f64, 0.0) + t * n as f64;
            let inv = w.inv();
            row += inv.powu(k2);
            row_abs += inv.norm().powi(k2 as i32);
        }
        signed += row;
        abs += row_abs;
    }
    Ok((2.0 * signed, 2.0 * abs, lattice_tail_bound(k2, r as u64)))
}

/// Coefficients of `℘(z) - 1/z^2 = Σ_{k>=1} (2k+1) G_{2k+2} z^{2k}` up to `k_max`.
fn laurent_coeffs(tau: &TauPoint, k_max: usize, ctl: &SeriesControl) -> Result<Vec<Complex64>> {
    (1..=k_max)
        .map(|k| {
            let g = eisenstein_g(2 * k as u32 + 2, tau, ctl)?;
            Ok(g.value * (2 * k + 1) as f64)
        })
        .collect()
}

/// `(℘(z), ℘'(z))` from the Laurent series, valid for `0 < |z| <= 1/2`.
///
/// Truncation uses `|G_{2k}| <= 80` on the fundamental set to bound the tail.
pub fn wp(tau: &TauPoint, z: Complex64, ctl: &SeriesControl) -> Result<(Complex64, Complex64)> {
    ctl.check()?;
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::DomainError("℘ has a pole at z = 0".into()));
    }
    if r > 0.5 + 1e-12 {
        return Err(Error::DomainError(format!("Laurent series used only for |z| <= 1/2, got {r}")));
    }
    let r2 = r * r;
    let mut k_max = 1usize;
    loop {
        // Tail Σ_{k > K} 80 (2k+1) r^{2k} <= 80 (2K+3) r^{2K+2} / (1 - r^2)^2
        let tail = 80.0 * (2 * k_max + 3) as f64 * r2.powi(k_max as i32 + 1) / (1.0 - r2).powi(2);
        if tail < ctl.term_tolerance {
            break;
        }
        k_max += 1;
        if k_max > ctl.max_terms {
            return Err(Error::NonConvergence {
                max_terms: ctl.max_terms,
            });
        }
    }
    let coeffs = laurent_coeffs(tau, k_max, ctl)?;
    let z2 = z * z;
    let mut p = Complex64::zero();
    let mut dp = Complex64::zero();
    for (i, a) in coeffs.iter().enumerate().rev() {
        let k = (i + 1) as f64;
        p = p * z2 + a;
        dp = dp * z2 + a * (2.0 * k);
    }
    let p = z2.inv() + p * z2;
    let dp = -2.0 / (z2 * z) + dp * z;
    Ok((p, dp))
}

/// Coefficients `(A_τ, B_τ) = (-15 G_4, -35 G_6)` of the curve `(℘'/2)^2 = ℘^3 + A_τ ℘ + B_τ`.
pub fn lattice_curve(tau: &TauPoint, ctl: &SeriesControl) -> Result<(Complex64, Complex64)> {
    let g4 = eisenstein_g(4, tau, ctl)?.value;
    let g6 = eisenstein_g(6, tau, ctl)?.value;
    Ok((-15.0 * g4, -35.0 * g6))
}

/// `(℘(z), ℘'(z))` for arbitrary `z` off the lattice, from the q-expansion
/// `℘ = (2πi)^2 [1/12 + Σ_{n∈Z} q^n t/(1 - q^n t)^2 - 2 Σ_{n>=1} q^n/(1 - q^n)^2]`.
pub fn wp_q(tau: &TauPoint, z: Complex64, ctl: &SeriesControl) -> Result<(Complex64, Complex64)> {
    ctl.check()?;
    let fp = FundamentalPoint::from_u(z, tau);
    let u = fp.u(tau);
    if u.norm() < 1e-300 {
        return Err(Error::DomainError("℘ has a pole at lattice points".into()));
    }
    let iu = c(0.0, TWO_PI) * u;
    let t = iu.exp();
    let one_minus_t = -expm1_c(iu);
    let q = tau.q;
    let mut p = t / (one_minus_t * one_minus_t) + 1.0 / 12.0;
    let mut dp = t * (1.0 + t) / (one_minus_t * one_minus_t * one_minus_t);
    let mut qn = Complex64::one();
    let tinv = t.inv();
    for n in 1..=ctl.max_terms {
        qn *= q;
        let s = qn * t;
        let r = qn * tinv;
        let a = s / ((1.0 - s) * (1.0 - s));
        let b = r / ((1.0 - r) * (1.0 - r));
        let e = 2.0 * qn / ((1.0 - qn) * (1.0 - qn));
        p += a + b - e;
        dp += s * (1.0 + s) / ((1.0 - s).powu(3)) - r * (1.0 + r) / ((1.0 - r).powu(3));
        if (a.norm() + b.norm() + e.norm()) < ctl.term_tolerance * (1.0 + p.norm()) && n > 1 {
            let tpi = c(0.0, TWO_PI);
            return Ok((tpi * tpi * p, tpi * tpi * tpi * dp));
        }
    }
    Err(Error::NonConvergence {
        max_terms: ctl.max_terms,
    })
}

/// `(2π)^{12} q Π (1 - q^n)^{24}`.
pub fn delta_tau(tau: &TauPoint, ctl: &SeriesControl) -> Result<Complex64> {
    ctl.check()?;
    let (prod, _) = jacobi_product(tau.q, ctl)?;
    Ok(TWO_PI.powi(12) * tau.q * prod.powu(24))
}

/// `log|Δ(τ)|` without forming Δ.
pub fn log_abs_delta(tau: &TauPoint, ctl: &SeriesControl) -> Result<f64> {
    let (_, log_abs) = jacobi_product(tau.q, ctl)?;
    Ok(12.0 * TWO_PI.ln() + tau.log_abs_q() + 24.0 * log_abs)
}

/// `(Π (1 - q^n), Σ log|1 - q^n|)`.
fn jacobi_product(q: Complex64, ctl: &SeriesControl) -> Result<(Complex64, f64)> {
    let mut prod = Complex64::one();
    let mut log_abs = 0.0;
    let mut qn = Complex64::one();
    for _ in 1..=ctl.max_terms {
        qn *= q;
        prod *= 1.0 - qn;
        log_abs += (1.0 - qn).norm().ln();
        if qn.norm() < ctl.term_tolerance {
            return Ok((prod, log_abs));
        }
    }
    Err(Error::NonConvergence {
        max_terms: ctl.max_terms,
    })
}

/// `g_2^3 - 27 g_3^2` with `g_2 = 60 G_4`, `g_3 = 140 G_6`, from divisor sums.
///
/// With `E_4 = 1 + a`, `E_6 = 1 + b` the difference `E_4^3 - E_6^2` is
/// expanded as `(3a - 2b) + 3a^2 + a^3 - b^2`, and `3a - 2b` is summed as one
/// positive series, so nothing cancels even when `|q|` is tiny.
pub fn delta_from_eisenstein(tau: &TauPoint, ctl: &SeriesControl) -> Result<Complex64> {
    ctl.check()?;
    let q = tau.q;
    let (mut a, mut b, mut lin) = (Complex64::zero(), Complex64::zero(), Complex64::zero());
    let mut qn = Complex64::one();
    let mut converged = false;
    for n in 1..=ctl.max_terms as u64 {
        qn *= q;
        let s3 = ln_sigma(n, 3).exp();
        let s5 = ln_sigma(n, 5).exp();
        a += 240.0 * s3 * qn;
        b -= 504.0 * s5 * qn;
        lin += (720.0 * s3 + 1008.0 * s5) * qn;
        if (1008.0 * s5) * qn.norm() < ctl.term_tolerance * lin.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            max_terms: ctl.max_terms,
        });
    }
    let diff = lin + 3.0 * a * a + a * a * a - b * b;
    Ok(TWO_PI.powi(12) / 1728.0 * diff)
}

/// `1728 g_2^3 / Δ(τ)` with Δ from the Jacobi product.
pub fn j_of_tau(tau: &TauPoint, ctl: &SeriesControl) -> Result<Complex64> {
    let g2 = 60.0 * eisenstein_g(4, tau, ctl)?.value;
    Ok(1728.0 * g2 * g2 * g2 / delta_tau(tau, ctl)?)
}

/// Exact coefficients `c(0..=n_max)` of `j = 1/q + Σ c(n) q^n`, as `E_4^3 / Π(1-q^n)^{24}`.
pub fn j_qexp_coeffs(n_max: usize) -> Vec<BigInt> {
    let len = n_max + 2;
    // E_4 = 1 + 240 Σ σ_3(n) q^n
    let mut e4 = vec![BigInt::zero(); len];
    e4[0] = BigInt::one();
    for (n, coef) in e4.iter_mut().enumerate().skip(1) {
        let s: u64 = (1..=n as u64).filter(|d| n as u64 % d == 0).map(|d| d * d * d).sum();
        *coef = BigInt::from(240u64) * BigInt::from(s);
    }
    let mul = |a: &[BigInt], b: &[BigInt]| -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); len];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate().take(len - i) {
                out[i + j] += x * y;
            }
        }
        out
    };
    let e4_cubed = mul(&mul(&e4, &e4), &e4);
    // 1 / Π(1 - q^n)^{24} = Π (1 + q^n + q^{2n} + ...)^{24}
    let mut inv = vec![BigInt::zero(); len];
    inv[0] = BigInt::one();
    for n in 1..len {
        for _ in 0..24 {
            for i in n..len {
                let prev = inv[i - n].clone();
                inv[i] += prev;
            }
        }
    }
    let series = mul(&e4_cubed, &inv);
    series.into_iter().skip(1).take(n_max + 1).collect()
}

/// Result of matching a real j to its τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauAssociation {
    pub tau: TauPoint,
    pub j_target: f64,
    pub j_found: f64,
    pub residual: f64,
}

const ASSOC_TOL_ABS: f64 = 1e-8;
const ASSOC_TOL_REL: f64 = 1e-11;
const MONOTONE_SAMPLES: usize = 64;

/// The unique τ in the fundamental set with `j(τ) = j_real`, found by bisection
/// along the arc fixed by the sign and size of j.
pub fn associate_tau(j_real: f64, ctl: &SeriesControl) -> Result<TauAssociation> {
    if !j_real.is_finite() {
        return Err(Error::DomainError("j must be finite".into()));
    }
    let done = |tau: TauPoint| -> Result<TauAssociation> {
        let jf = j_of_tau(&tau, ctl)?.re;
        let residual = (jf - j_real).abs();
        Ok(TauAssociation {
            tau,
            j_target: j_real,
            j_found: jf,
            residual,
        })
    };
    if j_real == 1728.0 {
        return done(TauPoint::i());
    }
    if j_real == 0.0 {
        return done(TauPoint::rho());
    }
    let cap = 10f64.max((2.0 * j_real.abs()).ln() / TWO_PI + 2.0);
    let s3 = 3f64.sqrt() / 2.0;
    let (lo, hi, make): (f64, f64, fn(f64) -> Result<TauPoint>) = if j_real > 1728.0 {
        (1.0, cap, TauPoint::c1)
    } else if j_real > 0.0 {
        (FRAC_PI_3, FRAC_PI_2, |th| {
            if th >= FRAC_PI_2 {
                Ok(TauPoint::i())
            } else {
                TauPoint::c2(th)
            }
        })
    } else {
        (s3, cap, |b| {
            if b <= 3f64.sqrt() / 2.0 {
                Ok(TauPoint::rho())
            } else {
                TauPoint::c3(b)
            }
        })
    };
    let j_at = |s: f64| -> Result<f64> { Ok(j_of_tau(&make(s)?, ctl)?.re) };
    let bracket_fail = || Error::BracketFailure { j: j_real };

    // Monotonicity along the arc is checked, not assumed.
    let mut prev = j_at(lo)?;
    let increasing = j_at(hi)? > prev;
    for i in 1..=MONOTONE_SAMPLES {
        let s = lo + (hi - lo) * i as f64 / MONOTONE_SAMPLES as f64;
        let v = j_at(s)?;
        if (v > prev) != increasing && (v - prev).abs() > 1e-9 * v.abs().max(1.0) {
            return Err(bracket_fail());
        }
        prev = v;
    }
    let (mut a, mut b) = (lo, hi);
    let (mut ja, mut jb) = (j_at(a)?, j_at(b)?);
    let between = |x: f64, y: f64| (x.min(y)..=x.max(y)).contains(&j_real);
    if !between(ja, jb) {
        return Err(bracket_fail());
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let jm = j_at(m)?;
        let slack = 1e-9 * jm.abs().max(1.0);
        if jm < ja.min(jb) - slack || jm > ja.max(jb) + slack {
            return Err(bracket_fail());
        }
        if between(ja, jm) {
            b = m;
            jb = jm;
        } else {
            a = m;
            ja = jm;
        }
    }
    let s = if (ja - j_real).abs() <= (jb - j_real).abs() { a } else { b };
    let found = done(make(s)?)?;
    if found.residual > ASSOC_TOL_ABS.max(ASSOC_TOL_REL * j_real.abs()) {
        return Err(bracket_fail());
    }
    Ok(found)
}

/// `|w^2| = |Δ_E|^{1/6} |Δ(τ)|^{-1/6}`.
pub fn embedding_scale(disc_e: &BigInt, tau: &TauPoint, ctl: &SeriesControl) -> Result<f64> {
    if disc_e.is_zero() {
        return Err(Error::SingularCurve);
    }
    let ld = log_abs_delta(tau, ctl)?;
    Ok(((crate::arith::ln_abs(disc_e) - ld) / 6.0).exp())
}

/// The complex `w^2` with `A = w^4 A_τ`, `B = w^6 B_τ`, so that
/// `(x, y) = (w^2 ℘(u), w^3 ℘'(u)/2)` parametrizes the curve.
pub fn curve_scale(curve: &ShortCurve, tau: &TauPoint, ctl: &SeriesControl) -> Result<Complex64> {
    if curve.is_singular() {
        return Err(Error::SingularCurve);
    }
    let (at, bt) = lattice_curve(tau, ctl)?;
    let a = crate::arith::to_f64(&curve.a);
    let b = crate::arith::to_f64(&curve.b);
    let w2 = if a == 0.0 {
        let r = b / bt;
        // The real cube root when B_τ is real.
        if r.im.abs() <= 1e-9 * r.norm() {
            c(r.re.cbrt(), 0.0)
        } else {
            r.cbrt()
        }
    } else if b == 0.0 {
        (a / at).sqrt()
    } else {
        (b / bt) / (a / at)
    };
    Ok(w2)
}

/// A straight segment `start + s * dir`, `s ∈ [0, 1]`, in the u-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusPath {
    pub start: Complex64,
    pub dir: Complex64,
}

impl LocusPath {
    pub fn at(&self, s: f64) -> Complex64 {
        self.start + self.dir * s
    }

    pub fn point(&self, s: f64, tau: &TauPoint) -> FundamentalPoint {
        FundamentalPoint::from_u(self.at(s), tau)
    }
}

/// Half-period paths of the fundamental parallelogram on which `w^2 ℘(u)`
/// is real, covering the real locus of the curve (or of its twist by
/// `(x, y) -> (-x, iy)`).
pub fn real_locus(tau: &TauPoint, twisted: bool) -> Vec<LocusPath> {
    let t = tau.value;
    let seg = |start: Complex64, end: Complex64| LocusPath {
        start,
        dir: end - start,
    };
    let z = Complex64::zero();
    let half = c(0.5, 0.0);
    match (tau.region, twisted) {
        (Region::C1, false) => vec![seg(z, half), seg(t / 2.0, t / 2.0 + half)],
        (Region::C1, true) => vec![seg(z, t / 2.0), seg(half, half + t / 2.0)],
        (Region::C2, false) => vec![seg(z, (1.0 + t) / 2.0)],
        (Region::C2, true) => vec![seg(z, (t - 1.0) / 2.0)],
        (Region::C3, false) => vec![seg(z, half)],
        (Region::C3, true) => vec![seg(z, (2.0 * t - 1.0) / 2.0)],
    }
}

/// The point `u` with `w^2 ℘(u) = x_coord` on the real locus.
///
/// When `A = 0` or `B = 0` the scale is fixed only up to a root of unity, and
/// every admissible choice is tried.
pub fn point_to_u(
    curve: &ShortCurve,
    tau: &TauPoint,
    x_coord: f64,
    ctl: &SeriesControl,
) -> Result<FundamentalPoint> {
    let w2 = curve_scale(curve, tau, ctl)?;
    let scales: Vec<Complex64> = if curve.a.is_zero() {
        (0..3).map(|k| w2 * Complex64::from_polar(1.0, TWO_PI * k as f64 / 3.0)).collect()
    } else if curve.b.is_zero() {
        vec![w2, -w2]
    } else {
        vec![w2]
    };
    let mut last = Error::NoRoot { x: x_coord };
    for w in scales {
        match point_to_u_scaled(w, tau, x_coord, ctl) {
            Ok(u) => return Ok(u),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn candidate_paths(tau: &TauPoint) -> Vec<LocusPath> {
    let t = tau.value;
    let z = Complex64::zero();
    let half = c(0.5, 0.0);
    let seg = |start: Complex64, end: Complex64| LocusPath {
        start,
        dir: end - start,
    };
    vec![
        seg(z, half),
        seg(t / 2.0, t / 2.0 + half),
        seg(z, t / 2.0),
        seg(half, half + t / 2.0),
        seg(z, (1.0 + t) / 2.0),
        seg(z, (t - 1.0) / 2.0),
        seg(z, (2.0 * t - 1.0) / 2.0),
    ]
}

/// As [`point_to_u`] with a precomputed `w^2`.
pub fn point_to_u_scaled(
    w2: Complex64,
    tau: &TauPoint,
    x_coord: f64,
    ctl: &SeriesControl,
) -> Result<FundamentalPoint> {
    let tol = 1e-9 * x_coord.abs().max(1.0);
    let f = |path: &LocusPath, s: f64| -> Result<Complex64> { Ok(w2 * wp_q(tau, path.at(s), ctl)?.0) };
    let mut roots: Vec<(f64, LocusPath, f64)> = Vec::new();
    let mut ss: Vec<f64> = (1..=60).map(|k| 2f64.powi(-k)).collect();
    ss.extend((1..=256).map(|i| i as f64 / 256.0));
    ss.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ss.dedup();
    for path in candidate_paths(tau) {
        let mut real = true;
        for s in [0.17, 0.5, 0.83] {
            let v = f(&path, s)?;
            if v.im.abs() > 1e-7 * v.norm().max(1.0) {
                real = false;
                break;
            }
        }
        if !real {
            continue;
        }
        let vals: Vec<f64> = ss
            .iter()
            .map(|&s| Ok(f(&path, s)?.re - x_coord))
            .collect::<Result<_>>()?;
        for (i, &v) in vals.iter().enumerate() {
            if v.abs() <= tol {
                roots.push((ss[i], path, v.abs()));
            }
            if i + 1 < vals.len() && (v < 0.0) != (vals[i + 1] < 0.0) {
                let (mut a, mut b) = (ss[i], ss[i + 1]);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if ((f(&path, m)?.re - x_coord) < 0.0) == (v < 0.0) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                let (ra, rb) = (f(&path, a)?.re - x_coord, f(&path, b)?.re - x_coord);
                let (s, r) = if ra.abs() <= rb.abs() { (a, ra) } else { (b, rb) };
                roots.push((s, path, r.abs()));
            }
        }
    }
    roots.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    for (s, path, resid) in roots {
        if resid > tol {
            break;
        }
        // y^2 = w^6 (℘'/2)^2 must be real and non-negative, else the root
        // belongs to the twist.
        let (_, dp) = wp_q(tau, path.at(s), ctl)?;
        let y2 = w2 * w2 * w2 * dp * dp / 4.0;
        let scale = y2.norm().max(x_coord.abs().powf(1.5)).max(1.0);
        if y2.im.abs() > 1e-6 * scale || y2.re < -1e-6 * scale {
            continue;
        }
        let p = path.point(s, tau);
        return Ok(if p.u2 < 0.0 || (p.u2 == 0.0 && p.u1 < 0.0) {
            p.neg(tau)
        } else {
            p
        });
    }
    Err(Error::NoRoot { x: x_coord })
}

/// `B_2(x) = x^2 - x + 1/6`.
pub fn bernoulli2(x: f64) -> f64 {
    x * x - x + 1.0 / 6.0
}

/// `λ_∞(u) = -½ B_2(u_2) log|q| - log|1 - t| - Σ log|(1 - q^n t)(1 - q^n/t)|`.
pub fn lambda_infty(tau: &TauPoint, u: &FundamentalPoint, ctl: &SeriesControl) -> Result<f64> {
    ctl.check()?;
    let mut fp = *u;
    if fp.u2 < 0.0 {
        fp = fp.neg(tau);
    }
    let uu = fp.u(tau);
    if uu.norm() < 1e-8 {
        return Err(Error::DomainError("λ_∞ diverges at the lattice point".into()));
    }
    let iu = c(0.0, TWO_PI) * uu;
    let t = iu.exp();
    let mut v = -0.5 * bernoulli2(fp.u2) * tau.log_abs_q() - expm1_c(iu).norm().ln();
    let tinv = t.inv();
    let mut qn = Complex64::one();
    for _ in 1..=ctl.max_terms {
        qn *= tau.q;
        let a = qn * t;
        let b = qn * tinv;
        v -= ((1.0 - a) * (1.0 - b)).norm().ln();
        if a.norm() + b.norm() < ctl.term_tolerance {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence {
        max_terms: ctl.max_terms,
    })
}

/// τ grid of `n` samples on each arc, `Im τ <= im_max`; deterministic order C1, C2, C3.
pub fn tau_grid(n: usize, im_max: f64) -> Vec<TauPoint> {
    let s3 = 3f64.sqrt() / 2.0;
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let f = i as f64 / (n.max(2) - 1) as f64;
        out.push(TauPoint::c1(1.0 + f * (im_max - 1.0)).unwrap());
    }
    for i in 0..n {
        let f = i as f64 / n as f64;
        out.push(TauPoint::c2(FRAC_PI_3 + f * (FRAC_PI_2 - FRAC_PI_3)).unwrap());
    }
    for i in 0..n {
        let f = (i + 1) as f64 / n as f64;
        out.push(TauPoint::c3(s3 + f * (im_max - s3)).unwrap());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    #[test]
    fn eisenstein_symmetric_zeros() {
        let g6 = eisenstein_g(6, &TauPoint::i(), &ctl()).unwrap();
        assert!(g6.value.norm() < 1e-12, "{:?}", g6);
        let g4 = eisenstein_g(4, &TauPoint::rho(), &ctl()).unwrap();
        assert!(g4.value.norm() < 1e-12, "{:?}", g4);
        // G_4(i) = Σ (m+ni)^{-4} = 3.1512120021539...
        let g4i = eisenstein_g(4, &TauPoint::i(), &ctl()).unwrap().value;
        assert!((g4i.re - 3.151_212_002_153_897).abs() < 1e-12);
    }

    #[test]
    fn q_series_agrees_with_lattice_sum() {
        let loose = SeriesControl::with_tolerance(1e-4);
        for tau in [TauPoint::i(), TauPoint::c3(1.3).unwrap(), TauPoint::c2(1.2).unwrap()] {
            for k2 in [4u32, 6, 8] {
                let q = eisenstein_g(k2, &tau, &ctl()).unwrap().value;
                let (l, _, tail) = lattice_sums(k2, &tau, &loose).unwrap();
                assert!((q - l).norm() <= tail, "k2={k2} τ={:?} {q} {l}", tau.value);
            }
        }
        assert!(matches!(
            lattice_sums(4, &TauPoint::i(), &ctl()),
            Err(Error::NonConvergence { .. })
        ));
        assert!((lattice_tail_bound(4, 10) - 0.16).abs() < 1e-15);
    }

    #[test]
    fn delta_two_ways() {
        for tau in tau_grid(200, 10.0) {
            let a = delta_tau(&tau, &ctl()).unwrap();
            let b = delta_from_eisenstein(&tau, &ctl()).unwrap();
            assert!((a - b).norm() <= 1e-8 * a.norm(), "{:?}", tau.value);
            let w = log_abs_delta(&tau, &ctl()).unwrap() - tau.log_abs_q();
            assert!((21.588..=22.4554).contains(&w));
        }
    }

    #[test]
    fn special_j_values() {
        let j = j_of_tau(&TauPoint::i(), &ctl()).unwrap();
        assert!((j - 1728.0).norm() < 1e-8);
        let j = j_of_tau(&TauPoint::rho(), &ctl()).unwrap();
        assert!(j.norm() < 1e-8);
        for b in [1.0, 1.1, 1.5, 2.0, 3.0] {
            let j = j_of_tau(&TauPoint::c1(b).unwrap(), &ctl()).unwrap();
            assert!(j.re >= 1728.0 - 1e-8 && j.im.abs() < 1e-6 * j.re);
        }
    }

    #[test]
    fn q_expansion() {
        let c = j_qexp_coeffs(64);
        assert_eq!(c[0], BigInt::from(744));
        assert_eq!(c[1], BigInt::from(196_884));
        assert_eq!(c[2], BigInt::from(21_493_760));
        assert!(c.iter().all(|x| *x > BigInt::zero()));
        for n in 10..=64usize {
            let cn = crate::arith::ln_abs(&c[n]);
            let ratio = (cn + 0.5 * 2f64.ln() + 0.75 * (n as f64).ln() - 4.0 * PI * (n as f64).sqrt()).exp();
            assert!((0.8..=1.2).contains(&ratio), "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn q_expansion_matches_numeric_j() {
        let tau = TauPoint::c1(1.2).unwrap();
        let coeffs = j_qexp_coeffs(30);
        let mut s = tau.q.inv();
        let mut qn = Complex64::one();
        for cn in &coeffs {
            s += qn * crate::arith::to_f64(cn);
            qn *= tau.q;
        }
        let j = j_of_tau(&tau, &ctl()).unwrap();
        assert!((s - j).norm() < 1e-9 * j.norm());
    }

    #[test]
    fn associate_round_trip() {
        for j in [-1e6, -1.0, 0.0, 1.0, 1000.0, 1728.0, 1e6, 1e12] {
            let a = associate_tau(j, &ctl()).unwrap();
            assert!(a.residual <= 1e-6 * j.abs().max(1.0), "{j} {:?}", a);
            let again = j_of_tau(&a.tau, &ctl()).unwrap().re;
            assert!((again - j).abs() <= 1e-6 * j.abs().max(1.0));
        }
        assert_eq!(associate_tau(1728.0, &ctl()).unwrap().tau.value, c(0.0, 1.0));
        assert_eq!(associate_tau(-1e6, &ctl()).unwrap().tau.region, Region::C3);
        assert_eq!(associate_tau(100.0, &ctl()).unwrap().tau.region, Region::C2);
    }

    #[test]
    fn wp_series_agree() {
        let tau = TauPoint::c3(1.1).unwrap();
        for z in [c(0.3, 0.1), c(-0.1, 0.45), c(0.05, 0.0), c(0.2, -0.2)] {
            let (a, da) = wp(&tau, z, &ctl()).unwrap();
            let (b, db) = wp_q(&tau, z, &ctl()).unwrap();
            assert!((a - b).norm() < 1e-10 * a.norm(), "{z}: {a} {b}");
            assert!((da - db).norm() < 1e-9 * da.norm(), "{z}: {da} {db}");
        }
        assert!(matches!(wp(&tau, Complex64::zero(), &ctl()), Err(Error::DomainError(_))));
    }

    #[test]
    fn wp_near_zero_and_curve_relation() {
        let tau = TauPoint::c2(1.3).unwrap();
        let z = c(1e-4, 0.0);
        let (p, _) = wp(&tau, z, &ctl()).unwrap();
        assert!((p - 1.0 / (z * z)).norm() <= 100.0 * z.norm_sqr() + 1e-9);
        let (at, bt) = lattice_curve(&tau, &ctl()).unwrap();
        for z in [c(0.05, 0.0), c(0.2, 0.3), c(0.0, 0.5), c(0.35, -0.35)] {
            let (p, dp) = wp(&tau, z, &ctl()).unwrap();
            let lhs = dp * dp / 4.0;
            let rhs = p * p * p + at * p + bt;
            assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm(), "{z}");
        }
    }

    #[test]
    fn embedding_scale_power_law() {
        let tau = TauPoint::c1(1.4).unwrap();
        let d = delta_tau(&tau, &ctl()).unwrap().norm();
        let disc = BigInt::from((d * 4096.0).round() as i128);
        let s = embedding_scale(&disc, &tau, &ctl()).unwrap();
        assert!((s - 4.0).abs() < 1e-6);
    }

    #[test]
    fn point_to_u_round_trip_on_y2_x3_plus_1() {
        let curve = ShortCurve::new(0, 1);
        let a = associate_tau(0.0, &ctl()).unwrap();
        let w2 = curve_scale(&curve, &a.tau, &ctl()).unwrap();
        for x in [2.0, 0.0, -1.0, 5.0, 100.0] {
            let u = point_to_u(&curve, &a.tau, x, &ctl()).unwrap();
            let back = w2 * wp_q(&a.tau, u.u(&a.tau), &ctl()).unwrap().0;
            assert!((back.re - x).abs() <= 1e-6 * x.abs().max(1.0), "{x} -> {back}");
            assert!((back.norm() - embedding_scale(&curve.discriminant(), &a.tau, &ctl()).unwrap() * wp_q(&a.tau, u.u(&a.tau), &ctl()).unwrap().0.norm()).abs() < 1e-6 * back.norm().max(1.0));
        }
        assert!(matches!(point_to_u(&curve, &a.tau, -2.0, &ctl()), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn point_to_u_every_region_and_twist() {
        let curves = [(-2, 1), (-1, 0), (1, 0), (-7, 10), (3, 5), (0, -2), (-3, -1), (5, -3)];
        for (a, b) in curves {
            let curve = ShortCurve::new(a, b);
            let j = curve.j_f64().unwrap();
            let assoc = associate_tau(j, &ctl()).unwrap();
            let w2 = curve_scale(&curve, &assoc.tau, &ctl()).unwrap();
            // Real roots of the cubic and a few points beyond.
            let roots = real_roots(a as f64, b as f64);
            for &r in &roots {
                for x in [r, r + 0.5, r + 3.0, r + 50.0] {
                    let fx = x * x * x + a as f64 * x + b as f64;
                    if fx < -1e-9 {
                        continue;
                    }
                    let u = point_to_u(&curve, &assoc.tau, x, &ctl())
                        .unwrap_or_else(|e| panic!("({a},{b}) x={x}: {e}"));
                    let back = w2 * wp_q(&assoc.tau, u.u(&assoc.tau), &ctl()).unwrap().0;
                    assert!((back.re - x).abs() <= 1e-6 * x.abs().max(1.0));
                    assert!((0.0..=0.5).contains(&u.u2));
                }
            }
        }
    }

    fn real_roots(a: f64, b: f64) -> Vec<f64> {
        let f = |x: f64| x * x * x + a * x + b;
        let mut out = vec![];
        let grid: Vec<f64> = (-4000..=4000).map(|i| i as f64 / 100.0).collect();
        for w in grid.windows(2) {
            if f(w[0]) == 0.0 {
                out.push(w[0]);
            } else if f(w[0]) * f(w[1]) < 0.0 {
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..100 {
                    let m = 0.5 * (lo + hi);
                    if f(lo) * f(m) <= 0.0 {
                        hi = m;
                    } else {
                        lo = m;
                    }
                }
                out.push(lo);
            }
        }
        out
    }

    #[test]
    fn two_torsion_is_half_period() {
        let curve = ShortCurve::new(-1, 0);
        let assoc = associate_tau(1728.0, &ctl()).unwrap();
        for x in [-1.0, 0.0, 1.0] {
            let u = point_to_u(&curve, &assoc.tau, x, &ctl()).unwrap();
            let (_, dp) = wp_q(&assoc.tau, u.u(&assoc.tau), &ctl()).unwrap();
            assert!(dp.norm() < 1e-5, "x={x} u={:?} ℘'={dp}", u);
        }
    }

    #[test]
    fn lambda_infty_special_value() {
        let tau = TauPoint::i();
        let u = FundamentalPoint::new(0.5, 0.0, &tau);
        let q = (-TWO_PI).exp();
        let mut expect = PI / 6.0 - 2f64.ln();
        for n in 1..40 {
            expect -= 2.0 * (1.0 + q.powi(n)).ln();
        }
        let v = lambda_infty(&tau, &u, &ctl()).unwrap();
        assert!((v - expect).abs() < 1e-12);
        assert!(lambda_infty(&tau, &FundamentalPoint::new(0.0, 0.0, &tau), &ctl()).is_err());
    }

    #[test]
    fn lemma3_product_constant() {
        let a = PI * 3f64.sqrt();
        let mut p = 1.0;
        for n in 1..50 {
            let n = n as f64;
            p *= (1.0 - (-a * n).exp()) * (1.0 - (-a * (n - 0.5)).exp());
        }
        assert!((p - 0.92984).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn lambda_symmetric(b in 1.0f64..4.0, u1 in -0.5f64..0.5, u2 in -0.5f64..0.5) {
            prop_assume!(u1.abs() + u2.abs() > 1e-3);
            let tau = TauPoint::c1(b).unwrap();
            let u = FundamentalPoint::new(u1, u2, &tau);
            let a = lambda_infty(&tau, &u, &ctl()).unwrap();
            let m = lambda_infty(&tau, &u.neg(&tau), &ctl()).unwrap();
            prop_assert!((a - m).abs() < 1e-10);
        }

        #[test]
        fn wp_even(th in FRAC_PI_3..FRAC_PI_2, zr in -0.35f64..0.35, zi in -0.35f64..0.35) {
            prop_assume!(zr.abs() + zi.abs() > 1e-3);
            let tau = TauPoint::c2(th).unwrap();
            let z = c(zr, zi);
            let (a, _) = wp(&tau, z, &ctl()).unwrap();
            let (b, _) = wp(&tau, -z, &ctl()).unwrap();
            prop_assert!((a - b).norm() <= 1e-12 * a.norm());
            prop_assert!(a.norm() >= 1.0 / z.norm_sqr() - 100.0);
        }

        #[test]
        fn eisenstein_bounded(k in 2u32..7, which in 0usize..3, s in 0.0f64..1.0) {
            let tau = match which {
                0 => TauPoint::c1(1.0 + 9.0 * s).unwrap(),
                1 => TauPoint::c2(FRAC_PI_3 + s * (FRAC_PI_2 - FRAC_PI_3) * 0.999).unwrap(),
                _ => TauPoint::c3(0.8661 + 9.0 * s).unwrap(),
            };
            let g = eisenstein_g(2 * k, &tau, &ctl()).unwrap();
            prop_assert!(g.value.norm() <= 80.0);
        }

        #[test]
        fn eisenstein_modularity_on_c2(th in FRAC_PI_3..FRAC_PI_2, k in 2u32..7) {
            let tau = TauPoint::c2(th).unwrap();
            let k2 = 2 * k;
            let g = eisenstein_g(k2, &tau, &ctl()).unwrap().value.norm();
            let tm1 = tau.value - 1.0;
            let image = -tm1.inv();
            let h = eisenstein_g_raw(k2, image, &ctl()).unwrap().value.norm();
            let rhs = tm1.norm().powi(-(k2 as i32)) * h;
            prop_assert!((g - rhs).abs() <= 1e-6 * g.max(rhs).max(1e-12));
        }
    }
}
