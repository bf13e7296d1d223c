//! Exact integer helpers shared by the curve, height and counting modules.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Floor square root of a non-negative integer, `None` for negatives.
pub fn isqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    Some(n.sqrt())
}

/// Exact square root when `n` is a perfect square.
pub fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    let r = isqrt(n)?;
    (&r * &r == *n).then_some(r)
}

// Quadratic residue filters: a square is a residue modulo each of these.
const QR_MODULI: [u32; 4] = [64, 63, 65, 11];

fn qr_tables() -> &'static [Vec<bool>; 4] {
    use std::sync::OnceLock;
    static TABLES: OnceLock<[Vec<bool>; 4]> = OnceLock::new();
    TABLES.get_or_init(|| {
        QR_MODULI.map(|m| {
            let mut t = vec![false; m as usize];
            for r in 0..m {
                t[((r * r) % m) as usize] = true;
            }
            t
        })
    })
}

/// Exact square root of an `i128` when it is a perfect square.
#[inline]
pub fn exact_sqrt_i128(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    let tables = qr_tables();
    for (m, t) in QR_MODULI.iter().zip(tables.iter()) {
        if !t[(n % *m as i128) as usize] {
            return None;
        }
    }
    let r = (n as u128).sqrt() as i128;
    (r * r == n).then_some(r)
}

/// Integer floor of the `d`-th root of `n >= 0`.
pub fn iroot_floor(n: u64, d: u32) -> u64 {
    if d == 1 {
        return n;
    }
    n.nth_root(d)
}

/// Primes up to `limit` inclusive (sieve of Eratosthenes).
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut k = i * i;
            while k <= n {
                composite[k] = true;
                k += i;
            }
        }
    }
    out
}

/// Exact prime count pi(x).
pub fn prime_count(x: u64) -> usize {
    primes_up_to(x).len()
}

/// Prime factorisation of |n| as (prime, exponent), ascending. Panics on zero.
pub fn factorize(n: &BigInt) -> Vec<(BigInt, u32)> {
    assert!(!n.is_zero(), "cannot factor zero");
    let mag: BigUint = n.magnitude().clone();
    if mag.is_one() {
        return Vec::new();
    }
    if let Some(small) = mag.to_u128() {
        return num_prime::nt_funcs::factorize128(small)
            .into_iter()
            .map(|(p, e)| (BigInt::from(p), e as u32))
            .collect();
    }
    num_prime::nt_funcs::factorize(mag)
        .into_iter()
        .map(|(p, e)| (BigInt::from_biguint(Sign::Plus, p), e as u32))
        .collect()
}

/// p-adic valuation of a nonzero integer.
pub fn ord_p(n: &BigInt, p: &BigInt) -> u32 {
    debug_assert!(!n.is_zero());
    let mut k = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            return k;
        }
        m = q;
        k += 1;
    }
}

/// p-adic valuation of a rational; `None` stands for +infinity (zero).
pub fn ord_p_rational(r: &BigRational, p: &BigInt) -> Option<i64> {
    if r.is_zero() {
        return None;
    }
    Some(ord_p(r.numer(), p) as i64 - ord_p(r.denom(), p) as i64)
}

/// Natural logarithm of |n| for arbitrarily large integers.
pub fn ln_abs(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (n.magnitude() >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Logarithmic naive height log max(|num|, |den|) of a rational.
pub fn log_height(x: &BigRational) -> f64 {
    let n = x.numer().abs();
    let d = x.denom().abs();
    if n.is_zero() {
        return ln_abs(&d).max(0.0);
    }
    ln_abs(if n > d { &n } else { &d })
}

/// Number of decimal digits of |n| (approximate for huge values).
pub fn decimal_digits(n: &BigInt) -> usize {
    ((n.bits() as f64) * std::f64::consts::LOG10_2).ceil() as usize
}

/// Lossy conversion to f64 that saturates to +-inf instead of failing.
pub fn to_f64(n: &BigInt) -> f64 {
    n.to_f64().unwrap_or(if n.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let n = r.numer();
    let d = r.denom();
    if n.bits() < 1000 && d.bits() < 1000 {
        return to_f64(n) / to_f64(d);
    }
    let s = if n.is_negative() { -1.0 } else { 1.0 };
    s * (ln_abs(n) - ln_abs(d)).exp()
}

/// Floor of a/b for b > 0.
pub fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}
