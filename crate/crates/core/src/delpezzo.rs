//! Integral points of bounded weighted height on degree-1 del Pezzo surfaces
//! `y^2 = x^3 + F4(u, v) x + F6(u, v)` in `P(3, 2, 1, 1)`, counted fiber by
//! fiber over `(u, v)`.
//!
//! Coefficients are listed by descending power of `u`: `F4[i]` multiplies
//! `u^{4-i} v^i` and `F6[i]` multiplies `u^{6-i} v^i`.

use std::collections::HashMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arith::exact_sqrt_i128;
use crate::bounds_lab::loglog_slope;
use crate::curve_models::{BoxSpec, ShortCurve};
use crate::error::{Error, Result};
use crate::point_enum::enumerate_points;

/// Largest `N` accepted by [`count_s_n`].
pub const MAX_N: u64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DP1Surface {
    #[serde(rename = "F4")]
    pub f4: [i64; 5],
    #[serde(rename = "F6")]
    pub f6: [i64; 7],
}

/// `Σ c_i u^{d-i} v^i`.
fn eval_form(c: &[i64], u: i64, v: i64) -> BigInt {
    let d = c.len() - 1;
    let (u, v) = (BigInt::from(u), BigInt::from(v));
    c.iter()
        .enumerate()
        .map(|(i, &ci)| BigInt::from(ci) * num_traits::pow(u.clone(), d - i) * num_traits::pow(v.clone(), i))
        .sum()
}

/// Coefficients of the product of two binary forms.
fn mul_forms(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// A fiber `E_{(u,v)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fiber {
    Elliptic(ShortCurve),
    /// `4A^3 + 27B^2 = 0`; the cubic is still recorded.
    Singular(ShortCurve),
}

impl Fiber {
    pub fn curve(&self) -> &ShortCurve {
        match self {
            Fiber::Elliptic(c) | Fiber::Singular(c) => c,
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Fiber::Singular(_))
    }
}

impl DP1Surface {
    pub fn new(f4: [i64; 5], f6: [i64; 7]) -> Self {
        DP1Surface { f4, f6 }
    }

    /// Parses `{"F4": [c0..c4], "F6": [c0..c6]}`.
    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("surface JSON: {e}")))?;
        let read = |key: &str, len: usize| -> Result<Vec<i64>> {
            let arr = v
                .get(key)
                .and_then(Value::as_array)
                .filter(|a| a.len() == len)
                .ok_or_else(|| Error::InvalidInput(format!("surface needs \"{key}\" with {len} integers")))?;
            arr.iter()
                .map(|x| match x {
                    Value::Number(n) => n.as_i64(),
                    Value::String(s) => s.trim().parse().ok(),
                    _ => None,
                })
                .map(|x| x.ok_or_else(|| Error::InvalidInput(format!("\"{key}\" entries must be 64-bit integers"))))
                .collect()
        };
        let f4 = read("F4", 5)?;
        let f6 = read("F6", 7)?;
        Ok(DP1Surface::new(f4.try_into().unwrap(), f6.try_into().unwrap()))
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({ "F4": self.f4, "F6": self.f6 })
    }

    pub fn f4_at(&self, u: i64, v: i64) -> BigInt {
        eval_form(&self.f4, u, v)
    }

    pub fn f6_at(&self, u: i64, v: i64) -> BigInt {
        eval_form(&self.f6, u, v)
    }

    /// Coefficients of the degree-12 form `4 F4^3 + 27 F6^2`.
    pub fn disc_form(&self) -> Vec<BigInt> {
        let f4: Vec<BigInt> = self.f4.iter().map(|&c| BigInt::from(c)).collect();
        let f6: Vec<BigInt> = self.f6.iter().map(|&c| BigInt::from(c)).collect();
        let cube = mul_forms(&mul_forms(&f4, &f4), &f4);
        let sq = mul_forms(&f6, &f6);
        cube.iter().zip(&sq).map(|(a, b)| 4 * a + 27 * b).collect()
    }

    /// Every fiber is singular.
    pub fn is_degenerate(&self) -> bool {
        self.disc_form().iter().all(Zero::is_zero)
    }

    /// `-16(4 F4^3 + 27 F6^2)` at `(u, v)`.
    pub fn discriminant_at(&self, u: i64, v: i64) -> BigInt {
        let a = self.f4_at(u, v);
        let b = self.f6_at(u, v);
        -16 * (4 * &a * &a * &a + 27 * &b * &b)
    }
}

/// The fiber over `(u, v)`.
pub fn specialize(surface: &DP1Surface, u: i64, v: i64) -> Fiber {
    let c = ShortCurve {
        a: surface.f4_at(u, v),
        b: surface.f6_at(u, v),
    };
    if c.is_singular() {
        Fiber::Singular(c)
    } else {
        Fiber::Elliptic(c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberCount {
    pub u: i64,
    pub v: i64,
    #[serde(with = "crate::serde_big::int")]
    pub a: BigInt,
    #[serde(with = "crate::serde_big::int")]
    pub b: BigInt,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPCountReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub total: u64,
    /// Nonsingular fibers in `(u, v)` order.
    pub per_fiber: Vec<FiberCount>,
    pub singular_fibers: Vec<FiberCount>,
    pub disc_zero_count: u64,
    /// `N^{1/12}`, the growth rate of the discriminant-zero pairs.
    pub disc_zero_reference: f64,
    pub distinct_curves: usize,
    pub degenerate: bool,
    pub elapsed_ms: f64,
}

impl DPCountReport {
    /// Largest count over nonsingular fibers.
    pub fn per_fiber_max(&self) -> u64 {
        self.per_fiber.iter().map(|f| f.count).max().unwrap_or(0)
    }

    /// `total` equals the sum of the fiber counts.
    pub fn is_consistent(&self) -> bool {
        let s: u64 = self.per_fiber.iter().chain(&self.singular_fibers).map(|f| f.count).sum();
        s == self.total && self.singular_fibers.len() as u64 == self.disc_zero_count
    }
}

/// Points with `|x| <= x_max`, `|y| <= y_max` on `y^2 = x^3 + Ax + B`, by direct x-scan.
fn scan_count(c: &ShortCurve, x_max: i64, y_max: i64) -> Result<u64> {
    let (a, b) = c
        .small_coeffs()
        .ok_or_else(|| Error::InvalidInput("fiber coefficients exceed 128 bits".into()))?;
    let mut n = 0;
    for x in -x_max as i128..=x_max as i128 {
        let r = x
            .checked_mul(x)
            .and_then(|v| v.checked_mul(x))
            .and_then(|v| v.checked_add(a.checked_mul(x)?))
            .and_then(|v| v.checked_add(b))
            .ok_or_else(|| Error::InvalidInput("fiber value overflows".into()))?;
        if let Some(y) = exact_sqrt_i128(r) {
            if y <= y_max as i128 {
                n += if y == 0 { 1 } else { 2 };
            }
        }
    }
    Ok(n)
}

/// `|S(N)|`: integral `(x, y, u, v)` with `|x| <= N^2`, `|y| <= N^3`, `|u|, |v| <= N`.
pub fn count_s_n(surface: &DP1Surface, n: u64) -> Result<DPCountReport> {
    if n > MAX_N {
        return Err(Error::BoxTooLarge {
            side: n.to_string(),
            guard: MAX_N,
        });
    }
    let start = Instant::now();
    let ni = n as i64;
    let (x_max, y_max) = (ni * ni, ni * ni * ni);
    let pairs: Vec<(i64, i64)> = (-ni..=ni).flat_map(|u| (-ni..=ni).map(move |v| (u, v))).collect();
    let fibers: Vec<Fiber> = pairs.iter().map(|&(u, v)| specialize(surface, u, v)).collect();

    // One enumeration per distinct curve.
    let mut distinct: Vec<(ShortCurve, bool)> = Vec::new();
    let mut index: HashMap<ShortCurve, usize> = HashMap::new();
    for f in &fibers {
        if !index.contains_key(f.curve()) {
            index.insert(f.curve().clone(), distinct.len());
            distinct.push((f.curve().clone(), f.is_singular()));
        }
    }
    let bx = BoxSpec::new(-x_max as i128, x_max as i128, -y_max as i128, y_max as i128)?;
    let counts: Vec<u64> = distinct
        .par_iter()
        .map(|(c, singular)| {
            if *singular {
                scan_count(c, x_max, y_max)
            } else {
                Ok(enumerate_points(&c.to_long(), &bx)?.len() as u64)
            }
        })
        .collect::<Result<_>>()?;

    let mut per_fiber = Vec::new();
    let mut singular_fibers = Vec::new();
    for (&(u, v), f) in pairs.iter().zip(&fibers) {
        let c = f.curve();
        let fc = FiberCount {
            u,
            v,
            a: c.a.clone(),
            b: c.b.clone(),
            count: counts[index[c]],
        };
        if f.is_singular() {
            singular_fibers.push(fc);
        } else {
            per_fiber.push(fc);
        }
    }
    let total = per_fiber.iter().chain(&singular_fibers).map(|f| f.count).sum();
    Ok(DPCountReport {
        n,
        total,
        disc_zero_count: singular_fibers.len() as u64,
        per_fiber,
        singular_fibers,
        disc_zero_reference: (n.max(1) as f64).powf(1.0 / 12.0),
        distinct_curves: distinct.len(),
        degenerate: surface.is_degenerate(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Brute-force `|S(N)|` over all four coordinates; an oracle for small `N`.
pub fn brute_force_s_n(surface: &DP1Surface, n: u64) -> u64 {
    let ni = n as i64;
    let (x_max, y_max) = (ni * ni, ni * ni * ni);
    let mut total = 0;
    for u in -ni..=ni {
        for v in -ni..=ni {
            let a = surface.f4_at(u, v);
            let b = surface.f6_at(u, v);
            for x in -x_max..=x_max {
                let xb = BigInt::from(x);
                let rhs = &xb * &xb * &xb + &a * &xb + &b;
                for y in -y_max..=y_max {
                    if BigInt::from(y * y) == rhs {
                        total += 1;
                    }
                }
            }
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPExponentRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub total: u64,
    pub per_fiber_max: u64,
    pub singular_total: u64,
    pub disc_zero_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPExponentTable {
    pub surface: DP1Surface,
    pub rows: Vec<DPExponentRow>,
    pub total_slope: Option<f64>,
    pub per_fiber_slope: Option<f64>,
    /// Growth exponents the total is compared against.
    pub total_references: [f64; 2],
    /// `E(Z, N^3) << N^{1 - δ}`.
    pub fiber_reference: f64,
    pub degenerate: bool,
}

/// Counts `S(N)` for each `N` and fits growth exponents.
pub fn dp_exponent_experiment(surface: &DP1Surface, n_list: &[u64]) -> Result<DPExponentTable> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let r = count_s_n(surface, n)?;
        rows.push(DPExponentRow {
            n,
            total: r.total,
            per_fiber_max: r.per_fiber_max(),
            singular_total: r.singular_fibers.iter().map(|f| f.count).sum(),
            disc_zero_count: r.disc_zero_count,
        });
    }
    let fit = |f: &dyn Fn(&DPExponentRow) -> u64| {
        loglog_slope(&rows.iter().map(|r| (r.n as f64, f(r) as f64)).collect::<Vec<_>>())
    };
    Ok(DPExponentTable {
        surface: surface.clone(),
        total_slope: fit(&|r| r.total),
        per_fiber_slope: fit(&|r| r.per_fiber_max),
        total_references: [3.0, 2.0],
        fiber_reference: 1.0,
        degenerate: surface.is_degenerate(),
        rows,
    })
}

/// Tests whether `(u, v)` lies on the discriminant curve, recomputing exactly.
pub fn on_disc_locus(surface: &DP1Surface, u: i64, v: i64) -> bool {
    surface.discriminant_at(u, v).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fermat() -> DP1Surface {
        DP1Surface::new([1, 0, 0, 0, 1], [1, 0, 0, 0, 0, 0, 1])
    }

    #[test]
    fn specialize_examples() {
        let s = DP1Surface::new([1, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0, 1]);
        match specialize(&s, 1, 1) {
            Fiber::Elliptic(c) => {
                assert_eq!(c, ShortCurve::new(1, 1));
                assert_eq!(c.discriminant(), BigInt::from(-16 * 31));
            }
            f => panic!("{f:?}"),
        }
        assert!(specialize(&DP1Surface::new([0; 5], [0; 7]), 0, 0).is_singular());
        // F4 = -3 (uv)^2, F6 = 2 (uv)^3: 4F4^3 + 27F6^2 vanishes identically.
        let cusp = DP1Surface::new([0, 0, -3, 0, 0], [0, 0, 0, 2, 0, 0, 0]);
        assert!(cusp.is_degenerate());
        for (u, v) in [(1, 1), (2, -3), (5, 7)] {
            assert!(specialize(&cusp, u, v).is_singular());
        }
        assert!(!fermat().is_degenerate());
    }

    #[test]
    fn json_round_trip() {
        let s = fermat();
        let back = DP1Surface::from_json(&s.to_json().to_string()).unwrap();
        assert_eq!(back, s);
        assert!(DP1Surface::from_json(r#"{"F4":[1,2],"F6":[0,0,0,0,0,0,0]}"#).is_err());
    }

    #[test]
    fn zero_box_is_one_fiber() {
        let r = count_s_n(&fermat(), 0).unwrap();
        assert_eq!(r.per_fiber.len() + r.singular_fibers.len(), 1);
        // y^2 = x^3 over (0, 0) with |x|, |y| <= 0.
        assert_eq!(r.total, 1);
    }

    #[test]
    fn brute_force_agrees() {
        let s = fermat();
        let r = count_s_n(&s, 2).unwrap();
        assert_eq!(r.total, brute_force_s_n(&s, 2));
        assert!(r.is_consistent());
    }

    #[test]
    fn disc_zero_pairs_vanish() {
        let r = count_s_n(&fermat(), 10).unwrap();
        assert!(r.is_consistent());
        for f in &r.singular_fibers {
            assert!(on_disc_locus(&fermat(), f.u, f.v));
        }
        assert!(r.disc_zero_count >= 1);
    }

    #[test]
    fn guard() {
        assert!(matches!(count_s_n(&fermat(), 31), Err(Error::BoxTooLarge { .. })));
    }

    #[test]
    fn degenerate_surface_flagged() {
        let t = dp_exponent_experiment(&DP1Surface::new([0, 0, -3, 0, 0], [0, 0, 0, 2, 0, 0, 0]), &[2, 4]).unwrap();
        assert!(t.degenerate);
        assert!(t.rows.iter().all(|r| r.per_fiber_max == 0));
    }

    #[test]
    fn total_slope_within_pairs_times_fiber() {
        // total <= (2N+1)^2 max_fiber, so the fiber slope is at least the total slope minus 2.
        for s in [fermat(), DP1Surface::new([0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0, 0])] {
            let t = dp_exponent_experiment(&s, &[4, 8, 12, 16]).unwrap();
            let (total, fiber) = (t.total_slope.unwrap(), t.per_fiber_slope.unwrap());
            assert!(fiber >= total - 2.0 - 0.3, "{t:?}");
            assert!(total < 3.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn antipodal_fibers_agree(f4 in proptest::array::uniform5(-3i64..=3), f6 in proptest::array::uniform7(-3i64..=3)) {
            let s = DP1Surface::new(f4, f6);
            let r = count_s_n(&s, 3).unwrap();
            prop_assert!(r.is_consistent());
            let all: HashMap<(i64, i64), u64> =
                r.per_fiber.iter().chain(&r.singular_fibers).map(|f| ((f.u, f.v), f.count)).collect();
            for (&(u, v), &c) in &all {
                prop_assert_eq!(all[&(-u, -v)], c);
            }
            for f in &r.per_fiber {
                let exact = enumerate_points(&ShortCurve { a: f.a.clone(), b: f.b.clone() }.to_long(),
                    &BoxSpec::new(-9, 9, -27, 27).unwrap()).unwrap().len() as u64;
                prop_assert_eq!(exact, f.count);
            }
        }
    }
}
