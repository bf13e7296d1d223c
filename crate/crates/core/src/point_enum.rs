//! Integral point counting: exact enumeration, residue statistics mod p,
//! the large sieve, the slope decomposition of an x-range, and the decision
//! pipelines that bound the number of points in a box.

use std::time::Instant;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{exact_sqrt, exact_sqrt_i128, floor_div, isqrt, primes_up_to, prime_count};
use crate::curve_models::{BoxSpec, LongCurve, ShortCurve};
use crate::error::{Error, Result};

/// Largest box side accepted by the exact enumerators.
pub const BOX_GUARD: u64 = 100_000_000;

/// Primes at or below this bound are excluded from every sieve.
pub const SIEVE_PRIME_FLOOR: u64 = 43;

/// Which part of the counting argument produced a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    BruteForce,
    PowerFamily,
    LargeSieve,
    /// Bombieri-Pila style bound when the x^2 coefficient is large.
    LargeQuadraticCoefficient,
    /// Points with small x left to the repulsion bound.
    Repulsion,
    /// Sum of the per-branch bounds of the origin-centred pipeline.
    Composite,
    /// Box centre far from the origin.
    FarCentre,
    /// Coefficient norm above the determinant threshold.
    NormCap,
    /// Points where the slope |3x^2 + A| is small.
    ShallowSlope,
    /// Preconditions of the arbitrary-box argument fail.
    HypothesesUnmet,
}

/// What the second exponent measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRole {
    /// |disc| = N^eta.
    Disc,
    /// |y| = N^eta.
    Ycoord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentProfile {
    /// max log|x| / log N over the points, if any.
    pub alpha_x: Option<f64>,
    pub eta: Option<f64>,
    pub eta_role: EtaRole,
    pub k: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl ExponentProfile {
    fn plain(role: EtaRole) -> Self {
        ExponentProfile {
            alpha_x: None,
            eta: None,
            eta_role: role,
            k: DEFAULT_K,
            delta: DEFAULT_DELTA,
            epsilon: DEFAULT_DELTA / DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    fn stage(&mut self, name: &str, start: Instant) {
        self.stages
            .push((name.to_string(), start.elapsed().as_secs_f64() * 1e3));
    }
}

/// One branch of a decision tree, with its bound and the exact count of the
/// points it is responsible for when that was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchBound {
    pub branch: Branch,
    pub bound: f64,
    pub exact_count: Option<u64>,
    /// false when the bound carries an unknown implied constant (set to 1).
    pub certified: bool,
}

impl BranchBound {
    /// A certified bound must dominate the exact count.
    pub fn is_sound(&self) -> bool {
        match self.exact_count {
            Some(c) => !self.certified || self.bound >= c as f64,
            None => true,
        }
    }
}

/// Per-point exponents log|x|/log N and log|y|/log N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointExponent {
    pub x: i128,
    pub y: i128,
    pub alpha: f64,
    pub eta: f64,
    /// eta/3 <= alpha/2 + eps, when the slope hypothesis applied.
    pub slope_check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub points: Option<Vec<(i128, i128)>>,
    pub upper_bound: Option<f64>,
    pub branch: Branch,
    pub exponents: ExponentProfile,
    pub timings: Timings,
    /// Some branch bound has an unknown implied constant.
    pub constant_dependent: bool,
    pub branches: Vec<BranchBound>,
    pub hypotheses_met: bool,
    pub point_exponents: Vec<PointExponent>,
    pub pipeline: Option<PipelineDetail>,
    pub ladder: Option<BoxLadder>,
}

impl CountReport {
    fn exact(points: Vec<(i128, i128)>, branch: Branch, timings: Timings) -> Self {
        CountReport {
            points: Some(points),
            upper_bound: None,
            branch,
            exponents: ExponentProfile::plain(EtaRole::Ycoord),
            timings,
            constant_dependent: false,
            branches: Vec::new(),
            hypotheses_met: true,
            point_exponents: Vec::new(),
            pipeline: None,
            ladder: None,
        }
    }

    pub fn count(&self) -> Option<usize> {
        self.points.as_ref().map(Vec::len)
    }

    /// Every certified number dominates the matching exact count.
    pub fn is_sound(&self) -> bool {
        let top = match (&self.points, self.upper_bound) {
            (Some(p), Some(b)) if !self.constant_dependent => b >= p.len() as f64,
            _ => true,
        };
        top && self.branches.iter().all(BranchBound::is_sound)
    }
}

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_K: f64 = 4.5;

// 4x^3 + b2 x^2 + 2 b4 x + b6: the square of 2y + a1 x + a3.
#[derive(Debug, Clone)]
struct YDiscriminant {
    c: [BigInt; 4],
    small: Option<[i128; 4]>,
    small_x_max: i128,
}

impl YDiscriminant {
    fn new(curve: &LongCurve, x_abs_max: i128) -> Self {
        let [b2, b4, b6, _] = curve.b_invariants();
        let c = [b6, BigInt::from(2) * b4, b2, BigInt::from(4)];
        let small = c
            .iter()
            .map(|v| v.to_i128())
            .collect::<Option<Vec<_>>>()
            .and_then(|v| {
                let bound = v.iter().fold(0f64, |s, a| s + (*a as f64).abs())
                    * (x_abs_max.max(1) as f64).powi(3);
                (bound < 2f64.powi(120)).then(|| [v[0], v[1], v[2], v[3]])
            });
        YDiscriminant {
            c,
            small,
            small_x_max: x_abs_max,
        }
    }

    fn eval(&self, x: i128) -> BigInt {
        let x = BigInt::from(x);
        ((&self.c[3] * &x + &self.c[2]) * &x + &self.c[1]) * &x + &self.c[0]
    }

    fn eval_small(&self, x: i128) -> Option<i128> {
        let c = self.small?;
        (x.abs() <= self.small_x_max).then(|| ((c[3] * x + c[2]) * x + c[1]) * x + c[0])
    }

    // Integer x where the derivative changes sign, as floor values.
    fn turning_floors(&self) -> Option<(BigInt, BigInt)> {
        // D' = 12x^2 + 2 b2 x + 2 b4, roots (-b2 +- sqrt(b2^2 - 24 b4)) / 12.
        let b2 = &self.c[2];
        let disc = b2 * b2 - BigInt::from(12) * &self.c[1];
        if !disc.is_positive() {
            return None;
        }
        let s = isqrt(&disc).unwrap();
        let s_ceil = if &s * &s == disc { s.clone() } else { &s + 1 };
        let twelve = BigInt::from(12);
        Some((floor_div(&(-b2 - s_ceil), &twelve), floor_div(&(-b2 + s), &twelve)))
    }
}

fn clamp_big(v: &BigInt, lo: i128, hi: i128) -> i128 {
    if v < &BigInt::from(lo) {
        lo
    } else if v > &BigInt::from(hi) {
        hi
    } else {
        v.to_i128().unwrap()
    }
}

// Sub-ranges of [lo, hi] on which D is monotone; true means increasing.
fn monotone_pieces(d: &YDiscriminant, lo: i128, hi: i128) -> Vec<(i128, i128, bool)> {
    let Some((r1, r2)) = d.turning_floors() else {
        return vec![(lo, hi, true)];
    };
    let mut out = Vec::new();
    let cuts = [
        (lo, clamp_big(&r1, lo - 1, hi), true),
        (
            clamp_big(&(&r1 + 1), lo, hi + 1),
            clamp_big(&r2, lo - 1, hi),
            false,
        ),
        (clamp_big(&(&r2 + 1), lo, hi + 1), hi, true),
    ];
    for (a, b, inc) in cuts {
        if a <= b {
            out.push((a, b, inc));
        }
    }
    out
}

// First x in [lo, hi] with pred(x), for pred monotone false..true; hi + 1 if none.
fn first_true(lo: i128, hi: i128, pred: impl Fn(i128) -> bool) -> i128 {
    let (mut a, mut b) = (lo, hi + 1);
    while a < b {
        let m = a + (b - a) / 2;
        if pred(m) {
            b = m;
        } else {
            a = m + 1;
        }
    }
    a
}

/// Integer x in [lo, hi] with 0 <= D(x) <= cap, as disjoint sorted ranges.
fn candidate_ranges(d: &YDiscriminant, lo: i128, hi: i128, cap: &BigInt) -> Vec<(i128, i128)> {
    let zero = BigInt::zero();
    let mut out: Vec<(i128, i128)> = Vec::new();
    for (a, b, inc) in monotone_pieces(d, lo, hi) {
        let (s, e) = if inc {
            let s = first_true(a, b, |x| d.eval(x) >= zero);
            let e = first_true(a, b, |x| d.eval(x) > *cap) - 1;
            (s, e)
        } else {
            let s = first_true(a, b, |x| d.eval(x) <= *cap);
            let e = first_true(a, b, |x| d.eval(x) < zero) - 1;
            (s, e)
        };
        if s <= e {
            out.push((s, e));
        }
    }
    out
}

fn check_guard(bx: &BoxSpec) -> Result<()> {
    let side = bx.side();
    if side > BOX_GUARD as i128 {
        return Err(Error::BoxTooLarge {
            side: side.to_string(),
            guard: BOX_GUARD,
        });
    }
    Ok(())
}

const CHUNK: i128 = 1 << 14;

fn split_chunks(ranges: &[(i128, i128)]) -> Vec<(i128, i128)> {
    let mut out = Vec::new();
    for &(a, b) in ranges {
        let mut s = a;
        while s <= b {
            let e = (s + CHUNK - 1).min(b);
            out.push((s, e));
            s = e + 1;
        }
    }
    out
}

/// All integral points of a long model in a box.
pub fn enumerate_points(curve: &LongCurve, bx: &BoxSpec) -> Result<Vec<(i128, i128)>> {
    check_guard(bx)?;
    let x_abs = bx.x_lo.abs().max(bx.x_hi.abs());
    let y_abs = bx.y_lo.abs().max(bx.y_hi.abs());
    let d = YDiscriminant::new(curve, x_abs);
    // |2y + a1 x + a3| bounds the square root of D.
    let s_max = BigInt::from(2 * y_abs) + curve.a1.abs() * BigInt::from(x_abs) + curve.a3.abs();
    let cap = &s_max * &s_max;
    let ranges = candidate_ranges(&d, bx.x_lo, bx.x_hi, &cap);
    let a1 = curve.a1.clone();
    let a3 = curve.a3.clone();
    let small_lin = a1.to_i128().zip(a3.to_i128());
    let chunks = split_chunks(&ranges);
    let found: Vec<Vec<(i128, i128)>> = chunks
        .par_iter()
        .map(|&(s, e)| {
            let mut pts = Vec::new();
            for x in s..=e {
                let mut roots: Vec<i128> = Vec::with_capacity(2);
                match (d.eval_small(x), small_lin) {
                    (Some(v), Some((c1, c3))) => {
                        if let Some(r) = exact_sqrt_i128(v) {
                            let lin = c1 * x + c3;
                            for num in [-lin - r, -lin + r] {
                                if num.rem_euclid(2) == 0 {
                                    roots.push(num / 2);
                                }
                            }
                        }
                    }
                    _ => {
                        if let Some(r) = exact_sqrt(&d.eval(x)) {
                            let lin = &a1 * BigInt::from(x) + &a3;
                            for num in [-&lin - &r, -&lin + &r] {
                                if num.is_even() {
                                    if let Some(y) = (num / BigInt::from(2)).to_i128() {
                                        roots.push(y);
                                    }
                                }
                            }
                        }
                    }
                }
                roots.sort_unstable();
                roots.dedup();
                for y in roots {
                    if (bx.y_lo..=bx.y_hi).contains(&y) {
                        pts.push((x, y));
                    }
                }
            }
            pts
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Exact point list of a curve in a box, ascending in (x, y).
pub fn enumerate_box(curve: &LongCurve, bx: &BoxSpec) -> Result<CountReport> {
    let start = Instant::now();
    let points = enumerate_points(curve, bx)?;
    let mut timings = Timings::default();
    timings.stage("enumerate", start);
    timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut report = CountReport::exact(points, Branch::BruteForce, timings);
    report.exponents.alpha_x = max_alpha(report.points.as_deref().unwrap(), bx);
    Ok(report)
}

/// Short-model convenience wrapper for [`enumerate_box`].
pub fn enumerate_short(curve: &ShortCurve, bx: &BoxSpec) -> Result<CountReport> {
    enumerate_box(&curve.to_long(), bx)
}

fn box_scale(bx: &BoxSpec) -> f64 {
    [bx.x_lo, bx.x_hi, bx.y_lo, bx.y_hi]
        .iter()
        .map(|v| v.unsigned_abs())
        .max()
        .unwrap_or(0) as f64
}

fn max_alpha(points: &[(i128, i128)], bx: &BoxSpec) -> Option<f64> {
    let n = box_scale(bx);
    if n <= 1.0 {
        return None;
    }
    points
        .iter()
        .filter(|p| p.0 != 0)
        .map(|p| (p.0.unsigned_abs() as f64).ln() / n.ln())
        .reduce(f64::max)
}

/// Integer x in [lo, hi] for which f(x) is a square (no bound on y).
pub fn admissible_x(curve: &ShortCurve, lo: i128, hi: i128) -> Result<Vec<i128>> {
    if hi - lo > BOX_GUARD as i128 {
        return Err(Error::BoxTooLarge {
            side: (hi - lo).to_string(),
            guard: BOX_GUARD,
        });
    }
    let long = curve.to_long();
    let d = YDiscriminant::new(&long, lo.abs().max(hi.abs()));
    let chunks = split_chunks(&[(lo, hi)]);
    let found: Vec<Vec<i128>> = chunks
        .par_iter()
        .map(|&(s, e)| {
            (s..=e)
                .filter(|&x| match d.eval_small(x) {
                    Some(v) => exact_sqrt_i128(v).is_some(),
                    None => exact_sqrt(&d.eval(x)).is_some(),
                })
                .collect()
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Points of y = x^d in [-N, N]^2 by direct scan.
pub fn power_family_points(d: u32, n: i128) -> Result<CountReport> {
    if d == 0 {
        return Err(Error::InvalidInput("power family needs d >= 1".into()));
    }
    let bx = BoxSpec::square(n);
    check_guard(&bx)?;
    let start = Instant::now();
    let points: Vec<(i128, i128)> = (-n..=n)
        .filter_map(|x| {
            let y = x.checked_pow(d)?;
            (y.abs() <= n).then_some((x, y))
        })
        .collect();
    let mut timings = Timings::default();
    timings.stage("enumerate", start);
    timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut report = CountReport::exact(points, Branch::PowerFamily, timings);
    report.exponents.alpha_x = max_alpha(report.points.as_deref().unwrap(), &bx);
    Ok(report)
}

/// 2 floor(N^{1/d}) + 1, the closed form for the power family.
pub fn power_family_count(d: u32, n: u64) -> u64 {
    2 * crate::arith::iroot_floor(n, d) + 1
}

/// Residue statistics of y^2 = x^3 + Ax + B over F_p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XResidues {
    pub p: u64,
    /// Projective point count, including infinity.
    pub point_count: u64,
    /// Residues x mod p over which the curve has a point.
    pub x_count: u64,
    pub alpha_p: f64,
    /// |#E(F_p) - p - 1|.
    pub hasse_residual: u64,
}

fn mod_u64(v: &BigInt, p: u64) -> u64 {
    v.mod_floor(&BigInt::from(p)).to_u64().unwrap()
}

/// Count points and occupied x-residues of the reduction mod p.
pub fn xresidues_mod_p(curve: &ShortCurve, p: u64) -> Result<XResidues> {
    if p < 2 || !num_prime::nt_funcs::is_prime64(p) {
        return Err(Error::InvalidInput(format!("{p} is not prime")));
    }
    let bad = BigInt::from(6) * curve.discriminant();
    if (&bad % BigInt::from(p)).is_zero() {
        return Err(Error::BadReduction { p });
    }
    let (a, b) = (mod_u64(&curve.a, p) as u128, mod_u64(&curve.b, p) as u128);
    let pp = p as u128;
    let mut is_sq = vec![false; p as usize];
    for y in 0..pp {
        is_sq[(y * y % pp) as usize] = true;
    }
    let (mut points, mut xs) = (1u64, 0u64);
    for x in 0..pp {
        let f = ((x * x % pp * x) % pp + a * x % pp + b) % pp;
        if f == 0 {
            points += 1;
            xs += 1;
        } else if is_sq[f as usize] {
            points += 2;
            xs += 1;
        }
    }
    let hasse_residual = points.abs_diff(p + 1);
    assert!(
        (hasse_residual as f64) <= 2.0 * (p as f64).sqrt(),
        "Hasse bound violated at p = {p}"
    );
    assert!(
        p <= 42 || 4 * xs <= 3 * p,
        "x-residue density above 3/4 at p = {p}"
    );
    Ok(XResidues {
        p,
        point_count: points,
        x_count: xs,
        alpha_p: xs as f64 / p as f64,
        hasse_residual,
    })
}

/// Inputs of the large sieve inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveSetup {
    pub primes: Vec<u64>,
    pub alpha: f64,
    /// Largest prime allowed in the family.
    pub x_max: u64,
    /// Number of integers in the sifted interval.
    pub n_len: u64,
}

impl SieveSetup {
    pub fn new(primes: Vec<u64>, alpha: f64, x_max: u64, n_len: u64) -> Result<Self> {
        if let Some(p) = primes.iter().find(|&&p| p > x_max) {
            return Err(Error::InvalidInput(format!("prime {p} exceeds X = {x_max}")));
        }
        Ok(SieveSetup {
            primes,
            alpha,
            x_max,
            n_len,
        })
    }
}

/// alpha (N + X^2) / ((1 - alpha) |P|).
pub fn large_sieve_bound(setup: &SieveSetup) -> Result<f64> {
    let a = setup.alpha;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::DegenerateSieve(format!("alpha = {a} outside (0,1)")));
    }
    if setup.primes.is_empty() {
        return Err(Error::DegenerateSieve("empty prime set".into()));
    }
    let x = setup.x_max as f64;
    Ok(a * (setup.n_len as f64 + x * x) / ((1.0 - a) * setup.primes.len() as f64))
}

/// The sieve with the primes in (43, sqrt N].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqrtSieve {
    pub prime_count: usize,
    /// sqrt(N) / log N.
    pub premise_threshold: f64,
    /// prime_count > premise_threshold, by exact counting.
    pub premise_holds: bool,
    /// The inequality evaluated with the actual prime set.
    pub direct: f64,
    /// 2 alpha sqrt(N) log N / (1 - alpha).
    pub specialized: f64,
}

pub fn large_sieve_sqrt_bound(n: u64, alpha: f64) -> Result<SqrtSieve> {
    let x = n.sqrt();
    let prime_count = prime_count(x).saturating_sub(prime_count(SIEVE_PRIME_FLOOR));
    let primes: Vec<u64> = primes_up_to(x)
        .into_iter()
        .filter(|&p| p > SIEVE_PRIME_FLOOR)
        .collect();
    debug_assert_eq!(primes.len(), prime_count);
    let direct = large_sieve_bound(&SieveSetup::new(primes, alpha, x, n)?)?;
    let nf = n as f64;
    let premise_threshold = nf.sqrt() / nf.ln();
    Ok(SqrtSieve {
        prime_count,
        premise_threshold,
        premise_holds: prime_count as f64 > premise_threshold,
        direct,
        specialized: 2.0 * alpha * nf.sqrt() * nf.ln() / (1.0 - alpha),
    })
}

/// Certified bound on the number of x in an interval over which a curve has
/// an integral point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveCertificate {
    pub lo: i128,
    pub hi: i128,
    pub bound: f64,
    /// Sieve inequality value; None when no prime is usable.
    pub sieve_value: Option<f64>,
    pub alpha: f64,
    pub primes: Vec<u64>,
    /// Primes in range dropped for dividing 6 disc.
    pub excluded: Vec<u64>,
    /// No usable prime, so the bound is the interval length.
    pub trivial: bool,
}

pub fn sieve_certified_interval(
    curve: &ShortCurve,
    lo: i128,
    hi: i128,
    exact_alpha: bool,
) -> Result<SieveCertificate> {
    if hi - lo + 1 < 2 {
        return Err(Error::InvalidInput(format!(
            "sieve interval [{lo},{hi}] shorter than 2"
        )));
    }
    if curve.is_singular() {
        return Err(Error::SingularCurve);
    }
    let len = (hi - lo + 1) as u128;
    let len = len.min(u64::MAX as u128) as u64;
    let x_max = len.sqrt();
    let bad = BigInt::from(6) * curve.discriminant();
    let (primes, excluded): (Vec<u64>, Vec<u64>) = primes_up_to(x_max)
        .into_iter()
        .filter(|&p| p > SIEVE_PRIME_FLOOR)
        .partition(|&p| !(&bad % BigInt::from(p)).is_zero());
    assert!(
        excluded.len() as f64 <= (crate::arith::ln_abs(&bad) / std::f64::consts::LN_2).max(1.0),
        "more excluded primes than log2|6 disc|"
    );
    let alpha = if exact_alpha && !primes.is_empty() {
        let stats = primes
            .par_iter()
            .map(|&p| xresidues_mod_p(curve, p).map(|r| r.alpha_p))
            .collect::<Result<Vec<_>>>()?;
        stats.into_iter().fold(0.0, f64::max)
    } else {
        0.75
    };
    let trivial_bound = len as f64;
    if primes.is_empty() {
        return Ok(SieveCertificate {
            lo,
            hi,
            bound: trivial_bound,
            sieve_value: None,
            alpha,
            primes,
            excluded,
            trivial: true,
        });
    }
    let value = large_sieve_bound(&SieveSetup::new(primes.clone(), alpha, x_max, len)?)?;
    Ok(SieveCertificate {
        lo,
        hi,
        bound: value.min(trivial_bound),
        sieve_value: Some(value),
        alpha,
        primes,
        excluded,
        trivial: value >= trivial_bound,
    })
}

/// An x-interval where |3x^2 + A| is below the slope threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatInterval {
    pub lo: i128,
    pub hi: i128,
    /// +-sqrt(|A|/3), the nearest root of 3x^2 + A.
    pub centre: f64,
    pub within_cap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDecomposition {
    pub n: i128,
    pub m: i128,
    pub eps: f64,
    /// N^{4/3 + eps}.
    pub threshold: f64,
    pub steep_arcs: Vec<(i128, i128)>,
    pub flat_intervals: Vec<FlatInterval>,
    /// Real flat set around each centre before clipping to the range.
    pub candidate_flats: Vec<(f64, f64)>,
    pub centres: Vec<f64>,
    /// N^{2/3 - eps}: half-width bound on the side where R t >= 0.
    pub half_width_outer: f64,
    /// (2/sqrt 3) N^{2/3 - eps}: half-width bound on the side where R t < 0.
    pub half_width_inner: f64,
    /// (4/sqrt 3) N^{2/3 - eps}.
    pub length_cap: f64,
    /// M > N^{2/3+2eps} or |A| > N^{4/3+4eps}.
    pub hypotheses_met: bool,
}

impl IntervalDecomposition {
    /// Every integer of [-N,-M] and [M,N] lies in exactly one returned interval.
    pub fn covers_range(&self) -> bool {
        let mut all: Vec<(i128, i128)> = self
            .steep_arcs
            .iter()
            .copied()
            .chain(self.flat_intervals.iter().map(|f| (f.lo, f.hi)))
            .collect();
        all.sort_unstable();
        let mut expected = vec![(-self.n, -self.m), (self.m, self.n)];
        if self.m == 0 {
            expected = vec![(-self.n, self.n)];
        }
        let mut it = all.into_iter().peekable();
        for (lo, hi) in expected {
            let mut next = lo;
            while let Some(&(a, b)) = it.peek() {
                if a > hi {
                    break;
                }
                if a != next {
                    return false;
                }
                next = b + 1;
                it.next();
            }
            if next != hi + 1 {
                return false;
            }
        }
        it.next().is_none()
    }
}

// |3x^2 + A| < t, exactly, for the real threshold t.
fn is_flat(a: &BigInt, x: i128, t_ceil: &BigInt) -> bool {
    let x = BigInt::from(x);
    let v = BigInt::from(3) * &x * &x + a;
    v.abs() < *t_ceil
}

/// Split [-N,-M] and [M,N] into steep arcs and flat intervals for the
/// slope threshold |3x^2 + A| >= N^{4/3+eps}.
pub fn gradient_decomposition(
    curve: &ShortCurve,
    n: i128,
    eps: f64,
    m: i128,
) -> Result<IntervalDecomposition> {
    if !(0 < m && m <= n) {
        return Err(Error::InvalidInput(format!("need 0 < M <= N, got M={m}, N={n}")));
    }
    let nf = n as f64;
    let threshold = nf.powf(4.0 / 3.0 + eps);
    // |v| < T iff |v| <= ceil(T) - 1 for integer v.
    let t_ceil = BigInt::from(threshold.ceil() as u128);
    let af = crate::arith::to_f64(&curve.a);
    // The flat set on x >= 0 is an interval since 3x^2 is monotone there.
    let lo_pos = first_true(0, n, |x| {
        BigInt::from(3) * BigInt::from(x) * BigInt::from(x) + &curve.a > -&t_ceil
    });
    let hi_pos = first_true(0, n, |x| {
        BigInt::from(3) * BigInt::from(x) * BigInt::from(x) + &curve.a >= t_ceil
    }) - 1;
    let centre = (af.abs() / 3.0).sqrt();
    let small = nf.powf(2.0 / 3.0 - eps);
    let length_cap = 4.0 / 3f64.sqrt() * small;
    let mut flats = Vec::new();
    let mut steep = Vec::new();
    for sign in [-1i128, 1] {
        let (s_lo, s_hi) = (m, n);
        let (f_lo, f_hi) = (lo_pos.max(s_lo), hi_pos.min(s_hi));
        let mut pieces: Vec<(i128, i128, bool)> = Vec::new();
        if f_lo <= f_hi {
            debug_assert!(is_flat(&curve.a, f_lo, &t_ceil) && is_flat(&curve.a, f_hi, &t_ceil));
            pieces.push((s_lo, f_lo - 1, false));
            pieces.push((f_lo, f_hi, true));
            pieces.push((f_hi + 1, s_hi, false));
        } else {
            pieces.push((s_lo, s_hi, false));
        }
        for (a, b, flat) in pieces {
            if a > b {
                continue;
            }
            let (lo, hi) = if sign < 0 { (-b, -a) } else { (a, b) };
            if flat {
                flats.push(FlatInterval {
                    lo,
                    hi,
                    centre: sign as f64 * centre,
                    within_cap: ((hi - lo) as f64) <= length_cap,
                });
            } else {
                steep.push((lo, hi));
            }
        }
    }
    steep.sort_unstable();
    flats.sort_by_key(|f| f.lo);
    let (centres, candidate_flats) = if af < threshold {
        let lo2 = ((-af - threshold) / 3.0).max(0.0).sqrt();
        let hi2 = ((-af + threshold) / 3.0).sqrt();
        if lo2 == 0.0 {
            (vec![0.0], vec![(-hi2, hi2)])
        } else {
            (vec![-centre, centre], vec![(-hi2, -lo2), (lo2, hi2)])
        }
    } else {
        (Vec::new(), Vec::new())
    };
    let mf = m as f64;
    Ok(IntervalDecomposition {
        n,
        m,
        eps,
        threshold,
        steep_arcs: steep,
        flat_intervals: flats,
        candidate_flats,
        centres,
        half_width_outer: small,
        half_width_inner: 2.0 / 3f64.sqrt() * small,
        length_cap,
        hypotheses_met: mf > nf.powf(2.0 / 3.0 + 2.0 * eps)
            || af.abs() > nf.powf(4.0 / 3.0 + 4.0 * eps),
    })
}

/// Norm of the weighted homogenization and the resulting point bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvBound {
    #[serde(with = "crate::serde_big::int")]
    pub norm: BigInt,
    /// (N^{2/3} ||G||^{-1/9} + 1) N^eps.
    pub bound: f64,
    /// |C| >= N^{1+6 eps}.
    pub large_quadratic: bool,
}

/// Bound for points of y^2 + a3 y = x^3 + C x^2 + D x + F in [-N,N]^2 from
/// the coefficients {1, 1, |C|N^2, |D|N, |F|} of the homogenized form. A
/// nonzero a3 contributes |a3| N.
pub fn ev_bound_for_box(curve: &LongCurve, n: u64, eps: f64) -> Result<EvBound> {
    if !curve.a1.is_zero() {
        return Err(Error::UnsupportedForm("a1 != 0".into()));
    }
    let nb = BigInt::from(n);
    let norm = [
        BigInt::from(1),
        curve.a2.abs() * &nb * &nb,
        curve.a4.abs() * &nb,
        curve.a6.abs(),
        curve.a3.abs() * &nb,
    ]
    .into_iter()
    .max()
    .unwrap();
    let ln_n = (n as f64).ln();
    let ln_norm = crate::arith::ln_abs(&norm);
    let bound = ((2.0 / 3.0 * ln_n - ln_norm / 9.0).exp() + 1.0) * (eps * ln_n).exp();
    let large_quadratic = crate::arith::ln_abs(&curve.a2) >= (1.0 + 6.0 * eps) * ln_n
        && !curve.a2.is_zero();
    Ok(EvBound {
        norm,
        bound,
        large_quadratic,
    })
}

/// Minimizer of max(1/3 - d/(2k), 1/3 - d(k-3)/(3k)) over k > 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KOptimum {
    pub k: f64,
    pub exponent: f64,
}

pub fn split_exponent(delta: f64, k: f64) -> f64 {
    (1.0 / 3.0 - delta / (2.0 * k)).max(1.0 / 3.0 - delta * (k - 3.0) / (3.0 * k))
}

pub fn optimal_k(delta: f64) -> KOptimum {
    // Golden-section search; the objective is unimodal in k.
    let g = |k: f64| split_exponent(delta, k);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (3.0f64, 100.0f64);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    while b - a > 1e-12 {
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let k = 0.5 * (a + b);
    KOptimum { k, exponent: g(k) }
}

/// Intermediate quantities of the origin-centred pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDetail {
    pub epsilon: f64,
    /// a3 was removed by completing the square, widening the box.
    pub square_completed: bool,
    pub quadratic_check: EvBound,
    /// Short image y^2 = x^3 + A x + B under X = 9x + 3C, Y = 27y.
    #[serde(with = "crate::serde_big::int")]
    pub a: BigInt,
    #[serde(with = "crate::serde_big::int")]
    pub b: BigInt,
    /// Half side of the square holding the image box.
    pub image_half: i128,
    /// N^{2/3 + 2 eps}.
    pub x_threshold: f64,
    /// N^{4/3 + 4 eps}.
    pub a_threshold: f64,
    pub large_a: bool,
    pub sieve_intervals: usize,
    pub sieve_x_bound: f64,
    /// |B| <= N^{2 + 6 eps}; must hold when the residual region has points.
    pub residual_b_within: bool,
    /// |disc| <= N^{4 + 12 eps}.
    pub residual_disc_within: bool,
    /// (1/3 + eps) 2 log N.
    pub hv_height: f64,
    /// exp(h (1 - delta) + eps).
    pub hv_bound: f64,
    /// max(1/3 - delta/(2k), 1/3 - delta(k-3)/(3k) - delta^2/k).
    pub exponent_bound: f64,
}

/// Case data of the arbitrary-box argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxLadder {
    pub side: i128,
    pub centre: (i128, i128),
    /// N^{3 + 18 eps}.
    pub far_threshold: f64,
    pub far_centre: bool,
    pub a_positive: Option<bool>,
    pub j: Option<f64>,
    pub norm_cap: Option<crate::curve_models::HeathBrownReport>,
    /// log|disc| <= 180 (3 + 18 eps) log N.
    pub disc_within_cap: Option<bool>,
    pub shallow_points: usize,
    pub eta_max: Option<f64>,
    /// eta <= 1 + 15 eps for every shallow point.
    pub eta_conclusion: Option<bool>,
    /// Half side of the origin box handed to the centred pipeline.
    pub routed_half: Option<i128>,
}

fn log_ratio(v: i128, ln_n: f64) -> f64 {
    if v.unsigned_abs() <= 1 {
        0.0
    } else {
        (v.unsigned_abs() as f64).ln() / ln_n
    }
}

fn pow_f(n: f64, e: f64) -> f64 {
    n.powf(e)
}

// Sieve the x-values of the decomposition that can carry a point with |y| <= N.
fn sieve_decomposition(
    curve: &ShortCurve,
    dec: &IntervalDecomposition,
) -> Result<(f64, usize)> {
    let n = dec.n;
    let d = YDiscriminant::new(&curve.to_long(), n);
    let cap = BigInt::from(2 * n) * BigInt::from(2 * n);
    let intervals = dec
        .steep_arcs
        .iter()
        .copied()
        .chain(dec.flat_intervals.iter().map(|f| (f.lo, f.hi)));
    let mut total = 0.0;
    let mut used = 0;
    for (lo, hi) in intervals {
        for (a, b) in candidate_ranges(&d, lo, hi, &cap) {
            used += 1;
            total += if b > a {
                sieve_certified_interval(curve, a, b, false)?.bound
            } else {
                1.0
            };
        }
    }
    Ok((total, used))
}

fn with_detail(mut r: CountReport, detail: PipelineDetail) -> CountReport {
    r.pipeline = Some(detail);
    r
}

/// Bound the points of y^2 + a3 y = x^3 + a2 x^2 + a4 x + a6 in [-N,N]^2
/// by the large-coefficient, large-sieve and repulsion branches, with
/// eps = delta / k. Every certified branch is checked against exact counts
/// when the image box is small enough to enumerate.
pub fn main_theorem_pipeline(curve: &LongCurve, n: u64, delta: f64, k: f64) -> Result<CountReport> {
    if !curve.a1.is_zero() {
        return Err(Error::UnsupportedForm("a1 != 0".into()));
    }
    if n < 10 {
        return Err(Error::InvalidInput(format!("pipeline needs N >= 10, got {n}")));
    }
    if !(delta > 0.0 && k > 0.0) {
        return Err(Error::InvalidInput("delta and k must be positive".into()));
    }
    if curve.discriminant().is_zero() {
        return Err(Error::SingularCurve);
    }
    let start = Instant::now();
    let mut timings = Timings::default();
    let eps = delta / k;
    let ni = n as i128;
    let bx = BoxSpec::square(ni);
    let points = if 2 * n <= BOX_GUARD {
        Some(enumerate_points(curve, &bx)?)
    } else {
        None
    };
    timings.stage("enumerate", start);

    // Remove a3, keeping every point of the box inside a (wider) box.
    let a3 = &curve.a3;
    let (model, x_half, y_half) = if a3.is_zero() {
        (curve.clone(), ni, ni)
    } else if a3.is_even() {
        let h: BigInt = a3 / 2;
        let hi = h.abs().to_i128().ok_or_else(|| Error::InvalidInput("a3 too large".into()))?;
        let m = LongCurve {
            a3: BigInt::zero(),
            a6: &curve.a6 + &h * &h,
            ..curve.clone()
        };
        (m, ni, ni + hi)
    } else {
        let ai = a3.abs().to_i128().ok_or_else(|| Error::InvalidInput("a3 too large".into()))?;
        let m = LongCurve {
            a1: BigInt::zero(),
            a2: BigInt::from(4) * &curve.a2,
            a3: BigInt::zero(),
            a4: BigInt::from(16) * &curve.a4,
            a6: BigInt::from(64) * &curve.a6 + BigInt::from(16) * a3 * a3,
        };
        (m, 4 * ni, 8 * ni + 4 * ai)
    };
    let wide = x_half.max(y_half);
    let quadratic_check = ev_bound_for_box(&model, wide as u64, eps)?;
    let ln_pts = |p: &Option<Vec<(i128, i128)>>| p.as_ref().map(|v| v.len() as u64);
    let mut exponents = ExponentProfile {
        alpha_x: points.as_deref().and_then(|p| max_alpha(p, &bx)),
        eta: None,
        eta_role: EtaRole::Disc,
        k,
        delta,
        epsilon: eps,
    };
    let exponent_bound = split_exponent(delta, k).max(
        1.0 / 3.0 - delta * (k - 3.0) / (3.0 * k) - delta * delta / k,
    );

    if quadratic_check.large_quadratic {
        let bound = quadratic_check.bound;
        timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
        let detail = PipelineDetail {
            epsilon: eps,
            square_completed: !a3.is_zero(),
            quadratic_check,
            a: BigInt::zero(),
            b: BigInt::zero(),
            image_half: wide,
            x_threshold: f64::NAN,
            a_threshold: f64::NAN,
            large_a: false,
            sieve_intervals: 0,
            sieve_x_bound: 0.0,
            residual_b_within: true,
            residual_disc_within: true,
            hv_height: f64::NAN,
            hv_bound: f64::NAN,
            exponent_bound,
        };
        let report = CountReport {
            branches: vec![BranchBound {
                branch: Branch::LargeQuadraticCoefficient,
                bound,
                exact_count: ln_pts(&points),
                certified: false,
            }],
            points,
            upper_bound: Some(bound),
            branch: Branch::LargeQuadraticCoefficient,
            exponents,
            timings,
            constant_dependent: true,
            hypotheses_met: true,
            point_exponents: Vec::new(),
            pipeline: None,
            ladder: None,
        };
        return Ok(with_detail(report, detail));
    }

    let (short, _) = crate::curve_models::to_short_form(&model)?;
    let c = model.a2.to_i128().ok_or_else(|| Error::InvalidInput("a2 too large".into()))?;
    let n1 = (9 * x_half + 3 * c.abs()).max(27 * y_half);
    let n1f = n1 as f64;
    let ln_n1 = n1f.ln();
    let x_threshold = pow_f(n1f, 2.0 / 3.0 + 2.0 * eps);
    let a_threshold = pow_f(n1f, 4.0 / 3.0 + 4.0 * eps);
    let large_a = crate::arith::ln_abs(&short.a) > a_threshold.ln() && !short.a.is_zero();
    let m = if large_a { 1 } else { x_threshold.floor() as i128 + 1 };

    let t = Instant::now();
    let (sieve_x_bound, sieve_intervals) = if m <= n1 {
        let dec = gradient_decomposition(&short, n1, eps, m)?;
        sieve_decomposition(&short, &dec)?
    } else {
        (0.0, 0)
    };
    // The x = 0 column is outside the sieved range when M = 1.
    let sieve_bound = 2.0 * sieve_x_bound + if large_a { 2.0 } else { 0.0 };
    timings.stage("sieve", t);

    let t = Instant::now();
    let image_points = if 2 * n1 <= BOX_GUARD as i128 {
        Some(enumerate_points(&short.to_long(), &BoxSpec::square(n1))?)
    } else {
        None
    };
    let (sieve_exact, residual_exact) = match &image_points {
        Some(p) => {
            let s = p.iter().filter(|q| large_a || q.0.abs() >= m).count() as u64;
            (Some(s), Some(p.len() as u64 - s))
        }
        None => (None, None),
    };
    timings.stage("image_enumerate", t);

    let disc = short.discriminant();
    exponents.eta = Some(crate::arith::ln_abs(&disc) / ln_n1);
    let residual_b_within = crate::arith::ln_abs(&short.b) <= (2.0 + 6.0 * eps) * ln_n1 || short.b.is_zero();
    let residual_disc_within = crate::arith::ln_abs(&disc) <= (4.0 + 12.0 * eps) * ln_n1;
    let hv_height = (1.0 / 3.0 + eps) * 2.0 * ln_n1;
    let hv_bound = (hv_height * (1.0 - delta) + eps).exp();

    let mut branches = vec![BranchBound {
        branch: Branch::LargeSieve,
        bound: sieve_bound,
        exact_count: sieve_exact,
        certified: true,
    }];
    let mut upper = sieve_bound;
    let mut branch = Branch::LargeSieve;
    if !large_a {
        branches.push(BranchBound {
            branch: Branch::Repulsion,
            bound: hv_bound,
            exact_count: residual_exact,
            certified: false,
        });
        upper += hv_bound;
        if hv_bound >= sieve_bound {
            branch = Branch::Repulsion;
        }
    }
    timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    let detail = PipelineDetail {
        epsilon: eps,
        square_completed: !a3.is_zero(),
        quadratic_check,
        a: short.a.clone(),
        b: short.b.clone(),
        image_half: n1,
        x_threshold,
        a_threshold,
        large_a,
        sieve_intervals,
        sieve_x_bound,
        residual_b_within,
        residual_disc_within,
        hv_height,
        hv_bound,
        exponent_bound,
    };
    let report = CountReport {
        points,
        upper_bound: Some(upper),
        branch,
        exponents,
        timings,
        constant_dependent: !large_a,
        branches,
        hypotheses_met: true,
        point_exponents: Vec::new(),
        pipeline: None,
        ladder: None,
    };
    Ok(with_detail(report, detail))
}

/// Bound the points of y^2 = f(x) in an arbitrary box: far centres use the
/// coefficient-norm bound, otherwise the box is moved over the y-axis and
/// handed to the centred pipeline after the slope and exponent checks.
pub fn arbitrary_box_pipeline(curve: &LongCurve, bx: &BoxSpec, eps: f64) -> Result<CountReport> {
    if !curve.a1.is_zero() {
        return Err(Error::UnsupportedForm("a1 != 0".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    if curve.discriminant().is_zero() {
        return Err(Error::SingularCurve);
    }
    let start = Instant::now();
    let k = DEFAULT_K;
    let delta = eps * k;
    let side = bx.side().max(2);
    let nf = side as f64;
    let ln_n = nf.ln();
    let centre = bx.centre();
    let points = enumerate_points(curve, bx)?;
    let far_threshold = pow_f(nf, 3.0 + 18.0 * eps);
    let mut ladder = BoxLadder {
        side,
        centre,
        far_threshold,
        far_centre: false,
        a_positive: None,
        j: None,
        norm_cap: None,
        disc_within_cap: None,
        shallow_points: 0,
        eta_max: None,
        eta_conclusion: None,
        routed_half: None,
    };
    let abs_max = |b: &BoxSpec| {
        [b.x_lo, b.x_hi, b.y_lo, b.y_hi]
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap()
    };
    let finish = |mut r: CountReport, ladder: BoxLadder, pts: Vec<(i128, i128)>, pe: Vec<PointExponent>| {
        r.points = Some(pts);
        r.ladder = Some(ladder);
        r.point_exponents = pe;
        r.timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
        r
    };

    if centre == (0, 0) {
        let half = abs_max(bx).max(10);
        ladder.routed_half = Some(half);
        let r = main_theorem_pipeline(curve, half as u64, delta, k)?;
        return Ok(finish(r, ladder, points, Vec::new()));
    }

    if centre.0 as f64 > far_threshold
        || (-centre.0) as f64 > far_threshold
        || centre.1.abs() as f64 > far_threshold
    {
        ladder.far_centre = true;
        let (moved, mbx, _) = crate::curve_models::translate_box_to_origin(curve, bx)?;
        let ev = ev_bound_for_box(&moved, abs_max(&mbx).max(1) as u64, eps)?;
        let mut r = CountReport::exact(Vec::new(), Branch::FarCentre, Timings::default());
        r.upper_bound = Some(ev.bound);
        r.constant_dependent = true;
        r.branches = vec![BranchBound {
            branch: Branch::FarCentre,
            bound: ev.bound,
            exact_count: Some(points.len() as u64),
            certified: false,
        }];
        r.exponents.epsilon = eps;
        r.exponents.delta = delta;
        return Ok(finish(r, ladder, points, Vec::new()));
    }

    let (short, change) = crate::curve_models::to_short_form(curve)?;
    let j = short.j_f64();
    let a_positive = short.a.is_positive();
    ladder.a_positive = Some(a_positive);
    ladder.j = j;
    let met = curve.a3.is_zero() && a_positive && j.is_some_and(|j| j > eps);

    // Exponents are read in the short model, whose box is scaled by the change.
    let scale = change
        .x_scale
        .to_integer()
        .abs()
        .max(change.y_scale.to_integer().abs())
        .to_f64()
        .unwrap();
    let ln_ns = (nf * scale).ln();
    let af = crate::arith::to_f64(&short.a);
    let mut shallow = 0usize;
    let mut eta_max: Option<f64> = None;
    let point_exponents: Vec<PointExponent> = points
        .iter()
        .map(|&(x, y)| {
            let (xs, ys) = change.apply_int(&BigInt::from(x), &BigInt::from(y));
            let xs = xs.to_integer().to_i128().unwrap_or(i128::MAX);
            let ys = ys.to_integer().to_i128().unwrap_or(i128::MAX);
            let alpha = log_ratio(xs, ln_ns);
            let eta = log_ratio(ys, ln_ns);
            let slope = (3.0 * (xs as f64).powi(2) + af).abs();
            let is_shallow = slope <= 2.0 * ((1.0 / 3.0 + eta + eps) * ln_ns).exp();
            let a_small = af.abs() <= ((4.0 * eta / 3.0 - eps) * ln_ns).exp();
            if met && is_shallow {
                shallow += 1;
                eta_max = Some(eta_max.map_or(eta, |m: f64| m.max(eta)));
            }
            PointExponent {
                x,
                y,
                alpha,
                eta,
                slope_check: (met && is_shallow && a_small).then(|| eta / 3.0 <= alpha / 2.0 + eps),
            }
        })
        .collect();

    if !met {
        let mut r = CountReport::exact(Vec::new(), Branch::HypothesesUnmet, Timings::default());
        r.hypotheses_met = false;
        r.exponents.epsilon = eps;
        r.exponents.delta = delta;
        return Ok(finish(r, ladder, points, point_exponents));
    }

    let norm = crate::curve_models::coefficient_norm(curve);
    let hb_n = (2.0 * far_threshold).min(u64::MAX as f64).ceil() as u64;
    let hb = crate::curve_models::heath_brown_case(&norm, hb_n.max(1), 3)?;
    ladder.disc_within_cap =
        Some(crate::arith::ln_abs(&curve.discriminant()) <= 180.0 * (3.0 + 18.0 * eps) * ln_n);
    ladder.shallow_points = shallow;
    ladder.eta_max = eta_max;
    ladder.eta_conclusion = Some(eta_max.is_none_or(|e| e <= 1.0 + 15.0 * eps));

    // Move the box over the y-axis: x = X + x0 keeps the shape y^2 = g(X).
    let y_reach = bx.y_lo.abs().max(bx.y_hi.abs());
    let column = BoxSpec::new(bx.x_lo, bx.x_hi, -y_reach, y_reach)?;
    let (moved, mbx, _) = crate::curve_models::translate_box_to_origin(curve, &column)?;
    let half = abs_max(&mbx).max(10);
    ladder.routed_half = Some(half);
    let mut r = main_theorem_pipeline(&moved, half as u64, delta, k)?;
    if hb.count_bound.is_some() {
        r.branches.push(BranchBound {
            branch: Branch::NormCap,
            bound: 9.0,
            exact_count: Some(points.len() as u64),
            certified: false,
        });
    }
    r.branches.push(BranchBound {
        branch: Branch::ShallowSlope,
        bound: r.upper_bound.unwrap_or(f64::INFINITY),
        exact_count: Some(shallow as u64),
        certified: !r.constant_dependent,
    });
    ladder.norm_cap = Some(hb);
    r.exponents.eta_role = EtaRole::Ycoord;
    r.exponents.eta = point_exponents.iter().map(|p| p.eta).reduce(f64::max);
    r.exponents.alpha_x = point_exponents.iter().map(|p| p.alpha).reduce(f64::max);
    Ok(finish(r, ladder, points, point_exponents))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(a: i64, b: i64) -> ShortCurve {
        ShortCurve::new(a, b)
    }

    fn naive(curve: &LongCurve, bx: &BoxSpec) -> Vec<(i128, i128)> {
        let mut out = Vec::new();
        for x in bx.x_lo..=bx.x_hi {
            for y in bx.y_lo..=bx.y_hi {
                if curve.residual(&BigInt::from(x), &BigInt::from(y)).is_zero() {
                    out.push((x, y));
                }
            }
        }
        out
    }

    #[test]
    fn small_box_example() {
        let r = enumerate_short(&short(0, 1), &BoxSpec::square(10)).unwrap();
        assert_eq!(
            r.points.unwrap(),
            vec![(-1, 0), (0, -1), (0, 1), (2, -3), (2, 3)]
        );
    }

    #[test]
    fn empty_and_guarded_boxes() {
        let bx = BoxSpec::new(-100, -50, -10, 10).unwrap();
        assert!(enumerate_short(&short(0, 1), &bx).unwrap().points.unwrap().is_empty());
        let huge = BoxSpec::square(60_000_000);
        assert!(matches!(
            enumerate_short(&short(0, 1), &huge),
            Err(Error::BoxTooLarge { .. })
        ));
    }

    #[test]
    fn long_models_match_naive_scan() {
        let curves = [
            LongCurve::new([1, -1, 1, -3, 5]),
            LongCurve::new([0, 2, 3, -7, 1]),
            LongCurve::new([1, 0, 0, -30, 60]),
            LongCurve::new([0, -5, 1, 0, 9]),
        ];
        let bx = BoxSpec::new(-40, 45, -60, 70).unwrap();
        for c in &curves {
            assert_eq!(enumerate_points(c, &bx).unwrap(), naive(c, &bx), "{c:?}");
        }
    }

    #[test]
    fn power_family_matches_closed_form() {
        for d in [1u32, 2, 3, 5] {
            for n in [1i128, 7, 100, 1000, 12345] {
                let r = power_family_points(d, n).unwrap();
                assert_eq!(r.count().unwrap() as u64, power_family_count(d, n as u64));
            }
        }
    }

    #[test]
    fn residues_mod_5() {
        let r = xresidues_mod_p(&short(0, 1), 5).unwrap();
        assert_eq!((r.point_count, r.x_count, r.hasse_residual), (6, 3, 0));
        assert_eq!(
            xresidues_mod_p(&short(0, 1), 3),
            Err(Error::BadReduction { p: 3 })
        );
    }

    #[test]
    fn sieve_formula_examples() {
        let s = SieveSetup::new(vec![2, 3, 5, 7], 0.75, 10, 100).unwrap();
        assert!((large_sieve_bound(&s).unwrap() - 150.0).abs() < 1e-12);
        let s2 = SieveSetup::new(vec![2, 3, 5, 7, 11, 13, 17, 19], 0.75, 20, 100).unwrap();
        let s1 = SieveSetup::new(vec![2, 3, 5, 7], 0.75, 20, 100).unwrap();
        let (b1, b2) = (large_sieve_bound(&s1).unwrap(), large_sieve_bound(&s2).unwrap());
        assert!((b1 - 2.0 * b2).abs() < 1e-9);
        let tiny = SieveSetup::new(vec![2], 1e-12, 10, 100).unwrap();
        assert!(large_sieve_bound(&tiny).unwrap() < 1e-8);
        assert!(matches!(
            large_sieve_bound(&SieveSetup::new(vec![2], 1.0, 10, 100).unwrap()),
            Err(Error::DegenerateSieve(_))
        ));
        assert!(matches!(
            large_sieve_bound(&SieveSetup::new(vec![], 0.5, 10, 100).unwrap()),
            Err(Error::DegenerateSieve(_))
        ));
    }

    #[test]
    fn sqrt_sieve_premise() {
        let s = large_sieve_sqrt_bound(1_000_000_000_000, 0.75).unwrap();
        assert_eq!(s.prime_count, 78_498 - 14);
        assert!(s.premise_holds);
        assert!(s.direct <= s.specialized);
    }

    #[test]
    fn certified_interval_dominates_count() {
        let c = short(-7, 10);
        for (lo, hi) in [(0, 3), (-2000, 8000), (5000, 15000)] {
            for exact in [false, true] {
                let cert = sieve_certified_interval(&c, lo, hi, exact).unwrap();
                let truth = admissible_x(&c, lo, hi).unwrap().len();
                assert!(cert.bound >= truth as f64, "{cert:?} vs {truth}");
            }
        }
    }

    #[test]
    fn decomposition_large_positive_a_is_all_steep() {
        let n = 1000i128;
        let d = gradient_decomposition(&short(20_000, 3), n, 0.01, 1).unwrap();
        assert!(d.flat_intervals.is_empty());
        assert!(d.covers_range());
        let z = gradient_decomposition(&short(0, 3), n, 0.01, 120).unwrap();
        assert!(z.flat_intervals.is_empty() && z.covers_range());
    }

    #[test]
    fn decomposition_negative_a_example() {
        let (n, eps) = (1000i128, 0.01);
        let d = gradient_decomposition(&short(-300_000_000, 1), n, eps, 1).unwrap();
        let cap = 4.0 / 3f64.sqrt() * 10f64.powf(2.0 - 3.0 * eps);
        assert!((d.length_cap - cap).abs() < 1e-9 * cap);
        assert_eq!(d.centres.len(), 2);
        assert!((d.centres[1] - 1e4).abs() < 1e-6);
        for (lo, hi) in &d.candidate_flats {
            assert!(hi - lo <= cap);
            assert!((lo.abs() - 1e4).abs() < 1.0);
        }
        // Both centres sit outside [-N, N], so the whole range is steep.
        assert!(d.flat_intervals.is_empty() && d.covers_range());
        assert!(d.hypotheses_met);
    }

    #[test]
    fn decomposition_flat_pieces_respect_cap() {
        let (n, eps) = (1_000_000i128, 0.02);
        let a = -(3 * 400_000i128 * 400_000);
        let c = ShortCurve::new(BigInt::from(a), BigInt::from(5));
        let d = gradient_decomposition(&c, n, eps, 1).unwrap();
        assert_eq!(d.flat_intervals.len(), 2);
        assert!(d.flat_intervals.iter().all(|f| f.within_cap));
        assert!(d.covers_range());
        for f in &d.flat_intervals {
            for x in [f.lo, f.hi] {
                let v = 3.0 * (x as f64).powi(2) + a as f64;
                assert!(v.abs() < d.threshold);
            }
            for x in [f.lo - 1, f.hi + 1] {
                let v = 3.0 * (x as f64).powi(2) + a as f64;
                assert!(v.abs() >= d.threshold);
            }
        }
    }

    #[test]
    fn ev_bound_examples() {
        let c = LongCurve::new([0, 2, 0, 0, 0]);
        let e = ev_bound_for_box(&c, 10, 0.0).unwrap();
        assert_eq!(e.norm, BigInt::from(200));
        let want = 10f64.powf(2.0 / 3.0) * 200f64.powf(-1.0 / 9.0) + 1.0;
        assert!((e.bound - want).abs() < 1e-12);
        let z = ev_bound_for_box(&LongCurve::new([0, 0, 0, 0, 0]), 1000, 0.05).unwrap();
        assert_eq!(z.norm, BigInt::from(1));
        assert!((z.bound - (100.0 + 1.0) * 1000f64.powf(0.05)).abs() < 1e-9);
        let big = ev_bound_for_box(&LongCurve::new([0, 1_000_000, 0, 0, 0]), 1000, 0.01).unwrap();
        assert!(big.large_quadratic);
        assert!(crate::arith::ln_abs(&big.norm) >= (3.0 + 6.0 * 0.01) * 1000f64.ln());
    }

    #[test]
    fn k_optimum_is_nine_halves() {
        for delta in [0.01, 0.1, 0.5] {
            let o = optimal_k(delta);
            assert!((o.k - 4.5).abs() < 1e-6, "{o:?}");
            assert!((o.exponent - (1.0 / 3.0 - delta / 9.0)).abs() < 1e-12);
        }
    }

    fn assert_sound(r: &CountReport) {
        assert!(r.is_sound(), "{r:#?}");
        if !r.constant_dependent {
            let (n, b) = (r.count().unwrap(), r.upper_bound.unwrap());
            assert!(b >= n as f64);
        }
    }

    #[test]
    fn pipeline_small_coefficients_use_repulsion() {
        let r = main_theorem_pipeline(&LongCurve::new([0, 0, 0, 0, 1]), 1000, 0.01, 4.5).unwrap();
        assert_eq!(r.branch, Branch::Repulsion);
        assert!(r.upper_bound.unwrap() >= r.count().unwrap() as f64);
        let d = r.pipeline.as_ref().unwrap();
        assert!(d.residual_b_within && d.residual_disc_within);
        assert_eq!(r.exponents.eta_role, EtaRole::Disc);
        assert_sound(&r);
    }

    #[test]
    fn pipeline_large_quadratic_branch() {
        let n = 100u64;
        let c = LongCurve::new([0, (n * n) as i64, 0, 3, -5]);
        let r = main_theorem_pipeline(&c, n, 0.01, 4.5).unwrap();
        assert_eq!(r.branch, Branch::LargeQuadraticCoefficient);
        assert!(r.constant_dependent);
        let e = ev_bound_for_box(&c, n, 0.01 / 4.5).unwrap();
        assert!((r.upper_bound.unwrap() - e.bound).abs() < 1e-12);
    }

    #[test]
    fn pipeline_large_a_is_fully_certified() {
        let c = LongCurve::new([0, 0, 0, -1_000_000_000, 7]);
        let r = main_theorem_pipeline(&c, 100, 0.01, 4.5).unwrap();
        assert!(r.pipeline.as_ref().unwrap().large_a);
        assert_eq!(r.branch, Branch::LargeSieve);
        assert!(!r.constant_dependent);
        assert_sound(&r);
    }

    #[test]
    fn pipeline_handles_a3_both_parities() {
        for a3 in [1i64, 2, -3, 4] {
            let c = LongCurve::new([0, 1, a3, -2, 3]);
            let r = main_theorem_pipeline(&c, 200, 0.01, 4.5).unwrap();
            assert!(r.pipeline.as_ref().unwrap().square_completed);
            assert_sound(&r);
        }
        assert!(matches!(
            main_theorem_pipeline(&LongCurve::new([1, 0, 0, 0, 1]), 100, 0.01, 4.5),
            Err(Error::UnsupportedForm(_))
        ));
    }

    #[test]
    fn arbitrary_box_ladder() {
        let c = LongCurve::new([0, 0, 0, 1, 1]);
        let r = arbitrary_box_pipeline(&c, &BoxSpec::square(50), 0.01).unwrap();
        assert!(r.pipeline.is_some());
        assert_eq!(r.ladder.as_ref().unwrap().routed_half, Some(50));

        let n = 10i128;
        let far = BoxSpec::new(n.pow(4) - 5, n.pow(4) + 5, -5, 5).unwrap();
        let r = arbitrary_box_pipeline(&c, &far, 0.01).unwrap();
        assert_eq!(r.branch, Branch::FarCentre);
        assert!(r.ladder.as_ref().unwrap().far_centre);

        let bx = BoxSpec::new(60, 80, 600, 620).unwrap();
        let r = arbitrary_box_pipeline(&c, &bx, 0.01).unwrap();
        assert!(r.hypotheses_met);
        assert_eq!(r.points.as_ref().unwrap(), &vec![(72, 611)]);
        assert_eq!(r.point_exponents.len(), 1);
        let p = &r.point_exponents[0];
        assert!((p.alpha - 72f64.ln() / 20f64.ln()).abs() < 1e-12);
        assert_sound(&r);

        let neg = LongCurve::new([0, 0, 0, -2, 1]);
        let r = arbitrary_box_pipeline(&neg, &BoxSpec::new(0, 20, 0, 20).unwrap(), 0.01).unwrap();
        assert_eq!(r.branch, Branch::HypothesesUnmet);
        assert!(!r.hypotheses_met);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn pipeline_is_sound(a2 in -5i64..5, a4 in -60i64..60, a6 in -60i64..60, n in 10u64..400) {
            let c = LongCurve::new([0, a2, 0, a4, a6]);
            proptest::prop_assume!(!c.discriminant().is_zero());
            let r = main_theorem_pipeline(&c, n, 0.01, 4.5).unwrap();
            proptest::prop_assert!(r.is_sound());
        }

        #[test]
        fn enumeration_is_symmetric(a in -80i64..80, b in -80i64..80, n in 1i128..300) {
            let r = enumerate_short(&short(a, b), &BoxSpec::square(n)).unwrap();
            let pts = r.points.unwrap();
            for &(x, y) in &pts {
                proptest::prop_assert!(pts.binary_search(&(x, -y)).is_ok());
            }
            proptest::prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn hasse_and_density(a in -1000i64..1000, b in -1000i64..1000, idx in 0usize..30) {
            let c = short(a, b);
            let p = primes_up_to(200)[idx + 13];
            match xresidues_mod_p(&c, p) {
                Ok(r) => {
                    proptest::prop_assert!((r.hasse_residual as f64) <= 2.0 * (p as f64).sqrt());
                    proptest::prop_assert!(4 * r.x_count <= 3 * p);
                    proptest::prop_assert!(
                        r.x_count as f64 <= (p as f64 + 1.0 + 2.0 * (p as f64).sqrt()) / 2.0 + 1.5
                    );
                }
                Err(e) => proptest::prop_assert_eq!(e, Error::BadReduction { p }),
            }
        }

        #[test]
        fn decomposition_covers(a in -4_000_000i64..4_000_000, n in 50i128..5000, mfrac in 0.0f64..1.0, eps in 0.001f64..0.1) {
            let m = ((n as f64 * mfrac) as i128).max(1);
            let d = gradient_decomposition(&short(a, 1), n, eps, m).unwrap();
            proptest::prop_assert!(d.covers_range());
            if d.hypotheses_met {
                proptest::prop_assert!(d.flat_intervals.iter().all(|f| f.within_cap));
            }
        }
    }
}
