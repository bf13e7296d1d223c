//! Exact group law, the doubling-limit canonical height, and its split into
//! local heights.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{decimal_digits, factorize, ln_abs, ord_p, to_f64};
use crate::curve_models::{LongCurve, ShortCurve};
use crate::error::{Error, Result};
use crate::lattice_modular::{
    associate_tau, bernoulli2, lambda_infty, point_to_u, SeriesControl, TauPoint,
};

/// A point of `E(Q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationalPoint {
    Infinity,
    Affine {
        #[serde(with = "crate::serde_big::rational")]
        x: BigRational,
        #[serde(with = "crate::serde_big::rational")]
        y: BigRational,
    },
}

impl RationalPoint {
    /// Checked constructor: the point must satisfy the curve equation exactly.
    pub fn new(curve: &ShortCurve, x: BigRational, y: BigRational) -> Result<Self> {
        if &y * &y != curve.rhs_rational(&x) {
            return Err(Error::InvalidInput(format!("({x}, {y}) is not on {curve}")));
        }
        Ok(RationalPoint::Affine { x, y })
    }

    pub fn integral(curve: &ShortCurve, x: i64, y: i64) -> Result<Self> {
        Self::new(
            curve,
            BigRational::from(BigInt::from(x)),
            BigRational::from(BigInt::from(y)),
        )
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, RationalPoint::Infinity)
    }

    pub fn is_integral(&self) -> bool {
        match self {
            RationalPoint::Infinity => false,
            RationalPoint::Affine { x, y } => x.is_integer() && y.is_integer(),
        }
    }

    pub fn x(&self) -> Option<&BigRational> {
        match self {
            RationalPoint::Infinity => None,
            RationalPoint::Affine { x, .. } => Some(x),
        }
    }

    pub fn on_curve(&self, curve: &ShortCurve) -> bool {
        match self {
            RationalPoint::Infinity => true,
            RationalPoint::Affine { x, y } => y * y == curve.rhs_rational(x),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            RationalPoint::Infinity => RationalPoint::Infinity,
            RationalPoint::Affine { x, y } => RationalPoint::Affine {
                x: x.clone(),
                y: -y,
            },
        }
    }
}

/// Chord-tangent addition.
pub fn group_add(curve: &ShortCurve, p: &RationalPoint, q: &RationalPoint) -> RationalPoint {
    let (x1, y1, x2, y2) = match (p, q) {
        (RationalPoint::Infinity, _) => return q.clone(),
        (_, RationalPoint::Infinity) => return p.clone(),
        (RationalPoint::Affine { x: x1, y: y1 }, RationalPoint::Affine { x: x2, y: y2 }) => {
            (x1, y1, x2, y2)
        }
    };
    let slope = if x1 == x2 {
        if (y1 + y2).is_zero() {
            return RationalPoint::Infinity;
        }
        let three = BigRational::from(BigInt::from(3));
        (three * x1 * x1 + BigRational::from(curve.a.clone())) / (y1 + y1)
    } else {
        (y2 - y1) / (x2 - x1)
    };
    let x3 = &slope * &slope - x1 - x2;
    let y3 = slope * (x1 - &x3) - y1;
    RationalPoint::Affine { x: x3, y: y3 }
}

/// `n P` by double-and-add; negative n negates.
pub fn group_mul(curve: &ShortCurve, p: &RationalPoint, n: i64) -> RationalPoint {
    let mut acc = RationalPoint::Infinity;
    let mut base = if n < 0 { p.neg() } else { p.clone() };
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            acc = group_add(curve, &acc, &base);
        }
        base = group_add(curve, &base, &base);
        k >>= 1;
    }
    acc
}

/// Torsion over Q has order at most 12.
pub fn is_torsion(curve: &ShortCurve, p: &RationalPoint) -> bool {
    let mut acc = p.clone();
    for _ in 0..12 {
        if acc.is_infinity() {
            return true;
        }
        acc = group_add(curve, &acc, p);
    }
    acc.is_infinity()
}

pub const DEFAULT_DIGIT_BUDGET: usize = 100_000;

/// `ĥ(P) = ½ lim 4^{-n} log max(|num x(2^n P)|, |den x(2^n P)|)`.
pub fn canonical_height_doubling(
    curve: &ShortCurve,
    p: &RationalPoint,
    n_max: u32,
    tol: f64,
) -> Result<f64> {
    canonical_height_doubling_with_budget(curve, p, n_max, tol, DEFAULT_DIGIT_BUDGET)
}

/// The doubling limit, tracking `2^n P` through `log|Z|`, the real value of
/// `x`, and the residues of `(X, Z)` modulo a power of the doubling resultant.
///
/// With `x = X/Z` in lowest terms, `x(2P) = φ(X,Z)/ψ(X,Z)` where
/// `φ = X^4 - 2AX^2Z^2 - 8BXZ^3 + A^2Z^4`, `ψ = 4Z(X^3 + AXZ^2 + BZ^3)`, and
/// `gcd(φ, ψ)` divides `R = 256 (4A^3 + 27B^2)^2`. Knowing `(X, Z)` modulo
/// `R^k` is therefore enough to cancel the common factor exactly for `k - 1`
/// more steps, while the sizes are carried as logarithms.
pub fn canonical_height_doubling_with_budget(
    curve: &ShortCurve,
    p: &RationalPoint,
    n_max: u32,
    tol: f64,
    digit_budget: usize,
) -> Result<f64> {
    if curve.is_singular() {
        return Err(Error::SingularCurve);
    }
    if !p.on_curve(curve) {
        return Err(Error::InvalidInput("point is not on the curve".into()));
    }
    let x0 = match p {
        RationalPoint::Infinity => return Ok(0.0),
        RationalPoint::Affine { x, .. } => x.clone(),
    };
    if is_torsion(curve, p) {
        return Ok(0.0);
    }
    let (a, b) = (&curve.a, &curve.b);
    let d = BigInt::from(4) * a * a * a + BigInt::from(27) * b * b;
    let res = BigInt::from(256) * &d * &d;
    let mut modulus = res.pow(n_max + 2);
    if decimal_digits(&modulus) > digit_budget {
        return Err(Error::PrecisionOverflow {
            budget: digit_budget,
        });
    }
    let mut xr = x0.numer().mod_floor(&modulus);
    let mut zr = x0.denom().mod_floor(&modulus);
    let mut log_z = ln_abs(x0.denom());
    let mut x = crate::arith::rational_to_f64(&x0);
    let (af, bf) = (to_f64(a), to_f64(b));
    let height = |log_z: f64, x: f64| log_z + x.abs().ln().max(0.0);
    // Each doubling moves the estimate by at most about K 4^{-n}.
    let k_bound = 0.5 * (ln_abs(&res) + 2.0 * af.abs().max(bf.abs()).max(1.0).ln() + 10.0);
    for n in 1..=n_max {
        let (x2, z2) = (&xr * &xr, &zr * &zr);
        let phi = &x2 * &x2 - BigInt::from(2) * a * &x2 * &z2 - BigInt::from(8) * b * &xr * &z2 * &zr
            + a * a * &z2 * &z2;
        let psi = BigInt::from(4) * &zr * (&x2 * &xr + a * &xr * &z2 + b * &z2 * &zr);
        let (phi, psi) = (phi.mod_floor(&modulus), psi.mod_floor(&modulus));
        let g = phi.gcd(&psi).gcd(&res);
        let fx = x * x * x + af * x + bf;
        if fx == 0.0 || !fx.is_finite() {
            return Err(Error::NonConvergence {
                max_terms: n as usize,
            });
        }
        log_z = 4f64.ln() + 4.0 * log_z + fx.abs().ln() - ln_abs(&g);
        let x4 = x * x * x * x - 2.0 * af * x * x - 8.0 * bf * x + af * af;
        x = x4 / (4.0 * fx);
        modulus = &modulus / &g;
        xr = (phi / &g).mod_floor(&modulus);
        zr = (psi / &g).mod_floor(&modulus);
        let est = 0.5 * height(log_z, x) / 4f64.powi(n as i32);
        if k_bound / 4f64.powi(n as i32) < tol {
            return Ok(est);
        }
    }
    Err(Error::NonConvergence {
        max_terms: n_max as usize,
    })
}

/// The same limit by exact rational doubling; usable only for a handful of steps.
pub fn canonical_height_exact_doubling(curve: &ShortCurve, p: &RationalPoint, n: u32) -> f64 {
    let mut q = p.clone();
    for _ in 0..n {
        q = group_add(curve, &q, &q);
    }
    match q {
        RationalPoint::Infinity => 0.0,
        RationalPoint::Affine { x, .. } => {
            0.5 * crate::arith::log_height(&x) / 4f64.powi(n as i32)
        }
    }
}

/// Second Bernoulli polynomial `x^2 - x + 1/6`.
#[derive(Debug, Clone, Copy, Default)]
pub struct B2Poly;

impl B2Poly {
    pub fn eval(x: f64) -> f64 {
        bernoulli2(x)
    }

    /// `[min, max]` of `B_2` on `[0, 1/2]`.
    pub fn range_on_half() -> (f64, f64) {
        (-1.0 / 12.0, 1.0 / 6.0)
    }
}

/// A model minimal at every prime, with the scaling `u` from the input model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalModel {
    pub curve: LongCurve,
    pub u: BigInt,
    pub b2: BigInt,
}

/// Integral model with the given `c4`, `c6`, if one exists.
fn model_from_c4c6(c4: &BigInt, c6: &BigInt) -> Option<(LongCurve, BigInt)> {
    let b2 = {
        let r = (-c6).mod_floor(&BigInt::from(12));
        if r > BigInt::from(6) {
            r - 12
        } else {
            r
        }
    };
    let div = |n: BigInt, d: i64| -> Option<BigInt> {
        let (q, r) = n.div_rem(&BigInt::from(d));
        r.is_zero().then_some(q)
    };
    let b4 = div(&b2 * &b2 - c4, 24)?;
    let b6 = div(-(&b2 * &b2 * &b2) + BigInt::from(36) * &b2 * &b4 - c6, 216)?;
    let a1 = b2.mod_floor(&BigInt::from(2));
    let a3 = b6.mod_floor(&BigInt::from(2));
    let a2 = div(&b2 - &a1, 4)?;
    let a4 = div(&b4 - &a1 * &a3, 2)?;
    let a6 = div(&b6 - &a3, 4)?;
    let curve = LongCurve { a1, a2, a3, a4, a6 };
    let (c4m, c6m) = curve.c_invariants();
    (c4m == *c4 && c6m == *c6).then_some((curve, b2))
}

/// Global minimal model of a short model (Kraus's conditions decide
/// integrality at 2 and 3).
pub fn minimal_model(curve: &ShortCurve) -> Result<MinimalModel> {
    if curve.is_singular() {
        return Err(Error::SingularCurve);
    }
    let mut c4 = BigInt::from(-48) * &curve.a;
    let mut c6 = BigInt::from(-864) * &curve.b;
    let mut u = BigInt::one();
    let disc = curve.discriminant();
    for (p, e) in factorize(&disc) {
        if e < 12 {
            continue;
        }
        let (p4, p6) = (p.pow(4), p.pow(6));
        loop {
            if !(&c4 % &p4).is_zero() || !(&c6 % &p6).is_zero() {
                break;
            }
            let (n4, n6) = (&c4 / &p4, &c6 / &p6);
            if model_from_c4c6(&n4, &n6).is_none() {
                break;
            }
            c4 = n4;
            c6 = n6;
            u *= &p;
        }
    }
    let (model, b2) = model_from_c4c6(&c4, &c6).ok_or_else(|| {
        Error::InvalidInput("no integral model for these invariants".into())
    })?;
    Ok(MinimalModel {
        curve: model,
        u,
        b2,
    })
}

impl MinimalModel {
    /// Image of a point of the short model: `x' = x/u^2 - b2/12`,
    /// `y' = (2y/u^3 - a1 x' - a3)/2`.
    pub fn map_point(&self, x: &BigRational, y: &BigRational) -> (BigRational, BigRational) {
        let u2 = BigRational::from(&self.u * &self.u);
        let u3 = &u2 * BigRational::from(self.u.clone());
        let xm = x / &u2 - BigRational::new(self.b2.clone(), BigInt::from(12));
        let two = BigRational::from(BigInt::from(2));
        let ym = (&two * y / u3
            - BigRational::from(self.curve.a1.clone()) * &xm
            - BigRational::from(self.curve.a3.clone()))
            / two;
        (xm, ym)
    }
}

fn ord_rat(r: &BigRational, p: &BigInt) -> Option<i64> {
    crate::arith::ord_p_rational(r, p)
}

/// Local height at p on a minimal model, for a point given on that model.
fn lambda_p_minimal(model: &LongCurve, disc_min: &BigInt, p: &BigInt, x: &BigRational, y: &BigRational) -> f64 {
    let lp = ln_abs(p);
    let r = |v: &BigInt| BigRational::from(v.clone());
    let n = ord_p(disc_min, p) as i64;
    let ordx = ord_rat(x, p).unwrap_or(i64::MAX);
    if ordx < 0 {
        // Non-integral at p: the point reduces to the identity.
        return 0.5 * (-ordx) as f64 * lp + n as f64 / 12.0 * lp;
    }
    let [b2, b4, b6, b8] = model.b_invariants();
    let (a1, a2, a3, a4) = (r(&model.a1), r(&model.a2), r(&model.a3), r(&model.a4));
    let three = BigRational::from(BigInt::from(3));
    let two = BigRational::from(BigInt::from(2));
    let fa = &three * x * x + &two * &a2 * x + &a4 - &a1 * y;
    let fb = &two * y + &a1 * x + &a3;
    let ord_or_inf = |v: &BigRational| ord_rat(v, p).unwrap_or(i64::MAX / 4);
    let oa = ord_or_inf(&fa);
    let ob = ord_or_inf(&fb);
    let corr = if oa <= 0 || ob <= 0 {
        0.0
    } else {
        let (c4, _) = model.c_invariants();
        if !c4.is_zero() && ord_p(&c4, p) == 0 {
            let m = (ob as f64).min(n as f64 / 2.0);
            -m * (n as f64 - m) / (2.0 * n as f64)
        } else {
            let fc = &three * x * x * x * x
                + r(&b2) * x * x * x
                + &three * r(&b4) * x * x
                + &three * r(&b6) * x
                + r(&b8);
            let oc = ord_or_inf(&fc);
            if oc >= 3 * ob {
                -(ob as f64) / 3.0
            } else {
                -(oc as f64) / 8.0
            }
        }
    };
    (corr + n as f64 / 12.0) * lp
}

/// A prime and its local height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalHeight {
    #[serde(with = "crate::serde_big::int")]
    pub p: BigInt,
    pub lambda_p: f64,
}

/// `λ_p(P)` for every prime p dividing `Δ_E`, for an integral point.
pub fn finite_local_heights(curve: &ShortCurve, p: &RationalPoint) -> Result<Vec<LocalHeight>> {
    if curve.is_singular() {
        return Err(Error::SingularCurve);
    }
    let (x, y) = match p {
        RationalPoint::Affine { x, y } if x.is_integer() && y.is_integer() => (x, y),
        _ => return Err(Error::InvalidInput("finite local heights need an integral point".into())),
    };
    if !p.on_curve(curve) {
        return Err(Error::InvalidInput("point is not on the curve".into()));
    }
    let min = minimal_model(curve)?;
    let disc_min = min.curve.discriminant();
    let (xm, ym) = min.map_point(x, y);
    let mut out: Vec<LocalHeight> = factorize(&curve.discriminant())
        .into_iter()
        .map(|(prime, _)| {
            let lambda_p = lambda_p_minimal(&min.curve, &disc_min, &prime, &xm, &ym);
            LocalHeight { p: prime, lambda_p }
        })
        .collect();
    out.sort_by(|a, b| a.p.cmp(&b.p));
    Ok(out)
}

/// Canonical height split into local pieces, with the oracle value beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightBreakdown {
    pub lambda_inf: f64,
    pub finite_parts: Vec<LocalHeight>,
    /// `(1/12) log|Δ_E|`.
    pub tate_bound: f64,
    pub total: f64,
    pub oracle: f64,
    pub normalization_offset: f64,
    /// `|total + offset log|Δ_E| - oracle|`.
    pub residual: f64,
    pub tau: Option<TauPoint>,
}

/// `λ_∞(P)` of a real point on a short model.
pub fn archimedean_height(curve: &ShortCurve, x: f64, ctl: &SeriesControl) -> Result<(f64, TauPoint)> {
    let j = curve.j_f64().ok_or(Error::SingularCurve)?;
    let assoc = associate_tau(j, ctl)?;
    let u = point_to_u(curve, &assoc.tau, x, ctl)?;
    Ok((lambda_infty(&assoc.tau, &u, ctl)?, assoc.tau))
}

const ORACLE_STEPS: u32 = 40;
const ORACLE_TOL: f64 = 1e-10;

/// `(λ_∞, [λ_p], τ)` without the oracle or offset.
pub fn local_parts(
    curve: &ShortCurve,
    p: &RationalPoint,
    ctl: &SeriesControl,
) -> Result<(f64, Vec<LocalHeight>, Option<TauPoint>)> {
    let x = match p {
        RationalPoint::Infinity => return Ok((0.0, vec![], None)),
        RationalPoint::Affine { x, .. } => crate::arith::rational_to_f64(x),
    };
    let finite = finite_local_heights(curve, p)?;
    let (linf, tau) = archimedean_height(curve, x, ctl)?;
    Ok((linf, finite, Some(tau)))
}

/// `λ_∞ + Σ λ_p`.
pub fn decomposed_total(curve: &ShortCurve, p: &RationalPoint, ctl: &SeriesControl) -> Result<f64> {
    let (linf, finite, _) = local_parts(curve, p, ctl)?;
    Ok(linf + finite.iter().map(|l| l.lambda_p).sum::<f64>())
}

/// Full breakdown against the doubling oracle, using the calibrated offset.
pub fn canonical_height_decomposed(
    curve: &ShortCurve,
    p: &RationalPoint,
    ctl: &SeriesControl,
) -> Result<HeightBreakdown> {
    let offset = normalization_calibration()?.offset;
    breakdown_with_offset(curve, p, ctl, offset)
}

pub fn breakdown_with_offset(
    curve: &ShortCurve,
    p: &RationalPoint,
    ctl: &SeriesControl,
    offset: f64,
) -> Result<HeightBreakdown> {
    if curve.is_singular() {
        return Err(Error::SingularCurve);
    }
    let log_disc = ln_abs(&curve.discriminant());
    let oracle = canonical_height_doubling(curve, p, ORACLE_STEPS, ORACLE_TOL)?;
    let (lambda_inf, finite_parts, tau) = local_parts(curve, p, ctl)?;
    let total = lambda_inf + finite_parts.iter().map(|l| l.lambda_p).sum::<f64>();
    let offset = if p.is_infinity() { 0.0 } else { offset };
    Ok(HeightBreakdown {
        lambda_inf,
        finite_parts,
        tate_bound: log_disc / 12.0,
        total,
        oracle,
        normalization_offset: offset,
        residual: (total + offset * log_disc - oracle).abs(),
        tau,
    })
}

/// Offset per unit `log|Δ_E|` between the local sum and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub offset: f64,
    pub std_dev: f64,
    pub samples: usize,
    pub curves: Vec<(i64, i64, i64, i64)>,
}

/// Twenty curves with small coefficients, each with a non-torsion integral point.
pub fn calibration_corpus() -> Vec<(ShortCurve, RationalPoint)> {
    let mut out = Vec::new();
    'outer: for b in 1i64..=50 {
        for a in -50i64..=50 {
            let curve = ShortCurve::new(a, b);
            if curve.is_singular() {
                continue;
            }
            for x in 0i64..=60 {
                let fx = curve.rhs(&BigInt::from(x));
                if let Some(y) = crate::arith::exact_sqrt(&fx) {
                    if y.is_zero() {
                        continue;
                    }
                    let pt = RationalPoint::integral(&curve, x, y.to_i64().unwrap()).unwrap();
                    if !is_torsion(&curve, &pt) {
                        out.push((curve, pt));
                        if out.len() == 20 {
                            break 'outer;
                        }
                        break;
                    }
                }
            }
            // Spread the corpus over different B.
            if out.len() as i64 >= b {
                break;
            }
        }
    }
    out
}

static CALIBRATION: OnceLock<std::result::Result<Calibration, String>> = OnceLock::new();

/// Measured once per process over [`calibration_corpus`].
pub fn normalization_calibration() -> Result<&'static Calibration> {
    CALIBRATION
        .get_or_init(|| measure_calibration(&SeriesControl::default()).map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| Error::InvalidInput(format!("calibration failed: {e}")))
}

pub fn measure_calibration(ctl: &SeriesControl) -> Result<Calibration> {
    let corpus = calibration_corpus();
    let mut ratios = Vec::with_capacity(corpus.len());
    let mut curves = Vec::new();
    for (curve, p) in &corpus {
        let oracle = canonical_height_doubling(curve, p, ORACLE_STEPS, ORACLE_TOL)?;
        let total = decomposed_total(curve, p, ctl)?;
        ratios.push((oracle - total) / ln_abs(&curve.discriminant()));
        let (x, y) = match p {
            RationalPoint::Affine { x, y } => (x.to_integer(), y.to_integer()),
            RationalPoint::Infinity => unreachable!(),
        };
        curves.push((
            curve.a.to_i64().unwrap(),
            curve.b.to_i64().unwrap(),
            x.to_i64().unwrap(),
            y.to_i64().unwrap(),
        ));
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(Calibration {
        offset: mean,
        std_dev: var.sqrt(),
        samples: ratios.len(),
        curves,
    })
}

/// Integer points on a short model with `|x| <= x_max`, both signs of y.
pub fn integral_points(curve: &ShortCurve, x_max: i64) -> Vec<RationalPoint> {
    let mut out = Vec::new();
    for x in -x_max..=x_max {
        if let Some(y) = crate::arith::exact_sqrt(&curve.rhs(&BigInt::from(x))) {
            let xr = BigRational::from(BigInt::from(x));
            out.push(RationalPoint::Affine {
                x: xr.clone(),
                y: BigRational::from(y.clone()),
            });
            if !y.is_zero() {
                out.push(RationalPoint::Affine {
                    x: xr,
                    y: BigRational::from(-y),
                });
            }
        }
    }
    out
}
