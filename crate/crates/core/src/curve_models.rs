//! Weierstrass models, their invariants, exact coordinate changes, and the
//! coefficient-norm threshold used to split the counting argument.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// y^2 = x^3 + A x + B with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShortCurve {
    pub a: BigInt,
    pub b: BigInt,
}

/// y^2 + a1 x y + a3 y = x^3 + a2 x^2 + a4 x + a6. No minimality assumed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LongCurve {
    pub a1: BigInt,
    pub a2: BigInt,
    pub a3: BigInt,
    pub a4: BigInt,
    pub a6: BigInt,
}

/// Either model, as read from user input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Curve {
    Short(ShortCurve),
    Long(LongCurve),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum JInvariant {
    Finite(#[serde(with = "crate::serde_big::rational")] BigRational),
    Singular,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invariants {
    #[serde(with = "crate::serde_big::int")]
    pub disc: BigInt,
    /// -A/27, the convention used throughout this crate. Only its sign is consumed.
    #[serde(with = "crate::serde_big::rational")]
    pub c4: BigRational,
    pub j: JInvariant,
}

impl ShortCurve {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>) -> Self {
        ShortCurve {
            a: a.into(),
            b: b.into(),
        }
    }

    /// -16(4A^3 + 27B^2)
    pub fn discriminant(&self) -> BigInt {
        let a3 = &self.a * &self.a * &self.a;
        let b2 = &self.b * &self.b;
        BigInt::from(-16) * (BigInt::from(4) * a3 + BigInt::from(27) * b2)
    }

    pub fn is_singular(&self) -> bool {
        self.discriminant().is_zero()
    }

    /// f(x) = x^3 + A x + B.
    pub fn rhs(&self, x: &BigInt) -> BigInt {
        x * x * x + &self.a * x + &self.b
    }

    pub fn rhs_rational(&self, x: &BigRational) -> BigRational {
        x * x * x + BigRational::from(self.a.clone()) * x + BigRational::from(self.b.clone())
    }

    /// j as an f64, or `None` for singular curves.
    pub fn j_f64(&self) -> Option<f64> {
        match invariants_of(self).j {
            JInvariant::Finite(j) => Some(crate::arith::rational_to_f64(&j)),
            JInvariant::Singular => None,
        }
    }

    pub fn to_long(&self) -> LongCurve {
        LongCurve {
            a1: BigInt::zero(),
            a2: BigInt::zero(),
            a3: BigInt::zero(),
            a4: self.a.clone(),
            a6: self.b.clone(),
        }
    }

    /// (A, B) when both fit in i128; used by the fast enumeration paths.
    pub fn small_coeffs(&self) -> Option<(i128, i128)> {
        Some((self.a.to_i128()?, self.b.to_i128()?))
    }
}

impl fmt::Display for ShortCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y^2 = x^3 + ({})x + ({})", self.a, self.b)
    }
}

impl LongCurve {
    pub fn new(a: [i64; 5]) -> Self {
        let [a1, a2, a3, a4, a6] = a.map(BigInt::from);
        LongCurve { a1, a2, a3, a4, a6 }
    }

    pub fn coeffs(&self) -> [&BigInt; 5] {
        [&self.a1, &self.a2, &self.a3, &self.a4, &self.a6]
    }

    /// x^3 + a2 x^2 + a4 x + a6.
    pub fn cubic(&self, x: &BigInt) -> BigInt {
        ((x + &self.a2) * x + &self.a4) * x + &self.a6
    }

    /// Left minus right side of the equation at an integer point.
    pub fn residual(&self, x: &BigInt, y: &BigInt) -> BigInt {
        y * y + &self.a1 * x * y + &self.a3 * y - self.cubic(x)
    }

    pub fn b_invariants(&self) -> [BigInt; 4] {
        let (a1, a2, a3, a4, a6) = (&self.a1, &self.a2, &self.a3, &self.a4, &self.a6);
        let b2 = a1 * a1 + BigInt::from(4) * a2;
        let b4 = BigInt::from(2) * a4 + a1 * a3;
        let b6 = a3 * a3 + BigInt::from(4) * a6;
        let b8 = a1 * a1 * a6 + BigInt::from(4) * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4;
        [b2, b4, b6, b8]
    }

    pub fn c_invariants(&self) -> (BigInt, BigInt) {
        let [b2, b4, b6, _] = self.b_invariants();
        let c4 = &b2 * &b2 - BigInt::from(24) * &b4;
        let c6 = -(&b2 * &b2 * &b2) + BigInt::from(36) * &b2 * &b4 - BigInt::from(216) * &b6;
        (c4, c6)
    }

    pub fn discriminant(&self) -> BigInt {
        let [b2, b4, b6, b8] = self.b_invariants();
        -(&b2 * &b2 * &b8) - BigInt::from(8) * &b4 * &b4 * &b4 - BigInt::from(27) * &b6 * &b6
            + BigInt::from(9) * &b2 * &b4 * &b6
    }

    /// The short model when a1 = a2 = a3 = 0.
    pub fn as_short(&self) -> Option<ShortCurve> {
        (self.a1.is_zero() && self.a2.is_zero() && self.a3.is_zero())
            .then(|| ShortCurve::new(self.a4.clone(), self.a6.clone()))
    }
}

impl fmt::Display for LongCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "y^2 + ({})xy + ({})y = x^3 + ({})x^2 + ({})x + ({})",
            self.a1, self.a3, self.a2, self.a4, self.a6
        )
    }
}

impl Curve {
    pub fn to_long(&self) -> LongCurve {
        match self {
            Curve::Short(s) => s.to_long(),
            Curve::Long(l) => l.clone(),
        }
    }

    /// Short model if the curve already is one (long models with a1=a2=a3=0 included).
    pub fn as_short(&self) -> Option<ShortCurve> {
        match self {
            Curve::Short(s) => Some(s.clone()),
            Curve::Long(l) => l.as_short(),
        }
    }

    /// Parse `{"form":"short","A":"-27","B":"783"}` or
    /// `{"form":"long","a":["0","1","0","0","1"]}`. Coefficients may be
    /// decimal strings or JSON integers.
    pub fn from_json(s: &str) -> Result<Curve> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("curve JSON: {e}")))?;
        Curve::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Curve> {
        let form = v
            .get("form")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidInput("curve JSON needs a \"form\" field".into()))?;
        match form {
            "short" => {
                let a = parse_big(v.get("A"), "A")?;
                let b = parse_big(v.get("B"), "B")?;
                Ok(Curve::Short(ShortCurve { a, b }))
            }
            "long" => {
                let arr = v
                    .get("a")
                    .and_then(Value::as_array)
                    .filter(|a| a.len() == 5)
                    .ok_or_else(|| Error::InvalidInput("long form needs \"a\": [a1,a2,a3,a4,a6]".into()))?;
                let c: Vec<BigInt> = arr
                    .iter()
                    .enumerate()
                    .map(|(i, x)| parse_big(Some(x), &format!("a[{i}]")))
                    .collect::<Result<_>>()?;
                Ok(Curve::Long(LongCurve {
                    a1: c[0].clone(),
                    a2: c[1].clone(),
                    a3: c[2].clone(),
                    a4: c[3].clone(),
                    a6: c[4].clone(),
                }))
            }
            other => Err(Error::InvalidInput(format!("unknown curve form {other:?}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Curve::Short(s) => serde_json::json!({
                "form": "short", "A": s.a.to_string(), "B": s.b.to_string()
            }),
            Curve::Long(l) => serde_json::json!({
                "form": "long",
                "a": l.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>()
            }),
        }
    }
}

fn parse_big(v: Option<&Value>, name: &str) -> Result<BigInt> {
    let v = v.ok_or_else(|| Error::InvalidInput(format!("missing coefficient {name}")))?;
    let s = match v {
        Value::String(s) => s.trim().to_string(),
        Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
        _ => return Err(Error::InvalidInput(format!("coefficient {name} must be an integer"))),
    };
    s.parse::<BigInt>()
        .map_err(|_| Error::InvalidInput(format!("coefficient {name} is not an integer: {s:?}")))
}

/// Discriminant, c4 and j of a short model, in exact arithmetic.
pub fn invariants_of(curve: &ShortCurve) -> Invariants {
    let disc = curve.discriminant();
    let c4 = BigRational::new(-curve.a.clone(), BigInt::from(27));
    let j = if disc.is_zero() {
        JInvariant::Singular
    } else {
        let four_a = BigInt::from(4) * &curve.a;
        let num = BigInt::from(-1728) * &four_a * &four_a * &four_a;
        JInvariant::Finite(BigRational::new(num, disc.clone()))
    };
    Invariants { disc, c4, j }
}

/// Axis-aligned integer box [x_lo, x_hi] x [y_lo, y_hi].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub x_lo: i128,
    pub x_hi: i128,
    pub y_lo: i128,
    pub y_hi: i128,
}

impl BoxSpec {
    pub fn new(x_lo: i128, x_hi: i128, y_lo: i128, y_hi: i128) -> Result<Self> {
        if x_lo > x_hi || y_lo > y_hi {
            return Err(Error::InvalidInput(format!(
                "empty box [{x_lo},{x_hi}]x[{y_lo},{y_hi}]"
            )));
        }
        Ok(BoxSpec { x_lo, x_hi, y_lo, y_hi })
    }

    /// [-n, n]^2.
    pub fn square(n: i128) -> Self {
        BoxSpec {
            x_lo: -n,
            x_hi: n,
            y_lo: -n,
            y_hi: n,
        }
    }

    pub fn side(&self) -> i128 {
        (self.x_hi - self.x_lo).max(self.y_hi - self.y_lo)
    }

    /// Integer centre; floor of the midpoint on odd sides.
    pub fn centre(&self) -> (i128, i128) {
        (
            (self.x_lo + self.x_hi).div_euclid(2),
            (self.y_lo + self.y_hi).div_euclid(2),
        )
    }

    pub fn contains(&self, x: i128, y: i128) -> bool {
        (self.x_lo..=self.x_hi).contains(&x) && (self.y_lo..=self.y_hi).contains(&y)
    }

    pub fn shifted(&self, dx: i128, dy: i128) -> Self {
        BoxSpec {
            x_lo: self.x_lo + dx,
            x_hi: self.x_hi + dx,
            y_lo: self.y_lo + dy,
            y_hi: self.y_hi + dy,
        }
    }

    /// Parse `{"x":[lo,hi],"y":[lo,hi]}` or the flat `[x_lo,x_hi,y_lo,y_hi]`.
    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("box JSON: {e}")))?;
        let num = |v: &Value| -> Result<i128> {
            match v {
                Value::Number(n) => n
                    .as_i64()
                    .map(i128::from)
                    .ok_or_else(|| Error::InvalidInput("box bounds must be integers".into())),
                Value::String(s) => s
                    .parse::<i128>()
                    .map_err(|_| Error::InvalidInput(format!("bad box bound {s:?}"))),
                _ => Err(Error::InvalidInput("box bounds must be integers".into())),
            }
        };
        let pair = |v: Option<&Value>| -> Result<(i128, i128)> {
            let a = v
                .and_then(Value::as_array)
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::InvalidInput("box needs \"x\":[lo,hi] and \"y\":[lo,hi]".into()))?;
            Ok((num(&a[0])?, num(&a[1])?))
        };
        match &v {
            Value::Array(a) if a.len() == 4 => {
                BoxSpec::new(num(&a[0])?, num(&a[1])?, num(&a[2])?, num(&a[3])?)
            }
            Value::Object(_) => {
                let (x_lo, x_hi) = pair(v.get("x"))?;
                let (y_lo, y_hi) = pair(v.get("y"))?;
                BoxSpec::new(x_lo, x_hi, y_lo, y_hi)
            }
            _ => Err(Error::InvalidInput("unrecognised box format".into())),
        }
    }
}

/// X = x_scale x + x_shift, Y = y_scale y + y_shift.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineChange {
    #[serde(with = "crate::serde_big::rational")]
    pub x_scale: BigRational,
    #[serde(with = "crate::serde_big::rational")]
    pub x_shift: BigRational,
    #[serde(with = "crate::serde_big::rational")]
    pub y_scale: BigRational,
    #[serde(with = "crate::serde_big::rational")]
    pub y_shift: BigRational,
}

impl AffineChange {
    pub fn identity() -> Self {
        Self::from_ints(1, 0, 1, 0)
    }

    pub fn from_ints(xs: i64, xt: i64, ys: i64, yt: i64) -> Self {
        let r = |v: i64| BigRational::from(BigInt::from(v));
        AffineChange {
            x_scale: r(xs),
            x_shift: r(xt),
            y_scale: r(ys),
            y_shift: r(yt),
        }
    }

    pub fn new(
        x_scale: BigRational,
        x_shift: BigRational,
        y_scale: BigRational,
        y_shift: BigRational,
    ) -> Result<Self> {
        if x_scale.is_zero() || y_scale.is_zero() {
            return Err(Error::InvalidInput("affine change with zero scale".into()));
        }
        Ok(AffineChange {
            x_scale,
            x_shift,
            y_scale,
            y_shift,
        })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn apply(&self, x: &BigRational, y: &BigRational) -> (BigRational, BigRational) {
        (
            &self.x_scale * x + &self.x_shift,
            &self.y_scale * y + &self.y_shift,
        )
    }

    pub fn apply_int(&self, x: &BigInt, y: &BigInt) -> (BigRational, BigRational) {
        self.apply(&BigRational::from(x.clone()), &BigRational::from(y.clone()))
    }

    pub fn inverse(&self) -> Self {
        let xs = self.x_scale.recip();
        let ys = self.y_scale.recip();
        AffineChange {
            x_shift: -(&self.x_shift * &xs),
            y_shift: -(&self.y_shift * &ys),
            x_scale: xs,
            y_scale: ys,
        }
    }

    /// `self` after `first`: p -> self(first(p)).
    pub fn after(&self, first: &AffineChange) -> Self {
        AffineChange {
            x_scale: &self.x_scale * &first.x_scale,
            x_shift: &self.x_scale * &first.x_shift + &self.x_shift,
            y_scale: &self.y_scale * &first.y_scale,
            y_shift: &self.y_scale * &first.y_shift + &self.y_shift,
        }
    }
}

/// Rewrite a model with a1 = 0 as a short model with integer coefficients.
///
/// With a3 = 0 this is X = 9x + 3a2, Y = 27y; with a3 != 0 the standard
/// X = 36x + 3b2, Y = 108(2y + a3) is used. Integral points map to integral points.
pub fn to_short_form(curve: &LongCurve) -> Result<(ShortCurve, AffineChange)> {
    if !curve.a1.is_zero() {
        return Err(Error::UnsupportedForm(
            "a1 != 0: the shear Y = y + a1 x / 2 distorts the box".into(),
        ));
    }
    if let Some(short) = curve.as_short() {
        return Ok((short, AffineChange::identity()));
    }
    let (c4, c6) = curve.c_invariants();
    let r = |v: BigInt| BigRational::from(v);
    if curve.a3.is_zero() {
        // c4 = 16(C^2 - 3D), c6 = 32(-2C^3 + 9CD - 27F) when a1 = a3 = 0.
        let a = BigInt::from(-27) * &c4 / BigInt::from(16);
        let b = BigInt::from(-54) * &c6 / BigInt::from(64);
        let change = AffineChange::new(
            r(BigInt::from(9)),
            r(BigInt::from(3) * &curve.a2),
            r(BigInt::from(27)),
            BigRational::zero(),
        )?;
        Ok((ShortCurve { a, b }, change))
    } else {
        let [b2, ..] = curve.b_invariants();
        let a = BigInt::from(-27) * &c4;
        let b = BigInt::from(-54) * &c6;
        let change = AffineChange::new(
            r(BigInt::from(36)),
            r(BigInt::from(3) * b2),
            r(BigInt::from(216)),
            r(BigInt::from(108) * &curve.a3),
        )?;
        Ok((ShortCurve { a, b }, change))
    }
}

/// Move the box centre to the origin by x = X + x0, y = Y + y0.
///
/// Returns the pulled-back model (a3 picks up 2*y0), the shifted box and the
/// change (x, y) -> (X, Y). The shifted box is exact, so it holds exactly the
/// images of the original box's integral points; on odd sides it is off
/// centre by half a unit.
pub fn translate_box_to_origin(
    curve: &LongCurve,
    bx: &BoxSpec,
) -> Result<(LongCurve, BoxSpec, AffineChange)> {
    if !curve.a1.is_zero() {
        return Err(Error::UnsupportedForm("a1 != 0".into()));
    }
    let (x0, y0) = bx.centre();
    if x0 == 0 && y0 == 0 {
        return Ok((curve.clone(), *bx, AffineChange::identity()));
    }
    let (bx0, by0) = (BigInt::from(x0), BigInt::from(y0));
    let LongCurve { a1, a2, a3, a4, .. } = curve;
    let three = BigInt::from(3);
    let new = LongCurve {
        a1: a1.clone(),
        a2: &three * &bx0 + a2,
        a3: BigInt::from(2) * &by0 + a3,
        a4: &three * &bx0 * &bx0 + BigInt::from(2) * a2 * &bx0 + a4,
        a6: curve.cubic(&bx0) - &by0 * &by0 - a3 * &by0,
    };
    let change = AffineChange::new(
        BigRational::one(),
        BigRational::from(-bx0),
        BigRational::one(),
        BigRational::from(-by0),
    )?;
    Ok((new, bx.shifted(-x0, -y0), change))
}

/// Max modulus of the coefficients of the defining polynomial (including
/// the unit coefficients of y^2 and x^3).
pub trait CoefficientNorm {
    fn coefficient_norm(&self) -> BigInt;
}

impl CoefficientNorm for ShortCurve {
    fn coefficient_norm(&self) -> BigInt {
        [BigInt::one(), self.a.abs(), self.b.abs()]
            .into_iter()
            .max()
            .unwrap()
    }
}

impl CoefficientNorm for LongCurve {
    fn coefficient_norm(&self) -> BigInt {
        self.coeffs()
            .iter()
            .map(|c| c.abs())
            .chain(std::iter::once(BigInt::one()))
            .max()
            .unwrap()
    }
}

impl CoefficientNorm for Curve {
    fn coefficient_norm(&self) -> BigInt {
        match self {
            Curve::Short(s) => s.coefficient_norm(),
            Curve::Long(l) => l.coefficient_norm(),
        }
    }
}

pub fn coefficient_norm<C: CoefficientNorm + ?Sized>(c: &C) -> BigInt {
    c.coefficient_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeathBrownBranch {
    /// C(Q, N) <= d^2.
    CountAtMostDSquared,
    /// ||F|| << N^{d(d+1)(d+2)/2}.
    NormBounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeathBrownReport {
    pub d: u32,
    pub threshold_exponent: u32,
    pub branch: HeathBrownBranch,
    /// d^2 when the count branch applies.
    pub count_bound: Option<u32>,
    /// log10(||F|| / N^e); the ratio itself overflows f64 quickly.
    pub log10_ratio: f64,
    /// Exponent k in |disc| << N^k implied by the norm branch (d = 3 only).
    pub disc_exponent: Option<u32>,
}

/// Which disjunct of the norm/count dichotomy applies, with implied constant 1.
pub fn heath_brown_case(norm: &BigInt, n: u64, d: u32) -> Result<HeathBrownReport> {
    if d < 1 || n < 1 {
        return Err(Error::InvalidInput("heath_brown_case needs d >= 1, N >= 1".into()));
    }
    let e = d * (d + 1) * (d + 2) / 2;
    let threshold = BigInt::from(n).pow(e);
    let count_branch = norm.abs() > threshold;
    let log10_ratio = (crate::arith::ln_abs(norm) - e as f64 * (n as f64).ln()) / std::f64::consts::LN_10;
    Ok(HeathBrownReport {
        d,
        threshold_exponent: e,
        branch: if count_branch {
            HeathBrownBranch::CountAtMostDSquared
        } else {
            HeathBrownBranch::NormBounded
        },
        count_bound: count_branch.then_some(d * d),
        log10_ratio,
        // |disc| << ||E||^6 for a cubic model.
        disc_exponent: (d == 3).then_some(6 * e),
    })
}
