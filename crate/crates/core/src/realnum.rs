//! Certified real arithmetic.
//!
//! A [`Real`] is a closed interval `[lo/2^p, hi/2^p]` with big-integer
//! endpoints. Every operation rounds its lower endpoint down and its upper
//! endpoint up, so the true value always lies inside the interval and a
//! comparison that separates two intervals is a proof.
//!
//! [`Power`] compares quantities of the form `base^exponent` symbolically,
//! which is how bounds like `exp(5^{ℓ⁴}·…)` are handled without ever
//! materialising them.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Working precision used when callers do not pick one.
pub const DEFAULT_PREC: u32 = 192;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Real {
    lo: BigInt,
    hi: BigInt,
    prec: u32,
}

fn pow2(p: u32) -> BigInt {
    BigInt::one() << p as usize
}

fn floor_shift(x: &BigInt, p: u32) -> BigInt {
    x.div_floor(&pow2(p))
}

fn ceil_shift(x: &BigInt, p: u32) -> BigInt {
    -((-x).div_floor(&pow2(p)))
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

impl Real {
    pub fn from_int(n: &BigInt, prec: u32) -> Self {
        let v = n << prec as usize;
        Self { lo: v.clone(), hi: v, prec }
    }

    pub fn from_i64(n: i64, prec: u32) -> Self {
        Self::from_int(&BigInt::from(n), prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        let scaled = r.numer() << prec as usize;
        Self {
            lo: scaled.div_floor(r.denom()),
            hi: ceil_div(&scaled, r.denom()),
            prec,
        }
    }

    /// Enclosure of an `f64` (exact: every finite double is dyadic).
    pub fn from_f64(x: f64, prec: u32) -> Self {
        let r = BigRational::from_float(x).expect("finite float");
        Self::from_rational(&r, prec)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn lower(&self) -> BigRational {
        BigRational::new(self.lo.clone(), pow2(self.prec))
    }

    pub fn upper(&self) -> BigRational {
        BigRational::new(self.hi.clone(), pow2(self.prec))
    }

    /// Interval width as a rational.
    pub fn width(&self) -> BigRational {
        BigRational::new(&self.hi - &self.lo, pow2(self.prec))
    }

    pub fn mid_f64(&self) -> f64 {
        let mid = BigRational::new(&self.lo + &self.hi, pow2(self.prec + 1));
        mid.to_f64().unwrap_or(f64::NAN)
    }

    fn check(&self, other: &Real) {
        assert_eq!(self.prec, other.prec, "mixed precisions");
    }

    pub fn add(&self, other: &Real) -> Real {
        self.check(other);
        Real { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi, prec: self.prec }
    }

    pub fn sub(&self, other: &Real) -> Real {
        self.check(other);
        Real { lo: &self.lo - &other.hi, hi: &self.hi - &other.lo, prec: self.prec }
    }

    pub fn neg(&self) -> Real {
        Real { lo: -&self.hi, hi: -&self.lo, prec: self.prec }
    }

    pub fn mul(&self, other: &Real) -> Real {
        self.check(other);
        let c = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let min = c.iter().min().unwrap();
        let max = c.iter().max().unwrap();
        Real { lo: floor_shift(min, self.prec), hi: ceil_shift(max, self.prec), prec: self.prec }
    }

    pub fn mul_int(&self, n: &BigInt) -> Real {
        let (a, b) = (&self.lo * n, &self.hi * n);
        if n.is_negative() {
            Real { lo: b, hi: a, prec: self.prec }
        } else {
            Real { lo: a, hi: b, prec: self.prec }
        }
    }

    pub fn mul_rational(&self, r: &BigRational) -> Real {
        self.mul(&Real::from_rational(r, self.prec))
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn recip(&self) -> Result<Real> {
        if self.contains_zero() {
            return Err(Error::Domain("reciprocal of an interval containing 0".into()));
        }
        let one = pow2(2 * self.prec);
        // 1/x is decreasing on each sign component.
        Ok(Real {
            lo: one.div_floor(&self.hi),
            hi: ceil_div(&one, &self.lo),
            prec: self.prec,
        })
    }

    pub fn div(&self, other: &Real) -> Result<Real> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn sqrt(&self) -> Result<Real> {
        if self.lo.is_negative() {
            return Err(Error::Domain("sqrt of a possibly negative interval".into()));
        }
        let lo = (&self.lo << self.prec as usize).sqrt();
        let hi_sq = &self.hi << self.prec as usize;
        let mut hi = hi_sq.sqrt();
        if &hi * &hi < hi_sq {
            hi += 1;
        }
        Ok(Real { lo, hi, prec: self.prec })
    }

    pub fn powi(&self, n: u32) -> Real {
        let mut acc = Real::from_i64(1, self.prec);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Natural logarithm of a positive interval.
    pub fn ln(&self) -> Result<Real> {
        if !self.lo.is_positive() {
            return Err(Error::Domain("logarithm of a non-positive interval".into()));
        }
        let (lo, _) = ln_dyadic(self.lo.magnitude(), self.prec, self.prec);
        let (_, hi) = ln_dyadic(self.hi.magnitude(), self.prec, self.prec);
        Ok(Real { lo, hi, prec: self.prec })
    }

    pub fn ln_int(n: &BigInt, prec: u32) -> Result<Real> {
        Real::from_int(n, prec).ln()
    }

    pub fn ln_rational(r: &BigRational, prec: u32) -> Result<Real> {
        Real::from_rational(r, prec).ln()
    }

    /// Endpoints on a common denominator, so that values computed at
    /// different working precisions compare exactly.
    fn aligned(&self, other: &Real) -> (BigInt, BigInt, BigInt, BigInt) {
        use std::cmp::Ordering::*;
        match self.prec.cmp(&other.prec) {
            Equal => (self.lo.clone(), self.hi.clone(), other.lo.clone(), other.hi.clone()),
            Less => {
                let s = other.prec - self.prec;
                (&self.lo << s, &self.hi << s, other.lo.clone(), other.hi.clone())
            }
            Greater => {
                let s = self.prec - other.prec;
                (self.lo.clone(), self.hi.clone(), &other.lo << s, &other.hi << s)
            }
        }
    }

    /// Certified comparison: `Some` only when the intervals are disjoint
    /// (or both collapse to the same point).
    pub fn certified_cmp(&self, other: &Real) -> Option<Ordering> {
        let (alo, ahi, blo, bhi) = self.aligned(other);
        if ahi < blo {
            Some(Ordering::Less)
        } else if alo > bhi {
            Some(Ordering::Greater)
        } else if alo == ahi && blo == bhi && alo == blo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    pub fn certainly_le(&self, other: &Real) -> bool {
        let (_, ahi, blo, _) = self.aligned(other);
        ahi <= blo
    }

    pub fn certainly_lt(&self, other: &Real) -> bool {
        let (_, ahi, blo, _) = self.aligned(other);
        ahi < blo
    }

    /// Decimal rendering with `digits` significant digits, returned only if
    /// both endpoints round to the same string.
    pub fn to_sci(&self, digits: usize) -> Option<String> {
        let a = sci_string(&self.lower(), digits);
        let b = sci_string(&self.upper(), digits);
        (a == b).then_some(a)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_sci(17) {
            Some(s) => write!(f, "{s}"),
            None => write!(f, "[{:e}, {:e}]", self.lower().to_f64().unwrap_or(f64::NAN), self.upper().to_f64().unwrap_or(f64::NAN)),
        }
    }
}

/// Round-half-up scientific notation of a rational with `digits`
/// significant digits, e.g. `1.2345e3`.
pub fn sci_string(x: &BigRational, digits: usize) -> String {
    assert!(digits >= 1);
    if x.is_zero() {
        return "0".into();
    }
    let sign = if x.is_negative() { "-" } else { "" };
    let ax = x.abs();
    let ten = BigInt::from(10);
    // Estimate the decimal exponent, then correct it.
    let est = (ax.numer().bits() as f64 - ax.denom().bits() as f64) * std::f64::consts::LOG10_2;
    let mut e10 = est.floor() as i64;
    let scale = |e: i64| -> BigRational {
        if e >= 0 {
            BigRational::from_integer(num_traits::pow(ten.clone(), e as usize))
        } else {
            BigRational::new(BigInt::one(), num_traits::pow(ten.clone(), (-e) as usize))
        }
    };
    loop {
        let s = &ax / scale(e10);
        if s >= BigRational::from_integer(ten.clone()) {
            e10 += 1;
        } else if s < BigRational::one() {
            e10 -= 1;
        } else {
            break;
        }
    }
    let shift = digits as i64 - 1 - e10;
    let scaled = &ax * scale(shift);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut m = (scaled + half).floor().to_integer();
    let limit = num_traits::pow(ten.clone(), digits);
    if m >= limit {
        m /= &ten;
        e10 += 1;
    }
    let s = m.to_string();
    let (head, tail) = s.split_at(1);
    if tail.is_empty() {
        format!("{sign}{head}e{e10}")
    } else {
        format!("{sign}{head}.{tail}e{e10}")
    }
}

/// `ln(m / 2^p)` enclosed as `(lo, hi)` scaled by `2^out`.
fn ln_dyadic(m: &BigUint, p: u32, out: u32) -> (BigInt, BigInt) {
    debug_assert!(!m.is_zero());
    let b = m.bits() as i64;
    let e = b - 1 - p as i64;
    let guard = 72 + (64 - e.unsigned_abs().leading_zeros());
    let w = out + guard;
    let m = BigInt::from_biguint(Sign::Plus, m.clone());
    // y = m / 2^{b-1} ∈ [1, 2), truncated to w fractional bits.
    let shift = w as i64 - (b - 1);
    let y = if shift >= 0 { m << shift as usize } else { m >> (-shift) as usize };
    let (ln_y, err_y) = ln_fixed_1_2(&y, w);
    let (ln2, err2) = ln2_fixed(w);
    let total = ln_y + &ln2 * e;
    // +2 ulps for truncating y.
    let err = BigInt::from(err_y + 2) + BigInt::from(err2) * BigInt::from(e.unsigned_abs());
    let drop = w - out;
    (floor_shift(&(&total - &err), drop), ceil_shift(&(&total + &err), drop))
}

/// `ln(y / 2^w)` for `y/2^w ∈ [1, 2)` via `2·atanh((y−1)/(y+1))`.
/// Returns the fixed-point value and an error bound in ulps.
fn ln_fixed_1_2(y: &BigInt, w: u32) -> (BigInt, u64) {
    let one = pow2(w);
    let z = ((y - &one) << w as usize).div_floor(&(y + &one));
    atanh_times_two(&z, w)
}

fn ln2_fixed(w: u32) -> (BigInt, u64) {
    let z = pow2(w).div_floor(&BigInt::from(3));
    atanh_times_two(&z, w)
}

fn atanh_times_two(z: &BigInt, w: u32) -> (BigInt, u64) {
    let z2 = (z * z) >> w as usize;
    let mut power = z.clone();
    let mut sum = BigInt::zero();
    let mut terms: u64 = 0;
    let mut j: u64 = 0;
    while !power.is_zero() {
        sum += &power / BigInt::from(2 * j + 1);
        power = (&power * &z2) >> w as usize;
        j += 1;
        terms += 1;
    }
    (sum << 1, 8 * terms + 16)
}

/// A positive quantity `base^exponent` compared symbolically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Power {
    pub base: BigUint,
    pub exponent: BigRational,
}

impl Power {
    pub fn new(base: impl Into<BigUint>, exponent: BigRational) -> Result<Self> {
        let base = base.into();
        if base.is_zero() {
            return Err(Error::Domain("power base must be positive".into()));
        }
        Ok(Self { base, exponent })
    }

    /// Rewrite with the base replaced by its primitive root (`25^x → 5^{2x}`).
    pub fn reduced(&self) -> Power {
        if self.base <= BigUint::one() {
            return Power { base: BigUint::one(), exponent: BigRational::zero() };
        }
        let bits = self.base.bits() as u32;
        for e in (2..=bits).rev() {
            let r = self.base.nth_root(e);
            if num_traits::pow(r.clone(), e as usize) == self.base {
                return Power {
                    base: r,
                    exponent: &self.exponent * BigRational::from_integer(BigInt::from(e)),
                }
                .reduced();
            }
        }
        self.clone()
    }

    pub fn sqrt(&self) -> Power {
        Power {
            base: self.base.clone(),
            exponent: &self.exponent / BigRational::from_integer(BigInt::from(2)),
        }
    }

    /// `ln(self)` as a certified interval.
    pub fn ln(&self, prec: u32) -> Result<Real> {
        let lb = Real::ln_int(&BigInt::from(self.base.clone()), prec)?;
        Ok(lb.mul_rational(&self.exponent))
    }

    /// Exact comparison. Equal reduced bases compare exponents; distinct
    /// reduced bases can only agree when both sides equal 1, otherwise the
    /// logarithms are separated by raising precision.
    pub fn compare(&self, other: &Power) -> Result<Ordering> {
        let a = self.reduced();
        let b = other.reduced();
        if a.base == b.base {
            return Ok(a.exponent.cmp(&b.exponent));
        }
        if a.exponent.is_zero() && b.exponent.is_zero() {
            return Ok(Ordering::Equal);
        }
        let mut prec = 128;
        while prec <= 1 << 16 {
            if let Some(o) = a.ln(prec)?.certified_cmp(&b.ln(prec)?) {
                return Ok(o);
            }
            prec *= 2;
        }
        Err(Error::Resource("could not separate powers".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn close(r: &Real, x: f64) -> bool {
        (r.mid_f64() - x).abs() < 1e-12 * x.abs().max(1.0)
    }

    #[test]
    fn ln_of_small_values() {
        for (n, v) in [(2i64, std::f64::consts::LN_2), (3, 3f64.ln()), (10, 10f64.ln()), (1, 0.0)] {
            let r = Real::ln_int(&BigInt::from(n), 128).unwrap();
            assert!(close(&r, v), "{n}: {}", r.mid_f64());
            assert!(r.lower() <= r.upper());
        }
        let r = Real::ln_rational(&rat(1, 7), 128).unwrap();
        assert!(close(&r, (1.0f64 / 7.0).ln()));
    }

    #[test]
    fn ln_encloses_known_digits() {
        // ln 2 = 0.69314718055994530941723212145817656807...
        let r = Real::ln_int(&BigInt::from(2), 200).unwrap();
        assert_eq!(r.to_sci(30).unwrap(), "6.93147180559945309417232121458e-1");
        let w = r.width().to_f64().unwrap();
        assert!(w < 1e-55, "width {w}");
    }

    #[test]
    fn ring_ops_enclose() {
        let p = 96;
        let a = Real::from_rational(&rat(1, 3), p);
        let b = Real::from_rational(&rat(-2, 7), p);
        let prod = a.mul(&b);
        assert!(prod.lower() <= rat(-2, 21) && rat(-2, 21) <= prod.upper());
        let q = a.div(&b).unwrap();
        assert!(q.lower() <= rat(-7, 6) && rat(-7, 6) <= q.upper());
        let s = Real::from_i64(2, p).sqrt().unwrap();
        assert!(close(&s, 2f64.sqrt()));
        assert!(Real::from_i64(0, p).recip().is_err());
    }

    #[test]
    fn certified_comparisons() {
        let p = 128;
        let two_ln2 = Real::ln_int(&BigInt::from(2), p).unwrap().mul_int(&BigInt::from(2));
        let c = Real::from_rational(&rat(131, 100), p);
        assert_eq!(two_ln2.certified_cmp(&c), Some(Ordering::Greater));
        assert!(c.certainly_lt(&two_ln2));
        let coarse = Real::from_rational(&rat(131, 100), 64);
        assert!(coarse.certainly_lt(&two_ln2));
        assert_eq!(two_ln2.certified_cmp(&coarse), Some(Ordering::Greater));
    }

    #[test]
    fn sci_rounding() {
        assert_eq!(sci_string(&rat(1, 3), 3), "3.33e-1");
        assert_eq!(sci_string(&rat(-2, 3), 2), "-6.7e-1");
        assert_eq!(sci_string(&rat(9995, 1), 3), "1.00e4");
        assert_eq!(sci_string(&rat(5, 1), 1), "5e0");
    }

    #[test]
    fn symbolic_powers() {
        let five = |e: i64| Power::new(5u32, BigRational::from_integer(BigInt::from(e))).unwrap();
        assert_eq!(five(625).compare(&five(1250).sqrt()).unwrap(), Ordering::Equal);
        let twenty_five = Power::new(25u32, rat(1, 1)).unwrap();
        assert_eq!(twenty_five.compare(&five(2)).unwrap(), Ordering::Equal);
        let two = Power::new(2u32, rat(10, 1)).unwrap();
        let three = Power::new(3u32, rat(6, 1)).unwrap();
        // 1024 > 729
        assert_eq!(two.compare(&three).unwrap(), Ordering::Greater);
    }
}
