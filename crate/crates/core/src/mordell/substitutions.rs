//! Changes of variables taking a point on a cubic Thue-type curve to a point
//! on a Mordell curve `V² = U³ + γ`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::{CurvePoint, WeierstrassCurve};
use crate::arith::{factorize, p_valuation, power_free_part};
use crate::error::{Error, Result};

fn q(n: &BigInt) -> BigRational {
    BigRational::from_integer(n.clone())
}

fn qi(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CubesToMordell {
    /// Cubefree part of the input `A₀`.
    #[serde(serialize_with = "crate::ser::bigint")]
    pub a0: BigInt,
    /// `d` after absorbing the cube part of `A₀`.
    #[serde(serialize_with = "crate::ser::bigint")]
    pub d: BigInt,
    /// `(U, V)` on `V² = U³ − 432A₀²`.
    pub raw: CurvePoint,
    /// The point after removing `2⁶` and `3⁶` from `432A₀²`.
    pub point: CurvePoint,
    /// `y² = x³ − D` with `D` free of `2⁶` and `3⁶`.
    pub curve: WeierstrassCurve,
    /// `(u₂, u₃)` with `(X, Y) = (U/(u₂u₃)², V/(u₂u₃)³)`.
    pub scale: (u32, u32),
}

/// `t_i³ − t_j³ = A₀d³` gives `U = 12A₀d/(t_i − t_j)`,
/// `V = 36A₀(t_i + t_j)/(t_i − t_j)` on `V² = U³ − 432A₀²`.
///
/// A cube factor of `A₀` is moved into `d` first. The map is injective:
/// [`cubes_preimage`] recovers `(t_i/d, t_j/d)` from `(U, V)`.
pub fn cubes_to_mordell(t_i: &BigInt, t_j: &BigInt, d: &BigInt, a0: &BigInt) -> Result<CubesToMordell> {
    if t_i == t_j {
        return Err(Error::Precondition(format!("t_i = t_j = {t_i}")));
    }
    if !d.is_positive() || a0.is_zero() {
        return Err(Error::Precondition(format!("need d > 0 and A0 != 0, got d = {d}, A0 = {a0}")));
    }
    if t_i * t_i * t_i - t_j * t_j * t_j != a0 * d * d * d {
        return Err(Error::Precondition(format!("{t_i}^3 - {t_j}^3 != {a0}·{d}^3")));
    }
    let (a0, s) = power_free_part(a0, 3)?;
    let d = d * s;
    let diff = q(&(t_i - t_j));
    let u = qi(12) * q(&a0) * q(&d) / &diff;
    let v = qi(36) * q(&a0) * q(&(t_i + t_j)) / &diff;
    let mut big_d = BigInt::from(432) * &a0 * &a0;
    if &v * &v != &u * &u * &u - q(&big_d) {
        return Err(Error::Audit {
            identity: "V^2 = U^3 - 432 A0^2".into(),
            detail: format!("U = {u}, V = {v}, A0 = {a0}"),
        });
    }
    let raw = CurvePoint::affine(u.clone(), v.clone());
    let (mut x, mut y) = (u, v);
    let mut scale = (0u32, 0u32);
    while (&big_d % 64u32).is_zero() {
        big_d /= 64;
        x /= qi(4);
        y /= qi(8);
        scale.0 += 1;
    }
    while (&big_d % 729u32).is_zero() {
        big_d /= 729;
        x /= qi(9);
        y /= qi(27);
        scale.1 += 1;
    }
    let curve = WeierstrassCurve::mordell(-big_d)?;
    let point = CurvePoint::affine(x, y);
    debug_assert!(curve.contains(&point));
    Ok(CubesToMordell { a0, d, raw, point, curve, scale })
}

/// Inverse of the raw map: `(t_i/d, t_j/d) = ((V + 36A₀)/(6U), (V − 36A₀)/(6U))`.
pub fn cubes_preimage(a0: &BigInt, raw: &CurvePoint) -> Result<(BigRational, BigRational)> {
    let CurvePoint::Affine { x: u, y: v } = raw else {
        return Err(Error::Domain("the point at infinity has no preimage".into()));
    };
    if u.is_zero() {
        return Err(Error::Domain("U = 0 has no preimage".into()));
    }
    let c = qi(36) * q(a0);
    let six_u = qi(6) * u;
    Ok(((v + &c) / &six_u, (v - &c) / &six_u))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TernaryToWeierstrass {
    pub kappa: u32,
    /// `(U, V)` on `V² = U³ + 2^{6κ−2}(ABC)²`.
    pub raw: CurvePoint,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub raw_gamma: BigInt,
    pub point: CurvePoint,
    pub curve: WeierstrassCurve,
    /// Number of `2⁶` divisions applied.
    pub twos_removed: u32,
    /// `A, B, C` pairwise coprime and cubefree.
    pub normalized_input: bool,
    /// `γ` free of sixth powers; checked only for normalized input.
    pub gamma_sixth_power_free: Option<bool>,
}

fn cubefree(n: &BigInt) -> Result<bool> {
    Ok(power_free_part(n, 3)?.1.is_one())
}

/// `A·t_i³ − B·t_j³ = C·d³` gives, with `κ = 0` for even `C` and `1` for
/// odd `C`, `x = t_i/d`, `y = t_j/d`,
/// `U = 2^{2κ}AB·xy`, `V = 2^{2κ}AB(2^κ·A·x³ − 2^{κ−1}·C)` on
/// `V² = U³ + 2^{6κ−2}(ABC)²`. While `2⁶ | γ` the point is scaled by
/// `(U/4, V/8)`.
pub fn ternary_to_weierstrass(
    a: &BigInt,
    b: &BigInt,
    c: &BigInt,
    t_i: &BigInt,
    t_j: &BigInt,
    d: &BigInt,
) -> Result<TernaryToWeierstrass> {
    if a.is_zero() || b.is_zero() || c.is_zero() || !d.is_positive() {
        return Err(Error::Precondition(format!("need A, B, C != 0 and d > 0, got ({a}, {b}, {c}), d = {d}")));
    }
    if a * t_i * t_i * t_i - b * t_j * t_j * t_j != c * d * d * d {
        return Err(Error::Precondition(format!("{a}·{t_i}^3 - {b}·{t_j}^3 != {c}·{d}^3")));
    }
    let normalized_input = a.gcd(b).is_one()
        && a.gcd(c).is_one()
        && b.gcd(c).is_one()
        && cubefree(a)?
        && cubefree(b)?
        && cubefree(c)?;
    let kappa: u32 = if c.is_even() { 0 } else { 1 };
    let x = BigRational::new(t_i.clone(), d.clone());
    let y = BigRational::new(t_j.clone(), d.clone());
    let ab = q(&(a * b));
    let s2k = qi(1 << (2 * kappa));
    let u = &s2k * &ab * &x * &y;
    let half_c = if kappa == 1 { q(c) } else { q(c) / qi(2) };
    let v = &s2k * &ab * (qi(1 << kappa) * q(a) * &x * &x * &x - half_c);
    let abc = a * b * c;
    // 2^{6κ−2}(ABC)²: for κ = 0, C is even so ABC/2 is an integer.
    let raw_gamma = if kappa == 1 { BigInt::from(16) * &abc * &abc } else { (&abc / 2) * (&abc / 2) };
    if &v * &v != &u * &u * &u + q(&raw_gamma) {
        return Err(Error::Audit {
            identity: "V^2 = U^3 + 2^(6k-2) (ABC)^2".into(),
            detail: format!("U = {u}, V = {v}, A = {a}, B = {b}, C = {c}"),
        });
    }
    let raw = CurvePoint::affine(u.clone(), v.clone());
    let (mut gx, mut gy, mut gamma) = (u, v, raw_gamma.clone());
    let mut twos_removed = 0;
    while (&gamma % 64u32).is_zero() {
        gamma /= 64;
        gx /= qi(4);
        gy /= qi(8);
        twos_removed += 1;
    }
    let gamma_sixth_power_free = if normalized_input { Some(sixth_power_free(&gamma, &[a, b, c])?) } else { None };
    if gamma_sixth_power_free == Some(false) {
        return Err(Error::Structure(format!("γ = {gamma} keeps a sixth power after normalization")));
    }
    let curve = WeierstrassCurve::mordell(gamma)?;
    let point = CurvePoint::affine(gx, gy);
    debug_assert!(curve.contains(&point));
    Ok(TernaryToWeierstrass {
        kappa,
        raw,
        raw_gamma,
        point,
        curve,
        twos_removed,
        normalized_input,
        gamma_sixth_power_free,
    })
}

/// Every prime of `γ` divides 2 or one of `factors`, so only those primes
/// are checked.
fn sixth_power_free(gamma: &BigInt, factors: &[&BigInt]) -> Result<bool> {
    let mut primes = vec![BigInt::from(2)];
    for f in factors {
        primes.extend(factorize(f)?.into_iter().map(|(p, _)| p));
    }
    primes.sort();
    primes.dedup();
    for p in primes {
        let p = u64::try_from(&p).map_err(|_| Error::Resource(format!("prime {p} too large")))?;
        if p_valuation(gamma, p)? >= 6 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};

    #[test]
    fn cubes_examples() {
        let r = cubes_to_mordell(&int(2), &int(1), &int(1), &int(7)).unwrap();
        assert_eq!(r.raw, CurvePoint::affine(rat(84, 1), rat(756, 1)));
        assert_eq!(r.curve.b, int(-21168));
        let r = cubes_to_mordell(&int(1), &int(-1), &int(1), &int(2)).unwrap();
        assert_eq!(r.raw, CurvePoint::affine(rat(12, 1), rat(0, 1)));
        assert_eq!(r.point, CurvePoint::affine(rat(3, 1), rat(0, 1)));
        assert_eq!((r.curve.b.clone(), r.scale), (int(-27), (1, 0)));
        assert!(cubes_to_mordell(&int(1), &int(1), &int(1), &int(0)).is_err());
        assert!(cubes_to_mordell(&int(3), &int(1), &int(1), &int(7)).is_err());
    }

    #[test]
    fn cubes_fold_and_invert() {
        // 4³ − 2³ = 56 = 7·2³, written as A₀ = 56 with d = 1.
        let r = cubes_to_mordell(&int(4), &int(2), &int(1), &int(56)).unwrap();
        assert_eq!((r.a0.clone(), r.d.clone()), (int(7), int(2)));
        let (x, y) = cubes_preimage(&r.a0, &r.raw).unwrap();
        assert_eq!((x, y), (rat(2, 1), rat(1, 1)));
    }

    #[test]
    fn ternary_examples() {
        let r = ternary_to_weierstrass(&int(1), &int(1), &int(2), &int(1), &int(-1), &int(1)).unwrap();
        assert_eq!(r.kappa, 0);
        assert_eq!(r.raw, CurvePoint::affine(rat(-1, 1), rat(0, 1)));
        assert_eq!(r.raw_gamma, int(1));
        let r = ternary_to_weierstrass(&int(1), &int(1), &int(7), &int(2), &int(1), &int(1)).unwrap();
        assert_eq!(r.kappa, 1);
        assert_eq!(r.raw, CurvePoint::affine(rat(8, 1), rat(36, 1)));
        assert_eq!(r.gamma_sixth_power_free, Some(true));
        assert!(ternary_to_weierstrass(&int(1), &int(1), &int(3), &int(2), &int(1), &int(1)).is_err());
    }

    #[test]
    fn ternary_strips_two_when_ab_even() {
        // 2·1³ − 1·1³ = 1 with C odd and 2 | A exactly once.
        let r = ternary_to_weierstrass(&int(2), &int(1), &int(1), &int(1), &int(1), &int(1)).unwrap();
        assert_eq!(r.twos_removed, 1);
        assert_eq!(r.gamma_sixth_power_free, Some(true));
        assert!(r.curve.contains(&r.point));
    }
}
