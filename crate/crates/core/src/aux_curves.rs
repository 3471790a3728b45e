//! Curves `A·X^ℓ + B·Y^ℓ = C`: normalization, bounded point enumeration,
//! grouping of collision pairs into curves, and the log-space rational point
//! bound for ℓ ≥ 5.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{is_prime, perfect_power_root, power_free_part};
use crate::error::{Error, Result};
use crate::es_model::{canonical_cmp, RationalPoint};
use crate::factor_terms::TermFactorization;
use crate::realnum::{Power, Real};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AuxCurve {
    #[serde(serialize_with = "crate::ser::bigint")]
    pub a: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub b: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub c: BigInt,
    pub l: u32,
    pub normalized: bool,
}

impl AuxCurve {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>, c: impl Into<BigInt>, l: u32) -> Result<Self> {
        let (a, b, c) = (a.into(), b.into(), c.into());
        if a.is_zero() || b.is_zero() || c.is_zero() {
            return Err(Error::Domain(format!("coefficients must be nonzero, got ({a}, {b}, {c})")));
        }
        if l < 3 || !is_prime(l as u64) {
            return Err(Error::Domain(format!("exponent must be a prime >= 3, got {l}")));
        }
        Ok(Self { a, b, c, l, normalized: false })
    }

    /// `max(|A|, |B|, |C|)`.
    pub fn height(&self) -> BigInt {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }

    pub fn contains(&self, p: &RationalPoint) -> bool {
        let l = self.l as usize;
        let lhs = BigRational::from_integer(self.a.clone()) * num_traits::pow(p.x.clone(), l)
            + BigRational::from_integer(self.b.clone()) * num_traits::pow(p.y.clone(), l);
        lhs == BigRational::from_integer(self.c.clone())
    }
}

impl fmt::Display for AuxCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}X^{l} + {}Y^{l} = {}", self.a, self.b, self.c, l = self.l)
    }
}

/// A normalized curve with the scalings that carry points across:
/// a point `(X, Y)` of the original curve maps to `(x_scale·X, y_scale·Y)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Normalized {
    pub curve: AuxCurve,
    #[serde(serialize_with = "crate::ser::rational")]
    pub x_scale: BigRational,
    #[serde(serialize_with = "crate::ser::rational")]
    pub y_scale: BigRational,
}

impl Normalized {
    pub fn forward(&self, p: &RationalPoint) -> RationalPoint {
        RationalPoint::new(&p.x * &self.x_scale, &p.y * &self.y_scale)
    }

    pub fn backward(&self, p: &RationalPoint) -> RationalPoint {
        RationalPoint::new(&p.x / &self.x_scale, &p.y / &self.y_scale)
    }
}

/// Divide out `gcd(A, B, C)` and move ℓ-th powers out of the coefficients
/// into the variables, until nothing changes.
///
/// `A = a'u^ℓ` becomes `a'(uX)^ℓ`; `C = c'w^ℓ` becomes a division of both
/// variables by `w`.
pub fn normalize(curve: &AuxCurve) -> Result<Normalized> {
    let mut cur = AuxCurve::new(curve.a.clone(), curve.b.clone(), curve.c.clone(), curve.l)?;
    let l = cur.l;
    let mut xs = BigRational::one();
    let mut ys = BigRational::one();
    loop {
        let g = cur.a.gcd(&cur.b).gcd(&cur.c);
        let (fa, ua) = power_free_part(&(&cur.a / &g), l)?;
        let (fb, ub) = power_free_part(&(&cur.b / &g), l)?;
        let (fc, wc) = power_free_part(&(&cur.c / &g), l)?;
        let unchanged = g.is_one() && ua.is_one() && ub.is_one() && wc.is_one();
        xs = xs * BigRational::new(ua, wc.clone());
        ys = ys * BigRational::new(ub, wc);
        cur = AuxCurve { a: fa, b: fb, c: fc, l, normalized: false };
        if unchanged {
            break;
        }
    }
    cur.normalized = true;
    Ok(Normalized { curve: cur, x_scale: xs, y_scale: ys })
}

fn enumerate_denominator(curve: &AuxCurve, d: u64, numer_bound: u64, out: &mut Vec<RationalPoint>) {
    let l = curve.l as usize;
    let d_big = BigInt::from(d);
    let cd = &curve.c * num_traits::pow(d_big.clone(), l);
    let nb = numer_bound as i64;
    for u in -nb..=nb {
        let u_big = BigInt::from(u);
        let rest = &cd - &curve.a * num_traits::pow(u_big.clone(), l);
        if !(&rest % &curve.b).is_zero() {
            continue;
        }
        let vl = rest / &curve.b;
        // ℓ is odd, so the root carries the sign.
        let Some(v) = perfect_power_root(&vl, curve.l).ok().flatten() else { continue };
        if v.abs() > BigInt::from(nb) || !u_big.gcd(&v).gcd(&d_big).is_one() {
            continue;
        }
        out.push(RationalPoint::new(
            BigRational::new(u_big, d_big.clone()),
            BigRational::new(v, d_big.clone()),
        ));
    }
}

/// All affine points `(u/d, v/d)` with `gcd(u, v, d) = 1`, `d ≤ denom_bound`
/// and `|u|, |v| ≤ numer_bound`, in canonical order.
pub fn enumerate_points(curve: &AuxCurve, denom_bound: u64, numer_bound: u64) -> Vec<RationalPoint> {
    enumerate_points_sharded(curve, denom_bound, numer_bound, 1)
}

/// [`enumerate_points`] with the denominators dealt round-robin to `shards`
/// parallel workers and a canonical merge.
pub fn enumerate_points_sharded(
    curve: &AuxCurve,
    denom_bound: u64,
    numer_bound: u64,
    shards: usize,
) -> Vec<RationalPoint> {
    let shards = shards.max(1) as u64;
    let mut out: Vec<RationalPoint> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut part = Vec::new();
            let mut d = 1 + s;
            while d <= denom_bound {
                enumerate_denominator(curve, d, numer_bound, &mut part);
                d += shards;
            }
            part
        })
        .collect();
    out.sort_by(canonical_cmp);
    out
}

/// Independent reference for [`enumerate_points`]: scans `X = p/q` and
/// `Y = r/s` separately with `q, s ≤ denom_bound`, `|p|, |r| ≤ numer_bound`,
/// tests the equation after clearing denominators, then keeps the points
/// whose common denominator and numerators are within the bounds.
pub fn enumerate_points_pairwise(curve: &AuxCurve, denom_bound: u64, numer_bound: u64) -> Result<Vec<RationalPoint>> {
    let l = curve.l;
    let coef = |x: &BigInt| -> Result<i128> {
        i128::try_from(x).map_err(|_| Error::Resource(format!("coefficient {x} exceeds the pairwise scan range")))
    };
    let (a, b, c) = (coef(&curve.a)?, coef(&curve.b)?, coef(&curve.c)?);
    let pw = |x: i64| -> Option<i128> { (x as i128).checked_pow(l) };
    let nb = numer_bound as i64;
    let db = denom_bound as i64;
    let overflow = || Error::Resource("pairwise scan overflowed i128".into());
    let mut out = Vec::new();
    for q in 1..=db {
        let ql = pw(q).ok_or_else(overflow)?;
        for p in -nb..=nb {
            if p.gcd(&q) != 1 {
                continue;
            }
            let pl = pw(p).ok_or_else(overflow)?;
            for s in 1..=db {
                let sl = pw(s).ok_or_else(overflow)?;
                let qs = ql.checked_mul(sl).ok_or_else(overflow)?;
                let lhs_x = a.checked_mul(pl).and_then(|v| v.checked_mul(sl)).ok_or_else(overflow)?;
                let rhs = c.checked_mul(qs).ok_or_else(overflow)?;
                for r in -nb..=nb {
                    if r.gcd(&s) != 1 {
                        continue;
                    }
                    let rl = pw(r).ok_or_else(overflow)?;
                    let lhs_y = b.checked_mul(rl).and_then(|v| v.checked_mul(ql)).ok_or_else(overflow)?;
                    if lhs_x.checked_add(lhs_y) != Some(rhs) {
                        continue;
                    }
                    let m = q.lcm(&s);
                    if m <= db && (p * (m / q)).abs() <= nb && (r * (m / s)).abs() <= nb {
                        out.push(RationalPoint::new(
                            BigRational::new(p.into(), q.into()),
                            BigRational::new(r.into(), s.into()),
                        ));
                    }
                }
            }
        }
    }
    out.sort_by(canonical_cmp);
    Ok(out)
}

/// `ln` of the point-count bound `exp(5^{ℓ⁴}·ln(3H)·lnln(3H))`, with natural
/// logarithms throughout.
#[derive(Clone, Debug)]
pub struct FaltingsBound {
    pub l: u32,
    pub h: BigInt,
    pub ln_bound: Real,
    /// `ln(ln_bound)` evaluated directly.
    pub lnln_direct: Real,
    /// `ℓ⁴·ln5 + ln(ln(3H)·lnln(3H))`.
    pub lnln_split: Real,
}

impl FaltingsBound {
    pub fn lnln_digits(&self, digits: usize) -> Option<String> {
        self.lnln_direct.to_sci(digits)
    }
}

pub fn faltings_log_bound(l: u32, h: &BigInt, prec: u32) -> Result<FaltingsBound> {
    if l < 5 || !is_prime(l as u64) {
        return Err(Error::Precondition(format!(
            "the genus is below 2 unless ℓ is a prime >= 5, got ℓ = {l}"
        )));
    }
    if !h.is_positive() {
        return Err(Error::Precondition(format!("H must be positive, got {h}")));
    }
    let l4 = (l as u64).pow(4);
    let five_pow = num_traits::pow(BigInt::from(5), l4 as usize);
    // Work with enough bits to keep a relative error far below the output
    // digits after multiplying by 5^{ℓ⁴}.
    let work = prec + five_pow.bits() as u32;
    let ln3h = Real::ln_int(&(h * 3), work)?;
    let lnln3h = ln3h.ln()?;
    let inner = ln3h.mul(&lnln3h);
    let ln_bound = inner.mul_int(&five_pow);
    let lnln_direct = ln_bound.ln()?;
    let ln5 = Real::ln_int(&BigInt::from(5), work)?;
    let lnln_split = ln5.mul_int(&BigInt::from(l4)).add(&inner.ln()?);
    Ok(FaltingsBound { l, h: h.clone(), ln_bound, lnln_direct, lnln_split })
}

/// `5^{ℓ⁴} ≤ √(log k)`, with `log k` given as an exact power and compared
/// symbolically.
pub fn faltings_exponent_below_sqrt_log(l: u32, log_k: &Power) -> Result<bool> {
    let lhs = Power::new(5u32, BigRational::from_integer(BigInt::from((l as u64).pow(4))))?;
    Ok(lhs.compare(&log_k.sqrt())? != std::cmp::Ordering::Greater)
}

/// One collision pair: `f·t_i^ℓ − g·t_j^ℓ = h·d^ℓ` with the sign folded
/// into `h`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairTuple {
    pub i: usize,
    pub j: usize,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub t_i: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub t_j: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub d: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub f: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub g: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub h: BigInt,
    pub l: u32,
}

impl PairTuple {
    pub fn identity_holds(&self) -> bool {
        let l = self.l as usize;
        &self.f * num_traits::pow(self.t_i.clone(), l) - &self.g * num_traits::pow(self.t_j.clone(), l)
            == &self.h * num_traits::pow(self.d.clone(), l)
    }

    pub fn point(&self) -> RationalPoint {
        RationalPoint::new(
            BigRational::new(self.t_i.clone(), self.d.clone()),
            BigRational::new(self.t_j.clone(), self.d.clone()),
        )
    }
}

/// Build the tuple for terms `i, j` by dividing `a_i t_i^ℓ − a_j t_j^ℓ =
/// (i − j)d^ℓ` through by `gcd(a_i, a_j)`.
pub fn pair_tuple(terms: &[TermFactorization], i: usize, j: usize, d: &BigInt, l: u32) -> Result<PairTuple> {
    let len = terms.len();
    let get = |x: usize| terms.get(x).ok_or(Error::IndexOutOfRange { index: x, len });
    let (ti, tj) = (get(i)?, get(j)?);
    let (Some(t_i), Some(t_j)) = (ti.t.clone(), tj.t.clone()) else {
        return Err(Error::Data(format!("terms {i} and {j} need exact ℓ-th power parts")));
    };
    let g = ti.a.gcd(&tj.a);
    let diff = BigInt::from(i as i64 - j as i64);
    if !(&diff % &g).is_zero() {
        return Err(Error::Data(format!("gcd(a_{i}, a_{j}) = {g} does not divide {diff}")));
    }
    let tuple = PairTuple { i, j, t_i, t_j, d: d.clone(), f: &ti.a / &g, g: &tj.a / &g, h: diff / &g, l };
    if !tuple.identity_holds() {
        return Err(Error::Data(format!("pair ({i}, {j}) does not satisfy its ternary identity")));
    }
    Ok(tuple)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuxGroup {
    pub curve: AuxCurve,
    pub points: Vec<(String, String)>,
    pub pairs: Vec<(usize, usize)>,
}

/// Tuples grouped by the curve `f·X^ℓ − g·Y^ℓ = h` their point lies on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointGrouping {
    /// Largest group first; ties by curve.
    pub groups: Vec<AuxGroup>,
    pub total_points: usize,
    /// The t-values were pairwise coprime with `|t| ≠ 1`.
    pub coprime_premise: bool,
    pub duplicates: usize,
    /// No duplicates whenever the premise holds.
    pub distinct_holds: bool,
}

impl PointGrouping {
    pub fn largest(&self) -> Option<&AuxGroup> {
        self.groups.first()
    }

    /// `#groups · |largest| ≥ total`.
    pub fn pigeonhole_holds(&self) -> bool {
        let big = self.largest().map_or(0, |g| g.points.len());
        self.groups.len() * big >= self.total_points
    }

    /// With all coefficients at most `bound` in absolute value there are at
    /// most `2·bound³` curves, so the largest group has at least
    /// `total / (2·bound³)` points.
    pub fn coefficient_count_holds(&self, bound: u64) -> bool {
        let cap = 2 * (bound as u128).pow(3);
        let b = BigInt::from(bound);
        let within = self.groups.iter().all(|g| g.curve.height() <= b);
        let big = self.largest().map_or(0, |g| g.points.len()) as u128;
        within && (self.groups.len() as u128) <= cap && big * cap >= self.total_points as u128
    }
}

pub fn pairs_to_points(tuples: &[PairTuple]) -> Result<PointGrouping> {
    let mut by_curve: BTreeMap<AuxCurve, Vec<(RationalPoint, (usize, usize))>> = BTreeMap::new();
    for t in tuples {
        if !t.identity_holds() {
            return Err(Error::Data(format!(
                "pair ({}, {}): {}·{}^{l} − {}·{}^{l} ≠ {}·{}^{l}",
                t.i, t.j, t.f, t.t_i, t.g, t.t_j, t.h, t.d, l = t.l
            )));
        }
        let curve = AuxCurve::new(t.f.clone(), -&t.g, t.h.clone(), t.l)?;
        by_curve.entry(curve).or_default().push((t.point(), (t.i, t.j)));
    }
    let mut ts: Vec<(usize, BigInt)> = Vec::new();
    for t in tuples {
        ts.push((t.i, t.t_i.clone()));
        ts.push((t.j, t.t_j.clone()));
    }
    ts.sort();
    ts.dedup_by(|a, b| a.0 == b.0);
    let coprime_premise = ts.iter().all(|(_, t)| !t.abs().is_one())
        && ts.iter().enumerate().all(|(x, (_, s))| ts[x + 1..].iter().all(|(_, u)| s.gcd(u).is_one()));

    let mut duplicates = 0;
    let mut total = 0;
    let mut groups: Vec<AuxGroup> = by_curve
        .into_iter()
        .map(|(curve, mut pts)| {
            pts.sort_by(|a, b| canonical_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
            let before = pts.len();
            pts.dedup_by(|a, b| a.0 == b.0);
            duplicates += before - pts.len();
            total += pts.len();
            AuxGroup {
                curve,
                points: pts.iter().map(|(p, _)| (p.x.to_string(), p.y.to_string())).collect(),
                pairs: pts.iter().map(|(_, ij)| *ij).collect(),
            }
        })
        .collect();
    groups.sort_by(|a, b| b.points.len().cmp(&a.points.len()).then_with(|| a.curve.cmp(&b.curve)));
    Ok(PointGrouping {
        groups,
        total_points: total,
        coprime_premise,
        duplicates,
        distinct_holds: !coprime_premise || duplicates == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};

    fn pt(x: BigRational, y: BigRational) -> RationalPoint {
        RationalPoint::new(x, y)
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&AuxCurve::new(8, 27, 5, 3).unwrap()).unwrap();
        assert_eq!((n.curve.a.clone(), n.curve.b.clone(), n.curve.c.clone()), (int(1), int(1), int(5)));
        assert_eq!((n.x_scale.clone(), n.y_scale.clone()), (rat(2, 1), rat(3, 1)));
        assert!(n.curve.normalized);

        let n = normalize(&AuxCurve::new(4, 9, 10, 3).unwrap()).unwrap();
        assert_eq!((n.curve.a, n.curve.b, n.curve.c), (int(4), int(9), int(10)));

        let n = normalize(&AuxCurve::new(2, -2, 4, 5).unwrap()).unwrap();
        assert_eq!((n.curve.a, n.curve.b, n.curve.c), (int(1), int(-1), int(2)));

        assert!(AuxCurve::new(0, 1, 1, 3).is_err());
    }

    #[test]
    fn normalize_moves_points() {
        let c = AuxCurve::new(1, 1, 16, 3).unwrap();
        let n = normalize(&c).unwrap();
        assert_eq!(n.curve.c, int(2));
        let p = pt(rat(2, 1), rat(2, 1));
        assert!(c.contains(&p));
        assert!(n.curve.contains(&n.forward(&p)));
        assert_eq!(n.backward(&n.forward(&p)), p);
    }

    #[test]
    fn enumerate_examples() {
        let pts = enumerate_points(&AuxCurve::new(1, 1, 2, 3).unwrap(), 10, 50);
        assert!(pts.contains(&pt(rat(1, 1), rat(1, 1))));
        let pts = enumerate_points(&AuxCurve::new(1, 1, 1, 5).unwrap(), 10, 50);
        assert_eq!(pts, vec![pt(rat(0, 1), rat(1, 1)), pt(rat(1, 1), rat(0, 1))]);
        let pts = enumerate_points(&AuxCurve::new(1, 1, 7, 3).unwrap(), 3, 10);
        assert!(pts.contains(&pt(rat(2, 1), rat(-1, 1))));
    }

    #[test]
    fn shards_and_oracle_agree() {
        let c = AuxCurve::new(1, 1, 9, 3).unwrap();
        let one = enumerate_points(&c, 12, 40);
        assert_eq!(one, enumerate_points_sharded(&c, 12, 40, 5));
        assert_eq!(one, enumerate_points_pairwise(&c, 12, 40).unwrap());
        assert!(one.contains(&pt(rat(2, 1), rat(1, 1))));
    }

    #[test]
    fn bound_values() {
        let b = faltings_log_bound(5, &int(17000), 192).unwrap();
        assert_eq!(b.lnln_direct.to_sci(30), b.lnln_split.to_sci(30));
        let f = 625.0 * 5f64.ln() + (51000f64.ln() * 51000f64.ln().ln()).ln();
        assert!((b.lnln_direct.mid_f64() - f).abs() < 1e-9);
        assert!(faltings_log_bound(3, &int(1), 192).is_err());
        let small = faltings_log_bound(5, &int(1), 192).unwrap();
        assert!(small.ln_bound.certainly_lt(&b.ln_bound));
    }

    #[test]
    fn sqrt_log_comparison() {
        let lk = |e: i64| Power::new(5u32, rat(e, 1)).unwrap();
        assert!(faltings_exponent_below_sqrt_log(5, &lk(1250)).unwrap());
        assert!(faltings_exponent_below_sqrt_log(5, &lk(1251)).unwrap());
        assert!(!faltings_exponent_below_sqrt_log(7, &lk(1250)).unwrap());
        assert!(!faltings_exponent_below_sqrt_log(7, &lk(1251)).unwrap());
        assert!(!faltings_exponent_below_sqrt_log(5, &lk(1249)).unwrap());
    }

    fn tuple(t_i: i64, t_j: i64, f: i64, g: i64, l: u32, idx: usize) -> PairTuple {
        let h = f * t_i.pow(l) - g * t_j.pow(l);
        PairTuple { i: idx, j: idx + 1, t_i: int(t_i), t_j: int(t_j), d: int(1), f: int(f), g: int(g), h: int(h), l }
    }

    #[test]
    fn grouping() {
        let g = pairs_to_points(&[tuple(2, 3, 1, 1, 3, 0), tuple(5, 7, 1, 1, 3, 2)]).unwrap();
        assert_eq!(g.total_points, 2);
        assert!(g.coprime_premise && g.distinct_holds && g.pigeonhole_holds());
        let mut bad = tuple(2, 3, 1, 1, 3, 0);
        bad.h += 1;
        assert!(matches!(pairs_to_points(&[bad]), Err(Error::Data(_))));
    }

    #[test]
    fn grouping_pigeonhole() {
        // Same curve X³ − Y³ = 7 hit twice: (2, 1) and (−1, −2).
        let ts = vec![tuple(2, 1, 1, 1, 3, 0), tuple(-1, -2, 1, 1, 3, 2), tuple(3, 5, 2, 1, 3, 4)];
        let g = pairs_to_points(&ts).unwrap();
        assert_eq!(g.largest().unwrap().points.len(), 2);
        assert_eq!(g.groups.len(), 2);
        assert!(g.pigeonhole_holds());
        assert!(g.coefficient_count_holds(17000));
        assert!(!g.coprime_premise);
    }
}
