//! The curve `y^ℓ = x(x+1)⋯(x+k−1)`: membership, the known point families,
//! bounded exhaustive search, and the passage between nontrivial rational
//! points and integer progressions `∏(n + i·d^ℓ) = t^ℓ`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{is_prime, perfect_power_root};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct EsCurve {
    pub k: u32,
    pub l: u32,
}

impl EsCurve {
    pub fn new(k: u32, l: u32) -> Result<Self> {
        if k < 2 || l < 2 {
            return Err(Error::Domain(format!("curve needs k, l >= 2, got ({k}, {l})")));
        }
        Ok(Self { k, l })
    }

    /// `∏_{i<k} (x + i)`.
    pub fn product_at(&self, x: &BigRational) -> BigRational {
        (0..self.k).fold(BigRational::one(), |acc, i| acc * (x + BigRational::from_integer(i.into())))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalPoint {
    pub x: BigRational,
    pub y: BigRational,
}

impl RationalPoint {
    pub fn new(x: BigRational, y: BigRational) -> Self {
        Self { x, y }
    }

    pub fn is_trivial(&self) -> bool {
        self.y.is_zero()
    }
}

impl fmt::Display for RationalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Canonical order for search output: denominator of x, numerator of x, then y.
pub fn canonical_cmp(a: &RationalPoint, b: &RationalPoint) -> std::cmp::Ordering {
    (a.x.denom(), a.x.numer(), &a.y).cmp(&(b.x.denom(), b.x.numer(), &b.y))
}

/// `1 + (kℓ − ℓ − k − gcd(k, ℓ))/2`.
pub fn genus(curve: &EsCurve) -> u64 {
    let (k, l) = (curve.k as i64, curve.l as i64);
    let twice = 2 + k * l - l - k - k.gcd(&l);
    debug_assert!(twice >= 0 && twice % 2 == 0);
    (twice / 2) as u64
}

pub fn is_on_curve(curve: &EsCurve, p: &RationalPoint) -> bool {
    num_traits::pow(p.y.clone(), curve.l as usize) == curve.product_at(&p.x)
}

/// The `k` points `(−i, 0)`.
pub fn trivial_points(curve: &EsCurve) -> Vec<RationalPoint> {
    (0..curve.k as i64)
        .map(|i| RationalPoint::new(BigRational::from_integer((-i).into()), BigRational::zero()))
        .collect()
}

/// Output of [`sander_catalog`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Catalog {
    pub points: Vec<RationalPoint>,
    /// For `(2j, 2)` with `j` odd: the candidate pair, which satisfies
    /// `−y² = ∏(x+i)` rather than the curve equation.
    pub minus_square: Vec<RationalPoint>,
    pub diagnostic: Option<String>,
}

/// Candidate pair `((1−2j)/2, ±2^{−j}·∏_{i≤j}(2i−1))` for `k = 2j`.
pub fn half_integer_pair(j: u32) -> Vec<RationalPoint> {
    let x = BigRational::new(BigInt::from(1 - 2 * j as i64), BigInt::from(2));
    let odd: BigInt = (1..=j as i64).map(|i| BigInt::from(2 * i - 1)).product();
    let y = BigRational::new(odd, BigInt::one() << j as usize);
    vec![RationalPoint::new(x.clone(), -y.clone()), RationalPoint::new(x, y)]
}

/// Known nontrivial points for the families where they are conjectured to
/// be the only ones. Every returned point is checked exactly.
pub fn sander_catalog(curve: &EsCurve, param_bound: u32) -> Catalog {
    let mut out = Catalog::default();
    match (curve.k, curve.l) {
        (2, 2) => {
            let b = param_bound as i64;
            for a in -b..=b {
                for c in -b..=b {
                    if a == 0 || c == 0 || a == c || a == -c {
                        continue;
                    }
                    let den = BigInt::from(c * c - a * a);
                    let p = RationalPoint::new(
                        BigRational::new(BigInt::from(a * a), den.clone()),
                        BigRational::new(BigInt::from(a * c), den),
                    );
                    out.points.push(p);
                }
            }
        }
        (3, 3) => {
            out.points.push(RationalPoint::new(crate::arith::rat(-4, 3), crate::arith::rat(2, 3)));
            out.points.push(RationalPoint::new(crate::arith::rat(-2, 3), crate::arith::rat(-2, 3)));
        }
        (k, 2) if k % 2 == 0 && k >= 4 => {
            let j = k / 2;
            let pair = half_integer_pair(j);
            if j % 2 == 0 {
                out.points = pair;
            } else {
                let prod = curve.product_at(&pair[0].x);
                if pair.iter().all(|p| -(&p.y * &p.y) == prod) {
                    out.diagnostic = Some(format!(
                        "k = {k}: x = {} satisfies -y^2 = product, not y^2 = product",
                        pair[0].x
                    ));
                }
                out.minus_square = pair;
            }
        }
        _ => {}
    }
    out.points.retain(|p| is_on_curve(curve, p));
    out.points.sort_by(canonical_cmp);
    out.points.dedup();
    out
}

/// Exponent `e` such that admissible x-denominators are `m^e`.
pub fn denominator_exponent(curve: &EsCurve) -> u32 {
    curve.l / curve.k.gcd(&curve.l)
}

fn search_chunk(curve: &EsCurve, denoms: &[BigInt], p_lo: i64, p_hi: i64) -> Vec<RationalPoint> {
    let mut out = Vec::new();
    let l = curve.l;
    for q in denoms {
        let q_pow_k = num_traits::pow(q.clone(), curve.k as usize);
        // q is an exact m^{ℓ/g}, so q^k is an ℓ-th power.
        let y_den = perfect_power_root(&q_pow_k, l).ok().flatten().expect("admissible denominator");
        for p in p_lo..=p_hi {
            let p_big = BigInt::from(p);
            if !p_big.gcd(q).is_one() {
                continue;
            }
            let mut num = BigInt::one();
            for i in 0..curve.k as i64 {
                num *= &p_big + q * i;
                if num.is_zero() {
                    break;
                }
            }
            let x = BigRational::new(p_big.clone(), q.clone());
            if num.is_zero() {
                out.push(RationalPoint::new(x, BigRational::zero()));
                continue;
            }
            if l % 2 == 0 && num.is_negative() {
                continue;
            }
            if let Some(r) = perfect_power_root(&num, l).ok().flatten() {
                let y = BigRational::new(r, y_den.clone());
                if l % 2 == 0 {
                    out.push(RationalPoint::new(x.clone(), -y.clone()));
                }
                out.push(RationalPoint::new(x, y));
            }
        }
    }
    out
}

fn admissible_denominators(curve: &EsCurve, denom_bound: u64) -> Vec<BigInt> {
    let e = denominator_exponent(curve);
    let bound = BigInt::from(denom_bound);
    let mut out = Vec::new();
    let mut m = BigInt::one();
    loop {
        let q = num_traits::pow(m.clone(), e as usize);
        if q > bound {
            break;
        }
        out.push(q);
        m += 1;
    }
    out
}

/// All points with `x = p/q` in lowest terms, `|p| ≤ numer_bound` and
/// `q ≤ denom_bound`, in canonical order.
///
/// Only denominators `q = m^{ℓ/gcd(k,ℓ)}` are visited: in lowest terms the
/// denominator `b` of `x` satisfies `b^k = u^ℓ` for the denominator `u` of
/// `y`, which forces that shape.
pub fn search_points(curve: &EsCurve, denom_bound: u64, numer_bound: u64) -> Vec<RationalPoint> {
    search_points_sharded(curve, denom_bound, numer_bound, 1)
}

/// [`search_points`] split over `shards` contiguous numerator ranges run in
/// parallel; the merge is a canonical sort so the result does not depend on
/// the shard count.
pub fn search_points_sharded(
    curve: &EsCurve,
    denom_bound: u64,
    numer_bound: u64,
    shards: usize,
) -> Vec<RationalPoint> {
    let denoms = admissible_denominators(curve, denom_bound);
    let nb = numer_bound as i64;
    let shards = shards.max(1) as i64;
    let span = 2 * nb + 1;
    let step = (span + shards - 1) / shards;
    let ranges: Vec<(i64, i64)> = (0..shards)
        .map(|s| (-nb + s * step, (-nb + (s + 1) * step - 1).min(nb)))
        .filter(|(lo, hi)| lo <= hi)
        .collect();
    let mut out: Vec<RationalPoint> = ranges
        .par_iter()
        .flat_map_iter(|&(lo, hi)| search_chunk(curve, &denoms, lo, hi))
        .collect();
    out.sort_by(canonical_cmp);
    out
}

/// A candidate integer solution of `∏_{i<k}(n + i·d^ℓ) = t^ℓ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApSolution {
    #[serde(serialize_with = "crate::ser::bigint")]
    pub n: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub d: BigInt,
    #[serde(serialize_with = "crate::ser::opt_bigint")]
    pub t: Option<BigInt>,
    pub k: u32,
    pub l: u32,
    pub validated: bool,
}

impl ApSolution {
    /// Unvalidated candidate. Checks the shape constraints only.
    pub fn candidate(n: BigInt, d: BigInt, t: Option<BigInt>, k: u32, l: u32) -> Result<Self> {
        if n.is_zero() {
            return Err(Error::Precondition("n must be nonzero".into()));
        }
        if !d.is_positive() {
            return Err(Error::Precondition(format!("d must be positive, got {d}")));
        }
        if !n.gcd(&d).is_one() {
            return Err(Error::Precondition(format!("gcd(n, d) = {} != 1", n.gcd(&d))));
        }
        if k < 2 {
            return Err(Error::Precondition(format!("k must be >= 2, got {k}")));
        }
        if l < 3 || !is_prime(l as u64) {
            return Err(Error::Precondition(format!("l must be a prime >= 3, got {l}")));
        }
        if matches!(&t, Some(t) if t.is_zero()) {
            return Err(Error::Precondition("t must be nonzero".into()));
        }
        Ok(Self { n, d, t, k, l, validated: false })
    }

    pub fn curve(&self) -> EsCurve {
        EsCurve { k: self.k, l: self.l }
    }

    /// `d^ℓ`.
    pub fn step(&self) -> BigInt {
        num_traits::pow(self.d.clone(), self.l as usize)
    }

    /// `n + i·d^ℓ` for `i < k`.
    pub fn terms(&self) -> Vec<BigInt> {
        let step = self.step();
        (0..self.k).map(|i| &self.n + &step * i).collect()
    }

    pub fn product(&self) -> BigInt {
        product_tree(&self.terms())
    }

    /// Check the product equation exactly; fills `t` when absent.
    pub fn validate(&mut self) -> Result<()> {
        let product = self.product();
        let root = if product.is_zero() {
            None
        } else {
            perfect_power_root(&product, self.l)?
        };
        let expected = match &self.t {
            Some(t) => format!("t^{} = {}", self.l, num_traits::pow(t.clone(), self.l as usize)),
            None => format!("a nonzero {}-th power", self.l),
        };
        match (root, &self.t) {
            (Some(r), Some(t)) if &r == t => {}
            (Some(r), None) => self.t = Some(r),
            _ => {
                return Err(Error::Validation { product: product.to_string(), expected });
            }
        }
        self.validated = true;
        Ok(())
    }
}

pub(crate) fn product_tree(xs: &[BigInt]) -> BigInt {
    match xs.len() {
        0 => BigInt::one(),
        1 => xs[0].clone(),
        n => product_tree(&xs[..n / 2]) * product_tree(&xs[n / 2..]),
    }
}

/// `(n/d^ℓ, t/d^k)`.
pub fn ap_coords_to_point(n: &BigInt, d: &BigInt, t: &BigInt, k: u32, l: u32) -> RationalPoint {
    RationalPoint::new(
        BigRational::new(n.clone(), num_traits::pow(d.clone(), l as usize)),
        BigRational::new(t.clone(), num_traits::pow(d.clone(), k as usize)),
    )
}

/// Inverse of [`ap_coords_to_point`]: recovers `(n, d, t)` from the
/// denominators, erroring if `x` does not have an ℓ-th-power denominator or
/// `y` does not have denominator `d^k`.
pub fn point_to_ap_coords(p: &RationalPoint, k: u32, l: u32) -> Result<(BigInt, BigInt, BigInt)> {
    let b = p.x.denom();
    let d = perfect_power_root(b, l)?
        .ok_or_else(|| Error::Structure(format!("denominator {b} of x is not an {l}-th power")))?;
    let u = num_traits::pow(d.clone(), k as usize);
    let t = &p.y * BigRational::from_integer(u.clone());
    if !t.is_integer() {
        return Err(Error::Structure(format!("denominator of y does not divide d^k = {u}")));
    }
    Ok((p.x.numer().clone(), d, t.to_integer()))
}

pub fn to_ap_solution(curve: &EsCurve, p: &RationalPoint) -> Result<ApSolution> {
    let g = curve.k.gcd(&curve.l);
    if g != 1 {
        return Err(Error::Precondition(format!("gcd(k, l) = {g} != 1")));
    }
    if curve.l < 3 || !is_prime(curve.l as u64) {
        return Err(Error::Precondition(format!("l = {} is not a prime >= 3", curve.l)));
    }
    if p.y.is_zero() {
        return Err(Error::TrivialPoint { x: p.x.to_string(), y: p.y.to_string() });
    }
    if !is_on_curve(curve, p) {
        return Err(Error::NotOnCurve { x: p.x.to_string(), y: p.y.to_string() });
    }
    let (n, d, t) = point_to_ap_coords(p, curve.k, curve.l)?;
    let mut s = ApSolution::candidate(n, d, Some(t), curve.k, curve.l)?;
    s.validate()?;
    Ok(s)
}

pub fn from_ap_solution(s: &ApSolution) -> Result<(EsCurve, RationalPoint)> {
    let mut s = s.clone();
    if !s.validated {
        s.validate()?;
    }
    let t = s.t.clone().expect("validated solutions carry t");
    let curve = s.curve();
    let p = ap_coords_to_point(&s.n, &s.d, &t, s.k, s.l);
    debug_assert!(is_on_curve(&curve, &p));
    Ok((curve, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn pt(a: i64, b: i64, c: i64, d: i64) -> RationalPoint {
        RationalPoint::new(rat(a, b), rat(c, d))
    }

    #[test]
    fn genus_values() {
        let g = |k, l| genus(&EsCurve::new(k, l).unwrap());
        assert_eq!(g(2, 2), 0);
        assert_eq!(g(3, 3), 1);
        assert_eq!(g(4, 5), 6);
        for k in 2..=50 {
            for l in 2..=50 {
                assert_eq!(g(k, l) >= 2, k + l >= 7, "({k},{l})");
            }
        }
    }

    #[test]
    fn membership() {
        let c = EsCurve::new(3, 3).unwrap();
        assert!(is_on_curve(&c, &pt(-4, 3, 2, 3)));
        assert!(is_on_curve(&c, &pt(-2, 3, -2, 3)));
        assert!(is_on_curve(&c, &pt(-1, 1, 0, 1)));
        assert!(!is_on_curve(&c, &pt(1, 1, 1, 1)));
    }

    #[test]
    fn trivial() {
        let c = EsCurve::new(2, 2).unwrap();
        assert_eq!(trivial_points(&c), vec![pt(0, 1, 0, 1), pt(-1, 1, 0, 1)]);
        let c = EsCurve::new(5, 3).unwrap();
        assert_eq!(trivial_points(&c).len(), 5);
        assert!(trivial_points(&c).iter().all(|p| is_on_curve(&c, p)));
    }

    #[test]
    fn catalog() {
        let c = EsCurve::new(2, 2).unwrap();
        assert!(sander_catalog(&c, 2).points.contains(&pt(1, 3, 2, 3)));
        let c = EsCurve::new(4, 2).unwrap();
        assert_eq!(sander_catalog(&c, 0).points, vec![pt(-3, 2, -3, 4), pt(-3, 2, 3, 4)]);
        let c = EsCurve::new(6, 2).unwrap();
        let cat = sander_catalog(&c, 0);
        assert!(cat.points.is_empty());
        assert!(cat.diagnostic.is_some());
        assert_eq!(cat.minus_square.len(), 2);
        assert!(sander_catalog(&EsCurve::new(5, 5).unwrap(), 3).points.is_empty());
    }

    #[test]
    fn search_small() {
        let c = EsCurve::new(3, 3).unwrap();
        let found = search_points(&c, 10, 100);
        let mut expected = trivial_points(&c);
        expected.push(pt(-4, 3, 2, 3));
        expected.push(pt(-2, 3, -2, 3));
        expected.sort_by(canonical_cmp);
        assert_eq!(found, expected);
        let c = EsCurve::new(2, 2).unwrap();
        assert!(search_points(&c, 3, 3).contains(&pt(1, 3, 2, 3)));
    }

    #[test]
    fn shards_agree() {
        let c = EsCurve::new(2, 2).unwrap();
        let one = search_points_sharded(&c, 30, 60, 1);
        for s in [2, 4, 7, 16] {
            assert_eq!(search_points_sharded(&c, 30, 60, s), one);
        }
    }

    #[test]
    fn transforms_reject() {
        let c = EsCurve::new(2, 2).unwrap();
        assert!(matches!(to_ap_solution(&c, &pt(1, 3, 2, 3)), Err(Error::Precondition(_))));
        let c = EsCurve::new(5, 3).unwrap();
        assert!(matches!(to_ap_solution(&c, &pt(-2, 1, 0, 1)), Err(Error::TrivialPoint { .. })));
        assert!(matches!(to_ap_solution(&c, &pt(1, 1, 1, 1)), Err(Error::NotOnCurve { .. })));
    }

    #[test]
    fn validation_errors() {
        let s = ApSolution::candidate(1.into(), 1.into(), None, 2, 5).unwrap();
        match from_ap_solution(&s) {
            Err(Error::Validation { product, .. }) => assert_eq!(product, "2"),
            other => panic!("{other:?}"),
        }
        let s = ApSolution::candidate((-3).into(), 1.into(), None, 3, 5).unwrap();
        match from_ap_solution(&s) {
            Err(Error::Validation { product, .. }) => assert_eq!(product, "-6"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coordinate_round_trip() {
        let (n, d, t) = (BigInt::from(-7), BigInt::from(3), BigInt::from(11));
        let p = ap_coords_to_point(&n, &d, &t, 4, 3);
        assert_eq!(point_to_ap_coords(&p, 4, 3).unwrap(), (n, d, t));
    }
}
