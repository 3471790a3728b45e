//! Elliptic curves `y² = x³ + ax + b` over ℚ: exact group law, naive and
//! canonical heights, rational torsion, bounded point search, a numerical
//! rank lower bound and height-ball counts.

mod substitutions;

pub use substitutions::*;

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{factorize, naive_height as rational_height};
use crate::error::{Error, Result};

/// `y² = x³ + ax + b` with `4a³ + 27b² ≠ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct WeierstrassCurve {
    #[serde(serialize_with = "crate::ser::bigint")]
    pub a: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub b: BigInt,
}

impl WeierstrassCurve {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>) -> Result<Self> {
        let c = Self { a: a.into(), b: b.into() };
        if c.disc_factor().is_zero() {
            return Err(Error::Domain(format!("y^2 = x^3 + {}x + {} is singular", c.a, c.b)));
        }
        Ok(c)
    }

    /// `y² = x³ + γ`.
    pub fn mordell(gamma: impl Into<BigInt>) -> Result<Self> {
        Self::new(0, gamma)
    }

    /// `4a³ + 27b²`.
    pub fn disc_factor(&self) -> BigInt {
        BigInt::from(4) * &self.a * &self.a * &self.a + BigInt::from(27) * &self.b * &self.b
    }

    /// `−16(4a³ + 27b²)`.
    pub fn discriminant(&self) -> BigInt {
        BigInt::from(-16) * self.disc_factor()
    }

    fn rhs(&self, x: &BigRational) -> BigRational {
        x * x * x + BigRational::from_integer(self.a.clone()) * x + BigRational::from_integer(self.b.clone())
    }

    pub fn contains(&self, p: &CurvePoint) -> bool {
        match p {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => y * y == self.rhs(x),
        }
    }

    fn check(&self, p: &CurvePoint) -> Result<()> {
        match p {
            CurvePoint::Affine { x, y } if !self.contains(p) => {
                Err(Error::NotOnCurve { x: x.to_string(), y: y.to_string() })
            }
            _ => Ok(()),
        }
    }

    pub fn negate(&self, p: &CurvePoint) -> CurvePoint {
        p.negate()
    }

    pub fn add(&self, p: &CurvePoint, q: &CurvePoint) -> Result<CurvePoint> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.add_unchecked(p, q))
    }

    pub fn double(&self, p: &CurvePoint) -> Result<CurvePoint> {
        self.add(p, p)
    }

    /// `n·P` by double-and-add; negative `n` negates.
    pub fn mul(&self, n: i64, p: &CurvePoint) -> Result<CurvePoint> {
        self.check(p)?;
        let mut base = if n < 0 { p.negate() } else { p.clone() };
        let mut k = n.unsigned_abs();
        let mut acc = CurvePoint::Infinity;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add_unchecked(&acc, &base);
            }
            base = self.add_unchecked(&base, &base);
            k >>= 1;
        }
        Ok(acc)
    }

    fn add_unchecked(&self, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
        let (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) = (p, q) else {
            return if p.is_infinity() { q.clone() } else { p.clone() };
        };
        let lambda = if x1 == x2 {
            if y1 != y2 || y1.is_zero() {
                return CurvePoint::Infinity;
            }
            let three = BigRational::from_integer(3.into());
            (three * x1 * x1 + BigRational::from_integer(self.a.clone())) / (y1 * BigRational::from_integer(2.into()))
        } else {
            (y2 - y1) / (x2 - x1)
        };
        let x3 = &lambda * &lambda - x1 - x2;
        let y3 = lambda * (x1 - &x3) - y1;
        CurvePoint::Affine { x: x3, y: y3 }
    }
}

impl fmt::Display for WeierstrassCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y^2 = x^3")?;
        if !self.a.is_zero() {
            let sign = if self.a.is_negative() { '-' } else { '+' };
            write!(f, " {sign} {}x", self.a.abs())?;
        }
        if !self.b.is_zero() {
            let sign = if self.b.is_negative() { '-' } else { '+' };
            write!(f, " {sign} {}", self.b.abs())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Infinity,
    Affine { x: BigRational, y: BigRational },
}

impl CurvePoint {
    pub fn affine(x: BigRational, y: BigRational) -> Self {
        CurvePoint::Affine { x, y }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    pub fn negate(&self) -> CurvePoint {
        match self {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => CurvePoint::Affine { x: x.clone(), y: -y },
        }
    }

    fn is_integral(&self) -> bool {
        match self {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => x.is_integer() && y.is_integer(),
        }
    }
}

/// ∞ first, then by denominator of x, numerator of x, and y.
pub fn point_cmp(p: &CurvePoint, q: &CurvePoint) -> Ordering {
    match (p, q) {
        (CurvePoint::Infinity, CurvePoint::Infinity) => Ordering::Equal,
        (CurvePoint::Infinity, _) => Ordering::Less,
        (_, CurvePoint::Infinity) => Ordering::Greater,
        (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => {
            (x1.denom(), x1.numer(), y1).cmp(&(x2.denom(), x2.numer(), y2))
        }
    }
}

impl fmt::Display for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvePoint::Infinity => write!(f, "O"),
            CurvePoint::Affine { x, y } => write!(f, "({x}, {y})"),
        }
    }
}

impl Serialize for CurvePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CurvePoint::Infinity => s.serialize_str("O"),
            CurvePoint::Affine { x, y } => s.collect_seq([x.to_string(), y.to_string()]),
        }
    }
}

/// `H(P) = H(x(P))`; the point at infinity gets `H = 1`.
pub fn naive_height(p: &CurvePoint) -> BigInt {
    match p {
        CurvePoint::Infinity => BigInt::one(),
        CurvePoint::Affine { x, .. } => rational_height(x),
    }
}

/// `h(P) = ln H(P)`; zero at infinity.
pub fn weil_height(p: &CurvePoint) -> f64 {
    ln_big(&naive_height(p))
}

/// Natural log of a positive big integer as f64.
pub fn ln_big(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 900 {
        n.to_f64().unwrap_or(f64::NAN).ln()
    } else {
        let shift = bits - 64;
        (n >> shift as usize).to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// `u/v` as f64 for big integers of any size.
fn ratio_f64(u: &BigInt, v: &BigInt) -> f64 {
    let bits = u.bits().max(v.bits());
    if bits <= 900 {
        return u.to_f64().unwrap_or(f64::NAN) / v.to_f64().unwrap_or(f64::NAN);
    }
    let shift = (bits - 64) as usize;
    (u >> shift).to_f64().unwrap_or(f64::NAN) / (v >> shift).to_f64().unwrap_or(f64::NAN)
}

/// Binary forms `Φ, Ψ` with `x(2P) = Φ(X, Z)/Ψ(X, Z)` for `x(P) = X/Z`.
struct Duplication {
    a: BigInt,
    b: BigInt,
    af: f64,
    bf: f64,
}

impl Duplication {
    fn new(c: &WeierstrassCurve) -> Self {
        Self { a: c.a.clone(), b: c.b.clone(), af: c.a.to_f64().unwrap_or(f64::NAN), bf: c.b.to_f64().unwrap_or(f64::NAN) }
    }

    fn eval(&self, x: &BigInt, z: &BigInt) -> (BigInt, BigInt) {
        let (x2, z2) = (x * x, z * z);
        let phi = &x2 * &x2 - BigInt::from(2) * &self.a * &x2 * &z2 - BigInt::from(8) * &self.b * x * &z2 * z
            + &self.a * &self.a * &z2 * &z2;
        let psi = BigInt::from(4) * z * (&x2 * x + &self.a * x * &z2 + &self.b * &z2 * z);
        (phi, psi)
    }

    fn eval_f64(&self, x: f64, z: f64) -> (f64, f64) {
        let (a, b) = (self.af, self.bf);
        let (x2, z2) = (x * x, z * z);
        let phi = x2 * x2 - 2.0 * a * x2 * z2 - 8.0 * b * x * z2 * z + a * a * z2 * z2;
        let psi = 4.0 * z * (x2 * x + a * x * z2 + b * z2 * z);
        (phi, psi)
    }

    /// `Res(Φ, Ψ)` as binary quartic forms, via the Sylvester matrix.
    fn resultant(&self) -> BigInt {
        let (a, b) = (&self.a, &self.b);
        let phi = [BigInt::one(), BigInt::zero(), -2 * a, -8 * b, a * a];
        let psi = [BigInt::zero(), BigInt::from(4), BigInt::zero(), 4 * a, 4 * b];
        let mut m = vec![vec![BigInt::zero(); 8]; 8];
        for r in 0..4 {
            for c in 0..5 {
                m[r][r + c] = phi[c].clone();
                m[r + 4][r + c] = psi[c].clone();
            }
        }
        bareiss_det(m)
    }

    /// Upper bound for `ln max(|Φ(u,v)|, |Ψ(u,v)|)` on `max(|u|,|v|) = 1`.
    fn log_upper(&self) -> f64 {
        let (a, b) = (self.af.abs(), self.bf.abs());
        (1.0 + 2.0 * a + 8.0 * b + a * a).max(4.0 * (1.0 + a + b)).ln()
    }
}

/// Fraction-free Gaussian elimination.
fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else { return BigInt::zero() };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Iteration cap for [`canonical_height`].
pub const MAX_DOUBLINGS: u32 = 64;

/// Canonical height `ĥ(P) = lim h(2ⁿP)/4ⁿ` with error below `tol`.
///
/// With `x(2ⁿP) = Xₙ/Zₙ` in lowest terms, `h(2ⁿ⁺¹P) = 4h(2ⁿP) + cₙ − ln gₙ`,
/// where `cₙ = ln max(|Φ|, |Ψ|)` at the normalized pair `(Xₙ, Zₙ)/max` and
/// `gₙ = gcd(Φ(Xₙ, Zₙ), Ψ(Xₙ, Zₙ))`. So `ĥ = h(P) + Σ 4^{−(n+1)}(cₙ − ln gₙ)`.
/// `cₙ` is tracked in floating point on the projective line; `gₙ` divides
/// the resultant `R` of `Φ, Ψ` and is computed exactly from `(Xₙ, Zₙ)`
/// reduced modulo a multiple of `R`. Each term is bounded by
/// `B = ln|R| + max c`, so stopping after `N` terms leaves at most
/// `B·4^{−N}/3`.
pub fn canonical_height(curve: &WeierstrassCurve, p: &CurvePoint, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    curve.check(p)?;
    if is_torsion(curve, p) {
        return Ok(0.0);
    }
    let CurvePoint::Affine { x, .. } = p else { return Ok(0.0) };
    let dup = Duplication::new(curve);
    let r = dup.resultant().abs();
    let bound = ln_big(&r) + dup.log_upper().max(0.0) + 1.0;
    let mut n_terms = 0u32;
    while bound * 4f64.powi(-(n_terms as i32)) / 3.0 >= tol {
        n_terms += 1;
        if n_terms > MAX_DOUBLINGS {
            return Err(Error::Resource(format!("tolerance {tol} needs more than {MAX_DOUBLINGS} doublings")));
        }
    }

    let (xn, zn) = (x.numer().clone(), x.denom().clone());
    let mut h = ln_big(&xn.abs().max(zn.clone()));
    // Projective pair with max(|u|, |v|) = 1.
    let (mut u, mut v) = if xn.abs() >= zn {
        (xn.signum().to_f64().unwrap_or(1.0), ratio_f64(&zn, &xn.abs()))
    } else {
        (ratio_f64(&xn, &zn), 1.0)
    };
    let mut modulus = num_traits::pow(r.clone(), n_terms as usize + 1);
    let mut xm = xn.mod_floor(&modulus);
    let mut zm = zn.mod_floor(&modulus);
    let mut weight = 0.25;
    for _ in 0..n_terms {
        let (phi, psi) = dup.eval_f64(u, v);
        let m = phi.abs().max(psi.abs());
        let c = m.ln();
        u = phi / m;
        v = psi / m;

        let (pm, qm) = dup.eval(&xm, &zm);
        let g = pm.gcd(&qm).gcd(&r);
        modulus /= &g;
        xm = (pm / &g).mod_floor(&modulus);
        zm = (qm / &g).mod_floor(&modulus);

        h += weight * (c - ln_big(&g));
        weight /= 4.0;
    }
    if !h.is_finite() {
        return Err(Error::Resource(format!("canonical height of {p} did not converge")));
    }
    Ok(h)
}

/// Torsion test: a torsion point has order at most 12 and all its
/// multiples are integral on an integral model.
pub fn is_torsion(curve: &WeierstrassCurve, p: &CurvePoint) -> bool {
    let mut q = p.clone();
    for _ in 1..=12 {
        if q.is_infinity() {
            return true;
        }
        if !q.is_integral() {
            return false;
        }
        q = curve.add_unchecked(&q, p);
    }
    q.is_infinity()
}

fn divisors(n: &BigInt) -> Result<Vec<BigInt>> {
    let mut out = vec![BigInt::one()];
    for (p, e) in factorize(n)? {
        let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
        for d in &out {
            let mut pk = BigInt::one();
            for _ in 0..=e {
                next.push(d * &pk);
                pk *= &p;
            }
        }
        out = next;
    }
    out.sort();
    Ok(out)
}

/// Integer roots of `x³ + ax + c`.
fn integer_roots(a: &BigInt, c: &BigInt) -> Result<Vec<BigInt>> {
    let f = |x: &BigInt| x * x * x + a * x + c;
    let mut out = Vec::new();
    if c.is_zero() {
        out.push(BigInt::zero());
        // x² + a = 0.
        let m = -a;
        if m.is_positive() {
            let s = m.sqrt();
            if &s * &s == m {
                out.push(s.clone());
                out.push(-s);
            }
        }
    } else {
        for d in divisors(c)? {
            for x in [d.clone(), -d] {
                if f(&x).is_zero() {
                    out.push(x);
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Rational torsion subgroup, ∞ first then canonical order.
///
/// Nagell–Lutz candidates (integral, `y = 0` or `y² | 4a³ + 27b²`) are kept
/// when they pass [`is_torsion`]; the result is then checked to be closed
/// under addition and no larger than 16.
pub fn torsion_points(curve: &WeierstrassCurve) -> Result<Vec<CurvePoint>> {
    let disc = curve.disc_factor().abs();
    let mut ys: Vec<BigInt> = vec![BigInt::zero()];
    for d in divisors(&disc)? {
        let s = d.sqrt();
        if &s * &s == d && (&disc % &d).is_zero() {
            ys.push(s);
        }
    }
    ys.sort();
    ys.dedup();
    let mut pts = vec![CurvePoint::Infinity];
    for y in ys {
        let c = &curve.b - &y * &y;
        for x in integer_roots(&curve.a, &c)? {
            let signs: &[i32] = if y.is_zero() { &[1] } else { &[1, -1] };
            for &s in signs {
                let p = CurvePoint::affine(BigRational::from_integer(x.clone()), BigRational::from_integer(&y * s));
                if is_torsion(curve, &p) {
                    pts.push(p);
                }
            }
        }
    }
    pts.sort_by(point_cmp);
    pts.dedup();
    for p in &pts {
        for q in &pts {
            let s = curve.add_unchecked(p, q);
            if !pts.contains(&s) {
                return Err(Error::Structure(format!("torsion set not closed: {p} + {q} = {s}")));
            }
        }
    }
    if pts.len() > 16 {
        return Err(Error::Structure(format!("{} torsion points exceed the Mazur bound", pts.len())));
    }
    Ok(pts)
}

const SQUARES_MOD_64: u64 = {
    let mut m = 0u64;
    let mut i = 0;
    while i < 64 {
        m |= 1 << (i * i % 64);
        i += 1;
    }
    m
};

fn is_square_i128(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    if (SQUARES_MOD_64 >> (n & 63)) & 1 == 0 {
        return None;
    }
    let mut r = (n as f64).sqrt() as i128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    (r * r == n).then_some(r)
}

fn search_chunk(curve: &WeierstrassCurve, h_bound: u64, p_lo: i64, p_hi: i64) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    let small = curve.a.to_i128().zip(curve.b.to_i128()).filter(|(a, b)| a.abs() < 1 << 40 && b.abs() < 1 << 40);
    let qmax = (h_bound as f64).sqrt() as u64 + 1;
    for q in 1..=qmax {
        let q2 = q * q;
        if q2 > h_bound {
            break;
        }
        let (q2i, q4, q6) = (q2 as i128, (q2 as i128).pow(2), (q2 as i128).pow(3));
        for p in p_lo..=p_hi {
            if (p as i128).gcd(&(q as i128)) != 1 {
                continue;
            }
            // y² q⁶ = p³ + a p q⁴ + b q⁶.
            let pi = p as i128;
            let fast = small.and_then(|(a, b)| {
                let t1 = pi.checked_mul(pi)?.checked_mul(pi)?;
                let t2 = a.checked_mul(pi)?.checked_mul(q4)?;
                let t3 = b.checked_mul(q6)?;
                t1.checked_add(t2)?.checked_add(t3)
            });
            let root = match fast {
                Some(n) => is_square_i128(n).map(BigInt::from),
                None => {
                    let (pb, qb) = (BigInt::from(p), BigInt::from(q2i));
                    let n = &pb * &pb * &pb + &curve.a * &pb * &qb * &qb + &curve.b * &qb * &qb * &qb;
                    if n.is_negative() {
                        None
                    } else {
                        let r = n.sqrt();
                        (&r * &r == n).then_some(r)
                    }
                }
            };
            let Some(r) = root else { continue };
            let x = BigRational::new(BigInt::from(p), BigInt::from(q2));
            let y = BigRational::new(r, BigInt::from(q2i * q as i128));
            if !y.is_zero() {
                out.push(CurvePoint::affine(x.clone(), -y.clone()));
            }
            out.push(CurvePoint::affine(x, y));
        }
    }
    out
}

/// All affine points with `H(x) ≤ h_bound`, in canonical order.
///
/// On an integral model `x = p/q²` and `y = r/q³` in lowest terms, so only
/// square denominators are visited.
pub fn search_points_naive(curve: &WeierstrassCurve, h_bound: u64) -> Vec<CurvePoint> {
    search_points_naive_sharded(curve, h_bound, 1)
}

pub fn search_points_naive_sharded(curve: &WeierstrassCurve, h_bound: u64, shards: usize) -> Vec<CurvePoint> {
    let hb = h_bound as i64;
    let shards = shards.max(1) as i64;
    let step = (2 * hb + 1 + shards - 1) / shards;
    let ranges: Vec<(i64, i64)> = (0..shards)
        .map(|s| (-hb + s * step, (-hb + (s + 1) * step - 1).min(hb)))
        .filter(|(lo, hi)| lo <= hi)
        .collect();
    let mut out: Vec<CurvePoint> =
        ranges.par_iter().flat_map_iter(|&(lo, hi)| search_chunk(curve, h_bound, lo, hi)).collect();
    out.sort_by(point_cmp);
    out
}

/// Default determinant threshold for [`rank_lower_bound`].
pub const GRAM_TOLERANCE: f64 = 1e-6;
/// Tolerance used for canonical heights inside pairings.
pub const HEIGHT_TOLERANCE: f64 = 1e-11;
/// Points tried by the greedy rank search.
pub const RANK_CANDIDATES: usize = 24;

#[derive(Clone, Debug, Serialize)]
pub struct RankBound {
    pub rank: usize,
    pub basis: Vec<CurvePoint>,
    /// Height pairings of the basis.
    pub gram: Vec<Vec<f64>>,
    pub gram_determinant: f64,
}

/// `⟨P, Q⟩ = (ĥ(P + Q) − ĥ(P) − ĥ(Q))/2`.
pub fn height_pairing(curve: &WeierstrassCurve, p: &CurvePoint, q: &CurvePoint) -> Result<f64> {
    let s = curve.add(p, q)?;
    let t = HEIGHT_TOLERANCE;
    Ok((canonical_height(curve, &s, t)? - canonical_height(curve, p, t)? - canonical_height(curve, q, t)?) / 2.0)
}

fn det_f64(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap_or(k);
        if m[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

/// Greedy: walk the nontorsion points by increasing `ĥ` and keep a point
/// when the Gram determinant of the kept set stays above `tol`.
pub fn rank_lower_bound(curve: &WeierstrassCurve, points: &[CurvePoint], tol: f64) -> Result<RankBound> {
    let mut cands: Vec<(f64, CurvePoint)> = Vec::new();
    for p in points {
        if let CurvePoint::Affine { y, .. } = p {
            if y.is_negative() {
                continue;
            }
        }
        let h = canonical_height(curve, p, HEIGHT_TOLERANCE)?;
        if h > 0.0 {
            cands.push((h, p.clone()));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| point_cmp(&a.1, &b.1)));
    cands.truncate(RANK_CANDIDATES);
    let mut basis: Vec<CurvePoint> = Vec::new();
    let mut gram: Vec<Vec<f64>> = Vec::new();
    let mut det = 1.0;
    for (h, p) in cands {
        let mut row = Vec::with_capacity(basis.len() + 1);
        for q in &basis {
            row.push(height_pairing(curve, &p, q)?);
        }
        row.push(h);
        let mut trial = gram.clone();
        for (i, r) in trial.iter_mut().enumerate() {
            r.push(row[i]);
        }
        trial.push(row);
        let d = det_f64(trial.clone());
        if d > tol {
            gram = trial;
            basis.push(p);
            det = d;
        }
    }
    Ok(RankBound { rank: basis.len(), basis, gram, gram_determinant: det })
}

/// Radius `H`, floor `L` and rank `r` of a height-ball count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeightBallQuery {
    pub h: f64,
    pub l: f64,
    pub r: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeightBallCount {
    pub count: usize,
    /// `16·(1 + 2√(H/L))^r`.
    pub bound_nac: f64,
    /// `16·(9H/L)^{r/2}`.
    pub bound_prop: f64,
    pub nac_ok: bool,
    pub prop_ok: bool,
    /// `3√(H/L) ≥ 1 + 2√(H/L)`.
    pub bounds_consistent: bool,
}

/// Slack when comparing a canonical height against the radius.
pub const BALL_SLACK: f64 = 1e-9;

pub fn ball_bounds(q: &HeightBallQuery) -> Result<(f64, f64)> {
    if !(q.l > 0.0) || !(q.h > 0.0) {
        return Err(Error::Precondition(format!("H and L must be positive, got H = {}, L = {}", q.h, q.l)));
    }
    if q.r >= 1 && q.h < q.l {
        return Err(Error::Precondition(format!("H = {} is below L = {} with r = {}", q.h, q.l, q.r)));
    }
    let ratio = q.h / q.l;
    Ok((16.0 * (1.0 + 2.0 * ratio.sqrt()).powi(q.r as i32), 16.0 * (9.0 * ratio).powf(q.r as f64 / 2.0)))
}

/// `#{P : ĥ(P) ≤ H}` over ∞ and the given affine points, with both bounds.
pub fn count_height_ball(curve: &WeierstrassCurve, q: &HeightBallQuery, points: &[CurvePoint]) -> Result<HeightBallCount> {
    let heights: Vec<f64> =
        points.iter().map(|p| canonical_height(curve, p, HEIGHT_TOLERANCE)).collect::<Result<_>>()?;
    count_with_heights(q, points, &heights)
}

fn count_with_heights(q: &HeightBallQuery, points: &[CurvePoint], heights: &[f64]) -> Result<HeightBallCount> {
    let affine = points.iter().zip(heights).filter(|(p, &h)| !p.is_infinity() && h <= q.h + BALL_SLACK).count();
    ball_count(q, affine + 1)
}

fn ball_count(q: &HeightBallQuery, count: usize) -> Result<HeightBallCount> {
    let (bound_nac, bound_prop) = ball_bounds(q)?;
    let s = (q.h / q.l).sqrt();
    Ok(HeightBallCount {
        count,
        bound_nac,
        bound_prop,
        nac_ok: count as f64 <= bound_nac,
        prop_ok: count as f64 <= bound_prop,
        bounds_consistent: q.h < q.l || 3.0 * s >= 1.0 + 2.0 * s,
    })
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().copied().chain((0..n).map(|j| if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k] == 0.0 {
            return None;
        }
        a.swap(piv, k);
        let d = a[k][k];
        a[k].iter_mut().for_each(|v| *v /= d);
        for i in 0..n {
            if i != k {
                let f = a[i][k];
                for j in 0..2 * n {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Coefficient vectors visited by [`lattice_ball`] before giving up.
pub const LATTICE_BOX_CAP: u64 = 1_000_000;

/// Exact points `T + Σ nᵢPᵢ` with `nᵀGn ≤ H`, for every torsion point `T`.
///
/// `|nᵢ| ≤ √(H·(G⁻¹)ᵢᵢ)` bounds the box that is scanned.
pub fn lattice_ball(
    curve: &WeierstrassCurve,
    basis: &[CurvePoint],
    gram: &[Vec<f64>],
    torsion: &[CurvePoint],
    h: f64,
) -> Result<Vec<CurvePoint>> {
    let r = basis.len();
    let radius = h + BALL_SLACK;
    let bounds: Vec<i64> = if r == 0 {
        Vec::new()
    } else {
        let inv = invert(gram).ok_or_else(|| Error::Structure("singular Gram matrix".into()))?;
        (0..r).map(|i| (radius * inv[i][i]).max(0.0).sqrt().floor() as i64).collect()
    };
    let size: u64 = bounds.iter().map(|&b| 2 * b as u64 + 1).product();
    if size > LATTICE_BOX_CAP {
        return Err(Error::Resource(format!("lattice box of {size} vectors exceeds {LATTICE_BOX_CAP}")));
    }
    let mut out = Vec::new();
    let mut n: Vec<i64> = bounds.iter().map(|&b| -b).collect();
    loop {
        let form: f64 = (0..r).map(|i| (0..r).map(|j| n[i] as f64 * gram[i][j] * n[j] as f64).sum::<f64>()).sum();
        if form <= radius {
            let mut p = CurvePoint::Infinity;
            for (k, b) in n.iter().zip(basis) {
                p = curve.add_unchecked(&p, &curve.mul(*k, b)?);
            }
            for t in torsion {
                out.push(curve.add_unchecked(&p, t));
            }
        }
        let Some(i) = (0..r).find(|&i| n[i] < bounds[i]) else { break };
        n[i] += 1;
        for v in n.iter_mut().take(i) {
            *v = 0;
        }
        for (v, b) in n.iter_mut().zip(&bounds).take(i) {
            *v = -b;
        }
    }
    out.sort_by(point_cmp);
    out.dedup();
    Ok(out)
}

/// Largest naive-height radius [`ball_census`] will enumerate.
pub const CENSUS_SEARCH_CAP: u64 = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct CensusRow {
    pub multiplier: f64,
    pub h: f64,
    /// Ball points found by the naive search, ∞ included.
    pub search_count: usize,
    /// Ball points generated from the basis and torsion.
    pub lattice_count: usize,
    /// Count of the union; this is what the bounds are checked against.
    pub ball: HeightBallCount,
}

/// Height-ball counts for one curve at radii `H = m·L`.
#[derive(Clone, Debug, Serialize)]
pub struct BallCensus {
    pub curve: WeierstrassCurve,
    pub torsion: usize,
    pub rank_lower: usize,
    /// Rank used on the bound side.
    pub rank_used: usize,
    pub l: f64,
    /// Where `L` came from: `"observed"`, `"config"` or `"default"`.
    pub l_source: &'static str,
    /// `max |h − ĥ|` over the first search plus the margin.
    pub gap: f64,
    pub search_bound: u64,
    /// The naive search reached `exp(H + gap)` for the largest radius.
    pub exhaustive: bool,
    pub rows: Vec<CensusRow>,
}

impl BallCensus {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.ball.nac_ok && r.ball.prop_ok)
    }
}

/// Search to `initial_bound`, estimate `L`, the `|h − ĥ|` gap and the rank,
/// then re-search to the naive height `exp(H + gap)` needed for the largest
/// radius (capped at [`CENSUS_SEARCH_CAP`]). Each ball is counted over the
/// union of the search results and the lattice points spanned by the rank
/// basis and the torsion, which covers radii the search cannot reach when
/// the basis generates the group.
pub fn ball_census(
    curve: &WeierstrassCurve,
    multipliers: &[f64],
    initial_bound: u64,
    gap_margin: f64,
    l_override: Option<f64>,
    rank_upper: Option<usize>,
) -> Result<BallCensus> {
    let torsion = torsion_points(curve)?;
    let first = search_points_naive(curve, initial_bound);
    let heights: Vec<f64> =
        first.iter().map(|p| canonical_height(curve, p, HEIGHT_TOLERANCE)).collect::<Result<_>>()?;
    let gap = first.iter().zip(&heights).map(|(p, h)| (weil_height(p) - h).abs()).fold(0.0, f64::max) + gap_margin;
    let observed = heights.iter().copied().filter(|&h| h > 0.0).fold(f64::INFINITY, f64::min);
    let (l, l_source) = match l_override {
        Some(l) => (l, "config"),
        None if observed.is_finite() => (observed, "observed"),
        None => (1.0, "default"),
    };
    let rank = rank_lower_bound(curve, &first, GRAM_TOLERANCE)?;
    let rank_used = rank_upper.unwrap_or(rank.rank).max(rank.rank);
    let h_max = multipliers.iter().copied().fold(0.0, f64::max) * l;
    let wanted = (h_max + gap).exp().ceil();
    let exhaustive = wanted <= CENSUS_SEARCH_CAP as f64;
    let search_bound = if exhaustive { (wanted as u64).max(initial_bound) } else { CENSUS_SEARCH_CAP };
    let (points, heights) = if search_bound == initial_bound {
        (first, heights)
    } else {
        let pts = search_points_naive_sharded(curve, search_bound, rayon::current_num_threads());
        let hs = pts.par_iter().map(|p| canonical_height(curve, p, HEIGHT_TOLERANCE)).collect::<Result<Vec<_>>>()?;
        (pts, hs)
    };
    let mut rows = Vec::new();
    for &m in multipliers {
        let q = HeightBallQuery { h: m * l, l, r: rank_used };
        let mut found: Vec<CurvePoint> = points
            .iter()
            .zip(&heights)
            .filter(|(_, &h)| h <= q.h + BALL_SLACK)
            .map(|(p, _)| p.clone())
            .collect();
        found.push(CurvePoint::Infinity);
        let lattice = lattice_ball(curve, &rank.basis, &rank.gram, &torsion, q.h)?;
        let search_count = found.len();
        let lattice_count = lattice.len();
        found.extend(lattice);
        found.sort_by(point_cmp);
        found.dedup();
        rows.push(CensusRow { multiplier: m, h: q.h, search_count, lattice_count, ball: ball_count(&q, found.len())? });
    }
    Ok(BallCensus {
        curve: curve.clone(),
        torsion: torsion.len(),
        rank_lower: rank.rank,
        rank_used,
        l,
        l_source,
        gap,
        search_bound,
        exhaustive,
        rows,
    })
}

/// Scale away primes with `p⁴ | a` and `p⁶ | b`. Returns the reduced curve
/// and `u` with `(x, y) ↦ (x/u², y/u³)`.
pub fn quasi_minimal(a: &BigInt, b: &BigInt) -> Result<(WeierstrassCurve, BigInt)> {
    let g = a.gcd(b);
    let mut u = BigInt::one();
    let (mut a, mut b) = (a.clone(), b.clone());
    if !g.is_zero() {
        for (p, _) in factorize(&g)? {
            let (p4, p6) = (num_traits::pow(p.clone(), 4), num_traits::pow(p.clone(), 6));
            while (&a % &p4).is_zero() && (&b % &p6).is_zero() {
                a /= &p4;
                b /= &p6;
                u *= &p;
            }
        }
    }
    Ok((WeierstrassCurve::new(a, b)?, u))
}

/// `ω(D)` for the Mordell constant `D`.
pub fn omega_of(d: &BigInt) -> Result<usize> {
    crate::arith::omega(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn pt(x: BigRational, y: BigRational) -> CurvePoint {
        CurvePoint::affine(x, y)
    }

    #[test]
    fn group_law_examples() {
        let e = WeierstrassCurve::mordell(-2).unwrap();
        let p = pt(rat(3, 1), rat(5, 1));
        assert_eq!(e.double(&p).unwrap(), pt(rat(129, 100), rat(-383, 1000)));
        assert_eq!(e.add(&p, &p.negate()).unwrap(), CurvePoint::Infinity);
        assert_eq!(e.add(&p, &CurvePoint::Infinity).unwrap(), p);
        assert!(e.add(&pt(rat(1, 1), rat(1, 1)), &p).is_err());
        assert_eq!(e.mul(3, &p).unwrap(), e.add(&e.double(&p).unwrap(), &p).unwrap());
        assert_eq!(e.mul(-1, &p).unwrap(), p.negate());
    }

    #[test]
    fn heights() {
        assert_eq!(naive_height(&pt(rat(3, 1), rat(5, 1))), BigInt::from(3));
        assert_eq!(naive_height(&pt(rat(129, 100), rat(-383, 1000))), BigInt::from(129));
        assert_eq!(naive_height(&pt(rat(-4, 3), rat(1, 1))), BigInt::from(4));
        assert_eq!(weil_height(&CurvePoint::Infinity), 0.0);
    }

    #[test]
    fn canonical_height_properties() {
        let e = WeierstrassCurve::mordell(-2).unwrap();
        let p = pt(rat(3, 1), rat(5, 1));
        let t = 1e-11;
        let h1 = canonical_height(&e, &p, t).unwrap();
        let h2 = canonical_height(&e, &e.double(&p).unwrap(), t).unwrap();
        assert!(h1 > 0.0);
        assert!((h2 - 4.0 * h1).abs() < 4.0 * t, "{h1} {h2}");
        let h3 = canonical_height(&e, &e.mul(3, &p).unwrap(), t).unwrap();
        assert!((h3 - 9.0 * h1).abs() < 1e-9);
        let e1 = WeierstrassCurve::mordell(1).unwrap();
        assert_eq!(canonical_height(&e1, &pt(rat(2, 1), rat(3, 1)), t).unwrap(), 0.0);
    }

    #[test]
    fn resultant_matches_discriminant() {
        for (a, b) in [(0, -2), (0, 1), (-1, 0), (3, 7)] {
            let e = WeierstrassCurve::new(a, b).unwrap();
            let r = Duplication::new(&e).resultant();
            assert_eq!(r.abs(), BigInt::from(256) * e.disc_factor() * e.disc_factor());
        }
    }

    #[test]
    fn torsion_examples() {
        let t = torsion_points(&WeierstrassCurve::mordell(1).unwrap()).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.contains(&pt(rat(-1, 1), rat(0, 1))));
        assert!(t.contains(&pt(rat(2, 1), rat(-3, 1))));
        assert_eq!(torsion_points(&WeierstrassCurve::mordell(-2).unwrap()).unwrap(), vec![CurvePoint::Infinity]);
        // Z/2 × Z/2 on y² = x³ − x.
        assert_eq!(torsion_points(&WeierstrassCurve::new(-1, 0).unwrap()).unwrap().len(), 4);
    }

    #[test]
    fn search_examples() {
        let e = WeierstrassCurve::mordell(-2).unwrap();
        assert!(search_points_naive(&e, 3).contains(&pt(rat(3, 1), rat(5, 1))));
        let e1 = WeierstrassCurve::mordell(1).unwrap();
        let pts = search_points_naive(&e1, 2);
        for p in [pt(rat(0, 1), rat(1, 1)), pt(rat(0, 1), rat(-1, 1)), pt(rat(-1, 1), rat(0, 1)), pt(rat(2, 1), rat(3, 1))] {
            assert!(pts.contains(&p), "{p}");
        }
        let big = search_points_naive(&e, 200);
        assert!(big.iter().all(|p| e.contains(p)));
        assert!(big.contains(&pt(rat(129, 100), rat(383, 1000))));
        assert_eq!(big, search_points_naive_sharded(&e, 200, 7));
    }

    #[test]
    fn ranks() {
        let e = WeierstrassCurve::mordell(-2).unwrap();
        let pts = search_points_naive(&e, 10);
        assert!(rank_lower_bound(&e, &pts, GRAM_TOLERANCE).unwrap().rank >= 1);
        let e1 = WeierstrassCurve::mordell(1).unwrap();
        assert_eq!(rank_lower_bound(&e1, &search_points_naive(&e1, 50), GRAM_TOLERANCE).unwrap().rank, 0);
        let p = pt(rat(3, 1), rat(5, 1));
        let two = e.double(&p).unwrap();
        assert_eq!(rank_lower_bound(&e, &[p, two], GRAM_TOLERANCE).unwrap().rank, 1);
    }

    #[test]
    fn ball_examples() {
        let e1 = WeierstrassCurve::mordell(1).unwrap();
        let q = HeightBallQuery { h: 1.0, l: 1.0, r: 0 };
        let c = count_height_ball(&e1, &q, &search_points_naive(&e1, 10)).unwrap();
        assert_eq!(c.count, 6);
        assert!(c.nac_ok && c.prop_ok);

        let e = WeierstrassCurve::mordell(-2).unwrap();
        let l = canonical_height(&e, &pt(rat(3, 1), rat(5, 1)), 1e-11).unwrap();
        let c = count_height_ball(&e, &HeightBallQuery { h: l, l, r: 1 }, &search_points_naive(&e, 10)).unwrap();
        assert!(c.count >= 3 && c.count as f64 <= 48.0);
        assert!(c.nac_ok && c.prop_ok && c.bounds_consistent);
        assert!(ball_bounds(&HeightBallQuery { h: 0.5, l: 1.0, r: 1 }).is_err());
    }

    #[test]
    fn quasi_minimal_scaling() {
        let (e, u) = quasi_minimal(&BigInt::from(0), &BigInt::from(-2 * 64)).unwrap();
        assert_eq!((e.b.clone(), u), (BigInt::from(-2), BigInt::from(2)));
        let (e, u) = quasi_minimal(&BigInt::from(16), &BigInt::from(32)).unwrap();
        assert_eq!((e.a, e.b, u), (BigInt::from(16), BigInt::from(32), BigInt::one()));
    }
}
