//! Exact integer and rational primitives shared by every other module.
//!
//! Rationals are `num_rational::BigRational`, which is kept reduced with a
//! positive denominator, so equality and naive heights are exact.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type ExactRational = BigRational;

/// Largest trial divisor tried by [`factorize`] before giving up.
pub const TRIAL_DIVISION_CAP: u64 = 50_000_000;

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> BigInt {
    BigInt::from(n)
}

/// Naive height `H(a/q) = max(|a|, q)` of a reduced fraction.
pub fn naive_height(r: &BigRational) -> BigInt {
    let a = r.numer().abs();
    let q = r.denom().clone();
    if a > q {
        a
    } else {
        q
    }
}

/// Ascending list of all primes up to `limit`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn new(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::Domain(format!("sieve limit {limit} < 2")));
        }
        let n = usize::try_from(limit)
            .map_err(|_| Error::Resource(format!("sieve limit {limit} too large")))?;
        let mut composite = vec![false; n + 1];
        let mut primes = Vec::new();
        for i in 2..=n {
            if composite[i] {
                continue;
            }
            primes.push(i as u64);
            let mut j = i.saturating_mul(i);
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
        Ok(Self { limit, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// `π(limit)`.
    pub fn pi(&self) -> usize {
        self.primes.len()
    }

    /// `π(x)` for `x <= limit`.
    pub fn pi_of(&self, x: u64) -> usize {
        self.primes.partition_point(|&p| p <= x)
    }

    pub fn contains(&self, p: u64) -> bool {
        self.primes.binary_search(&p).is_ok()
    }

    /// Primes strictly below `bound`.
    pub fn below(&self, bound: u64) -> &[u64] {
        &self.primes[..self.primes.partition_point(|&p| p < bound)]
    }

    /// Smallest prime in the open interval `(lo, hi)`, looked up in the
    /// table. Falls back to trial division past the table limit.
    pub fn prime_in_interval(&self, lo: u64, hi: u64) -> Option<u64> {
        if hi <= lo.saturating_add(1) {
            return None;
        }
        if hi - 1 <= self.limit {
            let idx = self.primes.partition_point(|&p| p <= lo);
            return self.primes.get(idx).copied().filter(|&p| p < hi);
        }
        prime_in_interval(lo, hi)
    }
}

pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    PrimeTable::new(limit)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller–Rabin; the first twelve prime bases suffice below 2⁶⁴.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'bases: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// A nontrivial factor of an odd composite `n` (Pollard rho, Brent's cycle
/// detection with batched gcds).
fn rho_factor(n: u64) -> u64 {
    for c in 1u64.. {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut y, mut r, mut q, mut g) = (2u64, 1u64, 1u64, 1u64);
        let (mut x, mut ys) = (y, y);
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..128.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
    }
    unreachable!()
}

fn factor_u64_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = rho_factor(n);
    factor_u64_into(d, out);
    factor_u64_into(n / d, out);
}

/// Prime factorisation of a machine word, ascending.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut primes = Vec::new();
    for p in [2u64, 3, 5, 7, 11, 13] {
        while n > 0 && n % p == 0 {
            primes.push(p);
            n /= p;
        }
    }
    if n > 1 {
        factor_u64_into(n, &mut primes);
    }
    primes.sort_unstable();
    let mut out: Vec<(u64, u32)> = Vec::new();
    for p in primes {
        match out.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

/// Smallest prime `p` with `lo < p < hi`.
pub fn prime_in_interval(lo: u64, hi: u64) -> Option<u64> {
    (lo.saturating_add(1)..hi).find(|&c| is_prime(c))
}

/// `v_p(n)`: the exponent of `p` in `n`.
pub fn p_valuation(n: &BigInt, p: u64) -> Result<u32> {
    if n.is_zero() {
        return Err(Error::Domain("valuation of 0 is infinite".into()));
    }
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    let mut m = n.magnitude().clone();
    let p_big = BigUint::from(p);
    let mut r = 0;
    loop {
        let (q, rem) = m.div_rem(&p_big);
        if !rem.is_zero() {
            return Ok(r);
        }
        m = q;
        r += 1;
    }
}

/// Valuation of `n!` at `p` (Legendre's formula).
pub fn factorial_valuation(n: u64, p: u64) -> u64 {
    let mut total = 0;
    let mut m = n / p;
    while m > 0 {
        total += m;
        m /= p;
    }
    total
}

/// Strip every prime `< bound` from `|n|`.
///
/// Returns `(smooth, rough)` with `smooth > 0`, `smooth * rough = n`, every
/// prime factor of `smooth` below `bound`, and `rough` carrying the sign.
pub fn smooth_rough_split(n: &BigInt, bound: u64) -> Result<(BigInt, BigInt)> {
    if n.is_zero() {
        return Err(Error::Domain("cannot split 0".into()));
    }
    let mut rough = n.magnitude().clone();
    let mut smooth = BigUint::one();
    for p in 2..bound {
        if p > 3 && (p % 2 == 0 || p % 3 == 0) {
            continue;
        }
        if rough.is_one() {
            break;
        }
        if !is_prime(p) {
            continue;
        }
        strip_prime(&mut rough, &mut smooth, p);
    }
    Ok((
        BigInt::from(smooth),
        BigInt::from_biguint(n.sign(), rough),
    ))
}

/// Same as [`smooth_rough_split`] but iterating over a precomputed list of
/// primes (all `< bound`).
pub fn smooth_rough_split_with(n: &BigInt, primes_below_bound: &[u64]) -> Result<(BigInt, BigInt)> {
    if n.is_zero() {
        return Err(Error::Domain("cannot split 0".into()));
    }
    if let Some(m) = n.magnitude().to_u64() {
        let mut rough = m;
        let mut smooth: u128 = 1;
        for &p in primes_below_bound {
            if rough == 1 {
                break;
            }
            while rough % p == 0 {
                rough /= p;
                smooth *= p as u128;
            }
        }
        return Ok((BigInt::from(smooth), BigInt::from(rough) * n.signum()));
    }
    let mut rough = n.magnitude().clone();
    let mut smooth = BigUint::one();
    for &p in primes_below_bound {
        if rough.is_one() {
            break;
        }
        strip_prime(&mut rough, &mut smooth, p);
    }
    Ok((
        BigInt::from(smooth),
        BigInt::from_biguint(n.sign(), rough),
    ))
}

fn strip_prime(rough: &mut BigUint, smooth: &mut BigUint, p: u64) {
    let p_big = BigUint::from(p);
    loop {
        let (q, rem) = rough.div_rem(&p_big);
        if !rem.is_zero() {
            break;
        }
        *rough = q;
        *smooth *= &p_big;
    }
}

/// Exact `ℓ`-th root of `n`, if one exists.
pub fn perfect_power_root(n: &BigInt, l: u32) -> Result<Option<BigInt>> {
    if l < 2 {
        return Err(Error::Domain(format!("exponent {l} < 2")));
    }
    if l % 2 == 0 && n.is_negative() {
        return Err(Error::Domain(format!(
            "even exponent {l} with negative radicand {n}"
        )));
    }
    let r = n.nth_root(l);
    Ok((r.pow(l) == *n).then_some(r))
}

/// `ℓ`-th root of a rational, if it is a perfect power (sign-adjusted for
/// odd `ℓ`). Returns `Ok(None)` for negative values under even `ℓ`.
pub fn rational_root(x: &BigRational, l: u32) -> Option<BigRational> {
    if l % 2 == 0 && x.is_negative() {
        return None;
    }
    let num = perfect_power_root(x.numer(), l).ok()??;
    let den = perfect_power_root(x.denom(), l).ok()??;
    Some(BigRational::new(num, den))
}

/// Exact `∏_{p ≤ a} (1 − 1/p)`; the empty product (a < 2) is 1.
pub fn mertens_product_upto(a: u64) -> BigRational {
    if a < 2 {
        return BigRational::one();
    }
    let table = PrimeTable::new(a).expect("limit >= 2");
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for &p in table.primes() {
        num *= p - 1;
        den *= p;
    }
    BigRational::new(num, den)
}

pub fn mertens_product(a: u64) -> Result<BigRational> {
    if a < 2 {
        return Err(Error::Domain(format!("Mertens product needs A >= 2, got {a}")));
    }
    Ok(mertens_product_upto(a))
}

/// Prime factorisation `|n| = ∏ p^e`, ascending primes. Machine words use
/// Pollard rho; larger values fall back to trial division.
pub fn factorize(n: &BigInt) -> Result<Vec<(BigInt, u32)>> {
    if n.is_zero() {
        return Err(Error::Domain("cannot factor 0".into()));
    }
    if let Some(m) = n.magnitude().to_u64() {
        return Ok(factor_u64(m).into_iter().map(|(p, e)| (BigInt::from(p), e)).collect());
    }
    let mut m = n.magnitude().clone();
    let mut out = Vec::new();
    let push = |m: &mut BigUint, p: u64, out: &mut Vec<(BigInt, u32)>| {
        let p_big = BigUint::from(p);
        let mut e = 0;
        loop {
            let (q, rem) = m.div_rem(&p_big);
            if !rem.is_zero() {
                break;
            }
            *m = q;
            e += 1;
        }
        if e > 0 {
            out.push((BigInt::from(p), e));
        }
    };
    push(&mut m, 2, &mut out);
    push(&mut m, 3, &mut out);
    let mut f = 5u64;
    loop {
        if m.is_one() {
            break;
        }
        if BigUint::from(f) * BigUint::from(f) > m {
            out.push((BigInt::from_biguint(Sign::Plus, m), 1));
            break;
        }
        if f > TRIAL_DIVISION_CAP {
            return Err(Error::Resource(format!(
                "trial division of {n} exceeded {TRIAL_DIVISION_CAP}"
            )));
        }
        push(&mut m, f, &mut out);
        push(&mut m, f + 2, &mut out);
        f += 6;
    }
    Ok(out)
}

/// `ω(n)`: number of distinct primes dividing `n`.
pub fn omega(n: &BigInt) -> Result<usize> {
    if n.is_zero() {
        return Err(Error::Domain("ω(0) is undefined".into()));
    }
    Ok(factorize(n)?.len())
}

/// Split `n = free · s^ℓ` with `free` ℓ-th-power-free (sign kept on `free`)
/// and `s > 0`.
pub fn power_free_part(n: &BigInt, l: u32) -> Result<(BigInt, BigInt)> {
    let mut free = n.signum();
    let mut s = BigInt::one();
    for (p, e) in factorize(n)? {
        free *= p.pow(e % l);
        s *= p.pow(e / l);
    }
    Ok((free, s))
}

/// Factor a positive integer completely over the given primes, returning
/// `None` if a cofactor remains.
pub fn smooth_factor(b: &BigInt, primes: &[u64]) -> Option<Vec<(u64, u32)>> {
    if !b.is_positive() {
        return None;
    }
    let mut out = Vec::new();
    if let Some(mut m) = b.to_u64() {
        for &p in primes {
            if m == 1 {
                break;
            }
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            if e > 0 {
                out.push((p, e));
            }
        }
        return (m == 1).then_some(out);
    }
    let mut m = b.magnitude().clone();
    for &p in primes {
        if m.is_one() {
            break;
        }
        let p_big = BigUint::from(p);
        let mut e = 0;
        loop {
            let (q, rem) = m.div_rem(&p_big);
            if !rem.is_zero() {
                break;
            }
            m = q;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    }
    m.is_one().then_some(out)
}

/// `n!` as a big integer (product tree).
pub fn factorial(n: u64) -> BigUint {
    range_product(1, n)
}

/// `∏_{lo ≤ j ≤ hi} j`, empty product 1.
pub fn range_product(lo: u64, hi: u64) -> BigUint {
    if lo > hi {
        return BigUint::one();
    }
    if hi - lo < 16 {
        let mut acc = BigUint::one();
        for j in lo..=hi {
            acc *= j;
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    range_product(lo, mid) * range_product(mid + 1, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(mut n: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut p = 2;
        while p * p <= n {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            if e > 0 {
                out.push((p, e));
            }
            p += 1;
        }
        if n > 1 {
            out.push((n, 1));
        }
        out
    }

    #[test]
    fn rho_matches_trial_division() {
        let mut x = 0x9e37_79b9_7f4a_7c15u64;
        for n in (1..2000u64).chain([999_983 * 999_979, 4_294_967_291 * 3, 1 << 40, 600_851_475_143]) {
            assert_eq!(factor_u64(n), trial_division(n), "{n}");
        }
        for _ in 0..200 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let n = x % 1_000_000_000_000 + 1;
            assert_eq!(factor_u64(n), trial_division(n), "{n}");
        }
        let big = 18_446_744_073_709_551_557u64;
        assert!(is_prime(big));
        assert_eq!(factor_u64(4_294_967_291 * 4_294_967_279), vec![(4_294_967_279, 1), (4_294_967_291, 1)]);
    }

    #[test]
    fn small_sieves() {
        assert_eq!(sieve_primes(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(sieve_primes(2).unwrap().pi(), 1);
        assert!(sieve_primes(1).is_err());
    }

    #[test]
    fn valuations() {
        assert_eq!(p_valuation(&int(48), 2).unwrap(), 4);
        assert_eq!(p_valuation(&int(-9), 3).unwrap(), 2);
        assert_eq!(p_valuation(&int(17), 2).unwrap(), 0);
        assert!(p_valuation(&int(0), 2).is_err());
        assert_eq!(factorial_valuation(10, 2), 8);
    }

    #[test]
    fn splits() {
        assert_eq!(smooth_rough_split(&int(5), 5).unwrap(), (int(1), int(5)));
        assert_eq!(smooth_rough_split(&int(720), 7).unwrap(), (int(720), int(1)));
        assert_eq!(smooth_rough_split(&int(-22), 11).unwrap(), (int(2), int(-11)));
        assert!(smooth_rough_split(&int(0), 3).is_err());
        let primes = [2, 3, 5, 7];
        assert_eq!(smooth_rough_split_with(&int(-22), &primes).unwrap(), (int(2), int(-11)));
    }

    #[test]
    fn roots() {
        assert_eq!(perfect_power_root(&int(27), 3).unwrap(), Some(int(3)));
        assert_eq!(perfect_power_root(&int(-32), 5).unwrap(), Some(int(-2)));
        assert_eq!(perfect_power_root(&int(10), 3).unwrap(), None);
        assert!(perfect_power_root(&int(-4), 2).is_err());
        assert_eq!(rational_root(&rat(-8, 27), 3), Some(rat(-2, 3)));
        assert_eq!(rational_root(&rat(-4, 9), 2), None);
    }

    #[test]
    fn mertens() {
        assert_eq!(mertens_product(2).unwrap(), rat(1, 2));
        assert_eq!(mertens_product(10).unwrap(), rat(8, 35));
        assert!(mertens_product(1).is_err());
        assert_eq!(mertens_product_upto(1), rat(1, 1));
    }

    #[test]
    fn intervals() {
        assert_eq!(prime_in_interval(10, 21), Some(11));
        assert_eq!(prime_in_interval(5, 7), None);
        let t = sieve_primes(100).unwrap();
        assert_eq!(t.prime_in_interval(10, 21), Some(11));
        assert_eq!(t.prime_in_interval(5, 7), None);
        assert_eq!(t.prime_in_interval(96, 200), Some(97));
        assert_eq!(t.prime_in_interval(97, 200), Some(101));
    }

    #[test]
    fn omega_values() {
        assert_eq!(omega(&int(12)).unwrap(), 2);
        assert_eq!(omega(&int(1)).unwrap(), 0);
        assert_eq!(omega(&int(21168)).unwrap(), 3);
        assert!(omega(&int(0)).is_err());
    }

    #[test]
    fn power_free() {
        assert_eq!(power_free_part(&int(-54), 3).unwrap(), (int(-2), int(3)));
        assert_eq!(power_free_part(&int(10), 3).unwrap(), (int(10), int(1)));
    }

    #[test]
    fn heights() {
        assert_eq!(naive_height(&rat(129, 100)), int(129));
        assert_eq!(naive_height(&rat(-4, 3)), int(4));
        assert_eq!(naive_height(&rat(1, 7)), int(7));
    }
}
