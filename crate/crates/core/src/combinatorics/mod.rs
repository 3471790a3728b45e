//! Combinatorial engines: a large sub-product dividing `(k−1)!`, pairs with
//! large gcd in dense sets, distinct-product sets, and the density audit.

mod mass_increment;
mod products;

pub use mass_increment::*;
pub use products::*;

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use crate::arith::{factorial, factorial_valuation, mertens_product_upto, smooth_factor, PrimeTable};
use crate::error::{Error, Result};

/// Index set produced by [`erdos_subset`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErdosSubset {
    pub indices: Vec<usize>,
    /// `(p, i_p)` for each prime whose maximal valuation is positive.
    pub removed: Vec<(u64, usize)>,
}

/// Remove, for each prime `p < k` dividing some `b_i`, the smallest index
/// maximizing `v_p(b_i)`. What remains has product dividing `(k−1)!`.
pub fn erdos_subset(b: &[BigInt]) -> Result<ErdosSubset> {
    let k = b.len();
    if k < 2 {
        return Err(Error::Precondition(format!("need at least 2 values, got {k}")));
    }
    let primes: Vec<u64> = PrimeTable::new(k as u64).map(|t| t.below(k as u64).to_vec()).unwrap_or_default();
    let mut factored = Vec::with_capacity(k);
    for (i, v) in b.iter().enumerate() {
        if !v.is_positive() {
            return Err(Error::Precondition(format!("b_{i} = {v} is not positive")));
        }
        let f = smooth_factor(v, &primes)
            .ok_or_else(|| Error::Precondition(format!("b_{i} = {v} has a prime factor >= {k}")))?;
        factored.push(f);
    }
    if let Some((i, j, p)) = gcd_gap_violation(&factored) {
        return Err(Error::Precondition(format!(
            "gcd(b_{i}, b_{j}) = {} does not divide {} (prime {p})",
            b[i].gcd(&b[j]),
            j - i
        )));
    }
    let mut best: HashMap<u64, (u32, usize)> = HashMap::new();
    for (i, f) in factored.iter().enumerate() {
        for &(p, e) in f {
            let entry = best.entry(p).or_insert((e, i));
            if e > entry.0 {
                *entry = (e, i);
            }
        }
    }
    let mut removed: Vec<(u64, usize)> = best.into_iter().map(|(p, (_, i))| (p, i)).collect();
    removed.sort_unstable();
    let mut drop = vec![false; k];
    for &(_, i) in &removed {
        drop[i] = true;
    }
    let indices = (0..k).filter(|&i| !drop[i]).collect();
    Ok(ErdosSubset { indices, removed })
}

/// First `(i, j, p)` with `p^m | gcd(b_i, b_j)` but `p^m ∤ (j − i)`, using
/// the fact that the gcd condition is a congruence condition per prime power.
pub fn gcd_gap_violation(factored: &[Vec<(u64, u32)>]) -> Option<(usize, usize, u64)> {
    let mut first_at: HashMap<(u64, u32), usize> = HashMap::new();
    let mut found: Option<(usize, usize, u64)> = None;
    for (i, f) in factored.iter().enumerate() {
        for &(p, e) in f {
            let mut pm: u64 = 1;
            for m in 1..=e {
                pm = pm.saturating_mul(p);
                let j = *first_at.entry((p, m)).or_insert(i);
                if (i - j) as u64 % pm != 0 {
                    if found.map_or(true, |(a, b, _)| (j, i) < (a, b)) {
                        found = Some((j, i, p));
                    }
                    break;
                }
            }
        }
    }
    found
}

/// `∏_{i∈S} b_i | (k−1)!`, checked by dividing the big integers.
pub fn subset_divides_factorial(b: &[BigInt], indices: &[usize]) -> bool {
    let k = b.len() as u64;
    let prod: BigInt = indices.iter().map(|&i| b[i].clone()).product();
    let Some(prod) = prod.to_biguint() else { return false };
    (factorial(k.saturating_sub(1)) % prod) == BigUint::from(0u32)
}

/// Same check via Legendre's formula, for larger `k`.
pub fn subset_divides_factorial_by_valuation(b: &[BigInt], indices: &[usize]) -> bool {
    let k = b.len() as u64;
    let primes: Vec<u64> = PrimeTable::new(k.max(2)).map(|t| t.below(k).to_vec()).unwrap_or_default();
    let mut total: HashMap<u64, u64> = HashMap::new();
    for &i in indices {
        match smooth_factor(&b[i], &primes) {
            Some(f) => {
                for (p, e) in f {
                    *total.entry(p).or_default() += e as u64;
                }
            }
            None => return false,
        }
    }
    total.into_iter().all(|(p, e)| e <= factorial_valuation(k - 1, p))
}

/// Constants `(c, η, A)` for the large-gcd pair extraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcdHypothesis {
    pub c: BigRational,
    pub eta: BigRational,
    pub a: BigRational,
}

impl GcdHypothesis {
    pub fn new(c: BigRational, eta: BigRational, a: BigRational) -> Self {
        Self { c, eta, a }
    }

    /// `c = 0.229`, `η = 1/17000`, `A = 283`.
    pub fn default_constants() -> Self {
        Self::new(crate::arith::rat(229, 1000), crate::arith::rat(1, 17000), crate::arith::rat(283, 1))
    }
}

/// Exact `η(A+1) + ∏_{p≤A}(1 − 1/p)` and whether it is at most `c/2`.
pub fn hypothesis_check(h: &GcdHypothesis) -> (BigRational, bool) {
    let floor_a = h.a.floor().to_integer().to_u64().unwrap_or(0);
    let lhs = &h.eta * (&h.a + BigRational::one()) + mertens_product_upto(floor_a);
    let ok = lhs <= &h.c / BigRational::from_integer(2.into());
    (lhs, ok)
}

fn gt_eta_k(m: u64, eta: &BigRational, k: u64) -> bool {
    BigRational::from_integer(m.into()) > eta * BigRational::from_integer(k.into())
}

fn smallest_prime_factor_table(k: u64) -> Vec<u64> {
    let n = k as usize;
    let mut spf = vec![0u64; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u64;
                }
                j += i;
            }
        }
    }
    spf
}

/// Integers in `(ηk, k]` all of whose proper divisors are at most `ηk`.
/// The largest proper divisor of `m` is `m / spf(m)`, so that is the only
/// divisor checked.
pub fn primitive_divisor_set(eta: &BigRational, k: u64) -> Result<Vec<u64>> {
    if !eta.is_positive() || eta >= &BigRational::one() {
        return Err(Error::Precondition(format!("eta = {eta} must lie in (0, 1)")));
    }
    let spf = smallest_prime_factor_table(k);
    Ok((1..=k)
        .filter(|&m| gt_eta_k(m, eta, k))
        .filter(|&m| m == 1 || !gt_eta_k(m / spf[m as usize], eta, k))
        .collect())
}

/// Every integer in `(ηk, k]` is divisible by some element of `d_set`.
pub fn covers_interval(eta: &BigRational, k: u64, d_set: &[u64]) -> bool {
    let mut covered = vec![false; k as usize + 1];
    for &d in d_set {
        let mut m = d;
        while m <= k {
            covered[m as usize] = true;
            m += d;
        }
    }
    (1..=k).filter(|&m| gt_eta_k(m, eta, k)).all(|m| covered[m as usize])
}

/// Result of [`gcd_dense_pairs`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GcdPairs {
    pub pairs: Vec<(u64, u64)>,
    /// `|𝒟|`.
    pub s: usize,
    /// `r = |b|`.
    pub r: usize,
    /// Number of `b` in `(ηk, k]`.
    pub eligible: usize,
    /// `r − ηk − s` as an exact rational.
    #[serde(serialize_with = "crate::ser::rational")]
    pub lower_bound: BigRational,
    /// Fewer than `(c/3)k` pairs were produced: below the unspecified `k₀`.
    pub small_k: bool,
}

/// Build pairs `(b, b')` with `gcd(b, b') > ηk` by mapping each `b > ηk` to
/// the largest element of `𝒟` dividing it and pairing each `b` whose image
/// is shared with the smallest other element sharing it.
pub fn gcd_dense_pairs(b: &[u64], h: &GcdHypothesis, k: u64) -> Result<GcdPairs> {
    let (lhs, ok) = hypothesis_check(h);
    if !ok {
        return Err(Error::Precondition(format!("hypothesis fails: lhs = {lhs} > c/2")));
    }
    let r = b.len();
    if BigRational::from_integer(r.into()) < &h.c * BigRational::from_integer(k.into()) {
        return Err(Error::Precondition(format!("r = {r} < c*k = {}", &h.c * BigRational::from_integer(k.into()))));
    }
    let mut seen = std::collections::HashSet::new();
    for &x in b {
        if x == 0 || x > k || !seen.insert(x) {
            return Err(Error::Precondition(format!("values must be distinct and in [1, {k}], offending {x}")));
        }
    }
    gcd_pairs_unchecked(b, &h.eta, &h.c, k)
}

/// The pair construction without the hypothesis and density checks; also
/// used by the distinct-product pipeline with its own `η`.
pub fn gcd_pairs_unchecked(b: &[u64], eta: &BigRational, c: &BigRational, k: u64) -> Result<GcdPairs> {
    let d_set = primitive_divisor_set(eta, k)?;
    let mut in_d = vec![false; k as usize + 1];
    for &d in &d_set {
        in_d[d as usize] = true;
    }
    let mut groups: HashMap<u64, Vec<u64>> = HashMap::new();
    let mut eligible = 0;
    for &x in b {
        if !gt_eta_k(x, eta, k) {
            continue;
        }
        eligible += 1;
        let f = largest_divisor_in(x, &in_d).expect("covering property");
        groups.entry(f).or_default().push(x);
    }
    let mut pairs = Vec::new();
    let mut keys: Vec<u64> = groups.keys().copied().collect();
    keys.sort_unstable();
    for f in keys {
        let mut g = groups.remove(&f).unwrap();
        if g.len() < 2 {
            continue;
        }
        g.sort_unstable();
        for &x in &g {
            let partner = if x == g[0] { g[1] } else { g[0] };
            pairs.push((x, partner));
        }
    }
    pairs.sort_unstable();
    let lower_bound = BigRational::from_integer(b.len().into())
        - eta * BigRational::from_integer(k.into())
        - BigRational::from_integer(d_set.len().into());
    let small_k = BigRational::from_integer(pairs.len().into()) * BigRational::from_integer(3.into())
        < c * BigRational::from_integer(k.into());
    Ok(GcdPairs { pairs, s: d_set.len(), r: b.len(), eligible, lower_bound, small_k })
}

fn largest_divisor_in(x: u64, in_d: &[bool]) -> Option<u64> {
    let mut best = None;
    let mut q = 1;
    while q * q <= x {
        if x % q == 0 {
            for d in [q, x / q] {
                if in_d[d as usize] && best.map_or(true, |b| d > b) {
                    best = Some(d);
                }
            }
        }
        q += 1;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn subset_examples() {
        let b = ints(&[1, 2, 3, 4]);
        let s = erdos_subset(&b).unwrap();
        assert_eq!(s.indices, vec![0, 1]);
        assert!(subset_divides_factorial(&b, &s.indices));
        let b = ints(&[1, 2, 3, 4, 1]);
        let s = erdos_subset(&b).unwrap();
        assert_eq!(s.indices, vec![0, 1, 4]);
        assert!(subset_divides_factorial(&b, &s.indices));
        let b = ints(&[1; 9]);
        assert_eq!(erdos_subset(&b).unwrap().indices, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn subset_preconditions() {
        let err = erdos_subset(&ints(&[2, 1, 2, 1, 1])).unwrap();
        assert!(subset_divides_factorial(&ints(&[2, 1, 2, 1, 1]), &err.indices));
        assert!(matches!(erdos_subset(&ints(&[2, 2, 1])), Err(Error::Precondition(_))));
        assert!(matches!(erdos_subset(&ints(&[7, 1, 1])), Err(Error::Precondition(_))));
    }

    #[test]
    fn hypothesis_examples() {
        let (lhs, ok) = hypothesis_check(&GcdHypothesis::default_constants());
        assert!(ok);
        assert!(lhs < rat(114499, 1_000_000));
        let (lhs, ok) = hypothesis_check(&GcdHypothesis::new(rat(9, 10), rat(1, 2), rat(1, 1)));
        assert_eq!(lhs, rat(2, 1));
        assert!(!ok);
        assert!(!hypothesis_check(&GcdHypothesis::new(rat(229, 1000), rat(1, 1000), rat(283, 1))).1);
    }

    #[test]
    fn divisor_sets() {
        assert_eq!(primitive_divisor_set(&rat(3, 10), 10).unwrap(), vec![4, 5, 6, 7, 9]);
        let d = primitive_divisor_set(&rat(99, 100), 1000).unwrap();
        assert_eq!(d, (991..=1000).collect::<Vec<_>>());
        for k in [10u64, 97, 1000] {
            for eta in [rat(1, 7), rat(1, 3), rat(1, 2)] {
                assert!(covers_interval(&eta, k, &primitive_divisor_set(&eta, k).unwrap()));
            }
        }
    }

    #[test]
    fn small_pairs() {
        let b: Vec<u64> = (1..=20).collect();
        let out = gcd_pairs_unchecked(&b, &rat(1, 5), &rat(1, 2), 20).unwrap();
        assert!(out.pairs.contains(&(10, 5)) && out.pairs.contains(&(20, 5)));
        assert!(out.pairs.iter().all(|&(x, y)| x != y && x.gcd(&y) > 4));
        assert!(BigRational::from_integer(out.pairs.len().into()) >= out.lower_bound);
    }

    #[test]
    fn pair_preconditions() {
        assert!(!hypothesis_check(&GcdHypothesis::new(rat(9, 10), rat(1, 40), rat(4, 1))).1);
        let h = GcdHypothesis::new(rat(9, 10), rat(1, 100), rat(4, 1));
        assert!(hypothesis_check(&h).1);
        assert!(gcd_dense_pairs(&[1, 2, 3], &h, 200).is_err());
        let b: Vec<u64> = (1..=200).collect();
        let out = gcd_dense_pairs(&b, &h, 200).unwrap();
        assert!(out.pairs.iter().all(|&(x, y)| x.gcd(&y) * 100 > 200));
        let bad = GcdHypothesis::new(rat(229, 1000), rat(1, 1000), rat(283, 1));
        assert!(gcd_dense_pairs(&b, &bad, 200).is_err());
    }
}
