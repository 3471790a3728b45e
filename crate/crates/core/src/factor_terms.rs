//! Per-term factorization `n + i·d^ℓ = a_i · z_i` of a progression into a
//! part built from primes below `k` and a part built from primes at least
//! `k`, together with the checks and audits that run on those records.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{perfect_power_root, smooth_factor, smooth_rough_split_with, PrimeTable};
use crate::es_model::ApSolution;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TermFactorization {
    pub index: usize,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub a: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub rough: BigInt,
    #[serde(serialize_with = "crate::ser::opt_bigint")]
    pub t: Option<BigInt>,
    pub exact_power: bool,
}

impl TermFactorization {
    /// Builds a record from given `a` and rough part, filling `t` when the
    /// rough part is an exact `ℓ`-th power.
    pub fn from_parts(index: usize, a: BigInt, rough: BigInt, l: u32) -> Self {
        let t = perfect_power_root(&rough, l).ok().flatten();
        Self { index, a, exact_power: t.is_some(), rough, t }
    }

    /// `a · z`.
    pub fn value(&self) -> BigInt {
        &self.a * &self.rough
    }
}

fn primes_below(k: u32) -> Vec<u64> {
    if k <= 2 {
        return Vec::new();
    }
    PrimeTable::new(k as u64 - 1).expect("limit >= 2").primes().to_vec()
}

/// Factor the given progression values with smooth bound `k`.
pub fn factor_values(values: &[BigInt], k: u32, l: u32) -> Result<Vec<TermFactorization>> {
    if let Some(i) = values.iter().position(Zero::is_zero) {
        return Err(Error::DegenerateTerm { index: i });
    }
    let primes = primes_below(k);
    values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let (a, z) = smooth_rough_split_with(v, &primes)?;
            Ok(TermFactorization::from_parts(i, a, z, l))
        })
        .collect()
}

/// Factor every term `n + i·d^ℓ` of a candidate (validated or not).
pub fn factor_terms(s: &ApSolution) -> Result<Vec<TermFactorization>> {
    factor_values(&s.terms(), s.k, s.l)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BulletResult {
    pub name: &'static str,
    pub pass: bool,
    pub counterexample: Option<String>,
}

/// Outcome of the seven structural checks on a factorization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub bullets: Vec<BulletResult>,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.bullets.iter().all(|b| b.pass)
    }

    pub fn bullet(&self, name: &str) -> Option<&BulletResult> {
        self.bullets.iter().find(|b| b.name == name)
    }

    pub fn first_failure(&self) -> Option<&BulletResult> {
        self.bullets.iter().find(|b| !b.pass)
    }
}

pub const BULLET_IDENTITY: &str = "terms_form_progression";
pub const BULLET_A_PRIMES: &str = "a_primes_below_k";
pub const BULLET_T_PRIMES: &str = "t_primes_at_least_k";
pub const BULLET_A_GCD: &str = "gcd_a_divides_index_gap";
pub const BULLET_A_D: &str = "gcd_a_d_is_one";
pub const BULLET_T_GCD: &str = "t_pairwise_coprime";
pub const BULLET_A_PRODUCT: &str = "product_a_is_power";

fn bullet(name: &'static str, counterexample: Option<String>) -> BulletResult {
    BulletResult { name, pass: counterexample.is_none(), counterexample }
}

/// Evaluate the seven structural properties of the factorization.
///
/// The progression identity is checked as `a_i z_i − a_j z_j = (i−j)·d^ℓ`
/// against the first record, so records need not start at index 0. Pairwise
/// properties are checked without an O(k²) scan: the gcd condition is a
/// congruence condition per prime power, and coprimality of the `t_i` is
/// tested against a running product.
pub fn check_term_invariants(terms: &[TermFactorization], k: u32, d: &BigInt, l: u32) -> InvariantReport {
    let primes = primes_below(k);
    let step = num_traits::pow(d.clone(), l as usize);

    let identity = terms.first().and_then(|first| {
        let v0 = first.value();
        terms.iter().find_map(|t| {
            let expected = &v0 + &step * BigInt::from(t.index as i64 - first.index as i64);
            (t.value() != expected)
                .then(|| format!("index {}: a*z = {} but progression gives {}", t.index, t.value(), expected))
        })
    });

    // Smooth factorizations of the a_i; None marks a prime factor >= k.
    let factored: Vec<(Vec<(u64, u32)>, BigInt)> = terms
        .par_iter()
        .map(|t| {
            let (s, cof) = smooth_rough_split_with(&t.a, &primes).unwrap_or((BigInt::one(), t.a.clone()));
            (smooth_factor(&s, &primes).unwrap_or_default(), cof)
        })
        .collect();

    let a_primes = terms.iter().zip(&factored).find_map(|(t, (_, cof))| {
        (!t.a.is_positive() || !cof.abs().is_one())
            .then(|| format!("index {}: a = {} has a factor {} outside primes < {k}", t.index, t.a, cof))
    });

    let primorial: BigInt = primes.iter().map(|&p| BigInt::from(p)).product();
    let t_primes = terms.iter().find_map(|t| {
        let g = t.rough.gcd(&primorial);
        (!g.is_one()).then(|| format!("index {}: rough part {} shares {} with primes < {k}", t.index, t.rough, g))
    });

    let a_gcd = gcd_gap_counterexample(terms, &factored);

    let a_d = terms.iter().find_map(|t| {
        let g = t.a.gcd(d);
        (!g.is_one()).then(|| format!("index {}: gcd(a, d) = {}", t.index, g))
    });

    let t_gcd = t_coprime_counterexample(terms);

    let a_product = {
        let mut exps: HashMap<u64, u64> = HashMap::new();
        let mut cof = BigInt::one();
        for (f, c) in &factored {
            for &(p, e) in f {
                *exps.entry(p).or_default() += e as u64;
            }
            cof *= c;
        }
        let mut bad: Vec<(u64, u64)> = exps.into_iter().filter(|&(_, e)| e % l as u64 != 0).collect();
        bad.sort_unstable();
        let cof_ok = perfect_power_root(&cof.abs(), l).ok().flatten().is_some();
        if let Some(&(p, e)) = bad.first() {
            Some(format!("v_{p}(product of a) = {e} is not divisible by {l}"))
        } else if !cof_ok {
            Some(format!("large cofactor {cof} of the product is not an {l}-th power"))
        } else {
            None
        }
    };

    InvariantReport {
        bullets: vec![
            bullet(BULLET_IDENTITY, identity),
            bullet(BULLET_A_PRIMES, a_primes),
            bullet(BULLET_T_PRIMES, t_primes),
            bullet(BULLET_A_GCD, a_gcd),
            bullet(BULLET_A_D, a_d),
            bullet(BULLET_T_GCD, t_gcd),
            bullet(BULLET_A_PRODUCT, a_product),
        ],
    }
}

/// `gcd(a_i, a_j) | (j − i)` for all pairs holds iff for every prime power
/// `p^m`, all indices with `p^m | a_i` are congruent mod `p^m`.
fn gcd_gap_counterexample(terms: &[TermFactorization], factored: &[(Vec<(u64, u32)>, BigInt)]) -> Option<String> {
    let mut first_at: HashMap<(u64, u32), usize> = HashMap::new();
    let mut worst: Option<(usize, usize)> = None;
    for (pos, (f, _)) in factored.iter().enumerate() {
        let i = terms[pos].index;
        for &(p, e) in f {
            let mut pm: u64 = 1;
            for m in 1..=e {
                pm = pm.saturating_mul(p);
                let j = *first_at.entry((p, m)).or_insert(pos);
                if (i as u64).abs_diff(terms[j].index as u64) % pm != 0 {
                    let pair = (j, pos);
                    if worst.map_or(true, |w| pair < w) {
                        worst = Some(pair);
                    }
                    break;
                }
            }
        }
    }
    // Large cofactors (only present on inconsistent data) are scanned directly.
    let big: Vec<usize> = (0..terms.len()).filter(|&p| !factored[p].1.abs().is_one()).collect();
    for (x, &p) in big.iter().enumerate() {
        for &q in &big[x + 1..] {
            let g = terms[p].a.gcd(&terms[q].a);
            let gap = BigInt::from(terms[q].index as i64 - terms[p].index as i64);
            if !gap.is_multiple_of(&g) && worst.map_or(true, |w| (p, q) < w) {
                worst = Some((p, q));
            }
        }
    }
    worst.map(|(p, q)| {
        let (s, t) = (&terms[p], &terms[q]);
        format!(
            "indices ({}, {}): gcd({}, {}) = {} does not divide {}",
            s.index,
            t.index,
            s.a,
            t.a,
            s.a.gcd(&t.a),
            t.index as i64 - s.index as i64
        )
    })
}

fn t_coprime_counterexample(terms: &[TermFactorization]) -> Option<String> {
    let mut acc = BigInt::one();
    for (pos, term) in terms.iter().enumerate() {
        let Some(t) = term.t.as_ref().map(|t| t.abs()) else { continue };
        if t.is_one() {
            continue;
        }
        if !(&acc % &t).gcd(&t).is_one() {
            let other = terms[..pos]
                .iter()
                .find(|o| o.t.as_ref().is_some_and(|u| !u.gcd(&t).is_one()))
                .expect("a shared factor comes from an earlier t");
            return Some(format!(
                "indices ({}, {}): gcd({}, {}) = {}",
                other.index,
                term.index,
                other.t.as_ref().unwrap(),
                term.t.as_ref().unwrap(),
                other.t.as_ref().unwrap().gcd(&t)
            ));
        }
        acc *= t;
    }
    None
}

fn position_of(terms: &[TermFactorization], index: usize) -> Result<&TermFactorization> {
    terms
        .iter()
        .find(|t| t.index == index)
        .ok_or(Error::IndexOutOfRange { index, len: terms.len() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TernaryIdentity {
    #[serde(serialize_with = "crate::ser::bigint")]
    pub lhs: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub rhs: BigInt,
    pub equal: bool,
}

/// `a_i z_i − a_j z_j` against `(i − j)·d^ℓ`.
pub fn ternary_identity(terms: &[TermFactorization], i: usize, j: usize, d: &BigInt, l: u32) -> Result<TernaryIdentity> {
    if i == j {
        return Err(Error::Precondition(format!("indices must differ, got {i} twice")));
    }
    let (ti, tj) = (position_of(terms, i)?, position_of(terms, j)?);
    let lhs = ti.value() - tj.value();
    let rhs = BigInt::from(i as i64 - j as i64) * num_traits::pow(d.clone(), l as usize);
    Ok(TernaryIdentity { equal: lhs == rhs, lhs, rhs })
}

/// Indices with `a_i < k` and `|t_i| = 1`.
pub fn count_trivial_ti(terms: &[TermFactorization], k: u32) -> (usize, Vec<usize>) {
    let k = BigInt::from(k);
    let idx: Vec<usize> = terms
        .iter()
        .filter(|t| t.a < k && t.t.as_ref().is_some_and(|t| t.abs().is_one()))
        .map(|t| t.index)
        .collect();
    (idx.len(), idx)
}

/// At most 20 trivial `t_i` once `k ≥ 21`; only meaningful on validated
/// solutions, so returns `None` otherwise.
pub fn few_trivial_assertion(terms: &[TermFactorization], k: u32, validated: bool) -> Option<bool> {
    (validated && k >= 21).then(|| count_trivial_ti(terms, k).0 <= 20)
}

/// `r = #{i : a_i = α}` and whether `r ≤ k/α + 1`.
pub fn multiplicity_check(terms: &[TermFactorization], alpha: u64, k: u32) -> Result<(usize, bool)> {
    if alpha == 0 || alpha >= k as u64 {
        return Err(Error::Precondition(format!("need 1 <= alpha < k, got alpha = {alpha}, k = {k}")));
    }
    let a = BigInt::from(alpha);
    let r = terms.iter().filter(|t| t.a == a).count();
    Ok((r, r as u64 * alpha <= k as u64 + alpha))
}

/// First pair `(i, j)`, `i < j`, with `a_i = a_j ≥ k`, if any.
pub fn large_ai_distinct_check(terms: &[TermFactorization], k: u32) -> Option<(usize, usize)> {
    let k = BigInt::from(k);
    let mut seen: HashMap<&BigInt, usize> = HashMap::new();
    for t in terms.iter().filter(|t| t.a >= k) {
        if let Some(&i) = seen.get(&t.a) {
            return Some((i, t.index));
        }
        seen.insert(&t.a, t.index);
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NBoundReport {
    /// Equal pair `a_i = a_j` and whether `|n| ≤ 2 k^{3/2} d^{9/2}`.
    pub equal_pair: Option<(usize, usize, bool)>,
    /// Product collision `a_i a_j = a_r a_s` and whether `|n| ≤ 432 k⁶ d¹⁸`.
    pub product_collision: Option<([usize; 4], bool)>,
}

impl NBoundReport {
    pub fn fired(&self) -> &'static str {
        match (&self.equal_pair, &self.product_collision) {
            (None, None) => "no case fired",
            (Some(_), None) => "equal pair",
            (None, Some(_)) => "product collision",
            (Some(_), Some(_)) => "equal pair and product collision",
        }
    }

    pub fn bounds_hold(&self) -> bool {
        self.equal_pair.map_or(true, |e| e.2) && self.product_collision.map_or(true, |c| c.1)
    }
}

/// Size checks on `n` for `ℓ = 3` triggered by coincidences among the `a_i`.
pub fn n_bound_audit(s: &ApSolution, terms: &[TermFactorization]) -> Result<NBoundReport> {
    if s.l != 3 {
        return Err(Error::Precondition(format!("n bound audit needs l = 3, got {}", s.l)));
    }
    let k = BigInt::from(s.k);
    let n2 = &s.n * &s.n;

    // Case (a): n² ≤ 4 k³ d⁹.
    let mut first: HashMap<&BigInt, usize> = HashMap::new();
    let mut equal_pair = None;
    for t in terms {
        if let Some(&i) = first.get(&t.a) {
            equal_pair = Some((i, t.index));
            break;
        }
        first.insert(&t.a, t.index);
    }
    let bound_a = BigInt::from(4) * num_traits::pow(k.clone(), 3) * num_traits::pow(s.d.clone(), 9);
    let equal_pair = equal_pair.map(|(i, j)| (i, j, n2 <= bound_a));

    // Case (b): among distinct values below k², a product seen twice.
    let k2 = &k * &k;
    let mut distinct: Vec<(&BigInt, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for t in terms {
        if t.a < k2 && seen.insert(&t.a) {
            distinct.push((&t.a, t.index));
        }
    }
    let mut products: HashMap<BigInt, (usize, usize)> = HashMap::new();
    let mut collision = None;
    'outer: for x in 0..distinct.len() {
        for y in x + 1..distinct.len() {
            let p = distinct[x].0 * distinct[y].0;
            let pair = (distinct[x].1, distinct[y].1);
            if let Some(&(r, s2)) = products.get(&p) {
                collision = Some([r, s2, pair.0, pair.1]);
                break 'outer;
            }
            products.insert(p, pair);
        }
    }
    let bound_b = BigInt::from(432u32) * num_traits::pow(k.clone(), 6) * num_traits::pow(s.d.clone(), 18);
    let product_collision = collision.map(|c| (c, s.n.abs() <= bound_b));
    Ok(NBoundReport { equal_pair, product_collision })
}

/// `(m+1)³ − m³ ≥ m²`.
pub fn cube_gap_holds(m: u64) -> bool {
    let m = m as u128;
    (m + 1).pow(3) - m.pow(3) >= m * m
}

/// Values of `a_i` as `u64` where they fit; used by the combinatorial layer.
pub fn small_a_values(terms: &[TermFactorization]) -> Vec<Option<u64>> {
    terms.iter().map(|t| t.a.to_u64()).collect()
}
