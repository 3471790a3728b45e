//! Executable form of the density argument for the smooth parts `a_i`.
//!
//! Given term factorizations, the auditor fixes an index set `I` whose
//! `a`-product divides `(k−1)!`, evaluates the counting inequalities that
//! drive the argument, and walks the `δ₀` ladder from 0.29 upward. When the
//! uniqueness count `|𝒜|` falls short it runs the pair-extraction step that
//! produces a fixed `A₀` with `t_i^ℓ − t_j^ℓ = A₀·d^ℓ` for the chosen pairs.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::erdos_subset;
use crate::arith::{factorial, range_product, PrimeTable};
use crate::error::{Error, Result};
use crate::factor_terms::TermFactorization;
use crate::realnum::{Real, DEFAULT_PREC};

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Certified `count ≥ δ·k / ln k`.
fn count_at_least(count: usize, delta: &BigRational, k: u64) -> bool {
    if count == 0 {
        return !delta.is_positive();
    }
    let mut prec = DEFAULT_PREC;
    loop {
        let ln_k = Real::ln_int(&BigInt::from(k), prec).expect("k >= 2");
        let lhs = ln_k.mul_int(&BigInt::from(count));
        let rhs = Real::from_rational(&(delta * BigRational::from_integer(k.into())), prec);
        if let Some(o) = lhs.certified_cmp(&rhs) {
            return o != std::cmp::Ordering::Less;
        }
        prec *= 2;
    }
}

fn sci(x: &Real) -> String {
    x.to_sci(12).unwrap_or_else(|| format!("{:.12e}", x.mid_f64()))
}

/// A check with an explicit constant. `asymptotic` marks statements that
/// the argument only guarantees for `k` sufficiently large.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub asymptotic: bool,
    pub detail: String,
}

fn check(name: &str, holds: bool, asymptotic: bool, detail: String) -> Check {
    Check { name: name.into(), holds, asymptotic, detail }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SparkRecord {
    pub r_large: usize,
    pub checks: Vec<Check>,
    /// `(1 − R/k)·ln k`.
    pub eta: String,
    /// `(2 − η/ln k)·ln(2 − η/ln k) − η`.
    pub stirling_value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    #[serde(serialize_with = "crate::ser::rational")]
    pub delta0: BigRational,
    pub small: usize,
    pub distinct: usize,
    pub unique: usize,
    pub r_large: usize,
    /// `#small ≥ (δ₀ + 1/1000)·k/ln k`.
    pub accumulation_premise: bool,
    /// `|𝒜| ≥ (δ₀ + 1/2000)·k/ln k`.
    pub accumulation_conclusion: bool,
    /// `#distinct ≥ (δ₀ + 1/2000)·k/ln k`.
    pub increment_premise: bool,
    /// `#small ≥ (δ₀ + 1/2000 + 1/1000)·k/ln k`.
    pub increment_conclusion: bool,
    /// Present on the round where an implication failed.
    pub failure_detail: Vec<Check>,
}

impl RoundRecord {
    fn failed(&self) -> Option<&'static str> {
        if self.accumulation_premise && !self.accumulation_conclusion {
            Some("accumulation")
        } else if self.increment_premise && !self.increment_conclusion {
            Some("increment")
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub alpha: u64,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub a: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub t_i: BigInt,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub t_j: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollisionRecord {
    /// `#T'(α)` for every `α` with `#T'(α) ≥ 2`.
    pub multiplicities: BTreeMap<u64, usize>,
    pub trivial_indices: Vec<usize>,
    pub trivial_contribution: usize,
    pub absent_t_excluded: usize,
    pub checks: Vec<Check>,
    pub dyadic_n: u64,
    pub dyadic_sum: usize,
    pub large_n_case: bool,
    pub interval_length: Option<u64>,
    pub pairs: Vec<PairRecord>,
    #[serde(serialize_with = "crate::ser::opt_bigint")]
    pub a0: Option<BigInt>,
    pub a0_pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MassIncrementTrace {
    pub k: u64,
    pub l: u32,
    pub index_set: Vec<usize>,
    pub index_set_note: String,
    pub small: usize,
    pub distinct: usize,
    pub unique: usize,
    pub r_large: usize,
    pub spark: SparkRecord,
    pub rounds_run: usize,
    /// First and last round, plus the failing one if any.
    pub rounds: Vec<RoundRecord>,
    pub stop_reason: String,
    pub collision: Option<CollisionRecord>,
    pub density_checks: Vec<Check>,
    pub consistency: Vec<Check>,
    pub numeric_constants: Vec<Check>,
}

impl MassIncrementTrace {
    /// Internal consistency of the recorded counts.
    pub fn consistent(&self) -> bool {
        self.consistency.iter().all(|c| c.holds)
    }

    /// First failing check whose constant is exact at every `k`.
    pub fn first_exact_failure(&self) -> Option<&Check> {
        self.spark
            .checks
            .iter()
            .chain(self.collision.iter().flat_map(|c| c.checks.iter()))
            .chain(self.consistency.iter())
            .find(|c| !c.holds && !c.asymptotic)
    }
}

/// `2·ln 2 > 1.31` and `1.77·ln 1.77 ≥ 1.01`, with values to 12 decimals.
pub fn numeric_constant_checks() -> Vec<Check> {
    let p = DEFAULT_PREC;
    let two_ln2 = Real::ln_int(&BigInt::from(2), p).unwrap().mul_int(&BigInt::from(2));
    let x = r(177, 100);
    let v = Real::ln_rational(&x, p).unwrap().mul_rational(&x);
    vec![
        check(
            "2ln2 > 1.31",
            two_ln2.certified_cmp(&Real::from_rational(&r(131, 100), p)) == Some(std::cmp::Ordering::Greater),
            false,
            format!("2ln2 = {:.12}", two_ln2.mid_f64()),
        ),
        check(
            "1.77ln1.77 >= 1.01",
            Real::from_rational(&r(101, 100), p).certainly_le(&v),
            false,
            format!("1.77ln1.77 = {:.12}", v.mid_f64()),
        ),
    ]
}

/// Run the density audit. `d` is needed for the pair identities.
pub fn mass_increment_audit(terms: &[TermFactorization], k: u64, l: u32, d: &BigInt) -> Result<MassIncrementTrace> {
    if k < 2 || terms.len() as u64 != k {
        return Err(Error::Precondition(format!("need k >= 2 records, got {} for k = {k}", terms.len())));
    }
    let k_big = BigInt::from(k);
    let a: Vec<BigInt> = terms.iter().map(|t| t.a.clone()).collect();
    let (index_set, index_set_note) = match erdos_subset(&a) {
        Ok(s) => {
            let removed: Vec<String> = s.removed.iter().map(|(p, i)| format!("{p}:{i}")).collect();
            (s.indices, format!("subset construction, removed (prime:index) [{}]", removed.join(", ")))
        }
        Err(e) => ((0..k as usize).collect(), format!("subset construction not applicable ({e}); using all indices")),
    };

    // Small values among I, their multiplicities, and the large ones.
    let mut t_prime: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut large: Vec<&BigInt> = Vec::new();
    for &i in &index_set {
        if terms[i].a < k_big {
            t_prime.entry(terms[i].a.to_u64().unwrap()).or_default().push(i);
        } else {
            large.push(&terms[i].a);
        }
    }
    let small: usize = t_prime.values().map(Vec::len).sum();
    let distinct = t_prime.len();
    let unique = t_prime.values().filter(|v| v.len() == 1).count();
    let r_large = large.len();

    let spark = spark_record(k, &index_set, &large, small)?;

    // δ₀ ladder.
    let ln_k = Real::ln_int(&k_big, DEFAULT_PREC)?;
    let ceiling = ln_k.mul_rational(&r(23, 100));
    let step = r(1, 2000);
    let mut delta0 = r(29, 100);
    let mut rounds = Vec::new();
    let mut rounds_run = 0;
    let mut failure: Option<RoundRecord> = None;
    let mut last: Option<RoundRecord> = None;
    while Real::from_rational(&delta0, DEFAULT_PREC).certainly_le(&ceiling) {
        let rec = RoundRecord {
            delta0: delta0.clone(),
            small,
            distinct,
            unique,
            r_large,
            accumulation_premise: count_at_least(small, &(&delta0 + r(1, 1000)), k),
            accumulation_conclusion: count_at_least(unique, &(&delta0 + r(1, 2000)), k),
            increment_premise: count_at_least(distinct, &(&delta0 + r(1, 2000)), k),
            increment_conclusion: count_at_least(small, &(&delta0 + r(1, 2000) + r(1, 1000)), k),
            failure_detail: Vec::new(),
        };
        rounds_run += 1;
        if rounds.is_empty() {
            rounds.push(rec.clone());
        }
        if rec.failed().is_some() {
            failure = Some(rec);
            break;
        }
        last = Some(rec);
        delta0 += &step;
    }
    let stop_reason = match &failure {
        Some(f) => format!("{} implication fails at delta0 = {}", f.failed().unwrap(), f.delta0),
        None if rounds_run == 0 => "ladder empty: 0.29 > 0.23 ln k".to_string(),
        None => format!("ladder complete: delta0 passed 0.23 ln k after {rounds_run} rounds"),
    };
    let mut collision = None;
    if let Some(mut f) = failure {
        f.failure_detail = failure_detail(k, &f, &ln_k);
        if f.failed() == Some("accumulation") {
            collision = Some(collision_pipeline(terms, &t_prime, k, l, d)?);
        }
        if rounds.len() == 1 && rounds[0].delta0 == f.delta0 {
            rounds[0] = f;
        } else {
            rounds.push(f);
        }
    } else if let Some(last) = last {
        if rounds.len() == 1 && rounds[0].delta0 != last.delta0 {
            rounds.push(last);
        }
    }

    let density_checks = vec![check(
        "distinct small a_i >= 0.23k",
        distinct as u64 * 100 >= 23 * k,
        true,
        format!("{distinct} distinct values below k = {k}"),
    )];
    let consistency = vec![
        check("small + R = |I|", small + r_large == index_set.len(), false, format!("{small} + {r_large} vs {}", index_set.len())),
        check("|A| <= distinct", unique <= distinct, false, format!("{unique} <= {distinct}")),
        check("distinct <= small", distinct <= small, false, format!("{distinct} <= {small}")),
    ];
    Ok(MassIncrementTrace {
        k,
        l,
        index_set,
        index_set_note,
        small,
        distinct,
        unique,
        r_large,
        spark,
        rounds_run,
        rounds,
        stop_reason,
        collision,
        density_checks,
        consistency,
        numeric_constants: numeric_constant_checks(),
    })
}

fn spark_record(k: u64, index_set: &[usize], large: &[&BigInt], small: usize) -> Result<SparkRecord> {
    let rl = large.len() as u64;
    let big_product = crate::es_model::product_tree(&large.iter().map(|&x| x.clone()).collect::<Vec<_>>());
    let lower = if rl == 0 { BigInt::one() } else { BigInt::from(range_product(k, k + rl - 1)) };
    let k_fact = BigInt::from(factorial(k));
    let pi_k = PrimeTable::new(k)?.pi();
    let ln_k = Real::ln_int(&BigInt::from(k), DEFAULT_PREC)?;
    let frac = r(k as i64 - rl as i64, k as i64);
    let eta = ln_k.mul_rational(&frac);
    // 2 − η/ln k = 1 + R/k.
    let two_minus = r(k as i64 + rl as i64, k as i64);
    let stirling = Real::ln_rational(&two_minus, DEFAULT_PREC)?.mul_rational(&two_minus).sub(&eta);
    let eta_ok = Real::from_rational(&r(131, 100), DEFAULT_PREC).certainly_le(&eta);
    let checks = vec![
        check("|I| >= k - pi(k)", index_set.len() + pi_k >= k as usize, false, format!("|I| = {}, k - pi(k) = {}", index_set.len(), k as usize - pi_k)),
        check(
            "prod_{j<R}(k+j) <= prod of large a_i",
            lower <= big_product,
            false,
            format!("R = {rl}"),
        ),
        check("prod of large a_i <= k!", big_product <= k_fact, false, format!("R = {rl}, k = {k}")),
        check("eta >= 1.31", eta_ok, true, format!("eta = {}", sci(&eta))),
        check("small >= 0.3k/ln k", count_at_least(small, &r(3, 10), k), true, format!("small = {small}")),
    ];
    Ok(SparkRecord { r_large: large.len(), checks, eta: sci(&eta), stirling_value: sci(&stirling) })
}

fn failure_detail(k: u64, f: &RoundRecord, ln_k: &Real) -> Vec<Check> {
    let p = ln_k.prec();
    // ⌊δ₀ k / ln k⌋ from the certified interval (lower endpoint).
    let q = Real::from_rational(&(&f.delta0 * BigRational::from_integer(k.into())), p)
        .div(ln_k)
        .expect("ln k > 0");
    let m = q.lower().floor().to_integer().to_u64().unwrap_or(0);
    let rl = f.r_large as u64;
    let rhs = factorial(m) * if rl == 0 { num_bigint::BigUint::one() } else { range_product(k, k + rl - 1) };
    let eta = ln_k.mul_rational(&r(k as i64 - rl as i64, k as i64));
    let target = &f.delta0 + r(1005, 1000);
    vec![
        check("k! >= floor(delta0 k/ln k)! * prod_{j<R}(k+j)", factorial(k) >= rhs, false, format!("floor = {m}, R = {rl}")),
        check(
            "eta >= delta0 + 1.005",
            Real::from_rational(&target, p).certainly_le(&eta),
            true,
            format!("eta = {}, delta0 + 1.005 = {}", sci(&eta), target),
        ),
    ]
}

/// Pair extraction run when too few `a_i` values are unique.
fn collision_pipeline(
    terms: &[TermFactorization],
    t_prime: &BTreeMap<u64, Vec<usize>>,
    k: u64,
    l: u32,
    d: &BigInt,
) -> Result<CollisionRecord> {
    let k_big = BigInt::from(k);
    let multiplicities: BTreeMap<u64, usize> =
        t_prime.iter().filter(|(_, v)| v.len() >= 2).map(|(&a, v)| (a, v.len())).collect();

    // Indices with a_i < k and |t_i| = 1, over the whole range.
    let trivial: Vec<usize> = terms
        .iter()
        .filter(|t| t.a < k_big && t.t.as_ref().is_some_and(|t| t.abs().is_one()))
        .map(|t| t.index)
        .collect();
    let trivial_set: HashSet<usize> = trivial.iter().copied().collect();
    let trivial_alphas: HashSet<u64> = trivial.iter().filter_map(|&i| terms[i].a.to_u64()).collect();
    let trivial_contribution: usize = trivial_alphas
        .iter()
        .filter_map(|a| multiplicities.get(a))
        .filter(|&&m| m <= 21)
        .sum();

    let mut absent = 0;
    let t_sets: BTreeMap<u64, Vec<usize>> = t_prime
        .iter()
        .map(|(&a, v)| {
            let kept: Vec<usize> = v
                .iter()
                .copied()
                .filter(|i| !trivial_set.contains(i))
                .filter(|&i| {
                    let ok = terms[i].t.is_some();
                    absent += usize::from(!ok);
                    ok
                })
                .collect();
            (a, kept)
        })
        .filter(|(_, v)| v.len() >= 2)
        .collect();

    let mut checks = vec![
        check("at most 20 trivial t_i", trivial.len() <= 20, true, format!("{} trivial indices", trivial.len())),
        check("trivial contribution <= 420", trivial_contribution <= 420, true, format!("{trivial_contribution}")),
    ];

    // Dyadic block (N/2, N] with the largest mass.
    let mut best = (0usize, 1u64);
    let mut n = 1u64;
    loop {
        let sum: usize = t_sets.range(n / 2 + 1..=n).map(|(_, v)| v.len()).sum();
        if sum > best.0 {
            best = (sum, n);
        }
        if n >= k {
            break;
        }
        n *= 2;
    }
    let (dyadic_sum, dyadic_n) = best;
    let ln_k = Real::ln_int(&k_big, DEFAULT_PREC)?;
    let ln3 = ln_k.powi(3);
    let large_n_case = Real::from_int(&k_big, DEFAULT_PREC).certainly_lt(&ln3.mul_int(&BigInt::from(dyadic_n)));
    let interval_length = (!large_n_case).then(|| {
        let len = ln3.mul_int(&BigInt::from(dyadic_n)).lower().floor().to_integer();
        len.to_u64().unwrap_or(u64::MAX).max(1)
    });

    let mut pairs = Vec::new();
    let step = num_traits::pow(d.clone(), l as usize);
    for (&alpha, idx) in t_sets.range(dyadic_n / 2 + 1..=dyadic_n) {
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        match interval_length {
            None => chosen.push((idx[0], idx[1])),
            Some(len) => {
                let mut blocks: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
                for &i in idx {
                    blocks.entry(i as u64 / len).or_default().push(i);
                }
                for v in blocks.values().filter(|v| v.len() >= 2) {
                    chosen.push((v[0], v[1]));
                }
            }
        }
        for (j, i) in chosen {
            // i > j; both lists are ascending.
            let gap = (i - j) as u64;
            if gap % alpha != 0 {
                return Err(Error::Audit {
                    identity: "alpha divides i - j".into(),
                    detail: format!("alpha = {alpha}, i = {i}, j = {j}"),
                });
            }
            let a = BigInt::from(gap / alpha);
            let (ti, tj) = (terms[i].t.clone().unwrap(), terms[j].t.clone().unwrap());
            let lhs = num_traits::pow(ti.clone(), l as usize) - num_traits::pow(tj.clone(), l as usize);
            if lhs != &a * &step {
                return Err(Error::Audit {
                    identity: "t_i^l - t_j^l = A d^l".into(),
                    detail: format!("i = {i}, j = {j}: lhs = {lhs}, A d^l = {}", &a * &step),
                });
            }
            pairs.push(PairRecord { i, j, alpha, a, t_i: ti, t_j: tj });
        }
    }

    let mut votes: HashMap<&BigInt, usize> = HashMap::new();
    for p in &pairs {
        *votes.entry(&p.a).or_default() += 1;
    }
    let a0 = votes
        .iter()
        .max_by(|(a, x), (b, y)| x.cmp(y).then_with(|| b.abs().cmp(&a.abs())).then_with(|| a.cmp(b)))
        .map(|(a, _)| (*a).clone());
    let a0_pairs = pairs.iter().filter(|p| Some(&p.a) == a0.as_ref()).map(|p| (p.i, p.j)).collect();
    checks.push(check("pairs extracted", !pairs.is_empty(), true, format!("{} pairs", pairs.len())));
    if pairs.iter().any(|p| p.a.is_zero()) {
        return Err(Error::Audit { identity: "A nonzero".into(), detail: "zero coefficient".into() });
    }
    Ok(CollisionRecord {
        multiplicities,
        trivial_indices: trivial,
        trivial_contribution,
        absent_t_excluded: absent,
        checks,
        dyadic_n,
        dyadic_sum,
        large_n_case,
        interval_length,
        pairs,
        a0,
        a0_pairs,
    })
}

/// Fixture with half of the indices sharing `a = 2` and cube `t` values
/// planted at `i = 2m³`; every other `t` is absent. Used to exercise the
/// pair extraction end to end.
pub fn tampered_fixture(k: u64) -> Vec<TermFactorization> {
    let planted: HashMap<usize, i64> = (2i64..)
        .map(|m| ((2 * m * m * m) as usize, m))
        .take_while(|&(i, _)| (i as u64) < k)
        .collect();
    (0..k as usize)
        .map(|i| {
            let a = if i % 2 == 0 { 2 } else { 1 };
            match planted.get(&i) {
                Some(&m) => TermFactorization::from_parts(i, a.into(), BigInt::from(m * m * m), 3),
                None => TermFactorization::from_parts(i, a.into(), BigInt::from(2), 3),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::es_model::ApSolution;
    use crate::factor_terms::factor_terms;

    #[test]
    fn constants() {
        assert!(numeric_constant_checks().iter().all(|c| c.holds));
    }

    #[test]
    fn tampered() {
        let k = 10_000;
        let terms = tampered_fixture(k);
        let trace = mass_increment_audit(&terms, k, 3, &BigInt::one()).unwrap();
        assert!(trace.consistent());
        let c = trace.collision.expect("pipeline runs");
        assert_eq!(c.a0, Some(BigInt::from(19)));
        assert_eq!(c.a0_pairs, vec![(54, 16)]);
    }

    #[test]
    fn speculative_run() {
        let s = ApSolution::candidate(1.into(), 1.into(), None, 100, 5).unwrap();
        let terms = factor_terms(&s).unwrap();
        let trace = mass_increment_audit(&terms, 100, 5, &s.d).unwrap();
        assert!(trace.consistent());
        assert!(trace.rounds_run >= 1);
    }

    #[test]
    fn large_values_break_spark() {
        let k = 50u64;
        let terms: Vec<_> = (0..k as usize)
            .map(|i| TermFactorization::from_parts(i, BigInt::from(k + 1 + i as u64), BigInt::one(), 3))
            .collect();
        let trace = mass_increment_audit(&terms, k, 3, &BigInt::one()).unwrap();
        let f = trace.first_exact_failure().unwrap();
        assert_eq!(f.name, "prod of large a_i <= k!");
    }
}
