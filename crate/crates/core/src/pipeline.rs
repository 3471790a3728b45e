//! End-to-end audit of a candidate progression solution.
//!
//! The stages run in the order of the contradiction argument: validate the
//! product, map to a curve point, factor the terms, check the term
//! invariants, count trivial `t_i`, run the density audit, extract
//! large-gcd pairs, group their points by auxiliary curve, and compare
//! against the available bounds. Every stage runs; stages whose inputs are
//! missing are marked skipped. The verdict names the first failed stage.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;
use serde_json::{json, Value};

use crate::aux_curves::{enumerate_points_sharded, faltings_log_bound, pair_tuple, pairs_to_points};
use crate::candidate::Candidate;
use crate::combinatorics::mass_increment_audit;
use crate::combinatorics::{gcd_dense_pairs, GcdPairs};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::es_model::{from_ap_solution, is_on_curve, ApSolution};
use crate::factor_terms::{
    check_term_invariants, count_trivial_ti, factor_terms, few_trivial_assertion, n_bound_audit, TermFactorization,
};
use crate::mordell::cubes_to_mordell;

pub const CERTIFICATE_VERSION: &str = "1";

/// Terms listed verbatim in the factorization stage.
const LISTED_TERMS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    NotApplicable,
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub assertion: String,
    pub values: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub name: &'static str,
    pub status: Status,
    pub failure: Option<Failure>,
    pub details: Value,
}

impl Stage {
    fn new(name: &'static str, status: Status, details: Value) -> Self {
        Stage { name, status, failure: None, details }
    }

    fn fail(name: &'static str, assertion: impl Into<String>, values: Value, details: Value) -> Self {
        Stage {
            name,
            status: Status::Fail,
            failure: Some(Failure { assertion: assertion.into(), values }),
            details,
        }
    }

    fn skipped(name: &'static str, reason: &str) -> Self {
        Stage::new(name, Status::Skipped, json!({ "reason": reason }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Contradiction { stage: String, assertion: String, values: Value },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditCertificate {
    pub version: &'static str,
    pub input: Value,
    pub stages: Vec<Stage>,
    pub verdict: Verdict,
}

impl AuditCertificate {
    pub fn is_contradiction(&self) -> bool {
        matches!(self.verdict, Verdict::Contradiction { .. })
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }
}

fn s(x: &BigInt) -> String {
    x.to_string()
}

fn shape_error(e: Error) -> Error {
    match e {
        Error::Precondition(m) => Error::Input { line: 0, field: "candidate".into(), message: m },
        other => other,
    }
}

/// Run every stage on `c`. Shape errors (`d ≤ 0`, `ℓ` not an odd prime,
/// `gcd(n, d) ≠ 1`) are input errors; everything else ends up in the
/// certificate.
pub fn run_audit(c: &Candidate, cfg: &Config) -> Result<AuditCertificate> {
    cfg.check()?;
    let hypothesis = cfg.gcd.hypothesis()?;
    let n = match (&c.n, &c.terms) {
        (Some(n), _) => n.clone(),
        (None, Some(terms)) => terms[0].value(),
        (None, None) => return Err(Error::Input { line: 0, field: "n".into(), message: "missing".into() }),
    };
    let mut sol = ApSolution::candidate(n, c.d.clone(), c.t.clone(), c.k, c.l).map_err(shape_error)?;
    let k = c.k;
    let l = c.l;
    let mut stages = Vec::new();

    // validation
    let supplied_values: Option<Vec<BigInt>> = c.terms.as_ref().map(|t| t.iter().map(|x| x.value()).collect());
    let mismatch = supplied_values.as_ref().and_then(|vals| {
        let expected = sol.terms();
        vals.iter().zip(&expected).position(|(v, e)| v != e).map(|i| (i, vals[i].clone(), expected[i].clone()))
    });
    let validation = match (&mismatch, sol.validate()) {
        (Some((i, v, e)), _) => Stage::fail(
            "validation",
            format!("term {i} equals n + {i}·d^{l}"),
            json!({ "index": i, "supplied": s(v), "expected": s(e) }),
            json!({ "terms_supplied": true }),
        ),
        (None, Ok(())) => Stage::new(
            "validation",
            Status::Pass,
            json!({ "t": sol.t.as_ref().map(s), "terms_supplied": supplied_values.is_some() }),
        ),
        (None, Err(Error::Validation { product, expected })) => Stage::fail(
            "validation",
            format!("product of the {k} terms is {expected}"),
            json!({ "product": product, "expected": expected }),
            json!({ "terms_supplied": supplied_values.is_some() }),
        ),
        (None, Err(e)) => return Err(e),
    };
    stages.push(validation);

    // transform
    stages.push(if sol.validated {
        match from_ap_solution(&sol) {
            Ok((curve, p)) => {
                let on = is_on_curve(&curve, &p);
                let details = json!({ "x": p.x.to_string(), "y": p.y.to_string(), "k": k, "l": l });
                if on {
                    Stage::new("transform", Status::Pass, details)
                } else {
                    Stage::fail("transform", "point lies on the curve", details.clone(), details)
                }
            }
            Err(e) => Stage::fail("transform", "solution maps to a curve point", json!({ "error": e.to_string() }), Value::Null),
        }
    } else {
        Stage::skipped("transform", "candidate not validated")
    });

    // factorization
    let terms: Option<Vec<TermFactorization>> = match &c.terms {
        Some(t) => Some(t.clone()),
        None => match factor_terms(&sol) {
            Ok(t) => Some(t),
            Err(e) => {
                stages.push(Stage::fail(
                    "factorization",
                    "every term factors into smooth and rough parts",
                    json!({ "error": e.to_string() }),
                    Value::Null,
                ));
                None
            }
        },
    };
    if let Some(terms) = &terms {
        stages.push(factorization_stage(terms, k, c.terms.is_some()));
    }

    let Some(terms) = terms else {
        for name in ["invariants", "trivial_t", "mass_increment", "gcd_pairs", "aux_grouping", "bounds"] {
            stages.push(Stage::skipped(name, "no factorization"));
        }
        return Ok(finish(c, stages));
    };

    // invariants
    let report = check_term_invariants(&terms, k, &c.d, l);
    let details = serde_json::to_value(&report).expect("serializes");
    stages.push(match report.first_failure() {
        None => Stage::new("invariants", Status::Pass, details),
        Some(b) => Stage::fail(
            "invariants",
            b.name,
            json!({ "counterexample": b.counterexample }),
            details,
        ),
    });

    // trivial_t
    let (count, idx) = count_trivial_ti(&terms, k);
    let details = json!({ "count": count, "indices": idx, "limit": 20 });
    stages.push(match few_trivial_assertion(&terms, k, sol.validated) {
        None => Stage::new("trivial_t", Status::NotApplicable, details),
        Some(true) => Stage::new("trivial_t", Status::Pass, details),
        Some(false) => Stage::fail("trivial_t", "at most 20 indices with a_i < k and |t_i| = 1", details.clone(), details),
    });

    // mass_increment
    stages.push(mass_increment_stage(&terms, k, l, &c.d));

    // gcd_pairs
    let b = gcd_input(&terms, k);
    let pairs = match gcd_dense_pairs(&b, &hypothesis, k as u64) {
        Ok(p) => {
            stages.push(gcd_stage(&p, &hypothesis.eta, k));
            Some(p)
        }
        Err(Error::Precondition(m)) => {
            stages.push(Stage::new(
                "gcd_pairs",
                Status::NotApplicable,
                json!({ "reason": m, "r": b.len() }),
            ));
            None
        }
        Err(e) => return Err(e),
    };

    // aux_grouping
    let largest_height = match &pairs {
        Some(p) => {
            let (stage, h) = aux_stage(&terms, p, &c.d, l, cfg)?;
            stages.push(stage);
            h
        }
        None => {
            stages.push(Stage::skipped("aux_grouping", "no gcd pairs"));
            None
        }
    };

    // bounds
    stages.push(bounds_stage(&sol, &terms, k, l, largest_height, cfg.precision));

    Ok(finish(c, stages))
}

fn finish(c: &Candidate, stages: Vec<Stage>) -> AuditCertificate {
    let verdict = stages
        .iter()
        .find(|s| s.status == Status::Fail)
        .map(|s| {
            let f = s.failure.clone().expect("failed stages carry a failure");
            Verdict::Contradiction { stage: s.name.to_string(), assertion: f.assertion, values: f.values }
        })
        .unwrap_or(Verdict::Consistent);
    let mut input = serde_json::to_value(c).expect("serializes");
    input["terms_supplied"] = json!(c.terms.is_some());
    AuditCertificate { version: CERTIFICATE_VERSION, input, stages, verdict }
}

fn factorization_stage(terms: &[TermFactorization], k: u32, supplied: bool) -> Stage {
    let kb = BigInt::from(k);
    let exact = terms.iter().filter(|t| t.exact_power).count();
    let mut small: Vec<&BigInt> = terms.iter().map(|t| &t.a).filter(|a| **a < kb).collect();
    small.sort();
    small.dedup();
    let listed: Vec<Value> = terms
        .iter()
        .take(LISTED_TERMS)
        .map(|t| json!({ "i": t.index, "a": s(&t.a), "rough": s(&t.rough), "t": t.t.as_ref().map(s) }))
        .collect();
    Stage::new(
        "factorization",
        Status::Pass,
        json!({
            "supplied": supplied,
            "count": terms.len(),
            "exact_powers": exact,
            "distinct_small_a": small.len(),
            "terms": listed,
            "truncated": terms.len() > LISTED_TERMS,
        }),
    )
}

fn mass_increment_stage(terms: &[TermFactorization], k: u32, l: u32, d: &BigInt) -> Stage {
    let trace = match mass_increment_audit(terms, k as u64, l, d) {
        Ok(t) => t,
        Err(e) => return Stage::new("mass_increment", Status::NotApplicable, json!({ "reason": e.to_string() })),
    };
    let mut details = serde_json::to_value(&trace).expect("serializes");
    if l == 3 {
        if let Some((a0, pairs)) = trace.collision.as_ref().and_then(|c| c.a0.clone().map(|a| (a, c.a0_pairs.clone()))) {
            let images: Vec<Value> = pairs
                .iter()
                .map(|&(i, j)| {
                    let (ti, tj) = (terms[i].t.clone(), terms[j].t.clone());
                    match (ti, tj) {
                        (Some(ti), Some(tj)) => match cubes_to_mordell(&ti, &tj, d, &a0) {
                            Ok(m) => json!({ "pair": [i, j], "curve": m.curve.to_string(), "point": m.point }),
                            Err(e) => json!({ "pair": [i, j], "error": e.to_string() }),
                        },
                        _ => json!({ "pair": [i, j], "error": "missing t" }),
                    }
                })
                .collect();
            details["mordell_images"] = Value::Array(images);
        }
    }
    if let Some(f) = trace.first_exact_failure() {
        let values = json!({ "check": f.name, "detail": f.detail });
        return Stage::fail("mass_increment", f.name.to_string(), values, details);
    }
    Stage::new("mass_increment", Status::Pass, details)
}

/// Distinct `a_i < k` over the indices whose `t_i` is not `±1`.
pub fn gcd_input(terms: &[TermFactorization], k: u32) -> Vec<u64> {
    let kb = BigInt::from(k);
    let mut b: Vec<u64> = terms
        .iter()
        .filter(|t| t.a < kb && !t.t.as_ref().is_some_and(|t| t.abs().is_one()))
        .filter_map(|t| t.a.to_u64())
        .collect();
    b.sort_unstable();
    b.dedup();
    b
}

fn gcd_stage(p: &GcdPairs, eta: &num_rational::BigRational, k: u32) -> Stage {
    use num_integer::Integer;
    let threshold = eta * num_rational::BigRational::from_integer(BigInt::from(k));
    let bad = p
        .pairs
        .iter()
        .find(|(x, y)| num_rational::BigRational::from_integer(BigInt::from(x.gcd(y))) <= threshold);
    let count_ok = num_rational::BigRational::from_integer(BigInt::from(p.pairs.len())) >= p.lower_bound;
    let details = serde_json::to_value(p).expect("serializes");
    if let Some(&(x, y)) = bad {
        return Stage::fail(
            "gcd_pairs",
            "every pair has gcd > ηk",
            json!({ "pair": [x, y], "gcd": x.gcd(&y), "eta_k": threshold.to_string() }),
            details,
        );
    }
    if !count_ok {
        return Stage::fail(
            "gcd_pairs",
            "pair count ≥ r − ηk − s",
            json!({ "pairs": p.pairs.len(), "lower_bound": p.lower_bound.to_string() }),
            details,
        );
    }
    Stage::new("gcd_pairs", Status::Pass, details)
}

fn aux_stage(
    terms: &[TermFactorization],
    p: &GcdPairs,
    d: &BigInt,
    l: u32,
    cfg: &Config,
) -> Result<(Stage, Option<BigInt>)> {
    let mut index_of: BTreeMap<BigInt, usize> = BTreeMap::new();
    for t in terms {
        if t.t.as_ref().is_some_and(|x| !x.abs().is_one()) {
            index_of.entry(t.a.clone()).or_insert(t.index);
        }
    }
    let mut tuples = Vec::new();
    for &(x, y) in &p.pairs {
        let (Some(&i), Some(&j)) = (index_of.get(&BigInt::from(x)), index_of.get(&BigInt::from(y))) else {
            continue;
        };
        match pair_tuple(terms, i, j, d, l) {
            Ok(t) => tuples.push(t),
            Err(e) => {
                return Ok((
                    Stage::fail(
                        "aux_grouping",
                        format!("a_{i} t_{i}^{l} − a_{j} t_{j}^{l} = ({i} − {j})·d^{l} after dividing by gcd(a_{i}, a_{j})"),
                        json!({ "pair": [i, j], "error": e.to_string() }),
                        Value::Null,
                    ),
                    None,
                ))
            }
        }
    }
    if tuples.is_empty() {
        return Ok((Stage::new("aux_grouping", Status::NotApplicable, json!({ "reason": "no pair has both t values" })), None));
    }
    let grouping = match pairs_to_points(&tuples) {
        Ok(g) => g,
        Err(e) => {
            return Ok((
                Stage::fail("aux_grouping", "pair identities hold", json!({ "error": e.to_string() }), Value::Null),
                None,
            ))
        }
    };
    let largest = grouping.largest().expect("nonempty");
    let found = enumerate_points_sharded(&largest.curve, cfg.aux_denoms, cfg.aux_numers, cfg.shards);
    let height = largest.curve.height();
    let mut details = json!({
        "tuples": tuples.len(),
        "groups": grouping.groups.len(),
        "total_points": grouping.total_points,
        "duplicates": grouping.duplicates,
        "coprime_premise": grouping.coprime_premise,
        "pigeonhole": grouping.pigeonhole_holds(),
        "largest": largest,
        "box_search": {
            "denoms": cfg.aux_denoms,
            "numers": cfg.aux_numers,
            "points": found.iter().map(|p| [p.x.to_string(), p.y.to_string()]).collect::<Vec<_>>(),
        },
    });
    if grouping.groups.len() > 1 {
        details["other_curves"] = json!(grouping.groups[1..].iter().take(16).map(|g| g.curve.to_string()).collect::<Vec<_>>());
    }
    let stage = if !grouping.distinct_holds {
        Stage::fail(
            "aux_grouping",
            "pairwise coprime t values give distinct points",
            json!({ "duplicates": grouping.duplicates }),
            details,
        )
    } else if !grouping.pigeonhole_holds() {
        Stage::fail(
            "aux_grouping",
            "#curves · |largest group| ≥ #points",
            json!({ "groups": grouping.groups.len(), "total_points": grouping.total_points }),
            details,
        )
    } else {
        Stage::new("aux_grouping", Status::Pass, details)
    };
    Ok((stage, Some(height)))
}

fn bounds_stage(
    sol: &ApSolution,
    terms: &[TermFactorization],
    k: u32,
    l: u32,
    height: Option<BigInt>,
    prec: u32,
) -> Stage {
    if l >= 5 {
        let source = if height.is_some() { "largest_aux_curve" } else { "k" };
        let h = height.unwrap_or_else(|| BigInt::from(k));
        return match faltings_log_bound(l, &h, prec) {
            Ok(f) => Stage::new(
                "bounds",
                Status::Info,
                json!({
                    "kind": "faltings",
                    "H": s(&h),
                    "H_source": source,
                    "lnln_bound": f.lnln_digits(30),
                }),
            ),
            Err(e) => Stage::new("bounds", Status::NotApplicable, json!({ "reason": e.to_string() })),
        };
    }
    match n_bound_audit(sol, terms) {
        Ok(r) => {
            let details = json!({ "kind": "n_bound", "fired": r.fired(), "report": r });
            if r.bounds_hold() {
                Stage::new("bounds", Status::Pass, details)
            } else {
                Stage::fail("bounds", format!("|n| bound for case: {}", r.fired()), details.clone(), details)
            }
        }
        Err(e) => Stage::new("bounds", Status::NotApplicable, json!({ "reason": e.to_string() })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::parse_candidate;

    fn audit(text: &str) -> AuditCertificate {
        run_audit(&parse_candidate(text).unwrap(), &Config::default()).unwrap()
    }

    #[test]
    fn non_power_product_fails_validation() {
        let cert = audit("n = 1\nd = 1\nk = 4\nl = 3\n");
        match &cert.verdict {
            Verdict::Contradiction { stage, values, .. } => {
                assert_eq!(stage, "validation");
                assert_eq!(values["product"], "24");
            }
            v => panic!("{v:?}"),
        }
        assert_eq!(cert.stage("transform").unwrap().status, Status::Skipped);
    }

    #[test]
    fn speculative_has_full_trace() {
        let cert = audit("n = 1\nd = 1\nk = 100\nl = 5\n");
        assert!(cert.is_contradiction());
        let names: Vec<_> = cert.stages.iter().map(|s| s.name).collect();
        assert_eq!(
            names,
            ["validation", "transform", "factorization", "invariants", "trivial_t", "mass_increment", "gcd_pairs", "aux_grouping", "bounds"]
        );
        assert_eq!(cert.stage("bounds").unwrap().status, Status::Info);
    }

    #[test]
    fn shape_errors_are_input_errors() {
        let c = parse_candidate("n = 2\nd = 2\nk = 4\nl = 3\n").unwrap();
        assert!(matches!(run_audit(&c, &Config::default()), Err(Error::Input { .. })));
    }

    #[test]
    fn deterministic_json() {
        let a = audit("n = 3\nd = 2\nk = 30\nl = 3\n").to_json();
        let b = audit("n = 3\nd = 2\nk = 30\nl = 3\n").to_json();
        assert_eq!(a, b);
    }
}
