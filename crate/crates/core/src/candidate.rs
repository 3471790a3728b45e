//! Text format for audit candidates.
//!
//! ```text
//! # comments and blank lines are ignored
//! n = 1
//! d = 1
//! t = 7          # optional
//! k = 100
//! l = 5
//! term 0 2 8     # optional: index, smooth part a_i, rough part z_i
//! ```
//!
//! `k`, `l` and `d` are required. `n` may be omitted when every index
//! `0..k` has a `term` line; the terms then replace the factorization of
//! `n + i·d^ℓ`.

use std::str::FromStr;

use num_bigint::BigInt;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor_terms::TermFactorization;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    #[serde(serialize_with = "crate::ser::opt_bigint")]
    pub n: Option<BigInt>,
    #[serde(serialize_with = "crate::ser::bigint")]
    pub d: BigInt,
    #[serde(serialize_with = "crate::ser::opt_bigint")]
    pub t: Option<BigInt>,
    pub k: u32,
    pub l: u32,
    #[serde(skip)]
    pub terms: Option<Vec<TermFactorization>>,
}

fn input(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Input { line, field: field.into(), message: message.into() }
}

fn parse<T: FromStr>(line: usize, field: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| input(line, field, format!("cannot parse `{s}`: {e}")))
}

pub fn parse_candidate(text: &str) -> Result<Candidate> {
    let (mut n, mut d, mut t, mut k, mut l) = (None, None, None, None, None);
    let mut terms: Vec<(usize, TermFactorization)> = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("term") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(input(line_no, "term", "expected `term <index> <a> <z>`"));
            }
            let i: usize = parse(line_no, "term.index", parts[0])?;
            let a: BigInt = parse(line_no, "term.a", parts[1])?;
            let z: BigInt = parse(line_no, "term.z", parts[2])?;
            if a <= BigInt::from(0) {
                return Err(input(line_no, "term.a", format!("smooth part must be positive, got {a}")));
            }
            terms.push((line_no, TermFactorization::from_parts(i, a, z, 0)));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(input(line_no, "line", format!("expected `key = value` or `term ...`, got `{line}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        let slot_line = seen.insert(key.to_string(), line_no);
        if let Some(prev) = slot_line {
            return Err(input(line_no, key, format!("duplicate key, first set on line {prev}")));
        }
        match key {
            "n" => n = Some(parse::<BigInt>(line_no, key, value)?),
            "d" => d = Some(parse::<BigInt>(line_no, key, value)?),
            "t" => t = Some(parse::<BigInt>(line_no, key, value)?),
            "k" => k = Some(parse::<u32>(line_no, key, value)?),
            "l" => l = Some(parse::<u32>(line_no, key, value)?),
            _ => return Err(input(line_no, key, "unknown key")),
        }
    }
    let last = text.lines().count().max(1);
    let k = k.ok_or_else(|| input(last, "k", "missing"))?;
    let l = l.ok_or_else(|| input(last, "l", "missing"))?;
    let d = d.ok_or_else(|| input(last, "d", "missing"))?;
    let terms = if terms.is_empty() {
        if n.is_none() {
            return Err(input(last, "n", "missing and no term lines given"));
        }
        None
    } else {
        let mut slots: Vec<Option<TermFactorization>> = vec![None; k as usize];
        for (line_no, mut term) in terms {
            if term.index >= k as usize {
                return Err(input(line_no, "term.index", format!("index {} is not below k = {k}", term.index)));
            }
            if slots[term.index].is_some() {
                return Err(input(line_no, "term.index", format!("index {} given twice", term.index)));
            }
            term = TermFactorization::from_parts(term.index, term.a, term.rough, l);
            let i = term.index;
            slots[i] = Some(term);
        }
        if let Some(missing) = slots.iter().position(Option::is_none) {
            return Err(input(last, "term", format!("no term line for index {missing}")));
        }
        Some(slots.into_iter().map(Option::unwrap).collect())
    };
    Ok(Candidate { n, d, t, k, l, terms })
}

/// Inverse of [`parse_candidate`].
pub fn render_candidate(c: &Candidate) -> String {
    let mut out = String::new();
    if let Some(n) = &c.n {
        out.push_str(&format!("n = {n}\n"));
    }
    out.push_str(&format!("d = {}\n", c.d));
    if let Some(t) = &c.t {
        out.push_str(&format!("t = {t}\n"));
    }
    out.push_str(&format!("k = {}\nl = {}\n", c.k, c.l));
    for term in c.terms.iter().flatten() {
        out.push_str(&format!("term {} {} {}\n", term.index, term.a, term.rough));
    }
    out
}
