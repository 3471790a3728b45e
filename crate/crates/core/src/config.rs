//! Run configuration. Every field has a default, so an empty document is a
//! valid config. Rationals are written as strings (`"229/1000"`, `"0.229"`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::combinatorics::GcdHypothesis;
use crate::error::{Error, Result};
use crate::realnum::DEFAULT_PREC;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Working precision in bits for certified real arithmetic.
    pub precision: u32,
    /// Worker count for sharded searches. Never affects results.
    pub shards: usize,
    pub gcd: GcdConstants,
    /// Box searched on the auxiliary curve holding the most points.
    pub aux_denoms: u64,
    pub aux_numers: u64,
    /// Per-curve overrides for the Mordell ball census.
    pub curves: Vec<CurveOverride>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            precision: DEFAULT_PREC,
            shards: 1,
            gcd: GcdConstants::default(),
            aux_denoms: 8,
            aux_numers: 40,
            curves: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcdConstants {
    pub c: String,
    pub eta: String,
    pub a: String,
}

impl Default for GcdConstants {
    fn default() -> Self {
        GcdConstants { c: "229/1000".into(), eta: "1/17000".into(), a: "283".into() }
    }
}

impl GcdConstants {
    pub fn hypothesis(&self) -> Result<GcdHypothesis> {
        Ok(GcdHypothesis::new(
            parse_rational(&self.c).map_err(|e| field_err("gcd.c", e))?,
            parse_rational(&self.eta).map_err(|e| field_err("gcd.eta", e))?,
            parse_rational(&self.a).map_err(|e| field_err("gcd.a", e))?,
        ))
    }
}

/// Overrides for `y² = x³ + ax + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveOverride {
    pub a: i64,
    pub b: i64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub gap: Option<f64>,
    pub rank_upper: Option<usize>,
}

impl Config {
    pub fn curve_override(&self, a: i64, b: i64) -> Option<&CurveOverride> {
        self.curves.iter().find(|c| c.a == a && c.b == b)
    }

    pub fn check(&self) -> Result<()> {
        if self.precision < 32 {
            return Err(field_err("precision", format!("must be at least 32 bits, got {}", self.precision)));
        }
        if self.shards == 0 {
            return Err(field_err("shards", "must be positive".into()));
        }
        self.gcd.hypothesis()?;
        for c in &self.curves {
            if c.l.is_some_and(|l| !(l > 0.0)) {
                return Err(field_err("curves.L", format!("must be positive for ({}, {})", c.a, c.b)));
            }
        }
        Ok(())
    }
}

fn field_err(field: &str, message: String) -> Error {
    Error::Input { line: 0, field: field.into(), message }
}

/// `"p/q"`, `"-12"` or a plain decimal such as `"0.229"`, exactly.
pub fn parse_rational(s: &str) -> std::result::Result<BigRational, String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
        let q: BigInt = q.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
        if q.is_zero() {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(BigRational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(format!("not a rational: `{s}`"));
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().unwrap() };
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = BigRational::new(num, den);
    Ok(if neg { -r } else { r })
}
