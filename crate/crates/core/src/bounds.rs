//! Tabulated bound evaluations: the point-count bound on auxiliary curves,
//! the Mordell–Weil ball bounds, and the `ln ln d` threshold for the
//! common difference.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::aux_curves::faltings_log_bound;
use crate::error::{Error, Result};
use crate::mordell::{
    ball_bounds, canonical_height, is_torsion, rank_lower_bound, search_points_naive, HeightBallQuery,
    WeierstrassCurve, HEIGHT_TOLERANCE,
};
use crate::realnum::Real;

/// Digits printed for certified real values.
pub const TABLE_DIGITS: usize = 30;
/// Naive-height radius used to estimate `L` and the rank when not given.
pub const ESTIMATE_SEARCH_BOUND: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Inapplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub name: &'static str,
    pub status: RowStatus,
    /// `(label, value)` pairs in display order.
    pub values: Vec<(String, String)>,
    pub note: Option<String>,
}

impl BoundRow {
    fn inapplicable(name: &'static str, note: String) -> Self {
        BoundRow { name, status: RowStatus::Inapplicable, values: Vec::new(), note: Some(note) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundTable {
    pub rows: Vec<BoundRow>,
}

impl BoundTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let status = match r.status {
                RowStatus::Ok => "ok",
                RowStatus::Inapplicable => "inapplicable",
            };
            out.push_str(&format!("{} [{status}]\n", r.name));
            for (k, v) in &r.values {
                out.push_str(&format!("  {k:<20} {v}\n"));
            }
            if let Some(n) = &r.note {
                out.push_str(&format!("  note: {n}\n"));
            }
        }
        out
    }
}

/// Point-count bound on `AX^ℓ + BY^ℓ = C` with height `H`: `ln ln` evaluated
/// directly and as `ℓ⁴ln5 + ln(ln 3H · lnln 3H)`.
pub fn faltings_row(l: u32, h: &BigInt, prec: u32) -> BoundRow {
    match faltings_log_bound(l, h, prec) {
        Ok(f) => {
            let direct = f.lnln_direct.to_sci(TABLE_DIGITS).unwrap_or_else(|| f.lnln_direct.to_string());
            let split = f.lnln_split.to_sci(TABLE_DIGITS).unwrap_or_else(|| f.lnln_split.to_string());
            let agree = direct == split;
            BoundRow {
                name: "faltings",
                status: RowStatus::Ok,
                values: vec![
                    ("l".into(), l.to_string()),
                    ("H".into(), h.to_string()),
                    ("lnln_bound".into(), direct),
                    ("lnln_split".into(), split),
                ],
                note: (!agree).then(|| "evaluations disagree at this precision".into()),
            }
        }
        Err(e) => BoundRow::inapplicable("faltings", e.to_string()),
    }
}

/// Inputs for the ball row: the curve, `H = multiplier·L`, and optional `L`
/// and `r`; missing ones are estimated from a naive search.
#[derive(Clone, Debug, PartialEq)]
pub struct BallRowInput {
    pub curve: WeierstrassCurve,
    pub multiplier: f64,
    pub l: Option<f64>,
    pub r: Option<usize>,
}

pub fn mordell_ball_row(input: &BallRowInput) -> Result<BoundRow> {
    let curve = &input.curve;
    let need_search = input.l.is_none() || input.r.is_none();
    let points = if need_search { search_points_naive(curve, ESTIMATE_SEARCH_BOUND) } else { Vec::new() };
    let (l, l_source) = match input.l {
        Some(l) => (l, "given"),
        None => {
            let mut min: Option<f64> = None;
            for p in points.iter().filter(|p| !is_torsion(curve, p)) {
                let h = canonical_height(curve, p, HEIGHT_TOLERANCE)?;
                if h > 0.0 && min.map_or(true, |m| h < m) {
                    min = Some(h);
                }
            }
            match min {
                Some(m) => (m, "observed"),
                None => (1.0, "default"),
            }
        }
    };
    let (r, r_source) = match input.r {
        Some(r) => (r, "given"),
        None => (rank_lower_bound(curve, &points, HEIGHT_TOLERANCE)?.rank, "lower bound"),
    };
    let q = HeightBallQuery { h: input.multiplier * l, l, r };
    let (nac, prop) = ball_bounds(&q)?;
    Ok(BoundRow {
        name: "mordell_ball",
        status: RowStatus::Ok,
        values: vec![
            ("curve".into(), curve.to_string()),
            ("L".into(), format!("{l:.12} ({l_source})")),
            ("H".into(), format!("{:.12} ({}L)", q.h, input.multiplier)),
            ("r".into(), format!("{r} ({r_source})")),
            ("16(1+2sqrt(H/L))^r".into(), format!("{nac:.12}")),
            ("16(9H/L)^(r/2)".into(), format!("{prop:.12}")),
        ],
        note: None,
    })
}

/// `ln ln` of the threshold `exp(k^{c/lnln k})`, i.e. `(c/lnln k)·ln k`.
pub fn difference_threshold_row(k: &BigInt, c: &BigRational, prec: u32) -> Result<BoundRow> {
    if *k < BigInt::from(16) {
        return Ok(BoundRow::inapplicable("difference_threshold", format!("needs k >= 16 so that lnln k > 1, got {k}")));
    }
    if *c <= BigRational::from_integer(0.into()) {
        return Err(Error::Precondition(format!("c must be positive, got {c}")));
    }
    let ln_k = Real::ln_int(k, prec)?;
    let lnln_k = ln_k.ln()?;
    let exponent = Real::from_rational(c, prec).div(&lnln_k)?;
    let lnln_d = exponent.mul(&ln_k);
    let show = |x: &Real| x.to_sci(20).unwrap_or_else(|| x.to_string());
    Ok(BoundRow {
        name: "difference_threshold",
        status: RowStatus::Ok,
        values: vec![
            ("k".into(), k.to_string()),
            ("c".into(), c.to_string()),
            ("c/lnln k".into(), show(&exponent)),
            ("lnln d >=".into(), show(&lnln_d)),
        ],
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    #[test]
    fn faltings_rows() {
        let row = faltings_row(5, &BigInt::from(17000), 192);
        assert_eq!(row.status, RowStatus::Ok);
        assert_eq!(row.values[2].1, row.values[3].1);
        assert!(row.values[2].1.starts_with("1.00"), "{:?}", row.values);
        assert_eq!(faltings_row(3, &BigInt::from(17000), 192).status, RowStatus::Inapplicable);
    }

    #[test]
    fn ball_row_formula() {
        let input = BallRowInput { curve: WeierstrassCurve::mordell(-2).unwrap(), multiplier: 5.0, l: None, r: Some(1) };
        let row = mordell_ball_row(&input).unwrap();
        let prop: f64 = row.values[5].1.parse().unwrap();
        assert!((prop - 16.0 * 45f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn threshold() {
        let row = difference_threshold_row(&BigInt::from(1_000_000), &rat(1, 2), 128).unwrap();
        let v: f64 = row.values[3].1.parse().unwrap();
        let ln_k = 1e6f64.ln();
        assert!((v - 0.5 * ln_k / ln_k.ln()).abs() < 1e-12);
        assert_eq!(difference_threshold_row(&BigInt::from(5), &rat(1, 2), 128).unwrap().status, RowStatus::Inapplicable);
    }
}
