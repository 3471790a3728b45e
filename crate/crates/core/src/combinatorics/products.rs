use std::collections::HashMap;

use num_integer::Integer;
use num_rational::BigRational;
use serde::Serialize;

use super::gcd_pairs_unchecked;
use crate::error::{Error, Result};

/// A collision `m_i·m_j = m_r·m_s` between two different pairs of distinct
/// indices, stored with `i < j`, `r < s` and `(i, j) < (r, s)`.
pub type Collision = [usize; 4];

fn check_increasing(m: &[u64]) -> Result<()> {
    if let Some(w) = m.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Precondition(format!("values must be strictly increasing, found {} then {}", w[0], w[1])));
    }
    Ok(())
}

fn canonical(a: (usize, usize), b: (usize, usize)) -> Collision {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    [p.0, p.1, q.0, q.1]
}

/// Lexicographically first collision, or `None` if all products of two
/// distinct elements are distinct.
pub fn product_distinct_check(m: &[u64]) -> Result<Option<Collision>> {
    check_increasing(m)?;
    let mut first: HashMap<u128, (usize, usize)> = HashMap::new();
    let mut best: Option<Collision> = None;
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            let p = m[i] as u128 * m[j] as u128;
            match first.get(&p) {
                // Pairs arrive in lexicographic order, so the stored pair is
                // the smallest with this product and (i, j) the second.
                Some(&q) => {
                    let c = canonical(q, (i, j));
                    if best.map_or(true, |b| c < b) {
                        best = Some(c);
                    }
                }
                None => {
                    first.insert(p, (i, j));
                }
            }
        }
    }
    Ok(best)
}

/// O(T⁴) reference implementation of [`product_distinct_check`].
pub fn product_distinct_brute(m: &[u64]) -> Option<Collision> {
    let t = m.len();
    for i in 0..t {
        for j in i + 1..t {
            for r in i..t {
                for s in r + 1..t {
                    if (r, s) > (i, j) && m[i] as u128 * m[j] as u128 == m[r] as u128 * m[s] as u128 {
                        return Some([i, j, r, s]);
                    }
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollisionSearch {
    pub collision: Option<Collision>,
    /// `"pipeline"`, `"checker"` or `"none"`.
    pub found_by: &'static str,
    pub gcd_pairs: usize,
    pub dropped_elements: usize,
    pub disjoint_pairs: usize,
    pub threshold_met: bool,
}

/// Look for a product collision the constructive way: pairs with large gcd,
/// drop elements in too many pairs, keep a disjoint family, then pigeonhole
/// on the reduced pair `(m_a/g, m_b/g)`. Any collision found is re-checked
/// exactly, and the direct checker is used as a fallback.
pub fn find_product_collision(m: &[u64], x: u64, delta: &BigRational) -> Result<CollisionSearch> {
    check_increasing(m)?;
    if let Some(&big) = m.iter().find(|&&v| v > x || v == 0) {
        return Err(Error::Precondition(format!("value {big} outside [1, {x}]")));
    }
    let threshold_met = BigRational::from_integer(m.len().into()) > delta * BigRational::from_integer(x.into());
    let eta = (delta / BigRational::from_integer(4.into())).min(BigRational::new(1.into(), 2.into()));
    let pos: HashMap<u64, usize> = m.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let (pairs, dropped, disjoint, collision) = if eta > BigRational::from_integer(0.into()) && x >= 2 {
        let found = gcd_pairs_unchecked(m, &eta, delta, x)?;
        // Multiplicity cap η^{-3}.
        let inv = (BigRational::from_integer(1.into()) / &eta).ceil().to_integer();
        let cap: u64 = (&inv * &inv * &inv).try_into().unwrap_or(u64::MAX);
        let mut count: HashMap<u64, u64> = HashMap::new();
        for &(a, b) in &found.pairs {
            *count.entry(a).or_default() += 1;
            *count.entry(b).or_default() += 1;
        }
        let dropped = count.values().filter(|&&c| c > cap).count();
        let mut used = std::collections::HashSet::new();
        let mut disjoint = Vec::new();
        for &(a, b) in &found.pairs {
            if count[&a] > cap || count[&b] > cap || used.contains(&a) || used.contains(&b) {
                continue;
            }
            used.insert(a);
            used.insert(b);
            disjoint.push((a, b));
        }
        let mut by_key: HashMap<(u64, u64), (u64, u64)> = HashMap::new();
        let mut collision = None;
        for &(a, b) in &disjoint {
            let g = a.gcd(&b);
            let key = (a / g, b / g);
            if let Some(&(c, e)) = by_key.get(&key) {
                // a/g = c/g', b/g = e/g'  ⇒  a·e = c·b.
                debug_assert_eq!(a as u128 * e as u128, c as u128 * b as u128);
                collision = Some(canonical(order(pos[&a], pos[&e]), order(pos[&c], pos[&b])));
                break;
            }
            by_key.insert(key, (a, b));
        }
        (found.pairs.len(), dropped, disjoint.len(), collision)
    } else {
        (0, 0, 0, None)
    };

    let verified = collision.filter(|c| m[c[0]] as u128 * m[c[1]] as u128 == m[c[2]] as u128 * m[c[3]] as u128);
    let (collision, found_by) = match verified {
        Some(c) => (Some(c), "pipeline"),
        None => match product_distinct_check(m)? {
            Some(c) => (Some(c), "checker"),
            None => (None, "none"),
        },
    };
    Ok(CollisionSearch { collision, found_by, gcd_pairs: pairs, dropped_elements: dropped, disjoint_pairs: disjoint, threshold_met })
}

fn order(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Largest `T` such that some `T`-subset of `[1, x]` has all products of
/// two distinct elements distinct. Exhaustive, so `x ≤ 30`.
pub fn max_product_distinct(x: u64) -> Result<usize> {
    if x > 30 {
        return Err(Error::Resource(format!("exhaustive search capped at x = 30, got {x}")));
    }
    if x == 0 {
        return Ok(0);
    }
    let mut best = 0;
    let mut used = vec![false; (x * x + 1) as usize];
    let mut chosen = Vec::new();
    branch(x, 1, &mut chosen, &mut used, &mut best);
    Ok(best)
}

fn branch(x: u64, next: u64, chosen: &mut Vec<u64>, used: &mut [bool], best: &mut usize) {
    if chosen.len() > *best {
        *best = chosen.len();
    }
    if next > x || chosen.len() + (x - next + 1) as usize <= *best {
        return;
    }
    let fresh: Vec<usize> = chosen.iter().map(|&c| (c * next) as usize).collect();
    if fresh.iter().all(|&p| !used[p]) {
        for &p in &fresh {
            used[p] = true;
        }
        chosen.push(next);
        branch(x, next + 1, chosen, used, best);
        chosen.pop();
        for &p in &fresh {
            used[p] = false;
        }
    }
    branch(x, next + 1, chosen, used, best);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    #[test]
    fn checker_examples() {
        assert_eq!(product_distinct_check(&[1, 2, 3, 5]).unwrap(), None);
        assert_eq!(product_distinct_check(&[2, 3, 4, 6]).unwrap(), Some([0, 3, 1, 2]));
        assert_eq!(product_distinct_check(&[1, 2, 3, 4]).unwrap(), None);
        assert!(product_distinct_check(&[2, 2]).is_err());
    }

    #[test]
    fn brute_agrees_small() {
        for mask in 0u32..(1 << 12) {
            let m: Vec<u64> = (0..12).filter(|b| mask >> b & 1 == 1).map(|b| b as u64 + 1).collect();
            assert_eq!(product_distinct_check(&m).unwrap(), product_distinct_brute(&m), "{m:?}");
        }
    }

    #[test]
    fn collision_pipeline() {
        let primes: Vec<u64> = (2..200u64).filter(|&p| crate::arith::is_prime(p)).collect();
        let r = find_product_collision(&primes, 200, &rat(1, 10)).unwrap();
        assert_eq!(r.collision, None);
        let m: Vec<u64> = (1..=1000).collect();
        let r = find_product_collision(&m, 1000, &rat(1, 2)).unwrap();
        let c = r.collision.unwrap();
        assert_eq!(m[c[0]] * m[c[1]], m[c[2]] * m[c[3]]);
        assert_eq!(r.found_by, "pipeline");
    }

    #[test]
    fn maximum_sizes() {
        assert_eq!(max_product_distinct(1).unwrap(), 1);
        assert_eq!(max_product_distinct(4).unwrap(), 4);
        let sizes: Vec<usize> = (1..=16).map(|x| max_product_distinct(x).unwrap()).collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
        assert!(max_product_distinct(31).is_err());
    }
}
