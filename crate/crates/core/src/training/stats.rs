//! Mann-Whitney U test with midrank ties.
//!
//! When the smaller sample has at most [`EXACT_MAX_SMALLER`] items the
//! p-value comes from the exact permutation distribution of the (tied)
//! rank sum; otherwise from the normal approximation with tie-corrected
//! variance and continuity correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::TrainError;

/// Largest smaller-sample size that still uses exact enumeration.
pub const EXACT_MAX_SMALLER: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Pairs with `a > b`, ties counting one half.
    pub u_a: f64,
    pub u_b: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    pub alternative: Alternative,
}

/// 1-based ranks with ties sharing their average rank, in input order.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Two-sided test.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, TrainError> {
    mann_whitney_u_with(a, b, Alternative::TwoSided)
}

pub fn mann_whitney_u_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
) -> Result<MannWhitney, TrainError> {
    if a.is_empty() || b.is_empty() {
        return Err(TrainError::Invalid(
            "Mann-Whitney U needs two non-empty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(TrainError::Invalid(
            "Mann-Whitney U samples must be finite".into(),
        ));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    // Doubled ranks are integers even with ties.
    let doubled: Vec<i64> = ranks.iter().map(|r| (2.0 * r).round() as i64).collect();
    let ra2: i64 = doubled[..na].iter().sum();
    let ua2 = ra2 - (na * (na + 1)) as i64;
    let u_a = ua2 as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    let (p_value, method) = if na.min(nb) <= EXACT_MAX_SMALLER {
        (exact_p(&doubled, na, ua2, alternative), PValueMethod::Exact)
    } else {
        (normal_p(&ranks, na, nb, u_a, alternative), PValueMethod::Normal)
    };
    Ok(MannWhitney {
        u_a,
        u_b,
        p_value,
        method,
        alternative,
    })
}

/// Distribution of the doubled U of the first `k` positions' group under
/// random assignment: `(doubled U, probability)` pairs.
fn exact_distribution(doubled: &[i64], k: usize) -> Vec<(i64, f64)> {
    let total: i64 = doubled.iter().sum();
    let width = total as usize + 1;
    // ways[j][s]: subsets of size j with doubled rank sum s.
    let mut ways = vec![vec![0u128; width]; k + 1];
    ways[0][0] = 1;
    for &r in doubled {
        let r = r as usize;
        for j in (1..=k).rev() {
            let (lo, hi) = ways.split_at_mut(j);
            let (prev, cur) = (&lo[j - 1], &mut hi[0]);
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let all: u128 = ways[k].iter().sum();
    let offset = (k * (k + 1)) as i64;
    ways[k]
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| (s as i64 - offset, c as f64 / all as f64))
        .collect()
}

fn exact_p(doubled: &[i64], na: usize, ua2: i64, alternative: Alternative) -> f64 {
    let nb = doubled.len() - na;
    let nn = (na * nb) as i64;
    // Enumerate over the smaller group; map its U back to U_a.
    let dist: Vec<(i64, f64)> = if na <= nb {
        exact_distribution(doubled, na)
    } else {
        let mut rev = doubled[na..].to_vec();
        rev.extend_from_slice(&doubled[..na]);
        exact_distribution(&rev, nb)
            .into_iter()
            .map(|(ub2, p)| (2 * nn - ub2, p))
            .collect()
    };
    let observed = (ua2 - nn).abs();
    let p: f64 = dist
        .iter()
        .filter(|&&(u2, _)| match alternative {
            Alternative::TwoSided => (u2 - nn).abs() >= observed,
            Alternative::Greater => u2 >= ua2,
            Alternative::Less => u2 <= ua2,
        })
        .map(|&(_, p)| p)
        .sum();
    p.min(1.0)
}

fn normal_p(ranks: &[f64], na: usize, nb: usize, u_a: f64, alternative: Alternative) -> f64 {
    let n = (na + nb) as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let nn = (na * nb) as f64;
    let mean = nn / 2.0;
    let var = nn / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let p = match alternative {
        Alternative::TwoSided => {
            let z = ((u_a - mean).abs() - 0.5).max(0.0) / sd;
            2.0 * (1.0 - std_normal.cdf(z))
        }
        Alternative::Greater => 1.0 - std_normal.cdf((u_a - mean - 0.5) / sd),
        Alternative::Less => std_normal.cdf((u_a - mean + 0.5) / sd),
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_samples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u_a, 0.0);
        assert_eq!(r.u_b, 9.0);
        assert_eq!(r.method, PValueMethod::Exact);
        // Two of the twenty equally likely splits are this extreme.
        assert!((r.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_one() {
        let a = [0.5, 0.6, 0.7];
        assert_eq!(mann_whitney_u(&a, &a).unwrap().p_value, 1.0);
        let big: Vec<f64> = (0..12).map(f64::from).collect();
        assert_eq!(mann_whitney_u(&big, &big).unwrap().p_value, 1.0);
        let flat = [0.3; 10];
        assert_eq!(mann_whitney_u(&flat, &flat).unwrap().p_value, 1.0);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn one_sided_tails() {
        let a = [4.0, 5.0, 6.0];
        let b = [1.0, 2.0, 3.0];
        let g = mann_whitney_u_with(&a, &b, Alternative::Greater).unwrap();
        let l = mann_whitney_u_with(&a, &b, Alternative::Less).unwrap();
        assert!((g.p_value - 0.05).abs() < 1e-12);
        assert!((l.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }
}
