//! Oracles shared by the integration tests.
#![allow(dead_code)]

/// `U_a` by direct pair counting: pairs with `a > b` plus half the ties.
pub fn pair_count_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Exact p-values by enumerating every way of choosing which `n_a` of the
/// pooled values form the first sample. Returns `(two_sided, greater,
/// less)`; two-sided counts assignments at least as far from `n_a·n_b/2`
/// as the observed `U_a`.
pub fn brute_force_p(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, na) = (pooled.len(), a.len());
    let centre = (a.len() * b.len()) as f64 / 2.0;
    let observed = pair_count_u(a, b);
    let (mut total, mut two, mut greater, mut less) = (0u64, 0u64, 0u64, 0u64);
    let mut chosen = Vec::with_capacity(na);
    fn walk(start: usize, n: usize, na: usize, chosen: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if chosen.len() == na {
            visit(chosen);
            return;
        }
        for i in start..n {
            if n - i < na - chosen.len() {
                break;
            }
            chosen.push(i);
            walk(i + 1, n, na, chosen, visit);
            chosen.pop();
        }
    }
    walk(0, n, na, &mut chosen, &mut |idx: &[usize]| {
        let mut in_a = vec![false; n];
        idx.iter().for_each(|&i| in_a[i] = true);
        let sa: Vec<f64> = (0..n).filter(|&i| in_a[i]).map(|i| pooled[i]).collect();
        let sb: Vec<f64> = (0..n).filter(|&i| !in_a[i]).map(|i| pooled[i]).collect();
        let u = pair_count_u(&sa, &sb);
        total += 1;
        if (u - centre).abs() >= (observed - centre).abs() - 1e-9 {
            two += 1;
        }
        if u >= observed - 1e-9 {
            greater += 1;
        }
        if u <= observed + 1e-9 {
            less += 1;
        }
    });
    let t = total as f64;
    (two as f64 / t, greater as f64 / t, less as f64 / t)
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
