//! Two-sided Mann-Whitney U on two accuracy samples given as
//! comma-separated lists.
//!
//! `cargo run --example mann_whitney -- 0.91,0.93,0.92 0.88,0.90,0.89`

use pdac::training::{mann_whitney_u_with, Alternative};

fn parse(s: &str) -> Vec<f64> {
    s.split(',').map(|v| v.trim().parse().expect("number")).collect()
}

fn main() {
    let mut args = std::env::args().skip(1);
    let a = args
        .next()
        .map_or_else(|| vec![0.84, 0.86, 0.83, 0.88, 0.85, 0.87], |s| parse(&s));
    let b = args
        .next()
        .map_or_else(|| vec![0.61, 0.58, 0.64, 0.60, 0.59, 0.63], |s| parse(&s));
    for alt in [Alternative::TwoSided, Alternative::Greater, Alternative::Less] {
        let r = mann_whitney_u_with(&a, &b, alt).expect("non-empty samples");
        println!(
            "{alt:?}: U_a {} U_b {} p {:.4e} ({:?})",
            r.u_a, r.u_b, r.p_value, r.method
        );
    }
}
