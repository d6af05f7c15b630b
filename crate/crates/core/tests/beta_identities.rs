use bats_core::beta::{beta_fn, choose, inc_beta};
use proptest::prelude::*;

fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn integral_over_unit_interval() {
    assert!((simpson(|x| inc_beta(2, 3, x), 2000) - 0.6).abs() < 1e-10);
    for (a, b) in [(1, 1), (4, 2), (7, 9), (20, 3)] {
        let want = b as f64 / (a + b) as f64;
        assert!((simpson(|x| inc_beta(a, b, x), 4000) - want).abs() < 1e-8, "a={a} b={b}");
    }
}

#[test]
fn log_series_identity() {
    // Σ_{d>r} I_{d−r,r}(x)/(d−1) = −ln(1−x); the tail beyond d = 500 is
    // bounded through the ratio bound I_{a+1,b}/I_{a,b} ≤ 1 − (1−x)/b
    for x in [0.1, 0.5, 0.9] {
        for r in [1u64, 2, 5] {
            let s: f64 = (r + 1..=500).map(|d| inc_beta(d - r, r, x) / (d - 1) as f64).sum();
            let last = inc_beta(500 - r, r, x) / 499.0;
            let tail = last * r as f64 / (1.0 - x);
            assert!(tail < 1e-7, "tail bound {tail}");
            assert!((s + (1.0 - x).ln()).abs() < 1e-6, "x={x} r={r}: {s}");
        }
    }
}

#[test]
fn ratio_bound_is_tight_for_b_one() {
    for eta in [0.01, 0.2, 0.5] {
        for a in [1u64, 5, 40] {
            let x = 1.0 - eta;
            let ratio = inc_beta(a + 1, 1, x) / inc_beta(a, 1, x);
            assert!((ratio - (1.0 - eta)).abs() < 1e-14);
        }
    }
}

#[test]
fn alternating_binomial_sum() {
    for m in 0..=8u64 {
        for n in 0..=m {
            let s: f64 = (0..=n)
                .map(|j| {
                    let sign = if (n - j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * choose(j + m, n) * choose(n, j)
                })
                .sum();
            assert_eq!(s, 1.0, "n={n} m={m}");
        }
    }
}

proptest! {
    #[test]
    fn step_in_first_parameter(a in 1u64..60, b in 1u64..20, x in 0.0f64..1.0) {
        let lhs = inc_beta(a + 1, b, x);
        let rhs = inc_beta(a, b, x) - x.powi(a as i32) * (1.0 - x).powi(b as i32) / (a as f64 * beta_fn(a, b));
        prop_assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn ratio_increases_in_x(a in 1u64..60, b in 1u64..20) {
        let mut prev = 0.0;
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let ratio = inc_beta(a + 1, b, x) / inc_beta(a, b, x);
            if inc_beta(a, b, x) < 1e-250 {
                continue;
            }
            prop_assert!(ratio >= prev - 1e-12, "a={} b={} x={}", a, b, x);
            prev = ratio;
        }
    }

    #[test]
    fn ratio_bound(b in 1u64..12, eta in 0.01f64..0.9, extra in 0u64..50) {
        // smallest a with (b−1)/(a+1) ≤ η/(1−η), then some
        let a_min = (((b - 1) as f64 * (1.0 - eta) / eta) - 1.0).ceil().max(1.0) as u64;
        let a = a_min + extra;
        for i in 1..=50 {
            let x = (1.0 - eta) * i as f64 / 50.0;
            let den = inc_beta(a, b, x);
            if den < 1e-250 {
                continue;
            }
            prop_assert!(inc_beta(a + 1, b, x) / den <= 1.0 - eta / b as f64 + 1e-12);
        }
    }
}
