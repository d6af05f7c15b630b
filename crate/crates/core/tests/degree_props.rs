use bats_core::degree::*;
use bats_core::evolution::{density_evolution, uniform_grid};
use bats_core::rank::*;
use bats_core::RandomStream;
use proptest::prelude::*;

fn rank_dist(max_m: usize) -> impl Strategy<Value = RankDistribution> {
    prop::collection::vec(0.0f64..1.0, 2..=max_m + 1).prop_filter_map("all zero", |w| {
        if w.iter().sum::<f64>() > 1e-6 {
            RankDistribution::from_weights(w).ok()
        } else {
            None
        }
    })
}

fn degree_dist() -> impl Strategy<Value = DegreeDistribution> {
    prop::collection::vec(prop_oneof![2 => Just(0.0), 1 => 0.0f64..1.0], 1..60).prop_filter_map("all zero", |w| {
        if w.iter().sum::<f64>() > 1e-6 {
            DegreeDistribution::from_weights(w).ok()
        } else {
            None
        }
    })
}

fn broadcast_set() -> Vec<RankDistribution> {
    [0.1, 0.2, 0.3].iter().map(|&e| line_rank_dist(16, &[0.2, e], 256).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn omega_is_nondecreasing(h in rank_dist(12), psi in degree_dist(), q in prop_oneof![Just(2u32), Just(256)]) {
        let eff = effective_dist(&h, q);
        let mut prev = omega(0.0, &eff, &psi);
        let sum0: f64 = (1..=h.m()).map(|r| r as f64 * psi.get(r) * eff.hbar_prime(r)).sum();
        prop_assert!((prev - sum0).abs() < 1e-12);
        for i in 1..=200 {
            let v = omega(i as f64 / 200.0, &eff, &psi);
            prop_assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn two_omega_forms_agree(h in rank_dist(16), psi in degree_dist(), x in 0.0f64..1.0) {
        let eff = effective_dist(&h, 256);
        prop_assert!((omega(x, &eff, &psi) - omega_sr(x, &eff, &psi)).abs() < 1e-10);
    }

    #[test]
    fn single_rank_omega_is_a_power_series(h1 in 0.0f64..1.0, psi in degree_dist(), x in 0.0f64..1.0) {
        let h = RankDistribution::new(vec![1.0 - h1, h1]).unwrap();
        let eff = effective_dist(&h, 16);
        let series: f64 = (1..=psi.max_degree()).map(|d| d as f64 * psi.get(d) * x.powi(d as i32 - 1)).sum();
        prop_assert!((omega(x, &eff, &psi) - eff.hbar(1) * series).abs() < 1e-12);
    }

    #[test]
    fn rho0_starts_at_omega_zero(h in rank_dist(8), psi in degree_dist(), theta in 0.1f64..10.0) {
        let eff = effective_dist(&h, 4);
        let c = density_evolution(&psi, &h, 4, theta, &uniform_grid(20)).unwrap();
        prop_assert!((c.rho0[0] - omega(0.0, &eff, &psi)).abs() < 1e-14);
        prop_assert!(c.rho0.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn max_degree_examples() {
    assert_eq!(max_degree(16, 0.5).unwrap(), 31);
    assert_eq!(max_degree(16, 0.02).unwrap(), 799);
    assert_eq!(max_degree(1, 0.01).unwrap(), 99);
    assert!(max_degree(4, 0.0).is_err());
    assert!(max_degree(4, 1.0).is_err());
}

#[test]
fn baseline_distribution() {
    let p = baseline_psi(1, 3).unwrap();
    assert_eq!(p.as_slice(), &[0.0, 0.5, 0.5]);
    for (r, d) in [(1, 2), (3, 10), (16, 1599), (7, 8)] {
        let p = baseline_psi(r, d).unwrap();
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(baseline_psi(4, 4).is_err());
    // with all rank at κ the baseline reaches κ·ħ_κ
    for kappa in [1usize, 4, 9, 16] {
        let h = RankDistribution::point_mass(16, kappa);
        let eff = effective_dist(&h, 256);
        let psi = baseline_psi(kappa, max_degree(16, 0.01).unwrap()).unwrap();
        let theta = achievable_theta(&psi, &h, 256, 0.01, 100);
        assert!(theta >= kappa as f64 * eff.hbar(kappa) - 1e-6, "κ={kappa}: {theta}");
    }
}

#[test]
fn p1_point_mass_bounds() {
    let h = RankDistribution::point_mass(16, 16);
    let o = optimize_p1(&h, 256, 0.01, LpSettings::default()).unwrap();
    let upper = effective_dist(&h, 256).weighted_sum() / 0.99;
    assert!(o.value >= 15.94 && o.value <= upper, "{}", o.value);
    assert!(o.value <= o.lp_value + 1e-12);
    // the returned value is achievable on the fine grid
    assert!(achievable_theta(&o.psi, &h, 256, 0.01, 1000) >= o.value - 1e-9);
}

#[test]
fn zero_rank_gives_zero_rate() {
    let h = RankDistribution::point_mass(8, 0);
    let o = optimize_p1(&h, 256, 0.05, LpSettings::default()).unwrap();
    assert_eq!(o.value, 0.0);
    assert!(o.empty_support);
    assert_eq!(theta_bounds(&h, 256, 0.05), (0.0, 0.0));
}

#[test]
fn bounds_sandwich_optimum() {
    let mut s = RandomStream::new(314, 0);
    for _ in 0..100 {
        let h = sample_rank_distribution(16, &mut s);
        let (lo, hi) = theta_bounds(&h, 256, 0.01);
        let o = optimize_p1(&h, 256, 0.01, LpSettings::default()).unwrap();
        assert!(lo <= o.value + 1e-6 && o.value <= hi + 1e-9, "{lo} ≤ {} ≤ {hi}", o.value);
        assert!(omega(0.0, &effective_dist(&h, 256), &o.psi) > 0.0);
    }
}

#[test]
fn bounds_meet_for_large_fields() {
    let h = RankDistribution::point_mass(8, 5);
    let (lo, hi) = theta_bounds(&h, 1 << 30, 1e-9);
    assert!((lo - 5.0).abs() < 1e-6 && (hi - 5.0).abs() < 1e-6);
}

#[test]
fn larger_degree_cap_does_not_help() {
    let h = line_rank_dist(4, &[0.2, 0.2], 16).unwrap();
    let eta = 0.05;
    let d = max_degree(4, eta).unwrap();
    let base = optimize_p1(&h, 16, eta, LpSettings::default()).unwrap();
    let wide = optimize_p1(&h, 16, eta, LpSettings { max_degree: Some(d + 60), ..LpSettings::default() }).unwrap();
    assert!((base.value - wide.value).abs() < 1e-4, "{} vs {}", base.value, wide.value);
}

#[test]
fn broadcast_rates_match() {
    let hs = broadcast_set();
    let sums: Vec<f64> = hs.iter().map(|h| effective_dist(h, 256).weighted_sum()).collect();
    for (s, want) in sums.iter().zip([12.57, 11.91, 10.83]) {
        assert!((s - want).abs() <= 0.02, "{s}");
    }
    let want = [[12.55, 6.11, 1.77], [11.96, 11.89, 4.77], [10.99, 10.95, 10.81]];
    for (i, h) in hs.iter().enumerate() {
        let o = optimize_p1(h, 256, 0.01, LpSettings::default()).unwrap();
        assert!((0.99 * o.value - want[i][i]).abs() <= 0.05, "diag {i}: {}", 0.99 * o.value);
        for (j, h2) in hs.iter().enumerate() {
            let v = 0.99 * achievable_theta(&o.psi, h2, 256, 0.01, 100);
            assert!((v - want[i][j]).abs() <= 0.1, "Ψ{} on h{}: {v}", i + 1, j + 1);
        }
    }
}

#[test]
fn multicast_programs() {
    let hs = broadcast_set();
    let p1_3 = optimize_p1(&hs[2], 256, 0.01, LpSettings::default()).unwrap();
    let p2 = optimize_p2(&hs, 256, 0.01, LpSettings::default()).unwrap();
    assert!((p2.value - p1_3.value).abs() < 0.05);
    let single = optimize_p2(&hs[..1], 256, 0.01, LpSettings::default()).unwrap();
    let p1 = optimize_p1(&hs[0], 256, 0.01, LpSettings::default()).unwrap();
    assert!((single.value - p1.value).abs() < 1e-6);
    let pair = optimize_p2(&hs[..2], 256, 0.01, LpSettings::default()).unwrap();
    assert!(pair.value <= single.value + 1e-9 && p2.value <= pair.value + 1e-9);

    let p3 = optimize_p3(&hs, 256, 0.01, LpSettings::default()).unwrap();
    assert!((0.99 * p3.value - 0.949).abs() <= 0.003, "{}", 0.99 * p3.value);
    for (h, want) in hs.iter().zip([95.0, 95.3, 94.9]) {
        let pct = 100.0 * 0.99 * achievable_theta(&p3.psi, h, 256, 0.01, 100) / effective_dist(h, 256).weighted_sum();
        assert!((pct - want).abs() <= 0.5, "{pct} vs {want}");
    }
}

#[test]
fn p3_point_mass_exceeds_lower_bound() {
    let h = RankDistribution::point_mass(8, 6);
    let eff = effective_dist(&h, 256);
    let o = optimize_p3(core::slice::from_ref(&h), 256, 0.02, LpSettings::default()).unwrap();
    let (lo, _) = theta_bounds(&h, 256, 0.02);
    assert!(o.value >= lo / eff.weighted_sum() - 1e-6);
}

#[test]
fn penalized_program() {
    let h = line_rank_dist(8, &[0.2, 0.1], 256).unwrap();
    let eta = 0.02;
    let p1 = optimize_p1(&h, 256, eta, LpSettings::default()).unwrap();
    let same = optimize_p4(&h, 256, eta, 1000.0, 0.0, 2.0, LpSettings::default()).unwrap();
    assert!((same.value - p1.value).abs() < 1e-9);
    let huge = optimize_p4(&h, 256, eta, 1e15, 5.0, 2.0, LpSettings::default()).unwrap();
    assert!((huge.value - p1.value).abs() < 1e-6);
    let tight = optimize_p4(&h, 256, eta, 200.0, 5.0, 2.0, LpSettings::default()).unwrap();
    assert!(tight.value <= p1.value + 1e-9);
    assert!(optimize_p4(&h, 256, eta, 0.0, 1.0, 1.0, LpSettings::default()).is_err());
}

#[test]
fn sampler_produces_valid_distributions() {
    let mut s = RandomStream::new(1, 2);
    let mut mean = [0.0; 5];
    for _ in 0..20_000 {
        let h = sample_rank_distribution(4, &mut s);
        assert_eq!(h.get(0), 0.0);
        for (m, v) in mean.iter_mut().zip(h.as_slice()) {
            *m += v / 20_000.0;
        }
    }
    // flat Dirichlet: each nonzero rank has mean 1/4
    for m in &mean[1..] {
        assert!((m - 0.25).abs() < 0.01);
    }
}
