//! The ten acceptance criteria, one line each. Pass criterion numbers as
//! arguments to run a subset. Failures are reported in the output; set
//! `BATS_ACCEPTANCE_STRICT=1` to also turn them into a failing exit status.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bats_cli::commands::endtoend_report;
use bats_cli::config::ExperimentConfig;
use bats_cli::experiments::*;
use bats_cli::formats::CsvMeta;

type Outcome = (bool, String);

fn within(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")
}

fn cross_rate_check() -> Outcome {
    let t = cross_rates().unwrap();
    let sums_ok = t.sums.iter().zip([12.57, 11.91, 10.83]).all(|(s, w)| within(*s, w, 0.02));
    let want = [[12.55, 6.11, 1.77], [11.96, 11.89, 4.77], [10.99, 10.95, 10.81]];
    let mut diag_ok = true;
    let mut cross_ok = true;
    for i in 0..3 {
        diag_ok &= within(t.rates[i][i], want[i][i], 0.05);
        for j in 0..3 {
            cross_ok &= within(t.rates[i][j], want[i][j], 0.1);
        }
    }
    let rows: Vec<String> = t.rates.iter().map(|r| fmt(r)).collect();
    (sums_ok && diag_ok && cross_ok, format!("sums {} | rates {}", fmt(&t.sums), rows.join(" ; ")))
}

fn percentage_check() -> Outcome {
    let p = p3_percentages().unwrap();
    let ok = within(p.value, 0.949, 0.003) && p.per_node.iter().zip([95.0, 95.3, 94.9]).all(|(x, w)| within(*x, w, 0.5));
    (ok, format!("value {:.4}, per node {}", p.value, fmt(&p.per_node)))
}

fn random_rank_check() -> Outcome {
    let etas = [0.005, 0.01, 0.02];
    let st = random_rank_study(16, 1000, &etas, 6).unwrap();
    let tt = &st.theta_tilde[0];
    let frac = tt.iter().filter(|&&x| x > 0.96).count() as f64 / tt.len() as f64;
    let min = tt.iter().copied().fold(f64::INFINITY, f64::min);
    // the plotted curves are eCDFs of θ̃; compare them position by position
    let sorted: Vec<Vec<f64>> = st
        .theta_tilde
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let ordered = (0..tt.len()).all(|i| sorted[0][i] >= sorted[1][i] - 1e-9 && sorted[1][i] >= sorted[2][i] - 1e-9);
    let by_sample = |v: &[Vec<f64>]| (0..tt.len()).filter(|&i| v[0][i] >= v[1][i] - 1e-9 && v[1][i] >= v[2][i] - 1e-9).count();
    let (tilde_each, hat_each) = (by_sample(&st.theta_tilde), by_sample(&st.theta_hat));
    (
        frac >= 0.99 && min > 0.90 && ordered,
        format!(
            "share above 0.96 {frac:.3}, min {min:.4}, θ̃ curves ordered {ordered}; per sample: θ̃ ordered {tilde_each}/{n}, raw θ̂ ordered {hat_each}/{n}",
            n = tt.len()
        ),
    )
}

/// Length-4 line, `ε = 0.2`, `M = 32`, `K = 1600` after the precode.
pub fn overhead_config() -> ExperimentConfig {
    ExperimentConfig {
        m: 32,
        q: 256,
        t: 8,
        k_prime: 1568,
        eta: 0.005,
        max_degree: Some(1600),
        hops: vec![0.2; 4],
        scheme: "line".into(),
        batches: 110,
        trials: 20,
        seed: 4,
        ..ExperimentConfig::default()
    }
}

fn overhead_check() -> Outcome {
    let cfg = overhead_config();
    let meta = CsvMeta { config_hash: cfg.hash().unwrap(), seed: cfg.seed };
    let r = endtoend_report(&cfg, &meta).unwrap();
    let a = &r.aggregate;
    let mean = |s: Option<bats_cli::formats::Stats>| s.map_or(f64::NAN, |s| s.mean);
    let (co, inact, ro) = (mean(a.coding_overhead), mean(a.inactivations), mean(a.receiving_overhead));
    let checks = [
        ("K", r.k == 1600),
        ("coding overhead", co <= 10.0),
        ("inactivations", (70.0..=130.0).contains(&inact)),
        ("receiving overhead", within(ro, 599.5, 0.15 * 599.5)),
        ("payloads", a.payload_mismatches == 0 && a.failures == 0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let co_median = {
        let mut v: Vec<i64> = r.trials.iter().filter_map(|t| t.coding_overhead).collect();
        v.sort();
        v.get(v.len() / 2).copied().unwrap_or(0)
    };
    (
        failed.is_empty(),
        format!(
            "{} trials: mean CO {co:.1} (median {co_median}), mean inactivations {inact:.1}, mean RO {ro:.1}, failures {}, mismatches {}{}",
            a.records,
            a.failures,
            a.payload_mismatches,
            if failed.is_empty() { String::new() } else { format!(" | failing: {}", failed.join(", ")) }
        ),
    )
}

fn bp_check() -> Outcome {
    let h = broadcast_rank_distributions().unwrap().swap_remove(0);
    let k = 10_000;
    let st = bp_study(&h, 256, 0.01, k, 100, 5).unwrap();
    let need = (0.99 * k as f64).ceil() as usize;
    let ok_below = st.below.iter().filter(|r| r.recovered >= need).count();
    let close = st.below.iter().filter(|r| r.sup_distance <= 0.05).count();
    let worst = st.below.iter().map(|r| r.sup_distance).fold(0.0, f64::max);
    let stalled = st.above.iter().filter(|r| r.recovered < need).count();
    (
        ok_below >= 95 && close >= 95 && stalled >= 95,
        format!(
            "θ̂ {:.3}, θc {:.3}: below {ok_below}/100 recover, {close}/100 within 0.05 (worst {worst:.4}); above {stalled}/100 stall",
            st.theta_hat, st.theta_crossing
        ),
    )
}

fn sandwich_check() -> Outcome {
    let v = bound_sandwich(16, 100, 0.01, 66).unwrap();
    let bad = v.iter().filter(|(lo, th, hi)| !(lo - 1e-6 <= *th && *th <= hi + 1e-6)).count();
    let gap = v.iter().map(|(_, th, hi)| hi - th).fold(0.0, f64::max);
    (bad == 0, format!("{} distributions, {bad} outside, largest gap to upper {gap:.4}", v.len()))
}

fn beta_check() -> Outcome {
    let checks = incomplete_beta_suite();
    let ok = checks.iter().all(|c| c.ok);
    let d: Vec<String> = checks.iter().map(|c| format!("{} {} ({})", c.name, if c.ok { "ok" } else { "FAILED" }, c.detail)).collect();
    (ok, d.join("; "))
}

fn order_check() -> Outcome {
    let st = order_study(200, 8).unwrap();
    (
        st.order_mismatches == 0 && st.payload_errors == 0 && st.beyond_elimination == 0,
        format!(
            "{} instances: {} order mismatches, {} payload errors, {} beyond elimination",
            st.instances, st.order_mismatches, st.payload_errors, st.beyond_elimination
        ),
    )
}

fn homogenization_check() -> Outcome {
    let st = homogenization_study(20, 9).unwrap();
    (
        st.example_links == (8, 9) && st.example_eps_ok && st.cut_mismatches == 0,
        format!("example links {:?}, eps ok {}, {} DAGs with {} cut mismatches", st.example_links, st.example_eps_ok, st.dags, st.cut_mismatches),
    )
}

fn universal_check() -> Outcome {
    let u = universal_rates(16, 10, 20, 10).unwrap();
    (
        u.percentage_all >= 0.5274 && u.multicast_sampled >= 8.10,
        format!(
            "relaxed bounds: percentage {:.4} (≥ 0.5274), sampled mean-10 multicast {:.3} (≥ 8.10); all extreme points {:.3}",
            u.percentage_all, u.multicast_sampled, u.multicast_extreme
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 10] = [
        (1, "broadcast rate table", Duration::from_secs(120), cross_rate_check),
        (2, "fair percentage", Duration::from_secs(120), percentage_check),
        (3, "random rank distributions", Duration::from_secs(1800), random_rank_check),
        (4, "overhead table", Duration::from_secs(1200), overhead_check),
        (5, "BP follows density evolution", Duration::from_secs(1800), bp_check),
        (6, "rate bounds", Duration::from_secs(600), sandwich_check),
        (7, "incomplete beta identities", Duration::from_secs(60), beta_check),
        (8, "order invariance", Duration::from_secs(300), order_check),
        (9, "homogenization", Duration::from_secs(60), homogenization_check),
        (10, "universal rate bounds", Duration::from_secs(1800), universal_check),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (n, name, limit, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        let el = t.elapsed();
        let ok = ok && el <= limit;
        ran += 1;
        if !ok {
            failed.push(n.to_string());
        }
        println!("criterion {n:>2} {:<30} {}  [{:.1}s] {detail}", name, if ok { "PASS" } else { "FAIL" }, el.as_secs_f64());
    }
    if failed.is_empty() {
        println!("acceptance: {ran}/{ran} criteria passed");
        return ExitCode::SUCCESS;
    }
    println!("acceptance: {}/{ran} criteria passed; failing: {}", ran - failed.len(), failed.join(", "));
    let strict = std::env::var("BATS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
