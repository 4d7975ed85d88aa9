//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Tolerances are frozen here; a failing criterion
//! fails the suite rather than being widened.

use fraclab_core::rayon::prelude::*;

use fraclab_core::digit_sets::DigitSetSpec;
use fraclab_core::dyadic::{DyadicInterval, IntervalFamily};
use fraclab_core::experiments::{run, ExperimentConfig};
use fraclab_core::fbm::{covariance, sample_path};
use fraclab_core::rng::StreamRng;

fn verdict(id: u32, label: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:2} [{}] {label}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {label}: {detail}");
}

#[test]
fn criterion_01_fbm_covariance() {
    let started = std::time::Instant::now();
    let trials = 20_000u64;
    let order = 8u32;
    let grid: Vec<usize> = (1..=8).map(|i| i * (1 << order) / 8).collect();
    let mut worst = 0.0f64;
    for &alpha in &[0.3, 0.5, 0.7] {
        // per-pair running sums of B(s)B(t) and its square
        let (sum, sumsq) = (0..trials)
            .into_par_iter()
            .map(|k| {
                let path = sample_path(alpha, order, 0x10 ^ k).unwrap();
                let mut s = [[0.0f64; 8]; 8];
                let mut s2 = [[0.0f64; 8]; 8];
                for (i, &gi) in grid.iter().enumerate() {
                    for (j, &gj) in grid.iter().enumerate() {
                        let x = path.value_at(gi) * path.value_at(gj);
                        s[i][j] = x;
                        s2[i][j] = x * x;
                    }
                }
                (s, s2)
            })
            .reduce(
                || ([[0.0; 8]; 8], [[0.0; 8]; 8]),
                |(mut a, mut a2), (b, b2)| {
                    for i in 0..8 {
                        for j in 0..8 {
                            a[i][j] += b[i][j];
                            a2[i][j] += b2[i][j];
                        }
                    }
                    (a, a2)
                },
            );
        for i in 0..8 {
            for j in 0..8 {
                let mean = sum[i][j] / trials as f64;
                let var = (sumsq[i][j] / trials as f64 - mean * mean).max(0.0);
                let se = (var / trials as f64).sqrt().max(1e-12);
                let t = grid[j] as f64 / (1u64 << order) as f64;
                let s = grid[i] as f64 / (1u64 << order) as f64;
                let expect = covariance(alpha, s, t).unwrap();
                worst = worst.max((mean - expect).abs() / se);
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        1,
        "fBm empirical covariance within 5 SE on the 8-point grid",
        worst <= 5.0 && elapsed < 60.0,
        &format!("worst deviation {worst:.2} SE, {elapsed:.1} s"),
    );
}

fn mean_slope_criterion(id: u32, name: &str, targets: &[(f64, f64)], tol: f64) {
    let mut all = true;
    let mut details = Vec::new();
    for &(alpha, target) in targets {
        let mut cfg = ExperimentConfig::defaults_for(name);
        cfg.alpha = alpha;
        cfg.master_seed = 0x5eed ^ (alpha * 100.0) as u64;
        let outcome = run(name, &cfg).unwrap();
        let obs = outcome.assertions[0].observed;
        let ok = (obs - target).abs() <= tol;
        all &= ok;
        details.push(format!("alpha {alpha}: slope {obs:.3} vs {target:.3}"));
    }
    verdict(
        id,
        &format!("{name} mean slope within {tol}"),
        all,
        &details.join("; "),
    );
}

#[test]
fn criterion_02_zero_set() {
    mean_slope_criterion(
        2,
        "zero_set",
        &[(0.3, 0.7), (0.5, 0.5), (0.7, 0.3)],
        0.08,
    );
}

#[test]
fn criterion_03_record_set() {
    mean_slope_criterion(3, "record_set", &[(0.3, 0.3), (0.5, 0.5), (0.7, 0.7)], 0.1);
}

#[test]
fn criterion_04_kahane_image() {
    let cfg = ExperimentConfig::defaults_for("kahane_image");
    let outcome = run("kahane_image", &cfg).unwrap();
    let obs = outcome.assertions[0].observed;
    verdict(
        4,
        "image slope of the half-density digit set at alpha 0.75",
        (obs - 2.0 / 3.0).abs() <= 0.1,
        &format!("mean image slope {obs:.3} vs 0.667 +/- 0.1"),
    );
}

#[test]
fn criterion_05_uniform_doubling() {
    let cfg = ExperimentConfig::defaults_for("doubling");
    let outcome = run("doubling", &cfg).unwrap();
    let frac = outcome.assertions[0].observed;
    verdict(
        5,
        "image slope tracks (1/alpha) x subset slope across 30 subsets",
        frac >= 0.9,
        &format!("fraction within 0.1: {frac:.3}"),
    );
}

#[test]
fn criterion_06_witness_gap() {
    let cfg = ExperimentConfig::defaults_for("witness");
    let outcome = run("witness", &cfg).unwrap();
    let frac = outcome.assertions[0].observed;
    verdict(
        6,
        "multi-level witness with image slope below (1/alpha) witness slope - 0.2",
        frac > 0.5,
        &format!("fraction of seeds with the gap: {frac:.3}"),
    );
}

#[test]
fn criterion_07_mixed_level_sets() {
    let cfg = ExperimentConfig::defaults_for("mixed_level_sets");
    let outcome = run("mixed_level_sets", &cfg).unwrap();
    let frac = outcome.assertions[0].observed;
    verdict(
        7,
        "level sets restricted to a low-density digit set stay flat",
        frac >= 0.9,
        &format!("fraction with slope <= 0.1: {frac:.3}"),
    );
}

#[test]
fn criterion_08_balance_postconditions() {
    let started = std::time::Instant::now();
    let beta = 0.6f64;
    let failures: usize = (0..1000u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = StreamRng::new(0xBA1A ^ trial, 0);
            let count = 1 + (rng.uniform() * 999.0) as usize;
            let mut fam = IntervalFamily::new();
            for _ in 0..count {
                let n = (rng.uniform() * 13.0) as u32; // orders 0..=12
                let p = (rng.uniform() * (1u64 << n) as f64) as u64 % (1u64 << n);
                fam.insert(DyadicInterval::new(n, p).unwrap());
            }
            let bal = fam.balance(beta);
            // (a) no window-count violation survives (brute force)
            let balanced_ok = brute_force_balanced(&bal, beta);
            // (b) the exponent-weighted content never grows
            let content_ok = bal.content(beta) <= fam.content(beta) + 1e-9;
            // (c) every original member stays covered
            let cover_ok = fam.iter().all(|iv| {
                (0..=iv.order()).any(|m| bal.contains(&iv.ancestor(m)))
            });
            (!(balanced_ok && content_ok && cover_ok)) as usize
        })
        .sum();
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        8,
        "rebalancing postconditions on 1000 random families",
        failures == 0 && elapsed < 30.0,
        &format!("{failures} failures, {elapsed:.1} s"),
    );
}

fn brute_force_balanced(fam: &IntervalFamily, beta: f64) -> bool {
    let max_n = match fam.max_order() {
        Some(n) => n,
        None => return true,
    };
    for m in 0..max_n {
        for n in (m + 1)..=max_n {
            let bound = 2f64.powf(beta * (n - m) as f64);
            for p in 0..(1u64 << m) {
                let i = DyadicInterval::new(m, p).unwrap();
                if fam.count_in(&i, n).unwrap() as f64 > bound + 1e-9 {
                    return false;
                }
            }
        }
    }
    true
}

#[test]
fn criterion_09_exact_digit_dimensions() {
    let mut pass = true;
    let mut details = Vec::new();
    for pattern in ["10", "110", "1", "0", "1000", "101101"] {
        let spec = DigitSetSpec::periodic(pattern).unwrap();
        let report = spec.exact_dims();
        // truncation oracle: long-window densities at n = 10^4
        let n = 10_000u32;
        let d_full = spec.density(0, n).unwrap();
        let d_full = *d_full.numer() as f64 / *d_full.denom() as f64;
        let ok = (report.hausdorff.value - d_full).abs() <= 1e-3
            && (report.packing.value - d_full).abs() <= 1e-3
            && report.hausdorff.value <= report.packing.value
            && report.packing.value <= report.modified_assouad.value
            && report.modified_assouad.value <= report.assouad.value;
        pass &= ok;
        details.push(format!("{pattern}: {:.4}", report.hausdorff.value));
    }
    // the chain also holds on block-set reports
    for spec in [
        DigitSetSpec::geometric_blocks(1, (2, 1), (2, 1), false).unwrap(),
        DigitSetSpec::geometric_blocks(2, (2, 1), (1, 1), true).unwrap(),
    ] {
        let r = spec.exact_dims();
        pass &= r.hausdorff.value <= r.packing.value
            && r.packing.value <= r.modified_assouad.value
            && r.modified_assouad.value <= r.assouad.value;
    }
    verdict(
        9,
        "exact periodic dimensions match the truncation oracle at n = 10^4",
        pass,
        &details.join("; "),
    );
}

#[test]
fn criterion_10_percolation() {
    let cfg = ExperimentConfig::defaults_for("percolation_dim");
    let outcome = run("percolation_dim", &cfg).unwrap();
    let slope = outcome.assertions[0].observed;
    let window_frac = outcome.assertions[1].observed;
    let tail_ok = outcome.assertions[2].pass;
    verdict(
        10,
        "percolation box slope, window event, and survivor tail",
        outcome.pass,
        &format!(
            "mean slope {slope:.3} (target 0.5 +/- 0.08), window pass rate {window_frac:.3} (>= 0.95), tail decreasing {tail_ok}"
        ),
    );
}

#[test]
fn criterion_11_heart_events() {
    let cfg = ExperimentConfig::defaults_for("heart_events");
    let outcome = run("heart_events", &cfg).unwrap();
    let frac = outcome.assertions[0].observed;
    verdict(
        11,
        "range-collision event on balanced digit covers",
        frac >= 0.95,
        &format!("pass rate {frac:.3}"),
    );
}

#[test]
fn criterion_12_holder_diagnostic() {
    let hits: usize = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let path = sample_path(0.5, 14, 0x401de2 ^ k).unwrap();
            (path.holder_stat() <= 1.25) as usize
        })
        .sum();
    verdict(
        12,
        "Holder modulus statistic at alpha 0.5, order 14",
        hits >= 95,
        &format!("{hits}/100 runs with stat <= 1.25"),
    );
}
