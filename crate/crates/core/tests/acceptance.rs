//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints its `criterion N: PASS|FAIL` line. Non-flag arguments filter by name.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use laser::bandwidth::{check_bse_with, h_grid};
use laser::discrepancy::{
    effective_noise, q_form_projection, q_form_r0_closed, q_form_raw, split_projection_rank, t_stat, Variant,
};
use laser::experiments::{
    bandwidth_scaling_study_with, baseline_fixed_bandwidth, config_signal, rmse, run_monte_carlo, runtime_scaling,
    ExperimentConfig, ScalingOptions,
};
use laser::oracle::oracle_fit;
use laser::polyproj::IntInterval;
use laser::signals::{add_noise, generate, scale_to_snr, standard_noise, NoiseSpec, SignalKind, SignalSpec};
use laser::tuning::default_lambda;
use laser::{fit, Semantics};

fn verdict(n: usize, ok: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn iv(lo: usize, hi: usize) -> IntInterval {
    IntInterval { lo, hi }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Piecewise signal with a random jump and a kink, and its noisy version.
fn random_pair(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let jump = rng.random_range(1..=n);
    let height: f64 = rng.random_range(-3.0..3.0);
    let slope: f64 = rng.random_range(-2.0..2.0);
    let theta: Vec<f64> = (1..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            let step = if i >= jump { height } else { 0.0 };
            step + slope * (x - 0.5).abs()
        })
        .collect();
    let y = theta.iter().zip(gaussian(rng, n, sigma)).map(|(t, z)| t + z).collect();
    (theta, y)
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    random_pair(rng, n, sigma).1
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn criterion_01_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cases: Vec<(Vec<f64>, usize, f64)> = (0..200)
        .map(|_| {
            let n = rng.random_range(1..=64);
            let r = rng.random_range(0..=2);
            let sigma = rng.random_range(0.05..1.0);
            let y = random_instance(&mut rng, n, sigma);
            let lambda = rng.random_range(0.0..3.0);
            (y, r, lambda)
        })
        .collect();
    let failures: Vec<String> = cases
        .par_iter()
        .enumerate()
        .filter_map(|(k, (y, r, lambda))| {
            let fast = fit(y, *r, *lambda, Variant::Full, Semantics::MaxGood).unwrap();
            let slow = oracle_fit(y, *r, *lambda).unwrap();
            let sup = fast.theta_hat.iter().zip(&slow.theta_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (fast.h_hat != slow.h_hat || sup > 1e-8)
                .then(|| format!("case {k}: n={} r={r} lambda={lambda} sup={sup:e}", y.len()))
        })
        .collect();
    let elapsed = start.elapsed();
    verdict(
        1,
        failures.is_empty() && elapsed < Duration::from_secs(120),
        &format!("200 instances, {} mismatches {:?}, {:.1}s", failures.len(), failures.first(), elapsed.as_secs_f64()),
    );
}

fn criterion_02_q_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = [0.0f64; 3];
    let mut trace_checks = 0;
    let mut trace_worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=40);
        let r = rng.random_range(0..=3);
        let sigma = rng.random_range(0.0..1.0);
        let theta = random_instance(&mut rng, n, sigma);
        let lo = rng.random_range(1..=n);
        let hi = rng.random_range(lo..=n);
        let a = rng.random_range(lo..=hi);
        let b = rng.random_range(a..=hi);
        let (w, inner) = (iv(lo, hi), iv(a, b));
        // Errors are measured against the window energy, the natural scale of Q.
        let scale = theta[lo - 1..hi].iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);

        let q = q_form_raw(&theta, inner, w, r).unwrap();
        let qp = q_form_projection(&theta, inner, w, r).unwrap();
        worst[0] = worst[0].max((q - qp).abs() / scale.max(q.abs()));

        if r == 0 {
            let q0 = q_form_raw(&theta, inner, w, 0).unwrap();
            let qc = q_form_r0_closed(&theta, inner, w).unwrap();
            worst[1] = worst[1].max((q0 - qc).abs() / scale.max(q0.abs()));
        }

        let coeffs: Vec<f64> = (0..=r).map(|_| rng.random_range(-2.0..2.0)).collect();
        let shifted: Vec<f64> = (1..=n).map(|i| theta[i - 1] + poly(&coeffs, i as f64 / n as f64)).collect();
        let shifted_scale = scale.max(shifted[lo - 1..hi].iter().map(|v| v * v).sum());
        let qs = q_form_raw(&shifted, inner, w, r).unwrap();
        worst[2] = worst[2].max((q - qs).abs() / shifted_scale);

        let n1 = inner.len();
        let n2 = w.len() - n1;
        if n1 > r && n2 > r {
            let rank = split_projection_rank(inner, w, n, r).unwrap();
            let sum: f64 = (lo..=hi)
                .map(|k| {
                    let mut e = vec![0.0; n];
                    e[k - 1] = 1.0;
                    q_form_raw(&e, inner, w, r).unwrap()
                })
                .sum();
            trace_worst = trace_worst.max((sum - (r + 1) as f64).abs().max((rank as f64 - (r + 1) as f64).abs()));
            trace_checks += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = worst[0] <= 1e-8
        && worst[1] <= 1e-9
        && worst[2] <= 1e-8
        && trace_worst <= 1e-8
        && trace_checks > 100
        && elapsed < Duration::from_secs(60);
    verdict(
        2,
        ok,
        &format!(
            "routes {:.1e}, closed form {:.1e}, shift {:.1e}, trace {:.1e} over {trace_checks}, {:.1}s",
            worst[0],
            worst[1],
            worst[2],
            trace_worst,
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_03_exact_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut problems = Vec::new();
    let mut worst = 0.0f64;
    for n in [64usize, 512] {
        for r in 0..=3usize {
            let coeffs: Vec<f64> = (0..=r).map(|_| rng.random_range(-3.0..3.0)).collect();
            let theta: Vec<f64> = (1..=n).map(|i| poly(&coeffs, i as f64 / n as f64)).collect();
            for variant in [Variant::Full, Variant::Dyadic] {
                let h_max = *h_grid(n, variant).last().unwrap();
                for lambda in [0.0, 1.0] {
                    let f = fit(&theta, r, lambda, variant, Semantics::MaxGood).unwrap();
                    let sup = f.theta_hat.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    worst = worst.max(sup);
                    let short = f.h_hat.iter().filter(|&&h| h != h_max).count();
                    if sup >= 1e-8 || short > 0 {
                        problems.push(format!("n={n} r={r} {variant} lambda={lambda}: sup={sup:e}, {short} short"));
                    }
                }
            }
        }
    }
    verdict(
        3,
        problems.is_empty(),
        &format!("sup error {worst:.1e}, {} problems {:?}", problems.len(), problems.first()),
    );
}

fn criterion_04_bandwidth_selection_equation() {
    let start = Instant::now();
    let n = 512;
    let sigma = 0.5;
    let cases: Vec<(SignalKind, usize, u64)> = [(SignalKind::Check, 0usize), (SignalKind::Heavisine, 2)]
        .into_iter()
        .flat_map(|(kind, r)| (0..10u64).map(move |seed| (kind.clone(), r, seed)))
        .collect();
    let results: Vec<(usize, usize)> = cases
        .par_iter()
        .map(|(kind, r, seed)| {
            let template = generate(&SignalSpec { kind: kind.clone(), n }).unwrap();
            let theta = scale_to_snr(&template, 4.0, sigma).unwrap();
            let eps: Vec<f64> = standard_noise(n, *seed).iter().map(|z| sigma * z).collect();
            let y: Vec<f64> = theta.iter().zip(&eps).map(|(t, e)| t + e).collect();
            let e = effective_noise(&eps, *r, Variant::Full).unwrap();
            let lambda = 2.0 * e;
            let f = fit(&y, *r, lambda, Variant::Full, Semantics::MaxGood).unwrap();
            let report = check_bse_with(&theta, e, &f.bandwidths(), lambda, *r).unwrap();
            (report.locations.iter().filter(|l| l.passed()).count(), report.locations.len())
        })
        .collect();
    let passed: usize = results.iter().map(|r| r.0).sum();
    let total: usize = results.iter().map(|r| r.1).sum();
    let frac = passed as f64 / total as f64;
    let elapsed = start.elapsed();
    verdict(
        4,
        frac >= 0.99 && elapsed < Duration::from_secs(600),
        &format!("{passed}/{total} locations = {:.4}, {:.1}s", frac, elapsed.as_secs_f64()),
    );
}

fn criterion_05_bandwidth_scaling() {
    let start = Instant::now();
    let ns: Vec<usize> = (9..=14).map(|k| 1usize << k).collect();
    let (right, left) = rayon::join(
        || bandwidth_scaling_study_with(&ns, 1.0, ScalingOptions::default()).unwrap(),
        || bandwidth_scaling_study_with(&ns, 1.0, ScalingOptions { location: 0.375, ..Default::default() }).unwrap(),
    );
    let floor_ok = left.points.iter().all(|p| p.i0 == 3 * p.n / 8 && 8 * p.h >= p.n);
    let elapsed = start.elapsed();
    let hs: Vec<usize> = right.points.iter().map(|p| p.h).collect();
    let left_hs: Vec<usize> = left.points.iter().map(|p| p.h).collect();
    verdict(
        5,
        (0.55..=0.78).contains(&right.slope) && floor_ok && elapsed < Duration::from_secs(300),
        &format!("slope {:.3} from h {hs:?}; h at 3n/8 {left_hs:?}; {:.1}s", right.slope, elapsed.as_secs_f64()),
    );
}

fn criterion_06_effective_noise_growth() {
    let start = Instant::now();
    let ns = [256usize, 512, 1024];
    let mut ok = true;
    let mut notes = Vec::new();
    for r in 0..=2usize {
        let ratios: Vec<Vec<f64>> = ns
            .iter()
            .map(|&n| {
                (0..10u64)
                    .into_par_iter()
                    .map(|rep| {
                        let eps = standard_noise(n, 6000 + 100 * r as u64 + rep);
                        effective_noise(&eps, r, Variant::Dyadic).unwrap() / (n as f64).ln().sqrt()
                    })
                    .collect()
            })
            .collect();
        let max = ratios.iter().flatten().copied().fold(0.0, f64::max);
        let means: Vec<f64> = ratios.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
        let growth: Vec<f64> = means.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        ok &= max <= 6.0 && growth.iter().all(|&g| g < 0.15);
        notes.push(format!("r={r}: max {max:.2}, growth {:.1}%/{:.1}%", 100.0 * growth[0], 100.0 * growth[1]));
    }
    let elapsed = start.elapsed();
    verdict(
        6,
        ok && elapsed < Duration::from_secs(300),
        &format!("{}; {:.1}s", notes.join("; "), elapsed.as_secs_f64()),
    );
}

fn criterion_07_simulation_reproduction() {
    let start = Instant::now();
    let sigma = 0.5;
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, r) in [("blocks", 0usize), ("bumps", 2), ("heavisine", 2), ("doppler", 2)] {
        let config: ExperimentConfig = serde_json::from_value(serde_json::json!({
            "signal": {"kind": name, "n": 512},
            "snr": 4.0,
            "sigma": sigma,
            "degree": r,
            "variant": "dyadic",
            "lambda_rule": {"rule": "cv", "folds": 5},
            "reps": 20,
        }))
        .unwrap();
        let rows = run_monte_carlo(&config).unwrap();
        let mean = rows.iter().map(|row| row.rmse).sum::<f64>() / rows.len() as f64;
        let theta = config_signal(&config).unwrap();
        let best = [4usize, 16, 64, 256]
            .into_iter()
            .map(|h| {
                rows.iter()
                    .map(|row| {
                        let y = add_noise(&theta, &NoiseSpec { sigma, seed: row.seed, distribution: Default::default() })
                            .unwrap();
                        rmse(&baseline_fixed_bandwidth(&y, r, h).unwrap(), &theta).unwrap()
                    })
                    .sum::<f64>()
                    / rows.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        ok &= mean < 0.8 * sigma && mean < best;
        notes.push(format!("{name} r={r}: {mean:.3} vs fixed {best:.3}"));
    }
    let elapsed = start.elapsed();
    verdict(
        7,
        ok && elapsed < Duration::from_secs(1800),
        &format!("{}; {:.1}s", notes.join("; "), elapsed.as_secs_f64()),
    );
}

fn criterion_08_complexity() {
    let rows = runtime_scaling(&[512, 1024, 2048], Variant::Dyadic).unwrap();
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let secs: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}s", r.n, r.seconds)).collect();
    verdict(
        8,
        ratios.len() == 2 && ratios.iter().all(|&q| q <= 6.0),
        &format!("{}; ratios {:.2} {:.2}", secs.join(" "), ratios[0], ratios[1]),
    );
}

fn criterion_09_dyadic_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let n = 64;
    let mut worst_t = 0.0f64;
    let mut distances = Vec::new();
    let mut truth_gaps = Vec::new();
    for _ in 0..50 {
        let r = rng.random_range(0..=2);
        let sigma: f64 = rng.random_range(0.1..1.0);
        let (theta, y) = random_pair(&mut rng, n, sigma);
        let lo = rng.random_range(1..=n);
        let hi = rng.random_range(lo..=n);
        for w in [iv(1, n), iv(lo, hi)] {
            let full = t_stat(&y, w, r, Variant::Full).unwrap().t_value;
            let dy = t_stat(&y, w, r, Variant::Dyadic).unwrap().t_value;
            worst_t = worst_t.max((dy - full).abs() / full.max(sigma));
        }
        let lambda = default_lambda(sigma, n).unwrap();
        let a = fit(&y, r, lambda, Variant::Full, Semantics::MaxGood).unwrap();
        let b = fit(&y, r, lambda, Variant::Dyadic, Semantics::MaxGood).unwrap();
        distances.push(rmse(&a.theta_hat, &b.theta_hat).unwrap() / sigma);
        let gap = rmse(&a.theta_hat, &theta).unwrap() - rmse(&b.theta_hat, &theta).unwrap();
        truth_gaps.push(gap.abs() / sigma);
    }
    let worst_fit = distances.iter().copied().fold(0.0, f64::max);
    let over = distances.iter().filter(|&&d| d > 0.1).count();
    distances.sort_by(f64::total_cmp);
    let worst_gap = truth_gaps.iter().copied().fold(0.0, f64::max);
    verdict(
        9,
        worst_t <= 0.5 && worst_fit <= 0.1,
        &format!(
            "worst T gap {worst_t:.3}; theta_hat rmse difference median {:.3} max {worst_fit:.3} sigma, \
             {over}/50 above 0.1; worst gap in rmse to truth {worst_gap:.3} sigma",
            distances[distances.len() / 2]
        ),
    );
}

fn pipeline(dir: &Path) -> Vec<(String, i32)> {
    let bin = env!("CARGO_BIN_EXE_laser");
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    std::fs::write(
        dir.join("bench.json"),
        r#"{"signal": {"kind": "doppler", "n": 256}, "snr": 4, "sigma": 0.5, "degree": 2,
            "lambda_rule": {"rule": "cv"}, "reps": 3, "base_seed": 11}"#,
    )
    .unwrap();
    let steps: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["simulate".into(), "--signal".into(), "doppler".into(), "--n".into(), "256".into(),
            "--seed".into(), "42".into(), "--output".into(), p("data.csv")]),
        ("fit", vec!["fit".into(), "--input".into(), p("data.csv"), "--degree".into(), "2".into(),
            "--lambda".into(), "cv".into(), "--omit-timings".into(), "--output".into(), p("fit.csv")]),
        ("tune", vec!["tune".into(), "--input".into(), p("data.csv"), "--degree".into(), "2".into(),
            "--output".into(), p("tune.json")]),
        ("bench", vec!["bench".into(), "--config".into(), p("bench.json"), "--omit-timings".into(),
            "--output".into(), p("metrics.csv")]),
    ];
    steps
        .into_iter()
        .map(|(name, args)| {
            let status = Command::new(bin).args(&args).status().expect("binary runs");
            (name.to_string(), status.code().unwrap_or(-1))
        })
        .collect()
}

fn criterion_10_cli_round_trip() {
    let runs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let codes: Vec<Vec<(String, i32)>> = runs.iter().map(|d| pipeline(d.path())).collect();
    let all_zero = codes.iter().flatten().all(|(_, c)| *c == 0);
    let outputs = ["data.csv", "fit.csv", "fit.csv.json", "tune.json", "metrics.csv", "metrics.csv.json"];
    let differing: Vec<&str> = outputs
        .iter()
        .copied()
        .filter(|f| {
            let a = std::fs::read(runs[0].path().join(f));
            let b = std::fs::read(runs[1].path().join(f));
            !matches!((a, b), (Ok(a), Ok(b)) if a == b && !a.is_empty())
        })
        .collect();
    verdict(
        10,
        all_zero && differing.is_empty(),
        &format!("exit codes {:?}, unstable or missing {differing:?}", codes[0]),
    );
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("criterion_01_oracle_equivalence", criterion_01_oracle_equivalence),
        ("criterion_02_q_identities", criterion_02_q_identities),
        ("criterion_03_exact_recovery", criterion_03_exact_recovery),
        ("criterion_04_bandwidth_selection_equation", criterion_04_bandwidth_selection_equation),
        ("criterion_05_bandwidth_scaling", criterion_05_bandwidth_scaling),
        ("criterion_06_effective_noise_growth", criterion_06_effective_noise_growth),
        ("criterion_07_simulation_reproduction", criterion_07_simulation_reproduction),
        ("criterion_08_complexity", criterion_08_complexity),
        ("criterion_09_dyadic_fidelity", criterion_09_dyadic_fidelity),
        ("criterion_10_cli_round_trip", criterion_10_cli_round_trip),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        if std::panic::catch_unwind(run).is_err() {
            failed.push(name);
        }
    }
    println!("\nacceptance: {} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
