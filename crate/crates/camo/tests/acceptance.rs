//! End-to-end acceptance checks. Each test covers one release criterion and
//! prints a single PASS line; a panic is the corresponding FAIL.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use camo::camouflage::{
    cluster_score, example_directory_names, fit_directory_mixture, simple_score, DirectoryContext,
};
use camo::corpus::{synthetic_themed_manifests, SamplePlan};
use camo::embedding::{HashedProvider, NgramConfig};
use camo::geometry::{cosine_distance, l2_normalize, Embedding};
use camo::model_selection::silhouette_scores;
use camo::rng::SplitMix64;
use camo::stats::{ks_two_sample, power_law_fit, run_experiment, ExperimentOptions};
use camo::vmf::{fit_mixture, fit_mixture_traced, log_norm_constant, FitConfig};

fn provider() -> HashedProvider {
    HashedProvider::new(NgramConfig::default()).unwrap()
}

fn fit_config() -> FitConfig {
    FitConfig { k: 2, max_iters: 200, tol: 1e-6, restarts: 4, seed: 42 }
}

fn pass(criterion: usize, detail: &str) {
    println!("ACCEPTANCE PASS [{criterion}]: {detail}");
}

#[test]
fn acceptance_1_fixture_ordering() {
    let started = Instant::now();
    let p = provider();
    let ctx = DirectoryContext::new("fixture", example_directory_names(), &p).unwrap();
    let cfg = fit_config();

    let simple_blend = simple_score("data6.xls", &ctx, &p).unwrap();
    let simple_odd = simple_score("wedding_invites.xls", &ctx, &p).unwrap();
    assert!(
        simple_blend < simple_odd,
        "simple: data6.xls {simple_blend} !< wedding_invites.xls {simple_odd}"
    );

    let cluster_blend = cluster_score("data6.xls", &ctx, &p, &cfg).unwrap();
    let cluster_odd = cluster_score("wedding_invites.xls", &ctx, &p, &cfg).unwrap();
    assert!(
        cluster_blend.score < cluster_odd.score,
        "cluster: data6.xls {} !< wedding_invites.xls {}",
        cluster_blend.score,
        cluster_odd.score
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    pass(
        1,
        &format!(
            "fixture ordering holds for both metrics \
             (simple {simple_blend:.4} < {simple_odd:.4}, cluster {:.4} < {:.4}) in {elapsed:?}",
            cluster_blend.score, cluster_odd.score
        ),
    );
}

#[test]
fn acceptance_2_nearest_cluster_structure() {
    let p = provider();
    let names = example_directory_names();
    let ctx = DirectoryContext::new("fixture", names.clone(), &p).unwrap();
    let cfg = fit_config();

    let sel = fit_directory_mixture(&ctx, &cfg).unwrap().expect("12 names clear the floor");
    let mut votes: HashMap<usize, usize> = HashMap::new();
    for (name, &comp) in names.iter().zip(&sel.assignments) {
        if name.starts_with("data") {
            *votes.entry(comp).or_default() += 1;
        }
    }
    let (majority_comp, count) = votes.iter().max_by_key(|(_, c)| **c).unwrap();
    assert!(*count >= 3, "no majority data component: {votes:?}");

    let scored = cluster_score("data6.xls", &ctx, &p, &cfg).unwrap();
    assert_eq!(
        scored.nearest,
        Some(*majority_comp),
        "data6.xls nearest {:?}, data*.xls majority in component {majority_comp}",
        scored.nearest
    );
    pass(
        2,
        &format!(
            "data6.xls lands nearest the component holding {count}/5 of data*.xls (k* = {})",
            sel.k_star
        ),
    );
}

#[test]
fn acceptance_3_corpus_scale_separation() {
    let started = Instant::now();
    let manifests = synthetic_themed_manifests(42, 200);
    let p = provider();
    let report = run_experiment(
        &manifests,
        &p,
        &FitConfig { restarts: 2, max_iters: 50, ..fit_config() },
        &SamplePlan::default(),
        &ExperimentOptions { max_directories: None, include_subdirs: false },
    )
    .unwrap();

    for (metric, agg) in [("simple", &report.simple), ("cluster", &report.cluster)] {
        assert_eq!(agg.sampled_median, 1.0, "{metric} sampled median {}", agg.sampled_median);
        assert!(agg.local_median <= 0.5, "{metric} local median {}", agg.local_median);
        assert!(agg.ks.statistic >= 0.5, "{metric} KS {}", agg.ks.statistic);
        assert!(agg.ks.p_value < 0.01, "{metric} p {}", agg.ks.p_value);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(
        3,
        &format!(
            "{} directories: local medians {:.3}/{:.3}, sampled 1.0/1.0, KS {:.3}/{:.3} \
             (p {:.2e}/{:.2e}) in {elapsed:?}",
            report.directories,
            report.simple.local_median,
            report.cluster.local_median,
            report.simple.ks.statistic,
            report.cluster.ks.statistic,
            report.simple.ks.p_value,
            report.cluster.ks.p_value
        ),
    );
}

fn random_unit(rng: &mut SplitMix64, d: usize) -> Embedding {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
        if let Ok(u) = l2_normalize(&v) {
            return u;
        }
    }
}

#[test]
fn acceptance_4_em_correctness() {
    // monotone log-likelihood on 100 seeded datasets
    let mut worst_drop = 0.0f64;
    for case in 0..100u64 {
        let mut rng = SplitMix64::new(9000 + case);
        let n = 8 + rng.next_below(193) as usize; // <= 200
        let d = 3 + rng.next_below(48) as usize; // <= 50
        let k = 1 + rng.next_below(4) as usize; // <= 4
        let points: Vec<Embedding> = (0..n).map(|_| random_unit(&mut rng, d)).collect();
        let cfg = FitConfig { k: k.min(n), seed: case, ..fit_config() };
        let (_, _, _, trace) = fit_mixture_traced(&points, &cfg).unwrap();
        for w in trace.windows(2) {
            let drop = (w[0] - w[1]) / w[0].abs().max(1.0);
            worst_drop = worst_drop.max(drop);
            assert!(drop <= 1e-9, "case {case}: log-likelihood dropped {} -> {}", w[0], w[1]);
        }
    }

    // two-cluster recovery within cosine distance 0.01 of the true means
    let mut rng = SplitMix64::new(77);
    let d = 20;
    let mut mu_a = vec![0.0; d];
    mu_a[0] = 1.0;
    let mut mu_b = vec![0.0; d];
    mu_b[1] = 1.0;
    let mut points = Vec::new();
    for mu in [&mu_a, &mu_b] {
        for _ in 0..60 {
            let v: Vec<f64> = mu.iter().map(|&m| m + 0.05 * rng.next_gaussian()).collect();
            points.push(l2_normalize(&v).unwrap());
        }
    }
    let (mix, _, _) = fit_mixture(&points, &FitConfig { k: 2, ..fit_config() }).unwrap();
    for truth in [&mu_a, &mu_b] {
        let best = mix
            .components
            .iter()
            .map(|c| cosine_distance(&c.mu, truth).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.01, "recovered mean {best} from truth");
    }
    pass(4, &format!("EM monotone on 100 datasets (worst drop {worst_drop:.2e}); two-cluster means recovered within 0.01"));
}

/// ln Γ(m) for positive integer or half-integer m, built up from Γ(1) = 1 or
/// Γ(1/2) = √π. Independent of the library's internals.
fn lgamma_half_oracle(two_m: u64) -> f64 {
    assert!(two_m >= 1);
    if two_m % 2 == 0 {
        (2..two_m / 2).map(|i| (i as f64).ln()).sum()
    } else {
        let mut v = 0.5 * std::f64::consts::PI.ln();
        let mut arg = 0.5;
        while arg + 1.0 <= two_m as f64 / 2.0 {
            v += arg.ln();
            arg += 1.0;
        }
        v
    }
}

/// ln I_ν(x) by direct log-domain summation of the ascending series.
fn log_bessel_series_oracle(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0);
    let two_nu = (2.0 * nu).round() as u64;
    let lx = (x / 2.0).ln();
    let mut log_terms = Vec::new();
    let mut lg_m = 0.0; // ln m!
    let mut lg_mnu = lgamma_half_oracle(two_nu + 2); // ln Γ(m + ν + 1)
    let mut peak = f64::NEG_INFINITY;
    for m in 0..200_000u64 {
        let lt = (2.0 * m as f64 + nu) * lx - lg_m - lg_mnu;
        log_terms.push(lt);
        peak = peak.max(lt);
        if m as f64 > x / 2.0 && lt < peak - 60.0 {
            break;
        }
        lg_m += ((m + 1) as f64).ln();
        lg_mnu += (m as f64 + nu + 1.0).ln();
    }
    let sum: f64 = log_terms.iter().map(|t| (t - peak).exp()).sum();
    peak + sum.ln()
}

#[test]
fn acceptance_5_log_norm_oracle() {
    let tau = std::f64::consts::TAU;
    let pi = std::f64::consts::PI;
    let mut checked = 0;
    for d in [2usize, 3, 10, 100, 300] {
        for kappa in [0.0f64, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let got = log_norm_constant(d, kappa).unwrap();
            let want = if kappa == 0.0 {
                // uniform density: Γ(d/2) / (2 π^{d/2})
                lgamma_half_oracle(d as u64) - 2.0f64.ln() - d as f64 / 2.0 * pi.ln()
            } else {
                let nu = d as f64 / 2.0 - 1.0;
                (d as f64 / 2.0 - 1.0) * kappa.ln()
                    - d as f64 / 2.0 * tau.ln()
                    - log_bessel_series_oracle(nu, kappa)
            };
            let rel = (got - want).abs() / want.abs().max(1.0);
            assert!(rel <= 1e-6, "d={d} kappa={kappa}: got {got}, oracle {want}, rel {rel:e}");
            checked += 1;
        }
    }

    // d = 3 closed form ln(κ / (4π sinh κ))
    for kappa in [0.25f64, 1.0, 5.0, 20.0] {
        let want = (kappa / (4.0 * pi * kappa.sinh())).ln();
        let got = log_norm_constant(3, kappa).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "d=3 kappa={kappa}");
    }

    // sphere quadrature: density integrates to 1 on S^2 within 1e-4
    for kappa in [0.0f64, 1.0, 10.0] {
        let log_c = log_norm_constant(3, kappa).unwrap();
        let m = 20_000usize;
        let h = pi / m as f64;
        let f = |theta: f64| (log_c + kappa * theta.cos()).exp() * theta.sin();
        let mut s = f(0.0) + f(pi);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let integral = tau * s * h / 3.0;
        assert!((integral - 1.0).abs() <= 1e-4, "kappa={kappa}: integral {integral}");
    }
    pass(5, &format!("log normalizer matches series oracle on {checked} grid points within 1e-6; d=3 quadrature within 1e-4"));
}

/// Brute-force cosine silhouette, straight from the definition.
fn silhouette_oracle(points: &[Embedding], labels: &[usize]) -> Vec<f64> {
    let n = points.len();
    let dist = |i: usize, j: usize| cosine_distance(&points[i], &points[j]).unwrap();
    (0..n)
        .map(|i| {
            let own = labels[i];
            let own_size = labels.iter().filter(|&&l| l == own).count();
            if own_size == 1 {
                return 0.0;
            }
            let a: f64 = (0..n)
                .filter(|&j| j != i && labels[j] == own)
                .map(|j| dist(i, j))
                .sum::<f64>()
                / (own_size - 1) as f64;
            let mut b = f64::INFINITY;
            let clusters: std::collections::BTreeSet<usize> = labels.iter().cloned().collect();
            for c in clusters {
                if c == own {
                    continue;
                }
                let members: Vec<usize> =
                    (0..n).filter(|&j| labels[j] == c).collect();
                let mean =
                    members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64;
                b = b.min(mean);
            }
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect()
}

#[test]
fn acceptance_6_silhouette_oracle() {
    let mut max_err = 0.0f64;
    for case in 0..100u64 {
        let mut rng = SplitMix64::new(3100 + case);
        let n = 4 + rng.next_below(61) as usize; // <= 64
        let d = 3 + rng.next_below(10) as usize;
        let k = 2 + rng.next_below(4) as usize;
        let points: Vec<Embedding> = (0..n).map(|_| random_unit(&mut rng, d)).collect();
        // ensure at least two distinct labels
        let mut labels: Vec<usize> = (0..n).map(|i| {
            if i < 2 { i % k } else { rng.next_below(k as u64) as usize }
        }).collect();
        labels[0] = 0;
        labels[1] = 1 % k.max(2);

        let got = silhouette_scores(&points, &labels).unwrap();
        let want = silhouette_oracle(&points, &labels);
        for (g, w) in got.per_point.iter().zip(&want) {
            let err = (g - w).abs();
            max_err = max_err.max(err);
            assert!(err <= 1e-9, "case {case}: {g} vs oracle {w}");
            assert!((-1.0..=1.0).contains(g), "s(i) out of range: {g}");
        }
    }
    pass(6, &format!("silhouette matches brute force on 100 instances, max |err| {max_err:.2e}"));
}

/// Sup of |F1 - F2| evaluated on every sample point of both samples.
fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b.iter())
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn acceptance_7_ks_oracle() {
    assert_eq!(ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap().statistic, 0.5);
    let same = [0.3, 0.7, 1.1];
    assert_eq!(ks_two_sample(&same, &same).unwrap().statistic, 0.0);
    assert_eq!(ks_two_sample(&[1.0, 2.0], &[5.0, 6.0]).unwrap().statistic, 1.0);

    let mut max_err = 0.0f64;
    for case in 0..200u64 {
        let mut rng = SplitMix64::new(5200 + case);
        let n1 = 2 + rng.next_below(40) as usize;
        let n2 = 2 + rng.next_below(40) as usize;
        let a: Vec<f64> = (0..n1).map(|_| rng.next_gaussian()).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.next_gaussian() * 1.3 + 0.4).collect();
        let got = ks_two_sample(&a, &b).unwrap().statistic;
        let want = ks_oracle(&a, &b);
        let err = (got - want).abs();
        max_err = max_err.max(err);
        assert!(err <= 1e-12, "case {case}: {got} vs oracle {want}");
    }
    pass(7, &format!("KS statistic matches brute force on 200 pairs, max |err| {max_err:.2e}"));
}

#[test]
fn acceptance_8_power_law_recovery() {
    let started = Instant::now();
    let alpha = 3.1;
    let x_min = 30.0;
    let mut rng = SplitMix64::new(314159);
    let sample: Vec<u64> = (0..10_000)
        .map(|_| {
            let u = rng.next_f64();
            (x_min * (1.0 - u).powf(-1.0 / (alpha - 1.0))).round() as u64
        })
        .collect();
    let fit = power_law_fit(&sample).unwrap();
    assert!((fit.alpha - alpha).abs() <= 0.2, "alpha {} vs {alpha}", fit.alpha);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        8,
        &format!(
            "recovered alpha {:.3} (truth {alpha}) with cutoff {} in {elapsed:?}",
            fit.alpha, fit.x_min
        ),
    );
}

fn run_cli(args: &[&str], envs: &[(&str, &str)]) -> (Vec<u8>, Vec<u8>, i32) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_camo"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    (out.stdout, out.stderr, out.status.code().unwrap_or(-1))
}

fn write_fixture_dir(root: &Path) {
    for name in example_directory_names() {
        std::fs::write(root.join(name), b"").unwrap();
    }
}

fn write_manifest(path: &Path, seed: u64, repos: usize) {
    let manifests = synthetic_themed_manifests(seed, repos);
    let mut f = std::fs::File::create(path).unwrap();
    for m in &manifests {
        writeln!(f, "{}", serde_json::to_string(m).unwrap()).unwrap();
    }
}

#[test]
fn acceptance_9_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("fixture");
    std::fs::create_dir(&dir).unwrap();
    write_fixture_dir(&dir);
    let manifest = tmp.path().join("corpus.jsonl");
    write_manifest(&manifest, 7, 12);
    let dir_s = dir.to_str().unwrap();
    let man_s = manifest.to_str().unwrap();

    // score / fit / scan / histogram: identical stdout across reruns
    let repeated: Vec<Vec<&str>> = vec![
        vec!["score", "--dir", dir_s, "--seed", "11", "data6.xls", "wedding_invites.xls"],
        vec!["score", "--dir", dir_s, "--seed", "11", "--format", "csv", "data6.xls"],
        vec!["fit", "--dir", dir_s, "--seed", "11", "--restarts", "2"],
        vec!["scan", "--root", dir_s, "--format", "csv"],
        vec!["histogram", "--manifest", man_s, "--bins", "10"],
    ];
    for args in &repeated {
        let (out1, err1, code1) = run_cli(args, &[]);
        let (out2, _, code2) = run_cli(args, &[]);
        assert_eq!(code1, 0, "{args:?} failed: {}", String::from_utf8_lossy(&err1));
        assert_eq!(code2, 0);
        assert_eq!(out1, out2, "stdout differs across reruns for {args:?}");
        assert!(!out1.is_empty());
    }

    // evaluate: identical artifacts across reruns and across --jobs 1 vs 8
    let mut artifacts: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    let mut stdouts = Vec::new();
    for (run, jobs) in [("a", "1"), ("b", "8"), ("c", "1")] {
        let out_dir = tmp.path().join(format!("eval_{run}"));
        let (stdout, stderr, code) = run_cli(
            &[
                "evaluate",
                "--manifest",
                man_s,
                "--max-directories",
                "8",
                "--restarts",
                "2",
                "--jobs",
                jobs,
                "--output-dir",
                out_dir.to_str().unwrap(),
            ],
            &[("CAMO_SEED", "9")],
        );
        assert_eq!(code, 0, "evaluate failed: {}", String::from_utf8_lossy(&stderr));
        stdouts.push(stdout);
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort_by(|a, b| a.0.cmp(&b.0));
        artifacts.push(files);
    }
    assert_eq!(artifacts[0].len(), 3, "expected report + two CSVs");
    assert_eq!(stdouts[0], stdouts[1], "evaluate stdout differs between --jobs 1 and 8");
    assert_eq!(stdouts[0], stdouts[2], "evaluate stdout differs across reruns");
    assert_eq!(artifacts[0], artifacts[1], "evaluate artifacts differ between --jobs 1 and 8");
    assert_eq!(artifacts[0], artifacts[2], "evaluate artifacts differ across reruns");

    pass(9, "score/fit/scan/histogram byte-stable across reruns; evaluate byte-stable across reruns and --jobs 1 vs 8");
}
