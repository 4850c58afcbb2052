//! Statistical evaluation: two-sample KS test, directory-size power-law
//! fitting, histogram rows, and the end-to-end local-vs-sampled experiment.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::camouflage::{
    fit_directory_mixture, normalize_per_directory, simple_score, DirectoryContext,
    MIN_ITEMS_FOR_CLUSTERING,
};
use crate::corpus::{enumerate_directories, sample_cross_repo, DirectoryRecord, RepoManifest, SamplePlan};
use crate::embedding::EmbeddingProvider;
use crate::error::{CamoError, Result};
use crate::geometry::cosine_distance;
use crate::rng::SplitMix64;
use crate::vmf::FitConfig;

/// Two-sample Kolmogorov-Smirnov outcome.
#[derive(Debug, Clone, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Continuous power-law fit of a count distribution.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub x_min: u64,
    pub ks_distance: f64,
    pub n_tail: usize,
}

/// Sup gap between the two right-continuous empirical CDFs, with the
/// asymptotic Kolmogorov p-value at effective size n1*n2/(n1+n2).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(CamoError::InvalidInput("KS test needs non-empty samples".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());

    let mut grid: Vec<f64> = xs.iter().chain(ys.iter()).cloned().collect();
    grid.sort_by(|p, q| p.partial_cmp(q).unwrap());
    grid.dedup();

    let ecdf = |sorted: &[f64], x: f64| {
        // right-continuous: #{v <= x} / n
        let count = sorted.partition_point(|v| *v <= x);
        count as f64 / sorted.len() as f64
    };
    let statistic = grid
        .iter()
        .map(|&x| (ecdf(&xs, x) - ecdf(&ys, x)).abs())
        .fold(0.0f64, f64::max);

    let n1 = xs.len();
    let n2 = ys.len();
    let n_e = (n1 * n2) as f64 / (n1 + n2) as f64;
    let lambda = (n_e.sqrt() + 0.12 + 0.11 / n_e.sqrt()) * statistic;
    let mut p = 0.0;
    let mut converged = false;
    for j in 1..=1000 {
        let term = 2.0 * (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        let signed = if j % 2 == 1 { term } else { -term };
        p += signed;
        if term < 1e-12 {
            converged = true;
            break;
        }
    }
    // the alternating series only converges for positive lambda; at D ~ 0
    // the distributions are indistinguishable
    if !converged {
        p = 1.0;
    }
    Ok(KsResult { statistic, p_value: p.clamp(0.0, 1.0), n1, n2 })
}

/// Fit a power law to integer counts: continuous MLE for the exponent over
/// the tail at each candidate cutoff, keeping the cutoff whose fitted CDF is
/// closest to the tail's empirical CDF in KS distance.
pub fn power_law_fit(counts: &[u64]) -> Result<PowerLawFit> {
    if counts.len() < 10 {
        return Err(CamoError::InvalidInput("power-law fit needs at least 10 values".into()));
    }
    if counts.iter().any(|&c| c < 1) {
        return Err(CamoError::InvalidInput("counts must be >= 1".into()));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(CamoError::DegenerateDistribution("all values equal".into()));
    }

    let mut best: Option<PowerLawFit> = None;
    for &x_min in &distinct {
        let tail: Vec<f64> = sorted
            .iter()
            .filter(|&&v| v >= x_min)
            .map(|&v| v as f64)
            .collect();
        if tail.len() < 2 {
            continue;
        }
        let xm = x_min as f64 - 0.5;
        let log_sum: f64 = tail.iter().map(|&v| (v / xm).ln()).sum();
        if log_sum <= 0.0 {
            continue;
        }
        let alpha = 1.0 + tail.len() as f64 / log_sum;
        // KS distance between the tail ECDF and the fitted CDF
        // F(x) = 1 - (x / xm)^{1 - alpha}
        let n = tail.len() as f64;
        let mut ks = 0.0f64;
        for (i, &v) in tail.iter().enumerate() {
            let fitted = 1.0 - (v / xm).powf(1.0 - alpha);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            ks = ks.max((fitted - lo).abs()).max((fitted - hi).abs());
        }
        let candidate = PowerLawFit { alpha, x_min, ks_distance: ks, n_tail: tail.len() };
        let better = match &best {
            None => true,
            Some(b) => ks < b.ks_distance,
        };
        if better {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| CamoError::DegenerateDistribution("no viable cutoff".into()))
}

/// Fixed-width histogram rows over [min, max]; the maximum lands in the last
/// bin. Counts are raw; log scaling is the plot consumer's job.
pub fn log_histogram(counts: &[u64], bins: usize) -> Result<Vec<(f64, f64, usize)>> {
    if counts.is_empty() {
        return Err(CamoError::InvalidInput("empty histogram input".into()));
    }
    if bins < 1 {
        return Err(CamoError::InvalidInput("bins must be >= 1".into()));
    }
    let min = *counts.iter().min().unwrap() as f64;
    let max = *counts.iter().max().unwrap() as f64;
    let width = if max > min { (max - min) / bins as f64 } else { 1.0 };
    let mut rows: Vec<(f64, f64, usize)> = (0..bins)
        .map(|i| (min + i as f64 * width, min + (i + 1) as f64 * width, 0))
        .collect();
    for &c in counts {
        let mut idx = ((c as f64 - min) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        rows[idx].2 += 1;
    }
    Ok(rows)
}

/// Knobs for [`run_experiment`] beyond the fit and sampling configs.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    /// Seeded subsample cap on the number of directories.
    pub max_directories: Option<usize>,
    /// Score subdirectory names too, not just files.
    pub include_subdirs: bool,
}

/// Scores for one directory: locals are leave-one-out, sampled decoys are
/// scored against the full directory.
#[derive(Debug, Clone, Serialize)]
pub struct DirectoryOutcome {
    pub repo_id: String,
    pub dir_path: String,
    pub item_count: usize,
    pub k_star: Option<usize>,
    pub local_simple: Vec<f64>,
    pub local_cluster: Vec<f64>,
    pub sampled_simple: Vec<f64>,
    pub sampled_cluster: Vec<f64>,
    pub norm_local_simple: Vec<f64>,
    pub norm_local_cluster: Vec<f64>,
    pub norm_sampled_simple: Vec<f64>,
    pub norm_sampled_cluster: Vec<f64>,
    /// Any directory-level fallback or degeneracy notes.
    pub flags: Vec<String>,
}

/// Pooled medians and KS results for one metric.
#[derive(Debug, Clone, Serialize)]
pub struct MetricAggregate {
    pub local_median: f64,
    pub sampled_median: f64,
    pub ks: KsResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumResult {
    pub directories: usize,
    pub simple: Option<MetricAggregate>,
    pub cluster: Option<MetricAggregate>,
}

/// Full output of the local-vs-sampled evaluation.
#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub directories: usize,
    pub per_directory: Vec<DirectoryOutcome>,
    pub simple: MetricAggregate,
    pub cluster: MetricAggregate,
    pub strata: BTreeMap<String, StratumResult>,
    pub power_law: Option<PowerLawFit>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn size_class(item_count: usize) -> &'static str {
    match item_count {
        0..=10 => "small",
        11..=50 => "medium",
        _ => "large",
    }
}

/// Distance from a candidate vector to the nearest component mean, or to the
/// mean direction when the context is below the clustering floor.
fn cluster_distance(
    g: &[f64],
    ctx: &DirectoryContext,
    selection: Option<&crate::model_selection::KSelection>,
) -> Result<f64> {
    match selection {
        Some(sel) => {
            let mut best = f64::INFINITY;
            for comp in &sel.mixture.components {
                best = best.min(cosine_distance(g, &comp.mu)?);
            }
            Ok(best)
        }
        None => {
            let mean = crate::geometry::mean_direction(&ctx.vectors)
                .map_err(|_| CamoError::DegenerateDirectory)?;
            cosine_distance(g, &mean.mu)
        }
    }
}

fn score_directory(
    record: &DirectoryRecord,
    file_names: &[String],
    manifests: &[RepoManifest],
    provider: &dyn EmbeddingProvider,
    fit_cfg: &FitConfig,
    plan: &SamplePlan,
) -> Result<DirectoryOutcome> {
    let mut flags = Vec::new();
    let full_ctx = DirectoryContext::new(record.dir_path.clone(), file_names.to_vec(), provider)?;

    // full-directory mixture for the sampled decoys
    let full_selection = fit_directory_mixture(&full_ctx, fit_cfg)?;
    let k_star = full_selection.as_ref().map(|s| s.k_star);
    if full_selection.is_none() {
        flags.push("cluster_fallback_simple".into());
    } else if full_selection.as_ref().unwrap().collapse_warning {
        flags.push("cluster_collapse".into());
    }

    // locals: leave-one-out
    let mut local_simple = Vec::with_capacity(file_names.len());
    let mut local_cluster = Vec::with_capacity(file_names.len());
    for (i, name) in file_names.iter().enumerate() {
        let rest: Vec<String> = file_names
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, n)| n.clone())
            .collect();
        if rest.is_empty() {
            continue;
        }
        let ctx = DirectoryContext::new(record.dir_path.clone(), rest, provider)?;
        local_simple.push(simple_score(name, &ctx, provider)?);
        let selection = if ctx.len() >= MIN_ITEMS_FOR_CLUSTERING {
            fit_directory_mixture(&ctx, fit_cfg)?
        } else {
            None
        };
        let g = provider.embed(name)?;
        local_cluster.push(cluster_distance(&g, &ctx, selection.as_ref())?);
    }

    // sampled decoys against the full directory
    let samples = sample_cross_repo(record, manifests, plan)?;
    let mut sampled_simple = Vec::with_capacity(samples.len());
    let mut sampled_cluster = Vec::with_capacity(samples.len());
    for name in &samples {
        sampled_simple.push(simple_score(name, &full_ctx, provider)?);
        let g = provider.embed(name)?;
        sampled_cluster.push(cluster_distance(&g, &full_ctx, full_selection.as_ref())?);
    }

    // per-directory max-normalization over locals + sampled, per metric
    let normalize = |locals: &[f64], sampled: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut batch = locals.to_vec();
        batch.extend_from_slice(sampled);
        let normed = normalize_per_directory(&batch)?;
        let (l, s) = normed.split_at(locals.len());
        Ok((l.to_vec(), s.to_vec()))
    };
    let (norm_local_simple, norm_sampled_simple) = normalize(&local_simple, &sampled_simple)?;
    let (norm_local_cluster, norm_sampled_cluster) = normalize(&local_cluster, &sampled_cluster)?;

    Ok(DirectoryOutcome {
        repo_id: record.repo_id.clone(),
        dir_path: record.dir_path.clone(),
        item_count: record.item_count,
        k_star,
        local_simple,
        local_cluster,
        sampled_simple,
        sampled_cluster,
        norm_local_simple,
        norm_local_cluster,
        norm_sampled_simple,
        norm_sampled_cluster,
        flags,
    })
}

fn aggregate_metric(
    outcomes: &[&DirectoryOutcome],
    local: impl Fn(&DirectoryOutcome) -> &[f64],
    sampled: impl Fn(&DirectoryOutcome) -> &[f64],
) -> Result<MetricAggregate> {
    let locals: Vec<f64> = outcomes.iter().flat_map(|o| local(o).iter().cloned()).collect();
    let sampleds: Vec<f64> = outcomes.iter().flat_map(|o| sampled(o).iter().cloned()).collect();
    let ks = ks_two_sample(&locals, &sampleds)?;
    Ok(MetricAggregate {
        local_median: median(&locals),
        sampled_median: median(&sampleds),
        ks,
    })
}

/// Run the full local-vs-sampled evaluation over filtered manifests.
///
/// Locals are scored leave-one-out so a file never blends against itself;
/// sampled decoys are scored against the complete directory. All score
/// batches are max-normalized per directory before pooling.
pub fn run_experiment(
    manifests: &[RepoManifest],
    provider: &dyn EmbeddingProvider,
    fit_cfg: &FitConfig,
    plan: &SamplePlan,
    opts: &ExperimentOptions,
) -> Result<ExperimentReport> {
    if manifests.len() < 2 {
        return Err(CamoError::InvalidInput(
            "experiment needs at least 2 repositories for sampling".into(),
        ));
    }
    let mut dirs = enumerate_directories(manifests);
    if let Some(cap) = opts.max_directories {
        if dirs.len() > cap {
            // seeded subsample, then restore deterministic order
            let mut rng = SplitMix64::new(plan.seed);
            for i in (1..dirs.len()).rev() {
                let j = rng.next_below(i as u64 + 1) as usize;
                dirs.swap(i, j);
            }
            dirs.truncate(cap);
            dirs.sort_by(|a, b| (&a.repo_id, &a.dir_path).cmp(&(&b.repo_id, &b.dir_path)));
        }
    }
    if dirs.is_empty() {
        return Err(CamoError::InvalidInput("no eligible directories".into()));
    }

    // manifest children that have children of their own are subdirectories
    let subdir_set: HashSet<(&str, String)> = manifests
        .iter()
        .flat_map(|m| {
            m.paths.iter().flat_map(move |p| {
                let parts: Vec<&str> = p.split('/').collect();
                (1..parts.len()).map(move |i| (m.repo_id.as_str(), parts[..i].join("/")))
            })
        })
        .collect();

    let work: Vec<(DirectoryRecord, Vec<String>)> = dirs
        .into_iter()
        .filter_map(|record| {
            let file_names: Vec<String> = record
                .item_names
                .iter()
                .filter(|name| {
                    if opts.include_subdirs {
                        return true;
                    }
                    let full = if record.dir_path.is_empty() {
                        (*name).clone()
                    } else {
                        format!("{}/{}", record.dir_path, name)
                    };
                    !subdir_set.contains(&(record.repo_id.as_str(), full))
                })
                .cloned()
                .collect();
            if file_names.len() >= 2 {
                Some((record, file_names))
            } else {
                None
            }
        })
        .collect();

    let outcomes: Vec<DirectoryOutcome> = work
        .par_iter()
        .map(|(record, file_names)| {
            score_directory(record, file_names, manifests, provider, fit_cfg, plan)
        })
        .collect::<Result<_>>()?;

    let all: Vec<&DirectoryOutcome> = outcomes.iter().collect();
    let simple = aggregate_metric(&all, |o| &o.norm_local_simple, |o| &o.norm_sampled_simple)?;
    let cluster = aggregate_metric(&all, |o| &o.norm_local_cluster, |o| &o.norm_sampled_cluster)?;

    let mut strata = BTreeMap::new();
    for class in ["small", "medium", "large"] {
        let members: Vec<&DirectoryOutcome> = outcomes
            .iter()
            .filter(|o| size_class(o.item_count) == class)
            .collect();
        let simple_agg = aggregate_metric(
            &members,
            |o| &o.norm_local_simple,
            |o| &o.norm_sampled_simple,
        )
        .ok();
        let cluster_agg = aggregate_metric(
            &members,
            |o| &o.norm_local_cluster,
            |o| &o.norm_sampled_cluster,
        )
        .ok();
        strata.insert(
            class.to_string(),
            StratumResult { directories: members.len(), simple: simple_agg, cluster: cluster_agg },
        );
    }

    let counts: Vec<u64> = outcomes.iter().map(|o| o.item_count as u64).collect();
    let power_law = match power_law_fit(&counts) {
        Ok(fit) => Some(fit),
        Err(e) => {
            eprintln!("warning: power-law fit skipped: {e}");
            None
        }
    };

    Ok(ExperimentReport {
        seed: plan.seed,
        directories: outcomes.len(),
        per_directory: outcomes,
        simple,
        cluster,
        strata,
        power_law,
    })
}

/// CSV with one row per (directory, population, metric, value), directly
/// plottable as score distributions.
pub fn pooled_scores_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "population", "value"])
        .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    let mut write_all = |metric: &str, population: &str, values: &[f64]| {
        for v in values {
            w.write_record([metric, population, &format!("{v:.6}")]).unwrap();
        }
    };
    for o in &report.per_directory {
        write_all("simple", "local", &o.norm_local_simple);
        write_all("simple", "sampled", &o.norm_sampled_simple);
        write_all("cluster", "local", &o.norm_local_cluster);
        write_all("cluster", "sampled", &o.norm_sampled_cluster);
    }
    let bytes = w.into_inner().map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV with one row per directory: counts, k*, and per-population medians.
pub fn per_directory_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "repo_id",
        "dir_path",
        "item_count",
        "k_star",
        "local_median_simple",
        "sampled_median_simple",
        "local_median_cluster",
        "sampled_median_cluster",
        "flags",
    ])
    .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    for o in &report.per_directory {
        w.write_record([
            o.repo_id.as_str(),
            o.dir_path.as_str(),
            &o.item_count.to_string(),
            &o.k_star.map(|k| k.to_string()).unwrap_or_default(),
            &format!("{:.6}", median(&o.norm_local_simple)),
            &format!("{:.6}", median(&o.norm_sampled_simple)),
            &format!("{:.6}", median(&o.norm_local_cluster)),
            &format!("{:.6}", median(&o.norm_sampled_cluster)),
            &o.flags.join(";"),
        ])
        .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
