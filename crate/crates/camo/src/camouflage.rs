//! The two camouflage metrics: cosine distance from a candidate name to the
//! directory mean (simple) and to the nearest fitted vMF component (cluster),
//! plus per-directory max-normalization and candidate ranking.

use serde::Serialize;

use crate::embedding::EmbeddingProvider;
use crate::error::{CamoError, Result};
use crate::geometry::{cosine_distance, mean_direction, Embedding};
use crate::model_selection::{select_k, KSelection};
use crate::vmf::FitConfig;

/// Directories below this size fall back from cluster to simple scoring.
pub const MIN_ITEMS_FOR_CLUSTERING: usize = 5;

/// A directory's filenames with their embeddings; the unit of scoring.
#[derive(Debug, Clone)]
pub struct DirectoryContext {
    pub dir_path: String,
    pub names: Vec<String>,
    pub vectors: Vec<Embedding>,
    pub provider_id: String,
}

impl DirectoryContext {
    /// Embed `names` with `provider`. Names must be unique and non-empty.
    pub fn new(
        dir_path: impl Into<String>,
        names: Vec<String>,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(CamoError::InvalidInput("directory context needs at least one name".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name) {
                return Err(CamoError::Duplicate(format!("filename {name:?} appears twice")));
            }
        }
        let vectors = names
            .iter()
            .map(|n| provider.embed(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectoryContext {
            dir_path: dir_path.into(),
            names,
            vectors,
            provider_id: provider.provider_id(),
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Cluster-metric outcome for one candidate.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterScore {
    pub score: f64,
    /// Selected mixture order; `None` when the directory was too small and
    /// the simple score was used instead.
    pub k_star: Option<usize>,
    /// Index of the nearest component, when clustering ran.
    pub nearest: Option<usize>,
    pub fallback: bool,
}

/// Full per-candidate scoring record.
#[derive(Debug, Clone, Serialize)]
pub struct CamouflageReport {
    pub dir_path: String,
    pub candidate: String,
    pub simple_score: f64,
    pub cluster_score: f64,
    pub k_star: Option<usize>,
    pub nearest_component: Option<usize>,
    pub cluster_fallback: bool,
    pub normalized_simple: f64,
    pub normalized_cluster: f64,
}

/// Cosine distance from the candidate's vector to the mean direction of the
/// directory's filename vectors. Lower is better camouflaged.
pub fn simple_score(
    candidate: &str,
    ctx: &DirectoryContext,
    provider: &dyn EmbeddingProvider,
) -> Result<f64> {
    let g = provider.embed(candidate)?;
    let mean = match mean_direction(&ctx.vectors) {
        Ok(m) => m,
        Err(CamoError::DegenerateMean) => return Err(CamoError::DegenerateDirectory),
        Err(e) => return Err(e),
    };
    cosine_distance(&g, &mean.mu)
}

/// Fit the directory's mixture once so several candidates can be scored
/// against it. Returns `None` for directories below the clustering floor.
pub fn fit_directory_mixture(ctx: &DirectoryContext, cfg: &FitConfig) -> Result<Option<KSelection>> {
    if ctx.len() < MIN_ITEMS_FOR_CLUSTERING {
        return Ok(None);
    }
    let k_max = 8.min(ctx.len() - 1);
    Ok(Some(select_k(&ctx.vectors, 2, k_max, cfg)?))
}

fn score_against_mixture(
    candidate: &str,
    ctx: &DirectoryContext,
    provider: &dyn EmbeddingProvider,
    selection: Option<&KSelection>,
) -> Result<ClusterScore> {
    match selection {
        None => Ok(ClusterScore {
            score: simple_score(candidate, ctx, provider)?,
            k_star: None,
            nearest: None,
            fallback: true,
        }),
        Some(sel) => {
            let g = provider.embed(candidate)?;
            let mut best = (0usize, f64::INFINITY);
            for (j, comp) in sel.mixture.components.iter().enumerate() {
                let d = cosine_distance(&g, &comp.mu)?;
                if d < best.1 {
                    best = (j, d);
                }
            }
            Ok(ClusterScore {
                score: best.1,
                k_star: Some(sel.k_star),
                nearest: Some(best.0),
                fallback: false,
            })
        }
    }
}

/// Cluster camouflage score: distance to the mean of the nearest component
/// of the silhouette-selected mixture. Falls back to the simple score for
/// directories with fewer than [`MIN_ITEMS_FOR_CLUSTERING`] names.
pub fn cluster_score(
    candidate: &str,
    ctx: &DirectoryContext,
    provider: &dyn EmbeddingProvider,
    cfg: &FitConfig,
) -> Result<ClusterScore> {
    let selection = fit_directory_mixture(ctx, cfg)?;
    score_against_mixture(candidate, ctx, provider, selection.as_ref())
}

/// Divide every score by the batch maximum so the worst candidate maps to
/// exactly 1.0. An all-zero batch stays all-zero.
pub fn normalize_per_directory(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(CamoError::InvalidInput("empty score batch".into()));
    }
    if scores.iter().any(|s| *s < 0.0 || !s.is_finite()) {
        return Err(CamoError::InvalidInput("scores must be finite and >= 0".into()));
    }
    let max = scores.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return Ok(vec![0.0; scores.len()]);
    }
    Ok(scores.iter().map(|s| s / max).collect())
}

/// Score every candidate against the directory and return reports sorted
/// ascending by cluster score (stable, so equal scores keep input order).
pub fn rank_candidates(
    candidates: &[String],
    ctx: &DirectoryContext,
    provider: &dyn EmbeddingProvider,
    cfg: &FitConfig,
) -> Result<Vec<CamouflageReport>> {
    if candidates.is_empty() {
        return Err(CamoError::InvalidInput("no candidates given".into()));
    }
    let selection = fit_directory_mixture(ctx, cfg)?;
    let mut reports = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let simple = simple_score(candidate, ctx, provider)?;
        let cluster = score_against_mixture(candidate, ctx, provider, selection.as_ref())?;
        reports.push(CamouflageReport {
            dir_path: ctx.dir_path.clone(),
            candidate: candidate.clone(),
            simple_score: simple,
            cluster_score: cluster.score,
            k_star: cluster.k_star,
            nearest_component: cluster.nearest,
            cluster_fallback: cluster.fallback,
            normalized_simple: 0.0,
            normalized_cluster: 0.0,
        });
    }
    let norm_simple =
        normalize_per_directory(&reports.iter().map(|r| r.simple_score).collect::<Vec<_>>())?;
    let norm_cluster =
        normalize_per_directory(&reports.iter().map(|r| r.cluster_score).collect::<Vec<_>>())?;
    for (r, (ns, nc)) in reports.iter_mut().zip(norm_simple.into_iter().zip(norm_cluster)) {
        r.normalized_simple = ns;
        r.normalized_cluster = nc;
    }
    reports.sort_by(|a, b| a.cluster_score.partial_cmp(&b.cluster_score).unwrap());
    Ok(reports)
}

/// CSV rows for a batch of reports (header included).
pub fn reports_to_csv(reports: &[CamouflageReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dir_path", "candidate", "simple", "cluster", "k_star", "nearest", "norm_simple",
        "norm_cluster",
    ])
    .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    for r in reports {
        w.write_record([
            r.dir_path.as_str(),
            r.candidate.as_str(),
            &format!("{:.6}", r.simple_score),
            &format!("{:.6}", r.cluster_score),
            &r.k_star.map(|k| k.to_string()).unwrap_or_default(),
            &r.nearest_component.map(|c| c.to_string()).unwrap_or_default(),
            &format!("{:.6}", r.normalized_simple),
            &format!("{:.6}", r.normalized_cluster),
        ])
        .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// The 12-filename example directory used throughout the tests and docs.
pub fn example_directory_names() -> Vec<String> {
    [
        "data1.xls",
        "data2.xls",
        "data3.xls",
        "data4.xls",
        "data5.xls",
        "regressions.r",
        "statistics.r",
        "evaluation.r",
        "testing.r",
        "report.pdf",
        "reportv1.pdf",
        "reportv2.pdf",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}
