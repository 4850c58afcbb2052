//! Cosine silhouette scoring and selection of the mixture order k*.

use std::collections::BTreeMap;

use crate::error::{CamoError, Result};
use crate::geometry::{cosine_distance, Embedding};
use crate::vmf::{fit_mixture, FitConfig, VmfMixture};

/// Per-point silhouette values and their mean for one clustering.
#[derive(Debug, Clone)]
pub struct SilhouetteResult {
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub k: usize,
}

/// Outcome of searching k over a range by mean silhouette.
#[derive(Debug)]
pub struct KSelection {
    pub k_star: usize,
    pub mixture: VmfMixture,
    pub assignments: Vec<usize>,
    /// Mean silhouette per candidate k; collapsed fits record -1.
    pub ms_by_k: BTreeMap<usize, f64>,
    /// Set when every candidate k collapsed to fewer than 2 clusters.
    pub collapse_warning: bool,
}

/// Silhouette scores under cosine distance on a hard partition.
///
/// Singleton clusters score 0 by convention, as does the 0/0 case where a
/// point is at distance 0 from both its own and the nearest other cluster.
pub fn silhouette_scores(points: &[Embedding], assignments: &[usize]) -> Result<SilhouetteResult> {
    let n = points.len();
    if n < 2 || assignments.len() != n {
        return Err(CamoError::InvalidInput(
            "silhouette needs >= 2 points with one assignment each".into(),
        ));
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &a) in assignments.iter().enumerate() {
        clusters.entry(a).or_default().push(i);
    }
    if clusters.len() < 2 {
        return Err(CamoError::InvalidInput("silhouette needs >= 2 clusters".into()));
    }

    let mut per_point = vec![0.0; n];
    for (i, point) in points.iter().enumerate() {
        let own = &clusters[&assignments[i]];
        if own.len() == 1 {
            per_point[i] = 0.0;
            continue;
        }
        let a = own
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| cosine_distance(point, &points[j]))
            .sum::<Result<f64>>()?
            / (own.len() - 1) as f64;
        let mut b = f64::INFINITY;
        for (label, members) in &clusters {
            if *label == assignments[i] {
                continue;
            }
            let mean = members
                .iter()
                .map(|&j| cosine_distance(point, &points[j]))
                .sum::<Result<f64>>()?
                / members.len() as f64;
            if mean < b {
                b = mean;
            }
        }
        let denom = a.max(b);
        per_point[i] = if denom <= 0.0 { 0.0 } else { (b - a) / denom };
    }
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteResult { per_point, mean, k: clusters.len() })
}

/// Fit mixtures for every k in [k_min, k_max] and keep the one with the best
/// mean silhouette (ties to the smallest k).
pub fn select_k(
    points: &[Embedding],
    k_min: usize,
    k_max: usize,
    cfg: &FitConfig,
) -> Result<KSelection> {
    if points.len() < 3 {
        return Err(CamoError::InvalidInput("select_k needs at least 3 points".into()));
    }
    if k_min < 2 {
        return Err(CamoError::InvalidInput("k_min must be >= 2".into()));
    }
    let k_max = k_max.min(points.len() - 1);
    if k_max < k_min {
        return Err(CamoError::InvalidInput(format!(
            "empty k range [{k_min}, {k_max}] for {} points",
            points.len()
        )));
    }

    let mut ms_by_k = BTreeMap::new();
    let mut best: Option<(f64, usize, VmfMixture, Vec<usize>)> = None;
    let mut fallback: Option<(usize, VmfMixture, Vec<usize>)> = None;
    for k in k_min..=k_max {
        let (mixture, assignments, _) = fit_mixture(points, &cfg.with_k(k))?;
        let distinct = {
            let mut labels: Vec<usize> = assignments.clone();
            labels.sort_unstable();
            labels.dedup();
            labels.len()
        };
        let ms = if distinct < 2 {
            -1.0
        } else {
            silhouette_scores(points, &assignments)?.mean
        };
        ms_by_k.insert(k, ms);
        if fallback.is_none() {
            fallback = Some((k, mixture.clone(), assignments.clone()));
        }
        let better = match &best {
            None => ms > -1.0,
            Some((best_ms, ..)) => ms > *best_ms,
        };
        if better {
            best = Some((ms, k, mixture, assignments));
        }
    }

    match best {
        Some((_, k_star, mixture, assignments)) => Ok(KSelection {
            k_star,
            mixture,
            assignments,
            ms_by_k,
            collapse_warning: false,
        }),
        None => {
            // every fit collapsed; fall back to k_min and say so
            let (k_star, mixture, assignments) = fallback.unwrap();
            Ok(KSelection { k_star, mixture, assignments, ms_by_k, collapse_warning: true })
        }
    }
}
