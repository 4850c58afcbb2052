//! von Mises-Fisher densities and mixture fitting on the unit hypersphere.
//!
//! Mixtures are fit by EM: responsibilities from log-domain densities, mean
//! directions from responsibility-weighted resultants, concentrations from
//! the closed-form estimate sharpened by Newton steps on the exact Bessel
//! ratio. Initialization is seeded farthest-point
//! sampling under cosine distance; the best of several restarts wins by
//! final log-likelihood.

pub mod bessel;

use serde::{Deserialize, Serialize};

use crate::error::{CamoError, Result};
use crate::geometry::{cosine_distance, dot, norm, Embedding};
use crate::rng::{mix64, SplitMix64};
use bessel::{ln_gamma_half, log_bessel_i};

/// Concentrations above this are numerically a point mass.
pub const KAPPA_MAX: f64 = 1e7;

/// A single vMF component: unit mean direction and concentration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VmfComponent {
    pub mu: Embedding,
    pub kappa: f64,
}

/// Mixture of vMF components with normalized weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VmfMixture {
    pub weights: Vec<f64>,
    pub components: Vec<VmfComponent>,
    pub dim: usize,
}

impl VmfMixture {
    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// EM fitting parameters.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 1,
            max_iters: 200,
            tol: 1e-6,
            restarts: 4,
            seed: 42,
        }
    }
}

impl FitConfig {
    pub fn with_k(&self, k: usize) -> FitConfig {
        FitConfig { k, ..self.clone() }
    }
}

/// Serialized form of a fitted mixture (the `fit` command's dump).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureDump {
    pub dim: usize,
    pub k: usize,
    pub weights: Vec<f64>,
    pub components: Vec<VmfComponent>,
    pub log_likelihood: f64,
    pub seed: u64,
}

/// ln C_d(κ), the log normalization constant of the vMF density.
///
/// κ = 0 degenerates to the uniform density on the sphere,
/// Γ(d/2) / (2 π^{d/2}).
pub fn log_norm_constant(d: usize, kappa: f64) -> Result<f64> {
    if d < 2 {
        return Err(CamoError::InvalidInput(format!("dimension {d} < 2")));
    }
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(CamoError::InvalidInput(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if kappa < 1e-12 {
        return Ok(ln_gamma_half(d as u64)
            - std::f64::consts::LN_2
            - d as f64 / 2.0 * std::f64::consts::PI.ln());
    }
    let half_d = d as f64 / 2.0;
    let nu = half_d - 1.0;
    Ok(nu * kappa.ln() - half_d * std::f64::consts::TAU.ln() - log_bessel_i(nu, kappa))
}

/// ln p(x; μ, κ) for a unit vector x.
pub fn log_density(x: &[f64], comp: &VmfComponent) -> Result<f64> {
    if (norm(x) - 1.0).abs() > 1e-6 {
        return Err(CamoError::InvalidInput("log_density requires a unit vector".into()));
    }
    if x.len() != comp.mu.len() {
        return Err(CamoError::Config("dimension mismatch in log_density".into()));
    }
    Ok(log_norm_constant(x.len(), comp.kappa)? + comp.kappa * dot(&comp.mu, x))
}

/// Closed-form concentration estimate from the mean resultant length,
/// κ̂ = (r̄d − r̄³) / (1 − r̄²), clamped to [0, KAPPA_MAX].
pub fn estimate_kappa(r_bar: f64, d: usize) -> Result<f64> {
    if r_bar < 0.0 || !r_bar.is_finite() {
        return Err(CamoError::InvalidInput(format!("r_bar must be >= 0, got {r_bar}")));
    }
    if r_bar >= 1.0 {
        // numerically a point mass
        return Ok(KAPPA_MAX);
    }
    let k = (r_bar * d as f64 - r_bar.powi(3)) / (1.0 - r_bar * r_bar);
    Ok(k.clamp(0.0, KAPPA_MAX))
}

/// Mean resultant length of a vMF with concentration `kappa` in `d`
/// dimensions: A_d(κ) = I_{d/2}(κ) / I_{d/2−1}(κ).
fn mean_resultant_length(d: usize, kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    bessel::bessel_ratio_cf(d as f64 / 2.0, kappa)
}

/// Maximum-likelihood concentration: the closed-form estimate refined by
/// Newton steps on A_d(κ) = r̄, so each EM M-step is an exact maximizer and
/// the log-likelihood stays monotone.
fn kappa_mle(r_bar: f64, d: usize) -> Result<f64> {
    let mut kappa = estimate_kappa(r_bar, d)?;
    if kappa <= 0.0 || kappa >= KAPPA_MAX {
        return Ok(kappa);
    }
    for _ in 0..32 {
        let a = mean_resultant_length(d, kappa);
        // A'(κ) = 1 − A² − (d−1)/κ · A
        let da = 1.0 - a * a - (d as f64 - 1.0) / kappa * a;
        if da.abs() < 1e-300 {
            break;
        }
        let step = (a - r_bar) / da;
        let next = (kappa - step).clamp(kappa * 0.1, KAPPA_MAX);
        if (next - kappa).abs() <= 1e-12 * kappa.max(1.0) {
            kappa = next;
            break;
        }
        kappa = next;
        if kappa >= KAPPA_MAX {
            break;
        }
    }
    Ok(kappa.clamp(0.0, KAPPA_MAX))
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Posterior component probabilities of x under the mixture.
pub fn responsibilities(x: &[f64], mix: &VmfMixture) -> Result<Vec<f64>> {
    if x.len() != mix.dim {
        return Err(CamoError::Config("dimension mismatch in responsibilities".into()));
    }
    let logp: Vec<f64> = mix
        .weights
        .iter()
        .zip(&mix.components)
        .map(|(w, c)| Ok(w.max(1e-300).ln() + log_density(x, c)?))
        .collect::<Result<_>>()?;
    let lse = log_sum_exp(&logp);
    Ok(logp.iter().map(|l| (l - lse).exp()).collect())
}

/// Farthest-point initialization under cosine distance: seeded first pick,
/// then greedy argmax of the min distance to chosen centers.
fn init_means(points: &[Embedding], k: usize, rng: &mut SplitMix64) -> Vec<Embedding> {
    let first = rng.next_below(points.len() as u64) as usize;
    let mut centers = vec![points[first].clone()];
    let mut min_dist: Vec<f64> = points
        .iter()
        .map(|p| cosine_distance(p, &centers[0]).unwrap_or(2.0))
        .collect();
    while centers.len() < k {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        centers.push(points[best].clone());
        for (i, p) in points.iter().enumerate() {
            let d = cosine_distance(p, centers.last().unwrap()).unwrap_or(2.0);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    centers
}

struct EmRun {
    mixture: VmfMixture,
    assignments: Vec<usize>,
    log_likelihood: f64,
    ll_trace: Vec<f64>,
}

fn em_run(points: &[Embedding], cfg: &FitConfig, seed: u64) -> Result<EmRun> {
    let n = points.len();
    let d = points[0].len();
    let k = cfg.k;
    let mut rng = SplitMix64::new(seed);

    let mut mus = init_means(points, k, &mut rng);
    let mut kappas = vec![1.0f64; k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut resp = vec![vec![0.0f64; k]; n];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    let mut ll_trace = Vec::new();

    for _iter in 0..cfg.max_iters {
        // E-step
        let log_c: Vec<f64> = kappas
            .iter()
            .map(|&kap| log_norm_constant(d, kap))
            .collect::<Result<_>>()?;
        ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            let logp: Vec<f64> = (0..k)
                .map(|j| weights[j].max(1e-300).ln() + log_c[j] + kappas[j] * dot(&mus[j], p))
                .collect();
            let lse = log_sum_exp(&logp);
            ll += lse;
            for j in 0..k {
                resp[i][j] = (logp[j] - lse).exp();
            }
        }
        ll_trace.push(ll);
        if (ll - prev_ll).abs() / prev_ll.abs().max(1.0) < cfg.tol {
            break;
        }
        prev_ll = ll;

        // M-step
        for j in 0..k {
            let resp_sum: f64 = (0..n).map(|i| resp[i][j]).sum();
            let mut resultant = vec![0.0f64; d];
            for (i, p) in points.iter().enumerate() {
                for (s, x) in resultant.iter_mut().zip(p) {
                    *s += resp[i][j] * x;
                }
            }
            let res_norm = norm(&resultant);
            if res_norm < 1e-12 || resp_sum < 1e-12 {
                // dead or balanced component: re-seed from the worst-explained point
                let worst = (0..n)
                    .min_by(|&a, &b| {
                        let ma = resp[a].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let mb = resp[b].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        ma.partial_cmp(&mb).unwrap()
                    })
                    .unwrap();
                mus[j] = points[worst].clone();
                kappas[j] = 1.0;
                weights[j] = 1.0 / n as f64;
            } else {
                mus[j] = resultant.iter().map(|v| v / res_norm).collect();
                let r_bar = (res_norm / resp_sum).min(1.0 - 1e-12);
                kappas[j] = kappa_mle(r_bar, d)?;
                weights[j] = resp_sum / n as f64;
            }
        }
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
    }

    let assignments = resp
        .iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect();

    Ok(EmRun {
        mixture: VmfMixture {
            weights,
            components: mus
                .into_iter()
                .zip(kappas)
                .map(|(mu, kappa)| VmfComponent { mu, kappa })
                .collect(),
            dim: d,
        },
        assignments,
        log_likelihood: ll,
        ll_trace,
    })
}

/// Fit a k-component vMF mixture by EM, best of `cfg.restarts` by final
/// log-likelihood. Returns the mixture, hard assignments (argmax
/// responsibility, ties to the lowest index) and the final log-likelihood.
pub fn fit_mixture(
    points: &[Embedding],
    cfg: &FitConfig,
) -> Result<(VmfMixture, Vec<usize>, f64)> {
    let (mix, assign, ll, _) = fit_mixture_traced(points, cfg)?;
    Ok((mix, assign, ll))
}

/// Like [`fit_mixture`], additionally returning the per-iteration
/// log-likelihood trace of the winning restart.
pub fn fit_mixture_traced(
    points: &[Embedding],
    cfg: &FitConfig,
) -> Result<(VmfMixture, Vec<usize>, f64, Vec<f64>)> {
    if cfg.k < 1 {
        return Err(CamoError::InvalidInput("k must be >= 1".into()));
    }
    if points.len() < cfg.k {
        return Err(CamoError::InvalidInput(format!(
            "{} points cannot support k = {}",
            points.len(),
            cfg.k
        )));
    }
    for p in points {
        if (norm(p) - 1.0).abs() > 1e-6 {
            return Err(CamoError::InvalidInput("fit_mixture requires unit vectors".into()));
        }
    }
    let mut best: Option<EmRun> = None;
    for restart in 0..cfg.restarts.max(1) {
        let run = em_run(points, cfg, mix64(cfg.seed ^ (restart as u64).wrapping_mul(0x9E37)))?;
        let better = match &best {
            None => true,
            Some(b) => run.log_likelihood > b.log_likelihood,
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.unwrap();
    Ok((run.mixture, run.assignments, run.log_likelihood, run.ll_trace))
}
