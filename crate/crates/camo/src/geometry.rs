//! Cosine / spherical primitives shared by the metric and clustering code.

use crate::error::{CamoError, Result};

/// A point in the semantic vector space.
pub type Embedding = Vec<f64>;

/// Mean direction of a sample of unit vectors.
#[derive(Debug, Clone)]
pub struct MeanDirection {
    /// Unit mean direction.
    pub mu: Embedding,
    /// Mean resultant length, `‖Σxᵢ‖ / n`, in [0, 1].
    pub r_bar: f64,
    /// Sample count.
    pub n: usize,
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Cosine distance `1 − cos θ`, clamped to [0, 2].
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(CamoError::Config(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let nx = norm(x);
    let ny = norm(y);
    if nx < 1e-12 || ny < 1e-12 {
        return Err(CamoError::DegenerateVector);
    }
    // clamp the cosine first so downstream code can rely on the range
    let cos = (dot(x, y) / (nx * ny)).clamp(-1.0, 1.0);
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

/// `x / ‖x‖`.
pub fn l2_normalize(x: &[f64]) -> Result<Embedding> {
    let n = norm(x);
    if n < 1e-12 {
        return Err(CamoError::DegenerateVector);
    }
    Ok(x.iter().map(|v| v / n).collect())
}

/// Normalized sum of unit vectors plus the mean resultant length.
///
/// Fails with `DegenerateMean` when the inputs cancel (balanced antipodal
/// sample); the caller decides the fallback.
pub fn mean_direction(vectors: &[Embedding]) -> Result<MeanDirection> {
    if vectors.is_empty() {
        return Err(CamoError::InvalidInput("mean_direction of empty set".into()));
    }
    let dim = vectors[0].len();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(CamoError::Config("mixed dimensions in mean_direction".into()));
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let resultant = norm(&sum);
    if resultant < 1e-12 {
        return Err(CamoError::DegenerateMean);
    }
    let mu = sum.iter().map(|s| s / resultant).collect();
    Ok(MeanDirection {
        mu,
        r_bar: resultant / vectors.len() as f64,
        n: vectors.len(),
    })
}
