//! Convex combination of base logits with the standardized popularity
//! signals, and deterministic top-k ranking.

use crate::error::{Result, SubpopError};

/// Validated `(alpha, beta)` pair with the derived complement weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl FusionWeights {
    /// Requires `alpha, beta in [0, 1]` and `alpha + beta <= 1` (a tiny
    /// tolerance absorbs representation error in sums of grid steps).
    pub fn new(alpha: f64, beta: f64) -> Result<FusionWeights> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(alpha) || !in_unit(beta) || alpha + beta > 1.0 + 1e-9 {
            return Err(SubpopError::WeightViolation { alpha, beta });
        }
        Ok(FusionWeights {
            alpha,
            beta,
            gamma: (1.0 - alpha - beta).max(0.0),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `gamma * base + alpha * pps_std + beta * spps_std`, element-wise.
pub fn fuse(
    base: &[f64],
    pps_std: &[f64],
    spps_std: &[f64],
    weights: &FusionWeights,
) -> Result<Vec<f64>> {
    if base.len() != pps_std.len() || base.len() != spps_std.len() {
        return Err(SubpopError::DimensionMismatch(format!(
            "fuse inputs have lengths {}, {}, {}",
            base.len(),
            pps_std.len(),
            spps_std.len()
        )));
    }
    let (a, b, g) = (weights.alpha, weights.beta, weights.gamma);
    Ok(base
        .iter()
        .zip(pps_std)
        .zip(spps_std)
        .map(|((&x, &p), &s)| g * x + a * p + b * s)
        .collect())
}

/// All four per-user score vectors for one `(alpha, beta)` point.
#[derive(Debug, Clone)]
pub struct ScoreVector {
    pub base: Vec<f64>,
    pub pps_std: Vec<f64>,
    pub spps_std: Vec<f64>,
    pub fused: Vec<f64>,
}

impl ScoreVector {
    pub fn fuse(
        base: Vec<f64>,
        pps_std: Vec<f64>,
        spps_std: Vec<f64>,
        weights: &FusionWeights,
    ) -> Result<ScoreVector> {
        let fused = fuse(&base, &pps_std, &spps_std, weights)?;
        Ok(ScoreVector {
            base,
            pps_std,
            spps_std,
            fused,
        })
    }
}

/// Indices of the `k` largest scores, descending, ties broken by
/// ascending item index.
pub fn rank_top_k(scores: &[f64], k: usize) -> Vec<u32> {
    assert!(k <= scores.len(), "rank_top_k: k exceeds candidate count");
    if k == 0 {
        return Vec::new();
    }
    let better = |a: u32, b: u32| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    };
    let mut idx: Vec<u32> = (0..scores.len() as u32).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| better(a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| better(a, b));
    idx
}
