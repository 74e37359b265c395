//! Personalised popularity: per-user item counts and per-split sub-ID
//! counts over the training history, log-smoothed and z-scored over the
//! full candidate item set.

use std::collections::HashMap;

use crate::codebook::Codebook;
use crate::error::Result;

/// Train-window counts for one user: raw item counts plus, per split,
/// how often each sub-ID occurs in the history.
///
/// Both tables conserve the history length: item counts sum to `|S_u|`,
/// and so does every split's sub-ID table (each history item contributes
/// exactly one sub-ID per split).
#[derive(Debug, Clone)]
pub struct UserPopularityProfile {
    user: u32,
    history_len: usize,
    item_counts: HashMap<u32, u32>,
    /// `m` tables of length `V`.
    subid_counts: Vec<Vec<u32>>,
}

impl UserPopularityProfile {
    pub fn user(&self) -> u32 {
        self.user
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    pub fn item_count(&self, item: u32) -> u32 {
        self.item_counts.get(&item).copied().unwrap_or(0)
    }

    pub fn item_counts(&self) -> &HashMap<u32, u32> {
        &self.item_counts
    }

    pub fn subid_count(&self, split: usize, code: u32) -> u32 {
        self.subid_counts[split][code as usize]
    }

    pub fn num_splits(&self) -> usize {
        self.subid_counts.len()
    }
}

/// Count items and sub-IDs over one user's training history.
pub fn build_profile(user: u32, history: &[u32], cb: &Codebook) -> Result<UserPopularityProfile> {
    let mut item_counts: HashMap<u32, u32> = HashMap::new();
    let mut subid_counts = vec![vec![0u32; cb.codebook_size() as usize]; cb.num_splits()];
    for &item in history {
        let code = cb.code_of(item as usize)?;
        *item_counts.entry(item).or_insert(0) += 1;
        for (split, &z) in code.iter().enumerate() {
            subid_counts[split][z as usize] += 1;
        }
    }
    // conservation: every table sums back to the history length
    debug_assert_eq!(
        item_counts.values().map(|&c| c as usize).sum::<usize>(),
        history.len()
    );
    debug_assert!(subid_counts.iter().all(|table| table
        .iter()
        .map(|&c| c as usize)
        .sum::<usize>()
        == history.len()));
    Ok(UserPopularityProfile {
        user,
        history_len: history.len(),
        item_counts,
        subid_counts,
    })
}

/// Log transform with additive smoothing: `ln(count + epsilon)`.
#[inline]
pub fn smoothed_log(count: f64, epsilon: f64) -> f64 {
    debug_assert!(epsilon > 0.0);
    (count + epsilon).ln()
}

/// Item-level personalised popularity, before standardisation.
pub fn pps_raw(profile: &UserPopularityProfile, item: u32, epsilon: f64) -> f64 {
    smoothed_log(profile.item_count(item) as f64, epsilon)
}

/// Sub-ID-level personalised popularity: sum over the splits of the
/// smoothed log of the user's count for the item's sub-ID there.
pub fn spps_raw(
    profile: &UserPopularityProfile,
    item: usize,
    cb: &Codebook,
    epsilon: f64,
) -> Result<f64> {
    debug_assert_eq!(profile.num_splits(), cb.num_splits());
    let code = cb.code_of(item)?;
    Ok(code
        .iter()
        .enumerate()
        .map(|(split, &z)| smoothed_log(profile.subid_count(split, z) as f64, epsilon))
        .sum())
}

/// Z-scored values with the moments they were derived from.
#[derive(Debug, Clone)]
pub struct StandardizedScores {
    pub values: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

/// Z-score over the full candidate set using the population standard
/// deviation. A constant input has no spread to normalise, so it maps to
/// all-exact-zeros with `sigma` recorded as 0.
pub fn standardize(raw: &[f64]) -> StandardizedScores {
    assert!(!raw.is_empty(), "standardize requires at least one value");
    let n = raw.len() as f64;
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mu = raw.iter().sum::<f64>() / n;
    if min == max {
        return StandardizedScores {
            values: vec![0.0; raw.len()],
            mu,
            sigma: 0.0,
        };
    }
    let sigma = (raw.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n).sqrt();
    let inv = 1.0 / sigma;
    StandardizedScores {
        values: raw.iter().map(|x| (x - mu) * inv).collect(),
        mu,
        sigma,
    }
}

/// Standardised PPS over the whole catalogue for one user.
pub fn pps_std(
    profile: &UserPopularityProfile,
    num_items: usize,
    epsilon: f64,
) -> StandardizedScores {
    let zero = smoothed_log(0.0, epsilon);
    let mut raw = vec![zero; num_items];
    for (&item, &count) in profile.item_counts() {
        raw[item as usize] = smoothed_log(count as f64, epsilon);
    }
    standardize(&raw)
}

/// Standardised sPPS over the whole catalogue for one user. The per-split
/// log table is precomputed so the per-item work is `m` adds.
pub fn spps_std(
    profile: &UserPopularityProfile,
    cb: &Codebook,
    epsilon: f64,
) -> Result<StandardizedScores> {
    debug_assert_eq!(profile.num_splits(), cb.num_splits());
    let log_table: Vec<Vec<f64>> = (0..cb.num_splits())
        .map(|split| {
            (0..cb.codebook_size())
                .map(|code| smoothed_log(profile.subid_count(split, code) as f64, epsilon))
                .collect()
        })
        .collect();
    let mut raw = Vec::with_capacity(cb.num_items());
    for item in 0..cb.num_items() {
        let code = cb.code_of(item)?;
        raw.push(
            code.iter()
                .enumerate()
                .map(|(split, &z)| log_table[split][z as usize])
                .sum(),
        );
    }
    Ok(standardize(&raw))
}
