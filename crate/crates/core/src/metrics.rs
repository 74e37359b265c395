//! Ranking metrics: NDCG@K over graded test relevance and personalised
//! Novelty@K from the user's own consumption frequencies.
//!
//! Relevance grades come from test-window events (like=2, play=1,
//! skip=-1, dislike=-2). Per user and item, the label with the greatest
//! absolute value is kept; on ties the later event wins. Negative grades
//! are clamped to zero inside the DCG sums.

use std::collections::HashMap;

use crate::dataset::EventLog;
use crate::error::{Result, SubpopError};
use crate::popularity::UserPopularityProfile;

/// Default clamp for the user-conditional probability in Novelty@K.
pub const NOVELTY_EPSILON: f64 = 1e-8;

/// Per-user graded relevance maps built from the test window.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceProfile {
    per_user: Vec<HashMap<u32, i32>>,
}

impl RelevanceProfile {
    pub fn grades(&self, user: usize) -> &HashMap<u32, i32> {
        &self.per_user[user]
    }

    pub fn num_users(&self) -> usize {
        self.per_user.len()
    }

    /// Users with at least one graded test item.
    pub fn has_grades(&self, user: usize) -> bool {
        !self.per_user[user].is_empty()
    }
}

/// Deduplicate test events into one grade per (user, item).
pub fn build_relevance(test: &EventLog) -> RelevanceProfile {
    let per_user = (0..test.num_users())
        .map(|u| {
            let mut grades: HashMap<u32, i32> = HashMap::new();
            // history is (timestamp, input-order) sorted, so replacing on
            // ties implements "the later event wins"
            for ev in test.history(u) {
                let grade = ev.event_type.relevance_grade();
                match grades.entry(ev.item) {
                    std::collections::hash_map::Entry::Occupied(mut slot) => {
                        if grade.abs() >= slot.get().abs() {
                            slot.insert(grade);
                        }
                    }
                    std::collections::hash_map::Entry::Vacant(slot) => {
                        slot.insert(grade);
                    }
                }
            }
            grades
        })
        .collect();
    RelevanceProfile { per_user }
}

#[inline]
fn gain(grade: i32) -> f64 {
    grade.max(0) as f64
}

#[inline]
fn discount(rank: usize) -> f64 {
    // rank is 1-based
    ((rank + 1) as f64).log2()
}

/// DCG of the ideal ordering: the user's positive grades sorted
/// descending, truncated at `k`.
pub fn ideal_dcg(rel: &HashMap<u32, i32>, k: usize) -> f64 {
    let mut ideal: Vec<f64> = rel
        .values()
        .map(|&g| gain(g))
        .filter(|&g| g > 0.0)
        .collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g / discount(i + 1))
        .sum()
}

/// NDCG@K for one user. Returns `None` when the user has no positive
/// grades (IDCG = 0), which callers must report as an exclusion rather
/// than a zero.
pub fn ndcg_at_k(recs: &[u32], rel: &HashMap<u32, i32>, k: usize) -> Result<Option<f64>> {
    assert!(k <= recs.len(), "ndcg_at_k: k exceeds recommendation list");
    let mut seen = std::collections::HashSet::with_capacity(recs.len());
    for &item in recs {
        if !seen.insert(item) {
            return Err(SubpopError::DuplicateInRecs {
                item: item as usize,
            });
        }
    }
    let idcg = ideal_dcg(rel, k);
    if idcg == 0.0 {
        return Ok(None);
    }
    let dcg: f64 = recs
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, item)| gain(rel.get(item).copied().unwrap_or(0)) / discount(i + 1))
        .sum();
    Ok(Some(dcg / idcg))
}

/// Novelty@K: mean over the top-k of `-log2(p(i|u))` where `p(i|u)` is
/// the user's relative train frequency for the item, clamped below by
/// `epsilon`.
pub fn novelty_at_k(
    recs: &[u32],
    profile: &UserPopularityProfile,
    k: usize,
    epsilon: f64,
) -> Result<f64> {
    assert!(
        k <= recs.len(),
        "novelty_at_k: k exceeds recommendation list"
    );
    assert!(epsilon > 0.0, "novelty epsilon must be positive");
    let total = profile.history_len();
    if total == 0 {
        return Err(SubpopError::EmptyHistory);
    }
    let total = total as f64;
    let sum: f64 = recs
        .iter()
        .take(k)
        .map(|&item| {
            let p = (profile.item_count(item) as f64 / total).max(epsilon);
            -p.log2()
        })
        .sum();
    Ok(sum / k as f64)
}

/// Aggregated metrics for one `(alpha, beta)` point: arithmetic means
/// over the evaluated users plus the per-user vectors behind them.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub k: usize,
    pub ndcg_at_k: f64,
    pub novelty_at_k: f64,
    pub per_user_ndcg: Vec<f64>,
    pub per_user_novelty: Vec<f64>,
    pub users_evaluated: usize,
    pub users_excluded: usize,
}

impl MetricReport {
    /// Fixed-order mean over `(ndcg, novelty)` pairs, one per evaluated
    /// user.
    pub fn from_per_user(k: usize, pairs: &[(f64, f64)], users_excluded: usize) -> MetricReport {
        let n = pairs.len();
        let (ndcg_sum, novelty_sum) = pairs
            .iter()
            .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        MetricReport {
            k,
            ndcg_at_k: if n > 0 { ndcg_sum / n as f64 } else { 0.0 },
            novelty_at_k: if n > 0 { novelty_sum / n as f64 } else { 0.0 },
            per_user_ndcg: pairs.iter().map(|p| p.0).collect(),
            per_user_novelty: pairs.iter().map(|p| p.1).collect(),
            users_evaluated: n,
            users_excluded,
        }
    }
}
