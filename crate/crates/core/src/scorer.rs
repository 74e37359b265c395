//! Base sequential-recommendation logits behind a pluggable interface:
//! non-neural baselines plus a loader for externally computed logits.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;

use crate::codebook::{reconstruct_embedding, Codebook, SubEmbeddingTable};
use crate::dataset::EventLog;
use crate::error::{Result, SubpopError};

/// Floor for log-probabilities of never-observed outcomes; keeps fused
/// arithmetic finite while preserving ranking.
pub const LOG_FLOOR: f64 = -50.0;

#[derive(Debug, Clone)]
pub struct ScorerOutput {
    /// One logit per catalogue item; always finite.
    pub logits: Vec<f64>,
    /// True when the scorer had no usable signal for this user and fell
    /// back to global popularity.
    pub cold_start: bool,
}

/// Produces base logits over the full catalogue for one user. Scorers are
/// immutable once built and safe to call concurrently.
pub trait BaseScorer: Send + Sync {
    fn score(&self, user: u32, history: &[u32]) -> Result<ScorerOutput>;

    fn name(&self) -> &str;

    /// Hook for scorers with per-user stored state; the default has
    /// nothing to check.
    fn validate_coverage(&self, _users: &[u32], _log: &EventLog) -> Result<()> {
        Ok(())
    }
}

/// `ln(1 + global train count)`, identical for every user.
pub struct GlobalPopularityScorer {
    logits: Vec<f64>,
}

pub fn global_popularity_scorer(train: &EventLog) -> Result<GlobalPopularityScorer> {
    if train.num_events() == 0 {
        return Err(SubpopError::EmptyLog);
    }
    let logits = train
        .item_event_counts()
        .into_iter()
        .map(|c| (1.0 + c as f64).ln())
        .collect();
    Ok(GlobalPopularityScorer { logits })
}

impl BaseScorer for GlobalPopularityScorer {
    fn score(&self, _user: u32, _history: &[u32]) -> Result<ScorerOutput> {
        Ok(ScorerOutput {
            logits: self.logits.clone(),
            cold_start: false,
        })
    }

    fn name(&self) -> &str {
        "globalpop"
    }
}

/// First-order transition model pooled over all users, additively
/// smoothed. Users whose last item was never observed as a transition
/// source fall back to global popularity, flagged as cold starts.
pub struct MarkovScorer {
    rows: HashMap<u32, Vec<(u32, u64)>>,
    row_totals: HashMap<u32, u64>,
    smoothing: f64,
    num_items: usize,
    fallback: GlobalPopularityScorer,
}

pub fn markov_scorer(train: &EventLog, smoothing: f64) -> Result<MarkovScorer> {
    if train.num_events() == 0 {
        return Err(SubpopError::EmptyLog);
    }
    if smoothing < 0.0 {
        return Err(SubpopError::InvalidArgument(
            "markov smoothing must be non-negative".into(),
        ));
    }
    let mut counts: HashMap<u32, HashMap<u32, u64>> = HashMap::new();
    for u in 0..train.num_users() {
        for pair in train.history(u).windows(2) {
            *counts
                .entry(pair[0].item)
                .or_default()
                .entry(pair[1].item)
                .or_insert(0) += 1;
        }
    }
    let mut rows = HashMap::with_capacity(counts.len());
    let mut row_totals = HashMap::with_capacity(counts.len());
    for (src, dsts) in counts {
        let total: u64 = dsts.values().sum();
        let mut row: Vec<(u32, u64)> = dsts.into_iter().collect();
        row.sort_unstable_by_key(|&(item, _)| item);
        rows.insert(src, row);
        row_totals.insert(src, total);
    }
    Ok(MarkovScorer {
        rows,
        row_totals,
        smoothing,
        num_items: train.num_items(),
        fallback: global_popularity_scorer(train)?,
    })
}

impl BaseScorer for MarkovScorer {
    fn score(&self, user: u32, history: &[u32]) -> Result<ScorerOutput> {
        let source = history.last().copied();
        let total = source
            .and_then(|s| self.row_totals.get(&s))
            .copied()
            .unwrap_or(0);
        if total == 0 {
            let mut out = self.fallback.score(user, history)?;
            out.cold_start = true;
            return Ok(out);
        }
        let source = source.unwrap();
        let denom = total as f64 + self.smoothing * self.num_items as f64;
        let unseen = if self.smoothing > 0.0 {
            ((self.smoothing / denom).ln()).max(LOG_FLOOR)
        } else {
            LOG_FLOOR
        };
        let mut logits = vec![unseen; self.num_items];
        for &(item, count) in &self.rows[&source] {
            let p = (count as f64 + self.smoothing) / denom;
            logits[item as usize] = p.ln().max(LOG_FLOOR);
        }
        Ok(ScorerOutput {
            logits,
            cold_start: false,
        })
    }

    fn name(&self) -> &str {
        "markov"
    }
}

/// Dot product between the mean reconstructed embedding of the user's
/// recent history and every item's reconstructed embedding.
pub struct SvdDotScorer {
    embeddings: Vec<f64>,
    dim: usize,
    num_items: usize,
    history_window: usize,
}

pub fn svd_dot_scorer(
    cb: &Codebook,
    table: &SubEmbeddingTable,
    history_window: usize,
) -> Result<SvdDotScorer> {
    if history_window == 0 {
        return Err(SubpopError::InvalidArgument(
            "history window must be at least 1".into(),
        ));
    }
    let dim = cb.dim();
    let num_items = cb.num_items();
    let rows: Vec<Vec<f64>> = (0..num_items)
        .into_par_iter()
        .map(|item| reconstruct_embedding(cb, table, item))
        .collect::<Result<_>>()?;
    let mut embeddings = Vec::with_capacity(num_items * dim);
    for row in rows {
        embeddings.extend_from_slice(&row);
    }
    Ok(SvdDotScorer {
        embeddings,
        dim,
        num_items,
        history_window,
    })
}

impl SvdDotScorer {
    fn embedding(&self, item: usize) -> &[f64] {
        &self.embeddings[item * self.dim..(item + 1) * self.dim]
    }
}

impl BaseScorer for SvdDotScorer {
    fn score(&self, _user: u32, history: &[u32]) -> Result<ScorerOutput> {
        let recent = &history[history.len().saturating_sub(self.history_window)..];
        let mut user_vec = vec![0.0; self.dim];
        for &item in recent {
            if item as usize >= self.num_items {
                return Err(SubpopError::IndexOutOfRange {
                    index: item as usize,
                    len: self.num_items,
                });
            }
            for (acc, &x) in user_vec.iter_mut().zip(self.embedding(item as usize)) {
                *acc += x;
            }
        }
        if !recent.is_empty() {
            let inv = 1.0 / recent.len() as f64;
            user_vec.iter_mut().for_each(|x| *x *= inv);
        }
        let logits = (0..self.num_items)
            .map(|i| {
                self.embedding(i)
                    .iter()
                    .zip(&user_vec)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(ScorerOutput {
            logits,
            cold_start: false,
        })
    }

    fn name(&self) -> &str {
        "svddot"
    }
}

/// Per-user logits loaded from a file; the bridge for scoring with an
/// externally trained model.
pub struct ExternalLogitsScorer {
    per_user: HashMap<u32, Vec<f64>>,
    name: String,
}

/// Load external logits in either of two layouts:
///
/// * dense — `user<TAB>s_1,...,s_n` with comma-separated scores covering
///   the whole catalogue;
/// * sparse — a `#default<TAB>value` header followed by
///   `user<TAB>item<TAB>score` triples; unlisted pairs take the default.
pub fn load_external_logits(path: &Path, log: &EventLog) -> Result<ExternalLogitsScorer> {
    let reader = BufReader::new(File::open(path)?);
    let n = log.num_items();
    let mut per_user: HashMap<u32, Vec<f64>> = HashMap::new();
    let mut sparse_default: Option<f64> = None;
    let mut saw_data = false;
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] == "#default" {
            if fields.len() != 2 || saw_data {
                return Err(SubpopError::Parse {
                    row,
                    reason: "#default must be a single value before any data row".into(),
                });
            }
            let value: f64 = fields[1].parse().map_err(|_| SubpopError::Parse {
                row,
                reason: format!("invalid default value {:?}", fields[1]),
            })?;
            if !value.is_finite() {
                return Err(SubpopError::NonFiniteScore { row });
            }
            sparse_default = Some(value);
            continue;
        }
        saw_data = true;
        match fields.len() {
            2 => {
                let user = log
                    .user_dense(fields[0])
                    .ok_or_else(|| SubpopError::Parse {
                        row,
                        reason: format!("unknown user id {:?}", fields[0]),
                    })?;
                let mut scores = Vec::with_capacity(n);
                for part in fields[1].split(',') {
                    let value: f64 = part.trim().parse().map_err(|_| SubpopError::Parse {
                        row,
                        reason: format!("invalid score {part:?}"),
                    })?;
                    if !value.is_finite() {
                        return Err(SubpopError::NonFiniteScore { row });
                    }
                    scores.push(value);
                }
                if scores.len() != n {
                    return Err(SubpopError::Parse {
                        row,
                        reason: format!("expected {n} scores, found {}", scores.len()),
                    });
                }
                per_user.insert(user, scores);
            }
            3 => {
                let default = sparse_default.ok_or_else(|| SubpopError::Parse {
                    row,
                    reason: "sparse logits require a #default header line".into(),
                })?;
                let user = log
                    .user_dense(fields[0])
                    .ok_or_else(|| SubpopError::Parse {
                        row,
                        reason: format!("unknown user id {:?}", fields[0]),
                    })?;
                let item = log
                    .item_dense(fields[1])
                    .ok_or_else(|| SubpopError::Parse {
                        row,
                        reason: format!("unknown item id {:?}", fields[1]),
                    })?;
                let value: f64 = fields[2].parse().map_err(|_| SubpopError::Parse {
                    row,
                    reason: format!("invalid score {:?}", fields[2]),
                })?;
                if !value.is_finite() {
                    return Err(SubpopError::NonFiniteScore { row });
                }
                per_user.entry(user).or_insert_with(|| vec![default; n])[item as usize] = value;
            }
            other => {
                return Err(SubpopError::Parse {
                    row,
                    reason: format!("expected 2 or 3 fields, found {other}"),
                });
            }
        }
    }
    if per_user.is_empty() {
        return Err(SubpopError::EmptyLog);
    }
    Ok(ExternalLogitsScorer {
        per_user,
        name: format!("external:{}", path.display()),
    })
}

impl BaseScorer for ExternalLogitsScorer {
    fn score(&self, user: u32, _history: &[u32]) -> Result<ScorerOutput> {
        let logits = self
            .per_user
            .get(&user)
            .cloned()
            .ok_or_else(|| SubpopError::MissingUser(format!("dense index {user}")))?;
        Ok(ScorerOutput {
            logits,
            cold_start: false,
        })
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn validate_coverage(&self, users: &[u32], log: &EventLog) -> Result<()> {
        for &u in users {
            if !self.per_user.contains_key(&u) {
                return Err(SubpopError::MissingUser(
                    log.user_id(u as usize).to_string(),
                ));
            }
        }
        Ok(())
    }
}
