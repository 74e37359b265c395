//! End-to-end sweep over the `(alpha, beta)` grid: fuse, rank, and score
//! every grid point for every evaluated user, then aggregate.
//!
//! Users are evaluated when they have a training history, at least one
//! test event, and at least one positive test grade; everyone else in
//! the test window is counted as excluded, never silently dropped.
//! User-level work runs in parallel; aggregation is a fixed-order
//! reduction over the user list, so reports are byte-identical for any
//! thread count.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::codebook::Codebook;
use crate::dataset::TemporalSplit;
use crate::error::{Result, SubpopError};
use crate::fusion::{fuse, rank_top_k, FusionWeights};
use crate::metrics::{build_relevance, ndcg_at_k, novelty_at_k, MetricReport, RelevanceProfile};
use crate::popularity::{build_profile, pps_std, spps_std, standardize, UserPopularityProfile};
use crate::rng::SplitMix64;
use crate::scorer::BaseScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepMode {
    PpsOnly,
    SppsOnly,
    Combined,
}

impl SweepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::PpsOnly => "pps-only",
            SweepMode::SppsOnly => "spps-only",
            SweepMode::Combined => "combined",
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated list of `(alpha, beta)` grid points for one sweep mode.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    mode: SweepMode,
    points: Vec<FusionWeights>,
}

/// Default sweep grid `{0, 0.1, ..., 0.9}`.
pub fn default_grid() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

/// Default alpha grid for combined mode: ten evenly spaced points from 0
/// to `1 - fixed_beta`, so every pair stays a convex combination.
pub fn default_combined_alpha_grid(fixed_beta: f64) -> Vec<f64> {
    let max_alpha = (1.0 - fixed_beta).max(0.0);
    (0..10).map(|i| max_alpha * i as f64 / 9.0).collect()
}

impl SweepSpec {
    fn build(mode: SweepMode, pairs: Vec<(f64, f64)>) -> Result<SweepSpec> {
        if pairs.is_empty() {
            return Err(SubpopError::InvalidArgument("empty sweep grid".into()));
        }
        let points = pairs
            .into_iter()
            .map(|(a, b)| FusionWeights::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepSpec { mode, points })
    }

    /// Sweep alpha with beta fixed at 0.
    pub fn pps_only(alpha_grid: &[f64]) -> Result<SweepSpec> {
        SweepSpec::build(
            SweepMode::PpsOnly,
            alpha_grid.iter().map(|&a| (a, 0.0)).collect(),
        )
    }

    /// Sweep beta with alpha fixed at 0.
    pub fn spps_only(beta_grid: &[f64]) -> Result<SweepSpec> {
        SweepSpec::build(
            SweepMode::SppsOnly,
            beta_grid.iter().map(|&b| (0.0, b)).collect(),
        )
    }

    /// Sweep alpha with a fixed beta; every pair must still satisfy
    /// `alpha + beta <= 1`.
    pub fn combined(alpha_grid: &[f64], fixed_beta: f64) -> Result<SweepSpec> {
        SweepSpec::build(
            SweepMode::Combined,
            alpha_grid.iter().map(|&a| (a, fixed_beta)).collect(),
        )
    }

    pub fn mode(&self) -> SweepMode {
        self.mode
    }

    pub fn points(&self) -> &[FusionWeights] {
        &self.points
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExclusionCounts {
    /// Test-window users with no training history.
    pub no_train_history: usize,
    /// Users with training history and test events but no positive grade.
    pub no_positive_grades: usize,
}

impl ExclusionCounts {
    pub fn total(&self) -> usize {
        self.no_train_history + self.no_positive_grades
    }
}

/// One report row: a grid point with its aggregate metrics.
#[derive(Debug, Clone)]
pub struct TradeoffRow {
    pub mode: SweepMode,
    pub alpha: f64,
    pub beta: f64,
    pub ndcg: f64,
    pub novelty: f64,
    pub users_evaluated: usize,
    pub users_excluded: usize,
}

/// Sweep output: rows plus the cached per-user metric vectors, so
/// threshold tables and plots never re-rank.
#[derive(Debug, Clone)]
pub struct TradeoffReport {
    pub k: usize,
    pub rows: Vec<TradeoffRow>,
    pub reports: Vec<MetricReport>,
    pub evaluated_users: Vec<u32>,
    pub exclusions: ExclusionCounts,
    pub cold_start_fallbacks: usize,
}

impl TradeoffReport {
    /// Append another sweep's rows (e.g. to overlay modes in one plot).
    pub fn extend(&mut self, other: TradeoffReport) -> Result<()> {
        if other.k != self.k {
            return Err(SubpopError::InvalidArgument(format!(
                "cannot merge reports with k={} and k={}",
                self.k, other.k
            )));
        }
        self.rows.extend(other.rows);
        self.reports.extend(other.reports);
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "alpha\tbeta\tndcg@{k}\tnovelty@{k}\tusers_evaluated\tusers_excluded\n",
            k = self.k
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\n",
                row.alpha, row.beta, row.ndcg, row.novelty, row.users_evaluated, row.users_excluded
            ));
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_tsv().as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub k: usize,
    pub pps_epsilon: f64,
    pub novelty_epsilon: f64,
    /// Apply z-scoring to the base logits before fusion (off by default:
    /// raw logits are combined with standardized popularity scores).
    pub standardize_logits: bool,
    /// Subsample the evaluated users to this many, when set.
    pub eval_users: Option<usize>,
    pub subsample_seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            k: 40,
            pps_epsilon: 1.0,
            novelty_epsilon: crate::metrics::NOVELTY_EPSILON,
            standardize_logits: false,
            eval_users: None,
            subsample_seed: 0,
        }
    }
}

/// Users eligible for evaluation, ascending, plus exclusion counts over
/// the test-window population.
fn eligible_users(
    split: &TemporalSplit,
    relevance: &RelevanceProfile,
) -> (Vec<u32>, ExclusionCounts) {
    let mut users = Vec::new();
    let mut exclusions = ExclusionCounts::default();
    for u in 0..split.test.num_users() {
        if split.test.history(u).is_empty() {
            continue; // not in the test window at all
        }
        if split.train.history(u).is_empty() {
            exclusions.no_train_history += 1;
            continue;
        }
        let has_positive = relevance.grades(u).values().any(|&g| g > 0);
        if !has_positive {
            exclusions.no_positive_grades += 1;
            continue;
        }
        users.push(u as u32);
    }
    (users, exclusions)
}

/// Deterministic subsample: Fisher-Yates under the stated splitmix
/// generator, then re-sorted ascending.
fn subsample_users(users: &mut Vec<u32>, n: usize, seed: u64) {
    if n >= users.len() {
        return;
    }
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(users);
    users.truncate(n);
    users.sort_unstable();
}

struct UserSignals {
    profile: UserPopularityProfile,
    base: Vec<f64>,
    pps: Vec<f64>,
    spps: Vec<f64>,
    cold_start: bool,
}

fn user_signals(
    split: &TemporalSplit,
    cb: &Codebook,
    scorer: &dyn BaseScorer,
    opts: &SweepOptions,
    user: u32,
) -> Result<UserSignals> {
    let history: Vec<u32> = split
        .train
        .history(user as usize)
        .iter()
        .map(|ev| ev.item)
        .collect();
    let profile = build_profile(user, &history, cb)?;
    let output = scorer.score(user, &history)?;
    let base = if opts.standardize_logits {
        standardize(&output.logits).values
    } else {
        output.logits
    };
    let pps = pps_std(&profile, cb.num_items(), opts.pps_epsilon).values;
    let spps = spps_std(&profile, cb, opts.pps_epsilon)?.values;
    Ok(UserSignals {
        profile,
        base,
        pps,
        spps,
        cold_start: output.cold_start,
    })
}

/// Evaluate every grid point over every eligible user.
pub fn run_sweep(
    split: &TemporalSplit,
    cb: &Codebook,
    scorer: &dyn BaseScorer,
    spec: &SweepSpec,
    opts: &SweepOptions,
) -> Result<TradeoffReport> {
    if cb.num_items() != split.train.num_items() {
        return Err(SubpopError::DimensionMismatch(format!(
            "codebook covers {} items, split has {}",
            cb.num_items(),
            split.train.num_items()
        )));
    }
    if opts.k == 0 || opts.k > split.train.num_items() {
        return Err(SubpopError::InvalidArgument(format!(
            "k must be in [1, {}], got {}",
            split.train.num_items(),
            opts.k
        )));
    }
    let relevance = build_relevance(&split.test);
    let (mut users, exclusions) = eligible_users(split, &relevance);
    if let Some(n) = opts.eval_users {
        subsample_users(&mut users, n, opts.subsample_seed);
    }
    if users.is_empty() {
        return Err(SubpopError::InvalidArgument(
            "no evaluable users: every test-window user lacks a training history or a positive grade"
                .into(),
        ));
    }
    scorer.validate_coverage(&users, &split.train)?;

    // per user: one (ndcg, novelty) pair per grid point, plus the
    // cold-start flag
    let per_user: Vec<(Vec<(f64, f64)>, bool)> = users
        .par_iter()
        .map(|&u| -> Result<(Vec<(f64, f64)>, bool)> {
            let signals = user_signals(split, cb, scorer, opts, u)?;
            let grades = relevance.grades(u as usize);
            let mut rows = Vec::with_capacity(spec.points().len());
            for weights in spec.points() {
                let fused = fuse(&signals.base, &signals.pps, &signals.spps, weights)?;
                let recs = rank_top_k(&fused, opts.k);
                let ndcg = ndcg_at_k(&recs, grades, opts.k)?
                    .expect("eligible users have a positive grade");
                let novelty = novelty_at_k(&recs, &signals.profile, opts.k, opts.novelty_epsilon)?;
                rows.push((ndcg, novelty));
            }
            Ok((rows, signals.cold_start))
        })
        .collect::<Result<_>>()?;

    let cold_start_fallbacks = per_user.iter().filter(|(_, cold)| *cold).count();
    let mut rows = Vec::with_capacity(spec.points().len());
    let mut reports = Vec::with_capacity(spec.points().len());
    for (p, weights) in spec.points().iter().enumerate() {
        let pairs: Vec<(f64, f64)> = per_user.iter().map(|(rows, _)| rows[p]).collect();
        let report = MetricReport::from_per_user(opts.k, &pairs, exclusions.total());
        rows.push(TradeoffRow {
            mode: spec.mode(),
            alpha: weights.alpha(),
            beta: weights.beta(),
            ndcg: report.ndcg_at_k,
            novelty: report.novelty_at_k,
            users_evaluated: report.users_evaluated,
            users_excluded: report.users_excluded,
        });
        reports.push(report);
    }
    Ok(TradeoffReport {
        k: opts.k,
        rows,
        reports,
        evaluated_users: users,
        exclusions,
        cold_start_fallbacks,
    })
}

/// Best NDCG among rows whose novelty clears each threshold; `None`
/// marks an empty feasible set.
pub fn threshold_table(rows: &[TradeoffRow], thresholds: &[f64]) -> Vec<(f64, Option<f64>)> {
    thresholds
        .iter()
        .map(|&tau| {
            let best = rows
                .iter()
                .filter(|r| r.novelty >= tau)
                .map(|r| r.ndcg)
                .fold(None, |acc: Option<f64>, x| {
                    Some(acc.map_or(x, |a| a.max(x)))
                });
            (tau, best)
        })
        .collect()
}

/// Threshold columns mirroring the trade-off table layout, one line per
/// mode present in the report.
pub fn format_threshold_table(report: &TradeoffReport, thresholds: &[f64]) -> String {
    let mut out = String::from("mode");
    for tau in thresholds {
        out.push_str(&format!("\tnovelty>={tau}"));
    }
    out.push('\n');
    for mode in [SweepMode::PpsOnly, SweepMode::SppsOnly, SweepMode::Combined] {
        let rows: Vec<TradeoffRow> = report
            .rows
            .iter()
            .filter(|r| r.mode == mode)
            .cloned()
            .collect();
        if rows.is_empty() {
            continue;
        }
        out.push_str(mode.as_str());
        for (_, best) in threshold_table(&rows, thresholds) {
            match best {
                Some(ndcg) => out.push_str(&format!("\t{ndcg:.4}")),
                None => out.push_str("\t\u{2014}"),
            }
        }
        out.push('\n');
    }
    out
}

/// Debug dump of the evaluated users' popularity profiles: 3-field rows
/// are `user item count`, 4-field rows are `user split code count`; only
/// non-zero counts appear.
pub fn write_profiles(
    split: &TemporalSplit,
    cb: &Codebook,
    opts: &SweepOptions,
    path: &Path,
) -> Result<()> {
    let relevance = build_relevance(&split.test);
    let (mut users, _) = eligible_users(split, &relevance);
    if let Some(n) = opts.eval_users {
        subsample_users(&mut users, n, opts.subsample_seed);
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "#subpop-profiles\tv1")?;
    for &u in &users {
        let history: Vec<u32> = split
            .train
            .history(u as usize)
            .iter()
            .map(|ev| ev.item)
            .collect();
        let profile = build_profile(u, &history, cb)?;
        let user_id = split.train.user_id(u as usize);
        let mut items: Vec<(u32, u32)> = profile
            .item_counts()
            .iter()
            .map(|(&i, &c)| (i, c))
            .collect();
        items.sort_unstable();
        for (item, count) in items {
            writeln!(
                w,
                "{user_id}\t{}\t{count}",
                split.train.item_id(item as usize)
            )?;
        }
        for split_idx in 0..cb.num_splits() {
            for code in 0..cb.codebook_size() {
                let count = profile.subid_count(split_idx, code);
                if count > 0 {
                    writeln!(w, "{user_id}\t{split_idx}\t{code}\t{count}")?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Top-k lists for one weights point, written as
/// `user<TAB>rank<TAB>item<TAB>score`.
pub fn write_recommendations(
    split: &TemporalSplit,
    cb: &Codebook,
    scorer: &dyn BaseScorer,
    weights: &FusionWeights,
    opts: &SweepOptions,
    path: &Path,
) -> Result<()> {
    let relevance = build_relevance(&split.test);
    let (mut users, _) = eligible_users(split, &relevance);
    if let Some(n) = opts.eval_users {
        subsample_users(&mut users, n, opts.subsample_seed);
    }
    scorer.validate_coverage(&users, &split.train)?;
    let per_user: Vec<(u32, Vec<(u32, f64)>)> = users
        .par_iter()
        .map(|&u| -> Result<(u32, Vec<(u32, f64)>)> {
            let signals = user_signals(split, cb, scorer, opts, u)?;
            let fused = fuse(&signals.base, &signals.pps, &signals.spps, weights)?;
            let recs = rank_top_k(&fused, opts.k.min(fused.len()));
            Ok((u, recs.iter().map(|&i| (i, fused[i as usize])).collect()))
        })
        .collect::<Result<_>>()?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "user\trank\titem\tscore")?;
    for (u, recs) in per_user {
        for (rank, (item, score)) in recs.iter().enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{:.6}",
                split.train.user_id(u as usize),
                rank + 1,
                split.train.item_id(*item as usize),
                score
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_codebook, CodebookConfig};
    use crate::dataset::temporal_split;
    use crate::scorer::global_popularity_scorer;
    use crate::synth::{generate, SynthConfig};

    fn small_pipeline() -> (TemporalSplit, Codebook) {
        let log = generate(&SynthConfig {
            users: 30,
            items: 120,
            genres: 6,
            events_per_user: 60,
            repeat_prob: 0.6,
            pool_size: 8,
            seed: 11,
            ..SynthConfig::default()
        })
        .unwrap();
        let split = temporal_split(&log, 0.1).unwrap();
        let cb = build_codebook(
            &split.train,
            &CodebookConfig {
                splits: 4,
                codebook_size: 8,
                dim: 16,
                svd_seed: 2,
                ..CodebookConfig::default()
            },
        )
        .unwrap();
        (split, cb)
    }

    #[test]
    fn spec_construction_validates_pairs() {
        assert!(SweepSpec::pps_only(&[0.0, 0.5, 0.9]).is_ok());
        assert!(SweepSpec::combined(&[0.0, 0.1], 0.9).is_ok());
        // (0.6, 0.6) violates the convex constraint
        assert!(matches!(
            SweepSpec::combined(&[0.6], 0.6),
            Err(SubpopError::WeightViolation { .. })
        ));
        assert!(SweepSpec::pps_only(&[]).is_err());
        for &a in &default_combined_alpha_grid(0.9) {
            assert!(FusionWeights::new(a, 0.9).is_ok());
        }
    }

    #[test]
    fn single_zero_point_matches_base_evaluation() {
        let (split, cb) = small_pipeline();
        let scorer = global_popularity_scorer(&split.train).unwrap();
        let opts = SweepOptions {
            k: 10,
            ..SweepOptions::default()
        };
        let spec = SweepSpec::pps_only(&[0.0]).unwrap();
        let report = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
        assert_eq!(report.rows.len(), 1);
        // and a second sweep that includes (0,0) agrees exactly
        let wider = SweepSpec::pps_only(&[0.0, 0.5]).unwrap();
        let report2 = run_sweep(&split, &cb, &scorer, &wider, &opts).unwrap();
        assert_eq!(report.rows[0].ndcg, report2.rows[0].ndcg);
        assert_eq!(report.rows[0].novelty, report2.rows[0].novelty);
    }

    #[test]
    fn sweep_is_deterministic_across_runs() {
        let (split, cb) = small_pipeline();
        let scorer = global_popularity_scorer(&split.train).unwrap();
        let opts = SweepOptions {
            k: 10,
            ..SweepOptions::default()
        };
        let spec = SweepSpec::spps_only(&default_grid()).unwrap();
        let a = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
        let b = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
    }

    #[test]
    fn subsampling_users_is_deterministic_and_bounded() {
        let (split, cb) = small_pipeline();
        let scorer = global_popularity_scorer(&split.train).unwrap();
        let opts = SweepOptions {
            k: 10,
            eval_users: Some(5),
            subsample_seed: 3,
            ..SweepOptions::default()
        };
        let spec = SweepSpec::pps_only(&[0.0, 0.9]).unwrap();
        let a = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
        let b = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
        assert_eq!(a.evaluated_users, b.evaluated_users);
        assert_eq!(a.evaluated_users.len(), 5);
        // sorted ascending
        assert!(a.evaluated_users.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn threshold_table_takes_feasibility_max() {
        let row = |ndcg: f64, novelty: f64| TradeoffRow {
            mode: SweepMode::PpsOnly,
            alpha: 0.0,
            beta: 0.0,
            ndcg,
            novelty,
            users_evaluated: 10,
            users_excluded: 0,
        };
        // fixture numbers from the reference trade-off table
        let rows = vec![row(0.4159, 8.0), row(0.3248, 10.5)];
        let table = threshold_table(&rows, &[0.0, 10.0, 12.0]);
        assert_eq!(table[0].1, Some(0.4159));
        assert_eq!(table[1].1, Some(0.3248));
        assert_eq!(table[2].1, None);
        // non-increasing in tau
        let ndcgs: Vec<f64> = table.iter().filter_map(|(_, v)| *v).collect();
        assert!(ndcgs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn formatted_threshold_table_renders_absent_cells() {
        let (split, cb) = small_pipeline();
        let scorer = global_popularity_scorer(&split.train).unwrap();
        let opts = SweepOptions {
            k: 10,
            ..SweepOptions::default()
        };
        let spec = SweepSpec::pps_only(&[0.0, 0.5]).unwrap();
        let report = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
        let table = format_threshold_table(&report, &[0.0, 1e9]);
        assert!(table.contains("pps-only"));
        assert!(table.contains('\u{2014}'));
    }

    #[test]
    fn oversized_k_is_rejected() {
        let (split, cb) = small_pipeline();
        let scorer = global_popularity_scorer(&split.train).unwrap();
        let opts = SweepOptions {
            k: split.train.num_items() + 1,
            ..SweepOptions::default()
        };
        let spec = SweepSpec::pps_only(&[0.0]).unwrap();
        assert!(run_sweep(&split, &cb, &scorer, &spec, &opts).is_err());
    }
}
