//! Personalised popularity signals for sequential music recommendation.
//!
//! The crate ingests interaction logs, splits them chronologically,
//! derives a sub-item codebook from a truncated SVD of the user-item
//! matrix, computes item-level (PPS) and sub-ID-level (sPPS) personalised
//! popularity, fuses both with a pluggable base scorer through a convex
//! combination, and sweeps the fusion weights to chart the trade-off
//! between ranking accuracy (NDCG@K) and personalised novelty.

pub mod codebook;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod linalg;
pub mod metrics;
pub mod plot;
pub mod popularity;
pub mod rng;
pub mod scorer;
pub mod svd;
pub mod synth;

pub use codebook::{
    assign_codes, build_codebook, build_interaction_matrix, reconstruct_embedding, Codebook,
    CodebookConfig, SubEmbeddingTable,
};
pub use dataset::{
    load_events, read_split, sample_top_items, temporal_split, write_events_tsv, write_split,
    Event, EventLog, EventType, InputFormat, TemporalSplit,
};
pub use error::{ErrorCategory, Result, SubpopError};
pub use experiment::{
    default_combined_alpha_grid, default_grid, format_threshold_table, run_sweep, threshold_table,
    write_recommendations, SweepMode, SweepOptions, SweepSpec, TradeoffReport, TradeoffRow,
};
pub use fusion::{fuse, rank_top_k, FusionWeights, ScoreVector};
pub use metrics::{
    build_relevance, ideal_dcg, ndcg_at_k, novelty_at_k, MetricReport, RelevanceProfile,
    NOVELTY_EPSILON,
};
pub use plot::emit_plot;
pub use popularity::{
    build_profile, pps_raw, pps_std, spps_raw, spps_std, standardize, StandardizedScores,
    UserPopularityProfile,
};
pub use scorer::{
    global_popularity_scorer, load_external_logits, markov_scorer, svd_dot_scorer, BaseScorer,
    ExternalLogitsScorer, GlobalPopularityScorer, MarkovScorer, ScorerOutput, SvdDotScorer,
    LOG_FLOOR,
};
pub use svd::{truncated_svd, SvdResult};
pub use synth::{generate, SynthConfig};
