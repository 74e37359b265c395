//! `subpop` command line: synthetic data generation, split/codebook
//! caching, and the accuracy/novelty sweep.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use subpop_core::codebook::{build_codebook, write_codebook, CodebookConfig};
use subpop_core::dataset::{
    load_events, sample_top_items, temporal_split, write_events_tsv, write_split, EventLog,
    InputFormat, TemporalSplit,
};
use subpop_core::error::{Result, SubpopError};
use subpop_core::experiment::{
    default_combined_alpha_grid, default_grid, format_threshold_table, run_sweep, write_profiles,
    write_recommendations, SweepOptions, SweepSpec, TradeoffReport,
};
use subpop_core::fusion::FusionWeights;
use subpop_core::plot::emit_plot;
use subpop_core::scorer::{
    global_popularity_scorer, load_external_logits, markov_scorer, svd_dot_scorer, BaseScorer,
};
use subpop_core::synth::{generate, SynthConfig};
use subpop_core::SubEmbeddingTable;

#[derive(Parser)]
#[command(
    name = "subpop",
    about = "Personalised popularity signals for sequential music recommendation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic interaction log.
    Synth(SynthArgs),
    /// Build and cache a temporal train/test split.
    Split(SplitArgs),
    /// Build a codebook and dump its code table.
    Codebook(CodebookArgs),
    /// Run an (alpha, beta) sweep and report the accuracy/novelty trade-off.
    Run(Box<RunArgs>),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Auto,
    Tsv,
    Csv,
}

impl FormatArg {
    fn resolve(self, path: &Path) -> InputFormat {
        match self {
            FormatArg::Auto => InputFormat::from_path(path),
            FormatArg::Tsv => InputFormat::Tsv,
            FormatArg::Csv => InputFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScorerArg {
    Globalpop,
    Markov,
    Svddot,
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    PpsOnly,
    SppsOnly,
    Combined,
    All,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    users: usize,
    #[arg(long, default_value_t = 1000)]
    items: usize,
    #[arg(long, default_value_t = 10)]
    genres: usize,
    #[arg(long, default_value_t = 100)]
    events_per_user: usize,
    #[arg(long, default_value_t = 0.7)]
    repeat_prob: f64,
    #[arg(long, default_value_t = 10)]
    pool_size: usize,
    #[arg(long, default_value_t = 0.8)]
    genre_affinity: f64,
    #[arg(long, default_value_t = 0.1)]
    like_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    zipf_exponent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    /// Keep only the N globally most-interacted items before splitting.
    #[arg(long)]
    top_items: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CodebookArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    #[arg(long)]
    top_items: Option<usize>,
    /// Build from the training part of a temporal split instead of the
    /// whole log.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, default_value_t = 32)]
    splits: usize,
    #[arg(long, default_value_t = 256)]
    codebook_size: u32,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    svd_seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    svd_tol: f64,
    #[arg(long, default_value_t = 300)]
    svd_max_iter: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Everything here is optional so that a `--config` file (key=value
/// lines, keys named like the long flags) can supply values; explicit
/// flags win over the file, and built-in defaults fill the rest.
#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    top_items: Option<usize>,
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, value_enum)]
    scorer: Option<ScorerArg>,
    #[arg(long)]
    external_logits: Option<PathBuf>,
    #[arg(long)]
    markov_smoothing: Option<f64>,
    /// History window L for the embedding-dot-product scorer.
    #[arg(long)]
    history_window: Option<usize>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    codebook_size: Option<u32>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    svd_seed: Option<u64>,
    #[arg(long)]
    svd_tol: Option<f64>,
    #[arg(long)]
    svd_max_iter: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Comma-separated alpha grid, e.g. `0,0.1,0.5`.
    #[arg(long)]
    alpha_grid: Option<String>,
    /// Comma-separated beta grid.
    #[arg(long)]
    beta_grid: Option<String>,
    /// Fixed beta for combined mode.
    #[arg(long)]
    fixed_beta: Option<f64>,
    /// Evaluate a single point instead of a grid.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    pps_epsilon: Option<f64>,
    #[arg(long)]
    novelty_epsilon: Option<f64>,
    #[arg(long)]
    standardize_logits: bool,
    /// Subsample the evaluated users to this many.
    #[arg(long)]
    eval_users: Option<usize>,
    /// Seed for the evaluated-user subsample.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated novelty thresholds for the summary table.
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    threshold_out: Option<PathBuf>,
    /// Dump per-user top-k lists (single-point runs only).
    #[arg(long)]
    dump_recs: Option<PathBuf>,
    /// Dump the evaluated users' popularity profiles for debugging.
    #[arg(long)]
    dump_profiles: Option<PathBuf>,
}

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SubpopError::Config(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                idx + 1
            ))
        })?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| SubpopError::Config(format!("bad value {raw:?} for config key {key}"))),
    }
}

fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| SubpopError::Config(format!("bad grid value {part:?}")))
        })
        .collect()
}

/// Fully resolved run configuration.
struct RunConfig {
    data: PathBuf,
    format: FormatArg,
    top_items: Option<usize>,
    holdout: f64,
    scorer: ScorerArg,
    external_logits: Option<PathBuf>,
    markov_smoothing: f64,
    history_window: usize,
    codebook: CodebookConfig,
    mode: ModeArg,
    alpha_grid: Option<Vec<f64>>,
    beta_grid: Option<Vec<f64>>,
    fixed_beta: f64,
    point: Option<(f64, f64)>,
    opts: SweepOptions,
    thresholds: Vec<f64>,
    out: Option<PathBuf>,
    plot: Option<PathBuf>,
    threshold_out: Option<PathBuf>,
    dump_recs: Option<PathBuf>,
    dump_profiles: Option<PathBuf>,
}

fn resolve_run(args: RunArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    macro_rules! pick {
        ($field:ident, $key:literal, $default:expr) => {
            match args.$field {
                Some(v) => v,
                None => config_get(&file, $key)?.unwrap_or($default),
            }
        };
    }

    let data = match args.data.or(file.get("data").map(PathBuf::from)) {
        Some(d) => d,
        None => return Err(SubpopError::Config("missing required option: data".into())),
    };
    let format = match args.format {
        Some(f) => f,
        None => match file.get("format").map(String::as_str) {
            None | Some("auto") => FormatArg::Auto,
            Some("tsv") => FormatArg::Tsv,
            Some("csv") => FormatArg::Csv,
            Some(other) => return Err(SubpopError::Config(format!("unknown format {other:?}"))),
        },
    };
    let scorer = match args.scorer {
        Some(s) => s,
        None => match file.get("scorer").map(String::as_str) {
            None | Some("markov") => ScorerArg::Markov,
            Some("globalpop") => ScorerArg::Globalpop,
            Some("svddot") => ScorerArg::Svddot,
            Some("external") => ScorerArg::External,
            Some(other) => return Err(SubpopError::Config(format!("unknown scorer {other:?}"))),
        },
    };
    let mode = match args.mode {
        Some(m) => m,
        None => match file.get("mode").map(String::as_str) {
            None | Some("pps-only") => ModeArg::PpsOnly,
            Some("spps-only") => ModeArg::SppsOnly,
            Some("combined") => ModeArg::Combined,
            Some("all") => ModeArg::All,
            Some(other) => return Err(SubpopError::Config(format!("unknown mode {other:?}"))),
        },
    };
    let alpha_grid = match args
        .alpha_grid
        .as_deref()
        .or(file.get("alpha_grid").map(String::as_str))
    {
        Some(raw) => Some(parse_grid(raw)?),
        None => None,
    };
    let beta_grid = match args
        .beta_grid
        .as_deref()
        .or(file.get("beta_grid").map(String::as_str))
    {
        Some(raw) => Some(parse_grid(raw)?),
        None => None,
    };
    let thresholds = match args
        .thresholds
        .as_deref()
        .or(file.get("thresholds").map(String::as_str))
    {
        Some(raw) => parse_grid(raw)?,
        None => vec![0.0, 10.0, 12.0, 14.0],
    };
    let alpha = match args.alpha {
        Some(a) => Some(a),
        None => config_get(&file, "alpha")?,
    };
    let beta = match args.beta {
        Some(b) => Some(b),
        None => config_get(&file, "beta")?,
    };
    let point = match (alpha, beta) {
        (None, None) => None,
        (a, b) => Some((a.unwrap_or(0.0), b.unwrap_or(0.0))),
    };

    let codebook = CodebookConfig {
        splits: pick!(splits, "splits", 32),
        codebook_size: pick!(codebook_size, "codebook_size", 256),
        dim: pick!(dim, "dim", 256),
        svd_seed: pick!(svd_seed, "svd_seed", 0),
        svd_tol: pick!(svd_tol, "svd_tol", 1e-7),
        svd_max_iter: pick!(svd_max_iter, "svd_max_iter", 300),
    };
    let opts = SweepOptions {
        k: pick!(k, "k", 40),
        pps_epsilon: pick!(pps_epsilon, "pps_epsilon", 1.0),
        novelty_epsilon: pick!(novelty_epsilon, "novelty_epsilon", 1e-8),
        standardize_logits: args.standardize_logits
            || config_get::<bool>(&file, "standardize_logits")?.unwrap_or(false),
        eval_users: match args.eval_users {
            Some(n) => Some(n),
            None => config_get(&file, "eval_users")?,
        },
        subsample_seed: pick!(seed, "seed", 0),
    };

    Ok(RunConfig {
        data,
        format,
        top_items: match args.top_items {
            Some(n) => Some(n),
            None => config_get(&file, "top_items")?,
        },
        holdout: pick!(holdout, "holdout", 0.1),
        scorer,
        external_logits: args
            .external_logits
            .or(file.get("external_logits").map(PathBuf::from)),
        markov_smoothing: pick!(markov_smoothing, "markov_smoothing", 0.1),
        history_window: pick!(history_window, "history_window", 50),
        codebook,
        mode,
        alpha_grid,
        beta_grid,
        fixed_beta: pick!(fixed_beta, "fixed_beta", 0.9),
        point,
        opts,
        thresholds,
        out: args.out.or(file.get("out").map(PathBuf::from)),
        plot: args.plot.or(file.get("plot").map(PathBuf::from)),
        threshold_out: args
            .threshold_out
            .or(file.get("threshold_out").map(PathBuf::from)),
        dump_recs: args.dump_recs.or(file.get("dump_recs").map(PathBuf::from)),
        dump_profiles: args
            .dump_profiles
            .or(file.get("dump_profiles").map(PathBuf::from)),
    })
}

fn load_and_sample(data: &Path, format: FormatArg, top_items: Option<usize>) -> Result<EventLog> {
    let log = load_events(data, format.resolve(data))?;
    match top_items {
        Some(n) => sample_top_items(&log, n),
        None => Ok(log),
    }
}

fn build_scorer(
    cfg: &RunConfig,
    split: &TemporalSplit,
    cb: &subpop_core::Codebook,
) -> Result<Box<dyn BaseScorer>> {
    Ok(match cfg.scorer {
        ScorerArg::Globalpop => Box::new(global_popularity_scorer(&split.train)?),
        ScorerArg::Markov => Box::new(markov_scorer(&split.train, cfg.markov_smoothing)?),
        ScorerArg::Svddot => {
            let table = SubEmbeddingTable::init_uniform(
                cb.num_splits(),
                cb.codebook_size(),
                cb.sub_dim(),
                cfg.codebook.svd_seed.wrapping_add(1),
            );
            Box::new(svd_dot_scorer(cb, &table, cfg.history_window)?)
        }
        ScorerArg::External => {
            let path = cfg.external_logits.as_ref().ok_or_else(|| {
                SubpopError::Config("--scorer external requires --external-logits".into())
            })?;
            Box::new(load_external_logits(path, &split.train)?)
        }
    })
}

fn sweep_specs(cfg: &RunConfig) -> Result<Vec<SweepSpec>> {
    if let Some((alpha, beta)) = cfg.point {
        // validate eagerly so bad points fail before any heavy work
        FusionWeights::new(alpha, beta)?;
        let spec = if beta == 0.0 {
            SweepSpec::pps_only(&[alpha])?
        } else if alpha == 0.0 {
            SweepSpec::spps_only(&[beta])?
        } else {
            SweepSpec::combined(&[alpha], beta)?
        };
        return Ok(vec![spec]);
    }
    let alpha_grid = cfg.alpha_grid.clone().unwrap_or_else(default_grid);
    let beta_grid = cfg.beta_grid.clone().unwrap_or_else(default_grid);
    let combined_grid = cfg
        .alpha_grid
        .clone()
        .unwrap_or_else(|| default_combined_alpha_grid(cfg.fixed_beta));
    Ok(match cfg.mode {
        ModeArg::PpsOnly => vec![SweepSpec::pps_only(&alpha_grid)?],
        ModeArg::SppsOnly => vec![SweepSpec::spps_only(&beta_grid)?],
        ModeArg::Combined => vec![SweepSpec::combined(&combined_grid, cfg.fixed_beta)?],
        ModeArg::All => vec![
            SweepSpec::pps_only(&alpha_grid)?,
            SweepSpec::spps_only(&beta_grid)?,
            SweepSpec::combined(&combined_grid, cfg.fixed_beta)?,
        ],
    })
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        users: args.users,
        items: args.items,
        genres: args.genres,
        events_per_user: args.events_per_user,
        repeat_prob: args.repeat_prob,
        pool_size: args.pool_size,
        genre_affinity: args.genre_affinity,
        like_prob: args.like_prob,
        zipf_exponent: args.zipf_exponent,
        seed: args.seed,
    };
    let log = generate(&cfg)?;
    write_events_tsv(&log, &args.out)?;
    println!(
        "wrote {} events ({} users, {} items) to {}",
        log.num_events(),
        log.num_users(),
        log.num_items(),
        args.out.display()
    );
    Ok(())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let log = load_and_sample(&args.data, args.format, args.top_items)?;
    let split = temporal_split(&log, args.holdout)?;
    write_split(&split, &args.out)?;
    println!(
        "split at timestamp {}: {} train / {} test events, cached to {}",
        split.split_timestamp,
        split.train.num_events(),
        split.test.num_events(),
        args.out.display()
    );
    Ok(())
}

fn cmd_codebook(args: CodebookArgs) -> Result<()> {
    let log = load_and_sample(&args.data, args.format, args.top_items)?;
    let (train, from) = match args.holdout {
        Some(holdout) => (temporal_split(&log, holdout)?.train, "train window"),
        None => (log, "full log"),
    };
    let cfg = CodebookConfig {
        splits: args.splits,
        codebook_size: args.codebook_size,
        dim: args.dim,
        svd_seed: args.svd_seed,
        svd_tol: args.svd_tol,
        svd_max_iter: args.svd_max_iter,
    };
    let cb = build_codebook(&train, &cfg)?;
    write_codebook(&cb, &train, &args.out)?;
    println!(
        "codebook (m={}, V={}) over {} items from the {from}, written to {}",
        cb.num_splits(),
        cb.codebook_size(),
        cb.num_items(),
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = resolve_run(args)?;
    let log = load_and_sample(&cfg.data, cfg.format, cfg.top_items)?;
    let split = temporal_split(&log, cfg.holdout)?;
    let cb = build_codebook(&split.train, &cfg.codebook)?;
    let scorer = build_scorer(&cfg, &split, &cb)?;
    let specs = sweep_specs(&cfg)?;

    let mut merged: Option<TradeoffReport> = None;
    for spec in &specs {
        let report = run_sweep(&split, &cb, scorer.as_ref(), spec, &cfg.opts)?;
        match &mut merged {
            Some(existing) => existing.extend(report)?,
            None => merged = Some(report),
        }
    }
    let report = merged.expect("at least one sweep spec");

    print!("{}", report.to_tsv());
    println!(
        "evaluated {} users ({} excluded: {} without training history, {} without positive grades); {} cold-start fallbacks",
        report.evaluated_users.len(),
        report.exclusions.total(),
        report.exclusions.no_train_history,
        report.exclusions.no_positive_grades,
        report.cold_start_fallbacks
    );
    let table = format_threshold_table(&report, &cfg.thresholds);
    print!("{table}");

    if let Some(path) = &cfg.out {
        report.write_tsv(path)?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &cfg.threshold_out {
        std::fs::write(path, &table)?;
        println!("threshold table written to {}", path.display());
    }
    if let Some(path) = &cfg.plot {
        emit_plot(&report, path)?;
        println!("plot written to {}", path.display());
    }
    if let Some(path) = &cfg.dump_recs {
        if report.rows.len() != 1 {
            return Err(SubpopError::InvalidArgument(
                "--dump-recs needs a single grid point; pass --alpha/--beta".into(),
            ));
        }
        let row = &report.rows[0];
        let weights = FusionWeights::new(row.alpha, row.beta)?;
        write_recommendations(&split, &cb, scorer.as_ref(), &weights, &cfg.opts, path)?;
        println!("recommendations written to {}", path.display());
    }
    if let Some(path) = &cfg.dump_profiles {
        write_profiles(&split, &cb, &cfg.opts, path)?;
        println!("profiles written to {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Split(args) => cmd_split(args),
        Command::Codebook(args) => cmd_codebook(args),
        Command::Run(args) => cmd_run(*args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error ({:?}): {err}", err.category());
            ExitCode::from(err.category().exit_code())
        }
    }
}
