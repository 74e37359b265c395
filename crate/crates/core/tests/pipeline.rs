//! Cross-module integration tests: codebook structure on genre data,
//! the external-logits bridge, split caching, and edge cases that only
//! appear once the whole pipeline is wired together.

mod common;

use std::io::Write;

use subpop_core::codebook::{build_codebook, CodebookConfig};
use subpop_core::dataset::{read_split, temporal_split, EventLog, EventLogBuilder, EventType};
use subpop_core::experiment::{run_sweep, SweepOptions, SweepSpec};
use subpop_core::rng::SplitMix64;
use subpop_core::scorer::{global_popularity_scorer, load_external_logits, BaseScorer};
use subpop_core::synth::{generate, SynthConfig};

fn log_from(rows: &[(&str, &str, i64, EventType)]) -> EventLog {
    let mut b = EventLogBuilder::new();
    for (u, i, t, ty) in rows {
        b.add(u, i, *t, *ty);
    }
    b.finish().unwrap()
}

#[test]
fn codes_group_items_within_genres() {
    let cfg = SynthConfig {
        users: 200,
        items: 400,
        genres: 8,
        events_per_user: 100,
        repeat_prob: 0.5,
        pool_size: 10,
        genre_affinity: 1.0,
        like_prob: 0.0,
        zipf_exponent: 1.0,
        seed: 13,
    };
    let log = generate(&cfg).unwrap();
    let cb = build_codebook(
        &log,
        &CodebookConfig {
            splits: 8,
            codebook_size: 16,
            dim: 64,
            svd_seed: 1,
            ..CodebookConfig::default()
        },
    )
    .unwrap();

    // dense item -> synthetic genre, restricted to items that occur
    let counts = log.item_event_counts();
    let per_genre = cfg.items / cfg.genres;
    let genre_of = |dense: usize| -> usize {
        let idx: usize = log
            .item_id(dense)
            .strip_prefix('i')
            .unwrap()
            .parse()
            .unwrap();
        (idx / per_genre).min(cfg.genres - 1)
    };
    let active: Vec<usize> = (0..log.num_items()).filter(|&i| counts[i] > 0).collect();

    let shared_codes = |a: usize, b: usize| -> usize {
        cb.code_of(a)
            .unwrap()
            .iter()
            .zip(cb.code_of(b).unwrap())
            .filter(|(x, y)| x == y)
            .count()
    };
    let mut rng = SplitMix64::new(55);
    let mut draw = |same_genre: bool| -> f64 {
        let mut total = 0usize;
        let mut pairs = 0usize;
        while pairs < 2_000 {
            let a = active[rng.next_below(active.len() as u64) as usize];
            let b = active[rng.next_below(active.len() as u64) as usize];
            if a == b || (genre_of(a) == genre_of(b)) != same_genre {
                continue;
            }
            total += shared_codes(a, b);
            pairs += 1;
        }
        total as f64 / 2_000.0
    };
    let same = draw(true);
    let cross = draw(false);
    assert!(
        same > cross,
        "same-genre pairs share {same:.3} codes on average, cross-genre {cross:.3}"
    );
}

#[test]
fn external_logits_reproduce_in_process_scorer_metrics() {
    let cfg = SynthConfig {
        users: 40,
        items: 150,
        genres: 5,
        events_per_user: 60,
        repeat_prob: 0.7,
        pool_size: 8,
        seed: 17,
        ..SynthConfig::default()
    };
    let log = generate(&cfg).unwrap();
    let split = temporal_split(&log, 0.15).unwrap();
    let cb = build_codebook(
        &split.train,
        &CodebookConfig {
            splits: 4,
            codebook_size: 16,
            dim: 32,
            svd_seed: 3,
            ..CodebookConfig::default()
        },
    )
    .unwrap();
    let reference = global_popularity_scorer(&split.train).unwrap();

    // dump dense logits for every user, shortest-roundtrip formatting
    let mut file = tempfile::NamedTempFile::new().unwrap();
    for u in 0..split.train.num_users() {
        let logits = reference.score(u as u32, &[]).unwrap().logits;
        let joined: Vec<String> = logits.iter().map(|v| format!("{v}")).collect();
        writeln!(file, "{}\t{}", split.train.user_id(u), joined.join(",")).unwrap();
    }
    let external = load_external_logits(file.path(), &split.train).unwrap();

    let opts = SweepOptions {
        k: 15,
        ..SweepOptions::default()
    };
    let spec = SweepSpec::pps_only(&[0.0, 0.3, 0.6]).unwrap();
    let a = run_sweep(&split, &cb, &reference, &spec, &opts).unwrap();
    let b = run_sweep(&split, &cb, &external, &spec, &opts).unwrap();
    assert_eq!(a.to_tsv(), b.to_tsv());
}

#[test]
fn cached_split_drives_identical_sweeps() {
    let cfg = SynthConfig {
        users: 50,
        items: 200,
        genres: 5,
        events_per_user: 50,
        seed: 23,
        ..SynthConfig::default()
    };
    let log = generate(&cfg).unwrap();
    let split = temporal_split(&log, 0.1).unwrap();
    let cache = tempfile::NamedTempFile::new().unwrap();
    subpop_core::dataset::write_split(&split, cache.path()).unwrap();
    let reloaded = read_split(cache.path()).unwrap();
    assert_eq!(reloaded.split_timestamp, split.split_timestamp);

    let cb_cfg = CodebookConfig {
        splits: 4,
        codebook_size: 8,
        dim: 16,
        svd_seed: 0,
        ..CodebookConfig::default()
    };
    let opts = SweepOptions {
        k: 10,
        ..SweepOptions::default()
    };
    let spec = SweepSpec::spps_only(&[0.0, 0.5]).unwrap();

    let run = |s: &subpop_core::dataset::TemporalSplit| {
        let cb = build_codebook(&s.train, &cb_cfg).unwrap();
        let scorer = global_popularity_scorer(&s.train).unwrap();
        run_sweep(s, &cb, &scorer, &spec, &opts).unwrap().to_tsv()
    };
    assert_eq!(run(&split), run(&reloaded));
}

#[test]
fn item_seen_only_in_test_window_is_scoreable() {
    let log = log_from(&[
        ("u1", "A", 1, EventType::Play),
        ("u1", "B", 2, EventType::Play),
        ("u2", "A", 3, EventType::Play),
        ("u2", "C", 10, EventType::Play),
    ]);
    let split = temporal_split(&log, 0.25).unwrap();
    // C only occurs in the test window
    let c = split.train.item_dense("C").unwrap();
    assert!(split
        .train
        .history(split.train.user_dense("u2").unwrap() as usize)
        .iter()
        .all(|ev| ev.item != c));

    let scorer = global_popularity_scorer(&split.train).unwrap();
    let logits = scorer.score(0, &[]).unwrap().logits;
    // never seen in train: ln(1 + 0) = 0
    assert_eq!(logits[c as usize], 0.0);

    let cb = subpop_core::Codebook::from_codes(1, 3, 1, vec![0, 1, 2]).unwrap();
    let spec = SweepSpec::pps_only(&[0.0, 0.5]).unwrap();
    let opts = SweepOptions {
        k: 3,
        ..SweepOptions::default()
    };
    let report = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
    assert_eq!(report.evaluated_users.len(), 1);
    assert_eq!(report.rows.len(), 2);
}

#[test]
fn markov_cold_starts_are_counted_in_the_report() {
    let log = log_from(&[
        ("u1", "A", 1, EventType::Play),
        ("u1", "B", 2, EventType::Play),
        ("u2", "C", 3, EventType::Play),
        ("u1", "A", 10, EventType::Play),
        ("u2", "C", 11, EventType::Play),
    ]);
    let split = temporal_split(&log, 0.4).unwrap();
    assert_eq!(split.test.num_events(), 2);
    let scorer = subpop_core::scorer::markov_scorer(&split.train, 0.0).unwrap();
    let cb = subpop_core::Codebook::from_codes(1, 3, 1, vec![0, 1, 2]).unwrap();
    let spec = SweepSpec::pps_only(&[0.0]).unwrap();
    let opts = SweepOptions {
        k: 3,
        ..SweepOptions::default()
    };
    let report = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
    // u1's last train item B and u2's last train item C are never
    // transition sources, so both users fall back
    assert_eq!(report.evaluated_users.len(), 2);
    assert_eq!(report.cold_start_fallbacks, 2);
}

#[test]
fn users_without_positive_grades_are_excluded_not_zeroed() {
    let log = log_from(&[
        ("u1", "A", 1, EventType::Play),
        ("u2", "B", 2, EventType::Play),
        ("u1", "A", 10, EventType::Play),
        ("u2", "B", 11, EventType::Skip),
    ]);
    let split = temporal_split(&log, 0.4).unwrap();
    let scorer = global_popularity_scorer(&split.train).unwrap();
    let cb = subpop_core::Codebook::from_codes(1, 2, 1, vec![0, 1]).unwrap();
    let spec = SweepSpec::pps_only(&[0.0]).unwrap();
    let opts = SweepOptions {
        k: 2,
        ..SweepOptions::default()
    };
    let report = run_sweep(&split, &cb, &scorer, &spec, &opts).unwrap();
    // u2's only test event is a skip: excluded, and visible as such
    assert_eq!(report.evaluated_users.len(), 1);
    assert_eq!(report.exclusions.no_positive_grades, 1);
    assert_eq!(report.rows[0].users_excluded, 1);
}

#[test]
fn zero_point_rows_agree_across_modes_and_thresholds_stay_monotone() {
    let cfg = SynthConfig {
        users: 80,
        items: 300,
        genres: 6,
        events_per_user: 70,
        repeat_prob: 0.75,
        pool_size: 9,
        seed: 29,
        ..SynthConfig::default()
    };
    let log = generate(&cfg).unwrap();
    let split = temporal_split(&log, 0.1).unwrap();
    let cb = build_codebook(
        &split.train,
        &CodebookConfig {
            splits: 8,
            codebook_size: 16,
            dim: 32,
            svd_seed: 4,
            ..CodebookConfig::default()
        },
    )
    .unwrap();
    let scorer = subpop_core::scorer::markov_scorer(&split.train, 0.1).unwrap();
    let opts = SweepOptions {
        k: 20,
        ..SweepOptions::default()
    };
    let grid = subpop_core::experiment::default_grid();
    let pps = run_sweep(
        &split,
        &cb,
        &scorer,
        &SweepSpec::pps_only(&grid).unwrap(),
        &opts,
    )
    .unwrap();
    let spps = run_sweep(
        &split,
        &cb,
        &scorer,
        &SweepSpec::spps_only(&grid).unwrap(),
        &opts,
    )
    .unwrap();
    assert_eq!(pps.rows[0].ndcg, spps.rows[0].ndcg);
    assert_eq!(pps.rows[0].novelty, spps.rows[0].novelty);

    for report in [&pps, &spps] {
        let table =
            subpop_core::experiment::threshold_table(&report.rows, &[0.0, 5.0, 10.0, 15.0, 20.0]);
        let feasible: Vec<f64> = table.iter().filter_map(|(_, v)| *v).collect();
        assert!(feasible.windows(2).all(|w| w[0] >= w[1]));
    }
}
