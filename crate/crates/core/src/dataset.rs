//! Interaction-log ingestion, popularity-based item sampling, and the
//! global temporal train/test split.
//!
//! Input rows are `user<TAB>item<TAB>timestamp<TAB>event` (or the comma
//! equivalent), event one of play/like/skip/dislike, case-insensitive.
//! An optional header row is detected by a non-numeric timestamp field.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SubpopError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventType {
    Play,
    Like,
    Skip,
    Dislike,
}

impl EventType {
    pub fn parse(s: &str) -> Option<EventType> {
        match s.trim().to_ascii_lowercase().as_str() {
            "play" => Some(EventType::Play),
            "like" => Some(EventType::Like),
            "skip" => Some(EventType::Skip),
            "dislike" => Some(EventType::Dislike),
            _ => None,
        }
    }

    /// Graded relevance used by the NDCG construction.
    pub fn relevance_grade(self) -> i32 {
        match self {
            EventType::Like => 2,
            EventType::Play => 1,
            EventType::Skip => -1,
            EventType::Dislike => -2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Play => "play",
            EventType::Like => "like",
            EventType::Skip => "skip",
            EventType::Dislike => "dislike",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A raw interaction with opaque string keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
    pub event_type: EventType,
}

/// An interaction after id interning. `seq` is the global input-order
/// rank, used to break timestamp ties deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEvent {
    pub item: u32,
    pub timestamp: i64,
    pub event_type: EventType,
    pub seq: u64,
}

/// Per-user interaction sequences over a dense user/item index.
///
/// Dense indices are assigned in order of first appearance and are
/// contiguous and bijective with the retained id sets. Within each user,
/// events are sorted by `(timestamp, seq)`, so equal timestamps keep
/// input order. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    histories: Vec<Vec<LogEvent>>,
}

impl EventLog {
    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn num_events(&self) -> usize {
        self.histories.iter().map(Vec::len).sum()
    }

    pub fn history(&self, user: usize) -> &[LogEvent] {
        &self.histories[user]
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.item_ids[item]
    }

    pub fn user_dense(&self, id: &str) -> Option<u32> {
        self.user_index.get(id).copied()
    }

    pub fn item_dense(&self, id: &str) -> Option<u32> {
        self.item_index.get(id).copied()
    }

    /// Global interaction count per item; every event type counts once.
    pub fn item_event_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_items()];
        for history in &self.histories {
            for ev in history {
                counts[ev.item as usize] += 1;
            }
        }
        counts
    }

    /// All events as `(user, event)` sorted by `(timestamp, seq)`.
    fn global_order(&self) -> Vec<(u32, LogEvent)> {
        let mut all: Vec<(u32, LogEvent)> = Vec::with_capacity(self.num_events());
        for (u, history) in self.histories.iter().enumerate() {
            for ev in history {
                all.push((u as u32, *ev));
            }
        }
        all.sort_by_key(|(_, ev)| (ev.timestamp, ev.seq));
        all
    }
}

/// Incremental construction with id interning.
#[derive(Debug, Default)]
pub struct EventLogBuilder {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    histories: Vec<Vec<LogEvent>>,
    next_seq: u64,
}

impl EventLogBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, user_id: &str, item_id: &str, timestamp: i64, event_type: EventType) {
        let user = match self.user_index.get(user_id) {
            Some(&u) => u,
            None => {
                let u = self.user_ids.len() as u32;
                self.user_ids.push(user_id.to_string());
                self.user_index.insert(user_id.to_string(), u);
                self.histories.push(Vec::new());
                u
            }
        };
        let item = match self.item_index.get(item_id) {
            Some(&i) => i,
            None => {
                let i = self.item_ids.len() as u32;
                self.item_ids.push(item_id.to_string());
                self.item_index.insert(item_id.to_string(), i);
                i
            }
        };
        debug_assert!(timestamp >= 0);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.histories[user as usize].push(LogEvent {
            item,
            timestamp,
            event_type,
            seq,
        });
    }

    pub fn finish(mut self) -> Result<EventLog> {
        if self.next_seq == 0 {
            return Err(SubpopError::EmptyLog);
        }
        for history in &mut self.histories {
            history.sort_by_key(|ev| (ev.timestamp, ev.seq));
        }
        Ok(EventLog {
            user_ids: self.user_ids,
            item_ids: self.item_ids,
            user_index: self.user_index,
            item_index: self.item_index,
            histories: self.histories,
        })
    }
}

impl EventLog {
    pub fn from_events(events: impl IntoIterator<Item = Event>) -> Result<EventLog> {
        let mut builder = EventLogBuilder::new();
        for ev in events {
            builder.add(&ev.user_id, &ev.item_id, ev.timestamp, ev.event_type);
        }
        builder.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Tsv,
    Csv,
}

impl InputFormat {
    /// Pick a format from the file extension; anything but `.csv` is TSV.
    pub fn from_path(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Tsv,
        }
    }
}

fn parse_row(builder: &mut EventLogBuilder, fields: &[&str], row: usize) -> Result<()> {
    if fields.len() != 4 {
        return Err(SubpopError::Parse {
            row,
            reason: format!("expected 4 fields, found {}", fields.len()),
        });
    }
    let timestamp: i64 = fields[2].trim().parse().map_err(|_| SubpopError::Parse {
        row,
        reason: format!("invalid timestamp {:?}", fields[2]),
    })?;
    if timestamp < 0 {
        return Err(SubpopError::Parse {
            row,
            reason: format!("negative timestamp {timestamp}"),
        });
    }
    let event_type = EventType::parse(fields[3]).ok_or_else(|| SubpopError::Parse {
        row,
        reason: format!("unknown event type {:?}", fields[3]),
    })?;
    builder.add(fields[0].trim(), fields[1].trim(), timestamp, event_type);
    Ok(())
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 4 && fields[2].trim().parse::<i64>().is_err()
}

/// Load an event log from a TSV or CSV file.
pub fn load_events(path: &Path, format: InputFormat) -> Result<EventLog> {
    let mut builder = EventLogBuilder::new();
    match format {
        InputFormat::Tsv => {
            let reader = BufReader::new(File::open(path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if idx == 0 && is_header(&fields) {
                    continue;
                }
                parse_row(&mut builder, &fields, idx + 1)?;
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_path(path)
                .map_err(|e| SubpopError::Parse {
                    row: 0,
                    reason: e.to_string(),
                })?;
            for (idx, record) in reader.records().enumerate() {
                let record = record.map_err(|e| SubpopError::Parse {
                    row: idx + 1,
                    reason: e.to_string(),
                })?;
                let fields: Vec<&str> = record.iter().collect();
                if fields.iter().all(|f| f.trim().is_empty()) {
                    continue;
                }
                if idx == 0 && is_header(&fields) {
                    continue;
                }
                parse_row(&mut builder, &fields, idx + 1)?;
            }
        }
    }
    builder.finish()
}

/// Keep only the `n` globally most-interacted items (ties broken by
/// ascending item id), re-densify the index, and drop users left with no
/// events.
pub fn sample_top_items(log: &EventLog, n: usize) -> Result<EventLog> {
    if n == 0 {
        return Err(SubpopError::InvalidArgument(
            "sample_top_items requires n >= 1".into(),
        ));
    }
    let counts = log.item_event_counts();
    let mut ranked: Vec<u32> = (0..log.num_items() as u32).collect();
    ranked.sort_by(|&a, &b| {
        counts[b as usize]
            .cmp(&counts[a as usize])
            .then_with(|| log.item_id(a as usize).cmp(log.item_id(b as usize)))
    });
    let keep: std::collections::HashSet<u32> = ranked.into_iter().take(n).collect();

    let mut builder = EventLogBuilder::new();
    for (u, ev) in log.global_order() {
        if keep.contains(&ev.item) {
            builder.add(
                log.user_id(u as usize),
                log.item_id(ev.item as usize),
                ev.timestamp,
                ev.event_type,
            );
        }
    }
    builder.finish()
}

/// Chronological train/test split over all interactions.
///
/// `train` and `test` share the full catalogue of the input log (same
/// dense user and item indices), so downstream components can score and
/// evaluate over one consistent item space.
#[derive(Debug, Clone)]
pub struct TemporalSplit {
    pub train: EventLog,
    pub test: EventLog,
    pub split_timestamp: i64,
    pub holdout_fraction: f64,
}

/// Split off the chronologically last `ceil(holdout_fraction * n)` events
/// (timestamp ties broken by input order) as the test set.
pub fn temporal_split(log: &EventLog, holdout_fraction: f64) -> Result<TemporalSplit> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(SubpopError::InvalidArgument(format!(
            "holdout fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let total = log.num_events();
    if total == 0 {
        return Err(SubpopError::EmptyLog);
    }
    let order = log.global_order();
    if order[0].1.timestamp == order[total - 1].1.timestamp {
        return Err(SubpopError::DegenerateSplit(
            "all events share one timestamp".into(),
        ));
    }
    // ceiling of f*n, with a small nudge so representation error in the
    // product cannot flip the count across an exact boundary
    let n_test = ((holdout_fraction * total as f64) - 1e-9).ceil().max(1.0) as usize;
    if n_test >= total {
        return Err(SubpopError::DegenerateSplit(
            "holdout fraction leaves no training events".into(),
        ));
    }
    let cut = total - n_test;
    let split_timestamp = order[cut].1.timestamp;

    let mut train_histories: Vec<Vec<LogEvent>> = vec![Vec::new(); log.num_users()];
    let mut test_histories: Vec<Vec<LogEvent>> = vec![Vec::new(); log.num_users()];
    for (pos, (u, ev)) in order.into_iter().enumerate() {
        if pos < cut {
            train_histories[u as usize].push(ev);
        } else {
            test_histories[u as usize].push(ev);
        }
    }
    let make = |histories: Vec<Vec<LogEvent>>| EventLog {
        user_ids: log.user_ids.clone(),
        item_ids: log.item_ids.clone(),
        user_index: log.user_index.clone(),
        item_index: log.item_index.clone(),
        histories,
    };
    Ok(TemporalSplit {
        train: make(train_histories),
        test: make(test_histories),
        split_timestamp,
        holdout_fraction,
    })
}

const SPLIT_FORMAT_VERSION: &str = "v1";

/// Write a split to a single TSV cache file with a version tag. The
/// catalogue is dumped in dense-index order ahead of the events, so a
/// reload reproduces the exact index assignment (index order matters:
/// it breaks ranking and quantisation ties).
pub fn write_split(split: &TemporalSplit, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "#subpop-split\t{SPLIT_FORMAT_VERSION}\tsplit_ts={}\tholdout={}",
        split.split_timestamp, split.holdout_fraction
    )?;
    for id in &split.train.user_ids {
        writeln!(w, "#user\t{id}")?;
    }
    for id in &split.train.item_ids {
        writeln!(w, "#item\t{id}")?;
    }
    for (tag, log) in [("train", &split.train), ("test", &split.test)] {
        for (u, ev) in log.global_order() {
            writeln!(
                w,
                "{tag}\t{}\t{}\t{}\t{}",
                log.user_id(u as usize),
                log.item_id(ev.item as usize),
                ev.timestamp,
                ev.event_type
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a split cache written by [`write_split`]. Train and test share
/// one catalogue built from all rows in file order.
pub fn read_split(path: &Path) -> Result<TemporalSplit> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or(SubpopError::EmptyLog)??;
    let head_fields: Vec<&str> = header.split('\t').collect();
    if head_fields.len() != 4 || head_fields[0] != "#subpop-split" {
        return Err(SubpopError::Parse {
            row: 1,
            reason: "missing #subpop-split header".into(),
        });
    }
    if head_fields[1] != SPLIT_FORMAT_VERSION {
        return Err(SubpopError::Parse {
            row: 1,
            reason: format!("unsupported split version {:?}", head_fields[1]),
        });
    }
    let split_timestamp: i64 = head_fields[2]
        .strip_prefix("split_ts=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| SubpopError::Parse {
            row: 1,
            reason: "bad split_ts field".into(),
        })?;
    let holdout_fraction: f64 = head_fields[3]
        .strip_prefix("holdout=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| SubpopError::Parse {
            row: 1,
            reason: "bad holdout field".into(),
        })?;

    // one shared catalogue (declared rows restore the original dense
    // order), two histories
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut user_index: HashMap<String, u32> = HashMap::new();
    let mut item_index: HashMap<String, u32> = HashMap::new();
    let mut train_histories: Vec<Vec<LogEvent>> = Vec::new();
    let mut test_histories: Vec<Vec<LogEvent>> = Vec::new();
    let mut seq = 0u64;
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "#user" if fields.len() == 2 => {
                user_index.insert(fields[1].to_string(), user_ids.len() as u32);
                user_ids.push(fields[1].to_string());
                train_histories.push(Vec::new());
                test_histories.push(Vec::new());
                continue;
            }
            "#item" if fields.len() == 2 => {
                item_index.insert(fields[1].to_string(), item_ids.len() as u32);
                item_ids.push(fields[1].to_string());
                continue;
            }
            _ => {}
        }
        if fields.len() != 5 {
            return Err(SubpopError::Parse {
                row,
                reason: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let is_train = match fields[0] {
            "train" => true,
            "test" => false,
            other => {
                return Err(SubpopError::Parse {
                    row,
                    reason: format!("unknown part tag {other:?}"),
                })
            }
        };
        let user = *user_index
            .get(fields[1])
            .ok_or_else(|| SubpopError::Parse {
                row,
                reason: format!("user {:?} missing from the catalogue section", fields[1]),
            })?;
        let item = *item_index
            .get(fields[2])
            .ok_or_else(|| SubpopError::Parse {
                row,
                reason: format!("item {:?} missing from the catalogue section", fields[2]),
            })?;
        let timestamp: i64 = fields[3].parse().map_err(|_| SubpopError::Parse {
            row,
            reason: format!("invalid timestamp {:?}", fields[3]),
        })?;
        let event_type = EventType::parse(fields[4]).ok_or_else(|| SubpopError::Parse {
            row,
            reason: format!("unknown event type {:?}", fields[4]),
        })?;
        let ev = LogEvent {
            item,
            timestamp,
            event_type,
            seq,
        };
        seq += 1;
        if is_train {
            train_histories[user as usize].push(ev);
        } else {
            test_histories[user as usize].push(ev);
        }
    }
    if seq == 0 {
        return Err(SubpopError::EmptyLog);
    }
    let sort_all = |histories: &mut Vec<Vec<LogEvent>>| {
        for h in histories.iter_mut() {
            h.sort_by_key(|ev| (ev.timestamp, ev.seq));
        }
    };
    sort_all(&mut train_histories);
    sort_all(&mut test_histories);
    let make = |histories: Vec<Vec<LogEvent>>| EventLog {
        user_ids: user_ids.clone(),
        item_ids: item_ids.clone(),
        user_index: user_index.clone(),
        item_index: item_index.clone(),
        histories,
    };
    Ok(TemporalSplit {
        train: make(train_histories),
        test: make(test_histories),
        split_timestamp,
        holdout_fraction,
    })
}

/// Dump an event log in the standard input format, chronological order.
pub fn write_events_tsv(log: &EventLog, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "user\titem\ttimestamp\tevent")?;
    for (u, ev) in log.global_order() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            log.user_id(u as usize),
            log.item_id(ev.item as usize),
            ev.timestamp,
            ev.event_type
        )?;
    }
    w.flush()?;
    Ok(())
}
