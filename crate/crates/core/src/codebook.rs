//! Sub-item codebook: truncated SVD of the binary user-item interaction
//! matrix, then per-split equal-frequency quantisation of the factor
//! columns into `V` codes.
//!
//! Split `j` quantises factor column `j`: items are sorted by factor
//! value (ties by item index) and cut into `V` contiguous buckets whose
//! sizes differ by at most one, so the code histogram stays balanced and
//! sub-ID count statistics remain comparable across codes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::EventLog;
use crate::error::{Result, SubpopError};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::rng::SplitMix64;
use crate::svd::{truncated_svd, SvdResult};

#[derive(Debug, Clone)]
pub struct CodebookConfig {
    /// Number of splits `m`; also the SVD rank.
    pub splits: usize,
    /// Codes per split `V`.
    pub codebook_size: u32,
    /// Full embedding dimensionality `d`; must be divisible by `splits`.
    pub dim: usize,
    pub svd_seed: u64,
    pub svd_tol: f64,
    pub svd_max_iter: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig {
            splits: 32,
            codebook_size: 256,
            dim: 256,
            svd_seed: 0,
            svd_tol: 1e-7,
            svd_max_iter: 300,
        }
    }
}

/// Item-to-code assignment table plus the SVD factors that produced it.
#[derive(Debug, Clone)]
pub struct Codebook {
    num_items: usize,
    m: usize,
    v: u32,
    sub_dim: usize,
    /// `num_items x m`, row-major; entries in `[0, v)`.
    codes: Vec<u32>,
    pub item_factors: DenseMatrix,
    pub singular_values: Vec<f64>,
}

impl Codebook {
    /// Wrap an externally assigned code table (tests, dumps, hand-built
    /// configurations). No factor matrix is attached.
    pub fn from_codes(m: usize, v: u32, sub_dim: usize, codes: Vec<u32>) -> Result<Codebook> {
        if m == 0 || v == 0 || sub_dim == 0 {
            return Err(SubpopError::InvalidArgument(
                "codebook dimensions must be positive".into(),
            ));
        }
        if !codes.len().is_multiple_of(m) {
            return Err(SubpopError::DimensionMismatch(format!(
                "code table length {} is not a multiple of m={m}",
                codes.len()
            )));
        }
        if let Some(&bad) = codes.iter().find(|&&z| z >= v) {
            return Err(SubpopError::InvalidArgument(format!(
                "code {bad} out of range for V={v}"
            )));
        }
        let num_items = codes.len() / m;
        Ok(Codebook {
            num_items,
            m,
            v,
            sub_dim,
            codes,
            item_factors: DenseMatrix::zeros(num_items, m),
            singular_values: vec![0.0; m],
        })
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_splits(&self) -> usize {
        self.m
    }

    pub fn codebook_size(&self) -> u32 {
        self.v
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn dim(&self) -> usize {
        self.m * self.sub_dim
    }

    /// The m-tuple of sub-IDs for an item.
    pub fn code_of(&self, item: usize) -> Result<&[u32]> {
        if item >= self.num_items {
            return Err(SubpopError::IndexOutOfRange {
                index: item,
                len: self.num_items,
            });
        }
        Ok(&self.codes[item * self.m..(item + 1) * self.m])
    }

    /// Number of items carrying each code within one split.
    pub fn code_histogram(&self, split: usize) -> Vec<u64> {
        let mut hist = vec![0u64; self.v as usize];
        for item in 0..self.num_items {
            hist[self.codes[item * self.m + split] as usize] += 1;
        }
        hist
    }
}

/// Binary user-item matrix over the training window: entry `(u, i)` is 1
/// if user `u` interacted with item `i` at least once, regardless of the
/// event type or how often.
pub fn build_interaction_matrix(train: &EventLog) -> Result<CsrMatrix> {
    if train.num_events() == 0 {
        return Err(SubpopError::EmptyLog);
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..train.num_users())
        .into_par_iter()
        .map(|u| {
            let mut items: Vec<u32> = train.history(u).iter().map(|ev| ev.item).collect();
            items.sort_unstable();
            items.dedup();
            items.into_iter().map(|i| (i, 1.0)).collect()
        })
        .collect();
    Ok(CsrMatrix::from_rows(train.num_items(), &rows))
}

/// Quantise each factor column independently into `v` equal-frequency
/// buckets; the bucket rank is the item's code for that split.
pub fn assign_codes(
    item_factors: &DenseMatrix,
    singular_values: &[f64],
    v: u32,
    sub_dim: usize,
) -> Result<Codebook> {
    if v == 0 {
        return Err(SubpopError::InvalidArgument(
            "codebook size must be at least 1".into(),
        ));
    }
    if sub_dim == 0 {
        return Err(SubpopError::InvalidArgument(
            "sub-embedding dimension must be at least 1".into(),
        ));
    }
    let n = item_factors.nrows;
    let m = item_factors.ncols;
    if m == 0 || n == 0 {
        return Err(SubpopError::InvalidArgument(
            "item factors must be non-empty".into(),
        ));
    }
    let per_split: Vec<Vec<u32>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let column = item_factors.column(j);
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| {
                column[a as usize]
                    .partial_cmp(&column[b as usize])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut codes = vec![0u32; n];
            for bucket in 0..v as usize {
                let lo = bucket * n / v as usize;
                let hi = (bucket + 1) * n / v as usize;
                for &item in &order[lo..hi] {
                    codes[item as usize] = bucket as u32;
                }
            }
            codes
        })
        .collect();
    let mut codes = vec![0u32; n * m];
    for (j, split_codes) in per_split.iter().enumerate() {
        for (i, &code) in split_codes.iter().enumerate() {
            codes[i * m + j] = code;
        }
    }
    Ok(Codebook {
        num_items: n,
        m,
        v,
        sub_dim,
        codes,
        item_factors: item_factors.clone(),
        singular_values: singular_values.to_vec(),
    })
}

/// Full pipeline: interaction matrix, rank-`splits` SVD, quantisation.
pub fn build_codebook(train: &EventLog, cfg: &CodebookConfig) -> Result<Codebook> {
    if cfg.splits == 0 {
        return Err(SubpopError::Config("splits must be at least 1".into()));
    }
    if !cfg.dim.is_multiple_of(cfg.splits) {
        return Err(SubpopError::Config(format!(
            "splits ({}) must divide the embedding dimension ({})",
            cfg.splits, cfg.dim
        )));
    }
    let matrix = build_interaction_matrix(train)?;
    let SvdResult {
        item_factors,
        singular_values,
    } = truncated_svd(
        &matrix,
        cfg.splits,
        cfg.svd_seed,
        cfg.svd_tol,
        cfg.svd_max_iter,
    )?;
    assign_codes(
        &item_factors,
        &singular_values,
        cfg.codebook_size,
        cfg.dim / cfg.splits,
    )
}

/// Per-split sub-embedding rows; `v * sub_dim` values per split.
#[derive(Debug, Clone)]
pub struct SubEmbeddingTable {
    m: usize,
    v: u32,
    sub_dim: usize,
    data: Vec<f64>,
}

impl SubEmbeddingTable {
    /// Seeded uniform init in `[-1/sqrt(d), 1/sqrt(d)]`.
    pub fn init_uniform(m: usize, v: u32, sub_dim: usize, seed: u64) -> Self {
        let d = m * sub_dim;
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = SplitMix64::new(seed);
        let data = (0..m * v as usize * sub_dim)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) * bound)
            .collect();
        SubEmbeddingTable {
            m,
            v,
            sub_dim,
            data,
        }
    }

    /// Build from explicit rows, split-major then code-major.
    pub fn from_rows(m: usize, v: u32, sub_dim: usize, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != m * v as usize * sub_dim {
            return Err(SubpopError::DimensionMismatch(format!(
                "expected {} values, got {}",
                m * v as usize * sub_dim,
                rows.len()
            )));
        }
        Ok(SubEmbeddingTable {
            m,
            v,
            sub_dim,
            data: rows,
        })
    }

    pub fn sub_embedding(&self, split: usize, code: u32) -> &[f64] {
        let base = (split * self.v as usize + code as usize) * self.sub_dim;
        &self.data[base..base + self.sub_dim]
    }
}

/// Concatenate the `m` sub-embeddings selected by `code(item)` into the
/// full `d`-dimensional vector.
pub fn reconstruct_embedding(
    cb: &Codebook,
    table: &SubEmbeddingTable,
    item: usize,
) -> Result<Vec<f64>> {
    if table.m != cb.m || table.v != cb.v || table.sub_dim != cb.sub_dim {
        return Err(SubpopError::DimensionMismatch(format!(
            "table is {}x{}x{}, codebook expects {}x{}x{}",
            table.m, table.v, table.sub_dim, cb.m, cb.v, cb.sub_dim
        )));
    }
    let code = cb.code_of(item)?;
    let mut out = Vec::with_capacity(cb.dim());
    for (j, &z) in code.iter().enumerate() {
        out.extend_from_slice(table.sub_embedding(j, z));
    }
    Ok(out)
}

const CODEBOOK_FORMAT_VERSION: &str = "v1";

/// Write `item_id, z_1, ..., z_m` rows under a versioned header.
pub fn write_codebook(cb: &Codebook, log: &EventLog, path: &Path) -> Result<()> {
    if log.num_items() != cb.num_items {
        return Err(SubpopError::DimensionMismatch(format!(
            "codebook covers {} items, log has {}",
            cb.num_items,
            log.num_items()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "#subpop-codebook\t{CODEBOOK_FORMAT_VERSION}\tm={}\tV={}\tsub_dim={}",
        cb.m, cb.v, cb.sub_dim
    )?;
    for item in 0..cb.num_items {
        write!(w, "{}", log.item_id(item))?;
        for &z in cb.code_of(item)? {
            write!(w, "\t{z}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Code table read back from a codebook dump (the SVD factors are not
/// part of the interchange format).
#[derive(Debug, Clone)]
pub struct CodebookDump {
    pub item_ids: Vec<String>,
    pub m: usize,
    pub v: u32,
    pub sub_dim: usize,
    pub codes: Vec<u32>,
}

impl CodebookDump {
    pub fn code_of(&self, item: usize) -> &[u32] {
        &self.codes[item * self.m..(item + 1) * self.m]
    }
}

pub fn read_codebook(path: &Path) -> Result<CodebookDump> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or(SubpopError::EmptyLog)??;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 5 || fields[0] != "#subpop-codebook" {
        return Err(SubpopError::Parse {
            row: 1,
            reason: "missing #subpop-codebook header".into(),
        });
    }
    if fields[1] != CODEBOOK_FORMAT_VERSION {
        return Err(SubpopError::Parse {
            row: 1,
            reason: format!("unsupported codebook version {:?}", fields[1]),
        });
    }
    let parse_kv = |field: &str, key: &str| -> Result<usize> {
        field
            .strip_prefix(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| SubpopError::Parse {
                row: 1,
                reason: format!("bad {key} field"),
            })
    };
    let m = parse_kv(fields[2], "m=")?;
    let v = parse_kv(fields[3], "V=")? as u32;
    let sub_dim = parse_kv(fields[4], "sub_dim=")?;
    let mut item_ids = Vec::new();
    let mut codes = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != m + 1 {
            return Err(SubpopError::Parse {
                row,
                reason: format!("expected {} fields, found {}", m + 1, fields.len()),
            });
        }
        item_ids.push(fields[0].to_string());
        for f in &fields[1..] {
            let z: u32 = f.parse().map_err(|_| SubpopError::Parse {
                row,
                reason: format!("invalid code {f:?}"),
            })?;
            if z >= v {
                return Err(SubpopError::Parse {
                    row,
                    reason: format!("code {z} out of range for V={v}"),
                });
            }
            codes.push(z);
        }
    }
    Ok(CodebookDump {
        item_ids,
        m,
        v,
        sub_dim,
        codes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EventLogBuilder, EventType};

    fn factors_from_columns(cols: &[&[f64]]) -> DenseMatrix {
        let nrows = cols[0].len();
        let mut m = DenseMatrix::zeros(nrows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, &val) in col.iter().enumerate() {
                m.set(i, j, val);
            }
        }
        m
    }

    #[test]
    fn median_split_assigns_expected_codes() {
        let factors = factors_from_columns(&[&[0.9, 0.1, 0.5, 0.7]]);
        let cb = assign_codes(&factors, &[1.0], 2, 4).unwrap();
        let codes: Vec<u32> = (0..4).map(|i| cb.code_of(i).unwrap()[0]).collect();
        assert_eq!(codes, vec![1, 0, 0, 1]);
    }

    #[test]
    fn single_bucket_means_all_zero_codes() {
        let factors = factors_from_columns(&[&[0.3, -0.2, 0.8]]);
        let cb = assign_codes(&factors, &[1.0], 1, 4).unwrap();
        for i in 0..3 {
            assert_eq!(cb.code_of(i).unwrap(), &[0]);
        }
    }

    #[test]
    fn large_codebook_gives_distinct_codes() {
        let factors = factors_from_columns(&[&[0.3, -0.2, 0.8], &[0.1, 0.2, 0.0]]);
        let cb = assign_codes(&factors, &[2.0, 1.0], 5, 4).unwrap();
        for j in 0..2 {
            let mut seen = std::collections::HashSet::new();
            for i in 0..3 {
                assert!(seen.insert(cb.code_of(i).unwrap()[j]));
            }
        }
    }

    #[test]
    fn histograms_stay_balanced() {
        let mut rng = SplitMix64::new(11);
        for &(n, v) in &[(10usize, 3u32), (12, 4), (100, 7), (5, 8)] {
            let col: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let factors = factors_from_columns(&[&col]);
            let cb = assign_codes(&factors, &[1.0], v, 1).unwrap();
            let hist = cb.code_histogram(0);
            let lo = n as u64 / v as u64;
            let hi = (n as u64).div_ceil(v as u64);
            for &c in &hist {
                assert!(c >= lo.min(hi) && c <= hi, "n={n} v={v} hist={hist:?}");
            }
            assert_eq!(hist.iter().sum::<u64>(), n as u64);
        }
    }

    #[test]
    fn per_column_positive_scaling_leaves_codes_unchanged() {
        let mut rng = SplitMix64::new(23);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..40).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        let scaled: Vec<Vec<f64>> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| c.iter().map(|x| x * (j as f64 + 0.5)).collect())
            .collect();
        fn borrow(v: &[Vec<f64>]) -> Vec<&[f64]> {
            v.iter().map(|c| c.as_slice()).collect()
        }
        let a = assign_codes(&factors_from_columns(&borrow(&cols)), &[1.0; 3], 8, 2).unwrap();
        let b = assign_codes(&factors_from_columns(&borrow(&scaled)), &[1.0; 3], 8, 2).unwrap();
        assert_eq!(a.codes, b.codes);
    }

    #[test]
    fn code_of_checks_bounds() {
        let factors = factors_from_columns(&[&[0.1, 0.2]]);
        let cb = assign_codes(&factors, &[1.0], 2, 4).unwrap();
        assert!(matches!(
            cb.code_of(2),
            Err(SubpopError::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn interaction_matrix_binarises_repeats() {
        let mut b = EventLogBuilder::new();
        b.add("u1", "i1", 1, EventType::Play);
        b.add("u1", "i2", 2, EventType::Play);
        b.add("u1", "i1", 3, EventType::Like);
        let log = b.finish().unwrap();
        let m = build_interaction_matrix(&log).unwrap();
        assert_eq!(m.nrows, 1);
        assert_eq!(m.ncols, 2);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row(0).1, &[1.0, 1.0]);
    }

    #[test]
    fn disjoint_histories_give_identity_pattern() {
        let mut b = EventLogBuilder::new();
        b.add("u1", "i1", 1, EventType::Play);
        b.add("u2", "i2", 2, EventType::Play);
        let log = b.finish().unwrap();
        let m = build_interaction_matrix(&log).unwrap();
        assert_eq!(m.row(0), (&[0u32][..], &[1.0][..]));
        assert_eq!(m.row(1), (&[1u32][..], &[1.0][..]));
    }

    #[test]
    fn reconstruction_concatenates_selected_rows() {
        let factors = factors_from_columns(&[&[0.1, 0.9], &[0.9, 0.1]]);
        let cb = assign_codes(&factors, &[1.0, 1.0], 2, 2).unwrap();
        // item 0 sorts first on split 0 and last on split 1
        assert_eq!(cb.code_of(0).unwrap(), &[0, 1]);
        let table =
            SubEmbeddingTable::from_rows(2, 2, 2, vec![1.0, 2.0, 5.0, 6.0, 7.0, 8.0, 3.0, 4.0])
                .unwrap();
        let w = reconstruct_embedding(&cb, &table, 0).unwrap();
        assert_eq!(w, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn identical_codes_reconstruct_identically() {
        // items 0 and 1 tie and both sort into the upper half
        let factors = factors_from_columns(&[&[0.5, 0.5, -1.0, -2.0]]);
        let cb = assign_codes(&factors, &[1.0], 2, 3).unwrap();
        assert_eq!(cb.code_of(0).unwrap(), cb.code_of(1).unwrap());
        let table = SubEmbeddingTable::init_uniform(1, 2, 3, 9);
        assert_eq!(
            reconstruct_embedding(&cb, &table, 0).unwrap(),
            reconstruct_embedding(&cb, &table, 1).unwrap()
        );
    }

    #[test]
    fn configured_dim_is_reconstructed_length() {
        let mut rng = SplitMix64::new(3);
        let cols: Vec<Vec<f64>> = (0..32)
            .map(|_| (0..6).map(|_| rng.next_f64()).collect())
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let cb = assign_codes(&factors_from_columns(&refs), &[1.0; 32], 4, 8).unwrap();
        assert_eq!(cb.num_splits(), 32);
        assert_eq!(cb.dim(), 256);
        let table = SubEmbeddingTable::init_uniform(32, 4, 8, 1);
        assert_eq!(reconstruct_embedding(&cb, &table, 0).unwrap().len(), 256);
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let factors = factors_from_columns(&[&[0.1, 0.2]]);
        let cb = assign_codes(&factors, &[1.0], 2, 4).unwrap();
        let table = SubEmbeddingTable::init_uniform(2, 2, 4, 0);
        assert!(matches!(
            reconstruct_embedding(&cb, &table, 0),
            Err(SubpopError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn build_codebook_is_deterministic_and_validates_config() {
        let mut b = EventLogBuilder::new();
        let mut rng = SplitMix64::new(40);
        for u in 0..12 {
            for t in 0..20 {
                let item = rng.next_below(15);
                b.add(&format!("u{u}"), &format!("i{item}"), t, EventType::Play);
            }
        }
        let log = b.finish().unwrap();
        let cfg = CodebookConfig {
            splits: 4,
            codebook_size: 3,
            dim: 16,
            svd_seed: 5,
            ..CodebookConfig::default()
        };
        let a = build_codebook(&log, &cfg).unwrap();
        let c = build_codebook(&log, &cfg).unwrap();
        assert_eq!(a.codes, c.codes);
        assert_eq!(a.singular_values, c.singular_values);
        // non-increasing singular values
        for w in a.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }

        let bad = CodebookConfig {
            splits: 5,
            dim: 16,
            ..CodebookConfig::default()
        };
        assert!(matches!(
            build_codebook(&log, &bad),
            Err(SubpopError::Config(_))
        ));
    }

    #[test]
    fn codebook_dump_roundtrip() {
        let mut b = EventLogBuilder::new();
        b.add("u1", "x", 1, EventType::Play);
        b.add("u1", "y", 2, EventType::Play);
        b.add("u2", "z", 3, EventType::Play);
        let log = b.finish().unwrap();
        let factors = factors_from_columns(&[&[0.3, 0.1, 0.2], &[0.9, 0.8, 0.7]]);
        let cb = assign_codes(&factors, &[2.0, 1.0], 2, 4).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_codebook(&cb, &log, f.path()).unwrap();
        let dump = read_codebook(f.path()).unwrap();
        assert_eq!(dump.m, 2);
        assert_eq!(dump.v, 2);
        assert_eq!(dump.item_ids, vec!["x", "y", "z"]);
        for i in 0..3 {
            assert_eq!(dump.code_of(i), cb.code_of(i).unwrap());
        }
    }
}
