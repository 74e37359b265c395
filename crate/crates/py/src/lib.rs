//! Python bindings for the subpop core: event logs, temporal splits,
//! codebooks, popularity profiles, scorers, fusion, metrics, and the
//! trade-off sweep.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use subpop_core::codebook::{build_codebook, write_codebook, CodebookConfig};
use subpop_core::dataset::{
    load_events, read_split, sample_top_items, temporal_split, write_events_tsv, write_split,
    EventLog, InputFormat, TemporalSplit,
};
use subpop_core::error::{ErrorCategory, SubpopError};
use subpop_core::experiment::{
    run_sweep, threshold_table, SweepOptions, SweepSpec, TradeoffReport,
};
use subpop_core::fusion::FusionWeights;
use subpop_core::metrics::build_relevance;
use subpop_core::popularity::{build_profile, UserPopularityProfile};
use subpop_core::scorer::{
    global_popularity_scorer, load_external_logits, markov_scorer, svd_dot_scorer, BaseScorer,
};
use subpop_core::synth::{generate, SynthConfig};
use subpop_core::{emit_plot, Codebook, SubEmbeddingTable};

fn to_py_err(err: SubpopError) -> PyErr {
    if let SubpopError::IndexOutOfRange { .. } = err {
        return PyIndexError::new_err(err.to_string());
    }
    match err.category() {
        ErrorCategory::Io => PyIOError::new_err(err.to_string()),
        ErrorCategory::Numeric => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

trait IntoPyResult<T> {
    fn into_py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for Result<T, SubpopError> {
    fn into_py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

#[pyclass(name = "EventLog")]
struct PyEventLog {
    inner: EventLog,
}

#[pymethods]
impl PyEventLog {
    fn num_users(&self) -> usize {
        self.inner.num_users()
    }

    fn num_items(&self) -> usize {
        self.inner.num_items()
    }

    fn num_events(&self) -> usize {
        self.inner.num_events()
    }

    fn user_id(&self, user: usize) -> PyResult<String> {
        if user >= self.inner.num_users() {
            return Err(PyIndexError::new_err(format!("user {user} out of range")));
        }
        Ok(self.inner.user_id(user).to_string())
    }

    fn item_id(&self, item: usize) -> PyResult<String> {
        if item >= self.inner.num_items() {
            return Err(PyIndexError::new_err(format!("item {item} out of range")));
        }
        Ok(self.inner.item_id(item).to_string())
    }

    fn user_dense(&self, id: &str) -> Option<u32> {
        self.inner.user_dense(id)
    }

    fn item_dense(&self, id: &str) -> Option<u32> {
        self.inner.item_dense(id)
    }

    /// One `(item, timestamp, event)` triple per interaction, in
    /// chronological order.
    fn history(&self, user: usize) -> PyResult<Vec<(u32, i64, String)>> {
        if user >= self.inner.num_users() {
            return Err(PyIndexError::new_err(format!("user {user} out of range")));
        }
        Ok(self
            .inner
            .history(user)
            .iter()
            .map(|ev| (ev.item, ev.timestamp, ev.event_type.to_string()))
            .collect())
    }

    fn history_items(&self, user: usize) -> PyResult<Vec<u32>> {
        Ok(self.history(user)?.into_iter().map(|(i, _, _)| i).collect())
    }

    fn sample_top_items(&self, n: usize) -> PyResult<PyEventLog> {
        Ok(PyEventLog {
            inner: sample_top_items(&self.inner, n).into_py()?,
        })
    }

    fn temporal_split(&self, holdout_fraction: f64) -> PyResult<PyTemporalSplit> {
        Ok(PyTemporalSplit {
            inner: temporal_split(&self.inner, holdout_fraction).into_py()?,
        })
    }

    fn write_tsv(&self, path: PathBuf) -> PyResult<()> {
        write_events_tsv(&self.inner, &path).into_py()
    }

    fn __repr__(&self) -> String {
        format!(
            "EventLog(users={}, items={}, events={})",
            self.inner.num_users(),
            self.inner.num_items(),
            self.inner.num_events()
        )
    }
}

#[pyclass(name = "TemporalSplit")]
struct PyTemporalSplit {
    inner: TemporalSplit,
}

#[pymethods]
impl PyTemporalSplit {
    #[getter]
    fn train(&self) -> PyEventLog {
        PyEventLog {
            inner: self.inner.train.clone(),
        }
    }

    #[getter]
    fn test(&self) -> PyEventLog {
        PyEventLog {
            inner: self.inner.test.clone(),
        }
    }

    #[getter]
    fn split_timestamp(&self) -> i64 {
        self.inner.split_timestamp
    }

    #[getter]
    fn holdout_fraction(&self) -> f64 {
        self.inner.holdout_fraction
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_split(&self.inner, &path).into_py()
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyTemporalSplit> {
        Ok(PyTemporalSplit {
            inner: read_split(&path).into_py()?,
        })
    }
}

#[pyclass(name = "Codebook")]
struct PyCodebook {
    inner: Codebook,
}

#[pymethods]
impl PyCodebook {
    fn num_items(&self) -> usize {
        self.inner.num_items()
    }

    fn num_splits(&self) -> usize {
        self.inner.num_splits()
    }

    fn codebook_size(&self) -> u32 {
        self.inner.codebook_size()
    }

    fn sub_dim(&self) -> usize {
        self.inner.sub_dim()
    }

    fn code_of(&self, item: usize) -> PyResult<Vec<u32>> {
        Ok(self.inner.code_of(item).into_py()?.to_vec())
    }

    fn code_histogram(&self, split: usize) -> PyResult<Vec<u64>> {
        if split >= self.inner.num_splits() {
            return Err(PyIndexError::new_err(format!("split {split} out of range")));
        }
        Ok(self.inner.code_histogram(split))
    }

    fn singular_values(&self) -> Vec<f64> {
        self.inner.singular_values.clone()
    }

    fn save(&self, log: &PyEventLog, path: PathBuf) -> PyResult<()> {
        write_codebook(&self.inner, &log.inner, &path).into_py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Codebook(items={}, m={}, V={})",
            self.inner.num_items(),
            self.inner.num_splits(),
            self.inner.codebook_size()
        )
    }
}

#[pyclass(name = "UserProfile")]
struct PyUserProfile {
    inner: UserPopularityProfile,
}

#[pymethods]
impl PyUserProfile {
    fn history_len(&self) -> usize {
        self.inner.history_len()
    }

    fn item_count(&self, item: u32) -> u32 {
        self.inner.item_count(item)
    }

    fn subid_count(&self, split: usize, code: u32) -> PyResult<u32> {
        if split >= self.inner.num_splits() {
            return Err(PyIndexError::new_err(format!("split {split} out of range")));
        }
        Ok(self.inner.subid_count(split, code))
    }

    #[pyo3(signature = (item, epsilon = 1.0))]
    fn pps_raw(&self, item: u32, epsilon: f64) -> f64 {
        subpop_core::popularity::pps_raw(&self.inner, item, epsilon)
    }

    #[pyo3(signature = (item, codebook, epsilon = 1.0))]
    fn spps_raw(&self, item: usize, codebook: &PyCodebook, epsilon: f64) -> PyResult<f64> {
        subpop_core::popularity::spps_raw(&self.inner, item, &codebook.inner, epsilon).into_py()
    }

    #[pyo3(signature = (num_items, epsilon = 1.0))]
    fn pps_std(&self, num_items: usize, epsilon: f64) -> Vec<f64> {
        subpop_core::popularity::pps_std(&self.inner, num_items, epsilon).values
    }

    #[pyo3(signature = (codebook, epsilon = 1.0))]
    fn spps_std(&self, codebook: &PyCodebook, epsilon: f64) -> PyResult<Vec<f64>> {
        Ok(
            subpop_core::popularity::spps_std(&self.inner, &codebook.inner, epsilon)
                .into_py()?
                .values,
        )
    }
}

#[pyclass(name = "Scorer")]
struct PyScorer {
    inner: Box<dyn BaseScorer>,
}

#[pymethods]
impl PyScorer {
    /// Returns `(logits, cold_start)` for one user.
    fn score(&self, user: u32, history: Vec<u32>) -> PyResult<(Vec<f64>, bool)> {
        let out = self.inner.score(user, &history).into_py()?;
        Ok((out.logits, out.cold_start))
    }

    fn name(&self) -> String {
        self.inner.name().to_string()
    }
}

#[pyclass(name = "TradeoffReport")]
struct PyTradeoffReport {
    inner: TradeoffReport,
}

#[pymethods]
impl PyTradeoffReport {
    /// Rows as `(mode, alpha, beta, ndcg, novelty, users_evaluated,
    /// users_excluded)` tuples.
    fn rows(&self) -> Vec<(String, f64, f64, f64, f64, usize, usize)> {
        self.inner
            .rows
            .iter()
            .map(|r| {
                (
                    r.mode.to_string(),
                    r.alpha,
                    r.beta,
                    r.ndcg,
                    r.novelty,
                    r.users_evaluated,
                    r.users_excluded,
                )
            })
            .collect()
    }

    fn to_tsv(&self) -> String {
        self.inner.to_tsv()
    }

    fn save_tsv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_tsv(&path).into_py()
    }

    fn save_plot(&self, path: PathBuf) -> PyResult<()> {
        emit_plot(&self.inner, &path).into_py()
    }

    /// Best NDCG per novelty threshold; `None` when no row qualifies.
    #[pyo3(signature = (thresholds, mode = None))]
    fn threshold_table(
        &self,
        thresholds: Vec<f64>,
        mode: Option<String>,
    ) -> PyResult<Vec<(f64, Option<f64>)>> {
        let rows: Vec<_> = match &mode {
            Some(m) => self
                .inner
                .rows
                .iter()
                .filter(|r| r.mode.as_str() == m)
                .cloned()
                .collect(),
            None => self.inner.rows.clone(),
        };
        Ok(threshold_table(&rows, &thresholds))
    }

    fn extend(&mut self, other: &PyTradeoffReport) -> PyResult<()> {
        self.inner.extend(other.inner.clone()).into_py()
    }

    #[getter]
    fn evaluated_users(&self) -> Vec<u32> {
        self.inner.evaluated_users.clone()
    }

    #[getter]
    fn cold_start_fallbacks(&self) -> usize {
        self.inner.cold_start_fallbacks
    }

    #[getter]
    fn users_excluded(&self) -> usize {
        self.inner.exclusions.total()
    }
}

#[pyfunction(name = "load_events")]
#[pyo3(signature = (path, format = None))]
fn py_load_events(path: PathBuf, format: Option<&str>) -> PyResult<PyEventLog> {
    let format = match format {
        None | Some("auto") => InputFormat::from_path(&path),
        Some("tsv") => InputFormat::Tsv,
        Some("csv") => InputFormat::Csv,
        Some(other) => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
    };
    Ok(PyEventLog {
        inner: load_events(&path, format).into_py()?,
    })
}

#[pyfunction]
#[pyo3(signature = (users, items, seed = 0, genres = 10, events_per_user = 100,
                    repeat_prob = 0.7, pool_size = 10, genre_affinity = 0.8,
                    like_prob = 0.1, zipf_exponent = 1.0))]
#[allow(clippy::too_many_arguments)]
fn synth_events(
    py: Python<'_>,
    users: usize,
    items: usize,
    seed: u64,
    genres: usize,
    events_per_user: usize,
    repeat_prob: f64,
    pool_size: usize,
    genre_affinity: f64,
    like_prob: f64,
    zipf_exponent: f64,
) -> PyResult<PyEventLog> {
    let cfg = SynthConfig {
        users,
        items,
        genres,
        events_per_user,
        repeat_prob,
        pool_size,
        genre_affinity,
        like_prob,
        zipf_exponent,
        seed,
    };
    Ok(PyEventLog {
        inner: py.detach(|| generate(&cfg)).into_py()?,
    })
}

#[pyfunction(name = "build_codebook")]
#[pyo3(signature = (train, splits = 32, codebook_size = 256, dim = 256,
                    svd_seed = 0, svd_tol = 1e-7, svd_max_iter = 300))]
#[allow(clippy::too_many_arguments)]
fn py_build_codebook(
    py: Python<'_>,
    train: &PyEventLog,
    splits: usize,
    codebook_size: u32,
    dim: usize,
    svd_seed: u64,
    svd_tol: f64,
    svd_max_iter: usize,
) -> PyResult<PyCodebook> {
    let cfg = CodebookConfig {
        splits,
        codebook_size,
        dim,
        svd_seed,
        svd_tol,
        svd_max_iter,
    };
    let inner = py.detach(|| build_codebook(&train.inner, &cfg)).into_py()?;
    Ok(PyCodebook { inner })
}

#[pyfunction(name = "build_profile")]
fn py_build_profile(
    user: u32,
    history: Vec<u32>,
    codebook: &PyCodebook,
) -> PyResult<PyUserProfile> {
    Ok(PyUserProfile {
        inner: build_profile(user, &history, &codebook.inner).into_py()?,
    })
}

#[pyfunction]
#[pyo3(signature = (train, kind = "markov", smoothing = 0.1, codebook = None,
                    history_window = 50, embed_seed = 1, external_path = None))]
fn make_scorer(
    train: &PyEventLog,
    kind: &str,
    smoothing: f64,
    codebook: Option<&PyCodebook>,
    history_window: usize,
    embed_seed: u64,
    external_path: Option<PathBuf>,
) -> PyResult<PyScorer> {
    let inner: Box<dyn BaseScorer> = match kind {
        "globalpop" => Box::new(global_popularity_scorer(&train.inner).into_py()?),
        "markov" => Box::new(markov_scorer(&train.inner, smoothing).into_py()?),
        "svddot" => {
            let cb = codebook
                .ok_or_else(|| PyValueError::new_err("svddot scorer needs codebook=..."))?;
            let table = SubEmbeddingTable::init_uniform(
                cb.inner.num_splits(),
                cb.inner.codebook_size(),
                cb.inner.sub_dim(),
                embed_seed,
            );
            Box::new(svd_dot_scorer(&cb.inner, &table, history_window).into_py()?)
        }
        "external" => {
            let path = external_path
                .ok_or_else(|| PyValueError::new_err("external scorer needs external_path=..."))?;
            Box::new(load_external_logits(&path, &train.inner).into_py()?)
        }
        other => return Err(PyValueError::new_err(format!("unknown scorer {other:?}"))),
    };
    Ok(PyScorer { inner })
}

#[pyfunction(name = "fuse")]
fn py_fuse(
    base: Vec<f64>,
    pps_std: Vec<f64>,
    spps_std: Vec<f64>,
    alpha: f64,
    beta: f64,
) -> PyResult<Vec<f64>> {
    let weights = FusionWeights::new(alpha, beta).into_py()?;
    subpop_core::fusion::fuse(&base, &pps_std, &spps_std, &weights).into_py()
}

#[pyfunction(name = "rank_top_k")]
fn py_rank_top_k(scores: Vec<f64>, k: usize) -> PyResult<Vec<u32>> {
    if k > scores.len() {
        return Err(PyValueError::new_err("k exceeds the candidate count"));
    }
    Ok(subpop_core::fusion::rank_top_k(&scores, k))
}

#[pyfunction(name = "standardize")]
fn py_standardize(values: Vec<f64>) -> PyResult<(Vec<f64>, f64, f64)> {
    if values.is_empty() {
        return Err(PyValueError::new_err(
            "standardize needs at least one value",
        ));
    }
    let s = subpop_core::popularity::standardize(&values);
    Ok((s.values, s.mu, s.sigma))
}

#[pyfunction(name = "ndcg_at_k")]
fn py_ndcg_at_k(recs: Vec<u32>, rel: HashMap<u32, i32>, k: usize) -> PyResult<Option<f64>> {
    if k > recs.len() {
        return Err(PyValueError::new_err("k exceeds the recommendation list"));
    }
    subpop_core::metrics::ndcg_at_k(&recs, &rel, k).into_py()
}

#[pyfunction(name = "novelty_at_k")]
#[pyo3(signature = (recs, profile, k, epsilon = 1e-8))]
fn py_novelty_at_k(
    recs: Vec<u32>,
    profile: &PyUserProfile,
    k: usize,
    epsilon: f64,
) -> PyResult<f64> {
    if k > recs.len() {
        return Err(PyValueError::new_err("k exceeds the recommendation list"));
    }
    subpop_core::metrics::novelty_at_k(&recs, &profile.inner, k, epsilon).into_py()
}

/// Graded test relevance per user: `{item: grade}` with like=2, play=1,
/// skip=-1, dislike=-2 and greatest-|grade|-then-latest dedup.
#[pyfunction(name = "build_relevance")]
fn py_build_relevance(test: &PyEventLog) -> Vec<HashMap<u32, i32>> {
    let rel = build_relevance(&test.inner);
    (0..rel.num_users())
        .map(|u| rel.grades(u).clone())
        .collect()
}

#[pyfunction(name = "run_sweep")]
#[pyo3(signature = (split, codebook, scorer, mode = "pps-only", grid = None,
                    fixed_beta = 0.9, k = 40, pps_epsilon = 1.0,
                    novelty_epsilon = 1e-8, standardize_logits = false,
                    eval_users = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn py_run_sweep(
    py: Python<'_>,
    split: &PyTemporalSplit,
    codebook: &PyCodebook,
    scorer: &PyScorer,
    mode: &str,
    grid: Option<Vec<f64>>,
    fixed_beta: f64,
    k: usize,
    pps_epsilon: f64,
    novelty_epsilon: f64,
    standardize_logits: bool,
    eval_users: Option<usize>,
    seed: u64,
) -> PyResult<PyTradeoffReport> {
    let spec = match mode {
        "pps-only" => {
            SweepSpec::pps_only(&grid.unwrap_or_else(subpop_core::experiment::default_grid))
        }
        "spps-only" => {
            SweepSpec::spps_only(&grid.unwrap_or_else(subpop_core::experiment::default_grid))
        }
        "combined" => SweepSpec::combined(
            &grid.unwrap_or_else(|| {
                subpop_core::experiment::default_combined_alpha_grid(fixed_beta)
            }),
            fixed_beta,
        ),
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    }
    .into_py()?;
    let opts = SweepOptions {
        k,
        pps_epsilon,
        novelty_epsilon,
        standardize_logits,
        eval_users,
        subsample_seed: seed,
    };
    let inner = py
        .detach(|| {
            run_sweep(
                &split.inner,
                &codebook.inner,
                scorer.inner.as_ref(),
                &spec,
                &opts,
            )
        })
        .into_py()?;
    Ok(PyTradeoffReport { inner })
}

#[pymodule]
fn subpop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEventLog>()?;
    m.add_class::<PyTemporalSplit>()?;
    m.add_class::<PyCodebook>()?;
    m.add_class::<PyUserProfile>()?;
    m.add_class::<PyScorer>()?;
    m.add_class::<PyTradeoffReport>()?;
    m.add_function(wrap_pyfunction!(py_load_events, m)?)?;
    m.add_function(wrap_pyfunction!(synth_events, m)?)?;
    m.add_function(wrap_pyfunction!(py_build_codebook, m)?)?;
    m.add_function(wrap_pyfunction!(py_build_profile, m)?)?;
    m.add_function(wrap_pyfunction!(make_scorer, m)?)?;
    m.add_function(wrap_pyfunction!(py_fuse, m)?)?;
    m.add_function(wrap_pyfunction!(py_rank_top_k, m)?)?;
    m.add_function(wrap_pyfunction!(py_standardize, m)?)?;
    m.add_function(wrap_pyfunction!(py_ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(py_novelty_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(py_build_relevance, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_sweep, m)?)?;
    Ok(())
}
