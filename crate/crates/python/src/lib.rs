//! Python bindings: worlds, surrogate models, ranking and the run harness.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use alqueue::acquisition::rank as rank_indices;
use alqueue::dataset::{Fingerprint, Thresholds};
use alqueue::domain::{self, WorldBundle, WorldParams};
use alqueue::harness::run::summary_pairs;
use alqueue::harness::{self, MetricsSeries, ReorderParams};
use alqueue::surrogate::{self, FeatureMatrix, SurrogateEnsemble, SurrogateParams};
use alqueue::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Worker(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn metrics_rows<'py>(py: Python<'py>, m: &MetricsSeries) -> PyResult<Vec<Bound<'py, PyDict>>> {
    m.rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("n_simulated", r.n_simulated)?;
            d.set_item("cum_stable", r.cum_stable)?;
            d.set_item("holdout_rmse", r.holdout_rmse)?;
            d.set_item("win_sa", r.win_sa)?;
            d.set_item("win_t", r.win_t)?;
            d.set_item("stable_fraction", r.stable_fraction)?;
            Ok(d)
        })
        .collect()
}

/// Synthetic world: oracle, initial generator and the labelled datasets.
#[pyclass(name = "World", module = "alqueue_py", frozen)]
struct PyWorld {
    inner: WorldBundle,
}

#[pymethods]
impl PyWorld {
    #[staticmethod]
    #[pyo3(signature = (seed=0, n_reference=None, n_holdout=None, n_pool=None))]
    fn make(
        py: Python<'_>,
        seed: u64,
        n_reference: Option<usize>,
        n_holdout: Option<usize>,
        n_pool: Option<usize>,
    ) -> PyResult<Self> {
        let mut p = WorldParams::default();
        if let Some(n) = n_reference {
            p.n_reference = n;
        }
        if let Some(n) = n_holdout {
            p.n_holdout = n;
        }
        if let Some(n) = n_pool {
            p.n_pool = n;
        }
        let inner = py
            .allow_threads(|| domain::make_world(seed, &p))
            .map_err(py_err)?;
        Ok(PyWorld { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyWorld {
            inner: domain::load_bundle(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn n_pretrain(&self) -> usize {
        self.inner.pretrain.len()
    }

    #[getter]
    fn n_holdout(&self) -> usize {
        self.inner.holdout.len()
    }

    #[getter]
    fn n_pool(&self) -> usize {
        self.inner.pool.len()
    }

    #[getter]
    fn embedding_dim(&self) -> usize {
        self.inner.world.space.features.dim()
    }

    /// `(embeddings, strains)` for one of "pretrain", "holdout" or "pool".
    fn labelled(&self, which: &str) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let d = match which {
            "pretrain" => &self.inner.pretrain,
            "holdout" => &self.inner.holdout,
            "pool" => &self.inner.pool,
            _ => return Err(PyValueError::new_err(format!("unknown dataset {which:?}"))),
        };
        let mut xs = Vec::with_capacity(d.len());
        let mut ys = Vec::with_capacity(d.len());
        for r in d.iter() {
            xs.push(r.candidate.embedding.clone());
            ys.push(r.strain().map_err(py_err)?);
        }
        Ok((xs, ys))
    }

    /// Number of stable records in a dataset under the default thresholds.
    fn stable_count(&self, which: &str) -> PyResult<usize> {
        let d = match which {
            "pretrain" => &self.inner.pretrain,
            "holdout" => &self.inner.holdout,
            "pool" => &self.inner.pool,
            _ => return Err(PyValueError::new_err(format!("unknown dataset {which:?}"))),
        };
        Ok(d.stable_subset(&Thresholds::default())
            .map_err(py_err)?
            .len())
    }

    fn __repr__(&self) -> String {
        format!(
            "World(pretrain={}, holdout={}, pool={})",
            self.inner.pretrain.len(),
            self.inner.holdout.len(),
            self.inner.pool.len()
        )
    }
}

/// Bagged regression-tree ensemble.
#[pyclass(name = "Model", module = "alqueue_py", frozen)]
struct PyModel {
    inner: SurrogateEnsemble,
}

fn params(n_trees: usize, max_depth: usize, min_leaf: usize) -> SurrogateParams {
    SurrogateParams {
        n_trees,
        max_depth,
        min_leaf,
        ..SurrogateParams::default()
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (x, y, seed=0, n_trees=100, max_depth=8, min_leaf=3))]
    fn fit(
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        seed: u64,
        n_trees: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> PyResult<Self> {
        let cols = x.first().map_or(0, Vec::len);
        let mut m = FeatureMatrix::new(cols);
        for row in &x {
            m.push_row(row).map_err(py_err)?;
        }
        let p = params(n_trees, max_depth, min_leaf);
        let inner = py
            .allow_threads(|| surrogate::fit(&m, &y, &p, seed))
            .map_err(py_err)?;
        Ok(PyModel { inner })
    }

    /// Fit on a world's pretraining set.
    #[staticmethod]
    #[pyo3(signature = (world, seed=0, n_trees=100))]
    fn fit_world(py: Python<'_>, world: &PyWorld, seed: u64, n_trees: usize) -> PyResult<Self> {
        let p = params(n_trees, 8, 3);
        let inner = py
            .allow_threads(|| surrogate::fit_dataset(&world.inner.pretrain, &p, seed))
            .map_err(py_err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: SurrogateEnsemble::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    /// `(mean, spread)` for one feature vector.
    fn predict(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        let p = self.inner.predict(&x).map_err(py_err)?;
        Ok((p.mean, p.spread))
    }

    fn predict_many(&self, xs: Vec<Vec<f64>>) -> PyResult<Vec<(f64, f64)>> {
        xs.iter()
            .map(|x| {
                self.inner
                    .predict(x)
                    .map(|p| (p.mean, p.spread))
                    .map_err(py_err)
            })
            .collect()
    }

    fn holdout_rmse(&self, world: &PyWorld) -> PyResult<f64> {
        surrogate::holdout_rmse(&self.inner, &world.inner.holdout).map_err(py_err)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.n_trees()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n_trees={}, n_features={})",
            self.inner.n_trees(),
            self.inner.n_features()
        )
    }
}

/// Tanimoto distance between two 64-bit fingerprints.
#[pyfunction]
fn tanimoto(a: u64, b: u64) -> PyResult<f64> {
    if a == 0 || b == 0 {
        return Err(PyValueError::new_err("fingerprints must be non-empty"));
    }
    Ok(domain::tanimoto(Fingerprint(a), Fingerprint(b)))
}

/// Fingerprint with the given bit indices set.
#[pyfunction]
fn fingerprint(bits: Vec<u32>) -> PyResult<u64> {
    if bits.iter().any(|&b| b >= 64) {
        return Err(PyValueError::new_err("bit index out of range"));
    }
    Ok(Fingerprint::from_indices(bits).0)
}

/// Indices that sort `priorities` ascending, ties by smaller id.
#[pyfunction]
fn rank(ids: Vec<u64>, priorities: Vec<f64>) -> PyResult<Vec<usize>> {
    rank_indices(&ids, &priorities).map_err(py_err)
}

/// `(name, kind, description)` for every preset.
#[pyfunction]
fn presets() -> Vec<(String, String, String)> {
    harness::all_presets()
        .into_iter()
        .map(|p| {
            let kind = match p.kind {
                harness::PresetKind::Reorder(_) => "reorder",
                harness::PresetKind::Workflow { .. } => "workflow",
            };
            (
                p.name.to_string(),
                kind.to_string(),
                p.description.to_string(),
            )
        })
        .collect()
}

/// Run a workflow preset. Returns `{"summary": {...}, "metrics": [...]}`.
#[pyfunction]
#[pyo3(signature = (name, world, seed=0, out_dir=None, overrides=None))]
fn run_preset<'py>(
    py: Python<'py>,
    name: &str,
    world: &PyWorld,
    seed: u64,
    out_dir: Option<PathBuf>,
    overrides: Option<Vec<(String, String)>>,
) -> PyResult<Bound<'py, PyDict>> {
    let overrides = overrides.unwrap_or_default();
    let out = py
        .allow_threads(|| {
            harness::run_preset(name, seed, &world.inner, out_dir.as_deref(), &overrides)
        })
        .map_err(py_err)?;
    let summary = PyDict::new(py);
    for (k, v) in summary_pairs(&out) {
        summary.set_item(k, v)?;
    }
    let d = PyDict::new(py);
    d.set_item("summary", summary)?;
    d.set_item("metrics", metrics_rows(py, &out.metrics)?)?;
    Ok(d)
}

/// Offline reorder of the world's pool with one strategy
/// ("random", "exploit", "explore", "lcb:<lambda>" or a preset name).
#[pyfunction]
#[pyo3(signature = (strategy, world, seed=0, batch=200, warm=200, n_trees=100))]
fn reorder<'py>(
    py: Python<'py>,
    strategy: &str,
    world: &PyWorld,
    seed: u64,
    batch: usize,
    warm: usize,
    n_trees: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = harness::strategy(strategy).map_err(py_err)?;
    let p = ReorderParams {
        batch,
        warm,
        surrogate: params(n_trees, 8, 3),
        ..ReorderParams::default()
    };
    let w = &world.inner;
    let m = py
        .allow_threads(|| harness::reorder_run(&w.pool, Some(&w.holdout), &spec, &p, seed))
        .map_err(py_err)?;
    metrics_rows(py, &m)
}

/// Text comparison of two or more run directories.
#[pyfunction]
fn compare(dirs: Vec<PathBuf>) -> PyResult<String> {
    Ok(harness::compare_runs(&dirs).map_err(py_err)?.to_text())
}

/// Recompute metrics from a run's events; true when they match the saved file.
#[pyfunction]
fn replay(dir: PathBuf) -> PyResult<bool> {
    Ok(harness::replay(Path::new(&dir)).map_err(py_err)?.identical)
}

#[pymodule]
fn alqueue_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWorld>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(fingerprint, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(reorder, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
