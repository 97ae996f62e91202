//! Python bindings: synthetic data, instance building, training,
//! cross-validation, prediction, grid summaries and glyph rendering.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vinewatch_core::aggregate::{summarize_catalog, CellSummary as CoreCellSummary, GridSpec};
use vinewatch_core::features::{self, DiskSampling, LabeledInstance};
use vinewatch_core::glyph::{self, Outcome};
use vinewatch_core::ingest::{generate_synthetic, SynthConfig, SyntheticData as CoreData};
use vinewatch_core::learn::{self, ConfusionMatrix, Dataset, EnsembleModel, ForestParams, LearnConfig, NoProbe};
use vinewatch_core::predict::{self, PredictionCatalog};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn learn_config(trees: usize) -> LearnConfig {
    LearnConfig { forest: ForestParams { n_trees: trees, ..ForestParams::default() }, ..LearnConfig::default() }
}

fn sampling(radius_m: f64, divisions: u32) -> DiskSampling {
    DiskSampling { radius_m, divisions }
}

/// Generated observations, land use, elevation and areas.
#[pyclass(frozen)]
struct SyntheticData {
    inner: CoreData,
}

#[pymethods]
impl SyntheticData {
    /// `preset` is "default" or "small".
    #[staticmethod]
    #[pyo3(signature = (seed = 7, preset = "default"))]
    fn generate(seed: u64, preset: &str) -> PyResult<Self> {
        let config = match preset {
            "default" => SynthConfig::default(),
            "small" => SynthConfig::small(),
            other => return Err(value_err(format!("unknown preset {other:?}"))),
        };
        Ok(Self { inner: generate_synthetic(&config, seed).map_err(value_err)? })
    }

    #[getter]
    fn n_observations(&self) -> usize {
        self.inner.observations.len()
    }

    #[getter]
    fn n_areas(&self) -> usize {
        self.inner.areas.len()
    }

    #[getter]
    fn n_stations(&self) -> usize {
        self.inner.stations.len()
    }

    /// Code of the planted woodland category.
    #[getter]
    fn wood_code(&self) -> String {
        self.inner.manifest.codes()[self.inner.wood_category].clone()
    }

    #[pyo3(signature = (percentile = 0.8, radius_m = 5000.0, divisions = 64))]
    fn build_instances(&self, percentile: f64, radius_m: f64, divisions: u32) -> PyResult<Instances> {
        let d = &self.inner;
        let (instances, summary) = features::build_instances(&d.observations, &d.landuse, &d.elevation, percentile, &sampling(radius_m, divisions))
            .map_err(value_err)?;
        Ok(Instances { inner: instances, threshold: summary.threshold_value })
    }

    #[pyo3(signature = (model, radius_m = 5000.0, divisions = 64))]
    fn predict(&self, model: &Model, radius_m: f64, divisions: u32) -> PyResult<Catalog> {
        let d = &self.inner;
        let catalog = predict::build_catalog(&model.inner, &d.areas, &d.landuse, &d.elevation, &sampling(radius_m, divisions)).map_err(value_err)?;
        Ok(Catalog { inner: catalog })
    }
}

/// Labeled station-month instances.
#[pyclass(frozen)]
struct Instances {
    inner: Vec<LabeledInstance>,
    threshold: f64,
}

#[pymethods]
impl Instances {
    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        let inner = features::read_instances(&path).map_err(value_err)?;
        Ok(Self { inner, threshold: f64::NAN })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        features::write_instances(std::io::BufWriter::new(file), &self.inner).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Score threshold used for labeling (NaN when read from CSV).
    #[getter]
    fn threshold(&self) -> f64 {
        self.threshold
    }

    /// (positive, negative)
    fn class_counts(&self) -> (usize, usize) {
        let p = self.inner.iter().filter(|i| i.label.is_positive()).count();
        (p, self.inner.len() - p)
    }

    /// Feature rows: month, height, then land-use fractions.
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.iter().map(|i| i.features.as_slice().to_vec()).collect()
    }

    fn labels(&self) -> Vec<bool> {
        self.inner.iter().map(|i| i.label.is_positive()).collect()
    }

    /// Mean kappa per classifier, ensemble included.
    #[pyo3(signature = (folds = 10, seed = 7, trees = 100, shuffle_labels = false))]
    fn cross_validate(&self, py: Python<'_>, folds: usize, seed: u64, trees: usize, shuffle_labels: bool) -> PyResult<Vec<(String, f64)>> {
        let mut data = Dataset::from_instances(&self.inner).map_err(value_err)?;
        if shuffle_labels {
            data = data.with_shuffled_labels(seed);
        }
        let config = learn_config(trees);
        let report = py.detach(|| learn::cross_validate(&data, folds, &config, seed, &NoProbe)).map_err(value_err)?;
        Ok(report.rows.into_iter().map(|r| (r.classifier, r.mean_kappa)).collect())
    }
}

/// Stacked ensemble.
#[pyclass(frozen)]
struct Model {
    inner: EnsembleModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (instances, seed = 7, trees = 100))]
    fn train(py: Python<'_>, instances: &Instances, seed: u64, trees: usize) -> PyResult<Self> {
        let config = learn_config(trees);
        let inner = py.detach(|| learn::train_stacked_ensemble(&instances.inner, &config, seed)).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: learn::load_model(&path).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        learn::save_model(&path, &self.inner).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    /// (endangered, certainty) for one feature row.
    fn predict(&self, row: Vec<f64>) -> PyResult<(bool, f64)> {
        let p = self.inner.predict(&row).map_err(value_err)?;
        Ok((p.positive, p.certainty()))
    }
}

/// Per-area, per-month predictions.
#[pyclass(frozen)]
struct Catalog {
    inner: PredictionCatalog,
}

#[pymethods]
impl Catalog {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: predict::load_catalog(&dir).map_err(value_err)? })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        predict::save_catalog(&dir, &self.inner).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_areas(&self) -> usize {
        self.inner.n_areas()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn area_ids(&self) -> Vec<String> {
        self.inner.areas().map(|a| a.area_id.clone()).collect()
    }

    /// (endangered, certainty), or None for an unknown area.
    fn get(&self, area_id: &str, month: u32) -> Option<(bool, f64)> {
        self.inner.get(area_id, month).map(|p| (p.endangered, p.certainty))
    }

    /// Non-empty cells of a Web-Mercator grid with the given cell size.
    fn summaries(&self, cell_size_m: f64) -> PyResult<Vec<CellSummary>> {
        let spec = GridSpec::new(cell_size_m).map_err(value_err)?;
        Ok(summarize_catalog(&spec, &self.inner).into_iter().map(|inner| CellSummary { inner }).collect())
    }
}

#[pyclass(frozen)]
struct CellSummary {
    inner: CoreCellSummary,
}

#[pymethods]
impl CellSummary {
    #[getter]
    fn cell(&self) -> (i64, i64) {
        (self.inner.cell.i, self.inner.cell.j)
    }

    #[getter]
    fn cell_size_m(&self) -> f64 {
        self.inner.cell_size_m
    }

    #[getter]
    fn vineyard_count(&self) -> u32 {
        self.inner.vineyard_count
    }

    #[getter]
    fn member_area_ids(&self) -> Vec<String> {
        self.inner.member_area_ids.clone()
    }

    /// Twelve dicts, January first.
    fn months<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .months
            .iter()
            .map(|m| {
                let d = PyDict::new(py);
                d.set_item("endangered", m.endangered)?;
                d.set_item("safe", m.safe)?;
                d.set_item("mean_certainty_endangered", m.mean_certainty_endangered)?;
                d.set_item("mean_certainty_safe", m.mean_certainty_safe)?;
                d.set_item("stddev_certainty", m.stddev_certainty)?;
                Ok(d)
            })
            .collect()
    }

    fn render_glyph(&self, radius_px: f64) -> PyResult<String> {
        glyph::render_glyph(&self.inner, radius_px).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("CellSummary(cell={:?}, cell_size_m={}, vineyard_count={})", self.cell(), self.inner.cell_size_m, self.inner.vineyard_count)
    }
}

/// Cohen's kappa of a 2x2 matrix, rows = actual, columns = predicted.
#[pyfunction]
fn kappa(matrix: [[u64; 2]; 2]) -> PyResult<f64> {
    learn::cohens_kappa(&ConfusionMatrix::new(matrix)).map_err(value_err)
}

/// Hex color for "endangered" or "safe" at a certainty in [0.5, 1].
#[pyfunction]
fn color_for(outcome: &str, certainty: f64) -> PyResult<String> {
    let o = match outcome {
        "endangered" => Outcome::Endangered,
        "safe" => Outcome::Safe,
        other => return Err(value_err(format!("unknown outcome {other:?}"))),
    };
    Ok(glyph::color_for(o, certainty).map_err(value_err)?.hex())
}

/// Glyph SVG from a cell summary in its JSON form.
#[pyfunction]
fn render_glyph(summary_json: &str, radius_px: f64) -> PyResult<String> {
    let summary: CoreCellSummary = serde_json::from_str(summary_json).map_err(value_err)?;
    glyph::render_glyph(&summary, radius_px).map_err(value_err)
}

#[pymodule]
fn vinewatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SyntheticData>()?;
    m.add_class::<Instances>()?;
    m.add_class::<Model>()?;
    m.add_class::<Catalog>()?;
    m.add_class::<CellSummary>()?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(color_for, m)?)?;
    m.add_function(wrap_pyfunction!(render_glyph, m)?)?;
    Ok(())
}
