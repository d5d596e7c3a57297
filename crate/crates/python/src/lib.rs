//! Python bindings: records, scalograms, float and int8 models, budgets and
//! metrics. Reports come back as plain dicts.

use std::path::PathBuf;

use ppgstress::compress::{calibrate, load_any, prune_dense_units, quantize_ptq, AnyModel, PruneConfig};
use ppgstress::eval::{self, MetricsReport};
use ppgstress::model::{default_builder, load_model, save_model};
use ppgstress::qengine::{check_budget, plan_memory, plan_memory_float, requantize as requant, Budget, Engine, RequantParams};
use ppgstress::scalogram::{CwtConfig, ScalogramImage};
use ppgstress::signal::{load_ppg_csv, synth_ppg, SynthParams, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_STRIDE_S, DEFAULT_WINDOW_S};
use ppgstress::train::TrainConfig;
use ppgstress::{Class, Error};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn class_of(label: Option<usize>) -> PyResult<Option<Class>> {
    label
        .map(|l| Class::from_index(l).ok_or_else(|| PyValueError::new_err(format!("label {l} is not 0 or 1"))))
        .transpose()
}

/// A PPG series with an optional label (0 non-stress, 1 stress).
#[pyclass(name = "Record", module = "ppgstress", skip_from_py_object)]
#[derive(Clone)]
struct PyRecord(ppgstress::signal::PpgRecord);

#[pymethods]
impl PyRecord {
    #[new]
    #[pyo3(signature = (samples, sample_rate_hz = DEFAULT_SAMPLE_RATE_HZ, label = None))]
    fn new(samples: Vec<f64>, sample_rate_hz: f64, label: Option<usize>) -> PyResult<Self> {
        let rec = ppgstress::signal::PpgRecord::new(samples, sample_rate_hz, class_of(label)?).map_err(err)?;
        Ok(Self(rec))
    }

    #[staticmethod]
    #[pyo3(signature = (label, duration_s, seed))]
    fn synth(label: usize, duration_s: f64, seed: u64) -> PyResult<Self> {
        let class = class_of(Some(label))?.expect("label given");
        synth_ppg(&SynthParams::preset(class, duration_s, seed)).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (path, sample_rate_hz = DEFAULT_SAMPLE_RATE_HZ))]
    fn load_csv(path: PathBuf, sample_rate_hz: f64) -> PyResult<Self> {
        load_ppg_csv(path, sample_rate_hz).map(Self).map_err(err)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.0.samples.clone()
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.0.sample_rate_hz
    }

    #[getter]
    fn label(&self) -> Option<usize> {
        self.0.label.map(Class::index)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Windows the record and renders one scalogram per window.
    #[pyo3(signature = (window_s = DEFAULT_WINDOW_S, stride_s = DEFAULT_STRIDE_S, record_id = 0))]
    fn featurize(&self, py: Python<'_>, window_s: f64, stride_s: f64, record_id: u32) -> PyResult<Vec<PyImage>> {
        let images = py
            .detach(|| ppgstress::scalogram::featurize_record(&self.0, window_s, stride_s, &CwtConfig::default(), record_id))
            .map_err(err)?;
        Ok(images.into_iter().map(PyImage).collect())
    }
}

/// A 64×64 scalogram in row-major order, values in [0, 1].
#[pyclass(name = "Image", module = "ppgstress", skip_from_py_object)]
#[derive(Clone)]
struct PyImage(ScalogramImage);

#[pymethods]
impl PyImage {
    #[new]
    #[pyo3(signature = (pixels, label = None))]
    fn new(pixels: Vec<f32>, label: Option<usize>) -> PyResult<Self> {
        ScalogramImage::from_pixels(pixels, class_of(label)?).map(Self).map_err(err)
    }

    #[staticmethod]
    fn zeros() -> Self {
        Self(ScalogramImage::zeros())
    }

    #[getter]
    fn pixels(&self) -> Vec<f32> {
        self.0.pixels.clone()
    }

    #[getter]
    fn label(&self) -> Option<usize> {
        self.0.label.map(Class::index)
    }

    #[getter]
    fn window_start(&self) -> usize {
        self.0.provenance.window_start
    }
}

fn unwrap_images(images: Vec<PyRef<'_, PyImage>>) -> Vec<ScalogramImage> {
    images.iter().map(|i| i.0.clone()).collect()
}

/// Float CNN.
#[pyclass(name = "Model", module = "ppgstress", skip_from_py_object)]
#[derive(Clone)]
struct PyModel(ppgstress::model::Model);

#[pymethods]
impl PyModel {
    /// The default architecture with He-initialized weights.
    #[new]
    #[pyo3(signature = (seed = 0, hidden_units = ppgstress::model::DEFAULT_HIDDEN_UNITS))]
    fn new(seed: u64, hidden_units: usize) -> PyResult<Self> {
        default_builder(hidden_units).build(seed).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_model(path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.0, path).map_err(err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.0.param_count()
    }

    #[getter]
    fn payload_bytes(&self) -> usize {
        self.0.payload_bytes()
    }

    /// Class probabilities for one image.
    fn predict(&self, image: &PyImage) -> PyResult<Vec<f64>> {
        self.0.predict_image(&image.0).map_err(err)
    }

    /// Trains a copy and returns it with the per-epoch history.
    #[pyo3(signature = (images, epochs = 5, batch_size = 32, seed = 0))]
    fn train(
        &self,
        py: Python<'_>,
        images: Vec<PyRef<'_, PyImage>>,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<(PyModel, Py<PyAny>)> {
        let images = unwrap_images(images);
        let mut cfg = TrainConfig {
            epochs,
            batch_size,
            seed,
            ..TrainConfig::default()
        };
        cfg.augment.seed = seed;
        let model = self.0.clone();
        let out = py.detach(|| ppgstress::train::train(model, &images, &cfg)).map_err(err)?;
        Ok((PyModel(out.model), to_dict(py, &out.history.epochs)?))
    }

    /// Keeps the `keep` hidden dense units with the largest weight norms.
    fn prune(&self, keep: usize) -> PyResult<PyModel> {
        prune_dense_units(&self.0, &PruneConfig { keep }).map(PyModel).map_err(err)
    }

    /// Int8 post-training quantization calibrated on `images`.
    fn quantize(&self, py: Python<'_>, images: Vec<PyRef<'_, PyImage>>) -> PyResult<PyQuantModel> {
        let images = unwrap_images(images);
        let ranges = py.detach(|| calibrate(&self.0, &images)).map_err(err)?;
        quantize_ptq(&self.0, &ranges).map(PyQuantModel).map_err(err)
    }

    fn memory_plan(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_dict(py, &plan_memory_float(&self.0).map_err(err)?)
    }
}

/// Int8 model run by the integer engine.
#[pyclass(name = "QuantModel", module = "ppgstress", skip_from_py_object)]
#[derive(Clone)]
struct PyQuantModel(ppgstress::compress::QuantModel);

#[pymethods]
impl PyQuantModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ppgstress::compress::QuantModel::load(path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    #[getter]
    fn payload_bytes(&self) -> usize {
        self.0.payload_bytes()
    }

    #[getter]
    fn file_bytes(&self) -> usize {
        self.0.file_bytes()
    }

    fn predict(&self, image: &PyImage) -> PyResult<Vec<f64>> {
        ppgstress::qengine::qforward(&self.0, &image.0).map_err(err)
    }

    fn predict_all(&self, py: Python<'_>, images: Vec<PyRef<'_, PyImage>>) -> PyResult<Vec<Vec<f64>>> {
        let images = unwrap_images(images);
        let engine = Engine::new(&self.0).map_err(err)?;
        py.detach(|| engine.predict_all(&images)).map_err(err)
    }

    /// Float model rebuilt from the int8 weights.
    fn dequantized(&self) -> PyResult<PyModel> {
        self.0.dequantized().map(PyModel).map_err(err)
    }

    fn memory_plan(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_dict(py, &plan_memory(&self.0))
    }

    #[pyo3(signature = (flash_bytes = ppgstress::qengine::DEFAULT_FLASH_BUDGET, ram_bytes = ppgstress::qengine::DEFAULT_RAM_BUDGET))]
    fn check_budget(&self, py: Python<'_>, flash_bytes: usize, ram_bytes: usize) -> PyResult<Py<PyAny>> {
        let budget = Budget { flash_bytes, ram_bytes };
        budget.validate().map_err(err)?;
        to_dict(py, &check_budget(&plan_memory(&self.0), &budget))
    }
}

/// Loads either model format, returning a `Model` or a `QuantModel`.
#[pyfunction]
fn load(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    Ok(match load_any(path).map_err(err)? {
        AnyModel::Float(m) => Py::new(py, PyModel(m))?.into_any(),
        AnyModel::Quant(q) => Py::new(py, PyQuantModel(q))?.into_any(),
    })
}

/// `clamp(round_half_even(acc * multiplier) + zero_point)` into int8.
#[pyfunction]
fn requantize(acc: i32, multiplier: f64, zero_point: i32) -> PyResult<i8> {
    Ok(requant(acc, RequantParams::new(multiplier, zero_point).map_err(err)?))
}

#[pyfunction]
fn accuracy(preds: Vec<usize>, labels: Vec<usize>) -> PyResult<f64> {
    eval::accuracy(&preds, &labels).map_err(err)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<usize>) -> PyResult<f64> {
    eval::auc(&scores, &labels).map_err(err)
}

/// `(threshold, precision, recall)` tuples in ascending threshold order.
#[pyfunction]
fn pr_curve(scores: Vec<f64>, labels: Vec<usize>) -> PyResult<Vec<(f64, f64, f64)>> {
    let pts = eval::pr_curve(&scores, &labels).map_err(err)?;
    Ok(pts.iter().map(|p| (p.threshold, p.precision, p.recall)).collect())
}

#[pyfunction]
fn metrics(py: Python<'_>, scores: Vec<f64>, preds: Vec<usize>, labels: Vec<usize>) -> PyResult<Py<PyAny>> {
    to_dict(py, &MetricsReport::new(&scores, &preds, &labels).map_err(err)?)
}

#[pymodule]
#[pyo3(name = "ppgstress")]
pub fn ppgstress_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRecord>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyQuantModel>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(requantize, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(pr_curve, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    Ok(())
}
