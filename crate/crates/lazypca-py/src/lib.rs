//! Python bindings: the image type plus the generate / degrade / denoise /
//! evaluate operations, driven in-process.
//!
//! Usage from Python:
//!
//!     import lazypca_py as lp
//!     truth = lp.generate_mrf(width=64, height=64, levels=5, seed=1)
//!     noisy = lp.degrade(truth, sigma=0.25, seed=2)
//!     restored = lp.denoise(noisy, method="pca", seed=3)
//!     print(lp.metrics(truth, restored))

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

use lazypca::config::{DEFAULT_COUPLING, DEFAULT_INERTIA, DEFAULT_SIGMA};
use lazypca::model::{AnnealSchedule, NoiseModel, PcaParams, PriorParams};
use lazypca::samplers::{run_chain, Method};
use lazypca::synthesis::MrfGenSpec;
use lazypca::{metrics, pgm, synthesis};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A rectangular lattice of quantized gray levels.
#[pyclass(name = "LevelImage", skip_from_py_object)]
#[derive(Clone)]
struct PyLevelImage {
    inner: lazypca::LevelImage,
}

#[pymethods]
impl PyLevelImage {
    /// Build from column-major level data (index = col * height + row).
    #[new]
    fn new(width: usize, height: usize, levels: u16, data: Vec<u16>) -> PyResult<Self> {
        Ok(PyLevelImage {
            inner: lazypca::LevelImage::new(width, height, levels, data).map_err(value_err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn levels(&self) -> u16 {
        self.inner.levels()
    }

    /// Column-major level indices.
    fn data(&self) -> Vec<u16> {
        self.inner.data().to_vec()
    }

    /// Column-major luminances in [0, 1].
    fn luminances(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.luminance_at(i)).collect()
    }

    /// Level at (row, col).
    fn get(&self, row: usize, col: usize) -> PyResult<u16> {
        if row >= self.inner.height() || col >= self.inner.width() {
            return Err(PyValueError::new_err(format!(
                "site ({row}, {col}) out of bounds"
            )));
        }
        Ok(self.inner.get(row, col))
    }

    /// Write as binary PGM with maxval = levels - 1.
    fn save_pgm(&self, path: PathBuf) -> PyResult<()> {
        pgm::write_pgm(&self.inner, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// Write an 8-bit view PGM rescaled by 255 / (levels - 1).
    fn save_view_pgm(&self, path: PathBuf) -> PyResult<()> {
        pgm::write_view_pgm(&self.inner, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// Read a binary PGM written by save_pgm.
    #[staticmethod]
    fn load_pgm(path: PathBuf) -> PyResult<Self> {
        Ok(PyLevelImage {
            inner: pgm::read_pgm(&path).map_err(|e| PyIOError::new_err(e.to_string()))?,
        })
    }

    fn __eq__(&self, other: &PyLevelImage) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "LevelImage(width={}, height={}, levels={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.levels()
        )
    }
}

/// Sample a ground-truth MRF by annealed prior-only Gibbs sweeps.
#[pyfunction]
#[pyo3(signature = (width, height, levels, seed, coupling_j=DEFAULT_COUPLING,
                    beta0=0.4, increment=0.1, period=50, steps=400))]
#[allow(clippy::too_many_arguments)]
fn generate_mrf(
    width: usize,
    height: usize,
    levels: u16,
    seed: u64,
    coupling_j: f64,
    beta0: f64,
    increment: f64,
    period: u32,
    steps: u32,
) -> PyResult<PyLevelImage> {
    if levels < 2 {
        return Err(PyValueError::new_err("levels must be at least 2"));
    }
    PriorParams::new(coupling_j).map_err(value_err)?;
    let schedule = AnnealSchedule::new(beta0, increment, period, steps).map_err(value_err)?;
    let spec = MrfGenSpec { width, height, levels, coupling: coupling_j, schedule, seed };
    Ok(PyLevelImage { inner: synthesis::generate_mrf(&spec) })
}

/// Add Gaussian luminance noise and round back to the nearest level.
#[pyfunction]
#[pyo3(signature = (image, sigma, seed))]
fn degrade(image: &PyLevelImage, sigma: f64, seed: u64) -> PyResult<PyLevelImage> {
    let noise = NoiseModel::new(sigma).map_err(value_err)?;
    Ok(PyLevelImage { inner: synthesis::degrade(&image.inner, &noise, seed) })
}

/// Annealed MAP retrieval with the Gibbs sampler or the lazy PCA.
#[pyfunction]
#[pyo3(signature = (noisy, method="pca", seed=1, sigma=DEFAULT_SIGMA,
                    coupling_j=DEFAULT_COUPLING, q=DEFAULT_INERTIA,
                    beta0=1.25, increment=0.25, period=250, steps=1000,
                    threads=None))]
#[allow(clippy::too_many_arguments)]
fn denoise(
    noisy: &PyLevelImage,
    method: &str,
    seed: u64,
    sigma: f64,
    coupling_j: f64,
    q: f64,
    beta0: f64,
    increment: f64,
    period: u32,
    steps: u32,
    threads: Option<usize>,
) -> PyResult<PyLevelImage> {
    let method: Method = method.parse().map_err(value_err)?;
    let prior = PriorParams::new(coupling_j).map_err(value_err)?;
    let noise = NoiseModel::new(sigma).map_err(value_err)?;
    let pca = PcaParams::new(q, 0.0).map_err(value_err)?;
    let schedule = AnnealSchedule::new(beta0, increment, period, steps).map_err(value_err)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(value_err)?;
    let (restored, _) = pool
        .install(|| {
            run_chain(
                noisy.inner.clone(),
                &noisy.inner,
                &prior,
                &noise,
                schedule,
                method,
                Some(&pca),
                seed,
            )
        })
        .map_err(value_err)?;
    Ok(PyLevelImage { inner: restored })
}

/// Mean squared luminance error.
#[pyfunction]
fn mse(x: &PyLevelImage, y: &PyLevelImage) -> PyResult<f64> {
    metrics::mse(&x.inner, &y.inner).map_err(value_err)
}

/// PSNR of `y` against the original `x`, in dB (inf when identical).
#[pyfunction]
fn psnr(x: &PyLevelImage, y: &PyLevelImage) -> PyResult<f64> {
    metrics::psnr(&x.inner, &y.inner).map_err(value_err)
}

/// Whole-image SSIM.
#[pyfunction]
#[pyo3(signature = (x, y, c1=metrics::SSIM_C1_DEFAULT, c2=metrics::SSIM_C2_DEFAULT))]
fn ssim(x: &PyLevelImage, y: &PyLevelImage, c1: f64, c2: f64) -> PyResult<f64> {
    metrics::ssim_with(&x.inner, &y.inner, c1, c2).map_err(value_err)
}

/// MSE / PSNR / SSIM of `restored` against `original`, as a dict.
#[pyfunction]
fn metrics_report<'py>(
    py: Python<'py>,
    original: &PyLevelImage,
    restored: &PyLevelImage,
) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::report(&original.inner, &restored.inner).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("mse", r.mse)?;
    d.set_item("psnr_db", r.psnr)?;
    d.set_item("ssim", r.ssim)?;
    d.set_item("ssim_c1", r.ssim_c1)?;
    d.set_item("ssim_c2", r.ssim_c2)?;
    Ok(d)
}

#[pymodule]
fn lazypca_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyLevelImage>()?;
    m.add_function(wrap_pyfunction!(generate_mrf, m)?)?;
    m.add_function(wrap_pyfunction!(degrade, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_report, m)?)?;
    Ok(())
}
