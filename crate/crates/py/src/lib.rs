//! Python bindings: the transport, PSF, layout, dose, correction, and
//! dose-window operations behind a thin class layer.

use eblsim::dose;
use eblsim::layout;
use eblsim::psf;
use eblsim::transport;
use eblsim::window;
use eblsim::EblError;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py_err(err: EblError) -> PyErr {
    match &err {
        EblError::Io { .. } => PyIOError::new_err(err.to_string()),
        EblError::Validation { .. } | EblError::Geometry { .. } | EblError::Parse { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn parse_channel(name: &str) -> PyResult<transport::Channel> {
    match name {
        "incident" => Ok(transport::Channel::Incident),
        "backscattered" => Ok(transport::Channel::Backscattered),
        other => Err(PyValueError::new_err(format!(
            "channel must be \"incident\" or \"backscattered\", got \"{other}\""
        ))),
    }
}

#[pyclass(name = "Material", from_py_object)]
#[derive(Clone)]
struct PyMaterial {
    inner: eblsim::material::Material,
}

#[pymethods]
impl PyMaterial {
    /// Material from (z, a, mass_fraction) element tuples.
    #[new]
    fn new(name: String, density: f64, composition: Vec<(u32, f64, f64)>) -> PyResult<Self> {
        let composition = composition
            .into_iter()
            .map(|(z, a, f)| eblsim::material::ElementFraction {
                z,
                a,
                mass_fraction: f,
            })
            .collect();
        Ok(PyMaterial {
            inner: eblsim::material::Material::new(name, density, composition)
                .map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn pmma() -> Self {
        PyMaterial {
            inner: eblsim::material::Material::pmma(),
        }
    }

    #[staticmethod]
    fn mma() -> Self {
        PyMaterial {
            inner: eblsim::material::Material::mma(),
        }
    }

    #[staticmethod]
    fn silicon() -> Self {
        PyMaterial {
            inner: eblsim::material::Material::silicon(),
        }
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.density
    }

    fn mean_ionization_potential_ev(&self) -> f64 {
        self.inner.mean_ionization_potential_ev()
    }

    fn __repr__(&self) -> String {
        format!(
            "Material({}, {} g/cm3)",
            self.inner.name, self.inner.density
        )
    }
}

#[pyclass(name = "LayerStack", from_py_object)]
#[derive(Clone)]
struct PyLayerStack {
    inner: transport::LayerStack,
}

#[pymethods]
impl PyLayerStack {
    /// Stack from (material, thickness_nm) layer pairs over a substrate.
    #[new]
    fn new(layers: Vec<(PyMaterial, f64)>, substrate: PyMaterial) -> PyResult<Self> {
        let layers = layers.into_iter().map(|(m, t)| (m.inner, t)).collect();
        Ok(PyLayerStack {
            inner: transport::LayerStack::new(layers, substrate.inner).map_err(to_py_err)?,
        })
    }

    /// The stock 230 nm PMMA / 500 nm MMA bilayer on silicon.
    #[staticmethod]
    fn pmma_mma_si() -> Self {
        PyLayerStack {
            inner: transport::LayerStack::pmma_mma_si(),
        }
    }

    #[getter]
    fn total_thickness_nm(&self) -> f64 {
        self.inner.total_thickness_nm()
    }

    fn __repr__(&self) -> String {
        format!("LayerStack({})", self.inner.describe())
    }
}

#[pyclass(name = "BeamConfig", from_py_object)]
#[derive(Clone)]
struct PyBeamConfig {
    inner: transport::BeamConfig,
}

#[pymethods]
impl PyBeamConfig {
    #[new]
    #[pyo3(signature = (energy_kev, beam_radius_nm, trajectories, seed, cutoff_ev=None))]
    fn new(
        energy_kev: f64,
        beam_radius_nm: f64,
        trajectories: u64,
        seed: u64,
        cutoff_ev: Option<f64>,
    ) -> PyResult<Self> {
        let mut beam = transport::BeamConfig::new(energy_kev, beam_radius_nm, trajectories, seed);
        if let Some(c) = cutoff_ev {
            beam.cutoff_ev = c;
        }
        beam.validate().map_err(to_py_err)?;
        Ok(PyBeamConfig { inner: beam })
    }

    fn __repr__(&self) -> String {
        format!("BeamConfig({})", self.inner.describe())
    }
}

#[pyclass(name = "DepositionRecord")]
struct PyDepositionRecord {
    inner: transport::DepositionRecord,
}

#[pymethods]
impl PyDepositionRecord {
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.inner.summary;
        let d = PyDict::new(py);
        d.set_item("trajectories", s.trajectory_count)?;
        d.set_item("beam_energy_ev", s.beam_energy_ev)?;
        d.set_item("deposited_ev", s.deposited_ev)?;
        d.set_item("deposited_incident_ev", s.deposited_incident_ev)?;
        d.set_item("deposited_backscattered_ev", s.deposited_backscattered_ev)?;
        d.set_item("exited_ev", s.exited_ev)?;
        d.set_item("residual_ev", s.residual_ev)?;
        d.set_item("backscatter_yield", s.backscatter_yield)?;
        d.set_item("exit_count", s.exit_count)?;
        Ok(d)
    }

    #[getter]
    fn event_count(&self) -> usize {
        self.inner.events.len()
    }

    #[getter]
    fn backscatter_yield(&self) -> f64 {
        self.inner.summary.backscatter_yield
    }

    /// Backscattered exits as (theta_deg, energy_ev, radius_nm) tuples.
    fn exits(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .backscattered_exits
            .iter()
            .map(|e| (e.theta_deg, e.energy_ev, e.radius_nm))
            .collect()
    }
}

#[pyclass(name = "RadialPsf", from_py_object)]
#[derive(Clone)]
struct PyRadialPsf {
    inner: psf::RadialPsf,
}

#[pymethods]
impl PyRadialPsf {
    fn bin_centers(&self) -> Vec<f64> {
        self.inner.bin_centers()
    }

    fn density(&self, channel: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.density(parse_channel(channel)?).to_vec())
    }

    #[getter]
    fn incident_total_ev(&self) -> f64 {
        self.inner.incident_total_ev
    }

    #[getter]
    fn backscattered_total_ev(&self) -> f64 {
        self.inner.backscattered_total_ev
    }

    fn to_csv(&self) -> String {
        psf::psf_to_csv(&self.inner, "")
    }
}

#[pyclass(name = "PsfKernel", from_py_object)]
#[derive(Clone)]
struct PyPsfKernel {
    inner: psf::PsfKernel,
}

#[pymethods]
impl PyPsfKernel {
    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn pitch_nm(&self) -> f64 {
        self.inner.pitch_nm
    }

    fn channel_integral(&self, channel: &str) -> PyResult<f64> {
        Ok(self.inner.channel_integral(parse_channel(channel)?))
    }

    #[getter]
    fn discarded_tail_fraction(&self) -> f64 {
        self.inner.discarded_tail_fraction
    }
}

#[pyclass(name = "KernelSet", from_py_object)]
#[derive(Clone)]
struct PyKernelSet {
    inner: psf::KernelSet,
}

#[pymethods]
impl PyKernelSet {
    fn full(&self) -> PyPsfKernel {
        PyPsfKernel {
            inner: self.inner.full.clone(),
        }
    }

    fn layer(&self, name: &str) -> PyResult<PyPsfKernel> {
        self.inner
            .layer_by_name(name)
            .map(|k| PyPsfKernel { inner: k.clone() })
            .ok_or_else(|| PyValueError::new_err(format!("no layer kernel named {name}")))
    }

    #[getter]
    fn layer_names(&self) -> Vec<String> {
        self.inner.layer_names.clone()
    }
}

#[pyclass(name = "PatternLayout", from_py_object)]
#[derive(Clone)]
struct PyPatternLayout {
    inner: layout::PatternLayout,
}

#[pymethods]
impl PyPatternLayout {
    #[getter]
    fn base_dose(&self) -> f64 {
        self.inner.base_dose
    }

    #[setter]
    fn set_base_dose(&mut self, dose: f64) -> PyResult<()> {
        self.inner.base_dose = dose;
        self.inner.validate().map_err(to_py_err)
    }

    #[getter]
    fn bounds(&self) -> (f64, f64) {
        self.inner.bounds
    }

    /// Shape summaries as (tag, dose_factor, vertex_count).
    fn shapes(&self) -> Vec<(String, f64, usize)> {
        self.inner
            .shapes
            .iter()
            .map(|s| (s.tag.clone(), s.dose_factor, s.vertices.len()))
            .collect()
    }

    fn to_text(&self) -> String {
        layout::write_layout(&self.inner)
    }
}

#[pyclass(name = "ProbeLines", from_py_object)]
#[derive(Clone)]
struct PyProbeLines {
    inner: layout::ProbeLines,
}

#[pymethods]
impl PyProbeLines {
    #[getter]
    fn bridge_extent_nm(&self) -> f64 {
        self.inner.bridge_extent_nm
    }

    #[getter]
    fn center(&self) -> (f64, f64) {
        let c = self.inner.center();
        (c.x, c.y)
    }
}

#[pyclass(name = "ExposureGrid", from_py_object)]
#[derive(Clone)]
struct PyExposureGrid {
    inner: layout::ExposureGrid,
}

#[pymethods]
impl PyExposureGrid {
    #[getter]
    fn pitch_nm(&self) -> f64 {
        self.inner.pitch_nm
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    /// Row-major flattened values.
    fn values(&self) -> Vec<f64> {
        self.inner.values.iter().cloned().collect()
    }
}

#[pyclass(name = "DoseGrid")]
struct PyDoseGrid {
    inner: dose::DoseGrid,
}

#[pymethods]
impl PyDoseGrid {
    #[getter]
    fn pitch_nm(&self) -> f64 {
        self.inner.pitch_nm
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    /// Row-major flattened channel: "total", "incident", "backscattered".
    fn channel(&self, name: &str) -> PyResult<Vec<f64>> {
        let grid = match name {
            "total" => &self.inner.total,
            "incident" => &self.inner.incident,
            "backscattered" => &self.inner.backscattered,
            other => {
                return Err(PyValueError::new_err(format!(
                    "channel must be total/incident/backscattered, got {other}"
                )))
            }
        };
        Ok(grid.iter().cloned().collect())
    }

    fn sample(&self, x_nm: f64, y_nm: f64, channel: &str) -> PyResult<f64> {
        let grid = match channel {
            "total" => &self.inner.total,
            "incident" => &self.inner.incident,
            "backscattered" => &self.inner.backscattered,
            other => {
                return Err(PyValueError::new_err(format!(
                    "channel must be total/incident/backscattered, got {other}"
                )))
            }
        };
        self.inner
            .sample(grid, layout::Point::new(x_nm, y_nm))
            .map_err(to_py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (stack, beam, record_depth_nm=None, elastic_model="browning-mott"))]
fn simulate(
    stack: &PyLayerStack,
    beam: &PyBeamConfig,
    record_depth_nm: Option<f64>,
    elastic_model: &str,
) -> PyResult<PyDepositionRecord> {
    let elastic = match elastic_model {
        "browning-mott" => transport::ElasticModel::BrowningMott,
        "screened-rutherford" => transport::ElasticModel::ScreenedRutherford,
        other => {
            return Err(PyValueError::new_err(format!(
                "elastic_model must be browning-mott or screened-rutherford, got {other}"
            )))
        }
    };
    let options = transport::SimulateOptions {
        record_depth_nm,
        elastic_model: elastic,
        ..Default::default()
    };
    let inner = transport::simulate_with_options(&stack.inner, &beam.inner, options)
        .map_err(to_py_err)?;
    Ok(PyDepositionRecord { inner })
}

#[pyfunction]
#[pyo3(signature = (record, bins=128, z_min_nm=0.0, z_max_nm=f64::INFINITY))]
fn build_radial_psf(
    record: &PyDepositionRecord,
    bins: usize,
    z_min_nm: f64,
    z_max_nm: f64,
) -> PyResult<PyRadialPsf> {
    Ok(PyRadialPsf {
        inner: psf::build_radial_psf_windowed(&record.inner, bins, z_min_nm, z_max_nm)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn fit_power_law<'py>(
    py: Python<'py>,
    table: &PyRadialPsf,
    channel: &str,
    r_min_nm: f64,
    r_max_nm: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = psf::fit_power_law(&table.inner, parse_channel(channel)?, r_min_nm, r_max_nm)
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("a", fit.a)?;
    d.set_item("b", fit.b)?;
    d.set_item("r_squared", fit.r_squared)?;
    d.set_item("stderr_b", fit.stderr_b)?;
    d.set_item("decay_60_360", fit.decay_between(60.0, 360.0))?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (record, bins=90))]
fn fit_angular<'py>(
    py: Python<'py>,
    record: &PyDepositionRecord,
    bins: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = psf::fit_angular(&record.inner, bins).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("mu_deg", fit.mu_deg)?;
    d.set_item("sigma_deg", fit.sigma_deg)?;
    d.set_item("stderr_mu", fit.stderr_mu)?;
    d.set_item("stderr_sigma", fit.stderr_sigma)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (record, stack, bins=128, pitch_nm=10.0, half_width_nm=4000.0))]
fn build_kernel_set(
    record: &PyDepositionRecord,
    stack: &PyLayerStack,
    bins: usize,
    pitch_nm: f64,
    half_width_nm: f64,
) -> PyResult<PyKernelSet> {
    Ok(PyKernelSet {
        inner: psf::build_kernel_set(&record.inner, &stack.inner, bins, pitch_nm, half_width_nm)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (kind, bridge_gap_nm=None, booster_dose_factor=None, base_dose=None))]
fn build_geometry(
    kind: &str,
    bridge_gap_nm: Option<f64>,
    booster_dose_factor: Option<f64>,
    base_dose: Option<f64>,
) -> PyResult<(PyPatternLayout, PyProbeLines)> {
    let kind = layout::GeometryKind::parse(kind).map_err(to_py_err)?;
    let mut params = layout::GeometryParams::default();
    if let Some(g) = bridge_gap_nm {
        params.bridge_gap_nm = g;
    }
    if let Some(f) = booster_dose_factor {
        params.booster_dose_factor = f;
    }
    if let Some(d) = base_dose {
        params.base_dose = d;
    }
    let (l, p) = layout::build_geometry(kind, &params).map_err(to_py_err)?;
    Ok((PyPatternLayout { inner: l }, PyProbeLines { inner: p }))
}

#[pyfunction]
fn parse_layout(text: &str) -> PyResult<PyPatternLayout> {
    Ok(PyPatternLayout {
        inner: layout::parse_layout(text).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn rasterize(layout_obj: &PyPatternLayout, pitch_nm: f64) -> PyResult<PyExposureGrid> {
    Ok(PyExposureGrid {
        inner: layout::rasterize(&layout_obj.inner, pitch_nm).map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (exposure, kernel, oracle=false))]
fn convolve(exposure: &PyExposureGrid, kernel: &PyPsfKernel, oracle: bool) -> PyResult<PyDoseGrid> {
    let inner = if oracle {
        dose::convolve_direct(&exposure.inner, &kernel.inner)
    } else {
        dose::convolve_fast(&exposure.inner, &kernel.inner)
    }
    .map_err(to_py_err)?;
    Ok(PyDoseGrid { inner })
}

#[pyfunction]
fn extract_trace<'py>(
    py: Python<'py>,
    dose_grid: &PyDoseGrid,
    start: (f64, f64),
    end: (f64, f64),
    samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let trace = dose::extract_trace(
        &dose_grid.inner,
        (
            layout::Point::new(start.0, start.1),
            layout::Point::new(end.0, end.1),
        ),
        samples,
    )
    .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("positions_nm", trace.positions_nm)?;
    d.set_item("total", trace.total)?;
    d.set_item("incident", trace.incident)?;
    d.set_item("backscattered", trace.backscattered)?;
    Ok(d)
}

#[pyfunction]
fn compute_metrics<'py>(
    py: Python<'py>,
    dose_grid: &PyDoseGrid,
    probes: &PyProbeLines,
) -> PyResult<Bound<'py, PyDict>> {
    let m = dose::compute_metrics(&dose_grid.inner, &probes.inner).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("falloff_ratio", m.falloff_ratio)?;
    d.set_item("plateau_dose", m.plateau_dose)?;
    d.set_item("gap_min_dose", m.gap_min_dose)?;
    d.set_item("edge_drop_ratio", m.edge_drop_ratio)?;
    d.set_item("eb_ei_center", m.eb_ei_center)?;
    d.set_item("eb_ei_degenerate", m.eb_ei_degenerate)?;
    d.set_item("saddle_variance", m.saddle_variance)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (layout_obj, kernel, target, tolerance=1e-3, max_iterations=50, pitch_nm=20.0))]
fn pec_correct<'py>(
    py: Python<'py>,
    layout_obj: &PyPatternLayout,
    kernel: &PyPsfKernel,
    target: f64,
    tolerance: f64,
    max_iterations: u32,
    pitch_nm: f64,
) -> PyResult<(PyPatternLayout, Bound<'py, PyDict>)> {
    let config = eblsim::pec::PecConfig {
        tolerance,
        max_iterations,
        pitch_nm,
        ..Default::default()
    };
    let result =
        eblsim::pec::correct(&layout_obj.inner, &kernel.inner, target, &config).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("converged", result.converged)?;
    d.set_item("iterations", result.iterations)?;
    d.set_item("residual", result.residual)?;
    d.set_item("clamped_shapes", result.clamped_shapes.clone())?;
    Ok((
        PyPatternLayout {
            inner: result.corrected,
        },
        d,
    ))
}

#[pyfunction]
#[pyo3(signature = (layout_obj, probes, kernels, dose_range, step, thresholds=None))]
fn sweep_dose<'py>(
    py: Python<'py>,
    layout_obj: &PyPatternLayout,
    probes: &PyProbeLines,
    kernels: &PyKernelSet,
    dose_range: (f64, f64),
    step: f64,
    thresholds: Option<(f64, f64, f64)>,
) -> PyResult<Bound<'py, PyDict>> {
    let thresholds = match thresholds {
        Some((mma, pmma, collapse)) => {
            let t = window::ResistThresholds {
                mma_clearing: mma,
                pmma_clearing: pmma,
                pmma_collapse: collapse,
            };
            t.validate().map_err(to_py_err)?;
            t
        }
        None => {
            let (reference, ref_probes) = layout::build_geometry(
                layout::GeometryKind::Horseshoe,
                &layout::GeometryParams::default(),
            )
            .map_err(to_py_err)?;
            let response = window::bridge_response(&reference, &ref_probes, &kernels.inner)
                .map_err(to_py_err)?;
            window::calibrate_thresholds(
                &response,
                window::CALIBRATION_FORM_DOSE,
                window::CALIBRATION_WINDOW_WIDTH,
                window::CALIBRATION_SENSITIVITY_RATIO,
            )
            .map_err(to_py_err)?
        }
    };
    let result = window::sweep(
        &layout_obj.inner,
        &probes.inner,
        &kernels.inner,
        &thresholds,
        dose_range,
        step,
    )
    .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("window_width", result.window_width())?;
    d.set_item("first_formed", result.window.map(|w| w.first_formed))?;
    d.set_item("last_formed", result.window.map(|w| w.last_formed))?;
    d.set_item(
        "states",
        result
            .rows
            .iter()
            .map(|r| (r.dose, r.state.name().to_string()))
            .collect::<Vec<_>>(),
    )?;
    d.set_item(
        "thresholds",
        (
            thresholds.mma_clearing,
            thresholds.pmma_clearing,
            thresholds.pmma_collapse,
        ),
    )?;
    Ok(d)
}

#[pymodule]
fn _eblsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMaterial>()?;
    m.add_class::<PyLayerStack>()?;
    m.add_class::<PyBeamConfig>()?;
    m.add_class::<PyDepositionRecord>()?;
    m.add_class::<PyRadialPsf>()?;
    m.add_class::<PyPsfKernel>()?;
    m.add_class::<PyKernelSet>()?;
    m.add_class::<PyPatternLayout>()?;
    m.add_class::<PyProbeLines>()?;
    m.add_class::<PyExposureGrid>()?;
    m.add_class::<PyDoseGrid>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(build_radial_psf, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(fit_angular, m)?)?;
    m.add_function(wrap_pyfunction!(build_kernel_set, m)?)?;
    m.add_function(wrap_pyfunction!(build_geometry, m)?)?;
    m.add_function(wrap_pyfunction!(parse_layout, m)?)?;
    m.add_function(wrap_pyfunction!(rasterize, m)?)?;
    m.add_function(wrap_pyfunction!(convolve, m)?)?;
    m.add_function(wrap_pyfunction!(extract_trace, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(pec_correct, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_dose, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
