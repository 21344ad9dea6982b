//! Python bindings: `import foldframe_py`.

use foldframe::measure::{self, CompareOptions, SyntheticOptions, WorkWindow};
use foldframe::{collide, design, linkage, trigger, Airframe, AirframeConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(foldframe_py, FoldframeError, PyException, "Domain error from the fold model.");

fn err(e: foldframe::Error) -> PyErr {
    FoldframeError::new_err(format!("{}: {}", e.kind(), e))
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for foldframe::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

/// Airframe geometry and robot constants.
#[pyclass(name = "Airframe", module = "foldframe_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAirframe {
    inner: Airframe,
}

#[pymethods]
impl PyAirframe {
    /// Reference airframe with the linkage calibrated to the default anchors.
    #[new]
    fn new() -> PyResult<Self> {
        Ok(PyAirframe { inner: Airframe::reference().py()? })
    }

    /// Builds an airframe from TOML config text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = AirframeConfig::parse(text).and_then(|c| c.airframe()).py()?;
        Ok(PyAirframe { inner })
    }

    fn to_toml(&self) -> String {
        AirframeConfig::from_airframe(&self.inner).to_toml()
    }

    #[getter]
    fn link_angles_deg(&self) -> (f64, f64) {
        (self.inner.linkage.a12_deg, self.inner.linkage.a34_deg)
    }

    #[getter]
    fn theta2_max_deg(&self) -> f64 {
        self.inner.linkage.theta2_max_deg
    }

    #[getter]
    fn thrust_n(&self) -> f64 {
        self.inner.params.thrust_n
    }

    #[getter]
    fn mass_g(&self) -> f64 {
        self.inner.params.mass_g
    }

    /// `(theta1, theta2, theta3, theta4)` in degrees.
    fn solve_arm(&self, theta2: f64) -> PyResult<(f64, f64, f64, f64)> {
        let s = linkage::solve_arm(&self.inner.linkage, theta2).py()?;
        Ok((s.theta1, s.theta2, s.theta3, s.theta4))
    }

    /// `[(theta2, theta1, theta3), ...]` on `n` evenly spaced theta2 values.
    fn joint_curve(&self, lo: f64, hi: f64, n: usize) -> PyResult<Vec<(f64, f64, f64)>> {
        let rows = linkage::joint_curve(&self.inner.linkage, lo, hi, n).py()?;
        Ok(rows.iter().map(|r| (r.theta2_deg, r.theta1_deg, r.theta3_deg)).collect())
    }

    fn coupler_rotation(&self, theta4: f64) -> PyResult<f64> {
        linkage::coupler_rotation(&self.inner.linkage, &self.inner.coupler, theta4).py()
    }

    fn phi(&self, theta2: f64) -> PyResult<f64> {
        trigger::phi_from_theta2(&self.inner.trigger, theta2, self.inner.linkage.theta2_max_deg).py()
    }

    fn trigger_x(&self, psi: f64, phi: f64) -> f64 {
        trigger::trigger_x(&self.inner.trigger, psi, phi)
    }

    fn theta2_from_x(&self, x: f64, psi: f64) -> PyResult<f64> {
        trigger::theta2_from_x(&self.inner.trigger, self.inner.linkage.theta2_max_deg, x, psi).py()
    }

    fn force_ratio(&self, theta2: f64, psi: f64) -> PyResult<f64> {
        trigger::force_ratio(&self.inner, theta2, psi).py()
    }

    fn activation_force(&self, psi: f64) -> PyResult<f64> {
        trigger::activation_force(&self.inner, psi).py()
    }

    /// `(closed_form_mJ, integral_mJ)`.
    fn activation_work(&self, psi: f64) -> PyResult<(f64, f64)> {
        let w = trigger::activation_work(&self.inner, psi).py()?;
        Ok((w.closed_form_mj, w.integral_mj))
    }

    /// Collision prediction; `work_mj=None` uses the model's activation work.
    #[pyo3(signature = (speed, psi=0.0, efficiency=1.0, work_mj=None))]
    fn collide<'py>(
        &self,
        py: Python<'py>,
        speed: f64,
        psi: f64,
        efficiency: f64,
        work_mj: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let source = work_mj.map_or(collide::WorkSource::Model, collide::WorkSource::Value);
        let scenario = collide::CollisionScenario {
            speed,
            psi_deg: psi,
            efficiency,
            required_work_mj: source.resolve(&self.inner).py()?,
        };
        let o = collide::collision_outcome(&scenario, &self.inner).py()?;
        let d = PyDict::new(py);
        d.set_item("activates", o.activates)?;
        d.set_item("kinetic_energy_mJ", o.kinetic_energy_mj)?;
        d.set_item("energy_margin_mJ", o.energy_margin_mj)?;
        d.set_item("min_activation_speed", o.min_activation_speed)?;
        d.set_item("folded", o.final_state == collide::FoldState::Folded)?;
        d.set_item("arm_theta1_deg", o.arm_theta1_deg)?;
        d.set_item("double_contact", o.warning.is_some())?;
        Ok(d)
    }

    /// Copy with lengths scaled by `s` and thrust and mass by `s**3`.
    fn scaled(&self, s: f64) -> PyResult<Self> {
        Ok(PyAirframe { inner: design::scale_design(&self.inner, s).py()? })
    }

    /// Model-generated force trace as CSV text.
    #[pyo3(signature = (psi, noise_fraction=0.0, seed=0, sample_rate_hz=1000.0))]
    fn synthetic_trace_csv(&self, psi: f64, noise_fraction: f64, seed: u64, sample_rate_hz: f64) -> PyResult<String> {
        let opts = SyntheticOptions { noise_fraction, seed, sample_rate_hz, ..SyntheticOptions::default() };
        Ok(measure::synthetic_trace(&self.inner, psi, &opts).py()?.to_csv())
    }

    /// Compares trace CSV texts with the model; one dict per trace.
    #[pyo3(signature = (traces, cutoff_hz=50.0, window="to-peak"))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        traces: Vec<String>,
        cutoff_hz: f64,
        window: &str,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let parsed = traces.iter().map(|t| measure::ForceTrace::from_csv(t)).collect::<foldframe::Result<Vec<_>>>().py()?;
        let window: WorkWindow = window.parse().py()?;
        let opts = CompareOptions { cutoff_hz, window, ..CompareOptions::default() };
        let rows = measure::compare_dataset(&parsed, &self.inner, &opts).py()?;
        rows.iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("psi_deg", r.psi_deg)?;
                d.set_item("f_max_N", r.f_max_n)?;
                d.set_item("work_mJ", r.work_mj)?;
                d.set_item("f_model_N", r.f_model_n)?;
                d.set_item("w_model_mJ", r.w_model_mj)?;
                d.set_item("deviation_pct", r.deviation_pct)?;
                d.set_item("flagged", r.flagged)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Airframe(a12={:.4}, a34={:.4}, d_mm={}, thrust_N={}, mass_g={})",
            self.inner.linkage.a12_deg,
            self.inner.linkage.a34_deg,
            self.inner.params.d_mm,
            self.inner.params.thrust_n,
            self.inner.params.mass_g
        )
    }
}

/// `(a12, a34)` fitted to two `(theta2, theta1)` anchors.
#[pyfunction]
fn calibrate(anchors: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    let anchors: Vec<linkage::Anchor> = anchors.into_iter().map(|(t2, t1)| linkage::Anchor::new(t2, t1)).collect();
    let g = linkage::calibrate(&anchors, &linkage::CalibrationLimits::default()).py()?;
    Ok((g.a12_deg, g.a34_deg))
}

#[pyfunction]
fn kinetic_energy(mass_g: f64, speed: f64) -> f64 {
    collide::kinetic_energy(mass_g, speed)
}

#[pyfunction]
#[pyo3(signature = (mass_g, work_mj, efficiency=1.0))]
fn min_activation_speed(mass_g: f64, work_mj: f64, efficiency: f64) -> f64 {
    collide::min_activation_speed(mass_g, work_mj, efficiency)
}

/// `(force_N, work_mJ, kinetic_mJ, speed)` scaled by the length ratio `s`.
#[pyfunction]
fn scale_predict(force_n: f64, work_mj: f64, kinetic_mj: f64, speed: f64, s: f64) -> PyResult<(f64, f64, f64, f64)> {
    let base = design::ScaledMetrics { force_n, work_mj, kinetic_mj, speed_m_s: speed };
    let m = design::scale_predict(&base, s).py()?;
    Ok((m.force_n, m.work_mj, m.kinetic_mj, m.speed_m_s))
}

/// Zero-phase Butterworth low-pass.
#[pyfunction]
fn lowpass(x: Vec<f64>, cutoff_hz: f64, sample_rate_hz: f64) -> PyResult<Vec<f64>> {
    measure::zero_phase_lowpass(&x, cutoff_hz, sample_rate_hz).py()
}

#[pymodule]
fn foldframe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FoldframeError", m.py().get_type::<FoldframeError>())?;
    m.add_class::<PyAirframe>()?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(kinetic_energy, m)?)?;
    m.add_function(wrap_pyfunction!(min_activation_speed, m)?)?;
    m.add_function(wrap_pyfunction!(scale_predict, m)?)?;
    m.add_function(wrap_pyfunction!(lowpass, m)?)?;
    Ok(())
}
