//! Python bindings for the `galcm` core: model setup, saddle points, the
//! normal-form reduction, Lyapunov orbits, break times and morphology.

use galcm::connections::{classify_morphology, openness_ratio, ConnectionOptions, ModelContext};
use galcm::convergence::{break_times as core_break_times, ConvergenceOptions};
use galcm::dynamics::{planar_lyapunov as core_planar, vertical_lyapunov as core_vertical, PeriodicOrbit};
use galcm::equilibria::{find_lagrange_points, linearize, saddle_energy};
use galcm::reduction::{reduce, Elimination};
use galcm::store::{load_reduction, save_reduction};
use galcm::{ModelParams, PhaseState, SaddlePoint};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: galcm::Error) -> PyErr {
    match e {
        galcm::Error::Io(_) | galcm::Error::Artifact(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = galcm::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Logarithmic bar potential in a frame rotating with pattern speed `omega`.
#[pyclass(name = "Model", frozen)]
#[derive(Clone)]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (v0=200.0, r0_sq=200.0, p_phi=0.75, q_phi=0.65, omega=5.0))]
    fn new(v0: f64, r0_sq: f64, p_phi: f64, q_phi: f64, omega: f64) -> PyResult<Self> {
        let inner = ModelParams {
            v0,
            r0: r0_sq.sqrt(),
            p_phi,
            q_phi,
            omega,
        };
        inner.validate().map_err(|v| PyValueError::new_err(v.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let m = &self.inner;
        d.set_item("v0", m.v0)?;
        d.set_item("r0_sq", m.r0_sq())?;
        d.set_item("p_phi", m.p_phi)?;
        d.set_item("q_phi", m.q_phi)?;
        d.set_item("omega", m.omega)?;
        Ok(d)
    }

    /// Jacobi energy of a state `(x, y, z, px, py, pz)`.
    fn jacobi(&self, state: [f64; 6]) -> f64 {
        self.inner.hamiltonian(&PhaseState::from_array(state))
    }

    fn saddle_energy(&self) -> PyResult<f64> {
        saddle_energy(&self.inner).map_err(err)
    }

    /// `[(name, x, y, stability)]` for every equilibrium in the plane.
    fn lagrange_points(&self) -> PyResult<Vec<(String, f64, f64, String)>> {
        let set = find_lagrange_points(&self.inner).map_err(err)?;
        Ok(set.points.iter().map(|(p, s, st)| (format!("{p:?}"), s.x, s.y, format!("{st:?}"))).collect())
    }

    /// `(lambda, omega1, omega2)` at a saddle point.
    #[pyo3(signature = (point="L1"))]
    fn eigenvalues(&self, point: &str) -> PyResult<(f64, f64, f64)> {
        let lin = linearize(&self.inner, parse(point)?).map_err(err)?;
        Ok((lin.lambda, lin.omega1, lin.omega2))
    }

    /// Normal-form reduction around a saddle point.
    #[pyo3(signature = (order=15, point="L1", elimination="centre-manifold"))]
    fn reduce(&self, py: Python<'_>, order: usize, point: &str, elimination: &str) -> PyResult<PyReduction> {
        let (point, elim): (SaddlePoint, Elimination) = (parse(point)?, parse(elimination)?);
        let params = self.inner;
        let inner = py.allow_threads(|| reduce(&params, point, order, elim)).map_err(err)?;
        Ok(PyReduction { inner })
    }

    /// Morphology at `saddle_energy() + delta_e`, as a dict.
    #[pyo3(signature = (delta_e, order=15, side="outer"))]
    fn morphology<'py>(&self, py: Python<'py>, delta_e: f64, order: usize, side: &str) -> PyResult<Bound<'py, PyDict>> {
        let opts = ConnectionOptions {
            order,
            side: parse(side)?,
            ..ConnectionOptions::default()
        };
        let params = self.inner;
        let (rep, r_s) = py
            .allow_threads(|| {
                let ctx = ModelContext::new(&params, order)?;
                let e = ctx.saddle_energy() + delta_e;
                Ok::<_, galcm::Error>((classify_morphology(&ctx, e, &opts)?, openness_ratio(&ctx, e, &opts).ok()))
            })
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("energy", rep.energy)?;
        d.set_item("class", rep.class.name())?;
        d.set_item("homoclinic", rep.n_homoclinic())?;
        d.set_item("heteroclinic", rep.n_heteroclinic())?;
        d.set_item("r_s", r_s)?;
        d.set_item("notes", rep.notes)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "Model(v0={}, r0_sq={}, p_phi={}, q_phi={}, omega={})",
            m.v0,
            m.r0_sq(),
            m.p_phi,
            m.q_phi,
            m.omega
        )
    }
}

#[pyclass(name = "Reduction", frozen)]
struct PyReduction {
    inner: galcm::reduction::Reduction,
}

#[pymethods]
impl PyReduction {
    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        load_reduction(dir.as_ref()).map(|inner| Self { inner }).map_err(err)
    }

    fn save(&self, dir: &str) -> PyResult<()> {
        save_reduction(&self.inner, dir.as_ref()).map(|_| ()).map_err(err)
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order
    }

    #[getter]
    fn h0(&self) -> f64 {
        self.inner.h0
    }

    #[getter]
    fn point(&self) -> &'static str {
        self.inner.point.name()
    }

    #[getter]
    fn elimination(&self) -> &'static str {
        self.inner.elimination.name()
    }

    /// Monomials of the reduced Hamiltonian that couple the saddle pair to the centre.
    fn mixing_monomials(&self) -> usize {
        self.inner.mixing_monomials()
    }

    /// Normal-form coordinates `(q1, p1, q2, p2, q3, p3)` to the physical state.
    fn to_physical(&self, nf: [f64; 6]) -> [f64; 6] {
        self.inner.nf_to_barycentric(&nf).to_array()
    }

    fn to_normal_form(&self, state: [f64; 6]) -> [f64; 6] {
        self.inner.barycentric_to_nf(&PhaseState::from_array(state))
    }

    /// Reduced Hamiltonian at normal-form coordinates.
    fn energy(&self, nf: [f64; 6]) -> f64 {
        self.inner.energy(&nf)
    }

    /// Times at which the reduced and full flows first separate by each tolerance.
    #[pyo3(signature = (nf, tols, t_max=6.5))]
    fn break_times(&self, py: Python<'_>, nf: [f64; 6], tols: Vec<f64>, t_max: f64) -> PyResult<Vec<f64>> {
        let opts = ConvergenceOptions {
            t_max,
            ..ConvergenceOptions::default()
        };
        py.allow_threads(|| core_break_times(&self.inner, &nf, &tols, &opts)).map_err(err)
    }

    fn planar_lyapunov(&self, py: Python<'_>, energy: f64) -> PyResult<PyOrbit> {
        py.allow_threads(|| core_planar(&self.inner, energy)).map(PyOrbit::from).map_err(err)
    }

    fn vertical_lyapunov(&self, py: Python<'_>, energy: f64) -> PyResult<PyOrbit> {
        py.allow_threads(|| core_vertical(&self.inner, energy)).map(PyOrbit::from).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Reduction(point={}, order={}, elimination={})", self.point(), self.order(), self.elimination())
    }
}

#[pyclass(name = "Orbit", frozen, get_all)]
struct PyOrbit {
    period: f64,
    energy: f64,
    closure: f64,
    refined: bool,
    /// Rows `(t, x, y, z, px, py, pz, EJ)`.
    samples: Vec<[f64; 8]>,
}

impl From<PeriodicOrbit> for PyOrbit {
    fn from(o: PeriodicOrbit) -> Self {
        let samples = o
            .trajectory
            .samples
            .iter()
            .map(|s| {
                let [x, y, z, px, py, pz] = s.state;
                [s.t, x, y, z, px, py, pz, s.energy]
            })
            .collect();
        Self {
            period: o.period,
            energy: o.energy,
            closure: o.closure,
            refined: o.refined,
            samples,
        }
    }
}

#[pymodule]
fn galcm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyReduction>()?;
    m.add_class::<PyOrbit>()?;
    Ok(())
}
