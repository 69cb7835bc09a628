//! Python bindings: assemblage compilation, FSM stepping, potential fields
//! and the scenario simulator.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use schemasim::dsl;
use schemasim::fields::{self, AttractiveParams, Branch, RepulsiveParams};
use schemasim::fsm::{self, Releaser};
use schemasim::vec2::{KinematicState, Vec2};
use schemasim::world::{self, ScenarioConfig, TickRecord, WorldState};

type Kin = (f64, f64, f64, f64);

fn kin((px, py, vx, vy): Kin) -> KinematicState {
    KinematicState::new(Vec2::new(px, py), Vec2::new(vx, vy))
}

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn releasers(names: &[String]) -> PyResult<Vec<Releaser>> {
    names.iter().map(|n| Releaser::new(n.as_str()).map_err(value_err)).collect()
}

/// A compiled finite state machine.
#[pyclass(name = "Fsm", module = "schemasim", frozen)]
pub struct PyFsm {
    inner: fsm::Fsm,
}

#[pymethods]
impl PyFsm {
    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn start(&self) -> u32 {
        self.inner.start
    }

    /// `(index, label)` pairs in index order.
    #[getter]
    fn states(&self) -> Vec<(u32, String)> {
        self.inner.states.iter().map(|s| (s.index, s.label.clone())).collect()
    }

    #[getter]
    fn alphabet(&self) -> Vec<String> {
        self.inner.alphabet.iter().map(|r| r.as_str().to_string()).collect()
    }

    /// `(from, releaser, to)` in firing-priority order.
    #[getter]
    fn transitions(&self) -> Vec<(u32, String, u32)> {
        self.inner.transitions.iter().map(|t| (t.from, t.releaser.as_str().to_string(), t.to)).collect()
    }

    fn label(&self, index: u32) -> PyResult<String> {
        self.inner.label(index).map(str::to_string).ok_or_else(|| PyKeyError::new_err(index))
    }

    fn table(&self) -> String {
        self.inner.to_table()
    }

    fn dot(&self) -> String {
        self.inner.to_dot()
    }

    /// Assemblage-notation source for this machine.
    fn render(&self) -> PyResult<String> {
        dsl::render_assemblage(&self.inner).map_err(value_err)
    }

    /// Problems found by structural validation; empty when the machine is well formed.
    fn validate(&self) -> Vec<String> {
        fsm::validate_fsm(&self.inner).findings.iter().map(|f| f.to_string()).collect()
    }

    /// Fires the first active releaser with a transition out of `current`.
    /// Returns `(next_state, fired_releaser_or_None)`.
    fn step(&self, current: u32, active: Vec<String>) -> PyResult<(u32, Option<String>)> {
        let rec = fsm::step_fsm(&self.inner, current, &releasers(&active)?).map_err(value_err)?;
        Ok((rec.to, rec.fired.map(|r| r.as_str().to_string())))
    }

    /// States visited from the start state under a stimulus sequence.
    fn run_sequence(&self, stimuli: Vec<Vec<String>>) -> PyResult<Vec<u32>> {
        let stimuli = stimuli.iter().map(|s| releasers(s)).collect::<PyResult<Vec<_>>>()?;
        let recs = fsm::run_sequence(&self.inner, &stimuli).map_err(value_err)?;
        Ok(recs.iter().map(|r| r.to).collect())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Fsm({}, states={}, transitions={})",
            self.inner.name,
            self.inner.states.len(),
            self.inner.transitions.len()
        )
    }
}

/// Compiles assemblage source text. Raises `ValueError` carrying every
/// diagnostic as `line:col: message`.
#[pyfunction]
fn compile(source: &str) -> PyResult<PyFsm> {
    dsl::compile_source(source).map(|inner| PyFsm { inner }).map_err(|ds| {
        PyValueError::new_err(ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))
    })
}

/// Canonical transition listing of `source`.
#[pyfunction]
fn compile_table(source: &str) -> PyResult<String> {
    Ok(compile(source)?.inner.to_table())
}

/// Robot and target states are `(px, py, vx, vy)` tuples.
#[pyfunction]
#[pyo3(signature = (robot, target, alpha_p=1.0, alpha_v=1.5, m=2.0, n=2.0))]
fn attractive_potential(robot: Kin, target: Kin, alpha_p: f64, alpha_v: f64, m: f64, n: f64) -> PyResult<f64> {
    let p = AttractiveParams::new(alpha_p, alpha_v, m, n).map_err(value_err)?;
    Ok(fields::attractive_potential(&kin(robot), &kin(target), &p))
}

#[pyfunction]
#[pyo3(signature = (robot, target, alpha_p=1.0, alpha_v=1.5, m=2.0, n=2.0))]
fn attractive_force(robot: Kin, target: Kin, alpha_p: f64, alpha_v: f64, m: f64, n: f64) -> PyResult<(f64, f64)> {
    let p = AttractiveParams::new(alpha_p, alpha_v, m, n).map_err(value_err)?;
    let f = fields::attractive_force(&kin(robot), &kin(target), &p).map_err(value_err)?;
    Ok((f.x, f.y))
}

/// Returns `(fx, fy, branch, potential)`; potential is `None` on the
/// unavoidable-collision branch.
#[pyfunction]
#[pyo3(signature = (robot, obstacle, eta=1.0, rho_0=1.0, a_max=4.0, f_max=6.0))]
fn repulsive_force(
    robot: Kin,
    obstacle: Kin,
    eta: f64,
    rho_0: f64,
    a_max: f64,
    f_max: f64,
) -> PyResult<(f64, f64, &'static str, Option<f64>)> {
    let p = RepulsiveParams::new(eta, rho_0, a_max, f_max).map_err(value_err)?;
    let s = fields::repulsive_force(&kin(robot), &kin(obstacle), &p).map_err(value_err)?;
    let branch = match s.branch {
        Branch::Zero => "zero",
        Branch::Active => "active",
        Branch::UndefinedCollision => "undefined_collision",
    };
    Ok((s.force.x, s.force.y, branch, s.potential))
}

fn load_config(config: Option<PathBuf>, kind: &str) -> PyResult<ScenarioConfig> {
    match config {
        Some(path) => ScenarioConfig::load(path).map_err(value_err),
        None => match kind {
            "foraging" => Ok(ScenarioConfig::foraging_demo()),
            "soccer" => Ok(ScenarioConfig::soccer_demo()),
            other => Err(PyValueError::new_err(format!("unknown scenario kind {other:?}"))),
        },
    }
}

/// A running scenario. Built from a config file, or from the built-in
/// `"foraging"` / `"soccer"` demo when no file is given.
#[pyclass(name = "Simulation", module = "schemasim")]
pub struct PySimulation {
    world: WorldState,
    records: Vec<TickRecord>,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (seed, config=None, kind="foraging"))]
    fn new(seed: u64, config: Option<PathBuf>, kind: &str) -> PyResult<Self> {
        let cfg = load_config(config, kind)?;
        let world = world::init_world(&cfg, seed).map_err(value_err)?;
        let records = vec![TickRecord::capture(&world, true)];
        Ok(Self { world, records })
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.world.tick
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.world.seed
    }

    #[getter]
    fn done(&self) -> bool {
        self.world.is_complete() || self.world.tick >= self.world.config.sim.step_limit
    }

    /// Advances up to `n` ticks, stopping early when the run is over.
    /// Returns the number of ticks taken.
    #[pyo3(signature = (n=1))]
    fn step(&mut self, n: u64) -> PyResult<u64> {
        let mut taken = 0;
        while taken < n && !self.done() {
            self.world.step().map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
            self.records.push(TickRecord::capture(&self.world, false));
            taken += 1;
        }
        Ok(taken)
    }

    /// Runs to completion or the step limit and returns the metrics.
    fn run<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        self.step(u64::MAX)?;
        self.metrics(py)
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &schemasim::cli::metrics_json(&world::compute_metrics(&self.records)))
    }

    /// Robot records of the current tick.
    fn robots<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let rec = self.records.last().expect("initial record");
        rec.robots
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("id", r.id)?;
                d.set_item("x", r.x)?;
                d.set_item("y", r.y)?;
                d.set_item("vx", r.vx)?;
                d.set_item("vy", r.vy)?;
                d.set_item("state", &r.state)?;
                d.set_item("gripper", r.gripper)?;
                Ok(d)
            })
            .collect()
    }

    /// `(x, y, vx, vy)` of the ball, or `None` outside soccer.
    fn ball(&self) -> Option<Kin> {
        self.world.ball.map(|b| (b.p.x, b.p.y, b.v.x, b.v.y))
    }

    /// Number of attractors delivered so far.
    fn delivered(&self) -> usize {
        self.world.delivered()
    }

    /// The trace so far as JSON lines.
    fn trace_jsonl(&self) -> PyResult<String> {
        let mut out = Vec::new();
        world::write_trace(&self.records, &mut out).map_err(value_err)?;
        String::from_utf8(out).map_err(value_err)
    }
}

/// Runs one seed to completion and returns `(metrics, trace_jsonl)`.
#[pyfunction]
#[pyo3(signature = (seed, config=None, kind="foraging"))]
fn run_simulation<'py>(
    py: Python<'py>,
    seed: u64,
    config: Option<PathBuf>,
    kind: &str,
) -> PyResult<(Bound<'py, PyAny>, String)> {
    let mut sim = PySimulation::new(seed, config, kind)?;
    let metrics = sim.run(py)?;
    Ok((metrics, sim.trace_jsonl()?))
}

#[pymodule]
#[pyo3(name = "schemasim")]
fn schemasim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFsm>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(compile_table, m)?)?;
    m.add_function(wrap_pyfunction!(attractive_potential, m)?)?;
    m.add_function(wrap_pyfunction!(attractive_force, m)?)?;
    m.add_function(wrap_pyfunction!(repulsive_force, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add("HOM_FOR_SOURCE", schemasim::schemas::HOM_FOR_SOURCE)?;
    m.add("FORWARD_SOURCE", schemasim::schemas::FORWARD_SOURCE)?;
    m.add("GOALKEEPER_SOURCE", schemasim::schemas::GOALKEEPER_SOURCE)?;
    Ok(())
}
