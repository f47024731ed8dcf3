use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use ::hrteam::assets;
use ::hrteam::sim::{self, HumanScript, SimConfig, SimError};
use ::hrteam::world::Scenario;

create_exception!(hrteam, SimulationError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    SimulationError::new_err(e.to_string())
}

fn config(
    scenario: Option<&str>,
    seed: Option<u64>,
    tick_limit: Option<u64>,
    human_script: Option<&str>,
) -> PyResult<SimConfig> {
    let scenario = Scenario::from_toml(scenario.unwrap_or(assets::SCENARIO)).map_err(err)?;
    let human = HumanScript::parse(human_script.unwrap_or(assets::HUMAN_SCRIPT)).map_err(err)?;
    Ok(SimConfig {
        scenario,
        seed,
        tick_limit,
        human,
    })
}

/// Artifacts of a finished run.
#[pyclass(frozen, name = "RunReport")]
struct PyRunReport(sim::RunReport);

#[pymethods]
impl PyRunReport {
    /// "found", "exhausted", "timeout", or None if the run was stopped early.
    #[getter]
    fn outcome(&self) -> Option<String> {
        self.0.outcome.map(|o| o.to_string())
    }

    #[getter]
    fn ticks(&self) -> u64 {
        self.0.ticks
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn leader(&self) -> String {
        self.0.leader.clone()
    }

    /// Newline-delimited JSON envelopes.
    #[getter]
    fn transcript(&self) -> String {
        self.0.transcript.clone()
    }

    /// `tick,sha256` lines.
    #[getter]
    fn digests(&self) -> Vec<String> {
        self.0.digests.clone()
    }

    #[getter]
    fn thoughts(&self) -> Vec<String> {
        self.0.thoughts.clone()
    }

    #[getter]
    fn tactical_trace(&self) -> Vec<String> {
        self.0.tactical_trace.clone()
    }

    /// `(tick, robot, zone, waypoint index)` per search dwell.
    #[getter]
    fn visits(&self) -> Vec<(u64, String, String, usize)> {
        self.0
            .visits
            .iter()
            .map(|v| (v.tick, v.robot.clone(), v.zone.clone(), v.index))
            .collect()
    }

    /// Chat lines as `sender>addressee: text`.
    fn chat(&self) -> Vec<String> {
        self.0.chat()
    }

    fn write_dir(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.0.write_dir(&path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunReport(outcome={}, ticks={}, seed={}, leader={:?})",
            self.outcome().map_or("None".to_string(), |o| format!("{o:?}")),
            self.0.ticks,
            self.0.seed,
            self.0.leader
        )
    }
}

/// A simulation advanced one tick at a time.
#[pyclass(unsendable, name = "Sim")]
struct PySim(sim::Sim);

#[pymethods]
impl PySim {
    #[new]
    #[pyo3(signature = (scenario=None, seed=None, tick_limit=None, human_script=None))]
    fn new(
        scenario: Option<&str>,
        seed: Option<u64>,
        tick_limit: Option<u64>,
        human_script: Option<&str>,
    ) -> PyResult<Self> {
        let cfg = config(scenario, seed, tick_limit, human_script)?;
        sim::Sim::new(cfg).map(PySim).map_err(err)
    }

    /// Advances one tick; returns the outcome once the run is over.
    fn step(&mut self) -> PyResult<Option<String>> {
        let o = self.0.step().map_err(err)?;
        Ok(o.map(|o| o.to_string()))
    }

    /// Steps until the run ends and returns the report.
    fn run(&mut self) -> PyResult<PyRunReport> {
        while self.0.step().map_err(err)?.is_none() {}
        Ok(PyRunReport(self.0.report()))
    }

    /// Queues a human chat line for the next tick.
    #[pyo3(signature = (text, addressee="team"))]
    fn say(&mut self, text: &str, addressee: &str) -> PyResult<()> {
        self.0.inject(addressee, text).map_err(err)
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.0.tick()
    }

    #[getter]
    fn leader(&self) -> String {
        self.0.leader().to_string()
    }

    #[getter]
    fn outcome(&self) -> Option<String> {
        self.0.outcome().map(|o| o.to_string())
    }

    #[getter]
    fn transcript(&self) -> String {
        self.0.bus.transcript()
    }

    /// World state as a JSON string.
    fn map_snapshot(&self) -> String {
        self.0.world.map_snapshot().to_string()
    }

    fn report(&self) -> PyRunReport {
        PyRunReport(self.0.report())
    }
}

/// Runs a scenario headless. Defaults to the shipped apartment and script.
#[pyfunction]
#[pyo3(signature = (scenario=None, seed=None, tick_limit=None, human_script=None))]
fn run(
    scenario: Option<&str>,
    seed: Option<u64>,
    tick_limit: Option<u64>,
    human_script: Option<&str>,
) -> PyResult<PyRunReport> {
    let cfg = config(scenario, seed, tick_limit, human_script)?;
    let r = sim::Sim::new(cfg)
        .and_then(sim::Sim::run)
        .map_err(|e: SimError| err(e))?;
    Ok(PyRunReport(r))
}

/// Re-runs a recorded transcript. Returns `None` on a byte-exact match,
/// otherwise a description of the first divergence.
#[pyfunction]
#[pyo3(signature = (transcript, digests=None, scenario=None, seed=None))]
fn replay(
    transcript: &str,
    digests: Option<&str>,
    scenario: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Option<String>> {
    let scenario = Scenario::from_toml(scenario.unwrap_or(assets::SCENARIO)).map_err(err)?;
    let (_, mismatch) = sim::replay(scenario, seed, transcript, digests).map_err(err)?;
    Ok(mismatch.map(|m| m.to_string()))
}

/// Problems with a scenario; empty when it is valid.
#[pyfunction]
fn validate_scenario(src: &str) -> Vec<String> {
    match Scenario::from_toml(src) {
        Ok(s) => s.violations(),
        Err(e) => vec![e.to_string()],
    }
}

#[pyfunction]
fn shipped_scenario() -> &'static str {
    assets::SCENARIO
}

#[pyfunction]
fn shipped_human_script() -> &'static str {
    assets::HUMAN_SCRIPT
}

#[pymodule]
fn hrteam(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add_class::<PySim>()?;
    m.add_class::<PyRunReport>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(shipped_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(shipped_human_script, m)?)?;
    Ok(())
}
