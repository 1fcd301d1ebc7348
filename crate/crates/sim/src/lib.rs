//! Synthetic users for the privacy warning engine.
//!
//! Agents post from a mix of scenarios, heed or ignore warnings, and report
//! the incidents that follow, which are drawn from known consequence
//! distributions. Because the true index of each distribution is known in
//! closed form, the estimator's error and interval coverage can be measured
//! directly. Every agent draws from its own seeded stream, so a run is a pure
//! function of its configuration.

pub mod config;
pub mod driver;
pub mod run;

pub use config::{AgentSpec, IncidentSpec, ScenarioSpec, SimConfig};
pub use driver::{Driver, Http, InProcess};
pub use run::{
    agent_rng, run_simulation, run_with, synthesize_post, write_csv, AgentReport, CellReport,
    SimulationReport, Totals, TracePoint,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] sentinel_service::EngineError),
    #[error("http: {0}")]
    Http(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<sentinel_core::Error> for SimError {
    fn from(e: sentinel_core::Error) -> Self {
        SimError::Engine(e.into())
    }
}
