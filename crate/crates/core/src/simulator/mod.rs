//! Stochastic self-modifying agent, interval operator and scenario runs.

mod agent;
mod config;
mod estimate;
mod objective;
mod run;

pub use agent::{step_interval, Agent, StepReport};
pub use config::{EstimationConfig, GlobalConfig, HybridConfig, InitialState, Proposal, ScenarioConfig};
pub use estimate::{build_kernel, estimate_R, realize_F, Realizer};
pub use objective::Objective;
pub use run::{run_scenario, IntervalMetrics, TrajectoryRecord};
