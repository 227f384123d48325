//! The queue-prioritization control loop: producer, ranked queue, oracle
//! workers, surrogate refits and generator fine-tunes, stopping at
//! `n_target` results.

mod config;
mod coordinator;
mod des;
mod events;
mod ledger;
mod parallel;

pub use config::{format_latency, parse_latency, CheckpointPolicy, CostModel, ExecMode, RunConfig};
pub use coordinator::{Counters, RunResult, GENERATED_ID_BASE};
pub use events::{Event, EventKind, EventLog, EVENTS_HEADER};
pub use ledger::{Stage, TimingLedger};

use crate::dataset::Dataset;
use crate::domain::WorldSpec;
use crate::error::Result;
use crate::surrogate::SurrogateEnsemble;
use coordinator::Coordinator;

/// Run the workflow until `cfg.n_target` results exist. `holdout`, when
/// given, is scored after every refit and its RMSE logged with the RETRAIN
/// event.
pub fn run_workflow(
    cfg: &RunConfig,
    world: &WorldSpec,
    pretrain: &Dataset,
    holdout: Option<&Dataset>,
) -> Result<RunResult> {
    run_workflow_with(cfg, world, pretrain, holdout, &mut |_, _| Ok(()))
}

/// As [`run_workflow`], calling `on_model(version, model)` for each fitted
/// surrogate before it replaces the previous one.
pub fn run_workflow_with(
    cfg: &RunConfig,
    world: &WorldSpec,
    pretrain: &Dataset,
    holdout: Option<&Dataset>,
    on_model: &mut dyn FnMut(u32, &SurrogateEnsemble) -> Result<()>,
) -> Result<RunResult> {
    let c = Coordinator::new(cfg, world, pretrain, holdout, on_model)?;
    match cfg.mode {
        ExecMode::DeterministicEventSim => des::run(c),
        ExecMode::Parallel => parallel::run(c),
    }
}
