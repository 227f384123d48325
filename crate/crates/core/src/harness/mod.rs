//! Presets, run orchestration, metrics, the offline reordering experiment
//! and cross-run comparison.

pub mod compare;
pub mod metrics;
pub mod presets;
pub mod reorder;
pub mod run;

pub use compare::{compare_runs, Comparison, RunSummary};
pub use metrics::{
    mean_series, metrics_from_events, MeanRow, MetricsRow, MetricsSeries, CHECKPOINT_EVERY, WINDOW,
};
pub use presets::{
    al_workflow_presets, all_presets, preset, strategy, Preset, PresetKind, PRESET_RETRAIN_BATCH,
};
pub use reorder::{reorder_experiment, reorder_run, ReorderParams};
pub use run::{
    load_config_file, load_or_create_world, replay, run_config, run_preset, RunOutput,
    DEFAULT_WORLD_SEED,
};
