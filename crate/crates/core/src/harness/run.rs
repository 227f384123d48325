use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::domain::world::read_key_values;
use crate::domain::{load_bundle, make_world, WorldBundle, WorldParams};
use crate::engine::{run_workflow_with, CheckpointPolicy, EventLog, RunConfig, RunResult, Stage};
use crate::error::{Error, Result};
use crate::harness::metrics::{metrics_from_events, MetricsSeries};
use crate::harness::presets::preset;

/// World seed used when a run asks for a world directory that does not
/// exist yet.
pub const DEFAULT_WORLD_SEED: u64 = 0;

pub const EVENTS_FILE: &str = "events.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const RESULTS_FILE: &str = "results.csv";
pub const MODELS_DIR: &str = "models";

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub preset: String,
    pub config: RunConfig,
    pub result: RunResult,
    pub metrics: MetricsSeries,
}

/// Load the world in `dir`, or create and save one from `seed`.
pub fn load_or_create_world(dir: &Path, seed: u64) -> Result<WorldBundle> {
    if dir.join("world.meta").exists() {
        return load_bundle(dir);
    }
    let bundle = make_world(seed, &WorldParams::default())?;
    bundle.save(dir)?;
    Ok(bundle)
}

/// Apply a flat key=value config file on top of `base`.
pub fn load_config_file(path: &Path, mut base: RunConfig) -> Result<RunConfig> {
    for (k, v) in read_key_values(path)? {
        base.set(&k, &v)?;
    }
    Ok(base)
}

pub fn model_path(dir: &Path, version: u32) -> PathBuf {
    dir.join(MODELS_DIR).join(format!("model_{version}.trees"))
}

/// Run a workflow preset. `overrides` are applied after the preset's
/// configuration, in order.
pub fn run_preset(
    name: &str,
    seed: u64,
    world: &WorldBundle,
    out_dir: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<RunOutput> {
    let mut cfg = preset(name)?.run_config(seed)?;
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    run_config(name, &cfg, world, out_dir)
}

/// Run `cfg` and, if `out_dir` is given, write events, metrics, summary,
/// results and model checkpoints there.
pub fn run_config(
    label: &str,
    cfg: &RunConfig,
    world: &WorldBundle,
    out_dir: Option<&Path>,
) -> Result<RunOutput> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        if cfg.checkpoints != CheckpointPolicy::None && cfg.acquisition.uses_surrogate() {
            fs::create_dir_all(dir.join(MODELS_DIR))?;
        }
    }
    let save_all = cfg.checkpoints == CheckpointPolicy::All;
    let mut hook = |version: u32, model: &crate::surrogate::SurrogateEnsemble| -> Result<()> {
        match out_dir {
            Some(dir) if save_all => model.save(&model_path(dir, version)),
            _ => Ok(()),
        }
    };
    let result = run_workflow_with(
        cfg,
        &world.world,
        &world.pretrain,
        Some(&world.holdout),
        &mut hook,
    )?;
    let metrics = metrics_from_events(&result.events)?;
    let out = RunOutput {
        preset: label.to_string(),
        config: cfg.clone(),
        result,
        metrics,
    };
    if let Some(dir) = out_dir {
        write_run(dir, &out)?;
    }
    if let Some(msg) = &out.result.aborted {
        return Err(Error::Worker(msg.clone()));
    }
    Ok(out)
}

fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    out.result.events.write_csv(&dir.join(EVENTS_FILE))?;
    out.metrics.write_csv(&dir.join(METRICS_FILE))?;
    out.result.d_s.write_csv(&dir.join(RESULTS_FILE))?;
    write_summary(&dir.join(SUMMARY_FILE), &summary_pairs(out))?;
    if out.config.checkpoints == CheckpointPolicy::Final {
        if let Some(m) = &out.result.final_model {
            let v = out.result.counters.retrains.saturating_sub(1) as u32;
            m.save(&model_path(dir, v))?;
        }
    }
    Ok(())
}

/// Flat key/value run summary: effective config, counters and the timing
/// ledger with per-stage shares.
pub fn summary_pairs(out: &RunOutput) -> Vec<(String, String)> {
    let mut p: Vec<(String, String)> = vec![("preset".into(), out.preset.clone())];
    for (k, v) in out.config.to_pairs() {
        p.push((format!("config.{k}"), v));
    }
    let c = &out.result.counters;
    for (k, v) in [
        ("generated", c.generated),
        ("simulated", c.simulated),
        ("stable", c.stable),
        ("duplicates", c.duplicates),
        ("invalid", c.invalid),
        ("retrains", c.retrains),
        ("fine_tunes", c.fine_tunes),
        ("rank_passes", c.rank_passes),
        ("dropped_in_flight", c.dropped_in_flight),
    ] {
        p.push((format!("counters.{k}"), v.to_string()));
    }
    let l = &out.result.ledger;
    for s in Stage::ALL {
        p.push((format!("ledger.{s}.seconds"), format!("{:.3}", l.get(s))));
        p.push((
            format!("ledger.{s}.percent"),
            format!("{:.4}", 100.0 * l.share(s)),
        ));
    }
    p.push(("ledger.total.seconds".into(), format!("{:.3}", l.total())));
    if let Some(r) = out.metrics.last() {
        p.push(("final.n_simulated".into(), r.n_simulated.to_string()));
        p.push(("final.cum_stable".into(), r.cum_stable.to_string()));
        p.push((
            "final.stable_fraction".into(),
            r.stable_fraction.to_string(),
        ));
        p.push((
            "final.holdout_rmse".into(),
            r.holdout_rmse.map_or_else(String::new, |v| v.to_string()),
        ));
    }
    if let Some(msg) = &out.result.aborted {
        p.push(("aborted".into(), msg.replace('\n', " ")));
    }
    p
}

pub fn write_summary(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k}={v}");
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<BTreeMap<String, String>> {
    read_key_values(path)
}

#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub metrics: MetricsSeries,
    /// Whether the recomputed CSV matches `metrics.csv` byte for byte.
    pub identical: bool,
    pub written: PathBuf,
}

/// Recompute metrics from `events.csv` in `dir`, write them to
/// `metrics.replay.csv` and compare with the stored `metrics.csv`.
pub fn replay(dir: &Path) -> Result<ReplayOutcome> {
    let log = EventLog::read_csv(&dir.join(EVENTS_FILE))?;
    let metrics = metrics_from_events(&log)?;
    let csv = metrics.to_csv();
    let written = dir.join("metrics.replay.csv");
    fs::write(&written, &csv)?;
    let identical = match fs::read(dir.join(METRICS_FILE)) {
        Ok(stored) => stored == csv.as_bytes(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => false,
        Err(e) => return Err(e.into()),
    };
    Ok(ReplayOutcome {
        metrics,
        identical,
        written,
    })
}
