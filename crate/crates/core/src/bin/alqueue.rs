use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use alqueue::domain::{make_world, read_dataset, WorldParams};
use alqueue::engine::{CheckpointPolicy, ExecMode, RunConfig};
use alqueue::harness::metrics::{mean_csv, sparkline};
use alqueue::harness::{
    all_presets, compare_runs, load_config_file, load_or_create_world, mean_series, preset,
    reorder_experiment, replay, run_config, strategy, PresetKind, ReorderParams,
    DEFAULT_WORLD_SEED,
};

#[derive(Parser)]
#[command(
    name = "alqueue",
    version,
    about = "Queue prioritization for generative candidate streams"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic world (pretraining, holdout and pool sets).
    World {
        #[arg(long, default_value_t = DEFAULT_WORLD_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a workflow preset.
    Run {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// World directory; created with the default world seed if missing.
        #[arg(long, default_value = "world")]
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_target: Option<usize>,
        #[arg(long)]
        mode: Option<ExecMode>,
        /// key=value file applied after the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Single key=value override, applied last. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        checkpoints: Option<CheckpointPolicy>,
    },
    /// Offline reordering of a labelled pool.
    Reorder {
        /// Strategy: a reorder preset name, or random|exploit|explore|fifo|lcb:<lambda>.
        #[arg(long)]
        strategy: String,
        #[arg(long, default_value = "world")]
        world: PathBuf,
        /// Pool CSV; defaults to the world's pool.csv.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        batch: usize,
        #[arg(long, default_value_t = 200)]
        warm: usize,
        /// Number of seeds; runs seeds 0..N.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare completed run directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write table.csv and aligned.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics from a run's event log.
    Replay { dir: PathBuf },
    /// List presets.
    Presets,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::World { seed, out } => {
            let b = make_world(seed, &WorldParams::default())?;
            b.save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            let c = &b.world.calibration;
            println!(
                "world seed {seed}: stable_rate={:.4} sa_mean={:.4} invalid_rate={:.4} pretrain={} holdout={} pool={}",
                c.stable_rate,
                c.sa_mean,
                c.invalid_rate,
                b.pretrain.len(),
                b.holdout.len(),
                b.pool.len()
            );
        }
        Cmd::Run {
            preset: name,
            seed,
            world,
            out,
            n_target,
            mode,
            config,
            set,
            checkpoints,
        } => {
            let mut cfg = preset(&name)?.run_config(seed)?;
            if let Some(path) = &config {
                cfg = load_config_file(path, cfg)?;
            }
            if let Some(n) = n_target {
                cfg.n_target = n;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(c) = checkpoints {
                cfg.checkpoints = c;
            }
            apply_sets(&mut cfg, &set)?;
            cfg.validate()?;
            let bundle = load_or_create_world(&world, DEFAULT_WORLD_SEED)?;
            let r = run_config(&name, &cfg, &bundle, Some(&out))?;
            let last = r.metrics.last();
            println!(
                "{name} seed {seed}: simulated={} stable={} R_T={:.4} rmse={} prioritize={:.3}% -> {}",
                r.result.counters.simulated,
                r.result.counters.stable,
                last.map_or(0.0, |l| l.stable_fraction),
                last.and_then(|l| l.holdout_rmse)
                    .map_or_else(|| "-".into(), |v| format!("{v:.4}")),
                100.0 * r.result.ledger.share(alqueue::engine::Stage::Prioritize),
                out.display()
            );
        }
        Cmd::Reorder {
            strategy: s,
            world,
            pool,
            batch,
            warm,
            seeds,
            out,
        } => {
            let spec = strategy(&s)?;
            let seeds: Vec<u64> = (0..seeds).collect();
            let bundle = load_or_create_world(&world, DEFAULT_WORLD_SEED)?;
            let pool = match pool {
                Some(p) => read_dataset(&bundle.world, &p)?,
                None => bundle.pool.clone(),
            };
            if pool.is_empty() {
                bail!("empty pool");
            }
            let params = ReorderParams {
                batch,
                warm,
                ..ReorderParams::default()
            };
            let runs = reorder_experiment(&pool, Some(&bundle.holdout), &spec, &params, &seeds)?;
            fs::create_dir_all(&out)?;
            for (seed, m) in seeds.iter().zip(&runs) {
                m.write_csv(&out.join(format!("seed_{seed}.csv")))?;
            }
            let mean = mean_series(&runs)?;
            fs::write(out.join("mean.csv"), mean_csv(&mean))?;
            let curve: Vec<f64> = mean.iter().map(|r| r.cum_stable).collect();
            if let Some(l) = mean.last() {
                println!(
                    "{s}: {} seeds, final stable={:.1} rmse={} {}",
                    seeds.len(),
                    l.cum_stable,
                    l.holdout_rmse
                        .map_or_else(|| "-".into(), |v| format!("{v:.4}")),
                    sparkline(&curve)
                );
            }
        }
        Cmd::Compare { dirs, out } => {
            let c = compare_runs(&dirs)?;
            print!("{}", c.to_text());
            if let Some(o) = out {
                fs::create_dir_all(&o)?;
                fs::write(o.join("table.csv"), c.table_csv())?;
                fs::write(o.join("aligned.csv"), c.aligned_csv())?;
            }
        }
        Cmd::Replay { dir } => {
            let r = replay(&dir)?;
            println!(
                "{} rows -> {} ({})",
                r.metrics.rows.len(),
                r.written.display(),
                if r.identical {
                    "identical to metrics.csv"
                } else {
                    "DIFFERS from metrics.csv"
                }
            );
            if !r.identical {
                std::process::exit(1);
            }
        }
        Cmd::Presets => print_presets(),
    }
    Ok(())
}

fn apply_sets(cfg: &mut RunConfig, sets: &[String]) -> Result<()> {
    for s in sets {
        let Some((k, v)) = s.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{s}`");
        };
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn print_presets() {
    for p in all_presets() {
        let kind = match &p.kind {
            PresetKind::Reorder(_) => "reorder".to_string(),
            PresetKind::Workflow {
                ft_fraction,
                active_learning,
                ..
            } => format!(
                "workflow ft={ft_fraction} al={}",
                if *active_learning { "on" } else { "off" }
            ),
        };
        println!("{:<20} {:<28} {}", p.name, kind, p.description);
    }
}
