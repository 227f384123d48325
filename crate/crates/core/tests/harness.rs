mod common;

use std::fs;
use std::path::PathBuf;

use alqueue::dataset::{Dataset, Thresholds};
use alqueue::engine::{CheckpointPolicy, RunConfig};
use alqueue::harness::run::{model_path, read_summary};
use alqueue::harness::{
    compare_runs, load_config_file, reorder_run, replay, run_config, run_preset, strategy,
    MetricsSeries, ReorderParams,
};
use alqueue::surrogate::SurrogateParams;

fn overrides(n: usize) -> Vec<(String, String)> {
    vec![
        ("n_target".into(), n.to_string()),
        ("workers".into(), "8".into()),
        ("surrogate.n_trees".into(), "8".into()),
    ]
}

#[test]
fn run_writes_replayable_outputs() {
    let w = common::small_world();
    let dir = tempfile::tempdir().unwrap();
    let out = run_preset("basic-al", 1, w, Some(dir.path()), &overrides(40)).unwrap();
    for f in ["events.csv", "metrics.csv", "summary.txt", "results.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    for v in 0..out.result.counters.retrains as u32 {
        assert!(model_path(dir.path(), v).exists());
    }
    let s = read_summary(&dir.path().join("summary.txt")).unwrap();
    assert_eq!(s["preset"], "basic-al");
    assert_eq!(s["config.acquisition"], "exploit");
    assert_eq!(s["config.n_target"], "40");
    assert_eq!(s["counters.simulated"], "40");
    assert!(s.contains_key("ledger.prioritize.percent"));

    let r = replay(dir.path()).unwrap();
    assert!(r.identical);
    assert_eq!(
        fs::read(dir.path().join("metrics.csv")).unwrap(),
        fs::read(r.written).unwrap()
    );
}

#[test]
fn stable_fraction_column_is_consistent() {
    let w = common::small_world();
    let out = run_preset("basic-control", 2, w, None, &overrides(55)).unwrap();
    let ns: Vec<usize> = out.metrics.rows.iter().map(|r| r.n_simulated).collect();
    assert_eq!(ns, vec![10, 20, 30, 40, 50, 55]);
    for r in &out.metrics.rows {
        assert_eq!(
            r.stable_fraction,
            r.cum_stable as f64 / r.n_simulated as f64
        );
    }
    assert_eq!(
        out.metrics.last().unwrap().cum_stable,
        out.result.d_s_star.len()
    );
}

#[test]
fn replay_flags_tampered_metrics() {
    let w = common::small_world();
    let dir = tempfile::tempdir().unwrap();
    run_preset("basic-control", 3, w, Some(dir.path()), &overrides(20)).unwrap();
    let p = dir.path().join("metrics.csv");
    let text = fs::read_to_string(&p).unwrap().replace(",20,", ",21,");
    fs::write(&p, text + "\n").unwrap();
    assert!(!replay(dir.path()).unwrap().identical);
}

#[test]
fn checkpoint_policies() {
    let w = common::small_world();
    let dir = tempfile::tempdir().unwrap();
    let mut o = overrides(24);
    o.push(("checkpoints".into(), "none".into()));
    run_preset("basic-al", 4, w, Some(dir.path()), &o).unwrap();
    assert!(!dir.path().join("models").exists());

    let dir = tempfile::tempdir().unwrap();
    let mut o = overrides(24);
    o.push(("checkpoints".into(), "final".into()));
    let out = run_preset("basic-al", 4, w, Some(dir.path()), &o).unwrap();
    assert_eq!(out.config.checkpoints, CheckpointPolicy::Final);
    let files: Vec<_> = fs::read_dir(dir.path().join("models")).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.cfg");
    fs::write(
        &p,
        "# comment\nn_target = 77\nacquisition = lcb\nlambda = 0.5\nlatency = const:12\n",
    )
    .unwrap();
    let mut cfg = load_config_file(&p, RunConfig::default()).unwrap();
    assert_eq!(cfg.n_target, 77);
    assert_eq!(cfg.acquisition.lambda, 0.5);
    cfg.set("n_target", "5").unwrap();
    assert_eq!(cfg.n_target, 5);

    fs::write(&p, "no_such_key = 1\n").unwrap();
    assert!(load_config_file(&p, RunConfig::default()).is_err());
}

#[test]
fn compare_self_has_zero_deltas_and_truncates_shorter_runs() {
    let w = common::small_world();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_preset("basic-control", 5, w, Some(a.path()), &overrides(40)).unwrap();
    run_preset("basic-control", 6, w, Some(b.path()), &overrides(20)).unwrap();

    let same = compare_runs(&[a.path().to_path_buf(), a.path().to_path_buf()]).unwrap();
    assert!(same.warnings.is_empty());
    for line in same.table_csv().lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[8], "0");
        assert!(f[9].is_empty() || f[9] == "0");
    }

    let mixed = compare_runs(&[a.path().to_path_buf(), b.path().to_path_buf()]).unwrap();
    assert_eq!(mixed.aligned, vec![10, 20]);
    assert_eq!(mixed.warnings.len(), 1);
    assert!(mixed.to_text().contains("warning"));
    assert_eq!(mixed.aligned_csv().lines().count(), 3);

    assert!(compare_runs(&[a.path().to_path_buf()]).is_err());
    assert!(compare_runs(&[a.path().to_path_buf(), PathBuf::from("/nonexistent")]).is_err());
}

#[test]
fn group_ratio_against_first_preset() {
    let w = common::small_world();
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut paths = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        let name = if i < 2 {
            "basic-control"
        } else {
            "control-large-frac"
        };
        run_preset(name, i as u64, w, Some(d.path()), &overrides(30)).unwrap();
        paths.push(d.path().to_path_buf());
    }
    let c = compare_runs(&paths).unwrap();
    assert_eq!(c.groups.len(), 2);
    let expect = (c.runs[2].cum_stable + c.runs[3].cum_stable) as f64
        / (c.runs[0].cum_stable + c.runs[1].cum_stable) as f64;
    let got = c.ratios()[0].1;
    assert!((got - expect).abs() < 1e-12);
}

#[test]
fn reorder_acquires_whole_pool() {
    let w = common::small_world();
    let params = ReorderParams {
        batch: 50,
        warm: 50,
        surrogate: SurrogateParams {
            n_trees: 8,
            ..SurrogateParams::default()
        },
        ..ReorderParams::default()
    };
    let pool: &Dataset = &w.pool;
    let stable = pool.stable_subset(&Thresholds::default()).unwrap().len();
    for name in ["random", "exploit", "explore", "lcb:0.1"] {
        let m: MetricsSeries =
            reorder_run(pool, Some(&w.holdout), &strategy(name).unwrap(), &params, 1).unwrap();
        let ns: Vec<usize> = m.rows.iter().map(|r| r.n_simulated).collect();
        assert_eq!(
            ns,
            (1..=pool.len() / 50).map(|i| 50 * i).collect::<Vec<_>>(),
            "{name}"
        );
        assert_eq!(m.last().unwrap().cum_stable, stable);
        assert!(m.rows.iter().all(|r| r.holdout_rmse.is_some()));
        let again =
            reorder_run(pool, Some(&w.holdout), &strategy(name).unwrap(), &params, 1).unwrap();
        assert_eq!(m, again);
    }
}

#[test]
fn exploit_reorder_front_loads_stable_records() {
    let w = common::small_world();
    let params = ReorderParams {
        batch: 50,
        warm: 50,
        surrogate: SurrogateParams {
            n_trees: 20,
            ..SurrogateParams::default()
        },
        ..ReorderParams::default()
    };
    let at = |name: &str| {
        let m = reorder_run(&w.pool, None, &strategy(name).unwrap(), &params, 2).unwrap();
        m.rows[2].cum_stable
    };
    assert!(at("exploit") > at("random"));
}

#[test]
fn reorder_rejects_bad_sizes() {
    let w = common::small_world();
    let s = strategy("random").unwrap();
    let bad = ReorderParams {
        batch: 0,
        ..ReorderParams::default()
    };
    assert!(reorder_run(&w.pool, None, &s, &bad, 0).is_err());
    let big = ReorderParams {
        warm: w.pool.len() + 1,
        ..ReorderParams::default()
    };
    assert!(reorder_run(&w.pool, None, &s, &big, 0).is_err());
    assert!(strategy("lcb:x").is_err());
    assert!(run_config(
        "x",
        &RunConfig {
            n_target: 0,
            ..RunConfig::default()
        },
        w,
        None
    )
    .is_err());
}
