use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::metrics::{sparkline, MetricsSeries};
use crate::harness::run::{read_summary, METRICS_FILE, SUMMARY_FILE};

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub preset: String,
    pub seed: String,
    pub n_simulated: usize,
    pub cum_stable: usize,
    pub stable_fraction: f64,
    pub holdout_rmse: Option<f64>,
    pub prioritize_share: Option<f64>,
    pub series: MetricsSeries,
}

#[derive(Clone, Debug)]
pub struct GroupStat {
    pub preset: String,
    pub runs: usize,
    pub mean_cum_stable: f64,
    pub mean_holdout_rmse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
    /// Checkpoints present in every run.
    pub aligned: Vec<usize>,
    pub groups: Vec<GroupStat>,
    pub warnings: Vec<String>,
}

pub fn load_run(dir: &Path) -> Result<RunSummary> {
    let summary = read_summary(&dir.join(SUMMARY_FILE))?;
    let series = MetricsSeries::read_csv(&dir.join(METRICS_FILE))?;
    let last = series
        .last()
        .ok_or_else(|| Error::parse(dir.join(METRICS_FILE), 2, "no metric rows"))?
        .clone();
    let share = summary
        .get("ledger.prioritize.percent")
        .and_then(|v| v.parse::<f64>().ok())
        .map(|p| p / 100.0);
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        preset: summary.get("preset").cloned().unwrap_or_default(),
        seed: summary.get("config.seed").cloned().unwrap_or_default(),
        n_simulated: last.n_simulated,
        cum_stable: last.cum_stable,
        stable_fraction: last.stable_fraction,
        holdout_rmse: last.holdout_rmse,
        prioritize_share: share,
        series,
    })
}

/// Load and align completed runs. Checkpoints missing from any run are
/// dropped from the aligned series with a warning.
pub fn compare_runs(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two run directories".into(),
        ));
    }
    let runs = dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>>>()?;
    let mut aligned: Vec<usize> = runs[0].series.rows.iter().map(|r| r.n_simulated).collect();
    for r in &runs[1..] {
        aligned.retain(|n| r.series.rows.iter().any(|x| x.n_simulated == *n));
    }
    let mut warnings = Vec::new();
    for r in &runs {
        if r.series.rows.len() != aligned.len() {
            warnings.push(format!(
                "{}: {} checkpoints truncated to {} shared",
                r.dir.display(),
                r.series.rows.len(),
                aligned.len()
            ));
        }
    }
    let mut groups: Vec<GroupStat> = Vec::new();
    for r in &runs {
        if groups.iter().any(|g| g.preset == r.preset) {
            continue;
        }
        let members: Vec<&RunSummary> = runs.iter().filter(|x| x.preset == r.preset).collect();
        let k = members.len() as f64;
        let rmse: Option<Vec<f64>> = members.iter().map(|m| m.holdout_rmse).collect();
        groups.push(GroupStat {
            preset: r.preset.clone(),
            runs: members.len(),
            mean_cum_stable: members.iter().map(|m| m.cum_stable as f64).sum::<f64>() / k,
            mean_holdout_rmse: rmse.map(|v| v.iter().sum::<f64>() / k),
        });
    }
    Ok(Comparison {
        runs,
        aligned,
        groups,
        warnings,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl Comparison {
    /// Final cum_stable of each group relative to the first group.
    pub fn ratios(&self) -> Vec<(String, f64)> {
        let Some(base) = self.groups.first() else {
            return Vec::new();
        };
        self.groups[1..]
            .iter()
            .map(|g| (g.preset.clone(), g.mean_cum_stable / base.mean_cum_stable))
            .collect()
    }

    /// Per-run table; deltas are against the first run.
    pub fn table_csv(&self) -> String {
        let base = &self.runs[0];
        let mut s = String::from(
            "dir,preset,seed,n_simulated,cum_stable,stable_fraction,holdout_rmse,prioritize_share,delta_cum_stable,delta_holdout_rmse\n",
        );
        for r in &self.runs {
            let d_rmse = match (r.holdout_rmse, base.holdout_rmse) {
                (Some(a), Some(b)) => (a - b).to_string(),
                _ => String::new(),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.dir.display(),
                r.preset,
                r.seed,
                r.n_simulated,
                r.cum_stable,
                r.stable_fraction,
                opt(r.holdout_rmse),
                opt(r.prioritize_share),
                r.cum_stable as i64 - base.cum_stable as i64,
                d_rmse
            );
        }
        s
    }

    /// cum_stable per aligned checkpoint, one column per run.
    pub fn aligned_csv(&self) -> String {
        let mut s = String::from("n_simulated");
        for i in 0..self.runs.len() {
            let _ = write!(s, ",run{i}");
        }
        s.push('\n');
        for &n in &self.aligned {
            let _ = write!(s, "{n}");
            for r in &self.runs {
                let v = r
                    .series
                    .rows
                    .iter()
                    .find(|x| x.n_simulated == n)
                    .map(|x| x.cum_stable);
                let _ = write!(s, ",{}", v.unwrap_or_default());
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let _ = writeln!(
            s,
            "{:<4} {:<20} {:>6} {:>8} {:>8} {:>10} {:>10}  curve",
            "run", "preset", "seed", "stable", "R_T", "rmse", "prio%"
        );
        for (i, r) in self.runs.iter().enumerate() {
            let curve: Vec<f64> = r
                .series
                .rows
                .iter()
                .filter(|x| self.aligned.contains(&x.n_simulated))
                .map(|x| x.cum_stable as f64)
                .collect();
            let step = (curve.len() / 24).max(1);
            let thin: Vec<f64> = curve.iter().step_by(step).copied().collect();
            let _ = writeln!(
                s,
                "{:<4} {:<20} {:>6} {:>8} {:>8.4} {:>10} {:>10}  {}",
                i,
                r.preset,
                r.seed,
                r.cum_stable,
                r.stable_fraction,
                r.holdout_rmse
                    .map_or_else(|| "-".into(), |v| format!("{v:.4}")),
                r.prioritize_share
                    .map_or_else(|| "-".into(), |v| format!("{:.3}", 100.0 * v)),
                sparkline(&thin)
            );
        }
        if self.groups.len() > 1 || self.groups.iter().any(|g| g.runs > 1) {
            let _ = writeln!(s, "\nby preset:");
            for g in &self.groups {
                let _ = writeln!(
                    s,
                    "  {:<20} runs={} mean_stable={:.1} mean_rmse={}",
                    g.preset,
                    g.runs,
                    g.mean_cum_stable,
                    g.mean_holdout_rmse
                        .map_or_else(|| "-".into(), |v| format!("{v:.4}"))
                );
            }
            for (p, r) in self.ratios() {
                let _ = writeln!(s, "  ratio {p} / {} = {r:.3}", self.groups[0].preset);
            }
        }
        s
    }
}
