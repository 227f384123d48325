use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::engine::{EventKind, EventLog};
use crate::error::{Error, Result};

/// Simulated results between metric rows.
pub const CHECKPOINT_EVERY: usize = 10;
/// Trailing window for the S_SA / S_T means.
pub const WINDOW: usize = 100;

pub const METRICS_HEADER: &str = "n_simulated,cum_stable,holdout_rmse,win_sa,win_t,stable_fraction";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub n_simulated: usize,
    pub cum_stable: usize,
    pub holdout_rmse: Option<f64>,
    pub win_sa: f64,
    pub win_t: f64,
    pub stable_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsSeries {
    pub rows: Vec<MetricsRow>,
}

/// Trailing-window accumulator shared by the workflow and reorder metrics.
#[derive(Default)]
pub(crate) struct Tally {
    n: usize,
    stable: usize,
    window: VecDeque<(f64, f64)>,
}

impl Tally {
    pub fn add(&mut self, s_sa: f64, s_t: f64, stable: bool) {
        self.n += 1;
        self.stable += usize::from(stable);
        if self.window.len() == WINDOW {
            self.window.pop_front();
        }
        self.window.push_back((s_sa, s_t));
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, holdout_rmse: Option<f64>) -> MetricsRow {
        let w = self.window.len().max(1) as f64;
        MetricsRow {
            n_simulated: self.n,
            cum_stable: self.stable,
            holdout_rmse,
            win_sa: self.window.iter().map(|p| p.0).sum::<f64>() / w,
            win_t: self.window.iter().map(|p| p.1).sum::<f64>() / w,
            stable_fraction: if self.n == 0 {
                0.0
            } else {
                self.stable as f64 / self.n as f64
            },
        }
    }
}

/// Rebuild the metrics series from an event log alone: one row every
/// `CHECKPOINT_EVERY` results plus a final row at STOP. The RMSE column is
/// the most recent RETRAIN's holdout RMSE.
pub fn metrics_from_events(log: &EventLog) -> Result<MetricsSeries> {
    let mut tally = Tally::default();
    let mut rmse = None;
    let mut rows = Vec::new();
    for e in log.iter() {
        match e.kind {
            EventKind::Retrain => rmse = e.get_f64("rmse"),
            EventKind::SimDone => {
                let field = |k: &str| {
                    e.get_f64(k).ok_or_else(|| {
                        Error::Config(format!("SIM_DONE without `{k}` in `{}`", e.detail))
                    })
                };
                tally.add(field("s_sa")?, field("s_t")?, e.get("stable") == Some("1"));
                if tally.n() % CHECKPOINT_EVERY == 0 {
                    rows.push(tally.row(rmse));
                }
            }
            EventKind::Stop if tally.n() % CHECKPOINT_EVERY != 0 => rows.push(tally.row(rmse)),
            _ => {}
        }
    }
    Ok(MetricsSeries { rows })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl MetricsSeries {
    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// Row with the largest `n_simulated` not above `n`.
    pub fn at(&self, n: usize) -> Option<&MetricsRow> {
        self.rows.iter().rev().find(|r| r.n_simulated <= n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n_simulated,
                r.cum_stable,
                opt(r.holdout_rmse),
                r.win_sa,
                r.win_t,
                r.stable_fraction
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<MetricsSeries> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err(Error::parse(path, 1, "unexpected metrics header"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = |m: String| Error::parse(path, i + 2, m);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields".into()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
            rows.push(MetricsRow {
                n_simulated: f[0].parse().map_err(|e| bad(format!("{e}")))?,
                cum_stable: f[1].parse().map_err(|e| bad(format!("{e}")))?,
                holdout_rmse: if f[2].is_empty() {
                    None
                } else {
                    Some(num(f[2])?)
                },
                win_sa: num(f[3])?,
                win_t: num(f[4])?,
                stable_fraction: num(f[5])?,
            });
        }
        Ok(MetricsSeries { rows })
    }
}

/// Seed-averaged curve; counts become real-valued.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanRow {
    pub n_simulated: usize,
    pub cum_stable: f64,
    pub holdout_rmse: Option<f64>,
    pub win_sa: f64,
    pub win_t: f64,
    pub stable_fraction: f64,
}

pub const MEAN_HEADER: &str =
    "n_simulated,mean_cum_stable,mean_holdout_rmse,mean_win_sa,mean_win_t,mean_stable_fraction";

/// Pointwise mean of series sharing the same checkpoints. The RMSE column is
/// present only where every input has it.
pub fn mean_series(series: &[MetricsSeries]) -> Result<Vec<MeanRow>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let len = first.rows.len();
    if series.iter().any(|s| {
        s.rows.len() != len
            || s.rows
                .iter()
                .zip(&first.rows)
                .any(|(a, b)| a.n_simulated != b.n_simulated)
    }) {
        return Err(Error::Config(
            "cannot average series with different checkpoints".into(),
        ));
    }
    let k = series.len() as f64;
    Ok((0..len)
        .map(|i| {
            let col =
                |f: fn(&MetricsRow) -> f64| series.iter().map(|s| f(&s.rows[i])).sum::<f64>() / k;
            let rmse: Option<Vec<f64>> = series.iter().map(|s| s.rows[i].holdout_rmse).collect();
            MeanRow {
                n_simulated: first.rows[i].n_simulated,
                cum_stable: col(|r| r.cum_stable as f64),
                holdout_rmse: rmse.map(|v| v.iter().sum::<f64>() / k),
                win_sa: col(|r| r.win_sa),
                win_t: col(|r| r.win_t),
                stable_fraction: col(|r| r.stable_fraction),
            }
        })
        .collect())
}

pub fn mean_csv(rows: &[MeanRow]) -> String {
    let mut out = String::from(MEAN_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_simulated,
            r.cum_stable,
            opt(r.holdout_rmse),
            r.win_sa,
            r.win_t,
            r.stable_fraction
        );
    }
    out
}

/// Unicode sparkline of a sequence, for text reports.
pub fn sparkline(values: &[f64]) -> String {
    const BARS: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| {
            if hi > lo {
                BARS[(((v - lo) / (hi - lo)) * 7.0).round() as usize]
            } else {
                BARS[0]
            }
        })
        .collect()
}
