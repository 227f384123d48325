use std::fmt;
use std::str::FromStr;

use crate::acquisition::{AcquisitionSpec, Mode};
use crate::dataset::Thresholds;
use crate::domain::LatencyModel;
use crate::error::{Error, Result};
use crate::surrogate::SurrogateParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    DeterministicEventSim,
    Parallel,
}

impl ExecMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecMode::DeterministicEventSim => "des",
            ExecMode::Parallel => "parallel",
        }
    }
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExecMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "des" | "deterministic" => Ok(ExecMode::DeterministicEventSim),
            "parallel" => Ok(ExecMode::Parallel),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (expected des or parallel)"
            ))),
        }
    }
}

/// Simulated seconds charged per stage in event-sim mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub generate_per_candidate: f64,
    pub fine_tune: f64,
    pub validate_per_candidate: f64,
    pub retrain_base: f64,
    pub retrain_per_row: f64,
    pub predict_per_candidate: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            generate_per_candidate: 0.5,
            fine_tune: 120.0,
            validate_per_candidate: 0.25,
            retrain_base: 4.0,
            retrain_per_row: 0.003,
            predict_per_candidate: 0.005,
        }
    }
}

impl CostModel {
    pub fn retrain(&self, rows: usize) -> f64 {
        self.retrain_base + self.retrain_per_row * rows as f64
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.generate_per_candidate,
            self.fine_tune,
            self.validate_per_candidate,
            self.retrain_base,
            self.retrain_per_row,
            self.predict_per_candidate,
        ];
        if all.iter().all(|c| c.is_finite() && *c >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "stage costs must be finite and >= 0: {self:?}"
            )))
        }
    }
}

/// Which surrogate checkpoints a run writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointPolicy {
    All,
    Final,
    None,
}

impl FromStr for CheckpointPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CheckpointPolicy::All),
            "final" => Ok(CheckpointPolicy::Final),
            "none" => Ok(CheckpointPolicy::None),
            _ => Err(Error::Config(format!("unknown checkpoint policy `{s}`"))),
        }
    }
}

impl CheckpointPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckpointPolicy::All => "all",
            CheckpointPolicy::Final => "final",
            CheckpointPolicy::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_target: usize,
    pub seed: u64,
    pub acquisition: AcquisitionSpec,
    pub ft_fraction: f64,
    /// New results between generator fine-tunes.
    pub ft_trigger: usize,
    pub ft_eta: f64,
    pub gen_batch: usize,
    /// New results between surrogate refits; `None` disables retraining.
    pub retrain_batch: Option<usize>,
    pub workers: usize,
    pub mode: ExecMode,
    pub latency: LatencyModel,
    pub thresholds: Thresholds,
    pub costs: CostModel,
    pub surrogate: SurrogateParams,
    pub checkpoints: CheckpointPolicy,
    /// Real seconds slept per simulated oracle second in parallel mode.
    pub latency_scale: f64,
    #[doc(hidden)]
    pub fault_after: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_target: 1000,
            seed: 0,
            acquisition: AcquisitionSpec::exploit(),
            ft_fraction: 0.5,
            ft_trigger: 32,
            ft_eta: 0.5,
            gen_batch: 64,
            retrain_batch: Some(1),
            workers: 48,
            mode: ExecMode::DeterministicEventSim,
            latency: LatencyModel::default(),
            thresholds: Thresholds::default(),
            costs: CostModel::default(),
            surrogate: SurrogateParams::default(),
            checkpoints: CheckpointPolicy::All,
            latency_scale: 1e-5,
            fault_after: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

impl RunConfig {
    pub fn al_enabled(&self) -> bool {
        self.retrain_batch.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_target < 1 {
            return Err(Error::Config("n_target must be >= 1".into()));
        }
        if !(self.ft_fraction > 0.0 && self.ft_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "ft_fraction must be in (0, 1], got {}",
                self.ft_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.ft_eta) {
            return Err(Error::Config(format!(
                "ft_eta must be in [0, 1], got {}",
                self.ft_eta
            )));
        }
        for (name, v) in [
            ("ft_trigger", self.ft_trigger),
            ("gen_batch", self.gen_batch),
            ("workers", self.workers),
        ] {
            if v < 1 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.retrain_batch == Some(0) {
            return Err(Error::Config(
                "retrain_batch must be >= 1 (use `off` to disable)".into(),
            ));
        }
        if !(self.latency_scale.is_finite() && self.latency_scale >= 0.0) {
            return Err(Error::Config("latency_scale must be >= 0".into()));
        }
        self.acquisition.validate()?;
        self.thresholds.validate()?;
        self.latency.validate()?;
        self.costs.validate()?;
        self.surrogate.validate()
    }

    /// Flat key/value view, in the same keys [`RunConfig::set`] accepts.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let a = &self.acquisition;
        let c = &self.costs;
        let s = &self.surrogate;
        vec![
            ("n_target", self.n_target.to_string()),
            ("seed", self.seed.to_string()),
            ("acquisition", a.mode.as_str().to_string()),
            ("lambda", a.lambda.to_string()),
            ("w_is", a.w_is.to_string()),
            ("w_sa", a.w_sa.to_string()),
            ("w_t", a.w_t.to_string()),
            ("ft_fraction", self.ft_fraction.to_string()),
            ("ft_trigger", self.ft_trigger.to_string()),
            ("ft_eta", self.ft_eta.to_string()),
            ("gen_batch", self.gen_batch.to_string()),
            (
                "retrain_batch",
                self.retrain_batch
                    .map_or_else(|| "off".to_string(), |b| b.to_string()),
            ),
            ("workers", self.workers.to_string()),
            ("mode", self.mode.to_string()),
            ("latency", format_latency(&self.latency)),
            ("t_is", self.thresholds.t_is.to_string()),
            ("t_sa", self.thresholds.t_sa.to_string()),
            ("t_t", self.thresholds.t_t.to_string()),
            ("cost.generate", c.generate_per_candidate.to_string()),
            ("cost.fine_tune", c.fine_tune.to_string()),
            ("cost.validate", c.validate_per_candidate.to_string()),
            ("cost.retrain_base", c.retrain_base.to_string()),
            ("cost.retrain_per_row", c.retrain_per_row.to_string()),
            ("cost.predict", c.predict_per_candidate.to_string()),
            ("surrogate.n_trees", s.n_trees.to_string()),
            ("surrogate.max_depth", s.max_depth.to_string()),
            ("surrogate.min_leaf", s.min_leaf.to_string()),
            ("surrogate.max_bins", s.max_bins.to_string()),
            (
                "surrogate.features_per_split",
                s.features_per_split
                    .map_or_else(|| "auto".to_string(), |m| m.to_string()),
            ),
            ("checkpoints", self.checkpoints.as_str().to_string()),
            ("latency_scale", self.latency_scale.to_string()),
        ]
    }

    /// Set one field from its key/value form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "n_target" => self.n_target = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "acquisition" => {
                self.acquisition.mode = value.parse::<Mode>().map_err(Error::Config)?
            }
            "lambda" => self.acquisition.lambda = parse_num(key, value)?,
            "w_is" => self.acquisition.w_is = parse_num(key, value)?,
            "w_sa" => self.acquisition.w_sa = parse_num(key, value)?,
            "w_t" => self.acquisition.w_t = parse_num(key, value)?,
            "ft_fraction" => self.ft_fraction = parse_num(key, value)?,
            "ft_trigger" => self.ft_trigger = parse_num(key, value)?,
            "ft_eta" => self.ft_eta = parse_num(key, value)?,
            "gen_batch" => self.gen_batch = parse_num(key, value)?,
            "retrain_batch" => {
                self.retrain_batch = match value {
                    "off" | "none" | "inf" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "workers" => self.workers = parse_num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "latency" => self.latency = parse_latency(value)?,
            "t_is" => self.thresholds.t_is = parse_num(key, value)?,
            "t_sa" => self.thresholds.t_sa = parse_num(key, value)?,
            "t_t" => self.thresholds.t_t = parse_num(key, value)?,
            "cost.generate" => self.costs.generate_per_candidate = parse_num(key, value)?,
            "cost.fine_tune" => self.costs.fine_tune = parse_num(key, value)?,
            "cost.validate" => self.costs.validate_per_candidate = parse_num(key, value)?,
            "cost.retrain_base" => self.costs.retrain_base = parse_num(key, value)?,
            "cost.retrain_per_row" => self.costs.retrain_per_row = parse_num(key, value)?,
            "cost.predict" => self.costs.predict_per_candidate = parse_num(key, value)?,
            "surrogate.n_trees" => self.surrogate.n_trees = parse_num(key, value)?,
            "surrogate.max_depth" => self.surrogate.max_depth = parse_num(key, value)?,
            "surrogate.min_leaf" => self.surrogate.min_leaf = parse_num(key, value)?,
            "surrogate.max_bins" => self.surrogate.max_bins = parse_num(key, value)?,
            "surrogate.features_per_split" => {
                self.surrogate.features_per_split = match value {
                    "auto" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "checkpoints" => self.checkpoints = value.parse()?,
            "latency_scale" => self.latency_scale = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }
}

/// `const:SECONDS` or `lognormal:MEDIAN:SIGMA`.
pub fn parse_latency(s: &str) -> Result<LatencyModel> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["const", v] => Ok(LatencyModel::Constant(parse_num("latency", v)?)),
        ["lognormal", m, sd] => Ok(LatencyModel::LogNormal {
            median: parse_num("latency", m)?,
            sigma: parse_num("latency", sd)?,
        }),
        _ => Err(Error::Config(format!(
            "latency `{s}`: expected const:SECONDS or lognormal:MEDIAN:SIGMA"
        ))),
    }
}

pub fn format_latency(l: &LatencyModel) -> String {
    match *l {
        LatencyModel::Constant(v) => format!("const:{v}"),
        LatencyModel::LogNormal { median, sigma } => format!("lognormal:{median}:{sigma}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip_through_set() {
        let mut cfg = RunConfig {
            retrain_batch: None,
            acquisition: AcquisitionSpec::multi(0.5, 0.25, 0.25),
            latency: LatencyModel::Constant(12.5),
            ..RunConfig::default()
        };
        cfg.surrogate.features_per_split = Some(7);
        let mut back = RunConfig::default();
        for (k, v) in cfg.to_pairs() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            RunConfig {
                n_target: 0,
                ..RunConfig::default()
            },
            RunConfig {
                ft_fraction: 0.0,
                ..RunConfig::default()
            },
            RunConfig {
                ft_fraction: 1.5,
                ..RunConfig::default()
            },
            RunConfig {
                retrain_batch: Some(0),
                ..RunConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig::default().set("bogus", "1").is_err());
    }
}
