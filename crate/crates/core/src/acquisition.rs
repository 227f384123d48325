//! Priority functions and queue ordering.
//!
//! Every mode maps a queued candidate to a real number where lower means
//! "simulate sooner". Strain, synthesizability and novelty are all
//! lower-is-better, so exploitation needs no sign flip and the confidence
//! bound takes the form `mean - lambda * spread`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng;
use crate::surrogate::Prediction;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exploit,
    Explore,
    Lcb,
    MultiObjective,
    Random,
    Fifo,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exploit => "exploit",
            Mode::Explore => "explore",
            Mode::Lcb => "lcb",
            Mode::MultiObjective => "multi",
            Mode::Random => "random",
            Mode::Fifo => "fifo",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exploit" => Ok(Mode::Exploit),
            "explore" => Ok(Mode::Explore),
            "lcb" | "ucb" => Ok(Mode::Lcb),
            "multi" | "multi-objective" => Ok(Mode::MultiObjective),
            "random" => Ok(Mode::Random),
            "fifo" => Ok(Mode::Fifo),
            other => Err(format!("unknown acquisition mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionSpec {
    pub mode: Mode,
    pub lambda: f64,
    pub w_is: f64,
    pub w_sa: f64,
    pub w_t: f64,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        Self::exploit()
    }
}

impl AcquisitionSpec {
    fn with_mode(mode: Mode) -> Self {
        AcquisitionSpec {
            mode,
            lambda: 0.0,
            w_is: 1.0,
            w_sa: 0.0,
            w_t: 0.0,
        }
    }

    pub fn exploit() -> Self {
        Self::with_mode(Mode::Exploit)
    }

    pub fn explore() -> Self {
        Self::with_mode(Mode::Explore)
    }

    pub fn lcb(lambda: f64) -> Self {
        AcquisitionSpec {
            lambda,
            ..Self::with_mode(Mode::Lcb)
        }
    }

    pub fn random() -> Self {
        Self::with_mode(Mode::Random)
    }

    pub fn fifo() -> Self {
        Self::with_mode(Mode::Fifo)
    }

    pub fn multi(w_is: f64, w_sa: f64, w_t: f64) -> Self {
        AcquisitionSpec {
            w_is,
            w_sa,
            w_t,
            ..Self::with_mode(Mode::MultiObjective)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w_is", self.w_is), ("w_sa", self.w_sa), ("w_t", self.w_t)] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!(
                    "acquisition weight {name} must be >= 0, got {w}"
                )));
            }
        }
        if !self.lambda.is_finite() {
            return Err(Error::Config("acquisition lambda must be finite".into()));
        }
        if self.mode == Mode::MultiObjective
            && (self.w_is + self.w_sa + self.w_t - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "multi-objective weights must sum to 1, got {}",
                self.w_is + self.w_sa + self.w_t
            )));
        }
        Ok(())
    }

    /// Whether priorities depend on the surrogate.
    pub fn uses_surrogate(&self) -> bool {
        match self.mode {
            Mode::Exploit | Mode::Explore | Mode::Lcb => true,
            Mode::MultiObjective => self.w_is > 0.0,
            Mode::Random | Mode::Fifo => false,
        }
    }
}

/// Inputs for one queued candidate. For multi-objective mode the three
/// objective fields must already be normalized over the queue snapshot.
#[derive(Clone, Copy, Debug)]
pub struct QueueEntry {
    pub id: u64,
    pub prediction: Option<Prediction>,
    pub s_sa: f64,
    pub s_t: f64,
}

/// Context shared by one ranking pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct RankPass {
    pub seed: u64,
    pub pass: u64,
}

pub fn priority(spec: &AcquisitionSpec, entry: &QueueEntry, ctx: RankPass) -> Result<f64> {
    let need = |name| entry.prediction.ok_or(Error::MissingPrediction(name));
    Ok(match spec.mode {
        Mode::Exploit => need("exploit")?.mean,
        Mode::Explore => -need("explore")?.spread,
        Mode::Lcb => {
            let p = need("lcb")?;
            p.mean - spec.lambda * p.spread
        }
        Mode::MultiObjective => {
            let is = if spec.w_is > 0.0 {
                need("multi")?.mean
            } else {
                0.0
            };
            spec.w_is * is + spec.w_sa * entry.s_sa + spec.w_t * entry.s_t
        }
        Mode::Random => rng::keyed_uniform(&[ctx.seed, entry.id, ctx.pass]),
        Mode::Fifo => entry.id as f64,
    })
}

/// Min-max scale to [0, 1]; a constant input maps to all zeros.
pub fn normalize_objective(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

/// Priorities for a whole queue snapshot. Multi-objective inputs are
/// normalized over the snapshot before weighting.
pub fn priorities(
    spec: &AcquisitionSpec,
    entries: &[QueueEntry],
    ctx: RankPass,
) -> Result<Vec<f64>> {
    if spec.mode != Mode::MultiObjective || entries.is_empty() {
        return entries.iter().map(|e| priority(spec, e, ctx)).collect();
    }
    let sa = normalize_objective(&entries.iter().map(|e| e.s_sa).collect::<Vec<_>>());
    let t = normalize_objective(&entries.iter().map(|e| e.s_t).collect::<Vec<_>>());
    let is = if spec.w_is > 0.0 {
        let means = entries
            .iter()
            .map(|e| {
                e.prediction
                    .map(|p| p.mean)
                    .ok_or(Error::MissingPrediction("multi"))
            })
            .collect::<Result<Vec<_>>>()?;
        normalize_objective(&means)
    } else {
        vec![0.0; entries.len()]
    };
    Ok((0..entries.len())
        .map(|i| spec.w_is * is[i] + spec.w_sa * sa[i] + spec.w_t * t[i])
        .collect())
}

/// Ascending order of `priorities`, ties by smaller id. Returns indices into
/// the input.
pub fn rank(ids: &[u64], priorities: &[f64]) -> Result<Vec<usize>> {
    if ids.len() != priorities.len() {
        return Err(Error::LengthMismatch {
            expected: ids.len(),
            got: priorities.len(),
        });
    }
    if let Some(i) = priorities.iter().position(|p| p.is_nan()) {
        return Err(Error::NanPriority { id: ids[i] });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        priorities[a]
            .total_cmp(&priorities[b])
            .then(ids[a].cmp(&ids[b]))
    });
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: u64, mean: f64, spread: f64) -> QueueEntry {
        QueueEntry {
            id,
            prediction: Some(Prediction { mean, spread }),
            s_sa: 0.0,
            s_t: 0.0,
        }
    }

    #[test]
    fn lcb_formula() {
        let p = priority(
            &AcquisitionSpec::lcb(0.1),
            &entry(0, 0.3, 0.2),
            RankPass::default(),
        )
        .unwrap();
        assert!((p - 0.28).abs() < 1e-12);
    }

    #[test]
    fn lcb_zero_lambda_is_exploit() {
        for (m, s) in [(0.1, 0.5), (2.0, 0.0), (-1.0, 3.0)] {
            let e = entry(1, m, s);
            assert_eq!(
                priority(&AcquisitionSpec::lcb(0.0), &e, RankPass::default()).unwrap(),
                priority(&AcquisitionSpec::exploit(), &e, RankPass::default()).unwrap()
            );
        }
    }

    #[test]
    fn explore_prefers_uncertain() {
        let ctx = RankPass::default();
        let a = priority(&AcquisitionSpec::explore(), &entry(0, 0.0, 0.1), ctx).unwrap();
        let b = priority(&AcquisitionSpec::explore(), &entry(1, 0.0, 0.9), ctx).unwrap();
        assert!(b < a);
    }

    #[test]
    fn missing_prediction_is_an_error() {
        let e = QueueEntry {
            id: 0,
            prediction: None,
            s_sa: 0.1,
            s_t: 0.1,
        };
        assert!(matches!(
            priority(&AcquisitionSpec::exploit(), &e, RankPass::default()),
            Err(Error::MissingPrediction(_))
        ));
        assert!(priority(&AcquisitionSpec::fifo(), &e, RankPass::default()).is_ok());
        assert!(priority(
            &AcquisitionSpec::multi(0.0, 1.0, 0.0),
            &e,
            RankPass::default()
        )
        .is_ok());
    }

    #[test]
    fn random_is_keyed_and_redrawn_per_pass() {
        let e = entry(5, 0.0, 0.0);
        let spec = AcquisitionSpec::random();
        let a = priority(&spec, &e, RankPass { seed: 1, pass: 0 }).unwrap();
        assert_eq!(
            a,
            priority(&spec, &e, RankPass { seed: 1, pass: 0 }).unwrap()
        );
        assert_ne!(
            a,
            priority(&spec, &e, RankPass { seed: 1, pass: 1 }).unwrap()
        );
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_objective(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_objective(&[5.0, 5.0, 5.0]), vec![0.0; 3]);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[0, 1, 2], &[0.5, 0.1, 0.3]).unwrap(), vec![1, 2, 0]);
        assert_eq!(rank(&[9, 4, 7], &[1.0, 1.0, 1.0]).unwrap(), vec![1, 2, 0]);
        assert!(matches!(
            rank(&[3, 4], &[0.1, f64::NAN]),
            Err(Error::NanPriority { id: 4 })
        ));
    }

    #[test]
    fn multi_weights_validated() {
        assert!(AcquisitionSpec::multi(0.5, 0.5, 0.0).validate().is_ok());
        assert!(AcquisitionSpec::multi(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
            .validate()
            .is_ok());
        assert!(AcquisitionSpec::multi(0.5, 0.6, 0.0).validate().is_err());
    }

    #[test]
    fn single_objective_multi_matches_exploit_order() {
        let entries: Vec<QueueEntry> = (0..20)
            .map(|i| entry(i, ((i * 7919) % 13) as f64 * 0.1, (i % 3) as f64))
            .collect();
        let ids: Vec<u64> = entries.iter().map(|e| e.id).collect();
        let ctx = RankPass::default();
        let a = priorities(&AcquisitionSpec::multi(1.0, 0.0, 0.0), &entries, ctx).unwrap();
        let b = priorities(&AcquisitionSpec::exploit(), &entries, ctx).unwrap();
        assert_eq!(rank(&ids, &a).unwrap(), rank(&ids, &b).unwrap());
    }
}
