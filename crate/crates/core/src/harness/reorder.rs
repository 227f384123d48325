use rand::seq::SliceRandom;

use crate::acquisition::{priorities, rank, AcquisitionSpec, QueueEntry, RankPass};
use crate::dataset::{Dataset, Thresholds};
use crate::error::{Error, Result};
use crate::harness::metrics::{MetricsSeries, Tally};
use crate::rng;
use crate::surrogate::{fit, holdout_rmse, training_data, SurrogateParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ReorderParams {
    pub batch: usize,
    pub warm: usize,
    pub surrogate: SurrogateParams,
    pub thresholds: Thresholds,
}

impl Default for ReorderParams {
    fn default() -> Self {
        ReorderParams {
            batch: 200,
            warm: 200,
            surrogate: SurrogateParams::default(),
            thresholds: Thresholds::default(),
        }
    }
}

/// Offline pool-based active learning: start from `warm` random records,
/// then repeatedly refit on everything acquired, rank the remainder and
/// acquire the best `batch`. One metrics row per refit, with
/// `n_simulated` counting acquired records.
pub fn reorder_run(
    pool: &Dataset,
    holdout: Option<&Dataset>,
    strategy: &AcquisitionSpec,
    params: &ReorderParams,
    seed: u64,
) -> Result<MetricsSeries> {
    let n = pool.len();
    if params.batch < 1 || params.warm < 1 {
        return Err(Error::Config("batch and warm must be >= 1".into()));
    }
    if params.batch > n || params.warm > n {
        return Err(Error::Config(format!(
            "batch {} / warm {} larger than pool of {n}",
            params.batch, params.warm
        )));
    }
    strategy.validate()?;
    let recs = pool.records();
    let stable = recs
        .iter()
        .map(|r| params.thresholds.is_stable(r))
        .collect::<Result<Vec<bool>>>()?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::named(seed, "reorder-warm"));
    let mut acquired: Vec<usize> = order[..params.warm].to_vec();
    let mut remaining: Vec<usize> = order[params.warm..].to_vec();
    remaining.sort_unstable();

    let mut tally = Tally::default();
    for &i in &acquired {
        tally.add(recs[i].s_sa, recs[i].s_t, stable[i]);
    }
    let rank_seed = rng::derive(seed, rng::label("reorder-rank"));
    let mut rows = Vec::new();
    let mut taken = vec![false; n];
    for step in 0u64.. {
        let (x, y) = training_data(acquired.iter().map(|&i| &recs[i]))?;
        let model = fit(&x, &y, &params.surrogate, rng::derive(seed, step))?;
        let rmse = holdout.map(|h| holdout_rmse(&model, h)).transpose()?;
        rows.push(tally.row(rmse));
        if remaining.is_empty() {
            break;
        }

        let entries = remaining
            .iter()
            .map(|&i| {
                let r = &recs[i];
                let prediction = if strategy.uses_surrogate() {
                    Some(model.predict(&r.candidate.embedding)?)
                } else {
                    None
                };
                Ok(QueueEntry {
                    id: r.id(),
                    prediction,
                    s_sa: r.s_sa,
                    s_t: r.s_t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ctx = RankPass {
            seed: rank_seed,
            pass: step,
        };
        let pri = priorities(strategy, &entries, ctx)?;
        let ids: Vec<u64> = entries.iter().map(|e| e.id).collect();
        let ranked = rank(&ids, &pri)?;
        for &k in ranked.iter().take(params.batch) {
            let i = remaining[k];
            taken[i] = true;
            acquired.push(i);
            tally.add(recs[i].s_sa, recs[i].s_t, stable[i]);
        }
        remaining.retain(|&i| !taken[i]);
    }
    Ok(MetricsSeries { rows })
}

/// [`reorder_run`] for each seed.
pub fn reorder_experiment(
    pool: &Dataset,
    holdout: Option<&Dataset>,
    strategy: &AcquisitionSpec,
    params: &ReorderParams,
    seeds: &[u64],
) -> Result<Vec<MetricsSeries>> {
    seeds
        .iter()
        .map(|&s| reorder_run(pool, holdout, strategy, params, s))
        .collect()
}
