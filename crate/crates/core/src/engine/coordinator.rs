//! State owned by the single coordinator. Both execution modes drive the
//! same transitions; only the clock and the cost source differ.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use crate::acquisition::{priorities, rank, QueueEntry, RankPass};
use crate::dataset::{dedup_key, Candidate, Dataset, Origin, Score, ScoredRecord};
use crate::domain::{fine_tune, validity_check, FineTuneParams, Generator, IdAllocator, WorldSpec};
use crate::engine::config::{ExecMode, RunConfig};
use crate::engine::events::{Event, EventKind, EventLog};
use crate::engine::ledger::{Stage, TimingLedger};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::surrogate::{fit, holdout_rmse, training_data, Prediction, SurrogateEnsemble};

/// First id handed to generated candidates; world datasets use lower ids.
pub const GENERATED_ID_BASE: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub generated: usize,
    pub simulated: usize,
    pub stable: usize,
    pub duplicates: usize,
    pub invalid: usize,
    pub retrains: usize,
    pub fine_tunes: usize,
    pub rank_passes: usize,
    /// Simulations still running when the target was reached.
    pub dropped_in_flight: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub d_s: Dataset,
    pub d_s_star: Dataset,
    pub events: EventLog,
    pub ledger: TimingLedger,
    pub counters: Counters,
    pub final_model: Option<SurrogateEnsemble>,
    pub final_generator: Generator,
    /// Set when a worker failure ended the run early.
    pub aborted: Option<String>,
}

#[derive(Clone, Debug)]
pub(crate) struct Entry {
    pub rec: ScoredRecord,
    pub key: u64,
    pred: Option<(u32, Prediction)>,
    priority: f64,
}

impl Entry {
    pub fn id(&self) -> u64 {
        self.rec.id()
    }
}

pub(crate) struct Coordinator<'a> {
    pub cfg: &'a RunConfig,
    pub world: &'a WorldSpec,
    pretrain: &'a Dataset,
    holdout: Option<&'a Dataset>,
    on_model: &'a mut dyn FnMut(u32, &SurrogateEnsemble) -> Result<()>,
    /// Q_GL: admitted but not yet ranked.
    fresh: Vec<Entry>,
    /// Q_UL: ranked, head first.
    queue: VecDeque<Entry>,
    queued_keys: HashSet<u64>,
    in_flight_keys: HashSet<u64>,
    d_s: Dataset,
    model: Option<SurrogateEnsemble>,
    model_version: Option<u32>,
    generator: Generator,
    ids: IdAllocator,
    gen_rng: Rng,
    rank_seed: u64,
    rank_pass: u64,
    results_since_fit: usize,
    results_since_ft: usize,
    pub counters: Counters,
    pub ledger: TimingLedger,
    pub log: EventLog,
    pub clock: f64,
    stopped: bool,
}

fn sanitize(s: &str) -> String {
    s.replace([',', ';', '\n'], " ")
}

impl<'a> Coordinator<'a> {
    pub fn new(
        cfg: &'a RunConfig,
        world: &'a WorldSpec,
        pretrain: &'a Dataset,
        holdout: Option<&'a Dataset>,
        on_model: &'a mut dyn FnMut(u32, &SurrogateEnsemble) -> Result<()>,
    ) -> Result<Self> {
        cfg.validate()?;
        if pretrain.iter().any(|r| r.s_is().is_none()) {
            return Err(Error::Config(
                "pretraining records must all be labelled".into(),
            ));
        }
        if cfg.acquisition.uses_surrogate() && pretrain.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Coordinator {
            cfg,
            world,
            pretrain,
            holdout,
            on_model,
            fresh: Vec::new(),
            queue: VecDeque::new(),
            queued_keys: HashSet::new(),
            in_flight_keys: HashSet::new(),
            d_s: Dataset::new(),
            model: None,
            model_version: None,
            generator: world.initial.clone(),
            ids: IdAllocator::starting_at(GENERATED_ID_BASE),
            gen_rng: rng::named(cfg.seed, "generator"),
            rank_seed: rng::derive(cfg.seed, rng::label("rank")),
            rank_pass: 0,
            results_since_fit: 0,
            results_since_ft: 0,
            counters: Counters::default(),
            ledger: TimingLedger::default(),
            log: EventLog::default(),
            clock: 0.0,
            stopped: false,
        })
    }

    /// Fit the initial surrogate on the pretraining set if the acquisition
    /// needs one.
    pub fn init(&mut self) -> Result<()> {
        if self.cfg.acquisition.uses_surrogate() {
            let t = Instant::now();
            let (model, rows) = self.start_retrain()?;
            self.charge(Stage::Prioritize, self.cfg.costs.retrain(rows), t.elapsed());
            self.finish_retrain(model, rows)?;
        }
        Ok(())
    }

    pub fn charge(&mut self, stage: Stage, simulated: f64, measured: Duration) {
        let cost = match self.cfg.mode {
            ExecMode::DeterministicEventSim => simulated,
            ExecMode::Parallel => measured.as_secs_f64(),
        };
        self.ledger.account(stage, cost);
    }

    fn event(
        &mut self,
        kind: EventKind,
        id: Option<u64>,
        model_version: Option<u32>,
        detail: String,
    ) {
        self.log.push(Event {
            clock: self.clock,
            kind,
            candidate_id: id,
            model_version,
            generator_version: self.generator.version,
            detail,
        });
    }

    pub fn queued(&self) -> usize {
        self.fresh.len() + self.queue.len()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight_keys.len()
    }

    // -- producer ---------------------------------------------------------

    pub fn needs_generation(&self) -> bool {
        self.queued() < 2 * self.cfg.gen_batch
    }

    /// Draw one producer batch from the current generator.
    pub fn sample_batch(&mut self) -> Result<Vec<Candidate>> {
        (0..self.cfg.gen_batch)
            .map(|_| {
                let z = self.generator.sample_latent(&mut self.gen_rng);
                self.world
                    .candidate(self.ids.next_id(), z, Origin::Generated)
            })
            .collect()
    }

    /// Validate, deduplicate and score a generated batch, then re-rank.
    pub fn admit(&mut self, batch: Vec<Candidate>) -> Result<()> {
        let t = Instant::now();
        let n = batch.len();
        for c in batch {
            self.counters.generated += 1;
            let id = c.id;
            self.event(EventKind::Gen, Some(id), None, String::new());
            if !validity_check(&c) {
                self.counters.invalid += 1;
                self.event(
                    EventKind::DiscardInvalid,
                    Some(id),
                    None,
                    "stage=admit".into(),
                );
                continue;
            }
            let key = dedup_key(&c);
            if self.pretrain.contains_key(key)
                || self.d_s.contains_key(key)
                || self.in_flight_keys.contains(&key)
                || self.queued_keys.contains(&key)
            {
                self.counters.duplicates += 1;
                self.event(EventKind::DiscardDup, Some(id), None, "stage=admit".into());
                continue;
            }
            let rec = self.world.score(c)?;
            self.queued_keys.insert(key);
            self.fresh.push(Entry {
                rec,
                key,
                pred: None,
                priority: f64::NAN,
            });
        }
        let cost = self.cfg.costs.validate_per_candidate * n as f64;
        self.charge(Stage::Validate, cost, t.elapsed());
        self.rerank()
    }

    // -- prioritization ---------------------------------------------------

    /// Predict and rank all of Q_GL and Q_UL into one sorted Q_UL.
    pub fn rerank(&mut self) -> Result<()> {
        if self.queued() == 0 {
            return Ok(());
        }
        let t = Instant::now();
        self.queue.extend(self.fresh.drain(..));
        let mut predicted = 0usize;
        if self.cfg.acquisition.uses_surrogate() {
            let (Some(model), Some(v)) = (self.model.as_ref(), self.model_version) else {
                return Err(Error::MissingPrediction("surrogate not fitted"));
            };
            for e in self.queue.iter_mut() {
                if e.pred.map(|p| p.0) != Some(v) {
                    e.pred = Some((v, model.predict(&e.rec.candidate.embedding)?));
                    predicted += 1;
                }
            }
        }
        let entries: Vec<QueueEntry> = self
            .queue
            .iter()
            .map(|e| QueueEntry {
                id: e.id(),
                prediction: e.pred.map(|p| p.1),
                s_sa: e.rec.s_sa,
                s_t: e.rec.s_t,
            })
            .collect();
        let ctx = RankPass {
            seed: self.rank_seed,
            pass: self.rank_pass,
        };
        let pri = priorities(&self.cfg.acquisition, &entries, ctx)?;
        let ids: Vec<u64> = entries.iter().map(|e| e.id).collect();
        let order = rank(&ids, &pri)?;
        let mut old: Vec<Option<Entry>> = self.queue.drain(..).map(Some).collect();
        for i in order {
            let mut e = old[i].take().expect("rank returns a permutation");
            e.priority = pri[i];
            self.queue.push_back(e);
        }
        let pass = self.rank_pass;
        self.rank_pass += 1;
        self.counters.rank_passes += 1;
        let detail = format!(
            "queued={};predicted={predicted};pass={pass}",
            self.queue.len()
        );
        self.event(EventKind::Rank, None, self.model_version, detail);
        let cost = self.cfg.costs.predict_per_candidate * predicted as f64;
        self.charge(Stage::Prioritize, cost, t.elapsed());
        Ok(())
    }

    /// Remove and return the head of Q_UL.
    pub fn pop(&mut self) -> Option<Entry> {
        while let Some(e) = self.queue.pop_front() {
            self.queued_keys.remove(&e.key);
            if self.d_s.contains_key(e.key) || self.in_flight_keys.contains(&e.key) {
                self.counters.duplicates += 1;
                self.event(
                    EventKind::DiscardDup,
                    Some(e.id()),
                    None,
                    "stage=pop".into(),
                );
                self.charge(
                    Stage::Validate,
                    self.cfg.costs.validate_per_candidate,
                    Duration::ZERO,
                );
                continue;
            }
            self.in_flight_keys.insert(e.key);
            let detail = format!("priority={}", e.priority);
            self.event(EventKind::Pop, Some(e.id()), e.pred.map(|p| p.0), detail);
            return Some(e);
        }
        None
    }

    // -- results ----------------------------------------------------------

    /// Record a finished simulation. Returns true once the target is met.
    pub fn complete(&mut self, e: Entry, s_is: f64) -> Result<bool> {
        self.in_flight_keys.remove(&e.key);
        if self.stopped {
            return Ok(true);
        }
        let id = e.id();
        let rec = e.rec.with_strain(s_is);
        let stable = self.cfg.thresholds.is_stable(&rec)?;
        let detail = format!(
            "s_is={s_is};s_sa={};s_t={};stable={}",
            rec.s_sa,
            rec.s_t,
            u8::from(stable)
        );
        if !self.d_s.insert_unique(rec) {
            return Err(Error::Worker(format!(
                "result for candidate {id} duplicates D_S"
            )));
        }
        self.counters.simulated += 1;
        self.counters.stable += usize::from(stable);
        self.results_since_fit += 1;
        self.results_since_ft += 1;
        self.event(EventKind::SimDone, Some(id), None, detail);
        if self.d_s.len() >= self.cfg.n_target {
            self.stop(None);
            return Ok(true);
        }
        Ok(false)
    }

    pub fn stop(&mut self, aborted: Option<&str>) {
        if self.stopped {
            return;
        }
        self.stopped = true;
        self.counters.dropped_in_flight = self.in_flight();
        let c = self.counters;
        let mut detail = format!(
            "generated={};simulated={};queued={};in_flight={};discarded={}",
            c.generated,
            c.simulated,
            self.queued(),
            self.in_flight(),
            c.duplicates + c.invalid
        );
        if let Some(msg) = aborted {
            detail.push_str(";aborted=");
            detail.push_str(&sanitize(msg));
        }
        self.event(EventKind::Stop, None, self.model_version, detail);
    }

    // -- surrogate --------------------------------------------------------

    pub fn retrain_due(&self) -> bool {
        self.cfg
            .retrain_batch
            .is_some_and(|b| self.cfg.acquisition.uses_surrogate() && self.results_since_fit >= b)
    }

    /// Fit a new model on D_PT and the current D_S. The model becomes
    /// visible only through [`Coordinator::finish_retrain`].
    pub fn start_retrain(&mut self) -> Result<(SurrogateEnsemble, usize)> {
        let version = self.model_version.map_or(0, |v| v + 1);
        let (x, y) = training_data(self.pretrain.iter().chain(self.d_s.iter()))?;
        let seed = rng::derive(
            rng::derive(self.cfg.seed, rng::label("surrogate")),
            u64::from(version),
        );
        let model = fit(&x, &y, &self.cfg.surrogate, seed)?;
        self.results_since_fit = 0;
        Ok((model, y.len()))
    }

    /// Swap in a fitted model and re-rank everything queued.
    pub fn finish_retrain(&mut self, model: SurrogateEnsemble, rows: usize) -> Result<()> {
        let version = self.model_version.map_or(0, |v| v + 1);
        let rmse = match self.holdout {
            Some(h) if !h.is_empty() => holdout_rmse(&model, h)?.to_string(),
            _ => String::new(),
        };
        (self.on_model)(version, &model)?;
        self.model = Some(model);
        self.model_version = Some(version);
        self.counters.retrains += 1;
        self.event(
            EventKind::Retrain,
            None,
            Some(version),
            format!("rows={rows};rmse={rmse}"),
        );
        self.rerank()
    }

    // -- generator --------------------------------------------------------

    pub fn finetune_due(&self) -> bool {
        self.results_since_ft >= self.cfg.ft_trigger
            && crate::dataset::top_count(self.cfg.ft_fraction, self.d_s.len())
                >= self.generator.n_components()
    }

    pub fn start_finetune(&mut self) -> Result<(Generator, usize)> {
        let elite = self
            .d_s
            .top_fraction(self.cfg.ft_fraction, Score::Strain, true)?;
        let latents: Vec<Vec<f64>> = elite.iter().map(|r| r.candidate.latent.clone()).collect();
        let params = FineTuneParams {
            eta: self.cfg.ft_eta,
            seed: rng::derive(
                rng::derive(self.cfg.seed, rng::label("fine-tune")),
                u64::from(self.generator.version),
            ),
        };
        let g = fine_tune(&self.generator, &latents, params)?;
        self.results_since_ft = 0;
        Ok((g, latents.len()))
    }

    pub fn finish_finetune(&mut self, g: Generator, elite: usize) {
        self.generator = g;
        self.counters.fine_tunes += 1;
        let detail = format!("elite={elite};results={}", self.d_s.len());
        self.event(EventKind::FineTune, None, self.model_version, detail);
    }

    pub fn finish(self, aborted: Option<String>) -> Result<RunResult> {
        let d_s_star = self.d_s.stable_subset(&self.cfg.thresholds)?;
        Ok(RunResult {
            d_s: self.d_s,
            d_s_star,
            events: self.log,
            ledger: self.ledger,
            counters: self.counters,
            final_model: self.model,
            final_generator: self.generator,
            aborted,
        })
    }
}
