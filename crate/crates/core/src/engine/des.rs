//! Discrete-event driver: one thread, simulated clock, costs from the
//! [`CostModel`](super::CostModel).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Duration;

use crate::dataset::Candidate;
use crate::domain::Generator;
use crate::engine::coordinator::{Coordinator, Entry, RunResult};
use crate::engine::ledger::Stage;
use crate::error::{Error, Result};
use crate::rng;
use crate::surrogate::SurrogateEnsemble;

enum Pending {
    Simulation(Entry),
    Retrain(SurrogateEnsemble, usize),
    Generation(Vec<Candidate>),
    FineTune(Generator, usize),
}

struct Scheduled {
    time: f64,
    seq: u64,
    what: Pending,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap yields the earliest event; ties by insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Agenda {
    heap: BinaryHeap<Scheduled>,
    seq: u64,
}

impl Agenda {
    fn at(&mut self, time: f64, what: Pending) {
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            what,
        });
        self.seq += 1;
    }
}

pub(crate) fn run(mut c: Coordinator<'_>) -> Result<RunResult> {
    let cfg = c.cfg;
    let costs = cfg.costs;
    let mut agenda = Agenda {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut latency_rng = rng::named(cfg.seed, "latency");
    let (mut gpu_busy, mut cpu_busy) = (false, false);
    let mut idle = cfg.workers;

    c.init()?;
    loop {
        // The generator GPU serves a due fine-tune before more generation.
        if !gpu_busy {
            if c.finetune_due() {
                let (g, elite) = c.start_finetune()?;
                c.charge(Stage::FineTune, costs.fine_tune, Duration::ZERO);
                agenda.at(c.clock + costs.fine_tune, Pending::FineTune(g, elite));
                gpu_busy = true;
            } else if c.needs_generation() {
                let batch = c.sample_batch()?;
                let cost = costs.generate_per_candidate * batch.len() as f64;
                c.charge(Stage::Generate, cost, Duration::ZERO);
                agenda.at(c.clock + cost, Pending::Generation(batch));
                gpu_busy = true;
            }
        }
        if !cpu_busy && c.retrain_due() {
            let (model, rows) = c.start_retrain()?;
            let cost = costs.retrain(rows);
            c.charge(Stage::Prioritize, cost, Duration::ZERO);
            agenda.at(c.clock + cost, Pending::Retrain(model, rows));
            cpu_busy = true;
        }
        while idle > 0 {
            let Some(e) = c.pop() else { break };
            let latency = cfg.latency.sample(&mut latency_rng);
            c.charge(Stage::Simulate, latency, Duration::ZERO);
            agenda.at(c.clock + latency, Pending::Simulation(e));
            idle -= 1;
        }

        let Some(next) = agenda.heap.pop() else {
            return Err(Error::Worker(
                "no pending work before reaching n_target".into(),
            ));
        };
        c.clock = next.time;
        match next.what {
            Pending::Simulation(e) => {
                idle += 1;
                let s_is = c.world.oracle_strain(&e.rec.candidate);
                if c.complete(e, s_is)? {
                    break;
                }
            }
            Pending::Retrain(model, rows) => {
                cpu_busy = false;
                c.finish_retrain(model, rows)?;
            }
            Pending::Generation(batch) => {
                gpu_busy = false;
                c.admit(batch)?;
            }
            Pending::FineTune(g, elite) => {
                gpu_busy = false;
                c.finish_finetune(g, elite);
            }
        }
    }
    c.finish(None)
}
