//! Threaded driver. Workers only run the oracle; every state change happens
//! on the coordinator thread between message deliveries.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::dataset::Candidate;
use crate::domain::WorldSpec;
use crate::engine::coordinator::{Coordinator, Entry, RunResult};
use crate::engine::ledger::Stage;
use crate::error::Result;
use crate::rng;

struct Job {
    candidate: Candidate,
    sleep: Duration,
    fail: bool,
}

enum Done {
    Ok { id: u64, s_is: f64, wall: Duration },
    Failed { id: u64, msg: String },
}

fn worker(world: &WorldSpec, jobs: &Mutex<mpsc::Receiver<Job>>, done: mpsc::Sender<Done>) {
    loop {
        let job = {
            let Ok(rx) = jobs.lock() else { return };
            match rx.recv() {
                Ok(j) => j,
                Err(_) => return,
            }
        };
        let id = job.candidate.id;
        if job.fail {
            let msg = format!("injected worker fault on candidate {id}");
            if done.send(Done::Failed { id, msg }).is_err() {
                return;
            }
            continue;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| {
            thread::sleep(job.sleep);
            world.oracle_strain(&job.candidate)
        }));
        let msg = match out {
            Ok(s_is) => Done::Ok {
                id,
                s_is,
                wall: start.elapsed(),
            },
            Err(p) => Done::Failed {
                id,
                msg: p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "worker panicked".into()),
            },
        };
        if done.send(msg).is_err() {
            return;
        }
    }
}

pub(crate) fn run(mut c: Coordinator<'_>) -> Result<RunResult> {
    let cfg = c.cfg;
    let world = c.world;
    let start = Instant::now();
    let mut latency_rng = rng::named(cfg.seed, "latency");
    let (job_tx, job_rx) = mpsc::channel::<Job>();
    let job_rx = Arc::new(Mutex::new(job_rx));
    let (done_tx, done_rx) = mpsc::channel::<Done>();

    let outcome = thread::scope(|s| -> Result<Option<String>> {
        for _ in 0..cfg.workers {
            let rx = Arc::clone(&job_rx);
            let tx = done_tx.clone();
            s.spawn(move || worker(world, &rx, tx));
        }
        drop(done_tx);

        let mut in_flight: HashMap<u64, Entry> = HashMap::new();
        let mut sent = 0usize;
        c.clock = start.elapsed().as_secs_f64();
        c.init()?;
        let result = loop {
            c.clock = start.elapsed().as_secs_f64();
            if c.retrain_due() {
                let t = Instant::now();
                let (model, rows) = c.start_retrain()?;
                c.charge(Stage::Prioritize, cfg.costs.retrain(rows), t.elapsed());
                c.finish_retrain(model, rows)?;
            }
            if c.finetune_due() {
                let t = Instant::now();
                let (g, elite) = c.start_finetune()?;
                c.charge(Stage::FineTune, cfg.costs.fine_tune, t.elapsed());
                c.finish_finetune(g, elite);
            }
            if c.needs_generation() {
                let t = Instant::now();
                let batch = c.sample_batch()?;
                let cost = cfg.costs.generate_per_candidate * batch.len() as f64;
                c.charge(Stage::Generate, cost, t.elapsed());
                c.admit(batch)?;
            }
            while in_flight.len() < cfg.workers {
                let Some(e) = c.pop() else { break };
                let latency = cfg.latency.sample(&mut latency_rng);
                let job = Job {
                    candidate: e.rec.candidate.clone(),
                    sleep: Duration::from_secs_f64(latency * cfg.latency_scale),
                    fail: cfg.fault_after == Some(sent),
                };
                sent += 1;
                in_flight.insert(e.id(), e);
                if job_tx.send(job).is_err() {
                    break;
                }
            }
            if in_flight.is_empty() {
                // Everything just generated was discarded; draw again.
                continue;
            }
            let Ok(msg) = done_rx.recv() else {
                break Some("all workers exited".to_string());
            };
            c.clock = start.elapsed().as_secs_f64();
            match msg {
                Done::Ok { id, s_is, wall } => {
                    let e = in_flight
                        .remove(&id)
                        .expect("result for an in-flight candidate");
                    c.charge(Stage::Simulate, 0.0, wall);
                    if c.complete(e, s_is)? {
                        break None;
                    }
                }
                Done::Failed { id, msg } => {
                    in_flight.remove(&id);
                    break Some(format!("worker failed on candidate {id}: {msg}"));
                }
            }
        };
        if let Some(msg) = &result {
            c.stop(Some(msg));
        }
        // Closing the job channel lets idle workers exit; busy ones finish
        // their current sleep and find the result channel closed.
        drop(job_tx);
        drop(done_rx);
        Ok(result)
    })?;
    c.finish(outcome)
}
