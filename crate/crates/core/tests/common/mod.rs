#![allow(dead_code)]

use std::sync::OnceLock;

use alqueue::domain::{make_world, WorldBundle, WorldParams};
use alqueue::engine::{EventKind, EventLog};
use alqueue::harness::DEFAULT_WORLD_SEED;

/// The default world, built once per test binary.
pub fn world() -> &'static WorldBundle {
    static W: OnceLock<WorldBundle> = OnceLock::new();
    W.get_or_init(|| {
        make_world(DEFAULT_WORLD_SEED, &WorldParams::default()).expect("default world")
    })
}

/// A smaller world for fast engine tests.
pub fn small_world() -> &'static WorldBundle {
    static W: OnceLock<WorldBundle> = OnceLock::new();
    W.get_or_init(|| {
        let p = WorldParams {
            n_reference: 400,
            n_holdout: 200,
            n_pool: 400,
            ..WorldParams::default()
        };
        make_world(11, &p).expect("small world")
    })
}

/// Replays an event log and checks, after every event, that
/// generated = simulated + queued + in-flight + discarded with no negative
/// term, that in-flight never exceeds `workers`, and that the STOP summary
/// agrees with the scan.
pub fn check_conservation(log: &EventLog, workers: usize) -> Result<(), String> {
    let (mut gen, mut sim, mut popped, mut discarded_admit, mut discarded_pop) =
        (0i64, 0i64, 0i64, 0i64, 0i64);
    let mut stopped = false;
    for (i, e) in log.iter().enumerate() {
        match e.kind {
            EventKind::Gen => gen += 1,
            EventKind::DiscardInvalid => discarded_admit += 1,
            EventKind::DiscardDup => {
                if e.get("stage") == Some("pop") {
                    discarded_pop += 1;
                } else {
                    discarded_admit += 1;
                }
            }
            EventKind::Pop => popped += 1,
            EventKind::SimDone => sim += 1,
            EventKind::Stop => {
                stopped = true;
                let queued = gen - discarded_admit - discarded_pop - popped;
                let in_flight = popped - sim;
                let field = |k: &str| {
                    e.get(k)
                        .and_then(|v| v.parse::<i64>().ok())
                        .ok_or(format!("STOP lacks {k}"))
                };
                let expect = [
                    ("generated", gen),
                    ("simulated", sim),
                    ("queued", queued),
                    ("in_flight", in_flight),
                    ("discarded", discarded_admit + discarded_pop),
                ];
                for (k, v) in expect {
                    let got = field(k)?;
                    if got != v {
                        return Err(format!("STOP {k}={got}, scan gives {v}"));
                    }
                }
                continue;
            }
            _ => {}
        }
        if stopped {
            continue;
        }
        let queued = gen - discarded_admit - discarded_pop - popped;
        let in_flight = popped - sim;
        if queued < 0 || in_flight < 0 || in_flight > workers as i64 {
            return Err(format!(
                "event {i}: queued={queued} in_flight={in_flight} (gen={gen} sim={sim} popped={popped})"
            ));
        }
        if gen != sim + queued + in_flight + discarded_admit + discarded_pop {
            return Err(format!("event {i}: conservation broken"));
        }
    }
    if !stopped {
        return Err("log has no STOP".into());
    }
    Ok(())
}
