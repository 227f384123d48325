use std::fmt;

/// Workflow stages tracked by the timing ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Generate,
    FineTune,
    Prioritize,
    Validate,
    Simulate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Generate,
        Stage::FineTune,
        Stage::Prioritize,
        Stage::Validate,
        Stage::Simulate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::FineTune => "fine_tune",
            Stage::Prioritize => "prioritize",
            Stage::Validate => "validate",
            Stage::Simulate => "simulate",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accumulated seconds per stage: simulated seconds in event-sim mode,
/// measured wall seconds in parallel mode.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimingLedger {
    seconds: [f64; 5],
}

impl TimingLedger {
    pub fn account(&mut self, stage: Stage, cost: f64) {
        debug_assert!(cost >= 0.0);
        self.seconds[stage.index()] += cost;
    }

    pub fn get(&self, stage: Stage) -> f64 {
        self.seconds[stage.index()]
    }

    pub fn total(&self) -> f64 {
        self.seconds.iter().sum()
    }

    /// Fraction of the total; 0 for an empty ledger.
    pub fn share(&self, stage: Stage) -> f64 {
        let t = self.total();
        if t > 0.0 {
            self.get(stage) / t
        } else {
            0.0
        }
    }
}
