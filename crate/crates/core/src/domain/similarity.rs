use crate::dataset::{Candidate, Fingerprint};
use crate::error::{Error, Result};

/// Tanimoto distance `1 - |a & b| / (|a| + |b| - |a & b|)`.
///
/// Two empty sets are treated as identical (distance 0).
pub fn tanimoto(a: Fingerprint, b: Fingerprint) -> f64 {
    let inter = (a.0 & b.0).count_ones();
    let denom = a.0.count_ones() + b.0.count_ones() - inter;
    if denom == 0 {
        return 0.0;
    }
    1.0 - f64::from(inter) / f64::from(denom)
}

/// Fingerprints of the reference collection used for novelty scoring.
#[derive(Clone, Debug, Default)]
pub struct ReferenceSet {
    fingerprints: Vec<Fingerprint>,
}

impl ReferenceSet {
    pub fn new(fingerprints: Vec<Fingerprint>) -> Self {
        ReferenceSet { fingerprints }
    }

    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    /// Minimum Tanimoto distance to any reference member.
    pub fn novelty(&self, fp: Fingerprint) -> Result<f64> {
        if self.fingerprints.is_empty() {
            return Err(Error::EmptyReference);
        }
        let mut best = 1.0f64;
        for &r in &self.fingerprints {
            let d = tanimoto(fp, r);
            if d < best {
                best = d;
                if best == 0.0 {
                    break;
                }
            }
        }
        Ok(best)
    }
}

pub fn novelty_score(c: &Candidate, reference: &ReferenceSet) -> Result<f64> {
    reference.novelty(c.fingerprint)
}
