//! Candidates, scored records and deduplicated datasets.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::mix64;

/// Set of active bits in a 64-bit structural fingerprint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub u64);

impl Fingerprint {
    pub fn from_indices<I: IntoIterator<Item = u32>>(indices: I) -> Self {
        let mut bits = 0u64;
        for i in indices {
            assert!(i < 64, "fingerprint bit {i} out of range");
            bits |= 1 << i;
        }
        Fingerprint(bits)
    }

    pub fn indices(self) -> impl Iterator<Item = u32> {
        (0..64u32).filter(move |i| self.0 & (1 << i) != 0)
    }

    pub fn contains(self, i: u32) -> bool {
        i < 64 && self.0 & (1 << i) != 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Generated,
    Pretraining,
    Reference,
    Holdout,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Generated => "generated",
            Origin::Pretraining => "pretraining",
            Origin::Reference => "reference",
            Origin::Holdout => "holdout",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generated" => Ok(Origin::Generated),
            "pretraining" => Ok(Origin::Pretraining),
            "reference" => Ok(Origin::Reference),
            "holdout" => Ok(Origin::Holdout),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

/// One design: latent code plus the derived embedding and fingerprint.
///
/// Construct through [`crate::domain::FeatureSpace::candidate`] so that the
/// embedding and fingerprint stay consistent with the latent.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub id: u64,
    pub latent: Vec<f64>,
    pub embedding: Vec<f64>,
    pub fingerprint: Fingerprint,
    pub origin: Origin,
}

/// Embedding quantization step used by [`dedup_key`].
pub const DEDUP_QUANTUM: f64 = 1e-4;

/// Identity key: fingerprint bits folded with the embedding rounded to four
/// decimal places. Uses a fixed mixing function, so keys are stable across
/// platforms and runs.
pub fn dedup_key(c: &Candidate) -> u64 {
    let mut h = mix64(c.fingerprint.0);
    for &x in &c.embedding {
        let q = (x / DEDUP_QUANTUM).round() as i64;
        h = mix64(h ^ q as u64).rotate_left(17);
    }
    h
}

/// Which score a ranking refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Score {
    Strain,
    Synth,
    Novelty,
}

impl FromStr for Score {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s_is" | "strain" => Ok(Score::Strain),
            "s_sa" | "synth" => Ok(Score::Synth),
            "s_t" | "novelty" => Ok(Score::Novelty),
            other => Err(format!("unknown score `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredRecord {
    pub candidate: Candidate,
    /// Synthesizability analogue in [0, 1], lower is better.
    pub s_sa: f64,
    /// Novelty distance to the reference set in [0, 1], lower is better.
    pub s_t: f64,
    s_is: Option<f64>,
}

impl ScoredRecord {
    pub fn new(candidate: Candidate, s_sa: f64, s_t: f64) -> Self {
        ScoredRecord {
            candidate,
            s_sa,
            s_t,
            s_is: None,
        }
    }

    pub fn with_strain(mut self, s_is: f64) -> Self {
        self.s_is = Some(s_is);
        self
    }

    pub fn id(&self) -> u64 {
        self.candidate.id
    }

    pub fn s_is(&self) -> Option<f64> {
        self.s_is
    }

    /// Record the simulated strain. A strain is written at most once.
    pub fn set_strain(&mut self, s_is: f64) -> Result<()> {
        if self.s_is.is_some() {
            return Err(Error::StrainAlreadySet { id: self.id() });
        }
        self.s_is = Some(s_is);
        Ok(())
    }

    pub fn strain(&self) -> Result<f64> {
        self.s_is.ok_or(Error::MissingStrain { id: self.id() })
    }

    pub fn score(&self, by: Score) -> Result<f64> {
        match by {
            Score::Strain => self.strain(),
            Score::Synth => Ok(self.s_sa),
            Score::Novelty => Ok(self.s_t),
        }
    }

    pub fn key(&self) -> u64 {
        dedup_key(&self.candidate)
    }
}

/// Acceptance thresholds. A record is stable when every score is strictly
/// below its threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub t_is: f64,
    pub t_sa: f64,
    pub t_t: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t_is: 0.25,
            t_sa: 1.0,
            t_t: 1.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_is", self.t_is), ("t_sa", self.t_sa), ("t_t", self.t_t)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "threshold {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn accepts(&self, s_is: f64, s_sa: f64, s_t: f64) -> bool {
        s_is < self.t_is && s_sa < self.t_sa && s_t < self.t_t
    }

    pub fn is_stable(&self, r: &ScoredRecord) -> Result<bool> {
        Ok(self.accepts(r.strain()?, r.s_sa, r.s_t))
    }
}

/// Ordered collection of records, unique by [`dedup_key`].
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    records: Vec<ScoredRecord>,
    index: HashMap<u64, usize>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from records, silently dropping later duplicates.
    pub fn from_records<I: IntoIterator<Item = ScoredRecord>>(records: I) -> Self {
        let mut d = Dataset::new();
        for r in records {
            d.insert_unique(r);
        }
        d
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ScoredRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScoredRecord> {
        self.records.iter()
    }

    pub fn contains_key(&self, key: u64) -> bool {
        self.index.contains_key(&key)
    }

    pub fn get_by_key(&self, key: u64) -> Option<&ScoredRecord> {
        self.index.get(&key).map(|&i| &self.records[i])
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.index.keys().copied()
    }

    /// Append `r` unless its key is already present. Returns whether it was
    /// inserted.
    pub fn insert_unique(&mut self, r: ScoredRecord) -> bool {
        let key = r.key();
        if self.index.contains_key(&key) {
            return false;
        }
        self.index.insert(key, self.records.len());
        self.records.push(r);
        true
    }

    /// Records that pass every threshold, in their original order.
    pub fn stable_subset(&self, t: &Thresholds) -> Result<Dataset> {
        let mut out = Dataset::new();
        for r in &self.records {
            if t.is_stable(r)? {
                out.insert_unique(r.clone());
            }
        }
        Ok(out)
    }

    /// The best `ceil(frac * len)` records by one score, best first. Ties go
    /// to the smaller candidate id.
    pub fn top_fraction(&self, frac: f64, by: Score, lower_is_better: bool) -> Result<Dataset> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(Error::Config(format!(
                "fraction must be in (0, 1], got {frac}"
            )));
        }
        let mut scored = Vec::with_capacity(self.len());
        for (i, r) in self.records.iter().enumerate() {
            scored.push((r.score(by)?, r.id(), i));
        }
        scored.sort_by(|a, b| {
            let ord = if lower_is_better {
                a.0.total_cmp(&b.0)
            } else {
                b.0.total_cmp(&a.0)
            };
            ord.then(a.1.cmp(&b.1))
        });
        let n = top_count(frac, self.len());
        Ok(Dataset::from_records(
            scored[..n].iter().map(|&(_, _, i)| self.records[i].clone()),
        ))
    }

    /// Write `id,origin,latent_0..latent_{k-1},s_sa,s_t,s_is`. Embeddings and
    /// fingerprints are derived data and are not stored.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let k = self.records.first().map_or(0, |r| r.candidate.latent.len());
        let mut w = BufWriter::new(fs::File::create(path)?);
        write!(w, "id,origin")?;
        for j in 0..k {
            write!(w, ",latent_{j}")?;
        }
        writeln!(w, ",s_sa,s_t,s_is")?;
        for r in &self.records {
            write!(w, "{},{}", r.id(), r.candidate.origin)?;
            for x in &r.candidate.latent {
                write!(w, ",{x}")?;
            }
            write!(w, ",{},{},", r.s_sa, r.s_t)?;
            if let Some(s) = r.s_is {
                write!(w, "{s}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read the CSV layout written by [`Dataset::write_csv`]; `build` turns
    /// `(id, latent, origin)` back into a full candidate.
    pub fn read_csv<F>(path: &Path, mut build: F) -> Result<Dataset>
    where
        F: FnMut(u64, Vec<f64>, Origin) -> Result<Candidate>,
    {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 5
            || cols[0] != "id"
            || cols[1] != "origin"
            || cols[cols.len() - 3..] != ["s_sa", "s_t", "s_is"]
        {
            return Err(Error::parse(path, 1, "unexpected header"));
        }
        let k = cols.len() - 5;
        let mut d = Dataset::new();
        for (lineno, line) in lines.enumerate().map(|(i, l)| (i + 2, l)) {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {} fields, got {}", cols.len(), f.len()),
                ));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(path, lineno, format!("bad number `{s}`: {e}")))
            };
            let id = f[0]
                .parse::<u64>()
                .map_err(|e| Error::parse(path, lineno, format!("bad id: {e}")))?;
            let origin = f[1]
                .parse::<Origin>()
                .map_err(|e| Error::parse(path, lineno, e))?;
            let latent = f[2..2 + k]
                .iter()
                .map(|s| num(s))
                .collect::<Result<Vec<_>>>()?;
            let s_sa = num(f[2 + k])?;
            let s_t = num(f[3 + k])?;
            let s_is = match f[4 + k] {
                "" => None,
                s => Some(num(s)?),
            };
            let mut r = ScoredRecord::new(build(id, latent, origin)?, s_sa, s_t);
            r.s_is = s_is;
            if !d.insert_unique(r) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("duplicate candidate {id}"),
                ));
            }
        }
        Ok(d)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a ScoredRecord;
    type IntoIter = std::slice::Iter<'a, ScoredRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// `ceil(frac * n)`, computed so that exact products do not round up.
pub fn top_count(frac: f64, n: usize) -> usize {
    let raw = frac * n as f64;
    let n_top = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (n_top as usize).clamp(1, n)
}
