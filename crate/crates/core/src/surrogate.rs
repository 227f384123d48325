//! Bagged regression-tree ensemble used as the strain surrogate.
//!
//! Each tree is grown on a bootstrap resample of the training rows, with a
//! fresh random subset of `ceil(d / 3)` features considered at every split and
//! variance reduction as the split criterion. The ensemble mean is the
//! prediction and the sample standard deviation across trees is the
//! uncertainty.
//!
//! Split search runs on per-feature quantile histograms (at most
//! [`SurrogateParams::max_bins`] bins). A chosen split threshold is always the
//! midpoint between the largest node value left of the boundary and the
//! smallest node value right of it, i.e. a midpoint of adjacent sorted unique
//! values. When a feature has no more unique values than bins, every such
//! midpoint is a candidate.
//!
//! Bootstrap convention: tree `t` draws `n` indices `j = floor(u * n)` with `u`
//! uniform from its own stream (`derive(seed, t)`), indexing the training rows
//! in the order they were supplied. Leaf-size limits count bootstrap draws,
//! so a row drawn twice counts twice.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng as _;

use crate::dataset::{Dataset, ScoredRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_bins: usize,
    /// Features considered per split; `None` means `ceil(d / 3)`.
    pub features_per_split: Option<usize>,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 3,
            max_bins: 64,
            features_per_split: None,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be >= 1".into()));
        }
        if !(2..=256).contains(&self.max_bins) {
            return Err(Error::Config("max_bins must be in 2..=256".into()));
        }
        Ok(())
    }
}

/// Dense row-major feature matrix.
#[derive(Clone, Debug, Default)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_cols: usize,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize) -> Self {
        FeatureMatrix {
            data: Vec::new(),
            n_cols,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::LengthMismatch {
                expected: self.n_cols,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.n_cols).unwrap_or(0)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

/// Embeddings and strains of labelled records, in iteration order.
pub fn training_data<'a, I>(records: I) -> Result<(FeatureMatrix, Vec<f64>)>
where
    I: IntoIterator<Item = &'a ScoredRecord>,
{
    let mut iter = records.into_iter().peekable();
    let d = iter.peek().map_or(0, |r| r.candidate.embedding.len());
    let mut x = FeatureMatrix::new(d);
    let mut y = Vec::new();
    for r in iter {
        y.push(r.strain()?);
        x.push_row(&r.candidate.embedding)?;
    }
    Ok((x, y))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go to the next node in pre-order,
    /// the rest to `right`.
    Split {
        feature: u32,
        threshold: f64,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf(value)],
        }
    }

    /// One split on `feature` at `threshold` with two constant leaves.
    pub fn stump(feature: u32, threshold: f64, left: f64, right: f64) -> Self {
        Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    right: 2,
                },
                Node::Leaf(left),
                Node::Leaf(right),
            ],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { right, .. } => {
                    1 + walk(nodes, i + 1).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        i + 1
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Sample standard deviation across trees (divisor `n_trees - 1`).
    pub spread: f64,
}

impl Prediction {
    pub fn from_outputs(outputs: &[f64]) -> Prediction {
        let n = outputs.len();
        let mean = outputs.iter().sum::<f64>() / n as f64;
        let spread = if n < 2 {
            0.0
        } else {
            let ss: f64 = outputs.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Prediction { mean, spread }
    }
}

#[derive(Clone, Debug)]
pub struct SurrogateEnsemble {
    trees: Vec<Tree>,
    n_features: usize,
    seed: u64,
    trained_on: usize,
    fit_time: Duration,
}

impl SurrogateEnsemble {
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Self {
        assert!(!trees.is_empty());
        SurrogateEnsemble {
            trees,
            n_features,
            seed: 0,
            trained_on: 0,
            fit_time: Duration::ZERO,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Wall time spent in [`fit`]. Not persisted.
    pub fn fit_time(&self) -> Duration {
        self.fit_time
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let outputs: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        Ok(Prediction::from_outputs(&outputs))
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.predict(x).map(|p| p.mean)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::read_from(&buf).map_err(|msg| Error::parse(path, 0, msg))
    }

    /// Checkpoint layout, all integers and floats little-endian:
    ///
    /// ```text
    /// b"ALQT"  u32 format=1  u32 n_features  u32 n_trees  u64 trained_on  u64 seed
    /// per tree:  u32 n_nodes, then nodes in pre-order:
    ///   leaf:  u8 0, f64 value
    ///   split: u8 1, u32 feature, f64 threshold, u32 right_child_index
    /// ```
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"ALQT")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n_features as u32).to_le_bytes())?;
        w.write_all(&(self.trees.len() as u32).to_le_bytes())?;
        w.write_all(&(self.trained_on as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for t in &self.trees {
            w.write_all(&(t.nodes.len() as u32).to_le_bytes())?;
            for n in &t.nodes {
                match *n {
                    Node::Leaf(v) => {
                        w.write_all(&[0])?;
                        w.write_all(&v.to_le_bytes())?;
                    }
                    Node::Split {
                        feature,
                        threshold,
                        right,
                    } => {
                        w.write_all(&[1])?;
                        w.write_all(&feature.to_le_bytes())?;
                        w.write_all(&threshold.to_le_bytes())?;
                        w.write_all(&right.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from(buf: &[u8]) -> std::result::Result<Self, String> {
        let mut r = ByteReader { buf, pos: 0 };
        if r.take(4)? != b"ALQT" {
            return Err("bad magic".into());
        }
        let format = r.u32()?;
        if format != 1 {
            return Err(format!("unsupported format {format}"));
        }
        let n_features = r.u32()? as usize;
        let n_trees = r.u32()? as usize;
        let trained_on = r.u64()? as usize;
        let seed = r.u64()?;
        if n_trees == 0 {
            return Err("no trees".into());
        }
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = r.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes);
            for i in 0..n_nodes {
                let node = match r.take(1)?[0] {
                    0 => Node::Leaf(r.f64()?),
                    1 => {
                        let feature = r.u32()?;
                        let threshold = r.f64()?;
                        let right = r.u32()?;
                        if feature as usize >= n_features
                            || right as usize >= n_nodes
                            || right as usize <= i + 1
                        {
                            return Err(format!("corrupt split node {i}"));
                        }
                        Node::Split {
                            feature,
                            threshold,
                            right,
                        }
                    }
                    tag => return Err(format!("bad node tag {tag}")),
                };
                nodes.push(node);
            }
            trees.push(Tree { nodes });
        }
        if r.pos != buf.len() {
            return Err("trailing bytes".into());
        }
        Ok(SurrogateEnsemble {
            trees,
            n_features,
            seed,
            trained_on,
            fit_time: Duration::ZERO,
        })
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.buf.len() {
            return Err("unexpected end of checkpoint".into());
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Fit an ensemble on `x` / `y`. Deterministic for fixed inputs and seed.
pub fn fit(
    x: &FeatureMatrix,
    y: &[f64],
    params: &SurrogateParams,
    seed: u64,
) -> Result<SurrogateEnsemble> {
    params.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("non-finite training target {v}")));
    }
    let start = Instant::now();
    let d = x.n_cols();
    let binned = Binned::new(x, params.max_bins);
    let mtry = params
        .features_per_split
        .unwrap_or_else(|| d.div_ceil(3))
        .clamp(1, d.max(1));

    let mut builder = TreeBuilder {
        y,
        binned: &binned,
        params,
        mtry,
        weights: vec![0.0; n],
        wy: vec![0.0; n],
        scratch: Vec::with_capacity(n),
        features: (0..d as u32).collect(),
        hist: Histogram::new(params.max_bins),
        nodes: Vec::new(),
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut rows: Vec<u32> = Vec::with_capacity(n);
    for t in 0..params.n_trees {
        let mut rng = rng::stream(rng::derive(seed, t as u64));
        builder.weights.iter_mut().for_each(|w| *w = 0.0);
        for _ in 0..n {
            let j = rng.random_range(0..n);
            builder.weights[j] += 1.0;
        }
        for (wy, (w, y)) in builder.wy.iter_mut().zip(builder.weights.iter().zip(y)) {
            *wy = w * y;
        }
        rows.clear();
        rows.extend((0..n as u32).filter(|&r| builder.weights[r as usize] > 0.0));
        builder.nodes = Vec::new();
        builder.grow(&mut rows, 0, &mut rng);
        trees.push(Tree {
            nodes: std::mem::take(&mut builder.nodes),
        });
    }
    Ok(SurrogateEnsemble {
        trees,
        n_features: d,
        seed,
        trained_on: n,
        fit_time: start.elapsed(),
    })
}

/// Fit on the embeddings and strains of a labelled dataset.
pub fn fit_dataset(
    train: &Dataset,
    params: &SurrogateParams,
    seed: u64,
) -> Result<SurrogateEnsemble> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (x, y) = training_data(train)?;
    fit(&x, &y, params, seed)
}

/// Root-mean-squared error of the ensemble mean against recorded strains.
pub fn holdout_rmse(model: &SurrogateEnsemble, holdout: &Dataset) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ss = 0.0;
    for r in holdout {
        let e = r.strain()? - model.predict_mean(&r.candidate.embedding)?;
        ss += e * e;
    }
    Ok((ss / holdout.len() as f64).sqrt())
}

/// Whether enough new results have arrived to justify a refit.
pub fn needs_retrain(results_since_fit: usize, batch: usize) -> bool {
    debug_assert!(batch >= 1);
    results_since_fit >= batch
}

/// Per-feature bin codes, stored column-major.
struct Binned {
    codes: Vec<u8>,
    values: Vec<f64>,
    n_bins: Vec<usize>,
    n_rows: usize,
}

impl Binned {
    fn new(x: &FeatureMatrix, max_bins: usize) -> Self {
        let n = x.n_rows();
        let d = x.n_cols();
        let mut codes = vec![0u8; n * d];
        let mut values = vec![0.0; n * d];
        let mut n_bins = Vec::with_capacity(d);
        let mut col = Vec::with_capacity(n);
        for f in 0..d {
            col.clear();
            col.extend((0..n).map(|i| x.row(i)[f]));
            col.sort_by(f64::total_cmp);
            col.dedup();
            let u = col.len();
            // Upper edges of every bin but the last; bin(v) = #edges < v.
            let edges: Vec<f64> = if u <= max_bins {
                col[..u - 1].to_vec()
            } else {
                let mut e: Vec<f64> = (1..max_bins).map(|j| col[j * u / max_bins - 1]).collect();
                e.dedup();
                e
            };
            for i in 0..n {
                let v = x.row(i)[f];
                codes[f * n + i] = edges.partition_point(|e| *e < v) as u8;
                values[f * n + i] = v;
            }
            n_bins.push(edges.len() + 1);
        }
        Binned {
            codes,
            values,
            n_bins,
            n_rows: n,
        }
    }

    fn column(&self, f: usize) -> &[u8] {
        &self.codes[f * self.n_rows..(f + 1) * self.n_rows]
    }

    fn values(&self, f: usize) -> &[f64] {
        &self.values[f * self.n_rows..(f + 1) * self.n_rows]
    }
}

struct Histogram {
    w: Vec<f64>,
    s: Vec<f64>,
}

impl Histogram {
    fn new(n: usize) -> Self {
        Histogram {
            w: vec![0.0; n],
            s: vec![0.0; n],
        }
    }

    fn reset(&mut self, n: usize) {
        self.w[..n].fill(0.0);
        self.s[..n].fill(0.0);
    }
}

struct TreeBuilder<'a> {
    y: &'a [f64],
    binned: &'a Binned,
    params: &'a SurrogateParams,
    mtry: usize,
    weights: Vec<f64>,
    wy: Vec<f64>,
    scratch: Vec<u32>,
    features: Vec<u32>,
    hist: Histogram,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: &mut [u32], depth: usize, rng: &mut rng::Rng) {
        let (mut w_sum, mut s_sum) = (0.0, 0.0);
        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows.iter() {
            let (w, y) = (self.weights[r as usize], self.y[r as usize]);
            w_sum += w;
            s_sum += w * y;
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        let leaf_value = s_sum / w_sum;
        let min_leaf = self.params.min_leaf as f64;
        if depth >= self.params.max_depth || w_sum < 2.0 * min_leaf || y_hi <= y_lo {
            self.nodes.push(Node::Leaf(leaf_value));
            return;
        }

        let Some(best) = self.best_split(rows, w_sum, s_sum, rng) else {
            self.nodes.push(Node::Leaf(leaf_value));
            return;
        };

        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            right: 0,
        });
        // Stable partition keeps row indices ascending for cache-friendly
        // histogram passes.
        let values = self.binned.values(best.feature);
        self.scratch.clear();
        let mut split = 0;
        for i in 0..rows.len() {
            let r = rows[i];
            if values[r as usize] <= best.threshold {
                rows[split] = r;
                split += 1;
            } else {
                self.scratch.push(r);
            }
        }
        rows[split..].copy_from_slice(&self.scratch);
        let (left, right) = rows.split_at_mut(split);
        self.grow(left, depth + 1, rng);
        let right_at = self.nodes.len() as u32;
        if let Node::Split { right, .. } = &mut self.nodes[at] {
            *right = right_at;
        }
        self.grow(right, depth + 1, rng);
    }

    fn best_split(
        &mut self,
        rows: &[u32],
        w_sum: f64,
        s_sum: f64,
        rng: &mut rng::Rng,
    ) -> Option<BestSplit> {
        let d = self.features.len();
        let min_leaf = self.params.min_leaf as f64;
        let parent = s_sum * s_sum / w_sum;
        let mut best: Option<BestSplit> = None;
        // Partial Fisher-Yates over the persistent feature permutation.
        for k in 0..self.mtry {
            let j = rng.random_range(k..d);
            self.features.swap(k, j);
        }
        let mut best_bin = 0usize;
        for k in 0..self.mtry {
            let f = self.features[k] as usize;
            let nb = self.binned.n_bins[f];
            if nb < 2 {
                continue;
            }
            let h = &mut self.hist;
            h.reset(nb);
            let codes = self.binned.column(f);
            for &r in rows {
                let r = r as usize;
                let b = codes[r] as usize;
                h.w[b] += self.weights[r];
                h.s[b] += self.wy[r];
            }
            let (mut wl, mut sl) = (0.0, 0.0);
            for b in 0..nb - 1 {
                if h.w[b] == 0.0 {
                    continue;
                }
                wl += h.w[b];
                sl += h.s[b];
                let wr = w_sum - wl;
                if wl < min_leaf || wr < min_leaf {
                    continue;
                }
                let sr = s_sum - sl;
                let gain = sl * sl / wl + sr * sr / wr - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold: f64::NAN,
                    });
                    best_bin = b;
                }
            }
        }
        // Threshold: midpoint between the largest value going left and the
        // smallest going right.
        if let Some(bs) = best.as_mut() {
            let codes = self.binned.column(bs.feature);
            let values = self.binned.values(bs.feature);
            let (mut left_max, mut right_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &r in rows {
                let r = r as usize;
                let v = values[r];
                if codes[r] as usize <= best_bin {
                    left_max = left_max.max(v);
                } else {
                    right_min = right_min.min(v);
                }
            }
            bs.threshold = 0.5 * (left_max + right_min);
        }
        best
    }
}
