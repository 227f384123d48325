//! Diagonal Gaussian mixture standing in for the generative model.

use rand::Rng as _;

use crate::dataset::{Candidate, Origin};
use crate::domain::FeatureSpace;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Lower bound on every per-coordinate variance.
pub const VARIANCE_FLOOR: f64 = 1e-3;
/// Lower bound on every component weight before renormalization.
pub const WEIGHT_FLOOR: f64 = 1e-6;
/// Latent coordinates beyond this magnitude are rejected before queuing.
pub const VALID_LATENT_BOUND: f64 = 6.0;
pub const KMEANS_ITERATIONS: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub version: u32,
}

impl Generator {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        let g = Generator {
            weights,
            means,
            variances,
            version: 0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.latent_dim();
        let n = self.weights.len();
        if n == 0 || self.means.len() != n || self.variances.len() != n {
            return Err(Error::Config("mixture components are inconsistent".into()));
        }
        if self
            .means
            .iter()
            .chain(&self.variances)
            .any(|v| v.len() != k)
        {
            return Err(Error::Config("mixture dimensions are inconsistent".into()));
        }
        if self.weights.iter().any(|w| w.is_nan() || *w <= 0.0)
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(
                "mixture weights must be positive and sum to 1".into(),
            ));
        }
        if self
            .variances
            .iter()
            .flatten()
            .any(|v| v.is_nan() || *v < VARIANCE_FLOOR * (1.0 - 1e-12))
        {
            return Err(Error::Config("mixture variance below floor".into()));
        }
        Ok(())
    }

    /// Mean of the mixture.
    pub fn mixture_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.latent_dim()];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for (a, b) in m.iter_mut().zip(mu) {
                *a += w * b;
            }
        }
        m
    }

    /// Per-coordinate variance of the mixture.
    pub fn mixture_variance(&self) -> Vec<f64> {
        let m = self.mixture_mean();
        let mut v = vec![0.0; m.len()];
        for c in 0..self.n_components() {
            for j in 0..m.len() {
                let dm = self.means[c][j] - m[j];
                v[j] += self.weights[c] * (self.variances[c][j] + dm * dm);
            }
        }
        v
    }

    pub fn sample_latent(&self, rng: &mut Rng) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut c = self.n_components() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                c = i;
                break;
            }
        }
        self.means[c]
            .iter()
            .zip(&self.variances[c])
            .map(|(m, v)| m + v.sqrt() * rng::normal(rng))
            .collect()
    }
}

/// Monotone id source for generated candidates.
#[derive(Clone, Debug)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn starting_at(next: u64) -> Self {
        IdAllocator { next }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// Draw `n` candidates: component by weight, then a diagonal Gaussian latent,
/// then featurize and fingerprint.
pub fn sample_candidates(
    g: &Generator,
    n: usize,
    rng: &mut Rng,
    space: &FeatureSpace,
    ids: &mut IdAllocator,
    origin: Origin,
) -> Result<Vec<Candidate>> {
    (0..n)
        .map(|_| {
            let latent = g.sample_latent(rng);
            space.candidate(ids.next_id(), latent, origin)
        })
        .collect()
}

/// False when any latent coordinate lies outside the supported box.
pub fn validity_check(c: &Candidate) -> bool {
    c.latent.iter().all(|v| v.abs() <= VALID_LATENT_BOUND)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FineTuneParams {
    /// Blend factor between the previous parameters (0) and the new estimate (1).
    pub eta: f64,
    pub seed: u64,
}

/// Re-estimate the mixture from elite latents and blend it into `g`.
///
/// Means come from seeded k-means (k-means++ start, 25 Lloyd iterations);
/// estimated clusters are matched to existing components by minimum total
/// squared mean distance so the blend is component-wise. Variances are the
/// per-cluster diagonal sample variances and weights are cluster shares.
pub fn fine_tune(g: &Generator, elite: &[Vec<f64>], params: FineTuneParams) -> Result<Generator> {
    let k = g.n_components();
    if elite.len() < k {
        return Err(Error::InsufficientElite {
            need: k,
            got: elite.len(),
        });
    }
    if !(0.0..=1.0).contains(&params.eta) {
        return Err(Error::Config(format!(
            "fine-tune eta must be in [0, 1], got {}",
            params.eta
        )));
    }
    let dim = g.latent_dim();
    if let Some(bad) = elite.iter().find(|z| z.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut rng = rng::stream(params.seed);
    let (centers, assign) = kmeans(elite, k, KMEANS_ITERATIONS, &mut rng);

    // Cluster statistics.
    let mut counts = vec![0usize; k];
    let mut vars = vec![vec![0.0; dim]; k];
    for (z, &c) in elite.iter().zip(&assign) {
        counts[c] += 1;
        for j in 0..dim {
            let dz = z[j] - centers[c][j];
            vars[c][j] += dz * dz;
        }
    }
    for c in 0..k {
        for v in vars[c].iter_mut() {
            *v = if counts[c] > 1 {
                (*v / (counts[c] - 1) as f64).max(VARIANCE_FLOOR)
            } else {
                f64::NAN
            };
        }
    }

    let perm = match_components(&g.means, &centers);
    let eta = params.eta;
    let n = elite.len() as f64;
    let mut out = g.clone();
    for (old, &est) in perm.iter().enumerate() {
        let w_est = counts[est] as f64 / n;
        out.weights[old] = (1.0 - eta) * g.weights[old] + eta * w_est;
        if counts[est] == 0 {
            continue; // no information about this component
        }
        for j in 0..dim {
            out.means[old][j] = (1.0 - eta) * g.means[old][j] + eta * centers[est][j];
            let v_est = if vars[est][j].is_nan() {
                g.variances[old][j]
            } else {
                vars[est][j]
            };
            out.variances[old][j] =
                ((1.0 - eta) * g.variances[old][j] + eta * v_est).max(VARIANCE_FLOOR);
        }
    }
    for w in out.weights.iter_mut() {
        *w = w.max(WEIGHT_FLOOR);
    }
    let total: f64 = out.weights.iter().sum();
    out.weights.iter_mut().for_each(|w| *w /= total);
    out.version = g.version + 1;
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters keep their
/// previous center. Returns centers and assignments.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    iterations: usize,
    rng: &mut Rng,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let mut assign = vec![0usize; n];
    for it in 0..iterations {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, ctr) in centers.iter().enumerate() {
                let d = sq_dist(p, ctr);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if it > 0 && !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    (centers, assign)
}

/// `perm[old] = new` minimizing total squared distance between matched means.
/// Exhaustive for up to 8 components, greedy beyond.
fn match_components(old: &[Vec<f64>], new: &[Vec<f64>]) -> Vec<usize> {
    let k = old.len();
    let cost: Vec<Vec<f64>> = old
        .iter()
        .map(|o| new.iter().map(|n| sq_dist(o, n)).collect())
        .collect();
    if k <= 8 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = perm.clone();
        let mut best_cost = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            if c < best_cost {
                best_cost = c;
                best.copy_from_slice(p);
            }
        });
        best
    } else {
        let mut used = vec![false; k];
        (0..k)
            .map(|i| {
                let j = (0..k)
                    .filter(|&j| !used[j])
                    .min_by(|&a, &b| cost[i][a].total_cmp(&cost[i][b]))
                    .unwrap();
                used[j] = true;
                j
            })
            .collect()
    }
}

fn permute(p: &mut [usize], at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == p.len() {
        visit(p);
        return;
    }
    for i in at..p.len() {
        p.swap(at, i);
        permute(p, at + 1, visit);
        p.swap(at, i);
    }
}
