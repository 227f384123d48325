//! Ground truth of the synthetic design space and its on-disk form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;

use crate::dataset::{dedup_key, Candidate, Dataset, Origin, ScoredRecord};
use crate::domain::generator::{validity_check, Generator, IdAllocator};
use crate::domain::similarity::ReferenceSet;
use crate::domain::{FeatureSpace, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const WORLD_FORMAT: &str = "alqueue-world-1";
pub const RNG_NAME: &str = "chacha8+splitmix64-v1";

/// Knobs for [`make_world`]. Defaults give the standard desk-scale world.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldParams {
    pub latent_dim: usize,
    pub embedding_dim: usize,
    pub components: usize,
    /// Distance range of initial generator means from the optimum.
    pub initial_radius: (f64, f64),
    pub initial_variance: f64,
    pub reference_components: usize,
    pub reference_radius: (f64, f64),
    pub reference_variance: f64,
    pub noise_sd: f64,
    pub target_stable_rate: f64,
    pub stable_rate_tolerance: f64,
    pub target_sa_mean: f64,
    pub calibration_samples: usize,
    pub n_reference: usize,
    pub n_holdout: usize,
    pub n_pool: usize,
    /// Share of holdout records drawn from the reference mixture; the rest
    /// come from the initial generator.
    pub holdout_reference_share: f64,
    /// Same for the offline pool.
    pub pool_reference_share: f64,
    /// Strain threshold the calibration targets.
    pub t_is: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            latent_dim: 8,
            embedding_dim: EMBEDDING_DIM,
            components: 4,
            initial_radius: (2.0, 4.0),
            initial_variance: 1.0,
            reference_components: 4,
            reference_radius: (1.0, 2.5),
            reference_variance: 0.5,
            noise_sd: 0.05,
            target_stable_rate: 0.05,
            stable_rate_tolerance: 0.01,
            target_sa_mean: 0.1,
            calibration_samples: 10_000,
            n_reference: 3000,
            n_holdout: 3000,
            n_pool: 6000,
            holdout_reference_share: 0.5,
            pool_reference_share: 0.5,
            t_is: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub samples: usize,
    pub stable_rate: f64,
    pub sa_mean: f64,
    pub invalid_rate: f64,
    /// Rotation away from the minimizing direction applied to hit the target.
    pub sa_rotation: f64,
}

#[derive(Clone, Debug)]
pub struct WorldSpec {
    pub seed: u64,
    pub z_star: Vec<f64>,
    pub scale: f64,
    pub noise_sd: f64,
    pub sa_direction: Vec<f64>,
    pub feature_map_seed: u64,
    pub fingerprint_seed: u64,
    pub initial: Generator,
    pub reference_mixture: Generator,
    pub calibration: Calibration,
    pub space: FeatureSpace,
    pub reference: ReferenceSet,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Standard normal draw owned by one candidate.
pub fn strain_noise(key: u64) -> f64 {
    rng::normal(&mut rng::stream(key))
}

/// Simulated wall time of one oracle call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LatencyModel {
    Constant(f64),
    LogNormal { median: f64, sigma: f64 },
}

impl Default for LatencyModel {
    /// 48 workers finishing 1000 simulations in about two hours.
    fn default() -> Self {
        LatencyModel::LogNormal {
            median: 340.0,
            sigma: 0.3,
        }
    }
}

impl LatencyModel {
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            LatencyModel::Constant(s) => s,
            LatencyModel::LogNormal { median, sigma } => median * (sigma * rng::normal(rng)).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LatencyModel::Constant(s) => s.is_finite() && s >= 0.0,
            LatencyModel::LogNormal { median, sigma } => {
                median.is_finite() && median > 0.0 && sigma.is_finite() && sigma >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid latency model {self:?}")))
        }
    }
}

impl WorldSpec {
    pub fn latent_dim(&self) -> usize {
        self.z_star.len()
    }

    /// Synthesizability analogue: `logistic(sa_direction . embedding)`.
    pub fn sa_score(&self, c: &Candidate) -> f64 {
        let dot: f64 = self
            .sa_direction
            .iter()
            .zip(&c.embedding)
            .map(|(a, b)| a * b)
            .sum();
        logistic(dot)
    }

    pub fn novelty_score(&self, c: &Candidate) -> Result<f64> {
        self.reference.novelty(c.fingerprint)
    }

    /// Expensive score: squared latent distance to the optimum over `scale`,
    /// times log-normal noise keyed by the candidate's identity.
    pub fn oracle_strain(&self, c: &Candidate) -> f64 {
        let base = sq_dist(&c.latent, &self.z_star) / self.scale;
        if self.noise_sd == 0.0 {
            return base;
        }
        base * (self.noise_sd * strain_noise(dedup_key(c))).exp()
    }

    /// Cheap scores attached at enqueue time.
    pub fn score(&self, c: Candidate) -> Result<ScoredRecord> {
        let s_sa = self.sa_score(&c);
        let s_t = self.novelty_score(&c)?;
        Ok(ScoredRecord::new(c, s_sa, s_t))
    }

    /// Cheap scores plus the oracle strain.
    pub fn label(&self, c: Candidate) -> Result<ScoredRecord> {
        let s_is = self.oracle_strain(&c);
        Ok(self.score(c)?.with_strain(s_is))
    }

    pub fn candidate(&self, id: u64, latent: Vec<f64>, origin: Origin) -> Result<Candidate> {
        self.space.candidate(id, latent, origin)
    }

    /// Fraction of `n` fresh initial-generator draws below the strain
    /// threshold (invalid draws excluded), from an independent stream.
    pub fn measure_stable_rate(
        &self,
        g: &Generator,
        n: usize,
        t_is: f64,
        seed: u64,
    ) -> Result<f64> {
        let mut r = rng::stream(seed);
        let mut valid = 0usize;
        let mut stable = 0usize;
        for i in 0..n {
            let c = self.candidate(i as u64, g.sample_latent(&mut r), Origin::Generated)?;
            if !validity_check(&c) {
                continue;
            }
            valid += 1;
            if self.oracle_strain(&c) < t_is {
                stable += 1;
            }
        }
        Ok(stable as f64 / valid.max(1) as f64)
    }
}

/// Everything `alqueue world` writes.
/// Weights, means and variances read back from world.csv.
type MixtureRows = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);

#[derive(Clone, Debug)]
pub struct WorldBundle {
    pub world: WorldSpec,
    pub pretrain: Dataset,
    pub holdout: Dataset,
    pub pool: Dataset,
}

fn random_unit(r: &mut Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng::normal(r)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn mixture_around(
    r: &mut Rng,
    center: &[f64],
    k: usize,
    radius: (f64, f64),
    variance: f64,
) -> Result<Generator> {
    let dim = center.len();
    let mut weights: Vec<f64> = (0..k).map(|_| r.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let means = (0..k)
        .map(|_| {
            let dist = r.random_range(radius.0..=radius.1);
            let u = random_unit(r, dim);
            center.iter().zip(&u).map(|(c, d)| c + dist * d).collect()
        })
        .collect();
    Generator::new(weights, means, vec![vec![variance; dim]; k])
}

/// Create and calibrate a world, then label its reference, holdout and pool
/// datasets.
pub fn make_world(seed: u64, params: &WorldParams) -> Result<WorldBundle> {
    let k = params.latent_dim;
    let d = params.embedding_dim;
    let feature_map_seed = rng::derive(seed, rng::label("feature-map-seed"));
    let fingerprint_seed = rng::derive(seed, rng::label("fingerprint-seed"));
    let space = FeatureSpace::new(feature_map_seed, fingerprint_seed, k, d);

    let mut layout = rng::named(seed, "world/layout");
    let z_star: Vec<f64> = (0..k).map(|_| layout.random_range(-0.5..0.5)).collect();
    let initial = mixture_around(
        &mut layout,
        &z_star,
        params.components,
        params.initial_radius,
        params.initial_variance,
    )?;
    let reference_mixture = mixture_around(
        &mut layout,
        &z_star,
        params.reference_components,
        params.reference_radius,
        params.reference_variance,
    )?;

    // Calibration sample from the initial generator.
    let mut cal = rng::named(seed, "world/calibration");
    let n_cal = params.calibration_samples;
    let mut cands = Vec::with_capacity(n_cal);
    let mut invalid = 0usize;
    for i in 0..n_cal {
        let c = space.candidate(i as u64, initial.sample_latent(&mut cal), Origin::Generated)?;
        if validity_check(&c) {
            cands.push(c);
        } else {
            invalid += 1;
        }
    }
    if cands.len() < 100 {
        return Err(Error::Calibration(format!(
            "only {} valid calibration samples",
            cands.len()
        )));
    }

    // Stable iff d^2 * exp(sd * g) / scale < t_is, i.e. q < scale with
    // q = d^2 * exp(sd * g) / t_is. Put `scale` between the order statistics
    // that bracket the target rate.
    let mut q: Vec<f64> = cands
        .iter()
        .map(|c| {
            sq_dist(&c.latent, &z_star) * (params.noise_sd * strain_noise(dedup_key(c))).exp()
                / params.t_is
        })
        .collect();
    q.sort_by(f64::total_cmp);
    let m = ((params.target_stable_rate * q.len() as f64).round() as usize).clamp(1, q.len() - 1);
    let scale = 0.5 * (q[m - 1] + q[m]);
    let stable_rate = q.iter().filter(|&&v| v < scale).count() as f64 / q.len() as f64;
    if !(1e-6..=1e6).contains(&scale)
        || (stable_rate - params.target_stable_rate).abs() > params.stable_rate_tolerance
    {
        return Err(Error::Calibration(format!(
            "stable rate {stable_rate:.4} at scale {scale:.4} outside {:.3} +/- {:.3}",
            params.target_stable_rate, params.stable_rate_tolerance
        )));
    }

    let (sa_direction, sa_rotation, sa_mean) =
        calibrate_sa_direction(&cands, d, params.target_sa_mean, &mut layout);

    let mut world = WorldSpec {
        seed,
        z_star,
        scale,
        noise_sd: params.noise_sd,
        sa_direction,
        feature_map_seed,
        fingerprint_seed,
        initial,
        reference_mixture,
        calibration: Calibration {
            samples: n_cal,
            stable_rate,
            sa_mean,
            invalid_rate: invalid as f64 / n_cal as f64,
            sa_rotation,
        },
        space,
        reference: ReferenceSet::default(),
    };

    // Reference / pretraining set. Its own novelty scores are zero by
    // definition once the set exists.
    let mut ids = IdAllocator::starting_at(0);
    let mut r = rng::named(seed, "world/reference");
    let mut reference = Dataset::new();
    while reference.len() < params.n_reference {
        let c = world.candidate(
            ids.next_id(),
            world.reference_mixture.sample_latent(&mut r),
            Origin::Reference,
        )?;
        if !validity_check(&c) {
            continue;
        }
        let s_is = world.oracle_strain(&c);
        let s_sa = world.sa_score(&c);
        reference.insert_unique(ScoredRecord::new(c, s_sa, 0.0).with_strain(s_is));
    }
    world.reference =
        ReferenceSet::new(reference.iter().map(|r| r.candidate.fingerprint).collect());

    let holdout = labelled_mix(
        &world,
        params.holdout_reference_share,
        params.n_holdout,
        "world/holdout",
        Origin::Holdout,
        &mut ids,
        &[&reference],
    )?;
    let pool = labelled_mix(
        &world,
        params.pool_reference_share,
        params.n_pool,
        "world/pool",
        Origin::Generated,
        &mut ids,
        &[&reference, &holdout],
    )?;

    Ok(WorldBundle {
        world,
        pretrain: reference,
        holdout,
        pool,
    })
}

#[allow(clippy::too_many_arguments)]
fn labelled_mix(
    world: &WorldSpec,
    reference_share: f64,
    n: usize,
    stream: &str,
    origin: Origin,
    ids: &mut IdAllocator,
    exclude: &[&Dataset],
) -> Result<Dataset> {
    let mut r = rng::named(world.seed, stream);
    let n_ref = (reference_share * n as f64).round() as usize;
    let mut out = Dataset::new();
    while out.len() < n {
        let from_reference = out.len() < n_ref;
        let (g, o) = if from_reference {
            (
                &world.reference_mixture,
                if origin == Origin::Holdout {
                    origin
                } else {
                    Origin::Reference
                },
            )
        } else {
            (&world.initial, origin)
        };
        let c = world.candidate(ids.next_id(), g.sample_latent(&mut r), o)?;
        if !validity_check(&c) || exclude.iter().any(|d| d.contains_key(dedup_key(&c))) {
            continue;
        }
        out.insert_unique(world.label(c)?);
    }
    Ok(out)
}

/// Pick `sa_direction` so the mean score over the calibration sample hits
/// `target`. Starting from the negated mean embedding, projected gradient
/// descent on the unit sphere finds the lowest reachable mean; the result is
/// then rotated toward a random orthogonal direction until the mean rises to
/// the target. If the minimum is still above the target it is kept as the
/// closest achievable value.
fn calibrate_sa_direction(
    cands: &[Candidate],
    d: usize,
    target: f64,
    r: &mut Rng,
) -> (Vec<f64>, f64, f64) {
    let n = cands.len() as f64;
    let normalize = |v: &mut Vec<f64>| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    };
    let mean_sa = |u: &[f64]| -> f64 {
        cands
            .iter()
            .map(|c| logistic(u.iter().zip(&c.embedding).map(|(a, b)| a * b).sum()))
            .sum::<f64>()
            / n
    };

    let mut anchor = vec![0.0; d];
    for c in cands {
        for (m, e) in anchor.iter_mut().zip(&c.embedding) {
            *m -= e / n;
        }
    }
    normalize(&mut anchor);
    let mut best = mean_sa(&anchor);
    let mut step = 1.0;
    for _ in 0..200 {
        if best <= target || step < 1e-6 {
            break;
        }
        let mut grad = vec![0.0; d];
        for c in cands {
            let p = logistic(anchor.iter().zip(&c.embedding).map(|(a, b)| a * b).sum());
            let w = p * (1.0 - p) / n;
            grad.iter_mut()
                .zip(&c.embedding)
                .for_each(|(g, e)| *g += w * e);
        }
        let mut next: Vec<f64> = anchor
            .iter()
            .zip(&grad)
            .map(|(a, g)| a - step * g)
            .collect();
        normalize(&mut next);
        let value = mean_sa(&next);
        if value < best {
            anchor = next;
            best = value;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }

    let mut ortho = random_unit(r, d);
    let proj: f64 = ortho.iter().zip(&anchor).map(|(a, b)| a * b).sum();
    ortho
        .iter_mut()
        .zip(&anchor)
        .for_each(|(o, a)| *o -= proj * a);
    normalize(&mut ortho);
    let direction = |theta: f64| -> Vec<f64> {
        anchor
            .iter()
            .zip(&ortho)
            .map(|(a, o)| theta.cos() * a + theta.sin() * o)
            .collect()
    };
    if best >= target {
        return (anchor.clone(), 0.0, best);
    }
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_sa(&direction(mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = direction(lo);
    let m = mean_sa(&u);
    (u, lo, m)
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn split_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| format!("bad number `{t}`: {e}"))
        })
        .collect()
}

impl WorldSpec {
    /// Writes `world.meta` (key=value) and `world.csv` (mixture parameters).
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut meta = String::new();
        let c = &self.calibration;
        let _ = writeln!(meta, "format={WORLD_FORMAT}");
        let _ = writeln!(meta, "rng={RNG_NAME}");
        let _ = writeln!(meta, "seed={}", self.seed);
        let _ = writeln!(meta, "latent_dim={}", self.latent_dim());
        let _ = writeln!(meta, "embedding_dim={}", self.space.features.dim());
        let _ = writeln!(meta, "components={}", self.initial.n_components());
        let _ = writeln!(meta, "scale={}", self.scale);
        let _ = writeln!(meta, "noise_sd={}", self.noise_sd);
        let _ = writeln!(meta, "z_star={}", join(&self.z_star));
        let _ = writeln!(meta, "feature_map_seed={}", self.feature_map_seed);
        let _ = writeln!(meta, "fingerprint_seed={}", self.fingerprint_seed);
        let _ = writeln!(meta, "sa_direction={}", join(&self.sa_direction));
        let _ = writeln!(meta, "calibration.samples={}", c.samples);
        let _ = writeln!(meta, "calibration.stable_rate={}", c.stable_rate);
        let _ = writeln!(meta, "calibration.sa_mean={}", c.sa_mean);
        let _ = writeln!(meta, "calibration.invalid_rate={}", c.invalid_rate);
        let _ = writeln!(meta, "calibration.sa_rotation={}", c.sa_rotation);
        fs::write(dir.join("world.meta"), meta)?;

        let k = self.latent_dim();
        let mut csv = String::from("mixture,component,weight");
        for j in 0..k {
            let _ = write!(csv, ",mean_{j}");
        }
        for j in 0..k {
            let _ = write!(csv, ",var_{j}");
        }
        csv.push('\n');
        for (name, g) in [
            ("initial", &self.initial),
            ("reference", &self.reference_mixture),
        ] {
            for i in 0..g.n_components() {
                let _ = write!(csv, "{name},{i},{}", g.weights[i]);
                for v in g.means[i].iter().chain(&g.variances[i]) {
                    let _ = write!(csv, ",{v}");
                }
                csv.push('\n');
            }
        }
        fs::write(dir.join("world.csv"), csv)?;
        Ok(())
    }

    /// Load `world.meta` and `world.csv`. The reference set is attached
    /// separately (see [`load_bundle`]).
    pub fn load(dir: &Path) -> Result<WorldSpec> {
        let meta_path = dir.join("world.meta");
        let meta = read_key_values(&meta_path)?;
        let get = |k: &str| -> Result<&str> {
            meta.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::parse(&meta_path, 0, format!("missing key `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::parse(&meta_path, 0, format!("{k}: {e}")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse::<u64>()
                .map_err(|e| Error::parse(&meta_path, 0, format!("{k}: {e}")))
        };
        let floats = |k: &str| -> Result<Vec<f64>> {
            split_floats(get(k)?).map_err(|e| Error::parse(&meta_path, 0, format!("{k}: {e}")))
        };
        if get("format")? != WORLD_FORMAT {
            return Err(Error::parse(&meta_path, 0, "unsupported world format"));
        }
        let k = int("latent_dim")? as usize;
        let d = int("embedding_dim")? as usize;
        let feature_map_seed = int("feature_map_seed")?;
        let fingerprint_seed = int("fingerprint_seed")?;

        let csv_path = dir.join("world.csv");
        let text = fs::read_to_string(&csv_path)?;
        let mut mixtures: BTreeMap<String, MixtureRows> = BTreeMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 + 2 * k {
                return Err(Error::parse(&csv_path, i + 1, "wrong field count"));
            }
            let nums = f[2..]
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(&csv_path, i + 1, e.to_string()))?;
            let e = mixtures.entry(f[0].to_string()).or_default();
            e.0.push(nums[0]);
            e.1.push(nums[1..1 + k].to_vec());
            e.2.push(nums[1 + k..].to_vec());
        }
        let mut take = |name: &str| -> Result<Generator> {
            let (w, m, v) = mixtures
                .remove(name)
                .ok_or_else(|| Error::parse(&csv_path, 0, format!("missing mixture `{name}`")))?;
            Generator::new(w, m, v)
        };
        let initial = take("initial")?;
        let reference_mixture = take("reference")?;

        Ok(WorldSpec {
            seed: int("seed")?,
            z_star: floats("z_star")?,
            scale: num("scale")?,
            noise_sd: num("noise_sd")?,
            sa_direction: floats("sa_direction")?,
            feature_map_seed,
            fingerprint_seed,
            initial,
            reference_mixture,
            calibration: Calibration {
                samples: int("calibration.samples")? as usize,
                stable_rate: num("calibration.stable_rate")?,
                sa_mean: num("calibration.sa_mean")?,
                invalid_rate: num("calibration.invalid_rate")?,
                sa_rotation: num("calibration.sa_rotation")?,
            },
            space: FeatureSpace::new(feature_map_seed, fingerprint_seed, k, d),
            reference: ReferenceSet::default(),
        })
    }
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl WorldBundle {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.world.save(dir)?;
        self.pretrain.write_csv(&dir.join("pretrain.csv"))?;
        self.holdout.write_csv(&dir.join("holdout.csv"))?;
        self.pool.write_csv(&dir.join("pool.csv"))?;
        Ok(())
    }
}

/// Read a dataset whose embeddings are rebuilt from `world`'s feature maps.
pub fn read_dataset(world: &WorldSpec, path: &Path) -> Result<Dataset> {
    Dataset::read_csv(path, |id, latent, origin| {
        world.candidate(id, latent, origin)
    })
}

/// Load a world directory written by [`WorldBundle::save`].
pub fn load_bundle(dir: &Path) -> Result<WorldBundle> {
    let mut world = WorldSpec::load(dir)?;
    let pretrain = read_dataset(&world, &dir.join("pretrain.csv"))?;
    world.reference = ReferenceSet::new(pretrain.iter().map(|r| r.candidate.fingerprint).collect());
    let holdout = read_dataset(&world, &dir.join("holdout.csv"))?;
    let pool_path = dir.join("pool.csv");
    let pool = if pool_path.exists() {
        read_dataset(&world, &pool_path)?
    } else {
        Dataset::new()
    };
    Ok(WorldBundle {
        world,
        pretrain,
        holdout,
        pool,
    })
}
