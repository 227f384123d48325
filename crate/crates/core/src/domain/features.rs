use crate::dataset::{Candidate, Fingerprint, Origin};
use crate::error::{Error, Result};
use crate::rng;

pub const EMBEDDING_DIM: usize = 38;
pub const FINGERPRINT_BITS: usize = 64;

/// Frozen `tanh(A z + b)` map from latent space to the embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    k: usize,
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FeatureMap {
    /// `A` has i.i.d. `N(0, 1/k)` entries and `b` has `N(0, 0.3^2)` entries,
    /// drawn in row-major order from the `feature-map` stream.
    pub fn new(seed: u64, k: usize, d: usize) -> Self {
        let mut r = rng::named(seed, "feature-map");
        let scale = 1.0 / (k as f64).sqrt();
        let a = (0..d * k).map(|_| rng::normal(&mut r) * scale).collect();
        let b = (0..d).map(|_| rng::normal(&mut r) * 0.3).collect();
        FeatureMap { k, d, a, b }
    }

    pub fn latent_dim(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub fn featurize(&self, latent: &[f64]) -> Result<Vec<f64>> {
        if latent.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                got: latent.len(),
            });
        }
        Ok((0..self.d)
            .map(|i| {
                let row = &self.a[i * self.k..(i + 1) * self.k];
                let z: f64 = row.iter().zip(latent).map(|(a, x)| a * x).sum();
                (z + self.b[i]).tanh()
            })
            .collect())
    }
}

/// Sign pattern of the embedding against 64 frozen random hyperplanes.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerprintMap {
    d: usize,
    planes: Vec<f64>,
}

impl FingerprintMap {
    /// Hyperplane normals have i.i.d. standard normal entries drawn in
    /// row-major order from the `fingerprint` stream.
    pub fn new(seed: u64, d: usize) -> Self {
        let mut r = rng::named(seed, "fingerprint");
        let planes = (0..FINGERPRINT_BITS * d)
            .map(|_| rng::normal(&mut r))
            .collect();
        FingerprintMap { d, planes }
    }

    pub fn fingerprint(&self, embedding: &[f64]) -> Fingerprint {
        let mut bits = 0u64;
        for j in 0..FINGERPRINT_BITS {
            let h = &self.planes[j * self.d..(j + 1) * self.d];
            let dot: f64 = h.iter().zip(embedding).map(|(a, b)| a * b).sum();
            if dot > 0.0 {
                bits |= 1 << j;
            }
        }
        Fingerprint(bits)
    }
}

/// Latent -> embedding -> fingerprint pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSpace {
    pub features: FeatureMap,
    pub fingerprints: FingerprintMap,
}

impl FeatureSpace {
    pub fn new(feature_map_seed: u64, fingerprint_seed: u64, k: usize, d: usize) -> Self {
        FeatureSpace {
            features: FeatureMap::new(feature_map_seed, k, d),
            fingerprints: FingerprintMap::new(fingerprint_seed, d),
        }
    }

    pub fn candidate(&self, id: u64, latent: Vec<f64>, origin: Origin) -> Result<Candidate> {
        let embedding = self.features.featurize(&latent)?;
        let fingerprint = self.fingerprints.fingerprint(&embedding);
        Ok(Candidate {
            id,
            latent,
            embedding,
            fingerprint,
            origin,
        })
    }
}
