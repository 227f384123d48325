//! Synthetic design space: generator, feature maps, cheap scores and the
//! expensive strain oracle.

mod features;
pub mod generator;
mod similarity;
pub mod world;

pub use features::{FeatureMap, FeatureSpace, FingerprintMap, EMBEDDING_DIM, FINGERPRINT_BITS};
pub use generator::{
    fine_tune, kmeans, sample_candidates, validity_check, FineTuneParams, Generator, IdAllocator,
    VARIANCE_FLOOR,
};
pub use similarity::{novelty_score, tanimoto, ReferenceSet};
pub use world::{
    load_bundle, make_world, read_dataset, Calibration, LatencyModel, WorldBundle, WorldParams,
    WorldSpec,
};
