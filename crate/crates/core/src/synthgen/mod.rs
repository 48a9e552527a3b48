//! Synthetic rental-market worlds with known ground truth.
//!
//! A [`WorldSpec`] describes zones, owners, residences, photo embeddings,
//! permits and review activity. [`generate_world`] turns it into the same
//! input files a real run consumes, plus `ground_truth.jsonl` holding the
//! verdict the rules give on the true (un-jittered, un-estimated) facts.
//! [`evaluate_detector`] scores a run's findings against that file.
//!
//! Every entity draws from its own RNG stream keyed by the world seed and the
//! entity id, so output does not depend on generation order or thread count.

mod eval;
mod jitter;
mod spec;
mod world;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use eval::{
    evaluate_detector, read_ground_truth, BinaryScores, ClusteringScore, EvalError, JitterEffect, Metrics,
};
pub use jitter::{jitter_coordinate, jitter_from_uniforms};
pub use spec::{CountRange, NightsRange, SentimentMix, SpecError, WorldSpec, ZoneLayout};
pub use world::{generate_world, GroundTruthRecord, World};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";
pub const METRICS_FILE: &str = "metrics.json";

/// Independent RNG stream for one entity of one world.
pub fn entity_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}
