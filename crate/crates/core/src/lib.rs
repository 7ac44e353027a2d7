//! Co-consideration networks and inductive link prediction.
//!
//! The pipeline: ingest consideration surveys and product tables, build the
//! co-consideration network (two products are linked when enough customers
//! considered both), encode product attributes into feature vectors, train a
//! graph-sampling embedding model with a link classifier, and score candidate
//! links on future markets where only product attributes are known. Network
//! structure for unseen markets is approximated by a cosine K-nearest-neighbor
//! graph over the encoded features.
//!
//! All randomized stages (edge splits, neighbor sampling, weight init,
//! minibatch order, permutation importance) draw from seeded ChaCha streams,
//! so every run is bitwise reproducible given the same seed and inputs.

pub mod encode;
pub mod importance;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod sage;
pub mod synth;
pub mod textio;

use thiserror::Error;

/// Crate-wide error type. The coarse variants map onto the CLI's exit
/// statuses: configuration problems, data validation problems, and numeric
/// failures are distinguishable by the caller.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// FNV-1a over raw bytes. Used for schema and config fingerprints; the std
/// hasher is randomized per process and useless for artifacts that must be
/// comparable across runs.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a base seed, a purpose tag, and an
/// index. Every randomized stage seeds its own generator through this, so
/// stages cannot perturb each other's streams when one of them changes how
/// much randomness it consumes.
pub fn mix_seed(base: u64, tag: &str, index: u64) -> u64 {
    splitmix64(base ^ stable_hash(tag.as_bytes()) ^ splitmix64(index))
}
