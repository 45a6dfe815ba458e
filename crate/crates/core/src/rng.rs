//! Seeded random streams.
//!
//! Every stochastic component draws from an MT19937-64 generator. Streams are
//! split from one master seed by a fixed label (and an optional index, e.g. a
//! fold number) so that modules never share a sequence and a run is fully
//! reproducible from its master seed.

pub use rand_mt::Mt64;

/// Stream labels used by the training pipeline.
pub mod labels {
    pub const STRUCTURE: &str = "structure";
    pub const TUNER: &str = "tuner";
    pub const SPLITS: &str = "splits";
    pub const ENSEMBLE: &str = "ensemble";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for the stream `(label, index)` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(label)) ^ splitmix64(index.wrapping_add(1)))
}

/// A generator seeded directly (no label mixing).
pub fn seeded(seed: u64) -> Mt64 {
    Mt64::new(seed)
}

/// Stream `label` split from `master`.
pub fn stream(master: u64, label: &str) -> Mt64 {
    Mt64::new(derive_seed(master, label, 0))
}

/// Stream `label` number `index` split from `master`.
pub fn indexed_stream(master: u64, label: &str, index: u64) -> Mt64 {
    Mt64::new(derive_seed(master, label, index))
}
