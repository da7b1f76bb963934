//! Seed derivation.
//!
//! Every randomized routine takes an [`RngSeed`]. Child seeds are derived from a
//! parent by mixing in a stream tag and an index, so the seed of repetition `r`
//! (or tree `t`) never depends on how many siblings exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root or derived 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

/// Named streams for child seed derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Repetition = 1,
    TestSample = 2,
    TrainSample = 3,
    Calibration = 4,
    Forest = 5,
    Tree = 6,
    BaselineForest = 7,
    BaselineDraw = 8,
    Synthetic = 9,
    Transductive = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn child(self, stream: Stream, index: u64) -> RngSeed {
        let a = splitmix64(self.0 ^ splitmix64(stream as u64));
        RngSeed(splitmix64(
            a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)),
        ))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}
