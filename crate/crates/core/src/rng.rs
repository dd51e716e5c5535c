//! Hierarchical, order-independent random streams.
//!
//! Every random quantity in the simulator is drawn from a stream addressed by
//! a path such as `(seed) / large-scale #12 / record #7 / downlink UE 0`.
//! Streams depend only on their path, so results do not change with the
//! order in which realizations are evaluated or with the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named stream domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Tag {
    LargeScale = 1,
    UePosition,
    LinkDirect,
    LinkBsRis,
    LinkRisUe,
    SmallScale,
    PilotNoise,
    Downlink,
    Genie,
    Record,
    Phases,
    Bootstrap,
    Split,
    Training,
    Init,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    path: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: splitmix64(seed ^ 0x5EED_0F_5EED),
        }
    }

    pub fn child(self, tag: Tag, index: u64) -> Self {
        let t = splitmix64(self.path ^ (tag as u64).wrapping_mul(0xA076_1D64_78BD_642F));
        Self {
            seed: self.seed,
            path: splitmix64(t ^ index.wrapping_mul(0xE703_7ED1_A0B4_28DB)),
        }
    }

    pub fn seed(self) -> u64 {
        self.seed
    }

    /// A 64-bit digest of the full path, usable as a seed for other APIs.
    pub fn derive_u64(self) -> u64 {
        splitmix64(self.path ^ self.seed.rotate_left(17))
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let words = [
            self.seed,
            self.path,
            splitmix64(self.seed ^ self.path),
            splitmix64(self.path.wrapping_add(0x9E37_79B9_7F4A_7C15)),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
