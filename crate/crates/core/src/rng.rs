//! Counter-based random streams.
//!
//! Every draw in the crate comes from a [`RngStream`], a pair of a master
//! seed and a stream index. The pair keys a ChaCha8 generator (seed from the
//! master, ChaCha stream id from the index), so a stream can be rebuilt
//! anywhere without replaying earlier draws. Parallel work is partitioned
//! by deriving child streams with [`RngStream::substream`]; results never
//! depend on which worker ran which child.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Root stream for a master seed.
    pub fn root(master_seed: u64) -> Self {
        Self::new(master_seed, 0)
    }

    /// Child stream `j`. Children of distinct parents or with distinct `j`
    /// get distinct indices up to 64-bit hash collisions.
    pub fn substream(&self, j: u64) -> Self {
        let mixed = splitmix64(self.stream_index ^ splitmix64(j.wrapping_mul(GOLDEN) ^ 0xA5A5_A5A5));
        Self::new(self.master_seed, mixed)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream_index);
        rng
    }
}
