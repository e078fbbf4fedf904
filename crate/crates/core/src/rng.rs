//! Counter-based stream derivation.
//!
//! Every random stream is a ChaCha8 generator keyed by the master seed and
//! positioned on the stream `(experiment << 32) | replica`. Any replica of
//! any experiment can therefore be regenerated on its own, in any order and
//! on any thread, and always yields the same draws.

use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator used everywhere in the crate.
pub type Stream = ChaCha8Rng;

/// Derives independent per-replica streams from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeder {
    pub master: u64,
    pub experiment: u32,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seeder {
    pub fn new(master: u64) -> Self {
        Self { master, experiment: 0 }
    }

    /// Same master seed, different experiment index.
    pub fn experiment(self, experiment: u32) -> Self {
        Self { experiment, ..self }
    }

    /// The `k`-th derived seeder, for an estimator that needs several
    /// independent families of streams. Offsets are `k << 24` experiments.
    pub fn derive(self, k: u32) -> Self {
        self.experiment(self.experiment.wrapping_add(k << 24))
    }

    pub fn stream(&self, replica: u32) -> Stream {
        let mut state = self.master;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((self.experiment as u64) << 32) | replica as u64);
        rng
    }
}

/// Samples per chunk in [`chunked`].
pub const CHUNK: usize = 1 << 15;

/// Splits `n` samples into fixed chunks of [`CHUNK`]; chunk `c` runs on
/// stream `c`. Results come back in chunk order whatever the thread count.
pub fn chunked<T: Send>(n: usize, seeder: &Seeder, f: impl Fn(&mut Stream, usize) -> T + Sync) -> Vec<T> {
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| f(&mut seeder.stream(c as u32), CHUNK.min(n - c * CHUNK)))
        .collect()
}
