//! Deterministic random substreams.
//!
//! Every random draw in a run comes from a stream identified by a path of
//! integer tags below the run seed, e.g. `(seed, STAGE, k, CHAIN, l)`. A path
//! is hashed into a 64-bit key with the SplitMix64 finalizer and the key seeds
//! a ChaCha8 generator. Which thread happens to evaluate chain `l` therefore has
//! no influence on the numbers it sees, and serial and parallel runs agree bit
//! for bit.
//!
//! Draw order within a stream is part of the reproducibility contract:
//! a multivariate normal draw consumes `d` standard normals in coordinate
//! order, and a Metropolis step consumes one uniform only when the proposal
//! has finite target density.

use rand::RngCore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

/// Generator type handed out by [`StreamKey::rng`].
pub type StreamRng = ChaCha8Rng;

pub const TAG_INIT: u64 = 0x494e_4954;
pub const TAG_STAGE: u64 = 0x5354_4745;
pub const TAG_RESAMPLE: u64 = 0x5253_4d50;
pub const TAG_CHAIN: u64 = 0x4348_4e53;
pub const TAG_REPLICATE: u64 = 0x5245_504c;
pub const TAG_SEQUENCE: u64 = 0x5345_5155;

/// SplitMix64 output function; a bijection on `u64`.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Position in the tree of substreams below a run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self(splitmix64(seed))
    }

    /// Child stream for `tag`. For a fixed parent, distinct tags give distinct keys.
    #[inline]
    pub fn child(self, tag: u64) -> Self {
        Self(splitmix64(self.0 ^ splitmix64(tag)))
    }

    pub fn key(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Seed of replicate `index` derived from a base seed. Distinct for distinct indices.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    StreamKey::new(base).child(tag).child(index).key()
}

/// One standard normal variate in the scalar type.
#[inline]
pub fn standard_normal<T: Real>(rng: &mut dyn RngCore) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z)
}

/// Uniform variate on `[0, 1)`.
#[inline]
pub fn uniform<T: Real>(rng: &mut dyn RngCore) -> T {
    let u: f64 = rng.random();
    T::lit(u)
}
