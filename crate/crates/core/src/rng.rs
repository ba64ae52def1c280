//! Deterministic random substreams.
//!
//! Every frame is addressed by `(master seed, frame index)`. Each random
//! component of a frame draws from its own ChaCha stream, so changing one
//! component (say the CSI error level) leaves every other draw untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Activity = 1,
    Channel = 2,
    ChannelError = 3,
    Noise = 4,
    Data = 5,
    DataNoise = 6,
}

/// Address of one frame's randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameSeed {
    pub master: u64,
    pub frame: u64,
}

impl FrameSeed {
    pub fn new(master: u64, frame: u64) -> Self {
        Self { master, frame }
    }

    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.frame.to_le_bytes());
        key[16..24].copy_from_slice(b"fsra-rng");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream as u64);
        rng
    }
}

/// Derive an unrelated master seed, e.g. for validation frames that must not
/// overlap with the evaluation frames of the same run.
pub fn derive_master(master: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
