//! Seeded random streams.
//!
//! Every random draw derives from one 64-bit seed through PCG32
//! (XSH-RR, 64-bit state, multiplier 6364136223846793005). Purposes are
//! separated by the PCG stream selector, so adding a consumer never shifts
//! the draws of another.

use rand_pcg::Pcg32;

pub const STREAM_INIT: u64 = 1;
pub const STREAM_SHUFFLE: u64 = 2;
pub const STREAM_SPLIT: u64 = 3;
pub const STREAM_GRADCHECK: u64 = 4;
pub const STREAM_SYNTHETIC: u64 = 5;
pub const STREAM_FINETUNE: u64 = 6;

pub fn stream(seed: u64, purpose: u64) -> Pcg32 {
    Pcg32::new(seed, purpose)
}
