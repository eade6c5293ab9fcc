//! Seed handling.
//!
//! Every random draw comes from ChaCha8 seeded with the run seed. Independent
//! consumers use separate ChaCha streams of that seed, so results do not
//! depend on the order work is scheduled in:
//!
//! * synthetic training sample `i` uses stream `i`, test sample `i` uses
//!   stream `2^40 + i`;
//! * parameter initialisation uses stream `2^41`;
//! * minibatch shuffling uses stream `2^41 + 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TEST_STREAM_OFFSET: u64 = 1 << 40;
pub const INIT_STREAM: u64 = 1 << 41;
pub const SHUFFLE_STREAM: u64 = (1 << 41) + 1;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
