//! Counter-based random streams.
//!
//! Every random draw in a run is determined by (seed, walker id, step,
//! purpose), never by thread count or crowd assignment, so runs with
//! different thread counts produce bitwise-identical trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream families within one (walker, step).
#[derive(Debug, Clone, Copy)]
pub enum StreamPurpose {
    Sweep,
    Branch,
    Init,
    Measure,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Sweep => 0x53_57_45_45_50,
            StreamPurpose::Branch => 0x42_52_41_4e,
            StreamPurpose::Init => 0x49_4e_49_54,
            StreamPurpose::Measure => 0x4d_45_41_53,
        }
    }
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The stream for one (walker, step, purpose) triple.
pub fn stream(seed: u64, walker_id: u64, step: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ walker_id.wrapping_mul(0xA24B_AED4_963E_E407));
    h = splitmix64(h ^ step.wrapping_mul(0x9FB2_1C65_1E98_DF25));
    h = splitmix64(h ^ purpose.tag());
    ChaCha8Rng::seed_from_u64(h)
}
