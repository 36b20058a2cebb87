//! Deterministic random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream keyed by the
//! master seed plus a purpose label and up to two indices. Streams never share
//! state, so work can be split across threads in any order and still produce
//! bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    ClusterPositions = 1,
    ClusterGains = 2,
    DepartureField = 3,
    ArrivalField = 4,
    MapSample = 5,
    Victim = 6,
    Calibration = 7,
    Receivers = 8,
    Analysis = 9,
    Fingerprint = 10,
    Mitigation = 11,
    Scenario = 12,
    Test = 255,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(seed, purpose, a, b)`.
pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = splitmix(splitmix(splitmix(purpose as u64) ^ a) ^ b.rotate_left(17));
    rng.set_stream(id);
    rng
}

/// Derives a child seed, e.g. one scenario seed per sweep point.
pub fn derive_seed(seed: u64, purpose: Purpose, a: u64) -> u64 {
    splitmix(seed ^ splitmix((purpose as u64) << 56 ^ a))
}
