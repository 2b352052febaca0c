//! Random problem instances shared by unit tests, integration tests and the
//! Monte-Carlo oracle suite.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bussgang::OperatingPoint;
use crate::scenario::{channels_from_gains, ChannelSet};

/// `B*M x K` channels with i.i.d. `CN(0, 1)` entries.
pub fn random_instance(num_bs: usize, antennas: usize, num_ues: usize, seed: u64) -> ChannelSet {
    let delta = DMatrix::from_element(num_bs, num_ues, 1.0);
    channels_from_gains(delta, antennas, seed, 0).expect("valid instance")
}

/// Powers in `[0.2, 3]` and noise levels in `[0.3, 1.5]`.
pub fn random_point(channels: &ChannelSet, seed: u64) -> OperatingPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let powers = (0..channels.num_ues()).map(|_| rng.random_range(0.2..3.0)).collect();
    let noise = (0..channels.num_bs()).map(|_| rng.random_range(0.3..1.5)).collect();
    OperatingPoint::new(powers, noise)
}
