//! Seeded randomness.
//!
//! Every random draw is addressed by `(seed, stream, index)`:
//!
//! * the ChaCha8 key is derived from the user seed,
//! * the ChaCha stream id is the [`Stream`] tag of the consumer,
//! * the word position is `index · 2^32`.
//!
//! Sample `j` of any estimator therefore sees the same numbers no matter
//! which thread evaluates it or in what order, and growing a sample count
//! keeps the earlier samples unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{orthonormalize, Mat};
use crate::system::TorusPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    VolumeSamples = 1,
    GapPoints = 2,
    GapFrames = 3,
    DominationPoints = 4,
    BallSamples = 5,
    BallCenters = 6,
    LyapunovPoint = 7,
    GenericFrames = 8,
    Test = 99,
}

const WORDS_PER_INDEX: u128 = 1 << 32;

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(u128::from(index) * WORDS_PER_INDEX);
    rng
}

/// Haar-uniform point of `T^d`.
pub fn uniform_point(seed: u64, stream: Stream, index: u64, dim: usize) -> TorusPoint {
    let mut rng = stream_rng(seed, stream, index);
    let coords: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    TorusPoint::wrapped(&coords)
}

/// Uniformly distributed `k`-frame on the Grassmannian `Gr(k, d)`:
/// orthonormalized i.i.d. Gaussian columns.
pub fn gaussian_frame(seed: u64, stream: Stream, index: u64, d: usize, k: usize) -> Mat {
    let mut rng = stream_rng(seed, stream, index);
    loop {
        let mut g = Mat::zeros(d, k);
        for i in 0..d {
            for j in 0..k {
                g[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let q = orthonormalize(&g);
        // rank-deficient draws have probability zero but cost nothing to redo
        if q.orthonormality_defect() < 1e-12 {
            return q;
        }
    }
}
