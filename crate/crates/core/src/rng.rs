//! Seeded random streams.
//!
//! Every random draw in the simulator comes from a ChaCha stream whose seed
//! is derived from a base seed, a purpose tag and an index, so independent
//! pieces of a trial never share state.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for derived streams.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Scenario = 1,
    Frame = 2,
    UserNoise = 3,
    SensingNoise = 4,
    Attack = 5,
    Baseline = 6,
    PrecoderInit = 7,
    Trial = 8,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    splitmix(splitmix(splitmix(base) ^ (stream as u64)) ^ index)
}

pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn stream(base: u64, stream: Stream, index: u64) -> SimRng {
    rng_from(derive_seed(base, stream, index))
}

/// One draw from CN(0, var).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Vector of i.i.d. CN(0, var) entries.
pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, var: f64) -> DVector<Complex64> {
    DVector::from_fn(len, |_, _| complex_normal(rng, var))
}
