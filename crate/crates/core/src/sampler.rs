//! Counter-based random streams.
//!
//! Every pixel owns a stream derived from `(seed, pixel index, lobe)`, so
//! results never depend on which thread rendered a pixel or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{Frame, Vec3, PI};

/// Which estimator a stream feeds. Diffuse and specular draw from separate
/// streams so each pass is reproducible on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Lobe {
    Diffuse = 0,
    Specular = 1,
    Aux = 2,
}

#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn for_pixel(seed: u64, pixel: u64, lobe: Lobe) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pixel.wrapping_mul(4).wrapping_add(lobe as u64));
        Sampler { rng }
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    #[inline]
    pub fn next_2d(&mut self) -> (f64, f64) {
        (self.next_f64(), self.next_f64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }
}

/// Mixes a base seed with an index (SplitMix64 finalizer) to derive child seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cosine-weighted direction about `n`; density `cos(theta) / pi`.
pub fn cosine_hemisphere(n: Vec3, u1: f64, u2: f64) -> (Vec3, f64) {
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let z = (1.0 - u1).max(0.0).sqrt();
    let local = Vec3::new(r * phi.cos(), r * phi.sin(), z);
    (Frame::from_normal(n).to_world(local), z / PI)
}

/// Uniform direction on the hemisphere about `n`; density `1 / (2 pi)`.
pub fn uniform_hemisphere(n: Vec3, u1: f64, u2: f64) -> (Vec3, f64) {
    let z = u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let local = Vec3::new(r * phi.cos(), r * phi.sin(), z);
    (Frame::from_normal(n).to_world(local), 0.5 / PI)
}
