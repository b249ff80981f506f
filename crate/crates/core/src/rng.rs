//! Counter-based random streams.
//!
//! Every path owns two ChaCha8 streams keyed by `(seed, path)`: one for the
//! Brownian increments and one for auxiliary uniforms. Any path can be
//! regenerated in isolation, which is what makes results independent of the
//! worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Raw stream `index` under master `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    #[default]
    Gaussian,
    /// All increments are zero. Used to exercise degenerate paths.
    Zero,
}

pub struct PathRng {
    normals: ChaCha8Rng,
    uniforms: ChaCha8Rng,
    noise: Noise,
}

impl PathRng {
    pub fn new(seed: u64, path: u64, noise: Noise) -> Self {
        Self {
            normals: stream(seed, 2 * path),
            uniforms: stream(seed, 2 * path + 1),
            noise,
        }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        match self.noise {
            Noise::Gaussian => self.normals.sample(StandardNormal),
            Noise::Zero => 0.0,
        }
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.uniforms.gen::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = PathRng::new(7, 3, Noise::Gaussian);
        let mut b = PathRng::new(7, 3, Noise::Gaussian);
        let mut c = PathRng::new(7, 4, Noise::Gaussian);
        let xa: Vec<f64> = (0..16).map(|_| a.normal()).collect();
        let xb: Vec<f64> = (0..16).map(|_| b.normal()).collect();
        let xc: Vec<f64> = (0..16).map(|_| c.normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn uniforms_do_not_shift_normals() {
        let mut a = PathRng::new(1, 0, Noise::Gaussian);
        let mut b = PathRng::new(1, 0, Noise::Gaussian);
        let _ = b.uniform();
        assert_eq!(a.normal(), b.normal());
    }
}
