//! Splittable deterministic random streams.
//!
//! An [`RngStream`] is a `(seed, stream-id)` pair. Each pair maps onto an
//! independent ChaCha8 keystream, so parallel tasks derive their own stream
//! from `(seed, task index)` and never share generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn from_seed(seed: u64) -> Self {
        RngStream::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Child stream for task `tag`. Same seed, mixed stream id.
    pub fn derive(&self, tag: u64) -> RngStream {
        let mixed = splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0xD1B5_4A32_D192_ED03)));
        RngStream {
            seed: self.seed,
            stream: mixed,
        }
    }

    pub fn derive_path(&self, path: &[u64]) -> RngStream {
        path.iter().fold(*self, |s, &t| s.derive(t))
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn identical_pairs_reproduce() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..16).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..16).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let base = RngStream::from_seed(11);
        let mut r1 = base.derive(0).rng();
        let mut r2 = base.derive(1).rng();
        let x: Vec<u64> = (0..8).map(|_| r1.next_u64()).collect();
        let y: Vec<u64> = (0..8).map(|_| r2.next_u64()).collect();
        assert_ne!(x, y);
        assert_ne!(base.derive(0), base.derive(1));
        assert_ne!(base.derive(5).derive(2), base.derive(2).derive(5));
    }

    #[test]
    fn streams_look_uncorrelated() {
        // Pearson correlation of uniform draws from neighbouring streams.
        let base = RngStream::from_seed(1);
        let n = 20_000;
        let mut r1 = base.derive(0).rng();
        let mut r2 = base.derive(1).rng();
        let xs: Vec<f64> = (0..n).map(|_| (r1.next_u64() >> 11) as f64 / (1u64 << 53) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| (r2.next_u64() >> 11) as f64 / (1u64 << 53) as f64).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>();
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho = {rho}");
    }
}
