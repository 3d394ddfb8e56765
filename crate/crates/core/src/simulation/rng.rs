use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Reproducible random stream: one per Monte Carlo path.
///
/// Identical `(seed, stream_id)` pairs replay identical draws; distinct stream ids
/// select disjoint ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Derives an independent seed for a named sub-experiment (splitmix64 finalizer).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const INVERSION_LIMIT: f64 = 30.0;

/// Poisson sampler: exact inversion below intensity 30, PTRS above.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    lambda: f64,
    p0: f64,
    large: Option<rand_distr::Poisson<f64>>,
}

impl PoissonSampler {
    pub fn new(lambda: f64) -> Self {
        assert!(lambda >= 0.0 && lambda.is_finite(), "Poisson intensity must be finite and >= 0");
        let large = (lambda >= INVERSION_LIMIT)
            .then(|| rand_distr::Poisson::new(lambda).expect("positive intensity"));
        Self { lambda, p0: (-lambda).exp(), large }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> u32 {
        if self.lambda == 0.0 {
            return 0;
        }
        if let Some(d) = &self.large {
            return d.sample(rng) as u32;
        }
        let u = rng.uniform();
        let (mut k, mut p) = (0u32, self.p0);
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= self.lambda / k as f64;
            let next = cdf + p;
            if next == cdf {
                // CDF saturated in floating point.
                break;
            }
            cdf = next;
        }
        k
    }
}
