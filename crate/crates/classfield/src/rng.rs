//! Seeded counter-based random stream.
//!
//! Every draw is a pure function of (key, counter), so streams are
//! bit-reproducible across platforms and safe to fork per task.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic stream of uniform and Gaussian variates.
#[derive(Debug, Clone)]
pub struct SeedStream {
    key: u64,
    ctr: u64,
    cached_normal: Option<f64>,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            key: mix(seed ^ GOLDEN),
            ctr: 0,
            cached_normal: None,
        }
    }

    /// Fork an independent stream; `tag` distinguishes children of the same parent.
    pub fn fork(&self, tag: u64) -> Self {
        SeedStream {
            key: mix(self.key ^ mix(tag.wrapping_add(GOLDEN))),
            ctr: 0,
            cached_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix(self.key.wrapping_add(self.ctr.wrapping_mul(GOLDEN)));
        self.ctr = self.ctr.wrapping_add(1);
        v
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller; one spare variate is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
