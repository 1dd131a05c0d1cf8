//! Zipfian key sampler: `P(rank r) ∝ 1 / r^theta` over `[0, n)`, where key
//! `k` has rank `k + 1`, so low keys are hot.

use rand::Rng;

#[derive(Clone, Debug)]
pub struct ZipfSampler {
    n: u64,
    theta: f64,
    /// Normalization constant, sum of `1 / r^theta`.
    zeta: f64,
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: u64, theta: f64) -> Self {
        assert!(n >= 1, "key space must not be empty");
        assert!(theta >= 0.0 && theta.is_finite(), "bad zipf exponent {theta}");
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for r in 1..=n {
            acc += (r as f64).powf(-theta);
            cdf.push(acc);
        }
        let zeta = acc;
        for c in &mut cdf {
            *c /= zeta;
        }
        *cdf.last_mut().unwrap() = 1.0;
        Self { n, theta, zeta, cdf }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Probability of key `k`.
    pub fn pmf(&self, k: u64) -> f64 {
        ((k + 1) as f64).powf(-self.theta) / self.zeta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|c| *c <= u).min(self.n as usize - 1) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_key() {
        let z = ZipfSampler::new(1, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| z.sample(&mut rng) == 0));
    }

    #[test]
    fn uniform_when_theta_is_zero() {
        let n = 10_000u64;
        let z = ZipfSampler::new(n, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 1_000_000;
        let mut freq = vec![0u32; n as usize];
        for _ in 0..draws {
            freq[z.sample(&mut rng) as usize] += 1;
        }
        let p = 1.0 / n as f64;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        // 3 sigma per key would flag ~27 keys by chance; bound the count
        let outliers = freq
            .iter()
            .filter(|f| (**f as f64 - mean).abs() > 3.0 * sigma)
            .count();
        assert!(outliers < 60, "{outliers} keys outside 3 sigma");
        let chi2: f64 = freq.iter().map(|f| (*f as f64 - mean).powi(2) / mean).sum();
        // df = 9999, sd = sqrt(2 df) ~ 141
        assert!((chi2 - 9999.0).abs() < 5.0 * 141.4, "chi2 {chi2}");
    }

    #[test]
    fn rank_ratio_matches_pmf() {
        let z = ZipfSampler::new(10_000, 0.6);
        assert!((z.pmf(0) / z.pmf(1) - 2f64.powf(0.6)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut a, mut b) = (0u64, 0u64);
        for _ in 0..4_000_000 {
            match z.sample(&mut rng) {
                0 => a += 1,
                1 => b += 1,
                _ => {}
            }
        }
        let ratio = a as f64 / b as f64;
        assert!((ratio / 1.516 - 1.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn theta_one_is_supported() {
        let z = ZipfSampler::new(100, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hot = (0..10_000).filter(|_| z.sample(&mut rng) == 0).count();
        let expect = 10_000.0 * z.pmf(0);
        assert!((hot as f64 - expect).abs() < 5.0 * expect.sqrt());
    }
}
