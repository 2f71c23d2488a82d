//! Binomial confidence intervals and cell-keyed random streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Normal-approximation interval of a sample mean.
pub fn mean_interval(values: &[f64], z: f64) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = z * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Independent generator for stream `stream` of the cell identified by `key`.
pub fn cell_rng(seed: u64, key: &str, stream: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn wilson_contains_estimate_and_is_bounded() {
        for (s, n) in [(0u64, 10u64), (10, 10), (3, 1000), (500, 1000)] {
            let (lo, hi) = wilson(s, n, Z95);
            let p = s as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
        // textbook value: 5/10 -> (0.2366, 0.7634)
        let (lo, hi) = wilson(5, 10, Z95);
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
    }

    #[test]
    fn wilson_coverage() {
        let p = 0.03;
        let n = 2000u64;
        let reps = 1000;
        let mut rng = cell_rng(7, "coverage", 0);
        let mut covered = 0;
        for _ in 0..reps {
            let s = (0..n).filter(|_| rng.gen::<f64>() < p).count() as u64;
            let (lo, hi) = wilson(s, n, Z95);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        let c = covered as f64 / reps as f64;
        assert!((c - 0.95).abs() <= 0.02, "coverage {c}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = cell_rng(1, "cell", 3).gen();
        let b: u64 = cell_rng(1, "cell", 3).gen();
        let c: u64 = cell_rng(1, "cell", 4).gen();
        let d: u64 = cell_rng(1, "cell2", 3).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
