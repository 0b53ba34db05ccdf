//! Seeded bootstrap of a detection rate. Iterations are split into fixed
//! chunks, each driven by its own ChaCha stream, and chunk outputs are merged
//! in chunk order, so results are bit-identical however the chunks are
//! scheduled across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNKS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStats {
    pub mean: f64,
    pub stdev: f64,
    pub iterations: u32,
    pub seed: u64,
}

/// Resamples n-with-replacement `iterations` times and reports the mean and
/// sample stdev of the resampled rates.
pub fn bootstrap_rate(detections: &[bool], iterations: u32, seed: u64) -> BootstrapStats {
    assert!(!detections.is_empty(), "bootstrap needs a non-empty sample");
    assert!(iterations >= 1);
    let n = detections.len();
    let chunks = CHUNKS.min(iterations);
    let base = iterations / chunks;
    let extra = iterations % chunks;

    let rates: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64 + 1);
            let iters = base + if chunk < extra { 1 } else { 0 };
            let mut out = Vec::with_capacity(iters as usize);
            for _ in 0..iters {
                let mut hits = 0usize;
                for _ in 0..n {
                    if detections[rng.gen_range(0..n)] {
                        hits += 1;
                    }
                }
                out.push(hits as f64 / n as f64);
            }
            out
        })
        .collect::<Vec<Vec<f64>>>()
        .concat();

    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let stdev = if rates.len() < 2 {
        0.0
    } else {
        (rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (rates.len() - 1) as f64)
            .sqrt()
    };
    BootstrapStats {
        mean,
        stdev,
        iterations,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_true_sample_has_unit_mean_and_zero_spread() {
        let stats = bootstrap_rate(&[true; 50], 2000, 7);
        assert_eq!(stats.mean, 1.0);
        assert_eq!(stats.stdev, 0.0);
    }

    #[test]
    fn spread_matches_analytic_binomial_stdev() {
        // 173 of 242 true: p = 0.7149; analytic stdev sqrt(p(1-p)/n) = 0.0290.
        let mut sample = vec![true; 173];
        sample.extend(vec![false; 69]);
        let stats = bootstrap_rate(&sample, 10_000, 1337);
        let p: f64 = 173.0 / 242.0;
        let analytic = (p * (1.0 - p) / 242.0).sqrt();
        assert!(
            ((stats.stdev - analytic) / analytic).abs() < 0.15,
            "stdev {} vs analytic {analytic}",
            stats.stdev
        );
        assert!((stats.mean - p).abs() < 0.01);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut sample = vec![true; 30];
        sample.extend(vec![false; 20]);
        let a = bootstrap_rate(&sample, 5000, 99);
        let b = bootstrap_rate(&sample, 5000, 99);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stdev.to_bits(), b.stdev.to_bits());
        let c = bootstrap_rate(&sample, 5000, 100);
        assert_ne!(a.mean.to_bits(), c.mean.to_bits());
    }
}
