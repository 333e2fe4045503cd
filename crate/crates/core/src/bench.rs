//! Timing of the sort-based and randomized-pivot simplex projections.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::simplex::{project_to_simplex, project_to_simplex_pivot, ScoreVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dim: usize,
    pub sort_median: Duration,
    pub pivot_median: Duration,
    /// Largest elementwise difference between the two outputs over all
    /// repetitions.
    pub max_abs_diff: f64,
}

impl BenchRow {
    /// `pivot / sort` wall-time ratio.
    pub fn ratio(&self) -> f64 {
        self.pivot_median.as_secs_f64() / self.sort_median.as_secs_f64().max(f64::MIN_POSITIVE)
    }
}

fn median(mut times: Vec<Duration>) -> Duration {
    times.sort_unstable();
    times[times.len() / 2]
}

/// Projects `repetitions` Gaussian vectors of each dimension with both
/// routes, recording median wall-times and the worst disagreement.
pub fn projection_bench(dims: &[usize], repetitions: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidConfig("dimensions must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let mut sort_times = Vec::with_capacity(repetitions);
        let mut pivot_times = Vec::with_capacity(repetitions);
        let mut max_abs_diff = 0.0_f64;
        for rep in 0..repetitions {
            let v: Vec<f64> = StandardNormal.sample_iter(&mut rng).take(dim).collect();
            let v = ScoreVector::new(v)?;

            let start = Instant::now();
            let sorted = project_to_simplex(&v);
            sort_times.push(start.elapsed());

            let start = Instant::now();
            let pivoted = project_to_simplex_pivot(&v, seed.wrapping_add(rep as u64));
            pivot_times.push(start.elapsed());

            let diff = sorted
                .iter()
                .zip(pivoted.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_abs_diff = max_abs_diff.max(diff);
        }
        rows.push(BenchRow {
            dim,
            sort_median: median(sort_times),
            pivot_median: median(pivot_times),
            max_abs_diff,
        });
    }
    Ok(rows)
}
