use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatError;
use crate::util::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapSettings {
    pub fn new(seed: u64) -> Self {
        BootstrapSettings {
            level: 0.95,
            replicates: 10_000,
            seed,
        }
    }

    /// Same settings with a seed derived from `tag`, so independent report
    /// cells do not share resampling streams.
    pub fn derive(&self, tag: &str) -> Self {
        BootstrapSettings {
            seed: derive_seed(self.seed, tag),
            ..*self
        }
    }

    fn validate(&self) -> Result<(), StatError> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(StatError(format!("level {} outside (0, 1)", self.level)));
        }
        if self.replicates == 0 {
            return Err(StatError("replicates must be positive".into()));
        }
        Ok(())
    }
}

/// Percentile bootstrap interval around a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl ConfidenceInterval {
    /// Interval of zero width at `point`, for values known exactly.
    pub fn exact(point: f64) -> Self {
        ConfidenceInterval {
            point,
            lo: point,
            hi: point,
            level: 0.95,
            replicates: 0,
            seed: 0,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Percentile bootstrap of the sample mean.
///
/// Replicate `r` draws from its own ChaCha stream (`seed`, stream `r`), so
/// the result is bit-identical regardless of thread scheduling.
pub fn bootstrap_ci(
    samples: &[f64],
    settings: &BootstrapSettings,
) -> Result<ConfidenceInterval, StatError> {
    if samples.is_empty() {
        return Err(StatError("cannot bootstrap an empty sample".into()));
    }
    settings.validate()?;
    if samples.iter().all(|&x| x == samples[0]) {
        // every resample mean is exactly this value; summing would only
        // add rounding noise
        return Ok(degenerate(samples[0], settings));
    }
    let n = samples.len();
    let point = samples.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = (0..settings.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(settings.seed, r);
            let mut sum = 0.0;
            for _ in 0..n {
                sum += samples[rng.random_range(0..n)];
            }
            sum / n as f64
        })
        .collect();
    Ok(interval(point, means, settings))
}

/// Cluster bootstrap: resamples whole groups (for example every judgment
/// of one image) and recomputes the pooled mean.
pub fn bootstrap_cluster_ci(
    clusters: &[Vec<f64>],
    settings: &BootstrapSettings,
) -> Result<ConfidenceInterval, StatError> {
    let clusters: Vec<&Vec<f64>> = clusters.iter().filter(|c| !c.is_empty()).collect();
    if clusters.is_empty() {
        return Err(StatError("cannot bootstrap an empty sample".into()));
    }
    settings.validate()?;
    let first = clusters[0][0];
    if clusters.iter().all(|c| c.iter().all(|&x| x == first)) {
        return Ok(degenerate(first, settings));
    }
    let sums: Vec<(f64, usize)> = clusters
        .iter()
        .map(|c| (c.iter().sum::<f64>(), c.len()))
        .collect();
    let total: usize = sums.iter().map(|s| s.1).sum();
    let point = clusters.iter().flat_map(|c| c.iter()).sum::<f64>() / total as f64;
    let k = sums.len();
    let means: Vec<f64> = (0..settings.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(settings.seed, r);
            let (mut sum, mut count) = (0.0, 0usize);
            for _ in 0..k {
                let (s, c) = sums[rng.random_range(0..k)];
                sum += s;
                count += c;
            }
            sum / count as f64
        })
        .collect();
    Ok(interval(point, means, settings))
}

fn degenerate(value: f64, settings: &BootstrapSettings) -> ConfidenceInterval {
    ConfidenceInterval {
        point: value,
        lo: value,
        hi: value,
        level: settings.level,
        replicates: settings.replicates,
        seed: settings.seed,
    }
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn interval(point: f64, mut means: Vec<f64>, settings: &BootstrapSettings) -> ConfidenceInterval {
    means.sort_unstable_by(f64::total_cmp);
    let alpha = 1.0 - settings.level;
    let lo = percentile(&means, alpha / 2.0);
    let hi = percentile(&means, 1.0 - alpha / 2.0);
    ConfidenceInterval {
        point,
        // the percentile interval can in principle exclude the point
        // estimate on tiny skewed samples; keep lo ≤ point ≤ hi
        lo: lo.min(point),
        hi: hi.max(point),
        level: settings.level,
        replicates: settings.replicates,
        seed: settings.seed,
    }
}

/// Linear interpolation between closest ranks over sorted data.
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = pos.ceil() as usize;
    if below == above {
        return sorted[below];
    }
    let w = pos - below as f64;
    sorted[below] * (1.0 - w) + sorted[above] * w
}
