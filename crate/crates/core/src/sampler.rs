//! Gaussian distortion model and reproducible feature sampling.
//!
//! Each feature vector carries a diagonal Gaussian `N(mean, diag(variance))`.
//! Samples are drawn through a dimension-indexed counter scheme, so the draw
//! for `(seed, frame, sample, dim)` is a pure function of those four values:
//! frames can be sampled in any order or in parallel without changing a
//! single bit of the output.

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Stream tag separating sampler draws from other consumers of a seed.
const TAG_SAMPLER: u64 = 0x5341_4D50; // "SAMP"

/// Diagonal Gaussian over one feature frame. For assembled 72-dim frames
/// only the diffuseness block (dims 48..72) carries nonzero variance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDistribution {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl FeatureDistribution {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::dimension(format!(
                "mean has {} dims, variance {}",
                mean.len(),
                variance.len()
            )));
        }
        if variance.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::invalid("variance must be finite and non-negative"));
        }
        Ok(Self { mean, variance })
    }

    /// Assemble the distribution of a 72-dim frame: deterministic logmelspec
    /// and delta blocks, `diffuseness_variance` on the trailing block.
    pub fn for_assembled_frame(mean: Vec<f64>, diffuseness_variance: &[f64]) -> Result<Self> {
        let d = mean.len();
        if diffuseness_variance.len() > d {
            return Err(Error::dimension("variance block wider than the frame"));
        }
        let mut variance = vec![0.0; d];
        variance[d - diffuseness_variance.len()..].copy_from_slice(diffuseness_variance);
        Self::new(mean, variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// L feature samples for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
    pub frame_index: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draw `l_count` samples `z = mean + sqrt(var) * g`. Zero-variance
/// dimensions reproduce the mean exactly.
pub fn draw_samples(
    dist: &FeatureDistribution,
    l_count: usize,
    seed: u64,
    frame_index: usize,
) -> Result<SampleSet> {
    if l_count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    Ok(SampleSet {
        samples: draw_samples_range(dist, 0, l_count, seed, frame_index),
        seed,
        frame_index,
    })
}

/// Samples `l_start .. l_start + l_count` of the same stream that
/// [`draw_samples`] exposes; sample `l` depends only on
/// `(seed, frame_index, l, dim)`, so large sample sets can be streamed in
/// chunks without materializing them.
pub fn draw_samples_range(
    dist: &FeatureDistribution,
    l_start: usize,
    l_count: usize,
    seed: u64,
    frame_index: usize,
) -> Vec<Vec<f64>> {
    let frame_rng = CounterRng::new(seed)
        .stream(TAG_SAMPLER)
        .stream(frame_index as u64);
    (l_start..l_start + l_count)
        .map(|l| {
            let rng = frame_rng.stream(l as u64);
            dist.mean
                .iter()
                .zip(dist.variance.iter())
                .enumerate()
                .map(|(d, (&m, &v))| {
                    if v == 0.0 {
                        m
                    } else {
                        m + v.sqrt() * rng.gaussian_at(d as u64)
                    }
                })
                .collect()
        })
        .collect()
}

/// What to do with sample values that leave the nominal feature range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClipPolicy {
    /// Pass samples through unchanged (default).
    None,
    /// Clamp the diffuseness block into `(lo, hi)`, exclusive on both ends.
    Range { lo: f64, hi: f64 },
}

impl ClipPolicy {
    /// The range policy matching a CDR cap: diffuseness stays within
    /// `(1/(1+cdr_max), 1)`.
    pub fn range_for_cdr_max(cdr_max: f64) -> Self {
        ClipPolicy::Range {
            lo: 1.0 / (1.0 + cdr_max),
            hi: 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ClipPolicy::None),
            "range" => Ok(ClipPolicy::range_for_cdr_max(crate::diffuseness::DEFAULT_CDR_MAX)),
            other => Err(Error::invalid(format!("unknown clip policy '{other}'"))),
        }
    }
}

/// Apply the clip policy to the trailing `block` dimensions of a sample.
pub fn clip_sample(sample: &mut [f64], block: usize, policy: ClipPolicy) {
    if let ClipPolicy::Range { lo, hi } = policy {
        let start = sample.len().saturating_sub(block);
        for v in sample[start..].iter_mut() {
            // keep strictly inside the open interval
            let hi_in = f64::from_bits(hi.to_bits() - 1);
            let lo_in = f64::from_bits(lo.to_bits() + 1);
            *v = v.clamp(lo_in, hi_in);
        }
    }
}
