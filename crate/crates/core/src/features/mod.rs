//! Observation assembly: beamformed logmelspec, per-utterance MVN, delta
//! coefficients, diffuseness append and context splicing.
//!
//! The assembled frame layout is `[logmelspec 24 | delta 24 | diffuseness
//! mean 24]`, 72 dimensions. With the default +/-5 context the spliced
//! classifier input is 792-dimensional.

pub mod fileio;

use crate::diffuseness::{extract_diffuseness, DiffusenessDistribution, DiffusenessParams};
use crate::error::{Error, Result};
use crate::sim::{channel_delays, delay_signal, Doa, MultichannelSignal};
use crate::stft::{stft, stft_channel, Spectrogram, StftConfig};

/// Mel coefficients per branch.
pub const N_MEL: usize = 24;
/// Assembled observation width.
pub const FEATURE_DIM: usize = 3 * N_MEL;
/// Default splicing context (frames on each side).
pub const DEFAULT_CONTEXT: usize = 5;

/// Relative floor applied to mel powers before the log.
const LOG_FLOOR_REL: f64 = 1e-10;

/// Delay-and-sum core: undo each channel's arrival delay and average.
/// A single channel passes through unchanged.
pub fn beamform_das_channels(samples: &[Vec<f64>], delays: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("no channels"));
    }
    if samples.len() != delays.len() {
        return Err(Error::dimension("one delay per channel required"));
    }
    if samples.len() == 1 {
        return Ok(samples[0].clone());
    }
    let n = samples[0].len();
    let mut out = vec![0.0; n];
    for (ch, &d) in samples.iter().zip(delays.iter()) {
        let aligned = delay_signal(ch, -d);
        for (acc, v) in out.iter_mut().zip(aligned.iter()) {
            *acc += v;
        }
    }
    let scale = 1.0 / samples.len() as f64;
    for v in out.iter_mut() {
        *v *= scale;
    }
    Ok(out)
}

/// Delay-and-sum beamformer: aligns every channel on the look direction
/// with fractional delays and averages. Unit gain for a plane wave from the
/// look direction, up to interpolation error.
pub fn beamform_das(signal: &MultichannelSignal, look: Doa) -> Result<Vec<f64>> {
    if !look.is_finite() {
        return Err(Error::invalid("look direction must be finite"));
    }
    let delays = channel_delays(&signal.geometry, look, signal.sample_rate);
    beamform_das_channels(&signal.samples, &delays)
}

/// Natural log of the mel-weighted power spectrum, floored relative to the
/// utterance's mean mel power.
pub fn logmelspec(spec: &Spectrogram, fb: &crate::diffuseness::MelFilterbank) -> Vec<Vec<f64>> {
    let mel_power: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|frame| {
            let power: Vec<f64> = frame.iter().map(|v| v.norm_sqr()).collect();
            fb.apply(&power)
        })
        .collect();
    let cells = (mel_power.len() * fb.n_filters()).max(1);
    let mean_power: f64 = mel_power.iter().flatten().sum::<f64>() / cells as f64;
    let floor = if mean_power > 0.0 {
        LOG_FLOOR_REL * mean_power
    } else {
        f64::MIN_POSITIVE
    };
    mel_power
        .into_iter()
        .map(|row| row.into_iter().map(|p| p.max(floor).ln()).collect())
        .collect()
}

/// Per-dimension mean/std removed by [`mvn`].
#[derive(Debug, Clone, PartialEq)]
pub struct MvnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-utterance mean and variance normalization. Constant dimensions map
/// to zero instead of dividing by a vanishing deviation.
pub fn mvn(frames: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, MvnStats)> {
    let t = frames.len();
    if t < 2 {
        return Err(Error::invalid("mvn needs at least 2 frames"));
    }
    let dim = frames[0].len();
    let mut mean = vec![0.0; dim];
    for row in frames {
        if row.len() != dim {
            return Err(Error::dimension("ragged feature rows"));
        }
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= t as f64;
    }
    let mut var = vec![0.0; dim];
    let mut lo = frames[0].clone();
    let mut hi = frames[0].clone();
    for row in frames {
        for k in 0..dim {
            let d = row[k] - mean[k];
            var[k] += d * d;
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    let std: Vec<f64> = var
        .iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(v, (l, h))| if h > l { (v / t as f64).sqrt() } else { 0.0 })
        .collect();
    let normalized = frames
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, v)| {
                    if std[k] > 0.0 {
                        (v - mean[k]) / std[k]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok((normalized, MvnStats { mean, std }))
}

/// Regression delta coefficients with a +/-2 window and replicated edges:
/// `delta_t = sum_k k (x_{t+k} - x_{t-k}) / (2 sum_k k^2)`.
pub fn deltas(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t_max = frames.len();
    if t_max == 0 {
        return Vec::new();
    }
    let dim = frames[0].len();
    let norm = 2.0 * (1.0 + 4.0); // 2 * sum k^2 over k = 1..2
    let clamp = |i: isize| -> usize { i.clamp(0, t_max as isize - 1) as usize };
    (0..t_max)
        .map(|t| {
            (0..dim)
                .map(|d| {
                    let mut acc = 0.0;
                    for k in 1..=2isize {
                        let fwd = frames[clamp(t as isize + k)][d];
                        let bwd = frames[clamp(t as isize - k)][d];
                        acc += k as f64 * (fwd - bwd);
                    }
                    acc / norm
                })
                .collect()
        })
        .collect()
}

/// A single assembled observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub logmelspec: Vec<f64>,
    pub delta: Vec<f64>,
    pub diffuseness_mean: Vec<f64>,
    pub assembled: Vec<f64>,
}

/// Concatenate the three branches into 72-dim frames.
pub fn assemble(
    logmel: &[Vec<f64>],
    delta: &[Vec<f64>],
    diffuseness: &[DiffusenessDistribution],
) -> Result<Vec<FeatureFrame>> {
    if logmel.len() != delta.len() || logmel.len() != diffuseness.len() {
        return Err(Error::dimension(format!(
            "branch lengths differ: logmel {} delta {} diffuseness {}",
            logmel.len(),
            delta.len(),
            diffuseness.len()
        )));
    }
    logmel
        .iter()
        .zip(delta.iter())
        .zip(diffuseness.iter())
        .map(|((lm, dl), df)| {
            if lm.len() != N_MEL || dl.len() != N_MEL || df.mean.len() != N_MEL {
                return Err(Error::dimension("branch width must be 24"));
            }
            let mut assembled = Vec::with_capacity(FEATURE_DIM);
            assembled.extend_from_slice(lm);
            assembled.extend_from_slice(dl);
            assembled.extend_from_slice(&df.mean);
            Ok(FeatureFrame {
                logmelspec: lm.clone(),
                delta: dl.clone(),
                diffuseness_mean: df.mean.clone(),
                assembled,
            })
        })
        .collect()
}

/// Context splicing with replicated edges: row `t` is the concatenation of
/// frames `t-context ..= t+context`.
pub fn splice(frames: &[Vec<f64>], context: usize) -> Vec<Vec<f64>> {
    let t_max = frames.len();
    if t_max == 0 {
        return Vec::new();
    }
    let dim = frames[0].len();
    let clamp = |i: isize| -> usize { i.clamp(0, t_max as isize - 1) as usize };
    (0..t_max)
        .map(|t| {
            let mut row = Vec::with_capacity(dim * (2 * context + 1));
            for k in -(context as isize)..=(context as isize) {
                row.extend_from_slice(&frames[clamp(t as isize + k)]);
            }
            row
        })
        .collect()
}

/// Front-end configuration for [`extract_utterance`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndConfig {
    pub stft: StftConfig,
    pub diffuseness: DiffusenessParams,
    /// Beamformer look direction.
    pub look: Doa,
    pub context: usize,
}

impl FrontEndConfig {
    pub fn new(sample_rate: u32) -> Self {
        Self {
            stft: StftConfig::default_for(sample_rate),
            diffuseness: DiffusenessParams::default(),
            look: Doa::new(0.0, 0.0),
            context: DEFAULT_CONTEXT,
        }
    }
}

/// Features of one utterance: assembled frames, the diffuseness variances
/// that go with them, the MVN statistics and the spliced classifier input.
#[derive(Debug, Clone)]
pub struct UtteranceFeatures {
    pub frames: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub mvn_stats: MvnStats,
    pub spliced: Vec<Vec<f64>>,
}

/// Full front end: STFT -> diffuseness branch and beamformed logmelspec
/// branch -> MVN -> deltas -> assembly -> splicing.
pub fn extract_utterance(
    signal: &MultichannelSignal,
    config: &FrontEndConfig,
) -> Result<UtteranceFeatures> {
    let spectrograms = stft(signal, &config.stft)?;
    let diffuseness = extract_diffuseness(&spectrograms, &signal.geometry, &config.diffuseness)?;

    let beamformed = beamform_das(signal, config.look)?;
    let beam_spec = stft_channel(&beamformed, &config.stft)?;
    let fb = crate::diffuseness::build_mel_filterbank(
        config.stft.sample_rate,
        config.stft.dft_length,
        N_MEL,
    )?;
    let logmel_raw = logmelspec(&beam_spec, &fb);
    let (logmel, mvn_stats) = mvn(&logmel_raw)?;
    let delta = deltas(&logmel);
    let frames = assemble(&logmel, &delta, &diffuseness)?;
    let assembled: Vec<Vec<f64>> = frames.iter().map(|f| f.assembled.clone()).collect();
    let spliced = splice(&assembled, config.context);
    Ok(UtteranceFeatures {
        frames: assembled,
        variances: diffuseness.into_iter().map(|d| d.variance).collect(),
        mvn_stats,
        spliced,
    })
}
