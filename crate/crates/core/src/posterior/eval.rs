//! Utterance decoding in the three modes and frame-accuracy evaluation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::posterior::{
    argmax, decode_frame_arithmetic, decode_frame_baseline, decode_frame_weighted, MlpModel,
};
use crate::rng::derive_seed;
use crate::sampler::{clip_sample, draw_samples, ClipPolicy, FeatureDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Baseline,
    Arithmetic,
    Weighted,
}

impl DecodeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(DecodeMode::Baseline),
            "arithmetic" => Ok(DecodeMode::Arithmetic),
            "weighted" => Ok(DecodeMode::Weighted),
            other => Err(Error::invalid(format!("unknown decode mode '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecodeMode::Baseline => "baseline",
            DecodeMode::Arithmetic => "arithmetic",
            DecodeMode::Weighted => "weighted",
        }
    }
}

/// One utterance of assembled features with per-frame diffuseness variances
/// and frame labels.
#[derive(Debug, Clone)]
pub struct LabeledUtterance {
    pub features: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledUtterance {
    pub fn validate(&self) -> Result<()> {
        let t = self.features.len();
        if self.variances.len() != t || self.labels.len() != t {
            return Err(Error::dimension(format!(
                "utterance lengths differ: {t} features, {} variances, {} labels",
                self.variances.len(),
                self.labels.len()
            )));
        }
        Ok(())
    }
}

/// Context implied by the model input width for a given frame width.
fn context_for(model: &MlpModel, feature_dim: usize) -> Result<usize> {
    let input = model.input_dim();
    if feature_dim == 0 || !input.is_multiple_of(feature_dim) || (input / feature_dim) % 2 != 1 {
        return Err(Error::dimension(format!(
            "model input {input} is not an odd multiple of the frame width {feature_dim}"
        )));
    }
    Ok((input / feature_dim - 1) / 2)
}

/// Decode every frame of an utterance. The per-frame sampling distribution
/// splices the frame means and variances over the model's context window;
/// only the trailing variance block of each context slot can vary.
pub fn decode_utterance(
    model: &MlpModel,
    features: &[Vec<f64>],
    variances: &[Vec<f64>],
    mode: DecodeMode,
    l_count: usize,
    seed: u64,
    clip: ClipPolicy,
) -> Result<Vec<Vec<f64>>> {
    if features.is_empty() {
        return Err(Error::invalid("empty utterance"));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::dimension("ragged feature rows"));
    }
    if variances.len() != features.len() {
        return Err(Error::dimension("variance rows != feature rows"));
    }
    let var_dim = variances.first().map_or(0, Vec::len);
    if var_dim > dim || variances.iter().any(|v| v.len() != var_dim) {
        return Err(Error::dimension("bad variance width"));
    }
    let context = context_for(model, dim)?;

    // full-width variance rows: zeros outside the trailing block
    let full_var: Vec<Vec<f64>> = variances
        .iter()
        .map(|v| {
            let mut row = vec![0.0; dim];
            row[dim - var_dim..].copy_from_slice(v);
            row
        })
        .collect();
    let spliced_mean = crate::features::splice(features, context);
    let spliced_var = crate::features::splice(&full_var, context);

    (0..features.len())
        .map(|t| match mode {
            DecodeMode::Baseline => decode_frame_baseline(model, &spliced_mean[t]),
            _ => {
                let dist =
                    FeatureDistribution::new(spliced_mean[t].clone(), spliced_var[t].clone())?;
                let mut samples = draw_samples(&dist, l_count, seed, t)?;
                if !matches!(clip, ClipPolicy::None) {
                    for s in samples.samples.iter_mut() {
                        for chunk in s.chunks_mut(dim) {
                            clip_sample(chunk, var_dim, clip);
                        }
                    }
                }
                match mode {
                    DecodeMode::Arithmetic => decode_frame_arithmetic(model, &samples),
                    DecodeMode::Weighted => decode_frame_weighted(model, &samples),
                    DecodeMode::Baseline => unreachable!(),
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UtteranceAccuracy {
    pub frames: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Frame classification accuracy of one decode mode, plus margin statistics
/// of the decoded posteriors.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AccuracyReport {
    pub mode: String,
    pub num_samples: usize,
    pub seed: u64,
    pub total_frames: usize,
    pub correct_frames: usize,
    pub accuracy: f64,
    pub margin_mean: f64,
    pub margin_min: f64,
    pub margin_max: f64,
    pub per_utterance: Vec<UtteranceAccuracy>,
}

fn top_margin(p: &[f64]) -> f64 {
    let g = argmax(p);
    let runner_up = p
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != g)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    p[g] - runner_up
}

/// Decode all utterances in a mode and evaluate frame accuracy. Utterances
/// are processed in parallel; utterance `u` draws its samples from the
/// derived seed `derive_seed(seed, u)` regardless of scheduling.
pub fn evaluate_frame_accuracy(
    model: &MlpModel,
    utterances: &[LabeledUtterance],
    mode: DecodeMode,
    l_count: usize,
    seed: u64,
    clip: ClipPolicy,
) -> Result<AccuracyReport> {
    if utterances.is_empty() {
        return Err(Error::invalid("no utterances"));
    }
    for u in utterances {
        u.validate()?;
    }
    let decoded: Vec<(UtteranceAccuracy, Vec<f64>)> = utterances
        .par_iter()
        .enumerate()
        .map(|(u, utt)| {
            let posteriors = decode_utterance(
                model,
                &utt.features,
                &utt.variances,
                mode,
                l_count,
                derive_seed(seed, u as u64),
                clip,
            )?;
            let correct = posteriors
                .iter()
                .zip(utt.labels.iter())
                .filter(|(p, &y)| argmax(p) == y)
                .count();
            let margins: Vec<f64> = posteriors.iter().map(|p| top_margin(p)).collect();
            Ok((
                UtteranceAccuracy {
                    frames: utt.labels.len(),
                    correct,
                    accuracy: correct as f64 / utt.labels.len() as f64,
                },
                margins,
            ))
        })
        .collect::<Result<_>>()?;

    let total_frames: usize = decoded.iter().map(|(a, _)| a.frames).sum();
    let correct_frames: usize = decoded.iter().map(|(a, _)| a.correct).sum();
    let all_margins: Vec<f64> = decoded.iter().flat_map(|(_, m)| m.iter().copied()).collect();
    let margin_mean = all_margins.iter().sum::<f64>() / all_margins.len() as f64;
    Ok(AccuracyReport {
        mode: mode.name().to_string(),
        num_samples: l_count,
        seed,
        total_frames,
        correct_frames,
        accuracy: correct_frames as f64 / total_frames as f64,
        margin_mean,
        margin_min: all_margins.iter().cloned().fold(f64::INFINITY, f64::min),
        margin_max: all_margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        per_utterance: decoded.into_iter().map(|(a, _)| a).collect(),
    })
}

/// CSV rendering of a set of reports, one row per mode.
pub fn reports_to_csv(reports: &[AccuracyReport]) -> String {
    let mut out = String::from(
        "mode,num_samples,seed,total_frames,correct_frames,accuracy,margin_mean,margin_min,margin_max\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.mode,
            r.num_samples,
            r.seed,
            r.total_frames,
            r.correct_frames,
            r.accuracy,
            r.margin_mean,
            r.margin_min,
            r.margin_max
        ));
    }
    out
}
