//! `udfront decode`: per-frame posteriors for one utterance, optionally
//! scored against labels.

use std::path::{Path, PathBuf};

use clap::Parser;

use crate::commands::{write_text_atomic, SEED_TAG_DECODE};
use crate::config::ConfigBag;
use udfront_core::features::fileio::{read_labels, read_matrix, write_matrix, MatrixKind};
use udfront_core::posterior::eval::{reports_to_csv, DecodeMode};
use udfront_core::posterior::model_io::load_model;
use udfront_core::posterior::{decode_utterance, evaluate_frame_accuracy, LabeledUtterance};
use udfront_core::rng::derive_seed;
use udfront_core::sampler::ClipPolicy;
use udfront_core::{Error, Result};

#[derive(Parser, Debug)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature matrix (UDFT).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Variance matrix (UDFT); zero variance assumed when absent.
    #[arg(long)]
    variances: Option<PathBuf>,
    /// Model file (UDNN).
    #[arg(long)]
    model: Option<PathBuf>,
    /// baseline | arithmetic | weighted.
    #[arg(long)]
    mode: Option<String>,
    /// Samples per frame (ignored by baseline).
    #[arg(long)]
    num_samples: Option<usize>,
    /// Extra scale applied to the file variances before sampling.
    #[arg(long)]
    var_scale: Option<f64>,
    /// Sample clipping: none | range.
    #[arg(long)]
    clip: Option<String>,
    /// Output posterior matrix (UDFT).
    #[arg(long)]
    posteriors: Option<PathBuf>,
    /// Frame labels; enables the accuracy report.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Accuracy report JSON path.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Feature rows and matching variance rows of one utterance.
pub type UtteranceMatrices = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Read one utterance's features and (optionally scaled) variances.
pub fn load_utterance_matrices(
    features: &Path,
    variances: Option<&Path>,
    var_scale: f64,
) -> Result<UtteranceMatrices> {
    let (frames, kind) = read_matrix(features)?;
    if kind != MatrixKind::Features {
        return Err(Error::format(format!(
            "{} is not a feature matrix",
            features.display()
        )));
    }
    let vars = match variances {
        Some(path) => {
            let (mut rows, kind) = read_matrix(path)?;
            if kind != MatrixKind::Variances {
                return Err(Error::format(format!(
                    "{} is not a variance matrix",
                    path.display()
                )));
            }
            if rows.len() != frames.len() {
                return Err(Error::dimension(format!(
                    "{} variance rows for {} frames",
                    rows.len(),
                    frames.len()
                )));
            }
            for row in rows.iter_mut() {
                for v in row.iter_mut() {
                    *v *= var_scale;
                }
            }
            rows
        }
        None => vec![vec![0.0; udfront_core::features::N_MEL]; frames.len()],
    };
    Ok((frames, vars))
}

pub fn run(args: Args) -> Result<()> {
    let mut bag = ConfigBag::load(args.config.as_deref(), "decode")?;
    let features = bag
        .resolve_opt("features", args.features.map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::invalid("--features is required"))?;
    let variances =
        bag.resolve_opt("variances", args.variances.map(|p| p.display().to_string()))?;
    let model_path = bag
        .resolve_opt("model", args.model.map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::invalid("--model is required"))?;
    let mode = bag.resolve("mode", args.mode, "baseline".to_string())?;
    let num_samples = bag.resolve("num-samples", args.num_samples, 30usize)?;
    let var_scale = bag.resolve("var-scale", args.var_scale, 1.0)?;
    let clip = bag.resolve("clip", args.clip, "none".to_string())?;
    let posteriors_out =
        bag.resolve_opt("posteriors", args.posteriors.map(|p| p.display().to_string()))?;
    let labels_path = bag.resolve_opt("labels", args.labels.map(|p| p.display().to_string()))?;
    let report_out = bag.resolve_opt("report", args.report.map(|p| p.display().to_string()))?;
    let seed = bag.resolve("seed", args.seed, 0u64)?;
    print!("{}", bag.echo("decode"));

    let mode = DecodeMode::parse(&mode)?;
    let clip = ClipPolicy::parse(&clip)?;
    let model = load_model(Path::new(&model_path))?;
    let (frames, vars) = load_utterance_matrices(
        Path::new(&features),
        variances.as_deref().map(Path::new),
        var_scale,
    )?;
    let decode_seed = derive_seed(seed, SEED_TAG_DECODE);
    // same per-utterance derivation as the evaluator (utterance index 0),
    // so written posteriors and the report always agree
    let posteriors = decode_utterance(
        &model,
        &frames,
        &vars,
        mode,
        num_samples,
        derive_seed(decode_seed, 0),
        clip,
    )?;
    if let Some(out) = &posteriors_out {
        write_matrix(Path::new(out), &posteriors, MatrixKind::Posteriors)?;
    }
    if let Some(lpath) = &labels_path {
        let labels = read_labels(Path::new(lpath))?;
        if labels.len() != frames.len() {
            return Err(Error::dimension(format!(
                "{} labels for {} frames",
                labels.len(),
                frames.len()
            )));
        }
        let utterance = LabeledUtterance {
            features: frames,
            variances: vars,
            labels,
        };
        // single-utterance report; mirrors the decode above because the
        // evaluator derives the same per-utterance seed
        let report =
            evaluate_frame_accuracy(&model, &[utterance], mode, num_samples, decode_seed, clip)?;
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| Error::format(e.to_string()))?;
        match &report_out {
            Some(path) => write_text_atomic(Path::new(path), &json)?,
            None => println!("{json}"),
        }
        eprintln!("{}", reports_to_csv(&[report]).trim_end());
    }
    Ok(())
}
