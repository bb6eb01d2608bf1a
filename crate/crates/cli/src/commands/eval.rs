//! `udfront eval`: frame accuracy of the decode modes over a set of
//! labeled utterances.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use crate::commands::{write_text_atomic, zip_same_length, SEED_TAG_EVAL};
use crate::config::ConfigBag;
use crate::commands::decode::load_utterance_matrices;
use udfront_core::features::fileio::read_labels;
use udfront_core::posterior::eval::{reports_to_csv, DecodeMode};
use udfront_core::posterior::model_io::load_model;
use udfront_core::posterior::{evaluate_frame_accuracy, AccuracyReport, LabeledUtterance};
use udfront_core::rng::derive_seed;
use udfront_core::sampler::ClipPolicy;
use udfront_core::{Error, Result};

#[derive(Parser, Debug)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature files (repeatable).
    #[arg(long = "features")]
    features: Vec<String>,
    /// Variance files (repeatable, parallel to --features).
    #[arg(long = "variances")]
    variances: Vec<String>,
    /// Label files (repeatable, parallel to --features).
    #[arg(long = "labels")]
    labels: Vec<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Modes to evaluate, comma separated.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    num_samples: Option<usize>,
    /// Extra scale applied to the file variances before sampling.
    #[arg(long)]
    var_scale: Option<f64>,
    #[arg(long)]
    clip: Option<String>,
    /// Combined JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV summary path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct EvalReport {
    num_utterances: usize,
    reports: Vec<AccuracyReport>,
}

pub fn run(args: Args) -> Result<()> {
    let mut bag = ConfigBag::load(args.config.as_deref(), "eval")?;
    let features = bag.resolve_list("features", &args.features)?;
    let variances = bag.resolve_list("variances", &args.variances)?;
    let labels = bag.resolve_list("labels", &args.labels)?;
    let model_path = bag
        .resolve_opt("model", args.model.map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::invalid("--model is required"))?;
    let modes = bag.resolve(
        "modes",
        args.modes,
        "baseline,arithmetic,weighted".to_string(),
    )?;
    let num_samples = bag.resolve("num-samples", args.num_samples, 30usize)?;
    let var_scale = bag.resolve("var-scale", args.var_scale, 1.0)?;
    let clip = bag.resolve("clip", args.clip, "none".to_string())?;
    let report_out = bag.resolve_opt("report", args.report.map(|p| p.display().to_string()))?;
    let csv_out = bag.resolve_opt("csv", args.csv.map(|p| p.display().to_string()))?;
    let seed = bag.resolve("seed", args.seed, 0u64)?;
    print!("{}", bag.echo("eval"));

    if features.is_empty() {
        return Err(Error::invalid("at least one --features file is required"));
    }
    let feature_labels = zip_same_length(&features, &labels, "features/labels")?;
    let feature_vars = if variances.is_empty() {
        features.iter().map(|_| None).collect::<Vec<_>>()
    } else {
        zip_same_length(&features, &variances, "features/variances")?
            .into_iter()
            .map(|(_, v)| Some(v))
            .collect()
    };

    let clip = ClipPolicy::parse(&clip)?;
    let model = load_model(Path::new(&model_path))?;
    let mut utterances = Vec::new();
    for ((fpath, lpath), vpath) in feature_labels.iter().zip(feature_vars.iter()) {
        let (frames, vars) =
            load_utterance_matrices(fpath, vpath.as_deref(), var_scale)?;
        let utt_labels = read_labels(lpath)?;
        if utt_labels.len() != frames.len() {
            return Err(Error::dimension(format!(
                "{}: {} labels for {} frames",
                lpath.display(),
                utt_labels.len(),
                frames.len()
            )));
        }
        utterances.push(LabeledUtterance {
            features: frames,
            variances: vars,
            labels: utt_labels,
        });
    }

    let eval_seed = derive_seed(seed, SEED_TAG_EVAL);
    let mut reports = Vec::new();
    for mode_name in modes.split(',').filter(|s| !s.trim().is_empty()) {
        let mode = DecodeMode::parse(mode_name.trim())?;
        reports.push(evaluate_frame_accuracy(
            &model,
            &utterances,
            mode,
            num_samples,
            eval_seed,
            clip,
        )?);
    }

    let combined = EvalReport {
        num_utterances: utterances.len(),
        reports,
    };
    let json =
        serde_json::to_string_pretty(&combined).map_err(|e| Error::format(e.to_string()))?;
    match &report_out {
        Some(path) => write_text_atomic(Path::new(path), &json)?,
        None => println!("{json}"),
    }
    let csv = reports_to_csv(&combined.reports);
    if let Some(path) = &csv_out {
        write_text_atomic(Path::new(path), &csv)?;
    }
    eprint!("{csv}");
    Ok(())
}
