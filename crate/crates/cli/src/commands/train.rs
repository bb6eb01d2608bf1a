//! `udfront train`: fit the desk-scale MLP on labeled feature files.

use std::path::PathBuf;

use clap::Parser;

use crate::commands::{parse_hidden, zip_same_length, SEED_TAG_TRAIN};
use crate::config::ConfigBag;
use udfront_core::features::fileio::{read_labels, read_matrix, MatrixKind};
use udfront_core::features::splice;
use udfront_core::posterior::model_io::save_model;
use udfront_core::posterior::{train_mlp, TrainConfig};
use udfront_core::rng::derive_seed;
use udfront_core::{Error, Result};

#[derive(Parser, Debug)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature files (repeatable), one utterance each.
    #[arg(long = "features")]
    features: Vec<String>,
    /// Label files (repeatable), parallel to --features.
    #[arg(long = "labels")]
    labels: Vec<String>,
    /// Output model path (UDNN).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of classes.
    #[arg(long)]
    classes: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Frames of context on each side of the spliced input.
    #[arg(long)]
    context: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: Args) -> Result<()> {
    let mut bag = ConfigBag::load(args.config.as_deref(), "train")?;
    let features = bag.resolve_list("features", &args.features)?;
    let labels = bag.resolve_list("labels", &args.labels)?;
    let model_out = bag
        .resolve_opt("model", args.model.map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::invalid("--model is required"))?;
    let classes = bag
        .resolve_opt("classes", args.classes)?
        .ok_or_else(|| Error::invalid("--classes is required"))?;
    let hidden = bag.resolve("hidden", args.hidden, "64,64".to_string())?;
    let epochs = bag.resolve("epochs", args.epochs, 20usize)?;
    let batch_size = bag.resolve("batch-size", args.batch_size, 32usize)?;
    let learning_rate = bag.resolve("learning-rate", args.learning_rate, 0.3)?;
    let momentum = bag.resolve("momentum", args.momentum, 0.9)?;
    let context = bag.resolve("context", args.context, 5usize)?;
    let seed = bag.resolve("seed", args.seed, 0u64)?;
    print!("{}", bag.echo("train"));

    if features.is_empty() {
        return Err(Error::invalid("at least one --features file is required"));
    }
    let pairs = zip_same_length(&features, &labels, "features/labels")?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (fpath, lpath) in &pairs {
        let (frames, kind) = read_matrix(fpath)?;
        if kind != MatrixKind::Features {
            return Err(Error::format(format!(
                "{} is not a feature matrix",
                fpath.display()
            )));
        }
        let utt_labels = read_labels(lpath)?;
        if utt_labels.len() != frames.len() {
            return Err(Error::dimension(format!(
                "{}: {} labels for {} frames",
                lpath.display(),
                utt_labels.len(),
                frames.len()
            )));
        }
        inputs.extend(splice(&frames, context));
        targets.extend(utt_labels);
    }

    let cfg = TrainConfig {
        hidden: parse_hidden(&hidden)?,
        epochs,
        batch_size,
        learning_rate,
        momentum,
        seed: derive_seed(seed, SEED_TAG_TRAIN),
    };
    let outcome = train_mlp(&inputs, &targets, classes, &cfg)?;
    save_model(std::path::Path::new(&model_out), &outcome.model)?;
    eprintln!(
        "trained on {} frames; first/last epoch loss {:.4}/{:.4}",
        inputs.len(),
        outcome.epoch_losses.first().unwrap_or(&f64::NAN),
        outcome.epoch_losses.last().unwrap_or(&f64::NAN),
    );
    Ok(())
}
