//! `udfront extract`: WAV -> assembled features + diffuseness variances.

use std::path::PathBuf;

use clap::Parser;

use crate::commands::load_geometry;
use crate::config::ConfigBag;
use udfront_core::diffuseness::DiffusenessParams;
use udfront_core::features::fileio::{write_matrix, MatrixKind};
use udfront_core::features::{extract_utterance, FrontEndConfig};
use udfront_core::sim::{read_wav_with_geometry, Doa};
use udfront_core::stft::{StftConfig, Window};
use udfront_core::{Error, Result};

#[derive(Parser, Debug)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input multichannel WAV.
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Geometry config path (default: 8-mic circle, 8 cm spacing).
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Output feature matrix (UDFT, T x 72).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Output variance matrix (UDFT, T x 24; default: <features>.var).
    #[arg(long)]
    variances: Option<PathBuf>,
    #[arg(long)]
    dft_length: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    /// Analysis window: sqrt-hann | hann | rect.
    #[arg(long)]
    window: Option<String>,
    /// Coherence forgetting factor.
    #[arg(long)]
    lambda: Option<f64>,
    /// Scale applied to the pooled pair variance.
    #[arg(long)]
    var_scale: Option<f64>,
    /// CDR estimate cap.
    #[arg(long)]
    cdr_max: Option<f64>,
    /// Beamformer look azimuth in radians.
    #[arg(long)]
    look_az: Option<f64>,
    /// Beamformer look elevation in radians.
    #[arg(long)]
    look_el: Option<f64>,
    /// Splicing context written alongside (for reference only).
    #[arg(long)]
    context: Option<usize>,
}

pub fn run(args: Args) -> Result<()> {
    let mut bag = ConfigBag::load(args.config.as_deref(), "extract")?;
    let wav = bag
        .resolve_opt("wav", args.wav.map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::invalid("--wav is required"))?;
    let features_out = bag
        .resolve_opt("features", args.features.map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::invalid("--features is required"))?;
    let variances_default = format!("{features_out}.var");
    let variances_out = bag.resolve(
        "variances",
        args.variances.map(|p| p.display().to_string()),
        variances_default,
    )?;
    let geometry_path =
        bag.resolve_opt("geometry", args.geometry.map(|p| p.display().to_string()))?;
    let dft_length = bag.resolve("dft-length", args.dft_length, 512)?;
    let hop = bag.resolve("hop", args.hop, 128)?;
    let window = bag.resolve("window", args.window, "sqrt-hann".to_string())?;
    let lambda = bag.resolve("lambda", args.lambda, 0.8)?;
    let var_scale = bag.resolve("var-scale", args.var_scale, 0.1)?;
    let cdr_max = bag.resolve("cdr-max", args.cdr_max, 1e4)?;
    let look_az = bag.resolve("look-az", args.look_az, 0.0)?;
    let look_el = bag.resolve("look-el", args.look_el, 0.0)?;
    let context = bag.resolve("context", args.context, 5usize)?;
    print!("{}", bag.echo("extract"));

    let geometry = load_geometry(geometry_path.as_deref().map(std::path::Path::new))?;
    let signal = read_wav_with_geometry(std::path::Path::new(&wav), &geometry)?;
    let stft = StftConfig::new(dft_length, hop, Window::parse(&window)?, signal.sample_rate)?;
    let front_end = FrontEndConfig {
        stft,
        diffuseness: DiffusenessParams {
            cdr_max,
            var_scale,
            n_mel: udfront_core::features::N_MEL,
            lambda,
        },
        look: Doa::new(look_az, look_el),
        context,
    };
    let utterance = extract_utterance(&signal, &front_end)?;
    write_matrix(
        std::path::Path::new(&features_out),
        &utterance.frames,
        MatrixKind::Features,
    )?;
    write_matrix(
        std::path::Path::new(&variances_out),
        &utterance.variances,
        MatrixKind::Variances,
    )?;
    eprintln!(
        "extracted {} frames ({} dims) from {wav}",
        utterance.frames.len(),
        utterance.frames.first().map_or(0, Vec::len),
    );
    Ok(())
}
