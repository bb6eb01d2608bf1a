//! `udfront simulate`: synthetic scenes plus a ground-truth sidecar.

use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

use crate::commands::{load_geometry, write_text_atomic, SEED_TAG_SIMULATE};
use crate::config::ConfigBag;
use udfront_core::rng::derive_seed;
use udfront_core::sim::{
    generate_isotropic_field, generate_plane_wave, mix_scene, write_wav, Doa, SceneSpec,
    WavEncoding,
};
use udfront_core::{Error, Result};

#[derive(Parser, Debug)]
pub struct Args {
    /// Flat key=value config file; CLI flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output WAV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth JSON sidecar path (default: <out>.json).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Scene kind: mixed | direct | diffuse.
    #[arg(long)]
    kind: Option<String>,
    /// Direct-to-diffuse ratio in dB (mixed scenes).
    #[arg(long)]
    drr_db: Option<f64>,
    /// Source azimuth in radians.
    #[arg(long)]
    az: Option<f64>,
    /// Source elevation in radians.
    #[arg(long)]
    el: Option<f64>,
    /// Scene length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Plane waves superposed for the diffuse field.
    #[arg(long)]
    n_directions: Option<usize>,
    /// Geometry config path (default: 8-mic circle, 8 cm spacing).
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// WAV sample encoding: float32 | pcm16.
    #[arg(long)]
    encoding: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    kind: &'a str,
    drr_db: Option<f64>,
    azimuth: f64,
    elevation: f64,
    duration_s: f64,
    sample_rate: u32,
    n_directions: usize,
    seed: u64,
    scene_seed: u64,
    channels: usize,
    speed_of_sound: f64,
}

pub fn run(args: Args) -> Result<()> {
    let mut bag = ConfigBag::load(args.config.as_deref(), "simulate")?;
    let out = bag
        .resolve_opt("out", args.out.map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::invalid("--out is required"))?;
    let out = PathBuf::from(out);
    let sidecar_default = format!("{}.json", out.display());
    let sidecar = PathBuf::from(bag.resolve(
        "sidecar",
        args.sidecar.map(|p| p.display().to_string()),
        sidecar_default,
    )?);
    let kind = bag.resolve("kind", args.kind, "mixed".to_string())?;
    let drr_db = bag.resolve("drr-db", args.drr_db, 0.0)?;
    let azimuth = bag.resolve("az", args.az, 0.0)?;
    let elevation = bag.resolve("el", args.el, 0.0)?;
    let duration = bag.resolve("duration", args.duration, 10.0)?;
    let sample_rate = bag.resolve("sample-rate", args.sample_rate, 16000)?;
    let n_directions = bag.resolve("n-directions", args.n_directions, 256)?;
    let geometry_path = bag.resolve_opt(
        "geometry",
        args.geometry.map(|p| p.display().to_string()),
    )?;
    let encoding = bag.resolve("encoding", args.encoding, "float32".to_string())?;
    let seed = bag.resolve("seed", args.seed, 0u64)?;
    print!("{}", bag.echo("simulate"));

    let geometry = load_geometry(geometry_path.as_deref().map(std::path::Path::new))?;
    let encoding = WavEncoding::parse(&encoding)?;
    let scene_seed = derive_seed(seed, SEED_TAG_SIMULATE);
    let spec = SceneSpec {
        direct_doa: Doa::new(azimuth, elevation),
        drr_db,
        duration_s: duration,
        sample_rate,
        seed: scene_seed,
    };
    let mut signal = match kind.as_str() {
        "direct" => generate_plane_wave(&spec, &geometry)?,
        "diffuse" => generate_isotropic_field(&spec, &geometry, n_directions)?,
        "mixed" => {
            let direct = generate_plane_wave(&spec, &geometry)?;
            let diffuse = generate_isotropic_field(&spec, &geometry, n_directions)?;
            mix_scene(&direct, &diffuse, drr_db)?
        }
        other => return Err(Error::invalid(format!("unknown scene kind '{other}'"))),
    };
    if encoding == WavEncoding::Pcm16 {
        // integer containers clip; scale to peak 0.99 (the whole feature
        // chain is gain-invariant)
        let peak = signal
            .samples
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            let g = 0.99 / peak;
            for ch in signal.samples.iter_mut() {
                for v in ch.iter_mut() {
                    *v *= g;
                }
            }
        }
    }
    write_wav(&out, &signal, encoding)?;

    let sidecar_data = Sidecar {
        kind: &kind,
        drr_db: (kind == "mixed").then_some(drr_db),
        azimuth,
        elevation,
        duration_s: duration,
        sample_rate,
        n_directions,
        seed,
        scene_seed,
        channels: geometry.num_mics(),
        speed_of_sound: geometry.speed_of_sound,
    };
    let json = serde_json::to_string_pretty(&sidecar_data)
        .map_err(|e| Error::format(e.to_string()))?;
    write_text_atomic(&sidecar, &json)?;
    Ok(())
}
