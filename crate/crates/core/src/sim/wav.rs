//! Multichannel WAV reading and writing (PCM16 / float32, little-endian).

use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{ArrayGeometry, MultichannelSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl WavEncoding {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(WavEncoding::Pcm16),
            "float32" => Ok(WavEncoding::Float32),
            other => Err(Error::invalid(format!("unknown wav encoding '{other}'"))),
        }
    }
}

/// Write all channels interleaved. The file is written to a temporary
/// sibling first and renamed into place.
pub fn write_wav(path: &Path, signal: &MultichannelSignal, encoding: WavEncoding) -> Result<()> {
    let spec = hound::WavSpec {
        channels: signal.num_channels() as u16,
        sample_rate: signal.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let tmp = tmp_path(path);
    {
        let mut writer =
            hound::WavWriter::create(&tmp, spec).map_err(|e| Error::Wav(e.to_string()))?;
        let n = signal.num_samples();
        for i in 0..n {
            for ch in &signal.samples {
                match encoding {
                    WavEncoding::Pcm16 => {
                        let q = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                        writer.write_sample(q).map_err(|e| Error::Wav(e.to_string()))?;
                    }
                    WavEncoding::Float32 => {
                        writer
                            .write_sample(ch[i] as f32)
                            .map_err(|e| Error::Wav(e.to_string()))?;
                    }
                }
            }
        }
        writer.finalize().map_err(|e| Error::Wav(e.to_string()))?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Read a PCM16 or float32 WAV into per-channel f64 samples.
pub fn read_wav(path: &Path) -> Result<(Vec<Vec<f64>>, u32)> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::Wav(e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::format("wav has zero channels"));
    }
    let mut out = vec![Vec::new(); channels];
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            for (i, s) in reader.samples::<i16>().enumerate() {
                let s = s.map_err(|e| Error::Wav(e.to_string()))?;
                out[i % channels].push(s as f64 / 32768.0);
            }
        }
        (hound::SampleFormat::Float, 32) => {
            for (i, s) in reader.samples::<f32>().enumerate() {
                let s = s.map_err(|e| Error::Wav(e.to_string()))?;
                out[i % channels].push(s as f64);
            }
        }
        (fmt, bits) => {
            return Err(Error::format(format!(
                "unsupported wav encoding: {bits}-bit {fmt:?}"
            )));
        }
    }
    Ok((out, spec.sample_rate))
}

/// Read a WAV and attach a geometry; the channel count must match the
/// number of microphones.
pub fn read_wav_with_geometry(path: &Path, geometry: &ArrayGeometry) -> Result<MultichannelSignal> {
    let (samples, sample_rate) = read_wav(path)?;
    if samples.len() != geometry.num_mics() {
        return Err(Error::dimension(format!(
            "wav has {} channels but geometry has {} mics",
            samples.len(),
            geometry.num_mics()
        )));
    }
    MultichannelSignal::new(samples, sample_rate, geometry.clone())
}
