//! Synthetic multichannel scene generation.
//!
//! Scenes are built from two primitives with known ground truth: a single
//! plane wave (fully coherent across the array) and a superposition of
//! independent plane waves from a spherical direction lattice (diffuse,
//! converging to the analytic sinc coherence). Mixing the two at a given
//! direct-to-diffuse ratio gives test signals whose true CDR is known by
//! construction.

mod wav;

pub use wav::{read_wav, read_wav_with_geometry, write_wav, WavEncoding};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Stream tags for scene randomness, split from `SceneSpec::seed`.
const TAG_DIRECT: u64 = 0x4449_5245_4354; // "DIRECT"
const TAG_DIFFUSE: u64 = 0x4449_4646; // "DIFF"

/// Default speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Taps of the windowed-sinc fractional delay kernel.
const DELAY_TAPS: usize = 64;
/// Kernel low-pass cutoff relative to Nyquist. Applied to every channel,
/// including integer delays, so all channels see the same magnitude
/// response and stay power-matched.
const DELAY_CUTOFF: f64 = 0.95;

/// Microphone array layout plus the propagation speed used for delays.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub mic_positions: Vec<[f64; 3]>,
    pub speed_of_sound: f64,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<[f64; 3]>, speed_of_sound: f64) -> Result<Self> {
        if mic_positions.len() < 2 {
            return Err(Error::invalid("geometry needs at least 2 microphones"));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        for p in &mic_positions {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite microphone coordinate"));
            }
        }
        for i in 0..mic_positions.len() {
            for j in (i + 1)..mic_positions.len() {
                if distance(&mic_positions[i], &mic_positions[j]) <= 0.0 {
                    return Err(Error::invalid(format!(
                        "microphones {i} and {j} are co-located"
                    )));
                }
            }
        }
        Ok(Self {
            mic_positions,
            speed_of_sound,
        })
    }

    /// Uniform circular array in the xy-plane with the given spacing
    /// between adjacent microphones.
    pub fn circular(n_mics: usize, adjacent_spacing: f64, speed_of_sound: f64) -> Result<Self> {
        if n_mics < 2 {
            return Err(Error::invalid("circular array needs at least 2 mics"));
        }
        if !(adjacent_spacing.is_finite() && adjacent_spacing > 0.0) {
            return Err(Error::invalid("spacing must be positive"));
        }
        let radius = adjacent_spacing / (2.0 * (std::f64::consts::PI / n_mics as f64).sin());
        let positions = (0..n_mics)
            .map(|k| {
                let phi = std::f64::consts::TAU * k as f64 / n_mics as f64;
                [radius * phi.cos(), radius * phi.sin(), 0.0]
            })
            .collect();
        Self::new(positions, speed_of_sound)
    }

    /// The default array: 8 microphones on a circle with 8 cm adjacent
    /// spacing.
    pub fn default_circular_8ch() -> Self {
        Self::circular(8, 0.08, SPEED_OF_SOUND).expect("default geometry is valid")
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    /// Non-redundant microphone pairs (i < j); C mics yield C*(C-1)/2 pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let c = self.num_mics();
        let mut out = Vec::with_capacity(c * (c - 1) / 2);
        for i in 0..c {
            for j in (i + 1)..c {
                out.push((i, j));
            }
        }
        out
    }

    pub fn num_pairs(&self) -> usize {
        let c = self.num_mics();
        c * (c - 1) / 2
    }

    pub fn pair_distance(&self, pair_index: usize) -> Result<f64> {
        let pairs = self.pairs();
        let (i, j) = *pairs
            .get(pair_index)
            .ok_or_else(|| Error::invalid(format!("pair index {pair_index} out of range")))?;
        Ok(distance(&self.mic_positions[i], &self.mic_positions[j]))
    }

    /// Parse the geometry text config: one `x y z` triple per line (meters),
    /// optional `speed_of_sound = <m/s>` line, `#` comments.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut positions = Vec::new();
        let mut c = SPEED_OF_SOUND;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                match key.trim() {
                    "speed_of_sound" => {
                        c = value.trim().parse::<f64>().map_err(|_| {
                            Error::format(format!("line {}: bad speed_of_sound", lineno + 1))
                        })?;
                    }
                    other => {
                        return Err(Error::format(format!(
                            "line {}: unknown key '{other}'",
                            lineno + 1
                        )));
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::format(format!(
                    "line {}: expected 'x y z' coordinates",
                    lineno + 1
                )));
            }
            let mut p = [0.0; 3];
            for (k, f) in fields.iter().enumerate() {
                p[k] = f.parse::<f64>().map_err(|_| {
                    Error::format(format!("line {}: bad coordinate '{f}'", lineno + 1))
                })?;
            }
            positions.push(p);
        }
        Self::new(positions, c)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::from("# microphone coordinates in meters, one per line\n");
        s.push_str(&format!("speed_of_sound = {}\n", self.speed_of_sound));
        for p in &self.mic_positions {
            s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        s
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Direction of arrival: where the source lies as seen from the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doa {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Doa {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    /// Unit vector pointing from the array toward the source.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (ca, sa) = (self.azimuth.cos(), self.azimuth.sin());
        let (ce, se) = (self.elevation.cos(), self.elevation.sin());
        [ce * ca, ce * sa, se]
    }

    pub fn is_finite(&self) -> bool {
        self.azimuth.is_finite() && self.elevation.is_finite()
    }
}

/// Parameters of one synthetic scene. Identical specs (including seed)
/// reproduce identical signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub direct_doa: Doa,
    pub drr_db: f64,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("duration_s must be positive"));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        if !self.direct_doa.is_finite() {
            return Err(Error::invalid("direct_doa must be finite"));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }
}

/// Time-domain samples for every microphone of an array.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    pub samples: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub geometry: ArrayGeometry,
}

impl MultichannelSignal {
    pub fn new(samples: Vec<Vec<f64>>, sample_rate: u32, geometry: ArrayGeometry) -> Result<Self> {
        if samples.len() != geometry.num_mics() {
            return Err(Error::dimension(format!(
                "{} channels but geometry has {} mics",
                samples.len(),
                geometry.num_mics()
            )));
        }
        let n = samples.first().map_or(0, Vec::len);
        for (c, ch) in samples.iter().enumerate() {
            if ch.len() != n {
                return Err(Error::dimension(format!(
                    "channel {c} has {} samples, expected {n}",
                    ch.len()
                )));
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("channel {c} has non-finite samples")));
            }
        }
        Ok(Self {
            samples,
            sample_rate,
            geometry,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn num_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Mean power of one channel.
    pub fn channel_power(&self, channel: usize) -> f64 {
        let ch = &self.samples[channel];
        if ch.is_empty() {
            return 0.0;
        }
        ch.iter().map(|v| v * v).sum::<f64>() / ch.len() as f64
    }

    /// Mean power over all channels.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (0..self.num_channels())
            .map(|c| self.channel_power(c))
            .sum::<f64>()
            / self.num_channels() as f64
    }
}

/// Windowed-sinc fractional delay kernel for a delay with fractional part
/// `frac` in [0, 1). Tap `j` weights source sample `floor(n - delay) - 32 + j`,
/// so the kernel is the ideal response sampled at `t = 32 - frac - j`.
fn delay_kernel(frac: f64) -> [f64; DELAY_TAPS] {
    let half = DELAY_TAPS as f64 / 2.0;
    let mut h = [0.0; DELAY_TAPS];
    let mut sum = 0.0;
    for (j, tap) in h.iter_mut().enumerate() {
        let t = half - frac - j as f64;
        let w = 0.5 * (1.0 + (std::f64::consts::PI * t / half).cos());
        let x = std::f64::consts::PI * DELAY_CUTOFF * t;
        let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
        *tap = DELAY_CUTOFF * sinc * w;
        sum += *tap;
    }
    // unit DC gain
    for tap in h.iter_mut() {
        *tap /= sum;
    }
    h
}

/// Delay `src` by `delay` samples (possibly fractional, possibly negative),
/// writing `out.len()` samples starting at source index `margin`. `src` must
/// carry at least `margin` samples of lead-in and tail beyond `out`.
fn delay_into(src: &[f64], margin: usize, delay: f64, gain: f64, out: &mut [f64]) {
    let ifloor = delay.floor();
    let frac = delay - ifloor;
    let h = delay_kernel(frac);
    // y[n] = sum_j h[j] * src[n - floor(delay) - 32 + j]
    let base = margin as i64 - ifloor as i64 - DELAY_TAPS as i64 / 2;
    debug_assert!(base >= 0);
    debug_assert!(base as usize + out.len() + DELAY_TAPS <= src.len() + 1);
    let base = base as usize;
    for (n, y) in out.iter_mut().enumerate() {
        let xs = &src[base + n..base + n + DELAY_TAPS];
        let mut acc = 0.0;
        for j in 0..DELAY_TAPS {
            acc += h[j] * xs[j];
        }
        *y += gain * acc;
    }
}


/// Delay a signal by `delay` samples (fractional, possibly negative) with
/// the same band-limited kernel used for scene synthesis. Output has the
/// input length; edges are zero-padded.
pub fn delay_signal(samples: &[f64], delay: f64) -> Vec<f64> {
    let margin = delay.abs().ceil() as usize + DELAY_TAPS;
    let mut padded = vec![0.0; samples.len() + 2 * margin];
    padded[margin..margin + samples.len()].copy_from_slice(samples);
    let mut out = vec![0.0; samples.len()];
    delay_into(&padded, margin, delay, 1.0, &mut out);
    out
}

/// Per-channel geometric delay in samples for a plane wave arriving from
/// `doa`: mics closer to the source receive the wavefront earlier.
pub fn channel_delays(geometry: &ArrayGeometry, doa: Doa, sample_rate: u32) -> Vec<f64> {
    let u = doa.unit_vector();
    geometry
        .mic_positions
        .iter()
        .map(|p| {
            let proj = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
            -proj / geometry.speed_of_sound * sample_rate as f64
        })
        .collect()
}

fn margin_for(delays: &[f64]) -> usize {
    let maxabs = delays.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    maxabs.ceil() as usize + DELAY_TAPS
}

/// White Gaussian noise of length `n` from a counter-based stream.
fn white_noise(rng: &CounterRng, n: usize) -> Vec<f64> {
    (0..n).map(|i| rng.gaussian_at(i as u64)).collect()
}

/// A single wideband plane wave from `spec.direct_doa`, delayed per channel
/// with band-limited interpolation.
pub fn generate_plane_wave(spec: &SceneSpec, geometry: &ArrayGeometry) -> Result<MultichannelSignal> {
    spec.validate()?;
    let n = spec.num_samples();
    let delays = channel_delays(geometry, spec.direct_doa, spec.sample_rate);
    let margin = margin_for(&delays);
    let src = white_noise(
        &CounterRng::new(spec.seed).stream(TAG_DIRECT),
        n + 2 * margin,
    );
    let mut channels = vec![vec![0.0; n]; geometry.num_mics()];
    channels
        .iter_mut()
        .zip(delays.iter())
        .for_each(|(ch, &d)| delay_into(&src, margin, d, 1.0, ch));
    MultichannelSignal::new(channels, spec.sample_rate, geometry.clone())
}

/// Deterministic Fibonacci lattice on the unit sphere.
fn sphere_directions(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * (i as f64 + 0.5);
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Spherically isotropic field: independent plane waves from `n_directions`
/// points of a spherical lattice. The long-term pair coherence converges to
/// the analytic sinc law as directions and duration grow.
pub fn generate_isotropic_field(
    spec: &SceneSpec,
    geometry: &ArrayGeometry,
    n_directions: usize,
) -> Result<MultichannelSignal> {
    spec.validate()?;
    if n_directions < 64 {
        return Err(Error::invalid("n_directions must be at least 64"));
    }
    let n = spec.num_samples();
    let gain = 1.0 / (n_directions as f64).sqrt();
    let dir_rng = CounterRng::new(spec.seed).stream(TAG_DIFFUSE);
    let mut channels = vec![vec![0.0; n]; geometry.num_mics()];

    for (d, dir) in sphere_directions(n_directions).into_iter().enumerate() {
        let doa = Doa {
            azimuth: dir[1].atan2(dir[0]),
            elevation: dir[2].asin(),
        };
        let delays = channel_delays(geometry, doa, spec.sample_rate);
        let margin = margin_for(&delays);
        let src = white_noise(&dir_rng.stream(d as u64), n + 2 * margin);
        // channels are independent accumulators; directions stay in order
        use rayon::prelude::*;
        channels
            .par_iter_mut()
            .zip(delays.par_iter())
            .for_each(|(ch, &delay)| delay_into(&src, margin, delay, gain, ch));
    }
    MultichannelSignal::new(channels, spec.sample_rate, geometry.clone())
}

/// Power-calibrated mix: scales the diffuse part so the direct-to-diffuse
/// power ratio at the array equals `drr_db`. `+inf` returns the direct
/// signal unchanged, `-inf` the diffuse one.
pub fn mix_scene(
    direct: &MultichannelSignal,
    diffuse: &MultichannelSignal,
    drr_db: f64,
) -> Result<MultichannelSignal> {
    if direct.geometry != diffuse.geometry {
        return Err(Error::dimension("mix_scene: geometries differ"));
    }
    if direct.sample_rate != diffuse.sample_rate {
        return Err(Error::dimension("mix_scene: sample rates differ"));
    }
    if direct.num_samples() != diffuse.num_samples() {
        return Err(Error::dimension("mix_scene: lengths differ"));
    }
    if drr_db.is_nan() {
        return Err(Error::invalid("drr_db is NaN"));
    }
    if drr_db == f64::INFINITY {
        return Ok(direct.clone());
    }
    if drr_db == f64::NEG_INFINITY {
        return Ok(diffuse.clone());
    }
    let p_direct = direct.mean_power();
    let p_diffuse = diffuse.mean_power();
    if p_direct <= 0.0 || p_diffuse <= 0.0 {
        return Err(Error::invalid("mix_scene: zero-power input"));
    }
    let ratio = 10f64.powf(drr_db / 10.0);
    let g = (p_direct / (ratio * p_diffuse)).sqrt();
    let samples = direct
        .samples
        .iter()
        .zip(diffuse.samples.iter())
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x + g * y).collect())
        .collect();
    MultichannelSignal::new(samples, direct.sample_rate, direct.geometry.clone())
}
