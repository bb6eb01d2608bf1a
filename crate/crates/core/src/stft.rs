//! STFT analysis, recursively averaged pair coherence, and the analytic
//! diffuse-field coherence.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sim::{ArrayGeometry, MultichannelSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
    SqrtHann,
}

impl Window {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rect" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            "sqrt-hann" => Ok(Window::SqrtHann),
            other => Err(Error::invalid(format!("unknown window '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Window::Rectangular => "rect",
            Window::Hann => "hann",
            Window::SqrtHann => "sqrt-hann",
        }
    }

    fn samples(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                // periodic Hann
                let h = 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos());
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => h,
                    Window::SqrtHann => h.sqrt(),
                }
            })
            .collect()
    }
}

/// Analysis parameters; 512-point DFT at 16 kHz with hop 128 by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub dft_length: usize,
    pub hop: usize,
    pub window: Window,
    pub sample_rate: u32,
}

impl StftConfig {
    pub fn new(dft_length: usize, hop: usize, window: Window, sample_rate: u32) -> Result<Self> {
        let cfg = Self {
            dft_length,
            hop,
            window,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn default_for(sample_rate: u32) -> Self {
        Self {
            dft_length: 512,
            hop: 128,
            window: Window::SqrtHann,
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dft_length < 2 || !self.dft_length.is_multiple_of(2) {
            return Err(Error::invalid("dft_length must be even and >= 2"));
        }
        if self.hop == 0 || self.hop > self.dft_length {
            return Err(Error::invalid("hop must be in (0, dft_length]"));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        Ok(())
    }

    /// One-sided band count, dft_length/2 + 1.
    pub fn bands(&self) -> usize {
        self.dft_length / 2 + 1
    }

    /// Center frequency of band `nu` in Hz.
    pub fn band_freq(&self, nu: usize) -> f64 {
        nu as f64 * self.sample_rate as f64 / self.dft_length as f64
    }

    pub fn num_frames(&self, num_samples: usize) -> usize {
        if num_samples < self.dft_length {
            0
        } else {
            (num_samples - self.dft_length) / self.hop + 1
        }
    }
}

/// One-sided complex STFT of a single channel: T frames by bands.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn bands(&self) -> usize {
        self.config.bands()
    }
}

/// Windowed, zero-phase STFT of one channel.
pub fn stft_channel(samples: &[f64], config: &StftConfig) -> Result<Spectrogram> {
    config.validate()?;
    let n = config.dft_length;
    if samples.len() < n {
        return Err(Error::invalid(format!(
            "signal too short: {} samples < dft_length {n}",
            samples.len()
        )));
    }
    let window = config.window.samples(n);
    let num_frames = config.num_frames(samples.len());
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bands = config.bands();
    let mut frames = Vec::with_capacity(num_frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..num_frames {
        let start = t * config.hop;
        // window, then rotate by n/2 so the DFT phase is referenced to the
        // frame center (zero-phase convention)
        let half = n / 2;
        for i in 0..n {
            let src = (i + half) % n;
            buf[i] = Complex64::new(samples[start + src] * window[src], 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..bands].to_vec());
    }
    Ok(Spectrogram {
        frames,
        config: *config,
    })
}

/// STFT of every channel of a multichannel signal.
pub fn stft(signal: &MultichannelSignal, config: &StftConfig) -> Result<Vec<Spectrogram>> {
    if config.sample_rate != signal.sample_rate {
        return Err(Error::dimension(format!(
            "config sample rate {} != signal sample rate {}",
            config.sample_rate, signal.sample_rate
        )));
    }
    signal
        .samples
        .iter()
        .map(|ch| stft_channel(ch, config))
        .collect()
}

fn check_compatible(a: &Spectrogram, b: &Spectrogram) -> Result<()> {
    if a.config != b.config {
        return Err(Error::dimension("spectrogram configs differ"));
    }
    if a.num_frames() != b.num_frames() {
        return Err(Error::dimension("spectrogram frame counts differ"));
    }
    Ok(())
}

/// Relative zero-power guard for the coherence denominators.
const EPS_POW_REL: f64 = 1e-12;

/// Complex coherence per frame and band with recursive PSD/CSD averaging:
///
/// ```text
/// Phi_ab[n] = lambda * Phi_ab[n-1] + (1 - lambda) * A_n * conj(B_n)
/// Gamma[n]  = Phi_ab[n] / sqrt(Phi_aa[n] * Phi_bb[n])
/// ```
///
/// The recursion starts from the first frame's instantaneous products.
/// Cells with vanishing power (relative to the mean frame power) yield 0;
/// magnitudes are clamped to 1.
pub fn coherence(a: &Spectrogram, b: &Spectrogram, lambda: f64) -> Result<Vec<Vec<Complex64>>> {
    check_compatible(a, b)?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid("forgetting factor must be in (0, 1)"));
    }
    let bands = a.bands();
    let num_frames = a.num_frames();
    if num_frames == 0 {
        return Ok(Vec::new());
    }
    // reference power for the silence guard
    let mut p_ref = 0.0;
    for t in 0..num_frames {
        for nu in 0..bands {
            p_ref += 0.5 * (a.frames[t][nu].norm_sqr() + b.frames[t][nu].norm_sqr());
        }
    }
    p_ref /= (num_frames * bands) as f64;
    let eps_pow = (EPS_POW_REL * p_ref).powi(2).max(f64::MIN_POSITIVE);

    let mut phi_aa = vec![0.0; bands];
    let mut phi_bb = vec![0.0; bands];
    let mut phi_ab = vec![Complex64::new(0.0, 0.0); bands];
    let mut out = Vec::with_capacity(num_frames);
    for t in 0..num_frames {
        let mut row = Vec::with_capacity(bands);
        for nu in 0..bands {
            let av = a.frames[t][nu];
            let bv = b.frames[t][nu];
            if t == 0 {
                phi_aa[nu] = av.norm_sqr();
                phi_bb[nu] = bv.norm_sqr();
                phi_ab[nu] = av * bv.conj();
            } else {
                phi_aa[nu] = lambda * phi_aa[nu] + (1.0 - lambda) * av.norm_sqr();
                phi_bb[nu] = lambda * phi_bb[nu] + (1.0 - lambda) * bv.norm_sqr();
                phi_ab[nu] = lambda * phi_ab[nu] + (1.0 - lambda) * av * bv.conj();
            }
            row.push(normalize_coherence(phi_ab[nu], phi_aa[nu], phi_bb[nu], eps_pow));
        }
        out.push(row);
    }
    Ok(out)
}

fn normalize_coherence(phi_ab: Complex64, phi_aa: f64, phi_bb: f64, eps_pow: f64) -> Complex64 {
    let denom_sq = phi_aa * phi_bb;
    if denom_sq < eps_pow {
        return Complex64::new(0.0, 0.0);
    }
    let g = phi_ab / denom_sq.sqrt();
    let mag = g.norm();
    if mag > 1.0 {
        g / mag
    } else {
        g
    }
}

/// Flat-averaged coherence over all frames; the long-term estimate used by
/// field diagnostics.
pub fn coherence_long_term(a: &Spectrogram, b: &Spectrogram) -> Result<Vec<Complex64>> {
    check_compatible(a, b)?;
    let bands = a.bands();
    let num_frames = a.num_frames();
    if num_frames == 0 {
        return Err(Error::invalid("no frames"));
    }
    let mut p_ref = 0.0;
    let mut phi_aa = vec![0.0; bands];
    let mut phi_bb = vec![0.0; bands];
    let mut phi_ab = vec![Complex64::new(0.0, 0.0); bands];
    for t in 0..num_frames {
        for nu in 0..bands {
            let av = a.frames[t][nu];
            let bv = b.frames[t][nu];
            phi_aa[nu] += av.norm_sqr();
            phi_bb[nu] += bv.norm_sqr();
            phi_ab[nu] += av * bv.conj();
            p_ref += 0.5 * (av.norm_sqr() + bv.norm_sqr());
        }
    }
    p_ref /= (num_frames * bands) as f64;
    let eps_pow = (EPS_POW_REL * p_ref * num_frames as f64)
        .powi(2)
        .max(f64::MIN_POSITIVE);
    Ok((0..bands)
        .map(|nu| normalize_coherence(phi_ab[nu], phi_aa[nu], phi_bb[nu], eps_pow))
        .collect())
}

/// Pair coherence for every non-redundant microphone pair, regrouped per
/// frame: element `[m][nu]` of frame `n` is the coherence of pair `m`.
#[derive(Debug, Clone)]
pub struct CoherenceFrame {
    pub gamma: Vec<Vec<Complex64>>,
    pub frame_index: usize,
}

/// Run the coherence recursion for every pair. Pairs are independent and
/// processed in parallel.
pub fn coherence_frames(
    spectrograms: &[Spectrogram],
    pairs: &[(usize, usize)],
    lambda: f64,
) -> Result<Vec<CoherenceFrame>> {
    use rayon::prelude::*;
    if spectrograms.is_empty() {
        return Err(Error::invalid("no spectrograms"));
    }
    let per_pair: Vec<Vec<Vec<Complex64>>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i >= spectrograms.len() || j >= spectrograms.len() {
                return Err(Error::dimension(format!("pair ({i},{j}) out of range")));
            }
            coherence(&spectrograms[i], &spectrograms[j], lambda)
        })
        .collect::<Result<_>>()?;
    let num_frames = per_pair.first().map_or(0, Vec::len);
    Ok((0..num_frames)
        .map(|n| CoherenceFrame {
            gamma: per_pair.iter().map(|p| p[n].clone()).collect(),
            frame_index: n,
        })
        .collect())
}

/// Analytic coherence of a spherically isotropic field for one microphone
/// pair: `sinc(omega * d / c)` per band, 1 at DC.
pub fn gamma_diff(geometry: &ArrayGeometry, pair_index: usize, config: &StftConfig) -> Result<Vec<f64>> {
    let d = geometry.pair_distance(pair_index)?;
    Ok((0..config.bands())
        .map(|nu| {
            let x = std::f64::consts::TAU * config.band_freq(nu) * d / geometry.speed_of_sound;
            if x.abs() < 1e-12 {
                1.0
            } else {
                x.sin() / x
            }
        })
        .collect())
}

/// `gamma_diff` for every pair of the geometry.
pub fn gamma_diff_all_pairs(geometry: &ArrayGeometry, config: &StftConfig) -> Result<Vec<Vec<f64>>> {
    (0..geometry.num_pairs())
        .map(|m| gamma_diff(geometry, m, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::sim::SPEED_OF_SOUND;

    fn cfg(window: Window) -> StftConfig {
        StftConfig {
            dft_length: 512,
            hop: 128,
            window,
            sample_rate: 16000,
        }
    }

    #[test]
    fn band_count_is_one_sided() {
        assert_eq!(cfg(Window::SqrtHann).bands(), 257);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(StftConfig::new(511, 128, Window::Hann, 16000).is_err());
        assert!(StftConfig::new(512, 0, Window::Hann, 16000).is_err());
        assert!(StftConfig::new(512, 513, Window::Hann, 16000).is_err());
    }

    #[test]
    fn zero_input_zero_spectrogram() {
        let s = stft_channel(&vec![0.0; 2048], &cfg(Window::SqrtHann)).unwrap();
        assert_eq!(s.num_frames(), (2048 - 512) / 128 + 1);
        for frame in &s.frames {
            assert!(frame.iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn too_short_signal_rejected() {
        assert!(stft_channel(&vec![0.0; 100], &cfg(Window::SqrtHann)).is_err());
    }

    #[test]
    fn sinusoid_at_bin_center_concentrates() {
        let c = cfg(Window::Rectangular);
        let k = 37usize;
        let f = c.band_freq(k);
        let x: Vec<f64> = (0..4096)
            .map(|n| (std::f64::consts::TAU * f * n as f64 / 16000.0).sin())
            .collect();
        let s = stft_channel(&x, &c).unwrap();
        for frame in &s.frames {
            // one-sided energy with interior bins counted twice
            let weighted = |nu: usize, e: f64| {
                if nu == 0 || nu == 256 {
                    e
                } else {
                    2.0 * e
                }
            };
            let total: f64 = frame
                .iter()
                .enumerate()
                .map(|(nu, v)| weighted(nu, v.norm_sqr()))
                .sum();
            let at_k = weighted(k, frame[k].norm_sqr());
            assert!(at_k / total >= 0.99, "share {}", at_k / total);
        }
    }

    #[test]
    fn parseval_energy_matches() {
        let c = cfg(Window::SqrtHann);
        let rng = CounterRng::new(123);
        let x: Vec<f64> = (0..2048).map(|i| rng.gaussian_at(i as u64)).collect();
        let s = stft_channel(&x, &c).unwrap();
        let window = Window::SqrtHann.samples(512);
        for (t, frame) in s.frames.iter().enumerate() {
            let start = t * c.hop;
            let time_energy: f64 = (0..512)
                .map(|i| {
                    let w = x[start + i] * window[i];
                    w * w
                })
                .sum();
            let spec_energy: f64 = frame
                .iter()
                .enumerate()
                .map(|(nu, v)| {
                    let e = v.norm_sqr();
                    if nu == 0 || nu == 256 {
                        e
                    } else {
                        2.0 * e
                    }
                })
                .sum::<f64>()
                / 512.0;
            let rel = (time_energy - spec_energy).abs() / time_energy;
            assert!(rel < 1e-9, "frame {t}: relative error {rel}");
        }
    }

    fn noise_spectrogram(seed: u64, n: usize) -> Spectrogram {
        let rng = CounterRng::new(seed);
        let x: Vec<f64> = (0..n).map(|i| rng.gaussian_at(i as u64)).collect();
        stft_channel(&x, &cfg(Window::SqrtHann)).unwrap()
    }

    #[test]
    fn coherence_of_identical_channels_is_one() {
        let a = noise_spectrogram(1, 8192);
        let g = coherence(&a, &a, 0.8).unwrap();
        for row in &g {
            for v in row {
                assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coherence_scale_invariant() {
        let a = noise_spectrogram(2, 8192);
        let mut b = a.clone();
        for frame in &mut b.frames {
            for v in frame.iter_mut() {
                *v *= 0.5;
            }
        }
        let g = coherence(&a, &b, 0.8).unwrap();
        for row in &g {
            for v in row {
                assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
        // arbitrary positive constants on either side
        let gab = coherence(&a, &b, 0.7).unwrap();
        let mut a3 = a.clone();
        for frame in &mut a3.frames {
            for v in frame.iter_mut() {
                *v *= 37.25;
            }
        }
        let g2 = coherence(&a3, &b, 0.7).unwrap();
        for (r1, r2) in gab.iter().zip(g2.iter()) {
            for (v1, v2) in r1.iter().zip(r2.iter()) {
                assert!((v1 - v2).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coherence_hermitian_symmetry() {
        let a = noise_spectrogram(3, 4096);
        let b = noise_spectrogram(4, 4096);
        let gab = coherence(&a, &b, 0.8).unwrap();
        let gba = coherence(&b, &a, 0.8).unwrap();
        for (ra, rb) in gab.iter().zip(gba.iter()) {
            for (x, y) in ra.iter().zip(rb.iter()) {
                assert!((x - y.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn independent_noise_has_low_median_coherence() {
        // 10 s of independent noise at 16 kHz. The magnitude distribution
        // depends on lambda and on the frame overlap; at lambda = 0.98 the
        // Monte Carlo median sits near 0.2, safely below the 0.3 bound.
        let a = noise_spectrogram(5, 160000);
        let b = noise_spectrogram(6, 160000);
        let g = coherence(&a, &b, 0.98).unwrap();
        let frames = g.len();
        let bands = g[0].len();
        for nu in 0..bands {
            let mut mags: Vec<f64> = (0..frames).map(|t| g[t][nu].norm()).collect();
            mags.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let median = mags[frames / 2];
            assert!(median < 0.3, "band {nu}: median |G| = {median}");
            assert!(mags.last().unwrap() <= &1.0, "band {nu}: |G| above 1");
        }
    }

    #[test]
    fn zero_power_cells_give_zero() {
        let mut a = noise_spectrogram(7, 4096);
        let b = a.clone();
        for frame in &mut a.frames {
            frame[10] = Complex64::new(0.0, 0.0);
        }
        let g = coherence(&a, &b, 0.8).unwrap();
        for row in &g {
            assert_eq!(row[10], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn gamma_diff_dc_and_zero_crossing() {
        let c = cfg(Window::SqrtHann);
        // spacing so that band 128 (4 kHz) lands exactly on omega d / c = pi
        let d = SPEED_OF_SOUND / (2.0 * 2.0 * 4000.0) * 2.0;
        let geom = crate::sim::ArrayGeometry::new(
            vec![[0.0, 0.0, 0.0], [d, 0.0, 0.0]],
            SPEED_OF_SOUND,
        )
        .unwrap();
        let g = gamma_diff(&geom, 0, &c).unwrap();
        assert_eq!(g[0], 1.0);
        assert!(g[128].abs() < 1e-15, "zero crossing: {}", g[128]);
    }

    #[test]
    fn gamma_diff_matches_direct_evaluation() {
        let c = cfg(Window::SqrtHann);
        let geom = crate::sim::ArrayGeometry::new(
            vec![[0.0, 0.0, 0.0], [0.08, 0.0, 0.0]],
            SPEED_OF_SOUND,
        )
        .unwrap();
        let g = gamma_diff(&geom, 0, &c).unwrap();
        // 1 kHz is band 32 at 16 kHz / 512
        let x = std::f64::consts::TAU * 1000.0 * 0.08 / SPEED_OF_SOUND;
        assert!((g[32] - x.sin() / x).abs() < 1e-15);
    }
}
