//! DOA-independent CDR estimation, the diffuseness mapping, mel projection
//! and cross-pair pooling.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::ArrayGeometry;
use crate::stft::{coherence_frames, gamma_diff_all_pairs, Spectrogram};

/// Default cap for the CDR estimate; keeps the diffuseness floor near 1e-4.
pub const DEFAULT_CDR_MAX: f64 = 1e4;

/// Default scale applied to the pooled pair variance.
pub const DEFAULT_VAR_SCALE: f64 = 0.1;

/// Default number of mel filters.
pub const DEFAULT_N_MEL: usize = 24;

/// DOA-independent CDR estimate from the observed pair coherence `gamma`
/// and the diffuse-field coherence `gamma_diff` (clipped to [0, 1]).
///
/// The estimator inverts the coherence mixing model
/// `gamma = (cdr * e^{i theta} + gamma_diff) / (cdr + 1)` for any phase
/// `theta`. The radicand is clamped to 0 against estimation noise and the
/// result is clamped to `[0, cdr_max]`; a unit-magnitude `gamma` (vanishing
/// denominator) maps to `cdr_max`.
pub fn cdr_from_coherence(gamma: Complex64, gamma_diff: f64, cdr_max: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&gamma_diff));
    let re = gamma.re;
    let mag_sq = gamma.norm_sqr();
    let denom = mag_sq - 1.0;
    if denom == 0.0 {
        return cdr_max;
    }
    let radicand = gamma_diff * gamma_diff * re * re - gamma_diff * gamma_diff * mag_sq
        + gamma_diff * gamma_diff
        - 2.0 * gamma_diff * re
        + mag_sq;
    let numer = gamma_diff * re - mag_sq - radicand.max(0.0).sqrt();
    (numer / denom).clamp(0.0, cdr_max)
}

/// Diffuseness of a CDR value: `1 / (1 + cdr)`, in (0, 1].
pub fn diffuseness(cdr: f64) -> f64 {
    debug_assert!(cdr >= 0.0);
    1.0 / (1.0 + cdr)
}

/// Triangular mel filterbank, rows normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub dft_length: usize,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale between 0 Hz and Nyquist.
pub fn build_mel_filterbank(
    sample_rate: u32,
    dft_length: usize,
    n_filters: usize,
) -> Result<MelFilterbank> {
    if sample_rate == 0 || dft_length < 2 || !dft_length.is_multiple_of(2) {
        return Err(Error::invalid("bad sample_rate or dft_length"));
    }
    if n_filters == 0 || n_filters >= dft_length / 2 {
        return Err(Error::invalid(format!(
            "n_filters {n_filters} must be in [1, dft_length/2)"
        )));
    }
    let bands = dft_length / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_hi = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_hi * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_freq = |nu: usize| nu as f64 * sample_rate as f64 / dft_length as f64;

    let mut weights = vec![vec![0.0; bands]; n_filters];
    for (k, row) in weights.iter_mut().enumerate() {
        let (lo, mid, hi) = (edges[k], edges[k + 1], edges[k + 2]);
        let mut sum = 0.0;
        for (nu, w) in row.iter_mut().enumerate() {
            let f = bin_freq(nu);
            let v = if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            *w = v;
            sum += v;
        }
        if sum <= 0.0 {
            return Err(Error::invalid(format!(
                "mel filter {k} is narrower than one DFT bin"
            )));
        }
        for w in row.iter_mut() {
            *w /= sum;
        }
    }
    Ok(MelFilterbank {
        weights,
        sample_rate,
        dft_length,
    })
}

impl MelFilterbank {
    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn bands(&self) -> usize {
        self.dft_length / 2 + 1
    }

    /// Matrix-vector product with a length-`bands` vector.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.bands());
        self.weights
            .iter()
            .map(|row| row.iter().zip(v.iter()).map(|(w, x)| w * x).sum())
            .collect()
    }
}

/// Mel projection of one pair's per-band diffuseness vector.
pub fn project_pair(d_vector: &[f64], fb: &MelFilterbank) -> Vec<f64> {
    fb.apply(d_vector)
}

/// Per-pair CDR estimates at one frame: `cdr[m][nu]`.
#[derive(Debug, Clone)]
pub struct CdrFrame {
    pub cdr: Vec<Vec<f64>>,
    pub frame_index: usize,
}

/// CDR estimates for every pair of one coherence frame. `gamma_diff_clipped`
/// holds the per-pair diffuse coherence already clipped to [0, 1].
pub fn cdr_frame(
    coherence: &crate::stft::CoherenceFrame,
    gamma_diff_clipped: &[Vec<f64>],
    cdr_max: f64,
) -> CdrFrame {
    CdrFrame {
        cdr: coherence
            .gamma
            .iter()
            .zip(gamma_diff_clipped.iter())
            .map(|(gamma_row, gd_row)| {
                gamma_row
                    .iter()
                    .zip(gd_row.iter())
                    .map(|(&g, &gd)| cdr_from_coherence(g, gd, cdr_max))
                    .collect()
            })
            .collect(),
        frame_index: coherence.frame_index,
    }
}

/// Pooled diffuseness statistics of one frame: the cross-pair mean, the
/// scaled cross-pair variance, and the per-pair mel vectors they came from.
#[derive(Debug, Clone)]
pub struct DiffusenessDistribution {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub per_pair: Vec<Vec<f64>>,
}

/// Cross-pair mean and unbiased variance, the variance multiplied by
/// `var_scale`. Needs at least two pairs.
pub fn pool_pairs(per_pair: &[Vec<f64>], var_scale: f64) -> Result<DiffusenessDistribution> {
    let m = per_pair.len();
    if m < 2 {
        return Err(Error::invalid("pooling needs at least 2 pairs"));
    }
    if !(var_scale.is_finite() && var_scale >= 0.0) {
        return Err(Error::invalid("var_scale must be non-negative"));
    }
    let dim = per_pair[0].len();
    if per_pair.iter().any(|row| row.len() != dim) {
        return Err(Error::dimension("pair rows have different lengths"));
    }
    let mut mean = vec![0.0; dim];
    for row in per_pair {
        for (acc, v) in mean.iter_mut().zip(row.iter()) {
            *acc += v;
        }
    }
    for acc in mean.iter_mut() {
        *acc /= m as f64;
    }
    let mut variance = vec![0.0; dim];
    for row in per_pair {
        for k in 0..dim {
            let d = row[k] - mean[k];
            variance[k] += d * d;
        }
    }
    for v in variance.iter_mut() {
        *v *= var_scale / (m - 1) as f64;
    }
    Ok(DiffusenessDistribution {
        mean,
        variance,
        per_pair: per_pair.to_vec(),
    })
}

/// Parameters of the diffuseness feature chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusenessParams {
    pub cdr_max: f64,
    pub var_scale: f64,
    pub n_mel: usize,
    /// Coherence forgetting factor.
    pub lambda: f64,
}

impl Default for DiffusenessParams {
    fn default() -> Self {
        Self {
            cdr_max: DEFAULT_CDR_MAX,
            var_scale: DEFAULT_VAR_SCALE,
            n_mel: DEFAULT_N_MEL,
            lambda: 0.8,
        }
    }
}

/// Full diffuseness branch: pair coherence -> CDR -> diffuseness -> mel
/// projection -> cross-pair pooling, one distribution per frame.
pub fn extract_diffuseness(
    spectrograms: &[Spectrogram],
    geometry: &ArrayGeometry,
    params: &DiffusenessParams,
) -> Result<Vec<DiffusenessDistribution>> {
    if spectrograms.len() != geometry.num_mics() {
        return Err(Error::dimension(format!(
            "{} spectrograms for {} mics",
            spectrograms.len(),
            geometry.num_mics()
        )));
    }
    let config = &spectrograms[0].config;
    let fb = build_mel_filterbank(config.sample_rate, config.dft_length, params.n_mel)?;
    // negative sinc lobes clipped to 0 before entering the estimator
    let gd: Vec<Vec<f64>> = gamma_diff_all_pairs(geometry, config)?
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();
    let frames = coherence_frames(spectrograms, &geometry.pairs(), params.lambda)?;
    frames
        .iter()
        .map(|cf| {
            let cdr = cdr_frame(cf, &gd, params.cdr_max);
            let per_pair: Vec<Vec<f64>> = cdr
                .cdr
                .iter()
                .map(|row| {
                    let d: Vec<f64> = row.iter().map(|&c| diffuseness(c)).collect();
                    project_pair(&d, &fb)
                })
                .collect();
            pool_pairs(&per_pair, params.var_scale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn cdr_fully_diffuse_is_zero() {
        for gd in [0.1, 0.5, 0.9] {
            let cdr = cdr_from_coherence(Complex64::new(gd, 0.0), gd, DEFAULT_CDR_MAX);
            assert!(cdr.abs() < 1e-12, "gd={gd}: {cdr}");
        }
    }

    #[test]
    fn cdr_unit_coherence_hits_cap() {
        let cdr = cdr_from_coherence(Complex64::new(1.0, 0.0), 0.5, DEFAULT_CDR_MAX);
        assert_eq!(cdr, DEFAULT_CDR_MAX);
    }

    /// Forward mixing model as oracle: the estimator must recover the
    /// generating CDR for any phase.
    #[test]
    fn cdr_recovers_forward_model() {
        let gd = 0.5;
        let true_cdr = 3.0;
        for k in 0..64 {
            let theta = std::f64::consts::TAU * k as f64 / 64.0;
            let gamma = (Complex64::from_polar(true_cdr, theta) + gd) / (true_cdr + 1.0);
            let est = cdr_from_coherence(gamma, gd, DEFAULT_CDR_MAX);
            assert!(
                (est - true_cdr).abs() < 1e-6 * true_cdr,
                "theta={theta}: {est}"
            );
        }
    }

    #[test]
    fn cdr_is_doa_independent() {
        let (true_cdr, gd) = (2.0, 0.4);
        let reference =
            cdr_from_coherence((Complex64::from_polar(true_cdr, 0.0) + gd) / 3.0, gd, 1e4);
        for k in 1..360 {
            let theta = std::f64::consts::TAU * k as f64 / 360.0;
            let gamma = (Complex64::from_polar(true_cdr, theta) + gd) / (true_cdr + 1.0);
            let est = cdr_from_coherence(gamma, gd, 1e4);
            assert!((est - reference).abs() < 1e-6, "theta={theta}");
        }
    }

    #[test]
    fn cdr_clamps_to_valid_range_on_unit_disc() {
        let rng = CounterRng::new(42);
        for i in 0..20_000u64 {
            let r = rng.uniform_at(3 * i).sqrt();
            let th = std::f64::consts::TAU * rng.uniform_at(3 * i + 1);
            let gd = rng.uniform_at(3 * i + 2);
            let gamma = Complex64::from_polar(r, th);
            let cdr = cdr_from_coherence(gamma, gd, DEFAULT_CDR_MAX);
            assert!((0.0..=DEFAULT_CDR_MAX).contains(&cdr));
            let d = diffuseness(cdr);
            assert!(d > 0.0 && d <= 1.0);
        }
    }

    #[test]
    fn diffuseness_known_values() {
        assert_eq!(diffuseness(0.0), 1.0);
        assert_eq!(diffuseness(1.0), 0.5);
        assert_eq!(diffuseness(3.0), 0.25);
    }

    #[test]
    fn diffuseness_strictly_decreasing() {
        let rng = CounterRng::new(7);
        for i in 0..10_000u64 {
            let a = rng.uniform_at(2 * i) * 100.0;
            let b = rng.uniform_at(2 * i + 1) * 100.0;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if lo < hi {
                assert!(diffuseness(lo) > diffuseness(hi));
            }
        }
    }

    #[test]
    fn mel_rows_sum_to_one_and_cover_bands() {
        let fb = build_mel_filterbank(16000, 512, 24).unwrap();
        assert_eq!(fb.weights.len(), 24);
        assert_eq!(fb.weights[0].len(), 257);
        for row in &fb.weights {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&w| w >= 0.0));
        }
        // every interior band is covered by some filter
        for nu in 1..256 {
            let covered = fb.weights.iter().any(|row| row[nu] > 0.0);
            assert!(covered, "band {nu} uncovered");
        }
    }

    #[test]
    fn mel_degenerate_config_rejected() {
        // far more filters than bins in the low range
        assert!(build_mel_filterbank(16000, 512, 255).is_err());
        assert!(build_mel_filterbank(16000, 512, 0).is_err());
    }

    #[test]
    fn mel_constant_vector_preserved() {
        let fb = build_mel_filterbank(16000, 512, 24).unwrap();
        let ones = fb.apply(&vec![1.0; 257]);
        for v in &ones {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let zeros = fb.apply(&vec![0.0; 257]);
        assert!(zeros.iter().all(|&v| v == 0.0));
        let c = fb.apply(&vec![0.37; 257]);
        for v in &c {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn mel_indicator_selects_column() {
        let fb = build_mel_filterbank(16000, 512, 24).unwrap();
        let mut d = vec![0.0; 257];
        d[100] = 1.0;
        let x = fb.apply(&d);
        for (k, v) in x.iter().enumerate() {
            assert_eq!(*v, fb.weights[k][100]);
        }
    }

    #[test]
    fn mel_apply_matches_naive_product() {
        let fb = build_mel_filterbank(16000, 512, 24).unwrap();
        let rng = CounterRng::new(9);
        let d: Vec<f64> = (0..257).map(|i| rng.uniform_at(i as u64)).collect();
        let fast = fb.apply(&d);
        for k in 0..24 {
            let mut acc = 0.0;
            for nu in 0..257 {
                acc += fb.weights[k][nu] * d[nu];
            }
            assert!((fast[k] - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn pool_identical_rows_zero_variance() {
        // dyadic values so the mean of 28 copies is exact
        let row: Vec<f64> = (0..24).map(|k| 0.25 + k as f64 / 128.0).collect();
        let pooled = pool_pairs(&vec![row.clone(); 28], 0.1).unwrap();
        assert_eq!(pooled.mean, row);
        assert!(pooled.variance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pool_two_rows_matches_closed_form() {
        let a = vec![0.2, 0.4, 0.6];
        let b = vec![0.4, 0.1, 0.6];
        let pooled = pool_pairs(&[a.clone(), b.clone()], 1.0).unwrap();
        for k in 0..3 {
            assert!((pooled.mean[k] - (a[k] + b[k]) / 2.0).abs() < 1e-15);
            let expect = (a[k] - b[k]) * (a[k] - b[k]) / 2.0;
            assert!((pooled.variance[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn pool_matches_two_pass_oracle() {
        let rng = CounterRng::new(11);
        let per_pair: Vec<Vec<f64>> = (0..28)
            .map(|m| {
                (0..24)
                    .map(|k| rng.uniform_at((m * 24 + k) as u64))
                    .collect()
            })
            .collect();
        let pooled = pool_pairs(&per_pair, 0.1).unwrap();
        for k in 0..24 {
            let mean: f64 = per_pair.iter().map(|r| r[k]).sum::<f64>() / 28.0;
            let var: f64 =
                per_pair.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / 27.0 * 0.1;
            assert!((pooled.mean[k] - mean).abs() < 1e-12);
            assert!((pooled.variance[k] - var).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_single_row_rejected() {
        assert!(pool_pairs(&[vec![0.5; 24]], 0.1).is_err());
    }

    #[test]
    fn cdr_frame_applies_estimator_per_cell() {
        let gamma = vec![
            vec![Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(0.2, 0.1), Complex64::new(0.0, 0.0)],
        ];
        let cf = crate::stft::CoherenceFrame {
            gamma: gamma.clone(),
            frame_index: 3,
        };
        let gd = vec![vec![0.5, 0.5], vec![0.3, 0.0]];
        let out = cdr_frame(&cf, &gd, 1e4);
        assert_eq!(out.frame_index, 3);
        for m in 0..2 {
            for nu in 0..2 {
                assert_eq!(out.cdr[m][nu], cdr_from_coherence(gamma[m][nu], gd[m][nu], 1e4));
            }
        }
        assert_eq!(out.cdr[0][1], 1e4, "unit coherence hits the cap");
    }

    #[test]
    fn variance_scale_is_linear() {
        let rng = CounterRng::new(13);
        let per_pair: Vec<Vec<f64>> = (0..8)
            .map(|m| (0..24).map(|k| rng.uniform_at((m * 24 + k) as u64)).collect())
            .collect();
        let v1 = pool_pairs(&per_pair, 0.1).unwrap().variance;
        let v2 = pool_pairs(&per_pair, 0.2).unwrap().variance;
        for (a, b) in v1.iter().zip(v2.iter()) {
            assert_eq!(*b, *a * 2.0);
        }
    }
}
