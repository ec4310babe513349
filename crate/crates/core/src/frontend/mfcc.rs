use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FrontendConfig, Waveform};
use crate::error::{Error, Result};

/// Row-major `frames x coeffs` MFCC matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub frames: usize,
    pub coeffs: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(frames: usize, coeffs: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != frames * coeffs {
            return Err(Error::Shape(format!(
                "feature map {frames}x{coeffs} needs {} values, got {}",
                frames * coeffs,
                values.len()
            )));
        }
        Ok(Self {
            frames,
            coeffs,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.coeffs)
    }

    pub fn get(&self, frame: usize, coeff: usize) -> f64 {
        self.values[frame * self.coeffs + coeff]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Power-spectrum MFCC extractor: Hann window, |FFT|^2, triangular Mel
/// filterbank, floored natural log, orthonormal DCT-II truncated to
/// `n_mfcc` coefficients.
#[derive(Clone)]
pub struct MfccExtractor {
    cfg: FrontendConfig,
    window: Vec<f64>,
    /// `n_mels x n_bins`, row-major.
    filterbank: Vec<f64>,
    /// `n_mfcc x n_mels`, row-major.
    dct: Vec<f64>,
    n_bins: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

pub(crate) fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub(crate) fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

impl MfccExtractor {
    pub fn new(cfg: &FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let n_fft = cfg.window_len();
        let n_bins = n_fft / 2 + 1;

        // Periodic Hann.
        let window = (0..n_fft)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / n_fft as f64).cos())
            .collect();

        let mel_lo = hz_to_mel(cfg.fmin_hz);
        let mel_hi = hz_to_mel(cfg.fmax_hz);
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / n_fft as f64;
        let mut filterbank = vec![0.0; cfg.n_mels * n_bins];
        for m in 0..cfg.n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let rise = (f - lo) / (mid - lo);
                let fall = (hi - f) / (hi - mid);
                filterbank[m * n_bins + k] = rise.min(fall).max(0.0);
            }
        }

        let n_mels = cfg.n_mels;
        let mut dct = vec![0.0; cfg.n_mfcc * n_mels];
        for q in 0..cfg.n_mfcc {
            let scale = if q == 0 {
                (1.0 / n_mels as f64).sqrt()
            } else {
                (2.0 / n_mels as f64).sqrt()
            };
            for m in 0..n_mels {
                dct[q * n_mels + m] =
                    scale * (PI * q as f64 * (m as f64 + 0.5) / n_mels as f64).cos();
            }
        }

        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Ok(Self {
            cfg: cfg.clone(),
            window,
            filterbank,
            dct,
            n_bins,
            fft,
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Filter weights as `n_mels` rows over the FFT bins.
    pub fn filterbank(&self) -> Vec<&[f64]> {
        self.filterbank.chunks(self.n_bins).collect()
    }

    fn check(&self, w: &Waveform) -> Result<usize> {
        if w.sample_rate != self.cfg.sample_rate {
            return Err(Error::InvalidArgument(format!(
                "waveform at {} Hz, frontend expects {} Hz",
                w.sample_rate, self.cfg.sample_rate
            )));
        }
        let frames = self.cfg.frames_for(w.len());
        if frames == 0 {
            return Err(Error::InvalidArgument(format!(
                "waveform of {} samples is shorter than one {}-sample window",
                w.len(),
                self.cfg.window_len()
            )));
        }
        Ok(frames)
    }

    /// Per-frame power spectra, `frames x n_bins`.
    pub fn power_spectrogram(&self, w: &Waveform) -> Result<Vec<Vec<f64>>> {
        let frames = self.check(w)?;
        let n_fft = self.cfg.window_len();
        let hop = self.cfg.hop_len();
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let frame = &w.samples[t * hop..t * hop + n_fft];
            for ((b, &x), &win) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex::new(x * win, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            out.push(buf[..self.n_bins].iter().map(|c| c.norm_sqr()).collect());
        }
        Ok(out)
    }

    /// Mel band energies before the log, `frames x n_mels`.
    pub fn mel_spectrogram(&self, w: &Waveform) -> Result<Vec<Vec<f64>>> {
        let power = self.power_spectrogram(w)?;
        Ok(power
            .iter()
            .map(|spec| {
                self.filterbank
                    .chunks(self.n_bins)
                    .map(|row| row.iter().zip(spec).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect())
    }

    pub fn compute(&self, w: &Waveform) -> Result<FeatureMap> {
        let mel = self.mel_spectrogram(w)?;
        let n_mels = self.cfg.n_mels;
        let n_mfcc = self.cfg.n_mfcc;
        let mut values = Vec::with_capacity(mel.len() * n_mfcc);
        let mut logmel = vec![0.0; n_mels];
        for bands in &mel {
            for (l, &e) in logmel.iter_mut().zip(bands) {
                *l = e.max(self.cfg.log_floor).ln();
            }
            for q in 0..n_mfcc {
                let row = &self.dct[q * n_mels..(q + 1) * n_mels];
                values.push(row.iter().zip(&logmel).map(|(a, b)| a * b).sum());
            }
        }
        FeatureMap::new(mel.len(), n_mfcc, values)
    }
}
