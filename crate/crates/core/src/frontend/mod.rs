//! Audio frontend: clip loading, MFCC feature maps and noise augmentation.

mod augment;
mod mfcc;
mod wav;

pub use augment::{mix_noise, AugmentationPolicy, NOISE_RETRIES};
pub use mfcc::{FeatureMap, MfccExtractor};
pub use wav::{
    check_wav, load_clip, load_pcm, load_wav, pad_or_crop, pcm_to_f64, read_wav_header, write_pcm, write_wav,
    WavInfo,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono audio at a fixed sample rate, samples scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub(crate) fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub clip_secs: f64,
    pub window_ms: f64,
    pub hop_fraction: f64,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub log_floor: f64,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            clip_secs: 1.0,
            window_ms: 40.0,
            hop_fraction: 0.5,
            n_mels: 40,
            n_mfcc: 10,
            log_floor: 1e-10,
            fmin_hz: 20.0,
            fmax_hz: 8000.0,
        }
    }
}

impl FrontendConfig {
    pub fn window_len(&self) -> usize {
        (self.sample_rate as f64 * self.window_ms / 1000.0).round() as usize
    }

    pub fn hop_len(&self) -> usize {
        (self.window_len() as f64 * self.hop_fraction).round() as usize
    }

    pub fn clip_len(&self) -> usize {
        (self.sample_rate as f64 * self.clip_secs).round() as usize
    }

    /// Number of frames produced for a clip of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        let win = self.window_len();
        if len < win {
            0
        } else {
            (len - win) / self.hop_len() + 1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("frontend: {m}")));
        if self.sample_rate == 0 || self.clip_secs <= 0.0 {
            return bad("sample_rate and clip_secs must be positive");
        }
        if self.window_len() < 2 || self.hop_len() == 0 {
            return bad("window and hop must be at least one sample");
        }
        if !(self.hop_fraction > 0.0 && self.hop_fraction <= 1.0) {
            return bad("hop_fraction must lie in (0, 1]");
        }
        if self.n_mels == 0 || self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad("need 0 < n_mfcc <= n_mels");
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive");
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return bad("need 0 <= fmin < fmax <= nyquist");
        }
        Ok(())
    }
}
