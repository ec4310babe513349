use std::f64::consts::PI;

use kws_fewshot::frontend::{load_wav, write_pcm, FrontendConfig, MfccExtractor, Waveform};

const RATE: f64 = 16000.0;
const N_FFT: usize = 640;
const HOP: usize = 320;
const MELS: usize = 40;

fn tone(freq: f64) -> Waveform {
    let samples = (0..16000)
        .map(|n| 0.5 * (2.0 * PI * freq * n as f64 / RATE).sin())
        .collect();
    Waveform::new(samples, 16000)
}

/// Power spectra by the textbook DFT sum over a periodic Hann window.
fn dft_power(x: &[f64]) -> Vec<Vec<f64>> {
    let frames = (x.len() - N_FFT) / HOP + 1;
    (0..frames)
        .map(|t| {
            let frame: Vec<f64> = (0..N_FFT)
                .map(|n| {
                    let w = (PI * n as f64 / N_FFT as f64).sin().powi(2);
                    x[t * HOP + n] * w
                })
                .collect();
            (0..=N_FFT / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, v) in frame.iter().enumerate() {
                        let a = -2.0 * PI * (k * n % N_FFT) as f64 / N_FFT as f64;
                        re += v * a.cos();
                        im += v * a.sin();
                    }
                    re * re + im * im
                })
                .collect()
        })
        .collect()
}

/// Triangular filters evenly spaced on the HTK mel scale, 20 Hz to 8 kHz.
fn mel_filters() -> Vec<Vec<f64>> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let (lo, hi) = (mel(20.0), mel(8000.0));
    let edge = |i: usize| hz(lo + (hi - lo) * i as f64 / (MELS + 1) as f64);
    (0..MELS)
        .map(|m| {
            let (a, b, c) = (edge(m), edge(m + 1), edge(m + 2));
            (0..=N_FFT / 2)
                .map(|k| {
                    let f = k as f64 * RATE / N_FFT as f64;
                    if f <= a || f >= c {
                        0.0
                    } else if f <= b {
                        (f - a) / (b - a)
                    } else {
                        (c - f) / (c - b)
                    }
                })
                .collect()
        })
        .collect()
}

fn max_rel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let peak = b.iter().flatten().cloned().fold(0.0, f64::max);
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs() / peak)
        .fold(0.0, f64::max)
}

#[test]
fn tone_spectra_match_direct_dft() {
    let w = tone(1000.0);
    let ex = MfccExtractor::new(&FrontendConfig::default()).unwrap();
    let oracle = dft_power(&w.samples);
    let power = ex.power_spectrogram(&w).unwrap();
    assert_eq!(power.len(), 49);
    let err = max_rel(&power, &oracle);
    assert!(err < 1e-6, "power spectrum error {err:e}");
    // The tone sits exactly on bin 40.
    let frame = &power[10];
    let peak = (0..frame.len()).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
    assert_eq!(peak, 40);

    let filters = mel_filters();
    let mel_oracle: Vec<Vec<f64>> = oracle
        .iter()
        .map(|s| filters.iter().map(|f| f.iter().zip(s).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let err = max_rel(&ex.mel_spectrogram(&w).unwrap(), &mel_oracle);
    assert!(err < 1e-6, "mel energy error {err:e}");
}

#[test]
fn cepstra_are_orthonormal_dct_of_log_mel() {
    let w = tone(1000.0);
    let ex = MfccExtractor::new(&FrontendConfig::default()).unwrap();
    let mel = ex.mel_spectrogram(&w).unwrap();
    let fm = ex.compute(&w).unwrap();
    assert_eq!(fm.shape(), (49, 10));
    for (t, bands) in mel.iter().enumerate() {
        let logs: Vec<f64> = bands.iter().map(|e| e.max(1e-10).ln()).collect();
        for q in 0..10 {
            let norm = if q == 0 { 1.0 / MELS as f64 } else { 2.0 / MELS as f64 }.sqrt();
            let c: f64 = logs
                .iter()
                .enumerate()
                .map(|(m, l)| l * (PI * q as f64 * (2 * m + 1) as f64 / (2 * MELS) as f64).cos())
                .sum::<f64>()
                * norm;
            assert!((fm.get(t, q) - c).abs() < 1e-9 * c.abs().max(1.0));
        }
    }
}

#[test]
fn identical_files_give_identical_features() {
    let dir = tempfile::tempdir().unwrap();
    let pcm: Vec<i16> = tone(440.0).samples.iter().map(|v| (v * 20000.0) as i16).collect();
    let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    write_pcm(&a, &pcm, 16000).unwrap();
    write_pcm(&b, &pcm, 16000).unwrap();
    let ex = MfccExtractor::new(&FrontendConfig::default()).unwrap();
    let fa = ex.compute(&load_wav(&a).unwrap()).unwrap();
    let fb = ex.compute(&load_wav(&b).unwrap()).unwrap();
    assert_eq!(fa, fb);
}
