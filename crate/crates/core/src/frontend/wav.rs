use std::path::Path;

use super::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Header facts needed to validate a clip without decoding it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
    pub frames: u32,
}

fn open(path: &Path) -> Result<hound::WavReader<std::io::BufReader<std::fs::File>>> {
    hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::audio(path, other.to_string()),
    })
}

pub fn read_wav_header(path: &Path) -> Result<WavInfo> {
    let reader = open(path)?;
    let spec = reader.spec();
    Ok(WavInfo {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        bits_per_sample: spec.bits_per_sample,
        frames: reader.duration(),
    })
}

/// Header of a clip that has the supported format (16-bit mono 16 kHz).
pub fn check_wav(path: &Path) -> Result<WavInfo> {
    let reader = open(path)?;
    let spec = reader.spec();
    check_format(path, &spec)?;
    Ok(WavInfo {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        bits_per_sample: spec.bits_per_sample,
        frames: reader.duration(),
    })
}

fn check_format(path: &Path, spec: &hound::WavSpec) -> Result<()> {
    if spec.channels != 1 {
        return Err(Error::audio(
            path,
            format!("expected mono, found {} channels", spec.channels),
        ));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::audio(
            path,
            format!(
                "expected {SAMPLE_RATE} Hz, found {} Hz (resampling is not supported)",
                spec.sample_rate
            ),
        ));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::audio(path, "expected 16-bit integer PCM"));
    }
    Ok(())
}

/// Reads the raw samples of a 16-bit mono 16 kHz file.
pub fn load_pcm(path: &Path) -> Result<Vec<i16>> {
    let mut reader = open(path)?;
    check_format(path, &reader.spec())?;
    reader
        .samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::audio(path, e.to_string()))
}

/// Decodes a whole 16-bit mono 16 kHz file, without length adjustment.
pub fn load_wav(path: &Path) -> Result<Waveform> {
    let samples = load_pcm(path)?.into_iter().map(pcm_to_f64).collect();
    Ok(Waveform::new(samples, SAMPLE_RATE))
}

pub fn pcm_to_f64(v: i16) -> f64 {
    v as f64 / 32768.0
}

/// Loads a clip and fits it to exactly `target_len` samples.
pub fn load_clip(path: &Path, target_len: usize) -> Result<Waveform> {
    let w = load_wav(path)?;
    Ok(Waveform::new(
        pad_or_crop(&w.samples, target_len),
        w.sample_rate,
    ))
}

/// Symmetric zero padding for short input, centre crop for long input.
/// An odd surplus goes to the right side on padding and is dropped from the
/// right side on cropping.
pub fn pad_or_crop(samples: &[f64], target_len: usize) -> Vec<f64> {
    let len = samples.len();
    if len == target_len {
        return samples.to_vec();
    }
    if len < target_len {
        let left = (target_len - len) / 2;
        let mut out = vec![0.0; target_len];
        out[left..left + len].copy_from_slice(samples);
        out
    } else {
        let start = (len - target_len) / 2;
        samples[start..start + target_len].to_vec()
    }
}

/// Writes 16-bit mono PCM. Samples are clamped to [-1, 1].
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let pcm: Vec<i16> = samples.iter().map(|&s| quantize(s)).collect();
    write_pcm(path, &pcm, sample_rate)
}

/// Writes raw 16-bit samples unchanged.
pub fn write_pcm(path: &Path, pcm: &[i16], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::audio(path, other.to_string()),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &s in pcm {
        writer.write_sample(s).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

pub(crate) fn quantize(s: f64) -> i16 {
    (s.clamp(-1.0, 1.0) * 32767.0).round() as i16
}
