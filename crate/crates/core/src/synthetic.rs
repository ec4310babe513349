//! Generated tone-sequence "keyword" corpus for smoke tests and demos.
//!
//! Every class is a fixed sequence of three tones picked from a log-spaced
//! frequency grid. Utterances jitter onset, segment length, pitch and level,
//! and sit on a white-noise floor. The noise pool holds a few coloured
//! noises for augmentation.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{ClipSource, Dataset};
use crate::error::{Error, Result};
use crate::frontend::{write_pcm, write_wav, SAMPLE_RATE};
use crate::trainer::{EpisodeConfig, LossConfig, LossKind, LrSchedule, TrainConfig, TrainSchedule};

/// File listing test-split clips, relative to the data root.
pub const TESTING_LIST: &str = "testing_list.txt";
/// Directory holding noise recordings inside a data root.
pub const NOISE_DIR: &str = "_background_noise_";
const MAX_SIGNATURE_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    /// Classes reserved for encoder training; the rest are targets.
    pub source_classes: usize,
    pub filler_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub grid_size: usize,
    pub tones_per_word: usize,
    /// Floor-noise SNR range in dB.
    pub snr_db: (f64, f64),
    pub noise_clips: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 30,
            source_classes: 20,
            filler_classes: 5,
            train_per_class: 40,
            test_per_class: 20,
            grid_size: 10,
            tones_per_word: 3,
            snr_db: (10.0, 20.0),
            noise_clips: 4,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.source_classes == 0
            || self.source_classes >= self.num_classes
            || self.filler_classes >= self.source_classes
        {
            return Err(Error::InvalidArgument(
                "need 0 < filler < source < total classes".into(),
            ));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 || self.tones_per_word == 0 {
            return Err(Error::InvalidArgument("empty synthetic split".into()));
        }
        let combos = (self.grid_size as f64).powi(self.tones_per_word as i32);
        if combos < self.num_classes as f64 * 2.0 {
            return Err(Error::InvalidArgument(
                "tone grid too small for the requested class count".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub train: Dataset,
    pub test: Dataset,
    /// Held-out target keywords.
    pub positive: Vec<String>,
    /// Source classes used as the unknown test pool.
    pub negative: Vec<String>,
    /// Source classes used for the unknown prototype.
    pub filler: Vec<String>,
    pub noise_pool: Vec<Vec<f64>>,
    /// Tone frequencies (Hz) of every class.
    pub signatures: Vec<Vec<f64>>,
}

/// Short schedule for the synthetic corpus: 5 epochs of 100 episodes of 80
/// clips. Relative to the full recipe, triplet episodes still span twice as
/// many classes as prototypical ones, queries outnumber supports 3 to 1 and
/// 4 of 10 classes play unknown.
pub fn desk_train_config(kind: LossKind, seed: u64) -> TrainConfig {
    TrainConfig {
        loss: LossConfig {
            kind,
            unknown_classes: 4,
            ..Default::default()
        },
        schedule: TrainSchedule {
            epochs: 5,
            episodes_per_epoch: 100,
            lr: LrSchedule {
                decay_epoch: 3,
                ..Default::default()
            },
            seed,
        },
        episode: EpisodeConfig {
            proto_classes: 10,
            support: 2,
            query: 6,
            triplet_classes: 20,
            triplet_per_class: 4,
        },
    }
}

pub fn class_name(i: usize) -> String {
    format!("kw{i:02}")
}

impl SyntheticCorpus {
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let grid: Vec<f64> = (0..spec.grid_size)
            .map(|i| 300.0 * (3400.0f64 / 300.0).powf(i as f64 / (spec.grid_size - 1) as f64))
            .collect();
        let mut chosen: Vec<Vec<usize>> = Vec::with_capacity(spec.num_classes);
        let mut attempts = 0usize;
        while chosen.len() < spec.num_classes {
            attempts += 1;
            if attempts > MAX_SIGNATURE_DRAWS {
                return Err(Error::InvalidArgument(
                    "could not draw enough distinct tone signatures".into(),
                ));
            }
            let idx: Vec<usize> = (0..spec.tones_per_word)
                .map(|_| rng.random_range(0..spec.grid_size))
                .collect();
            // Avoid a tone repeated back to back, which would blur segments,
            // and words that differ from another word in a single tone.
            let min_diff = spec.tones_per_word.min(2);
            if idx.windows(2).any(|w| w[0] == w[1])
                || chosen
                    .iter()
                    .any(|o| o.iter().zip(&idx).filter(|(a, b)| a != b).count() < min_diff)
            {
                continue;
            }
            chosen.push(idx);
        }
        let signatures: Vec<Vec<f64>> = chosen
            .iter()
            .map(|idx| idx.iter().map(|&i| grid[i]).collect())
            .collect();
        let mut train = Dataset::new();
        let mut test = Dataset::new();
        for (c, sig) in signatures.iter().enumerate() {
            let name = class_name(c);
            for i in 0..spec.train_per_class + spec.test_per_class {
                let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
                r.set_stream(((c as u64) << 32) | (i as u64 + 1));
                let pcm = Arc::new(quantize_all(&utterance(sig, spec.snr_db, &mut r)));
                let target = if i < spec.train_per_class {
                    &mut train
                } else {
                    &mut test
                };
                target.push(&name, ClipSource::Pcm(pcm));
            }
        }
        let names: Vec<String> = (0..spec.num_classes).map(class_name).collect();
        let noise_pool = (0..spec.noise_clips)
            .map(|k| {
                let mut r = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
                r.set_stream(k as u64);
                coloured_noise(k % 4, 2 * SAMPLE_RATE as usize, &mut r)
            })
            .collect();
        Ok(Self {
            train,
            test,
            positive: names[spec.source_classes..].to_vec(),
            negative: names[spec.filler_classes..spec.source_classes].to_vec(),
            filler: names[..spec.filler_classes].to_vec(),
            noise_pool,
            signatures,
        })
    }

    pub fn source_classes(&self) -> Vec<String> {
        self.filler.iter().chain(&self.negative).cloned().collect()
    }

    /// Writes `root/<class>/<nnnn>.wav`, a testing list and the noise pool.
    pub fn write_to(&self, root: &Path) -> Result<()> {
        let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        let mut testing = String::new();
        for (ds, offset, is_test) in [(&self.train, 0, false), (&self.test, 100_000, true)] {
            for (class, idxs) in ds.class_names().iter().zip(ds.by_class()) {
                mkdir(&root.join(class))?;
                for (n, i) in idxs.into_iter().enumerate() {
                    let rel = format!("{class}/{:06}.wav", offset + n);
                    let ClipSource::Pcm(pcm) = &ds.clips()[i].source else {
                        return Err(Error::Dataset("synthetic clips are in memory".into()));
                    };
                    write_pcm(&root.join(&rel), pcm, SAMPLE_RATE)?;
                    if is_test {
                        testing.push_str(&rel);
                        testing.push('\n');
                    }
                }
            }
        }
        let list = root.join(TESTING_LIST);
        fs::write(&list, testing).map_err(|e| Error::io(&list, e))?;
        let noise_dir = root.join(NOISE_DIR);
        mkdir(&noise_dir)?;
        for (k, n) in self.noise_pool.iter().enumerate() {
            write_wav(&noise_dir.join(format!("noise_{k}.wav")), n, SAMPLE_RATE)?;
        }
        Ok(())
    }
}

fn quantize_all(x: &[f64]) -> Vec<i16> {
    x.iter()
        .map(|s| (s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
        .collect()
}

fn utterance<R: Rng>(signature: &[f64], snr_db: (f64, f64), rng: &mut R) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let n = SAMPLE_RATE as usize;
    let mut out = vec![0.0; n];
    let mut t0 = rng.random_range(0.08..0.25);
    let level = rng.random_range(0.25..0.5);
    for &f in signature {
        let dur = 0.18 * rng.random_range(0.85..1.15);
        let freq = f * rng.random_range(0.97..1.03);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = level * rng.random_range(0.8..1.0);
        let start = (t0 * sr) as usize;
        let len = (dur * sr) as usize;
        let ramp = (0.01 * sr) as usize;
        for k in 0..len.min(n.saturating_sub(start)) {
            let env = if k < ramp {
                0.5 - 0.5 * (PI * k as f64 / ramp as f64).cos()
            } else if k + ramp > len {
                0.5 - 0.5 * (PI * (len - k) as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            let t = k as f64 / sr;
            let x = (2.0 * PI * freq * t + phase).sin() + 0.3 * (4.0 * PI * freq * t + phase).sin();
            out[start + k] += amp * env * x;
        }
        t0 += dur + rng.random_range(0.02..0.05);
    }
    let p_sig = out.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let snr = rng.random_range(snr_db.0..=snr_db.1);
    let sigma = (p_sig / 10f64.powf(snr / 10.0)).sqrt();
    for v in &mut out {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
    out
}

/// 0 white, 1 pink-ish, 2 brown, 3 low-passed white.
fn coloured_noise<R: Rng>(kind: usize, len: usize, rng: &mut R) -> Vec<f64> {
    let white: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = match kind {
        0 => white,
        1 => {
            // Sum of one-pole filters at octave-spaced corners.
            let poles = [0.99886, 0.99332, 0.969, 0.8665, 0.55];
            let mut state = [0.0; 5];
            white
                .iter()
                .map(|&w| {
                    let mut acc = 0.0;
                    for (s, p) in state.iter_mut().zip(poles) {
                        *s = p * *s + (1.0 - p) * w;
                        acc += *s;
                    }
                    acc + 0.1 * w
                })
                .collect()
        }
        2 => {
            let mut s = 0.0;
            white
                .iter()
                .map(|&w| {
                    s = 0.995 * s + 0.05 * w;
                    s
                })
                .collect()
        }
        _ => {
            let mut s = 0.0;
            white
                .iter()
                .map(|&w| {
                    s = 0.8 * s + 0.2 * w;
                    s
                })
                .collect()
        }
    };
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in &mut out {
        *v *= 0.5 / peak;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 6,
            source_classes: 4,
            filler_classes: 1,
            train_per_class: 3,
            test_per_class: 2,
            ..Default::default()
        }
    }

    #[test]
    fn layout_and_partition() {
        let c = SyntheticCorpus::generate(&small()).unwrap();
        assert_eq!(c.train.len(), 18);
        assert_eq!(c.test.len(), 12);
        assert_eq!(c.positive, ["kw04", "kw05"]);
        assert_eq!(c.filler, ["kw00"]);
        assert_eq!(c.negative, ["kw01", "kw02", "kw03"]);
        let uniq: std::collections::BTreeSet<Vec<u64>> = c
            .signatures
            .iter()
            .map(|s| s.iter().map(|f| f.to_bits()).collect())
            .collect();
        assert_eq!(uniq.len(), 6);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = SyntheticCorpus::generate(&small()).unwrap();
        let b = SyntheticCorpus::generate(&small()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.noise_pool, b.noise_pool);
    }

    #[test]
    fn clips_are_in_range_and_audible() {
        let c = SyntheticCorpus::generate(&small()).unwrap();
        for i in 0..c.train.len() {
            let w = c.train.load_audio(i, 16000).unwrap();
            assert!(w.samples.iter().all(|v| v.abs() <= 1.0));
            assert!(w.power() > 1e-3);
        }
    }

    #[test]
    fn written_corpus_reloads_identically() {
        let dir = tempfile::tempdir().unwrap();
        let c = SyntheticCorpus::generate(&small()).unwrap();
        c.write_to(dir.path()).unwrap();
        let w = crate::frontend::load_clip(&dir.path().join("kw02/000001.wav"), 16000).unwrap();
        let idx = c.train.by_class()[2][1];
        assert_eq!(w, c.train.load_audio(idx, 16000).unwrap());
        let list = fs::read_to_string(dir.path().join(TESTING_LIST)).unwrap();
        assert_eq!(list.lines().count(), 12);
        assert!(dir.path().join(NOISE_DIR).join("noise_3.wav").exists());
    }
}
