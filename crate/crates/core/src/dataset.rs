//! Labelled clip collections and tab-separated manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frontend::{load_clip, load_pcm, pad_or_crop, pcm_to_f64, Waveform, SAMPLE_RATE};

/// Where a clip's samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ClipSource {
    File(PathBuf),
    /// 16-bit PCM held in memory, decoded exactly like a WAV file.
    Pcm(Arc<Vec<i16>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub source: ClipSource,
    /// Index into [`Dataset::class_names`].
    pub label: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    class_names: Vec<String>,
    clips: Vec<Clip>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn clips(&self) -> &[Clip] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    fn intern(&mut self, name: &str) -> usize {
        match self.class_id(name) {
            Some(i) => i,
            None => {
                self.class_names.push(name.to_string());
                self.class_names.len() - 1
            }
        }
    }

    pub fn push(&mut self, class: &str, source: ClipSource) {
        let label = self.intern(class);
        self.clips.push(Clip { source, label });
    }

    /// Clip indices per class id, in insertion order.
    pub fn by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_names.len()];
        for (i, c) in self.clips.iter().enumerate() {
            out[c.label].push(i);
        }
        out
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in &self.clips {
            *out.entry(self.class_names[c.label].clone()).or_insert(0) += 1;
        }
        out
    }

    /// Keeps only clips whose class is in `classes`, in the given class order.
    pub fn restrict(&self, classes: &[String]) -> Result<Dataset> {
        let mut out = Dataset::new();
        for name in classes {
            let id = self
                .class_id(name)
                .ok_or_else(|| Error::Dataset(format!("class {name:?} not in dataset")))?;
            out.intern(name);
            for c in self.clips.iter().filter(|c| c.label == id) {
                out.push(name, c.source.clone());
            }
        }
        Ok(out)
    }

    /// Drops the given classes.
    pub fn without(&self, classes: &[String]) -> Result<Dataset> {
        let keep: Vec<String> = self
            .class_names
            .iter()
            .filter(|c| !classes.contains(c))
            .cloned()
            .collect();
        self.restrict(&keep)
    }

    pub fn load_audio(&self, index: usize, target_len: usize) -> Result<Waveform> {
        match &self.clips[index].source {
            ClipSource::File(p) => load_clip(p, target_len),
            ClipSource::Pcm(pcm) => {
                let raw: Vec<f64> = pcm.iter().map(|&v| pcm_to_f64(v)).collect();
                Ok(Waveform::new(pad_or_crop(&raw, target_len), SAMPLE_RATE))
            }
        }
    }

    /// Decodes every file-backed clip into memory, validating formats.
    pub fn preload(&self) -> Result<Dataset> {
        let clips = self
            .clips
            .iter()
            .map(|c| {
                let source = match &c.source {
                    ClipSource::File(p) => ClipSource::Pcm(Arc::new(load_pcm(p)?)),
                    other => other.clone(),
                };
                Ok(Clip {
                    source,
                    label: c.label,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            class_names: self.class_names.clone(),
            clips,
        })
    }

    /// Reads `path<TAB>label` lines; relative paths resolve against the
    /// manifest's directory.
    pub fn read_manifest(path: &Path) -> Result<Dataset> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut ds = Dataset::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (file, label) = line.split_once('\t').ok_or_else(|| {
                Error::Dataset(format!(
                    "{}:{}: expected `path<TAB>label`",
                    path.display(),
                    n + 1
                ))
            })?;
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::Dataset(format!(
                    "{}:{}: empty label",
                    path.display(),
                    n + 1
                )));
            }
            ds.push(label, ClipSource::File(base.join(file)));
        }
        Ok(ds)
    }

    /// Writes file-backed clips with paths relative to `root`.
    pub fn write_manifest(&self, path: &Path, root: &Path) -> Result<()> {
        let mut out = String::new();
        for c in &self.clips {
            let ClipSource::File(p) = &c.source else {
                return Err(Error::Dataset(
                    "only file-backed clips can go in a manifest".into(),
                ));
            };
            let rel = p.strip_prefix(root).unwrap_or(p);
            out.push_str(&format!(
                "{}\t{}\n",
                rel.display(),
                self.class_names[c.label]
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Reads a one-name-per-line class list.
pub fn read_class_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn write_class_list(path: &Path, classes: &[String]) -> Result<()> {
    let mut text = classes.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = Dataset::new();
        ds.push("yes", ClipSource::File(dir.path().join("yes/a.wav")));
        ds.push("no", ClipSource::File(dir.path().join("no/b.wav")));
        ds.push("yes", ClipSource::File(dir.path().join("yes/c.wav")));
        let m = dir.path().join("train.tsv");
        ds.write_manifest(&m, dir.path()).unwrap();
        assert!(fs::read_to_string(&m)
            .unwrap()
            .starts_with("yes/a.wav\tyes\n"));
        assert_eq!(Dataset::read_manifest(&m).unwrap(), ds);
        assert_eq!(ds.by_class(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn malformed_manifest_line() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("bad.tsv");
        fs::write(&m, "a.wav yes\n").unwrap();
        let err = Dataset::read_manifest(&m).unwrap_err().to_string();
        assert!(err.contains("bad.tsv:1"), "{err}");
    }

    #[test]
    fn restrict_and_without() {
        let mut ds = Dataset::new();
        for (i, c) in ["a", "b", "c", "a"].iter().enumerate() {
            ds.push(c, ClipSource::Pcm(Arc::new(vec![i as i16; 4])));
        }
        let r = ds.restrict(&["c".into(), "a".into()]).unwrap();
        assert_eq!(r.class_names(), ["c", "a"]);
        assert_eq!(r.len(), 3);
        let w = ds.without(&["a".into()]).unwrap();
        assert_eq!(w.class_names(), ["b", "c"]);
        assert!(ds.restrict(&["zzz".into()]).is_err());
    }

    #[test]
    fn pcm_clip_matches_wav_decoding() {
        let dir = tempfile::tempdir().unwrap();
        let pcm: Vec<i16> = (0..16000)
            .map(|i| ((i * 37) % 2000 - 1000) as i16)
            .collect();
        let path = dir.path().join("x.wav");
        crate::frontend::write_pcm(&path, &pcm, 16000).unwrap();
        let mut ds = Dataset::new();
        ds.push("k", ClipSource::File(path));
        ds.push("k", ClipSource::Pcm(Arc::new(pcm)));
        assert_eq!(
            ds.load_audio(0, 16000).unwrap(),
            ds.load_audio(1, 16000).unwrap()
        );
        let pre = ds.preload().unwrap();
        assert_eq!(pre.clips()[0], pre.clips()[1]);
    }
}
