use std::path::Path;

use super::{Encoder, EncoderConfig, Head, SizeVariant};
use crate::container::{Container, Precision};
use crate::error::{Error, Result};

pub const CHECKPOINT_KIND: &str = "encoder";

impl Encoder {
    /// Writes config, seed and every named tensor into `c`. Other entries in
    /// the container are left alone, so trainers can add their own state.
    pub fn write_into(&self, c: &mut Container) {
        let cfg = &self.config;
        c.set_meta("encoder.size", cfg.size);
        c.set_meta("encoder.head", cfg.head);
        c.set_meta("encoder.channels", cfg.channels);
        c.set_meta("encoder.embedding_dim", cfg.embedding_dim());
        c.set_meta("encoder.num_blocks", cfg.num_blocks);
        c.set_meta(
            "encoder.stem_kernel",
            format!("{}x{}", cfg.stem_kernel.0, cfg.stem_kernel.1),
        );
        c.set_meta(
            "encoder.stem_stride",
            format!("{}x{}", cfg.stem_stride.0, cfg.stem_stride.1),
        );
        c.set_meta(
            "encoder.input",
            format!("{}x{}", cfg.input_frames, cfg.input_coeffs),
        );
        c.set_meta("encoder.bn_eps", cfg.bn_eps);
        c.set_meta("encoder.bn_momentum", cfg.bn_momentum);
        c.set_meta("encoder.ln_eps", cfg.ln_eps);
        c.set_meta("encoder.seed", self.seed);
        self.visit(&mut |name, t, _| {
            c.insert(format!("encoder.{name}"), t.clone());
        });
    }

    pub fn to_container(&self, precision: Precision) -> Container {
        let mut c = Container::new(precision);
        c.set_meta("kind", CHECKPOINT_KIND);
        self.write_into(&mut c);
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let pair = |key: &str| -> Result<(usize, usize)> {
            let raw = c.meta_str(key)?;
            raw.split_once('x')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| Error::Format(format!("bad value {raw:?} for {key:?}")))
        };
        let (input_frames, input_coeffs) = pair("encoder.input")?;
        let config = EncoderConfig {
            size: c.meta_parse::<SizeVariant>("encoder.size")?,
            head: c.meta_parse::<Head>("encoder.head")?,
            channels: c.meta_parse("encoder.channels")?,
            num_blocks: c.meta_parse("encoder.num_blocks")?,
            stem_kernel: pair("encoder.stem_kernel")?,
            stem_stride: pair("encoder.stem_stride")?,
            input_frames,
            input_coeffs,
            bn_eps: c.meta_parse("encoder.bn_eps")?,
            bn_momentum: c.meta_parse("encoder.bn_momentum")?,
            ln_eps: c.meta_parse("encoder.ln_eps")?,
        };
        let emb_dim: usize = c.meta_parse("encoder.embedding_dim")?;
        if emb_dim != config.embedding_dim() {
            return Err(Error::Shape(format!(
                "header embedding_dim {emb_dim} disagrees with {} channels",
                config.channels
            )));
        }
        let seed = c.meta_parse("encoder.seed")?;
        let mut enc = Encoder::new(config, seed)?;
        enc.load_tensors(&mut |name| c.tensors.get(&format!("encoder.{name}")).cloned())?;
        Ok(enc)
    }
}

pub fn save_checkpoint(encoder: &Encoder, path: &Path, precision: Precision) -> Result<()> {
    encoder.to_container(precision).save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Encoder> {
    Encoder::from_container(&Container::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_batch;
    use super::*;

    #[test]
    fn round_trip_reproduces_embeddings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.pkws");
        let mut enc = Encoder::new(EncoderConfig::small(Head::Norm), 4).unwrap();
        // Move the running statistics off their defaults.
        enc.forward_train(&random_batch(5, 11)).unwrap();
        save_checkpoint(&enc, &path, Precision::F64).unwrap();
        let back = load_checkpoint(&path).unwrap();
        let batch = random_batch(7, 12);
        assert_eq!(enc.embed(&batch).unwrap(), back.embed(&batch).unwrap());
        assert_eq!(back.config(), enc.config());
    }

    #[test]
    fn header_and_tensor_disagreement_is_a_shape_error() {
        let enc = Encoder::new(EncoderConfig::custom(Head::Conv, 8, 2), 0).unwrap();
        let mut c = enc.to_container(Precision::F64);
        c.set_meta("encoder.channels", 6);
        c.set_meta("encoder.embedding_dim", 6);
        assert!(matches!(Encoder::from_container(&c), Err(Error::Shape(_))));

        let mut c = enc.to_container(Precision::F64);
        c.set_meta("encoder.embedding_dim", 16);
        assert!(matches!(Encoder::from_container(&c), Err(Error::Shape(_))));
    }

    #[test]
    fn missing_tensor_is_reported() {
        let enc = Encoder::new(EncoderConfig::custom(Head::Conv, 4, 1), 0).unwrap();
        let mut c = enc.to_container(Precision::F64);
        c.tensors.remove("encoder.blocks.0.pw.bias");
        let err = Encoder::from_container(&c).unwrap_err().to_string();
        assert!(err.contains("blocks.0.pw.bias"), "{err}");
    }
}
