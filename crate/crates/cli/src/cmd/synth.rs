use std::path::Path;

use kws_fewshot::encoder::{Head, SizeVariant};
use kws_fewshot::synthetic::{desk_train_config, SyntheticCorpus, SyntheticSpec, NOISE_DIR};
use kws_fewshot::trainer::LossKind;

use crate::config::AppConfig;
use crate::error::CliResult;

pub const SYNTHETIC_CONFIG: &str = "synthetic.toml";

/// Writes the generated corpus under `out` together with a config sized
/// for it (DSCNN-S, short schedule, synthetic class lists).
pub fn run(out: &Path, seed: Option<u64>) -> CliResult<()> {
    let spec = SyntheticSpec {
        seed: seed.unwrap_or(SyntheticSpec::default().seed),
        ..Default::default()
    };
    let corpus = SyntheticCorpus::generate(&spec)?;
    corpus.write_to(out)?;
    let mut cfg = AppConfig::default();
    cfg.encoder.size = SizeVariant::Small;
    cfg.encoder.head = Head::Norm;
    cfg.train = desk_train_config(LossKind::Tl, 0);
    cfg.eval.positive = corpus.positive.clone();
    cfg.eval.negative = corpus.negative.clone();
    cfg.eval.filler = corpus.filler.clone();
    cfg.augment.noise_dir = Some(NOISE_DIR.into());
    cfg.save(&out.join(SYNTHETIC_CONFIG))?;
    println!(
        "wrote {} classes ({} train, {} test clips) and {} to {}",
        corpus.train.num_classes(),
        corpus.train.len(),
        corpus.test.len(),
        SYNTHETIC_CONFIG,
        out.display()
    );
    Ok(())
}
