use std::path::PathBuf;

use kws_fewshot::frontend::{load_clip, MfccExtractor};
use kws_fewshot::openset::{decide, Enrollment};
use kws_fewshot::trainer::TrainedModel;

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};

pub struct InferArgs {
    pub checkpoint: PathBuf,
    pub enrollment: PathBuf,
    pub clip: PathBuf,
    pub gamma: f64,
}

/// Prints the decision and then one `label probability` line per class,
/// unknown first.
pub fn run(cfg: &AppConfig, args: &InferArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&args.gamma) {
        return Err(CliError::validation("gamma must lie in [0, 1]"));
    }
    let model = TrainedModel::load(&args.checkpoint)?;
    let enrollment = Enrollment::load(&args.enrollment)?;
    if enrollment.dim() != model.encoder.embedding_dim() {
        return Err(CliError::validation(format!(
            "enrollment has {}-dimensional prototypes, checkpoint embeds to {}",
            enrollment.dim(),
            model.encoder.embedding_dim()
        )));
    }
    let mfcc = MfccExtractor::new(&cfg.frontend)?;
    let wave = load_clip(&args.clip, cfg.frontend.clip_len())?;
    let emb = model.encoder.embed(&[mfcc.compute(&wave)?])?;
    let scores = enrollment.score(emb.row(0))?;
    let y = decide(scores.probs(), args.gamma);
    println!("label {}", enrollment.label(y));
    for (i, p) in scores.probs().iter().enumerate() {
        println!("{} {p:.6}", enrollment.label(i));
    }
    Ok(())
}
