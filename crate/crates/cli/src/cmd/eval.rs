use std::path::{Path, PathBuf};

use kws_fewshot::dataset::{read_class_list, Dataset};
use kws_fewshot::eval::{run_eval, EvalProtocol};
use kws_fewshot::openset::ClassifierKind;
use kws_fewshot::trainer::TrainedModel;

use crate::config::{required, AppConfig};
use crate::error::CliResult;

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub kind: ClassifierKind,
}

/// The configured protocol with class lists from `paths.*_list` when set.
pub fn protocol(cfg: &AppConfig) -> CliResult<EvalProtocol> {
    let mut p = cfg.eval.clone();
    let p_ = &cfg.paths;
    for (slot, list, key) in [
        (&mut p.positive, &p_.positive_list, "positive_list"),
        (&mut p.negative, &p_.negative_list, "negative_list"),
        (&mut p.filler, &p_.filler_list, "filler_list"),
    ] {
        if list.is_some() {
            *slot = read_class_list(required(list, key)?)?;
        }
    }
    p.validate()?;
    Ok(p)
}

pub fn run(cfg: &AppConfig, args: &EvalArgs, out: &Path) -> CliResult<()> {
    cfg.frontend.validate()?;
    let protocol = protocol(cfg)?;
    let enroll_pool = Dataset::read_manifest(required(&cfg.paths.train_manifest, "train_manifest")?)?;
    let test = Dataset::read_manifest(required(&cfg.paths.test_manifest, "test_manifest")?)?;
    let model = TrainedModel::load(&args.checkpoint)?;
    let report = run_eval(&model, args.kind, &protocol, &enroll_pool, &test, &cfg.frontend)?;
    report.write(out)?;
    print!("{}", report.to_text());
    println!("wrote {}", out.display());
    Ok(())
}
