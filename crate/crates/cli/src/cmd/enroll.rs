use std::path::{Path, PathBuf};

use kws_fewshot::dataset::{ClipSource, Dataset};
use kws_fewshot::eval::embed_clips;
use kws_fewshot::frontend::MfccExtractor;
use kws_fewshot::linalg::Matrix;
use kws_fewshot::openset::{enroll, ClassifierKind, EnrollOptions};
use kws_fewshot::trainer::TrainedModel;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};
use crate::files::{class_dirs, create_dir, wav_files, wav_files_recursive};

pub const ENROLLMENT_FILE: &str = "enrollment.bin";

pub struct EnrollArgs {
    pub checkpoint: PathBuf,
    pub shots_dir: PathBuf,
    pub kind: ClassifierKind,
    /// Non-keyword clips for the openNCM unknown prototype.
    pub filler_dir: Option<PathBuf>,
}

fn embed_files(model: &TrainedModel, mfcc: &MfccExtractor, files: &[PathBuf]) -> CliResult<Matrix> {
    let mut ds = Dataset::new();
    for f in files {
        ds.push("clip", ClipSource::File(f.clone()));
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    Ok(embed_clips(&model.encoder, mfcc, &ds, &idx)?)
}

pub fn run(cfg: &AppConfig, args: &EnrollArgs, out: &Path) -> CliResult<()> {
    cfg.frontend.validate()?;
    let k = cfg.eval.k_shot;
    let model = TrainedModel::load(&args.checkpoint)?;
    if args.kind == ClassifierKind::DProto && model.generator.is_none() {
        return Err(CliError::validation(format!(
            "{} has no dummy-prototype generator; DProto needs a DPROTO-trained checkpoint",
            args.checkpoint.display()
        )));
    }
    let mfcc = MfccExtractor::new(&cfg.frontend)?;
    let keywords = class_dirs(&args.shots_dir)?;
    if keywords.is_empty() {
        return Err(CliError::validation(format!(
            "{} has no keyword directories",
            args.shots_dir.display()
        )));
    }
    let mut names = Vec::new();
    let mut groups = Vec::new();
    for (name, dir) in &keywords {
        let files = wav_files(dir)?;
        if files.len() < k {
            return Err(CliError::validation(format!(
                "keyword directory {} has {} clips, {k} needed",
                dir.display(),
                files.len()
            )));
        }
        groups.push(embed_files(&model, &mfcc, &files[..k])?);
        names.push(name.clone());
    }
    let filler = match (args.kind, &args.filler_dir) {
        (ClassifierKind::OpenNcm, Some(dir)) => {
            let files = wav_files_recursive(dir)?;
            if files.len() < k {
                return Err(CliError::validation(format!(
                    "filler directory {} has {} clips, {k} needed",
                    dir.display(),
                    files.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.eval.seed);
            let mut pick = sample(&mut rng, files.len(), k).into_vec();
            pick.sort_unstable();
            let chosen: Vec<PathBuf> = pick.into_iter().map(|i| files[i].clone()).collect();
            Some(embed_files(&model, &mfcc, &chosen)?)
        }
        (ClassifierKind::OpenNcm, None) => {
            return Err(CliError::validation(
                "openNCM enrollment needs --filler with non-keyword clips",
            ))
        }
        _ => None,
    };
    let opts = EnrollOptions {
        normalize: model.wants_normalization(),
        ..Default::default()
    };
    let enrollment = enroll(
        args.kind,
        &names,
        &groups,
        filler.as_ref(),
        model.generator.as_ref(),
        opts,
    )?;
    create_dir(out)?;
    let path = out.join(ENROLLMENT_FILE);
    enrollment.save(&path)?;
    println!(
        "enrolled {} keywords x {k} shots with {}: {}",
        names.len(),
        args.kind,
        names.join(" ")
    );
    println!("wrote {}", path.display());
    Ok(())
}
