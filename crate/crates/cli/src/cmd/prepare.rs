use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use kws_fewshot::dataset::{write_class_list, ClipSource, Dataset};
use kws_fewshot::frontend::check_wav;
use kws_fewshot::synthetic::{NOISE_DIR, TESTING_LIST};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::AppConfig;
use crate::error::{io_err, CliError, CliResult};
use crate::files::{class_dirs, create_dir, wav_files};

pub struct PrepareArgs {
    pub data_root: PathBuf,
    /// Share of each class held out when the root has no testing list.
    pub test_fraction: f64,
}

/// Scans a class-per-directory corpus, validates every clip, splits it and
/// writes manifests, class lists and a ready-to-use config into `out`.
pub fn run(cfg: &AppConfig, args: &PrepareArgs, out: &Path, seed: u64) -> CliResult<()> {
    if !(0.0..1.0).contains(&args.test_fraction) {
        return Err(CliError::validation("test fraction must lie in [0, 1)"));
    }
    let root = fs::canonicalize(&args.data_root).map_err(io_err(&args.data_root))?;
    let classes = class_dirs(&root)?;
    if classes.is_empty() {
        return Err(CliError::validation(format!(
            "{} has no class directories",
            root.display()
        )));
    }
    let testing = read_testing_list(&root)?;

    let mut train = Dataset::new();
    let mut test = Dataset::new();
    let mut counts = Vec::new();
    for (ci, (name, dir)) in classes.iter().enumerate() {
        let files = wav_files(dir)?;
        if files.is_empty() {
            return Err(CliError::validation(format!(
                "class directory {} has no WAV files",
                dir.display()
            )));
        }
        for f in &files {
            check_wav(f)?;
        }
        let held_out: BTreeSet<usize> = match &testing {
            Some(list) => (0..files.len())
                .filter(|&i| list.contains(&format!("{name}/{}", file_name(&files[i]))))
                .collect(),
            None => {
                let mut order: Vec<usize> = (0..files.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(ci as u64);
                order.shuffle(&mut rng);
                let n = (files.len() as f64 * args.test_fraction).round() as usize;
                order.into_iter().take(n).collect()
            }
        };
        for (i, f) in files.iter().enumerate() {
            let target = if held_out.contains(&i) {
                &mut test
            } else {
                &mut train
            };
            target.push(name, ClipSource::File(f.clone()));
        }
        counts.push((name.clone(), files.len() - held_out.len(), held_out.len()));
    }

    let names: Vec<String> = classes.iter().map(|(n, _)| n.clone()).collect();
    let positive = cfg.eval.positive.clone();
    if let Some(p) = positive.iter().find(|p| !names.contains(p)) {
        return Err(CliError::validation(format!(
            "positive keyword {p:?} has no directory under {}",
            root.display()
        )));
    }
    let filler: Vec<String> = cfg
        .eval
        .filler
        .iter()
        .filter(|f| {
            let found = names.contains(f);
            if !found {
                log::warn!("filler class {f:?} not found; skipped");
            }
            found
        })
        .cloned()
        .collect();
    let negative: Vec<String> = if cfg.eval.negative.is_empty() {
        names
            .iter()
            .filter(|n| !positive.contains(n) && !filler.contains(n))
            .cloned()
            .collect()
    } else {
        cfg.eval.negative.clone()
    };
    let source: Vec<String> = names
        .iter()
        .filter(|n| !positive.contains(n))
        .cloned()
        .collect();

    create_dir(out)?;
    train.write_manifest(&out.join("train.tsv"), out)?;
    test.write_manifest(&out.join("test.tsv"), out)?;
    for (file, list) in [
        ("positive.txt", &positive),
        ("negative.txt", &negative),
        ("filler.txt", &filler),
        ("source.txt", &source),
    ] {
        write_class_list(&out.join(file), list)?;
    }

    let mut prepared = cfg.clone();
    let p = &mut prepared.paths;
    p.train_manifest = Some("train.tsv".into());
    p.test_manifest = Some("test.tsv".into());
    p.positive_list = Some("positive.txt".into());
    p.negative_list = Some("negative.txt".into());
    p.filler_list = Some("filler.txt".into());
    p.source_list = Some("source.txt".into());
    let noise = root.join(NOISE_DIR);
    if prepared.augment.noise_dir.is_none() && noise.is_dir() {
        prepared.augment.noise_dir = Some(noise);
    }
    prepared.save(&out.join("config.toml"))?;

    println!("{:<24} {:>7} {:>7}", "class", "train", "test");
    for (name, tr, te) in &counts {
        println!("{name:<24} {tr:>7} {te:>7}");
    }
    println!(
        "{} classes, {} train clips, {} test clips; {} positive, {} negative, {} filler",
        names.len(),
        train.len(),
        test.len(),
        positive.len(),
        negative.len(),
        filler.len()
    );
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

fn read_testing_list(root: &Path) -> CliResult<Option<BTreeSet<String>>> {
    let path = root.join(TESTING_LIST);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(Some(
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
    ))
}
