use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kws_fewshot::container::{Container, Precision};
use kws_fewshot::dataset::{read_class_list, Dataset};
use kws_fewshot::encoder::Encoder;
use kws_fewshot::frontend::AugmentationPolicy;
use kws_fewshot::trainer::{EpisodeRecord, TrainObserver, Trainer};

use crate::config::{required, AppConfig};
use crate::error::{io_err, CliError, CliResult};
use crate::files::{create_dir, load_noise_pool};

pub const LOG_FILE: &str = "train.log";
pub const LOG_HEADER: &str = "epoch,episode,loss,lr";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

pub fn epoch_checkpoint(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch-{epoch:03}.ckpt"))
}

/// Highest-numbered epoch checkpoint in `dir`, if any.
fn latest_checkpoint(dir: &Path) -> CliResult<Option<PathBuf>> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        let n = p
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("epoch-")?.strip_suffix(".ckpt")?.parse().ok());
        if let Some(n) = n {
            if best.as_ref().is_none_or(|(b, _)| n > *b) {
                best = Some((n, p));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

struct CheckpointWriter {
    dir: PathBuf,
    log: BufWriter<File>,
    log_path: PathBuf,
}

impl CheckpointWriter {
    fn fail(&self, e: std::io::Error) -> kws_fewshot::Error {
        kws_fewshot::Error::Io {
            path: self.log_path.clone(),
            source: e,
        }
    }
}

impl TrainObserver for CheckpointWriter {
    fn on_episode(&mut self, rec: &EpisodeRecord) -> kws_fewshot::Result<()> {
        writeln!(self.log, "{}", rec.log_line()).map_err(|e| self.fail(e))
    }

    fn on_epoch_end(&mut self, epoch: usize, trainer: &Trainer) -> kws_fewshot::Result<()> {
        self.log.flush().map_err(|e| self.fail(e))?;
        let path = epoch_checkpoint(&self.dir, epoch);
        trainer.to_container(Precision::F64).save(&path)?;
        log::info!("epoch {epoch} done, saved {}", path.display());
        Ok(())
    }
}

/// Keeps the header and the records of epochs before `next_epoch`, so a
/// resumed run appends exactly the episodes it replays.
fn truncate_log(path: &Path, next_epoch: usize) -> CliResult<()> {
    let text = fs::read_to_string(path).unwrap_or_default();
    let mut kept = String::from(LOG_HEADER);
    kept.push('\n');
    for line in text.lines().skip(1) {
        let epoch: Option<usize> = line.split(',').next().and_then(|e| e.parse().ok());
        if epoch.is_some_and(|e| e < next_epoch) {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(io_err(path))
}

pub fn training_set(cfg: &AppConfig) -> CliResult<Dataset> {
    let manifest = required(&cfg.paths.train_manifest, "train_manifest")?;
    let all = Dataset::read_manifest(manifest)?;
    let ds = match &cfg.paths.source_list {
        Some(p) => all.restrict(&read_class_list(required(&Some(p.clone()), "source_list")?)?)?,
        None => {
            let positive = positive_classes(cfg)?;
            let keep: Vec<String> = all
                .class_names()
                .iter()
                .filter(|c| !positive.contains(c))
                .cloned()
                .collect();
            all.restrict(&keep)?
        }
    };
    Ok(ds)
}

pub fn positive_classes(cfg: &AppConfig) -> CliResult<Vec<String>> {
    match &cfg.paths.positive_list {
        Some(p) => Ok(read_class_list(required(&Some(p.clone()), "positive_list")?)?),
        None => Ok(cfg.eval.positive.clone()),
    }
}

pub fn augmentation(cfg: &AppConfig) -> CliResult<AugmentationPolicy> {
    let a = &cfg.augment;
    let noise_pool = match &a.noise_dir {
        Some(d) => load_noise_pool(required(&Some(d.clone()), "augment.noise_dir")?)?,
        None => Vec::new(),
    };
    Ok(AugmentationPolicy {
        apply_probability: a.apply_probability,
        snr_low_db: a.snr_low_db,
        snr_high_db: a.snr_high_db,
        noise_pool,
    })
}

pub fn run(cfg: &AppConfig, out: &Path, resume: bool) -> CliResult<()> {
    cfg.validate()?;
    let dataset = training_set(cfg)?;
    let augment = augmentation(cfg)?;
    create_dir(out)?;
    let log_path = out.join(LOG_FILE);

    let mut trainer = match latest_checkpoint(out)?.filter(|_| resume) {
        Some(path) => {
            let state = Container::load(&path)?;
            let t = Trainer::resume(&state, cfg.train, &cfg.frontend, augment)?;
            let expected = cfg.encoder.build()?;
            if t.encoder().config() != &expected {
                return Err(CliError::validation(format!(
                    "{} holds a different encoder than the config",
                    path.display()
                )));
            }
            log::info!("resuming from {} at epoch {}", path.display(), t.next_epoch());
            truncate_log(&log_path, t.next_epoch())?;
            t
        }
        None => {
            if resume {
                log::warn!("no epoch checkpoint in {}; starting fresh", out.display());
            }
            let encoder = Encoder::new(cfg.encoder.build()?, cfg.train.schedule.seed)?;
            fs::write(&log_path, format!("{LOG_HEADER}\n")).map_err(io_err(&log_path))?;
            Trainer::new(encoder, cfg.train, &cfg.frontend, augment)?
        }
    };
    log::info!(
        "training {} on {} clips of {} classes",
        cfg.train.loss.kind,
        dataset.len(),
        dataset.num_classes()
    );
    let file = OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(io_err(&log_path))?;
    let mut observer = CheckpointWriter {
        dir: out.to_path_buf(),
        log: BufWriter::new(file),
        log_path,
    };
    trainer.run(&dataset, &mut observer)?;
    observer.log.flush().map_err(io_err(&observer.log_path))?;
    let final_path = out.join(FINAL_CHECKPOINT);
    trainer.to_container(Precision::F64).save(&final_path)?;
    println!("wrote {}", final_path.display());
    Ok(())
}
