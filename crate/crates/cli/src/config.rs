//! TOML application config. Every section is optional; missing keys take
//! the defaults of the library types, which follow the published training
//! recipe.

use std::fs;
use std::path::{Path, PathBuf};

use kws_fewshot::encoder::{EncoderConfig, Head, SizeVariant};
use kws_fewshot::eval::EvalProtocol;
use kws_fewshot::frontend::{AugmentationPolicy, FrontendConfig};
use kws_fewshot::openset::ClassifierKind;
use kws_fewshot::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub size: SizeVariant,
    pub head: Head,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            size: SizeVariant::Large,
            head: Head::Norm,
        }
    }
}

impl EncoderSection {
    pub fn build(&self) -> CliResult<EncoderConfig> {
        if self.size == SizeVariant::Custom {
            return Err(CliError::validation("encoder.size must be S or L"));
        }
        Ok(EncoderConfig::for_variant(self.size, self.head)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub apply_probability: f64,
    pub snr_low_db: f64,
    pub snr_high_db: f64,
    /// Directory of noise recordings; no augmentation when unset.
    pub noise_dir: Option<PathBuf>,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let p = AugmentationPolicy::default();
        Self {
            apply_probability: p.apply_probability,
            snr_low_db: p.snr_low_db,
            snr_high_db: p.snr_high_db,
            noise_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub kind: ClassifierKind,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::OpenNcm,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub train_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    /// Classes used for encoder training; defaults to every non-positive
    /// class of the train manifest.
    pub source_list: Option<PathBuf>,
    pub positive_list: Option<PathBuf>,
    pub negative_list: Option<PathBuf>,
    pub filler_list: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub frontend: FrontendConfig,
    pub encoder: EncoderSection,
    pub train: TrainConfig,
    pub augment: AugmentSection,
    pub classifier: ClassifierSection,
    pub eval: EvalProtocol,
    pub paths: PathsSection,
}

impl AppConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    pub fn dump(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.dump()?).map_err(io_err(path))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.train_manifest,
            &mut p.test_manifest,
            &mut p.source_list,
            &mut p.positive_list,
            &mut p.negative_list,
            &mut p.filler_list,
            &mut p.checkpoint_dir,
            &mut p.report_dir,
            &mut self.augment.noise_dir,
        ] {
            fix(slot);
        }
    }

    /// Applies the global `--seed` flag to training and evaluation.
    pub fn override_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.train.schedule.seed = s;
            self.eval.seed = s;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.frontend.validate()?;
        self.encoder.build()?.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        let a = &self.augment;
        AugmentationPolicy {
            apply_probability: a.apply_probability,
            snr_low_db: a.snr_low_db,
            snr_high_db: a.snr_high_db,
            noise_pool: Vec::new(),
        }
        .validate()?;
        Ok(())
    }
}

/// The path or a validation error naming the missing config key.
pub fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> CliResult<&'a Path> {
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::validation(format!("config key paths.{key} is not set")))?;
    if !p.exists() {
        return Err(CliError::validation(format!(
            "paths.{key}: {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}
