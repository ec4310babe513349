use std::fs;
use std::path::{Path, PathBuf};

use kws_fewshot::frontend::load_wav;

use crate::error::{io_err, CliResult};

fn sorted_entries(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        out.push(entry.map_err(io_err(dir))?.path());
    }
    out.sort();
    Ok(out)
}

fn hidden(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('_') || n.starts_with('.'))
}

/// Class subdirectories, skipping names that start with `_` or `.`.
pub fn class_dirs(root: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    Ok(sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir() && !hidden(p))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, p)
        })
        .collect())
}

/// `.wav` files directly inside `dir`, sorted by name.
pub fn wav_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect())
}

/// `.wav` files in `dir` and its subdirectories, sorted by path.
pub fn wav_files_recursive(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut out = wav_files(dir)?;
    for sub in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        out.extend(wav_files_recursive(&sub)?);
    }
    out.sort();
    Ok(out)
}

pub fn load_noise_pool(dir: &Path) -> CliResult<Vec<Vec<f64>>> {
    let pool = wav_files(dir)?
        .iter()
        .map(|p| load_wav(p).map(|w| w.samples))
        .collect::<Result<Vec<_>, _>>()?;
    log::info!("{} noise recordings from {}", pool.len(), dir.display());
    Ok(pool)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}
