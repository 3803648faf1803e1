use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use pnda_core::ImageSample;
use pnda_harness::generate_synthetic_corpus;

use crate::{CliError, CorpusConfig, CorpusKind, Result};

pub const DATA_DIR_ENV: &str = "PNDA_DATA_DIR";

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn load_corpus(cfg: &CorpusConfig) -> Result<Vec<ImageSample>> {
    match cfg.kind {
        CorpusKind::Synthetic => Ok(generate_synthetic_corpus(&cfg.spec)?),
        CorpusKind::Directory => {
            let root = match &cfg.path {
                Some(p) => p.clone(),
                None => std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).ok_or_else(|| {
                    CliError::Config(format!("corpus.path is unset and {DATA_DIR_ENV} is not defined"))
                })?,
            };
            load_directory(&root, cfg.size)
        }
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Reads `root/<class>/<image>`; classes are labelled in sorted name order
/// and ids are `<class>/<file stem>`.
pub fn load_directory(root: &Path, size: Option<usize>) -> Result<Vec<ImageSample>> {
    let classes: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    let mut out = Vec::new();
    let mut side = size;
    for (label, class_dir) in classes.iter().enumerate() {
        let class = class_dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        for file in sorted_entries(class_dir)? {
            let ext = file.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
                continue;
            }
            let img = image::open(&file)
                .map_err(|e| CliError::Config(format!("cannot decode {}: {e}", file.display())))?
                .to_rgb8();
            let target = *side.get_or_insert(img.width() as usize);
            let img = if img.width() as usize == target && img.height() as usize == target {
                img
            } else if size.is_some() {
                image::imageops::resize(&img, target as u32, target as u32, FilterType::Triangle)
            } else {
                return Err(CliError::Config(format!(
                    "{} is {}x{}, expected {target}x{target}; set corpus.size to resize",
                    file.display(),
                    img.width(),
                    img.height()
                )));
            };
            let pixels = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
            let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            out.push(ImageSample::new(format!("{class}/{stem}"), target, target, 3, pixels)?.with_label(label));
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("no images under {}", root.display())));
    }
    Ok(out)
}
