use std::path::Path;

use piqflow_core::data::{attach_session_meta, load_items, load_ratings, load_session_meta, RatingFormat};
use piqflow_core::data::{ItemRecord, SessionRecord};
use piqflow_core::raster;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub mod imaging;
pub mod modeling;
pub mod study;

/// What a command prints: a JSON value under `--json`, text otherwise.
pub struct Report {
    pub value: serde_json::Value,
    pub text: String,
}

impl Report {
    pub fn new(value: &impl Serialize, text: impl Into<String>) -> CliResult<Self> {
        Ok(Report {
            value: serde_json::to_value(value)?,
            text: text.into(),
        })
    }
}

/// Fails with a validation error naming the first input that does not exist.
pub fn require<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<()> {
    match paths.into_iter().find(|p| !p.exists()) {
        Some(p) => Err(CliError::validation(format!("{}: no such file or directory", p.display()))),
        None => Ok(()),
    }
}

pub fn load_sessions(ratings: &Path, meta: Option<&Path>) -> CliResult<Vec<SessionRecord>> {
    let mut sessions = load_ratings(ratings, RatingFormat::from_path(ratings))?;
    if let Some(meta) = meta {
        attach_session_meta(&mut sessions, load_session_meta(meta)?);
    }
    Ok(sessions)
}

/// Loads items with relative image paths resolved against the items file.
pub fn load_items_resolved(path: &Path) -> CliResult<Vec<ItemRecord>> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut items = load_items(path)?;
    for item in &mut items {
        if item.source_path.is_relative() {
            item.source_path = base.join(&item.source_path);
        }
    }
    Ok(items)
}

pub fn load_pixels(item: &ItemRecord) -> piqflow_core::Result<raster::RgbImage> {
    raster::load_rgb(&item.source_path)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    create_parent(path)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Stable 64-bit hash (FNV-1a) for deriving per-item seeds.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a("a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn relative_item_paths_follow_the_items_file() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("set");
        std::fs::create_dir(&sub).unwrap();
        std::fs::write(
            sub.join("items.csv"),
            "item_id,kind,parent_id,width,height,path\na,whole-image,,64,64,img/a.png\nb,whole-image,,64,64,/abs/b.png\n",
        )
        .unwrap();
        let items = load_items_resolved(&sub.join("items.csv")).unwrap();
        assert_eq!(items[0].source_path, sub.join("img/a.png"));
        assert_eq!(items[1].source_path, PathBuf::from("/abs/b.png"));
    }
}
