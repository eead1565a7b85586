//! Directories of numbered PNG frames with optional JSON sidecars.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use safegate_core::imaging::{read_png, Frame};
use safegate_core::perception::FrameManifest;

pub struct FrameFile {
    pub name: String,
    pub frame: Frame,
    pub manifest: Option<FrameManifest>,
}

/// PNG files in `dir`, ordered by file name. `0007.png` picks up
/// `0007.json` as its manifest when present.
pub fn load_dir(dir: &Path) -> Result<Vec<FrameFile>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no PNG frames in {}", dir.display());
    }
    paths
        .into_iter()
        .map(|path| {
            let frame = read_png(&path).with_context(|| format!("decoding {}", path.display()))?;
            let sidecar = path.with_extension("json");
            let manifest = if sidecar.exists() {
                let text = std::fs::read_to_string(&sidecar)?;
                Some(FrameManifest::from_json(&text).with_context(|| format!("parsing {}", sidecar.display()))?)
            } else {
                None
            };
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            Ok(FrameFile { name, frame, manifest })
        })
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<FrameManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FrameManifest::from_json(&text)?)
}
