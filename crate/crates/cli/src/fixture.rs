//! Deterministic scenario directories for `simulate`.
//!
//! ```text
//! <out>/frames/000.png ...   numbered frames
//! <out>/frames/002.json      manifest sidecars
//! <out>/profiles/<name>/     enrollment crops + contact.txt
//! <out>/labels.csv           frame,active ground truth per pair
//! ```

use std::path::Path;

use anyhow::Result;
use clap::ValueEnum;

use safegate_core::imaging::{write_png, Frame};
use safegate_core::perception::{DetectionKind, FrameManifest, ManifestBox};
use safegate_core::synth::{add_noise, background, face_crop, paste, FaceJitter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// A known visitor carrying a harmful item steps into view.
    Person,
    /// Sensor noise only.
    Quiet,
}

pub const WIDTH: u32 = 160;
pub const HEIGHT: u32 = 120;
pub const FRAMES: usize = 6;
pub const VISITOR: &str = "Reza";
pub const ITEM: &str = "gun";
const IDENTITY: u64 = 7;
const FACE_AT: (u32, u32) = (32, 12);
const ARRIVES: usize = 2;

pub fn generate(out: &Path, scenario: Scenario, seed: u64) -> Result<()> {
    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir)?;
    let bg = background(WIDTH, HEIGHT, 3, seed);
    let face = face_crop(IDENTITY, &FaceJitter::none());
    let mut labels = csv::Writer::from_path(out.join("labels.csv"))?;
    labels.write_record(["frame", "active"])?;

    for i in 0..FRAMES {
        let present = scenario == Scenario::Person && i >= ARRIVES;
        let mut f: Frame = bg.clone();
        if present {
            paste(&mut f, &face, FACE_AT.0, FACE_AT.1);
        }
        add_noise(&mut f, 2.0, seed.wrapping_mul(31).wrapping_add(i as u64));
        let name = format!("{i:03}");
        write_png(&f, frames_dir.join(format!("{name}.png")))?;
        if present {
            let manifest = FrameManifest {
                boxes: vec![ManifestBox {
                    kind: DetectionKind::Face,
                    bbox: [FACE_AT.0, FACE_AT.1, face.width(), face.height()],
                    person: Some(VISITOR.into()),
                    attributes: vec![],
                    items: vec![ITEM.into()],
                }],
            };
            std::fs::write(frames_dir.join(format!("{name}.json")), serde_json::to_string_pretty(&manifest)?)?;
        }
        if i > 0 {
            labels.write_record([name.as_str(), if i == ARRIVES && present { "1" } else { "0" }])?;
        }
    }
    labels.flush()?;

    if scenario == Scenario::Person {
        let dir = out.join("profiles").join(VISITOR);
        std::fs::create_dir_all(&dir)?;
        for s in 0..5u64 {
            write_png(&face_crop(IDENTITY, &FaceJitter::seeded(s)), dir.join(format!("{s:03}.png")))?;
        }
        std::fs::write(dir.join("contact.txt"), "reza@example.org\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(a.path(), Scenario::Person, 3).unwrap();
        generate(b.path(), Scenario::Person, 3).unwrap();
        for f in ["frames/000.png", "frames/004.png", "frames/004.json", "labels.csv", "profiles/Reza/002.png"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        assert!(!a.path().join("frames/001.json").exists());
    }
}
