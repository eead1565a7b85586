//! Offline replay of a frame directory.
//!
//! Always emits one CSV row per consecutive frame pair. With `--outbox` or
//! `--store` the frames also run through the full gateway pipeline, so
//! notifications land in the outbox and activity in the recording store.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use safegate_core::change::{detect_changes, ChangeConfig, Evaluation};
use safegate_core::imaging::read_png;
use safegate_core::messaging::FileOutbox;
use safegate_gateway::pipeline::EnrollImage;
use safegate_gateway::{Engine, GatewayConfig};

use crate::frames::{load_dir, FrameFile};

pub struct SimulateArgs {
    pub frames_dir: PathBuf,
    pub config: GatewayConfig,
    pub labels: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub pipeline: bool,
    pub profiles: Option<PathBuf>,
    pub camera: String,
    pub fps: f64,
    pub start_ms: u64,
}

#[derive(Debug, Serialize)]
struct PairRow<'a> {
    prev: &'a str,
    curr: &'a str,
    has_activity: bool,
    regions: usize,
    changed_pixels: u64,
    largest_region: u64,
    pixel_threshold: Option<u8>,
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    frame: String,
    active: u8,
}

#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub frames: usize,
    pub active_pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    pub notifications: usize,
    pub outbox_records: usize,
    pub segments: usize,
}

fn read_labels(path: &Path) -> Result<HashMap<String, bool>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for row in rdr.deserialize() {
        let row: LabelRow = row?;
        out.insert(row.frame, row.active != 0);
    }
    Ok(out)
}

fn enroll_profiles(engine: &Engine, dir: &Path, now_ms: u64) -> Result<()> {
    let mut people: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    people.sort();
    for person in people {
        let name = person.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let contact = std::fs::read_to_string(person.join("contact.txt")).unwrap_or_default();
        let mut crops: Vec<PathBuf> = std::fs::read_dir(&person)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .collect();
        crops.sort();
        let images = crops
            .iter()
            .map(|p| Ok(EnrollImage { frame: read_png(p)?, face: None }))
            .collect::<Result<Vec<_>>>()?;
        let out = engine
            .enroll(&name, contact.trim(), &images, now_ms)
            .map_err(|e| anyhow::anyhow!("enrolling {name}: {e}"))?;
        tracing::info!(%name, person_id = %out.person_id, version = out.model_version, "enrolled");
    }
    Ok(())
}

fn evaluate(frames: &[FrameFile], active: &[bool], labels: &HashMap<String, bool>) -> Evaluation {
    let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
    for (f, &predicted) in frames[1..].iter().zip(active) {
        let stem = f.name.trim_end_matches(".png");
        let Some(&truth) = labels.get(&f.name).or_else(|| labels.get(stem)) else { continue };
        match (predicted, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    Evaluation::from_counts(tp, fp, fneg, tn)
}

pub fn run(args: &SimulateArgs) -> Result<Summary> {
    let frames = load_dir(&args.frames_dir)?;
    let change: ChangeConfig = args.config.change_config()?;

    let sink: Box<dyn Write> = match &args.csv {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut out = csv::Writer::from_writer(sink);
    let mut active = Vec::with_capacity(frames.len());
    for pair in frames.windows(2) {
        let r = detect_changes(&pair[0].frame, &pair[1].frame, &change)
            .with_context(|| format!("{} -> {}", pair[0].name, pair[1].name))?;
        out.serialize(PairRow {
            prev: &pair[0].name,
            curr: &pair[1].name,
            has_activity: r.has_activity,
            regions: r.regions.len(),
            changed_pixels: r.changed_pixels,
            largest_region: r.regions.iter().map(|g| g.area).max().unwrap_or(0),
            pixel_threshold: r.pixel_threshold,
        })?;
        active.push(r.has_activity);
    }
    out.flush()?;

    let mut summary = Summary {
        frames: frames.len(),
        active_pairs: active.iter().filter(|a| **a).count(),
        ..Summary::default()
    };
    if let Some(path) = &args.labels {
        summary.evaluation = Some(evaluate(&frames, &active, &read_labels(path)?));
    }

    if args.pipeline {
        let engine = Engine::builder(args.config.clone()).build()?;
        if let Some(dir) = &args.profiles {
            enroll_profiles(&engine, dir, args.start_ms)?;
        }
        let step = (1000.0 / args.fps).round().max(1.0) as u64;
        for (i, f) in frames.iter().enumerate() {
            let ts = args.start_ms + i as u64 * step;
            let report = engine.process_frame(&args.camera, ts, f.frame.clone(), f.manifest.as_ref())?;
            if let Some(e) = &report.error {
                tracing::warn!(frame = %f.name, error = %e, "perception failed");
            }
            if let Some(n) = &report.notification {
                tracing::info!(frame = %f.name, decision = ?n.decision, message = %n.message);
                summary.notifications += usize::from(n.status == safegate_core::messaging::DeliveryStatus::Sent);
            }
        }
        summary.outbox_records = FileOutbox::new(&args.config.outbox_dir).records().map(|r| r.len()).unwrap_or(0);
        summary.segments = engine.store().recordings().len();
    }
    Ok(summary)
}

pub fn print_summary(summary: &Summary, to_stderr: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    if to_stderr {
        eprintln!("{text}");
    } else {
        println!("{text}");
    }
    Ok(())
}
