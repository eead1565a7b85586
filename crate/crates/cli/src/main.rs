use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use safegate_core::change::Strategy;
use safegate_core::illumination::{assess_lighting, select_gamma};
use safegate_core::messaging::compose_message;
use safegate_core::perception::{DetectionContext, Describer};
use safegate_core::guidance::select_enrollment_frames;
use safegate_core::imaging::read_png;
use safegate_gateway::config::write_key_file;
use safegate_gateway::pipeline::{EnrollError, EnrollImage};
use safegate_gateway::{Engine, GatewayConfig, TokenKey};

mod fixture;
mod frames;
mod simulate;

#[derive(Parser)]
#[command(name = "safegate", version, about = "Accessible home-entrance monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Add face images for a person and retrain the model.
    Enroll {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        contact: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured store directory.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Directory of frames with face-box sidecars, sampled like a video.
        #[arg(long)]
        video: Option<PathBuf>,
        /// Pre-cropped face images.
        images: Vec<PathBuf>,
    },
    /// Replay numbered PNG frames through change detection (and optionally the
    /// whole pipeline).
    Simulate {
        #[arg(long)]
        frames_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `binary[:t]`, `adaptive[:block[:c]]` or `otsu`.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        area: Option<u64>,
        /// CSV with `frame,active` columns; adds precision/recall to the summary.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Write per-pair rows here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Run the full pipeline and deliver notifications here.
        #[arg(long)]
        outbox: Option<PathBuf>,
        /// Run the full pipeline and record activity here.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Directory of `<name>/*.png` crops to enroll first.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value = "front")]
        camera: String,
        #[arg(long, default_value_t = 5.0)]
        fps: f64,
        #[arg(long, default_value_t = 0)]
        start_ms: u64,
    },
    /// Lighting, gamma and scene description for one image.
    Describe {
        #[arg(long)]
        image: PathBuf,
        /// Detection manifest for the image.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Recognise against the model in this store.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Create a transport key.
    Keygen {
        /// Write to this file (mode 0600) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a deterministic scenario directory.
    #[command(hide = true)]
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        scenario: fixture::Scenario,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>) -> Result<GatewayConfig> {
    match path {
        Some(p) => GatewayConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(GatewayConfig::default()),
    }
}

fn now_ms() -> u64 {
    safegate_gateway::server::now_ms()
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve { config } => serve(load_config(config.as_deref())?),
        Command::Enroll { name, contact, config, store, video, images } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = store {
                cfg.store_dir = s;
            }
            enroll(cfg, &name, &contact, video.as_deref(), &images)
        }
        Command::Simulate {
            frames_dir,
            config,
            strategy,
            area,
            labels,
            csv,
            outbox,
            store,
            profiles,
            camera,
            fps,
            start_ms,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = strategy {
                cfg.strategy = s.parse::<Strategy>()?.to_string();
            }
            if let Some(a) = area {
                cfg.area_threshold = a;
            }
            let pipeline = outbox.is_some() || store.is_some();
            if let Some(o) = outbox {
                cfg.outbox_dir = o;
            }
            if let Some(s) = store {
                cfg.store_dir = s;
            }
            if !(fps.is_finite() && fps > 0.0) {
                bail!("--fps must be positive");
            }
            let to_stderr = csv.is_none();
            let args = simulate::SimulateArgs {
                frames_dir,
                config: cfg,
                labels,
                csv,
                pipeline,
                profiles,
                camera,
                fps,
                start_ms,
            };
            let summary = simulate::run(&args)?;
            simulate::print_summary(&summary, to_stderr)
        }
        Command::Describe { image, manifest, store, config } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = store {
                cfg.store_dir = s;
            }
            describe(cfg, &image, manifest.as_deref())
        }
        Command::Keygen { out } => {
            let key = TokenKey::generate();
            match out {
                Some(p) => {
                    write_key_file(&p, &key)?;
                    eprintln!("wrote {}", p.display());
                }
                None => println!("{}", key.to_base64()),
            }
            Ok(())
        }
        Command::Fixture { out, scenario, seed } => fixture::generate(&out, scenario, seed),
    }
}

fn serve(cfg: GatewayConfig) -> Result<()> {
    let key = cfg
        .load_key()
        .context("no transport key: set SAFEGATE_KEY or key_path (see `safegate keygen`)")?;
    let engine = Arc::new(Engine::builder(cfg.clone()).build()?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        safegate_gateway::server::serve(cfg, engine, key, shutdown).await
    })?;
    Ok(())
}

fn enroll(cfg: GatewayConfig, name: &str, contact: &str, video: Option<&Path>, images: &[PathBuf]) -> Result<()> {
    let mut batch = Vec::new();
    for p in images {
        let frame = read_png(p).with_context(|| format!("decoding {}", p.display()))?;
        batch.push(EnrollImage { frame, face: None });
    }
    if let Some(dir) = video {
        let frames = frames::load_dir(dir)?;
        let faces: Vec<_> = frames.iter().map(|f| f.frame.clone()).collect();
        let crops = select_enrollment_frames(&faces, |i, _| {
            Ok(frames[i]
                .manifest
                .as_ref()
                .and_then(|m| m.boxes.iter().find(|b| b.kind == safegate_core::perception::DetectionKind::Face))
                .map(|b| b.bbox()))
        })?;
        if crops.is_empty() {
            bail!("no centred face in any of the {} frames of {}", frames.len(), dir.display());
        }
        eprintln!("selected {} of {} frames", crops.len(), frames.len());
        batch.extend(crops.into_iter().map(|frame| EnrollImage { frame, face: None }));
    }
    if batch.is_empty() {
        bail!("give face images or --video");
    }
    let engine = Engine::builder(cfg).build()?;
    match engine.enroll(name, contact, &batch, now_ms()) {
        Ok(o) => {
            println!("{}", serde_json::to_string_pretty(&o)?);
            Ok(())
        }
        Err(EnrollError::NoUsableFace { labels }) => bail!("no usable face: {labels:?}"),
        Err(EnrollError::Other(e)) => Err(e.into()),
    }
}

fn describe(cfg: GatewayConfig, image: &Path, manifest: Option<&Path>) -> Result<()> {
    let frame = read_png(image).with_context(|| format!("decoding {}", image.display()))?;
    let manifest = manifest.map(frames::read_manifest).transpose()?;
    let lighting = assess_lighting(&frame);
    let gamma = select_gamma(&frame);
    println!(
        "lighting: {} (dark fraction {:.3})",
        serde_json::to_value(lighting.condition)?.as_str().unwrap_or("?"),
        lighting.dark_fraction
    );
    println!("gamma: {:.2}", gamma.gamma());

    let engine = Engine::builder(cfg.clone()).build()?;
    let ctx = DetectionContext {
        manifest: manifest.as_ref(),
        regions: &[],
        area_threshold: cfg.area_threshold,
    };
    let observations = Describer::default().describe_scene(&frame, &engine.model(), &ctx)?;
    if observations.is_empty() {
        println!("persons: none detected");
        return Ok(());
    }
    for o in &observations {
        println!("person: {} at {} [{}]", o.name, o.position, o.desc_words.join(", "));
    }
    println!("message: {}", compose_message(&observations, &cfg.compose_options())?);
    Ok(())
}
