use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use piqflow_core::data::{DistortionCategory, Rect};
use piqflow_core::feedback::{build_report, full_report, quality_bucket, select_best_frame, Assessor, QualityBucket};
use piqflow_core::maps::{self, MapKind, DEFAULT_ALPHA};
use piqflow_core::predictor::MultiTaskModel;
use piqflow_core::raster;
use piqflow_service::ServiceConfig;
use serde::Serialize;

use super::{display, require, Report};
use crate::config::FileConfig;
use crate::error::{CliError, CliResult};

fn load_model(flag: Option<PathBuf>, cfg: &FileConfig) -> CliResult<MultiTaskModel> {
    let path = cfg.model_path(flag)?;
    super::require([path.as_path()])?;
    Ok(MultiTaskModel::load(&path)?)
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Score only this region, given as x,y,w,h.
    #[arg(long)]
    pub region: Option<Rect>,
}

#[derive(Serialize)]
struct PredictOutput {
    quality: f64,
    bucket: QualityBucket,
    distortions: BTreeMap<DistortionCategory, f64>,
    region: Option<Rect>,
}

pub fn predict(args: PredictArgs, cfg: &FileConfig) -> CliResult<Report> {
    require([args.image.as_path()])?;
    let model = load_model(args.model, cfg)?;
    let pixels = raster::load_rgb(&args.image)?;
    let p = model.predict(&pixels, args.region)?;
    let out = PredictOutput {
        quality: p.quality,
        bucket: quality_bucket(p.quality)?,
        distortions: DistortionCategory::ALL
            .into_iter()
            .map(|c| (c, p.distortions.0[c.index()]))
            .collect(),
        region: args.region,
    };
    let mut text = format!("quality {:.1} ({})", out.quality, out.bucket);
    for (c, v) in &out.distortions {
        let _ = write!(text, "\n  {:<8} {v:.3}", c.name());
    }
    Report::new(&out, text)
}

#[derive(Args, Debug)]
pub struct MapArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Tile side in pixels [default: 64].
    #[arg(long)]
    pub tile: Option<u32>,
    /// Overlay opacity in [0, 1] [default: 0.8].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `quality` or a distortion category.
    #[arg(long, default_value = "quality")]
    pub kind: String,
    /// Overlay PNG to write; the grid goes next to it as JSON [default: <image>_map.png].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct MapOutput {
    png: String,
    grid_json: String,
    map: maps::SpatialMap,
}

fn default_map_path(image: &Path) -> PathBuf {
    let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into());
    image.with_file_name(format!("{stem}_map.png"))
}

pub fn map(args: MapArgs, cfg: &FileConfig) -> CliResult<Report> {
    let tile = args.tile.or(cfg.map.tile).unwrap_or(64);
    let alpha = args.alpha.or(cfg.map.alpha).unwrap_or(DEFAULT_ALPHA);
    let kind = match args.kind.as_str() {
        "quality" => MapKind::Quality,
        other => MapKind::Distortion(other.parse()?),
    };
    require([args.image.as_path()])?;
    let model = load_model(args.model, cfg)?;
    let pixels = raster::load_rgb(&args.image)?;
    let map = match kind {
        MapKind::Quality => maps::quality_map(&model, &pixels, tile)?,
        MapKind::Distortion(c) => maps::distortion_maps(&model, &pixels, tile)?
            .into_iter()
            .find(|m| m.kind == MapKind::Distortion(c))
            .ok_or_else(|| CliError::computation(format!("no map for {}", c.name())))?,
    };
    let overlay = maps::render(&map, &pixels, alpha)?;

    let png = args.out.unwrap_or_else(|| default_map_path(&args.image));
    let json = png.with_extension("json");
    super::create_parent(&png)?;
    raster::save_png(&overlay, &png)?;
    map.save_json(&json)?;

    let text = format!(
        "{} map ({}x{} tiles of {tile}px) written to {} and {}",
        map.kind.label(),
        map.rows(),
        map.cols(),
        display(&png),
        display(&json)
    );
    let out = MapOutput {
        png: display(&png),
        grid_json: display(&json),
        map,
    };
    Report::new(&out, text)
}

#[derive(Args, Debug)]
pub struct FeedbackArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Add per-region notes from a 3x3 grid.
    #[arg(long)]
    pub localized: bool,
}

pub fn feedback(args: FeedbackArgs, cfg: &FileConfig) -> CliResult<Report> {
    require([args.image.as_path()])?;
    let model = load_model(args.model, cfg)?;
    let pixels = raster::load_rgb(&args.image)?;
    let report = if args.localized {
        full_report(&model, &pixels)?
    } else {
        let p = model.assess(&pixels, None)?;
        build_report(p.quality, &p.distortions)?
    };
    let mut text = report.messages.join("\n");
    for note in &report.localized {
        let _ = write!(text, "\n  {} in the {}", note.category.name(), note.region);
    }
    Report::new(&report, text)
}

#[derive(Args, Debug)]
pub struct SelectFrameArgs {
    /// Directory of PNG or JPEG frames, taken in file-name order.
    pub dir: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Serialize)]
struct FrameOutput {
    index: usize,
    file: String,
    quality: f64,
    bucket: QualityBucket,
    qualities: Vec<f64>,
}

fn frame_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn select_frame(args: SelectFrameArgs, cfg: &FileConfig) -> CliResult<Report> {
    require([args.dir.as_path()])?;
    let files = frame_files(&args.dir)?;
    if files.is_empty() {
        return Err(CliError::validation(format!("no PNG or JPEG frames in {}", display(&args.dir))));
    }
    let model = load_model(args.model, cfg)?;
    let frames = files
        .iter()
        .map(|f| raster::load_rgb(f))
        .collect::<piqflow_core::Result<Vec<_>>>()?;
    let choice = select_best_frame(&frames, &model)?;
    let out = FrameOutput {
        index: choice.index,
        file: display(&files[choice.index]),
        quality: choice.quality,
        bucket: choice.bucket,
        qualities: choice.qualities,
    };
    let text = format!("best frame: {} (quality {:.1}, {})", out.file, out.quality, out.bucket);
    Report::new(&out, text)
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Address to listen on [default: 127.0.0.1:8080].
    #[arg(long)]
    pub bind: Option<String>,
}

pub fn serve(args: ServeArgs, cfg: &FileConfig) -> CliResult<Report> {
    let model = load_model(args.model, cfg)?;
    let mut config: ServiceConfig = cfg.service.clone();
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(piqflow_service::serve(model, config))?;
    Report::new(&serde_json::json!({ "stopped": true }), "server stopped")
}
