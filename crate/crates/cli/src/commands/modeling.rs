use std::collections::HashSet;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use piqflow_core::data::{
    crop_patches, load_item_stats, save_item_stats, save_items, CropMode, ItemKind, ItemRecord, ItemStats,
};
use piqflow_core::predictor::{
    build_samples, evaluate, split_dataset, train, DatasetSplit, EvalReport, MultiTaskModel, TrainConfig,
    TrainMode, DEFAULT_PROPORTIONS,
};
use piqflow_core::predictor::split::SplitPart;
use piqflow_core::{raster, synth};
use rayon::prelude::*;
use serde::Serialize;

use super::{display, fnv1a, load_items_resolved, load_pixels, write_csv, write_json, Report};
use crate::config::FileConfig;
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Distinct base scenes.
    #[arg(long, default_value_t = 20)]
    pub bases: usize,
    /// Distortion combinations rendered per scene (at most 27).
    #[arg(long, default_value_t = 6)]
    pub per_base: usize,
    /// Side length in pixels.
    #[arg(long, default_value_t = 96)]
    pub size: u32,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SynthSummary {
    out: String,
    images: usize,
}

/// Renders a labelled synthetic corpus: images, a manifest and ground-truth stats.
pub fn synth(args: SynthArgs, cfg: &FileConfig) -> CliResult<Report> {
    let seed = cfg.seed(args.seed)?;
    if args.bases == 0 || args.per_base == 0 || args.size < 32 {
        return Err(CliError::validation("need at least one base, one variant and a size of 32px"));
    }
    let corpus = synth::corpus(args.bases, args.per_base, args.size, seed);
    let image_dir = args.out.join("images");
    std::fs::create_dir_all(&image_dir)?;
    corpus
        .par_iter()
        .try_for_each(|img| raster::save_png(&img.pixels, &image_dir.join(format!("{}.png", img.item_id))))?;

    let items: Vec<ItemRecord> = corpus
        .iter()
        .map(|img| ItemRecord {
            item_id: img.item_id.clone(),
            kind: ItemKind::WholeImage,
            parent_id: None,
            width_px: args.size,
            height_px: args.size,
            source_path: PathBuf::from(format!("images/{}.png", img.item_id)),
        })
        .collect();
    let stats: Vec<ItemStats> = corpus
        .iter()
        .map(|img| ItemStats {
            item_id: img.item_id.clone(),
            mos: img.mos,
            stddev: 0.0,
            count: 1,
            distortion_prob: img.distortion.clone(),
        })
        .collect();
    save_items(&args.out.join("items.csv"), &items)?;
    save_item_stats(&args.out.join("item_stats.csv"), &stats)?;

    let summary = SynthSummary {
        out: display(&args.out),
        images: corpus.len(),
    };
    let text = format!("rendered {} images into {}", summary.images, summary.out);
    Report::new(&summary, text)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CropModeArg {
    Random,
    Salient,
}

impl From<CropModeArg> for CropMode {
    fn from(m: CropModeArg) -> Self {
        match m {
            CropModeArg::Random => CropMode::Random,
            CropModeArg::Salient => CropMode::Salient,
        }
    }
}

#[derive(Args, Debug)]
pub struct CropArgs {
    /// Item manifest; every whole image gets one patch.
    pub items: PathBuf,
    #[arg(long, value_enum)]
    pub mode: CropModeArg,
    /// Patch side as a fraction of the image side [default: 0.4].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Required for random crops.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for patch images [default: next to each parent].
    #[arg(long)]
    pub patch_dir: Option<PathBuf>,
    /// Manifest to write: the input items plus the new patches.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CropSummary {
    manifest: String,
    patches: usize,
}

pub fn crop(args: CropArgs, cfg: &FileConfig) -> CliResult<Report> {
    let mode = CropMode::from(args.mode);
    let seed = match mode {
        CropMode::Random => cfg.seed(args.seed)?,
        CropMode::Salient => 0,
    };
    let fraction = args.fraction.or(cfg.crop.fraction).unwrap_or(0.4);
    super::require([args.items.as_path()])?;
    let mut items = load_items_resolved(&args.items)?;
    if let Some(dir) = &args.patch_dir {
        std::fs::create_dir_all(dir)?;
    }

    let parents: Vec<&ItemRecord> = items.iter().filter(|i| i.kind == ItemKind::WholeImage).collect();
    let patches: Vec<ItemRecord> = parents
        .par_iter()
        .map(|parent| {
            let pixels = load_pixels(parent)?;
            let item_seed = seed ^ fnv1a(&parent.item_id);
            let mut patch = crop_patches(parent, &pixels, mode, fraction, item_seed)?;
            if let (Some(dir), Some(name)) = (&args.patch_dir, patch.record.source_path.file_name()) {
                patch.record.source_path = dir.join(name);
            }
            raster::save_png(&patch.pixels, &patch.record.source_path)?;
            Ok(patch.record)
        })
        .collect::<piqflow_core::Result<_>>()?;

    let existing: HashSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
    if let Some(dup) = patches.iter().find(|p| existing.contains(p.item_id.as_str())) {
        return Err(CliError::validation(format!("item `{}` already exists", dup.item_id)));
    }
    let n = patches.len();
    items.extend(patches);
    for item in &mut items {
        if let Ok(abs) = std::path::absolute(&item.source_path) {
            item.source_path = abs;
        }
    }
    super::create_parent(&args.out)?;
    save_items(&args.out, &items)?;

    let summary = CropSummary {
        manifest: display(&args.out),
        patches: n,
    };
    let text = format!("cropped {n} patches; manifest written to {}", summary.manifest);
    Report::new(&summary, text)
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    pub items: PathBuf,
    /// Train, validation and test shares [default: 0.603,0.196,0.201].
    #[arg(long, value_parser = parse_proportions)]
    pub proportions: Option<(f64, f64, f64)>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Split JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_proportions(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        &[a, b, c] => Ok((a, b, c)),
        _ => Err("expected three comma-separated shares".into()),
    }
}

#[derive(Serialize)]
struct SplitSummary {
    out: String,
    train: usize,
    validation: usize,
    test: usize,
}

pub fn split(args: SplitArgs, cfg: &FileConfig) -> CliResult<Report> {
    let seed = cfg.seed(args.seed)?;
    let proportions = match (args.proportions, cfg.split.proportions) {
        (Some(p), _) => p,
        (None, Some([a, b, c])) => (a, b, c),
        (None, None) => DEFAULT_PROPORTIONS,
    };
    super::require([args.items.as_path()])?;
    let items = load_items_resolved(&args.items)?;
    let split = split_dataset(&items, proportions, seed)?;
    super::create_parent(&args.out)?;
    split.save(&args.out)?;
    let summary = SplitSummary {
        out: display(&args.out),
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
    };
    let text = format!(
        "split {} items: {} train, {} validation, {} test",
        items.len(),
        summary.train,
        summary.validation,
        summary.test
    );
    Report::new(&summary, text)
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Item manifest.
    #[arg(long)]
    pub items: PathBuf,
    /// Item statistics CSV.
    #[arg(long)]
    pub stats: PathBuf,
    /// Split JSON from `split`.
    #[arg(long)]
    pub split: PathBuf,
}

impl DataArgs {
    fn require(&self) -> CliResult<()> {
        super::require([self.items.as_path(), self.stats.as_path(), self.split.as_path()])
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Mlp,
    Ridge,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Hidden units of the MLP body [default: 32].
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ignore patches in the training split.
    #[arg(long)]
    pub images_only: bool,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct TrainSummary {
    model: String,
    mode: &'static str,
    n_train: usize,
    n_validation: usize,
    final_train_loss: Option<f64>,
    degenerate_targets: bool,
}

pub fn train_cmd(args: TrainArgs, cfg: &FileConfig) -> CliResult<Report> {
    let seed = cfg.seed(args.seed)?;
    let t = &cfg.train;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        mode: match args.mode {
            Some(ModeArg::Mlp) => TrainMode::Mlp,
            Some(ModeArg::Ridge) => TrainMode::Ridge,
            None => t.mode.unwrap_or(defaults.mode),
        },
        hidden_dim: args.hidden.or(t.hidden_dim).unwrap_or(defaults.hidden_dim),
        epochs: args.epochs.or(t.epochs).unwrap_or(defaults.epochs),
        steps_per_epoch: t.steps_per_epoch.unwrap_or(defaults.steps_per_epoch),
        base_lr: t.base_lr.unwrap_or(defaults.base_lr),
        l2: t.l2.unwrap_or(defaults.l2),
        ridge_lambda: t.ridge_lambda.unwrap_or(defaults.ridge_lambda),
        seed,
        images_only: args.images_only,
    };
    args.data.require()?;
    let items = load_items_resolved(&args.data.items)?;
    let stats = load_item_stats(&args.data.stats)?;
    let split = DatasetSplit::load(&args.data.split)?;
    let wanted: HashSet<&str> = split
        .train
        .iter()
        .chain(&split.validation)
        .map(String::as_str)
        .collect();
    let items: Vec<ItemRecord> = items.into_iter().filter(|i| wanted.contains(i.item_id.as_str())).collect();
    let samples = build_samples(&items, &stats, load_pixels)?;
    let model = train(&samples, &split, &config)?;
    super::create_parent(&args.out)?;
    model.save(&args.out)?;

    let summary = TrainSummary {
        model: display(&args.out),
        mode: model.mode_name(),
        n_train: model.training.n_train,
        n_validation: model.training.n_validation,
        final_train_loss: model.training.history.last().map(|e| e.train_loss),
        degenerate_targets: model.training.degenerate_targets,
    };
    let text = format!(
        "trained {} model on {} items ({} validation); saved to {}",
        summary.mode, summary.n_train, summary.n_validation, summary.model
    );
    Report::new(&summary, text)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PartArg {
    Train,
    Validation,
    Test,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Which part of the split to score.
    #[arg(long, value_enum, default_value = "test")]
    pub part: PartArg,
    /// Report JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `scope,metric,value,note` CSV to write.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn eval(args: EvalArgs, cfg: &FileConfig) -> CliResult<Report> {
    args.data.require()?;
    let model_path = cfg.model_path(args.model)?;
    super::require([model_path.as_path()])?;
    let model = MultiTaskModel::load(&model_path)?;
    let split = DatasetSplit::load(&args.data.split)?;
    let part = match args.part {
        PartArg::Train => SplitPart::Train,
        PartArg::Validation => SplitPart::Validation,
        PartArg::Test => SplitPart::Test,
    };
    let ids = split.part(part).to_vec();
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let items: Vec<ItemRecord> = load_items_resolved(&args.data.items)?
        .into_iter()
        .filter(|i| wanted.contains(i.item_id.as_str()))
        .collect();
    let stats = load_item_stats(&args.data.stats)?;
    let samples = build_samples(&items, &stats, load_pixels)?;
    let report: EvalReport = evaluate(&model, &samples, &ids)?;

    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    let rows = report.csv_rows();
    if let Some(path) = &args.csv {
        write_csv(path, &["scope", "metric", "value", "note"], rows.iter().map(|r| r.to_vec()))?;
    }
    let mut text = String::new();
    for [scope, metric, value, note] in &rows {
        text.push_str(&format!("{scope:<14} {metric:<24} {value:<20} {note}\n"));
    }
    Report::new(&report, text.trim_end())
}
