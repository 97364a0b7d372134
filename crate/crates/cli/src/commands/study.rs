use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use piqflow_core::analysis::simulate::{
    golden_items, random_items, simulate_study, RaterKind, SimulatedRaterConfig, StudyDesign,
};
use piqflow_core::analysis::{
    binarization_consistency_study, distortion_consistency, histograms, inter_subject_consistency,
    intra_subject_consistency, patch_vs_image_correlation, stratified_consistency, BinarizationStudy,
    BinarizeStrategy, CategoryConsistency, ConsistencyReport, Histograms, IntraSubjectReport,
    PatchImageReport, Scope, StratumComparison, Stratum,
};
use piqflow_core::cleaning::{clean_ratings, drop_degenerate_items, CleaningReport, DroppedItem};
use piqflow_core::data::{
    load_golden, load_item_stats, save_golden, save_item_stats, save_items, save_ratings,
    save_session_meta, AgeBucket, DeviceClass, DistortionCategory, Gender, ItemKind, Lenses, RatingFormat,
    RatingRecord, SessionMeta, ViewingDistance,
};
use piqflow_core::screening::{read_accepted, screen_all, write_verdicts_csv, ScreenVerdict};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::{display, require, load_items_resolved, load_pixels, load_sessions, write_csv, write_json, Report};
use crate::config::FileConfig;
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Ratings file (.csv, or .jsonl for JSON lines).
    pub ratings: PathBuf,
    /// Per-subject session metadata CSV.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Item manifest CSV.
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Golden reference scores CSV.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    /// Store directory for the validated copies.
    #[arg(long)]
    pub out: PathBuf,
}

fn inputs<'a, const N: usize>(
    first: &'a PathBuf,
    optional: [&'a Option<PathBuf>; N],
) -> impl Iterator<Item = &'a std::path::Path> {
    std::iter::once(first.as_path()).chain(optional.into_iter().flatten().map(PathBuf::as_path))
}

#[derive(Serialize)]
struct IngestSummary {
    store: String,
    subjects: usize,
    ratings: usize,
    items: Option<usize>,
    golden: Option<usize>,
}

pub fn ingest(args: IngestArgs) -> CliResult<Report> {
    require(inputs(&args.ratings, [&args.sessions, &args.items, &args.golden]))?;
    let sessions = load_sessions(&args.ratings, args.sessions.as_deref())?;
    let golden = args.golden.as_deref().map(load_golden).transpose()?;
    let mut items = args.items.as_deref().map(load_items_resolved).transpose()?;

    if let Some(items) = &items {
        let known: HashSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
        let unknown = sessions
            .iter()
            .flat_map(|s| &s.ratings)
            .find(|r| !known.contains(r.item_id.as_str()) && !golden.as_ref().is_some_and(|g| g.contains_key(&r.item_id)));
        if let Some(r) = unknown {
            return Err(CliError::validation(format!(
                "subject {} rated unknown item `{}`",
                r.subject_id, r.item_id
            )));
        }
    }

    std::fs::create_dir_all(&args.out)?;
    save_ratings(&args.out.join("ratings.csv"), &sessions, RatingFormat::Csv)?;
    if args.sessions.is_some() {
        save_session_meta(&args.out.join("sessions.csv"), &sessions)?;
    }
    if let Some(items) = &mut items {
        for item in items.iter_mut() {
            if let Ok(abs) = std::path::absolute(&item.source_path) {
                item.source_path = abs;
            }
        }
        save_items(&args.out.join("items.csv"), items)?;
    }
    if let Some(golden) = &golden {
        save_golden(&args.out.join("golden.csv"), golden)?;
    }

    let summary = IngestSummary {
        store: display(&args.out),
        subjects: sessions.len(),
        ratings: sessions.iter().map(|s| s.ratings.len()).sum(),
        items: items.as_ref().map(Vec::len),
        golden: golden.as_ref().map(HashMap::len),
    };
    let text = format!(
        "ingested {} ratings from {} subjects into {}",
        summary.ratings, summary.subjects, summary.store
    );
    Report::new(&summary, text)
}

#[derive(Args, Debug)]
pub struct ScreenArgs {
    pub ratings: PathBuf,
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Golden reference scores CSV. Without it the golden check is skipped.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    /// Verdicts CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScreenSummary {
    subjects: usize,
    accepted: usize,
    rejected: usize,
    verdicts: Vec<ScreenVerdict>,
}

pub fn screen(args: ScreenArgs, cfg: &FileConfig) -> CliResult<Report> {
    require(inputs(&args.ratings, [&args.sessions, &args.golden]))?;
    let sessions = load_sessions(&args.ratings, args.sessions.as_deref())?;
    let golden = args.golden.as_deref().map(load_golden).transpose()?.unwrap_or_default();
    let verdicts = screen_all(&sessions, &golden, &cfg.screening);
    if let Some(out) = &args.out {
        super::create_parent(out)?;
        write_verdicts_csv(out, &verdicts)?;
    }
    let accepted = verdicts.iter().filter(|v| v.accepted).count();
    let mut text = format!(
        "screened {} subjects: {} accepted, {} rejected",
        verdicts.len(),
        accepted,
        verdicts.len() - accepted
    );
    for v in verdicts.iter().filter(|v| !v.accepted) {
        let reasons: Vec<&str> = v.reasons.iter().map(|r| r.as_str()).collect();
        let _ = write!(text, "\n  {}: {}", v.subject_id, reasons.join(", "));
    }
    let summary = ScreenSummary {
        subjects: verdicts.len(),
        accepted,
        rejected: verdicts.len() - accepted,
        verdicts,
    };
    Report::new(&summary, text)
}

#[derive(Args, Debug)]
pub struct CleanArgs {
    pub ratings: PathBuf,
    /// Verdicts CSV from `screen`; only accepted subjects are kept.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Item manifest; constant-color and unreadable images are dropped.
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Item statistics CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CleanSummary {
    subjects: usize,
    report: CleaningReport,
    dropped: Vec<DroppedItem>,
}

pub fn clean(args: CleanArgs, cfg: &FileConfig) -> CliResult<Report> {
    require(inputs(&args.ratings, [&args.verdicts, &args.items]))?;
    let mut sessions = load_sessions(&args.ratings, None)?;
    if let Some(path) = &args.verdicts {
        let accepted = read_accepted(path)?;
        sessions.retain(|s| accepted.contains(&s.subject_id));
    }
    let dropped = match &args.items {
        Some(path) => drop_degenerate_items(load_items_resolved(path)?, load_pixels).1,
        None => Vec::new(),
    };
    let dropped_ids: HashSet<&str> = dropped.iter().map(|d| d.item_id.as_str()).collect();
    let ratings = sessions
        .iter()
        .flat_map(|s| &s.ratings)
        .filter(|r| !dropped_ids.contains(r.item_id.as_str()));
    let (stats, mut report) = clean_ratings(ratings, &cfg.cleaning);
    report.dropped_items = dropped.iter().map(|d| d.item_id.clone()).collect();
    super::create_parent(&args.out)?;
    save_item_stats(&args.out, &stats)?;

    let text = format!(
        "{} items from {} subjects: {} of {} ratings rejected, {} items dropped",
        report.items,
        sessions.len(),
        report.ratings_rejected,
        report.ratings_in,
        dropped.len()
    );
    Report::new(
        &CleanSummary {
            subjects: sessions.len(),
            report,
            dropped,
        },
        text,
    )
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub ratings: PathBuf,
    /// Session metadata; enables the per-stratum comparisons.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Item manifest; splits consistency by item kind.
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Item statistics from `clean`; enables histograms and patch-vs-image.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Golden references; enables intra-subject consistency.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    /// Restrict to subjects accepted in this verdicts CSV.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Random split-half repetitions [default: 50].
    #[arg(long)]
    pub splits: Option<usize>,
    /// Histogram bins [default: 10].
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write headline numbers as `section,key,value` CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// A result, or the reason it could not be computed from this data.
#[derive(Serialize)]
#[serde(untagged)]
enum Section<T> {
    Done { result: T },
    Skipped { note: String },
}

impl<T> Section<T> {
    fn from(r: piqflow_core::Result<T>) -> CliResult<Self> {
        use piqflow_core::Error as E;
        match r {
            Ok(result) => Ok(Section::Done { result }),
            Err(e @ (E::InsufficientData(_) | E::UndefinedCorrelation(_))) => {
                Ok(Section::Skipped { note: e.to_string() })
            }
            Err(e) => Err(e.into()),
        }
    }

    fn result(&self) -> Option<&T> {
        match self {
            Section::Done { result } => Some(result),
            Section::Skipped { .. } => None,
        }
    }
}

#[derive(Serialize)]
struct StratumEntry {
    stratum: Stratum,
    group: String,
    #[serde(flatten)]
    comparison: Section<StratumComparison>,
}

#[derive(Serialize)]
struct AnalysisReport {
    seed: u64,
    splits: usize,
    subjects: usize,
    ratings: usize,
    inter_subject: BTreeMap<String, Section<ConsistencyReport>>,
    intra_subject: Option<Section<IntraSubjectReport>>,
    distortion_consistency: Section<BTreeMap<DistortionCategory, CategoryConsistency>>,
    binarization: Section<BinarizationStudy>,
    patch_vs_image: Option<Section<PatchImageReport>>,
    histograms: Option<Section<Histograms>>,
    strata: Vec<StratumEntry>,
}

const SCOPES: [Scope; 5] = [Scope::Images, Scope::Patches, Scope::Salient, Scope::Random, Scope::Frames];

pub fn analyze(args: AnalyzeArgs, cfg: &FileConfig) -> CliResult<Report> {
    let seed = cfg.seed(args.seed)?;
    let splits = args.splits.or(cfg.analyze.splits).unwrap_or(50);
    let bins = args.bins.or(cfg.analyze.bins).unwrap_or(10);
    if splits == 0 || bins == 0 {
        return Err(CliError::validation("--splits and --bins must be positive"));
    }

    require(inputs(
        &args.ratings,
        [&args.sessions, &args.items, &args.stats, &args.golden, &args.verdicts],
    ))?;
    let mut sessions = load_sessions(&args.ratings, args.sessions.as_deref())?;
    if let Some(path) = &args.verdicts {
        let accepted: BTreeSet<String> = read_accepted(path)?;
        sessions.retain(|s| accepted.contains(&s.subject_id));
    }
    let items = args.items.as_deref().map(load_items_resolved).transpose()?;
    let stats = args.stats.as_deref().map(load_item_stats).transpose()?;
    let golden = args.golden.as_deref().map(load_golden).transpose()?;

    let ratings: Vec<RatingRecord> = sessions
        .iter()
        .flat_map(|s| &s.ratings)
        .filter(|r| !r.is_golden)
        .cloned()
        .collect();

    let mut inter_subject = BTreeMap::new();
    match &items {
        Some(items) => {
            let kinds: HashSet<ItemKind> = items.iter().map(|i| i.kind).collect();
            for scope in SCOPES.into_iter().filter(|s| kinds.iter().any(|k| s.includes(*k))) {
                let scoped = scope.filter(&ratings, items);
                let key = serde_json::to_value(scope)?.as_str().unwrap_or_default().to_string();
                inter_subject.insert(key, Section::from(inter_subject_consistency(&scoped, splits, seed, scope))?);
            }
        }
        None => {
            inter_subject.insert(
                "all".to_string(),
                Section::from(inter_subject_consistency(&ratings, splits, seed, Scope::Images))?,
            );
        }
    }

    let intra_subject = golden
        .as_ref()
        .map(|g| Section::from(intra_subject_consistency(&sessions, g)))
        .transpose()?;
    let distortion = Section::from(distortion_consistency(&ratings, splits, seed))?;
    let binarization = Section::from(binarization_consistency_study(
        &ratings,
        &BinarizeStrategy::standard_set(),
        splits,
        seed,
    ))?;
    let patch_vs_image = match (&stats, &items) {
        (Some(s), Some(i)) => Some(Section::from(patch_vs_image_correlation(s, i))?),
        _ => None,
    };
    let hist = stats.as_ref().map(|s| Section::from(histograms(s, bins))).transpose()?;

    let mut strata = Vec::new();
    if args.sessions.is_some() {
        for stratum in Stratum::ALL {
            let groups: BTreeSet<String> = sessions.iter().map(|s| stratum.key(s)).collect();
            for group in groups {
                let comparison = Section::from(stratified_consistency(&ratings, &sessions, stratum, &group, None))?;
                strata.push(StratumEntry {
                    stratum,
                    group,
                    comparison,
                });
            }
        }
    }

    let report = AnalysisReport {
        seed,
        splits,
        subjects: sessions.len(),
        ratings: ratings.len(),
        inter_subject,
        intra_subject,
        distortion_consistency: distortion,
        binarization,
        patch_vs_image,
        histograms: hist,
        strata,
    };

    let rows = headline_rows(&report);
    if let Some(path) = &args.csv {
        write_csv(path, &["section", "key", "value"], rows.iter().map(|r| r.to_vec()))?;
    }
    let mut text = String::new();
    for [section, key, value] in &rows {
        let _ = writeln!(text, "{section:<24} {key:<28} {value}");
    }
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        let _ = write!(text, "report written to {}", display(path));
    } else {
        text = serde_json::to_string_pretty(&report)?;
    }
    Report::new(&report, text.trim_end())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

fn headline_rows(report: &AnalysisReport) -> Vec<[String; 3]> {
    let mut rows = Vec::new();
    for (scope, s) in &report.inter_subject {
        rows.push(["inter_subject".into(), scope.clone(), fmt(s.result().map(|r| r.mean_split_half_srcc))]);
    }
    if let Some(s) = &report.intra_subject {
        rows.push(["intra_subject".into(), "median_lcc".into(), fmt(s.result().map(|r| r.median_lcc))]);
    }
    if let Some(d) = report.distortion_consistency.result() {
        for (cat, c) in d {
            rows.push(["distortion_consistency".into(), cat.name().into(), fmt(c.mean_srcc)]);
        }
    }
    if let Some(b) = report.binarization.result() {
        for row in &b.rows {
            rows.push(["binarization".into(), row.label.clone(), fmt(row.mean_srcc)]);
        }
    }
    for e in &report.strata {
        rows.push([
            format!("stratum_{}", e.stratum.as_str()),
            e.group.clone(),
            fmt(e.comparison.result().map(|c| c.srcc)),
        ]);
    }
    rows
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub faithful: usize,
    #[arg(long, default_value_t = 0)]
    pub constant: usize,
    #[arg(long, default_value_t = 0)]
    pub haphazard: usize,
    #[arg(long, default_value_t = 0)]
    pub antagonist: usize,
    /// Regular items in the pool.
    #[arg(long, default_value_t = 200)]
    pub items: usize,
    #[arg(long, default_value_t = 100)]
    pub per_session: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Golden items shown to every subject.
    #[arg(long, default_value_t = 5)]
    pub golden: usize,
    /// Opinion spread of honest raters.
    #[arg(long, default_value_t = 10.0)]
    pub noise: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SimulateSummary {
    out: String,
    subjects: usize,
    ratings: usize,
    items: usize,
    golden: usize,
}

fn random_meta(rng: &mut ChaCha8Rng) -> SessionMeta {
    const RESOLUTIONS: [(u32, u32); 4] = [(1920, 1080), (1366, 768), (2560, 1440), (390, 844)];
    SessionMeta {
        device: *DeviceClass::ALL[..4].choose(rng).expect("non-empty"),
        resolution: *RESOLUTIONS.choose(rng).expect("non-empty"),
        distance: *ViewingDistance::ALL[..3].choose(rng).expect("non-empty"),
        age: *AgeBucket::ALL[..5].choose(rng).expect("non-empty"),
        gender: *Gender::ALL.choose(rng).expect("non-empty"),
        lenses: Lenses::Yes,
    }
}

/// Honest raters get a per-subject bias from N(0, 5) and flip 5% of their
/// checkboxes; constant raters sit at a bias in [-30, 30).
fn rater_panel(args: &SimulateArgs, rng: &mut ChaCha8Rng) -> Vec<SimulatedRaterConfig> {
    let bias = Normal::new(0.0, 5.0).expect("valid sd");
    let mut raters = Vec::new();
    for i in 0..args.faithful {
        let mut r = SimulatedRaterConfig::new(format!("faithful{i:03}"), RaterKind::Faithful, args.noise);
        r.bias = bias.sample(rng);
        r.label_flip_prob = 0.05;
        r.meta = random_meta(rng);
        raters.push(r);
    }
    for (kind, n, tag) in [
        (RaterKind::Constant, args.constant, "constant"),
        (RaterKind::Haphazard, args.haphazard, "haphazard"),
        (RaterKind::Antagonist, args.antagonist, "antagonist"),
    ] {
        for i in 0..n {
            let mut r = SimulatedRaterConfig::new(format!("{tag}{i:03}"), kind, args.noise);
            if kind == RaterKind::Constant {
                r.bias = rng.random_range(-30.0..30.0);
            }
            r.meta = random_meta(rng);
            raters.push(r);
        }
    }
    raters
}

pub fn simulate(args: SimulateArgs, cfg: &FileConfig) -> CliResult<Report> {
    let seed = cfg.seed(args.seed)?;
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(CliError::validation("--noise must be a non-negative number"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = random_items(args.items, "item", &mut rng);
    let raters = rater_panel(&args, &mut rng);
    let design = StudyDesign {
        items_per_session: args.per_session,
        repeats: args.repeats,
        golden: golden_items(args.golden),
    };
    let study = simulate_study(&raters, &items, &design, rng.random())?;

    std::fs::create_dir_all(&args.out)?;
    save_ratings(&args.out.join("ratings.csv"), &study.sessions, RatingFormat::Csv)?;
    save_session_meta(&args.out.join("sessions.csv"), &study.sessions)?;
    save_golden(&args.out.join("golden.csv"), &study.golden_reference)?;
    write_csv(
        &args.out.join("truth.csv"),
        &["item_id", "true_mos"],
        items.iter().map(|i| vec![i.item_id.clone(), i.true_mos.to_string()]),
    )?;
    write_csv(
        &args.out.join("raters.csv"),
        &["subject_id", "kind"],
        raters.iter().map(|r| {
            let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from));
            vec![r.subject_id.clone(), kind.unwrap_or_default()]
        }),
    )?;

    let summary = SimulateSummary {
        out: display(&args.out),
        subjects: study.sessions.len(),
        ratings: study.sessions.iter().map(|s| s.ratings.len()).sum(),
        items: items.len(),
        golden: design.golden.len(),
    };
    let text = format!(
        "simulated {} subjects, {} ratings into {}",
        summary.subjects, summary.ratings, summary.out
    );
    Report::new(&summary, text)
}

