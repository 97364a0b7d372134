//! Rule-based capture feedback: quality buckets, distortion severities,
//! messages, the guided-photography loop and best-frame selection.

use std::collections::BTreeMap;
use std::fmt;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DistortionCategory, DistortionVector, Rect};
use crate::error::{Error, Result};
use crate::predictor::features::MIN_REGION;
use crate::predictor::{MultiTaskModel, Prediction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityBucket {
    Bad,
    Poor,
    Fair,
    Good,
    Excellent,
}

impl QualityBucket {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityBucket::Bad => "Bad",
            QualityBucket::Poor => "Poor",
            QualityBucket::Fair => "Fair",
            QualityBucket::Good => "Good",
            QualityBucket::Excellent => "Excellent",
        }
    }

    pub fn message(self) -> String {
        format!("Picture quality: {}.", self.as_str())
    }
}

impl fmt::Display for QualityBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Declared low to high so that `High > Moderate > Low`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Low,
    Moderate,
    High,
}

pub fn quality_bucket(score: f64) -> Result<QualityBucket> {
    if !(0.0..=100.0).contains(&score) {
        return Err(Error::Invalid(format!("quality {score} outside [0, 100]")));
    }
    Ok(match score {
        s if s < 20.0 => QualityBucket::Bad,
        s if s < 40.0 => QualityBucket::Poor,
        s if s < 60.0 => QualityBucket::Fair,
        s if s < 80.0 => QualityBucket::Good,
        _ => QualityBucket::Excellent,
    })
}

pub fn severity(score: f64) -> Result<Severity> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Invalid(format!("distortion score {score} outside [0, 1]")));
    }
    Ok(if score > 0.5 {
        Severity::High
    } else if score >= 0.2 {
        Severity::Moderate
    } else {
        Severity::Low
    })
}

pub const UNRECOGNIZED: &str = "Unrecognized distortion.";

/// The base message for a category. `severity` only matters for `bright`.
pub fn base_feedback(category: DistortionCategory, severity: Severity) -> String {
    use DistortionCategory as C;
    match category {
        C::Blurry => "The phone may be too close to the object, move it away from it.".into(),
        C::Shaky => "Hold the phone and the object steady.".into(),
        C::Bright if severity == Severity::High => {
            "Scene is too bright. Try turning off the flash. Find proper lighting if you can.".into()
        }
        C::Bright => "Scene is too bright. Try turning off the flash.".into(),
        C::Dark => "Scene is too dark, try turning on the flash or switch on the lights.".into(),
        C::Grainy => {
            "Try increasing the lighting or move the camera further from the subject.".into()
        }
        C::None => "No major distortions seem to be present.".into(),
        C::Other => UNRECOGNIZED.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedDistortion {
    pub category: DistortionCategory,
    pub score: f64,
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedNote {
    pub category: DistortionCategory,
    pub region: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub quality: f64,
    pub bucket: QualityBucket,
    pub ranked: Vec<RankedDistortion>,
    pub messages: Vec<String>,
    pub localized: Vec<LocalizedNote>,
}

impl FeedbackReport {
    /// Ranked categories other than `none`.
    pub fn dominant(&self) -> Vec<DistortionCategory> {
        self.ranked
            .iter()
            .map(|r| r.category)
            .filter(|c| *c != DistortionCategory::None)
            .collect()
    }
}

/// Top three of the actionable categories plus `none`, by score (ties to
/// the lower index). A leading `none` suppresses everything else.
pub fn build_report(quality: f64, distortions: &DistortionVector) -> Result<FeedbackReport> {
    let bucket = quality_bucket(quality)?;
    let mut candidates: Vec<(DistortionCategory, f64)> = DistortionCategory::ALL
        .into_iter()
        .filter(|c| *c != DistortionCategory::Other)
        .map(|c| (c, distortions.get(c)))
        .collect();
    for (c, s) in &candidates {
        severity(*s).map_err(|e| Error::Invalid(format!("{c}: {e}")))?;
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.index().cmp(&b.0.index())));
    candidates.truncate(3);
    if candidates[0].0 == DistortionCategory::None {
        candidates.truncate(1);
    }
    let ranked: Vec<RankedDistortion> = candidates
        .into_iter()
        .map(|(category, score)| {
            let severity = severity(score).expect("checked above");
            RankedDistortion {
                category,
                score,
                severity,
                message: base_feedback(category, severity),
            }
        })
        .collect();
    Ok(FeedbackReport {
        quality,
        bucket,
        messages: ranked.iter().map(|r| r.message.clone()).collect(),
        ranked,
        localized: vec![],
    })
}

pub const REGION_NAMES: [[&str; 3]; 3] = [
    ["top-left", "top-center", "top-right"],
    ["center-left", "center", "center-right"],
    ["bottom-left", "bottom-center", "bottom-right"],
];

/// Region phrases for cells at Moderate severity or above, per category in
/// the given order, cells in raster order.
pub fn localized_feedback(
    categories: &[DistortionCategory],
    grids: &BTreeMap<DistortionCategory, Vec<Vec<f64>>>,
) -> Result<Vec<LocalizedNote>> {
    let mut out = Vec::new();
    for &category in categories {
        let grid = grids
            .get(&category)
            .ok_or_else(|| Error::Invalid(format!("no 3x3 grid for `{category}`")))?;
        if grid.len() != 3 || grid.iter().any(|r| r.len() != 3) {
            return Err(Error::Invalid(format!("grid for `{category}` is not 3x3")));
        }
        for (r, row) in grid.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if severity(v)? >= Severity::Moderate {
                    out.push(LocalizedNote {
                        category,
                        region: REGION_NAMES[r][c].into(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Splits an image into a 3×3 grid of near-equal rectangles.
pub fn region_grid(width: u32, height: u32) -> Result<[[Rect; 3]; 3]> {
    if width < 3 * MIN_REGION || height < 3 * MIN_REGION {
        return Err(Error::Invalid(format!(
            "a {width}x{height} image is too small for a 3x3 grid of {MIN_REGION}px regions"
        )));
    }
    let cut = |extent: u32, i: u32| extent * i / 3;
    Ok(std::array::from_fn(|r| {
        std::array::from_fn(|c| {
            let (r, c) = (r as u32, c as u32);
            let (x0, x1) = (cut(width, c), cut(width, c + 1));
            let (y0, y1) = (cut(height, r), cut(height, r + 1));
            Rect::new(x0, y0, x1 - x0, y1 - y0)
        })
    }))
}

/// Anything that can score a photograph.
pub trait Assessor: Sync {
    fn assess(&self, pixels: &RgbImage, region: Option<Rect>) -> Result<Prediction>;

    /// Per-category 3×3 distortion grids.
    fn distortion_grids(&self, pixels: &RgbImage) -> Result<BTreeMap<DistortionCategory, Vec<Vec<f64>>>> {
        let cells = region_grid(pixels.width(), pixels.height())?;
        let preds: Vec<Vec<Prediction>> = cells
            .iter()
            .map(|row| row.iter().map(|r| self.assess(pixels, Some(*r))).collect())
            .collect::<Result<_>>()?;
        Ok(DistortionCategory::ALL
            .into_iter()
            .map(|c| {
                let grid = preds
                    .iter()
                    .map(|row| row.iter().map(|p| p.distortions.get(c)).collect())
                    .collect();
                (c, grid)
            })
            .collect())
    }
}

impl Assessor for MultiTaskModel {
    fn assess(&self, pixels: &RgbImage, region: Option<Rect>) -> Result<Prediction> {
        self.predict(pixels, region)
    }
}

/// Bucket, ranked distortions and localized notes for one photograph.
pub fn full_report(assessor: &dyn Assessor, pixels: &RgbImage) -> Result<FeedbackReport> {
    let p = assessor.assess(pixels, None)?;
    let mut report = build_report(p.quality, &p.distortions)?;
    let dominant = report.dominant();
    if !dominant.is_empty() {
        let grids = assessor.distortion_grids(pixels)?;
        report.localized = localized_feedback(&dominant, &grids)?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuidedState {
    AwaitCapture,
    QualityShown,
    DistortionShown,
    Saved,
}

impl GuidedState {
    pub const ALL: [GuidedState; 4] = [
        GuidedState::AwaitCapture,
        GuidedState::QualityShown,
        GuidedState::DistortionShown,
        GuidedState::Saved,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GuidedState::AwaitCapture => "AwaitCapture",
            GuidedState::QualityShown => "QualityShown",
            GuidedState::DistortionShown => "DistortionShown",
            GuidedState::Saved => "Saved",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GuidedEvent {
    Capture(RgbImage),
    RequestDistortionFeedback,
    Save,
    Retake,
}

impl GuidedEvent {
    pub fn name(&self) -> &'static str {
        match self {
            GuidedEvent::Capture(_) => "capture",
            GuidedEvent::RequestDistortionFeedback => "request_distortion_feedback",
            GuidedEvent::Save => "save",
            GuidedEvent::Retake => "retake",
        }
    }
}

/// The next state for a legal event, or `None`.
pub fn transition(state: GuidedState, event: &GuidedEvent) -> Option<GuidedState> {
    use GuidedEvent as E;
    use GuidedState as S;
    match (state, event) {
        (S::AwaitCapture, E::Capture(_)) => Some(S::QualityShown),
        (S::QualityShown, E::RequestDistortionFeedback) => Some(S::DistortionShown),
        (S::QualityShown | S::DistortionShown, E::Save) => Some(S::Saved),
        (S::QualityShown | S::DistortionShown, E::Retake) => Some(S::AwaitCapture),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "output", rename_all = "kebab-case")]
pub enum StepOutput {
    Quality {
        quality: f64,
        bucket: QualityBucket,
        message: String,
    },
    Distortion {
        report: FeedbackReport,
    },
    Saved {
        attempts: u32,
    },
    Retake {
        attempts: u32,
    },
}

#[derive(Clone, Debug, Default)]
pub struct GuidedSession {
    state: Option<GuidedState>,
    pub last_prediction: Option<Prediction>,
    last_capture: Option<RgbImage>,
    /// Number of retakes so far.
    pub attempts: u32,
}

impl GuidedSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> GuidedState {
        self.state.unwrap_or(GuidedState::AwaitCapture)
    }

    /// Applies one event. On any error the session is left unchanged.
    pub fn step(&mut self, event: GuidedEvent, assessor: &dyn Assessor) -> Result<StepOutput> {
        let state = self.state();
        let next = transition(state, &event).ok_or_else(|| Error::IllegalEvent {
            state: state.as_str().into(),
            event: event.name().into(),
        })?;
        let output = match event {
            GuidedEvent::Capture(pixels) => {
                let p = assessor.assess(&pixels, None)?;
                let bucket = quality_bucket(p.quality.clamp(0.0, 100.0))?;
                let out = StepOutput::Quality {
                    quality: p.quality,
                    bucket,
                    message: bucket.message(),
                };
                self.last_prediction = Some(p);
                self.last_capture = Some(pixels);
                out
            }
            GuidedEvent::RequestDistortionFeedback => {
                let pixels = self.last_capture.as_ref().expect("quality shown after a capture");
                StepOutput::Distortion {
                    report: full_report(assessor, pixels)?,
                }
            }
            GuidedEvent::Save => StepOutput::Saved {
                attempts: self.attempts,
            },
            GuidedEvent::Retake => {
                self.attempts += 1;
                self.last_prediction = None;
                self.last_capture = None;
                StepOutput::Retake {
                    attempts: self.attempts,
                }
            }
        };
        self.state = Some(next);
        Ok(output)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameChoice {
    pub index: usize,
    pub quality: f64,
    pub bucket: QualityBucket,
    pub qualities: Vec<f64>,
}

/// The frame with the highest predicted quality; ties go to the earliest.
pub fn select_best_frame(frames: &[RgbImage], assessor: &dyn Assessor) -> Result<FrameChoice> {
    if frames.is_empty() {
        return Err(Error::Invalid("no frames to choose from".into()));
    }
    let qualities: Vec<f64> = frames
        .par_iter()
        .map(|f| assessor.assess(f, None).map(|p| p.quality))
        .collect::<Result<_>>()?;
    let mut index = 0;
    for (i, q) in qualities.iter().enumerate() {
        if *q > qualities[index] {
            index = i;
        }
    }
    let quality = qualities[index];
    Ok(FrameChoice {
        index,
        quality,
        bucket: quality_bucket(quality.clamp(0.0, 100.0))?,
        qualities,
    })
}
