//! Subject-level rejection: mid-session behavior, repeat consistency,
//! golden-item agreement, prescribed-lens check and ITU-R BT.500 outlier
//! screening.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{LabelSet, Lenses, RatingRecord, SessionRecord};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenReason {
    SliderDegenerate,
    Haphazard,
    RepeatInconsistent,
    GoldenMismatch,
    Bt500Outlier,
    NoLenses,
}

impl ScreenReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ScreenReason::SliderDegenerate => "slider-degenerate",
            ScreenReason::Haphazard => "haphazard",
            ScreenReason::RepeatInconsistent => "repeat-inconsistent",
            ScreenReason::GoldenMismatch => "golden-mismatch",
            ScreenReason::Bt500Outlier => "bt500-outlier",
            ScreenReason::NoLenses => "no-lenses",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    pub min_score_stddev: f64,
    /// Largest tolerated share of items given one identical label set.
    pub max_label_set_share: f64,
    pub haphazard_median_jump: f64,
    pub repeat_tolerance: f64,
    pub repeat_max_failures: usize,
    pub golden_min_lcc: f64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            min_score_stddev: 2.5,
            max_label_set_share: 0.9,
            haphazard_median_jump: 60.0,
            repeat_tolerance: 20.0,
            repeat_max_failures: 2,
            golden_min_lcc: 0.6,
        }
    }
}

pub const MIN_MID_SESSION_RATINGS: usize = 10;

/// Behavior check over the ratings given so far in a session.
pub fn check_mid_session(
    ratings: &[RatingRecord],
    config: &ScreeningConfig,
) -> Result<Option<ScreenReason>> {
    if ratings.len() < MIN_MID_SESSION_RATINGS {
        return Err(Error::InsufficientData(format!(
            "mid-session check needs {MIN_MID_SESSION_RATINGS} ratings, got {}",
            ratings.len()
        )));
    }
    let scores: Vec<f64> = ratings.iter().map(|r| r.quality).collect();
    let mut label_counts: HashMap<LabelSet, usize> = HashMap::new();
    for r in ratings {
        *label_counts.entry(r.distortions).or_default() += 1;
    }
    let top_share = label_counts.values().copied().max().unwrap_or(0) as f64 / ratings.len() as f64;
    if stats::sample_std(&scores) < config.min_score_stddev || top_share > config.max_label_set_share {
        return Ok(Some(ScreenReason::SliderDegenerate));
    }
    let jumps: Vec<f64> = scores.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if stats::median(&jumps) > config.haphazard_median_jump {
        return Ok(Some(ScreenReason::Haphazard));
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatCheck {
    pub passed: bool,
    pub diffs: Vec<f64>,
    pub failures: usize,
}

pub fn check_repeats(session: &SessionRecord, tolerance: f64, max_failures: usize) -> Result<RepeatCheck> {
    let pairs = session.repeat_pairs();
    if pairs.is_empty() {
        return Err(Error::InsufficientData(format!(
            "subject {} has no repeat pairs",
            session.subject_id
        )));
    }
    Ok(repeat_verdict(
        pairs.iter().map(|(a, b)| (a - b).abs()).collect(),
        tolerance,
        max_failures,
    ))
}

fn repeat_verdict(diffs: Vec<f64>, tolerance: f64, max_failures: usize) -> RepeatCheck {
    let failures = diffs.iter().filter(|&&d| d > tolerance).count();
    RepeatCheck {
        passed: failures <= max_failures,
        diffs,
        failures,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub passed: bool,
    /// `None` when the subject's golden scores have zero variance.
    pub lcc: Option<f64>,
    pub n: usize,
}

pub fn check_golden(
    session: &SessionRecord,
    reference: &HashMap<String, f64>,
    min_lcc: f64,
) -> Result<GoldenCheck> {
    let (subject, refs) = golden_pairs(session, reference);
    if subject.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "subject {} has {} golden ratings with references (need 3)",
            session.subject_id,
            subject.len()
        )));
    }
    let n = subject.len();
    Ok(match stats::lcc(&subject, &refs) {
        Ok(r) => GoldenCheck {
            passed: r >= min_lcc,
            lcc: Some(r),
            n,
        },
        Err(_) => GoldenCheck {
            passed: false,
            lcc: None,
            n,
        },
    })
}

/// (subject scores, reference scores) over the session's golden items.
pub(crate) fn golden_pairs(
    session: &SessionRecord,
    reference: &HashMap<String, f64>,
) -> (Vec<f64>, Vec<f64>) {
    session
        .ratings
        .iter()
        .filter(|r| r.is_golden)
        .filter_map(|r| reference.get(&r.item_id).map(|&g| (r.quality, g)))
        .unzip()
}

/// Sparse subjects x items score matrix.
#[derive(Clone, Debug, Default)]
pub struct ScoreMatrix {
    pub entries: Vec<(String, String, f64)>,
}

impl ScoreMatrix {
    /// First presentation of every item in every session.
    pub fn from_sessions<'a>(sessions: impl IntoIterator<Item = &'a SessionRecord>) -> Self {
        let entries = sessions
            .into_iter()
            .flat_map(|s| s.ratings.iter().filter(|r| !r.is_repeat))
            .map(|r| (r.subject_id.clone(), r.item_id.clone(), r.quality))
            .collect();
        ScoreMatrix { entries }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bt500Counts {
    pub p: usize,
    pub q: usize,
    pub n: usize,
}

impl Bt500Counts {
    pub fn rejects(&self) -> bool {
        let pq = self.p + self.q;
        self.n > 0
            && pq > 0
            && pq as f64 / self.n as f64 > 0.05
            && (self.p as f64 - self.q as f64).abs() / (pq as f64) < 0.3
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bt500Result {
    pub rejected: BTreeSet<String>,
    pub counts: BTreeMap<String, Bt500Counts>,
    /// Items with fewer than two scores (not used for screening).
    pub skipped_items: usize,
}

/// Observer screening after ITU-R BT.500 Annex 1.
///
/// Per item: mean, sample stddev S and kurtosis b2 = m4 / m2^2. The outlier
/// bound is 2S when 2 <= b2 <= 4 and sqrt(20) S otherwise. A subject is
/// rejected when more than 5% of their scores fall outside the bounds and the
/// excursions are balanced (|P - Q| / (P + Q) < 0.3).
pub fn bt500_reject(matrix: &ScoreMatrix) -> Result<Bt500Result> {
    let mut by_item: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    let mut subjects: BTreeSet<&str> = BTreeSet::new();
    for (s, i, v) in &matrix.entries {
        by_item.entry(i.as_str()).or_default().push((s.as_str(), *v));
        subjects.insert(s.as_str());
    }
    if subjects.len() < 2 || by_item.len() < 2 {
        return Err(Error::InsufficientData(
            "BT.500 screening needs at least 2 subjects and 2 items".into(),
        ));
    }

    let mut counts: BTreeMap<String, Bt500Counts> = subjects
        .iter()
        .map(|s| (s.to_string(), Bt500Counts::default()))
        .collect();
    let mut skipped = 0;
    for scores in by_item.values() {
        if scores.len() < 2 {
            skipped += 1;
            continue;
        }
        let vals: Vec<f64> = scores.iter().map(|s| s.1).collect();
        let mu = stats::mean(&vals);
        let sd = stats::sample_std(&vals);
        let m2 = stats::central_moment(&vals, 2);
        let bound = if m2 > 0.0 {
            let b2 = stats::central_moment(&vals, 4) / (m2 * m2);
            if (2.0..=4.0).contains(&b2) {
                2.0 * sd
            } else {
                20f64.sqrt() * sd
            }
        } else {
            0.0
        };
        for &(subject, v) in scores {
            let c = counts.get_mut(subject).expect("subject indexed above");
            c.n += 1;
            if v > mu + bound {
                c.p += 1;
            } else if v < mu - bound {
                c.q += 1;
            }
        }
    }
    if skipped > 0 {
        log::warn!("BT.500: skipped {skipped} items with fewer than 2 scores");
    }
    let rejected = counts
        .iter()
        .filter(|(_, c)| c.rejects())
        .map(|(s, _)| s.clone())
        .collect();
    Ok(Bt500Result {
        rejected,
        counts,
        skipped_items: skipped,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenDetail {
    pub mid_session: Option<ScreenReason>,
    pub repeats: Option<RepeatCheck>,
    pub golden: Option<GoldenCheck>,
    pub bt500: Option<Bt500Counts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenVerdict {
    pub subject_id: String,
    pub accepted: bool,
    pub reasons: Vec<ScreenReason>,
    pub warnings: Vec<String>,
    pub detail: ScreenDetail,
}

impl ScreenVerdict {
    fn new(subject_id: &str) -> Self {
        ScreenVerdict {
            subject_id: subject_id.to_string(),
            accepted: true,
            reasons: Vec::new(),
            warnings: Vec::new(),
            detail: ScreenDetail::default(),
        }
    }

    fn reject(&mut self, reason: ScreenReason) {
        if !self.reasons.contains(&reason) {
            self.reasons.push(reason);
        }
        self.accepted = false;
    }
}

/// Runs every subject check. The mid-session check sees the first half of
/// the session; BT.500 runs over subjects that survived the behavioral
/// checks. Output is sorted by subject id.
pub fn screen_all(
    sessions: &[SessionRecord],
    golden_reference: &HashMap<String, f64>,
    config: &ScreeningConfig,
) -> Vec<ScreenVerdict> {
    let mut sorted: Vec<&SessionRecord> = sessions.iter().collect();
    sorted.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));

    let mut verdicts: Vec<ScreenVerdict> = sorted
        .iter()
        .map(|s| {
            let mut v = ScreenVerdict::new(&s.subject_id);
            let half = s.ratings.len().div_ceil(2);
            match check_mid_session(&s.ratings[..half], config) {
                Ok(reason) => {
                    v.detail.mid_session = reason;
                    if let Some(r) = reason {
                        v.reject(r);
                    }
                }
                Err(e) => v.warnings.push(format!("mid-session check skipped: {e}")),
            }
            match check_repeats(s, config.repeat_tolerance, config.repeat_max_failures) {
                Ok(rc) => {
                    if !rc.passed {
                        v.reject(ScreenReason::RepeatInconsistent);
                    }
                    v.detail.repeats = Some(rc);
                }
                Err(e) => v.warnings.push(format!("repeat check skipped: {e}")),
            }
            match check_golden(s, golden_reference, config.golden_min_lcc) {
                Ok(gc) => {
                    if !gc.passed {
                        v.reject(ScreenReason::GoldenMismatch);
                    }
                    v.detail.golden = Some(gc);
                }
                Err(e) => v.warnings.push(format!("golden check skipped: {e}")),
            }
            if s.meta.lenses == Lenses::No {
                v.reject(ScreenReason::NoLenses);
            }
            v
        })
        .collect();

    let survivors = sorted
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| v.accepted)
        .map(|(s, _)| *s);
    match bt500_reject(&ScoreMatrix::from_sessions(survivors)) {
        Ok(res) => {
            for v in verdicts.iter_mut().filter(|v| v.accepted) {
                if let Some(c) = res.counts.get(&v.subject_id) {
                    v.detail.bt500 = Some(*c);
                }
                if res.rejected.contains(&v.subject_id) {
                    v.reject(ScreenReason::Bt500Outlier);
                }
            }
        }
        Err(e) => {
            for v in verdicts.iter_mut().filter(|v| v.accepted) {
                v.warnings.push(format!("BT.500 screening skipped: {e}"));
            }
        }
    }
    verdicts
}

/// `subject_id,accepted,reasons` with reasons joined by `;`.
pub fn write_verdicts_csv(path: &std::path::Path, verdicts: &[ScreenVerdict]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subject_id", "accepted", "reasons"])?;
    for v in verdicts {
        let reasons: Vec<&str> = v.reasons.iter().map(|r| r.as_str()).collect();
        w.write_record([
            v.subject_id.as_str(),
            if v.accepted { "1" } else { "0" },
            &reasons.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Subject ids accepted in a verdict CSV.
pub fn read_accepted(path: &std::path::Path) -> Result<BTreeSet<String>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        if matches!(rec.get(1), Some("1") | Some("true")) {
            out.insert(rec.get(0).unwrap_or_default().to_string());
        }
    }
    Ok(out)
}
