//! Study-level analytics: split-half consistency, golden agreement, patch
//! versus image agreement, label binarization, histograms and demographic
//! strata.

mod binarize;
pub mod simulate;

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use binarize::{binarize, BinarizeStrategy};
pub use crate::stats::{lcc, srcc};

use crate::data::{
    DistortionCategory, DistortionVector, ItemKind, ItemRecord, ItemStats, RatingRecord,
    SessionRecord, NUM_CATEGORIES,
};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Images,
    Patches,
    Salient,
    Random,
    Frames,
}

impl Scope {
    pub fn includes(self, kind: ItemKind) -> bool {
        match self {
            Scope::Images => kind == ItemKind::WholeImage,
            Scope::Patches => kind.is_patch(),
            Scope::Salient => kind == ItemKind::SalientPatch,
            Scope::Random => kind == ItemKind::RandomPatch,
            Scope::Frames => kind == ItemKind::VideoFrame,
        }
    }

    /// Ratings whose item belongs to this scope.
    pub fn filter<'a>(self, ratings: &'a [RatingRecord], items: &[ItemRecord]) -> Vec<RatingRecord> {
        let ids: HashSet<&str> = items
            .iter()
            .filter(|i| self.includes(i.kind))
            .map(|i| i.item_id.as_str())
            .collect();
        ratings
            .iter()
            .filter(|r| ids.contains(r.item_id.as_str()))
            .cloned()
            .collect()
    }
}

impl std::str::FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "images" => Scope::Images,
            "patches" => Scope::Patches,
            "salient" => Scope::Salient,
            "random" => Scope::Random,
            "frames" => Scope::Frames,
            _ => return Err(Error::Invalid(format!("unknown scope `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub scope: Scope,
    pub mean_split_half_srcc: f64,
    /// Splits that produced a correlation.
    pub n_splits: usize,
    pub per_split: Vec<f64>,
    pub skipped_splits: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    sum: f64,
    n: usize,
    labels: [usize; NUM_CATEGORIES],
}

impl Tally {
    fn mos(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn prob(&self, c: usize) -> f64 {
        self.labels[c] as f64 / self.n as f64
    }

    fn prob_vector(&self) -> DistortionVector {
        let mut p = [0.0; NUM_CATEGORIES];
        for (c, v) in p.iter_mut().enumerate() {
            *v = self.prob(c);
        }
        DistortionVector(p)
    }
}

/// Split-half driver shared by the quality and distortion analyses. Repeat
/// presentations are ignored. Subjects are indexed by first appearance so the
/// partition does not depend on the id strings.
struct SplitHalf<'a> {
    ratings: Vec<(usize, &'a RatingRecord)>,
    n_subjects: usize,
}

impl<'a> SplitHalf<'a> {
    fn new(ratings: &'a [RatingRecord]) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut raters_per_item: HashMap<&str, HashSet<usize>> = HashMap::new();
        let mut out = Vec::with_capacity(ratings.len());
        for r in ratings.iter().filter(|r| !r.is_repeat) {
            let next = index.len();
            let s = *index.entry(r.subject_id.as_str()).or_insert(next);
            raters_per_item.entry(r.item_id.as_str()).or_default().insert(s);
            out.push((s, r));
        }
        if index.len() < 4 {
            return Err(Error::InsufficientData(format!(
                "split-half analysis needs at least 4 subjects, got {}",
                index.len()
            )));
        }
        let mut sparse: Vec<&str> = raters_per_item
            .iter()
            .filter(|(_, s)| s.len() < 2)
            .map(|(i, _)| *i)
            .collect();
        if !sparse.is_empty() {
            sparse.sort_unstable();
            return Err(Error::InsufficientData(format!(
                "{} item(s) rated by fewer than 2 subjects, e.g. `{}`",
                sparse.len(),
                sparse[0]
            )));
        }
        Ok(SplitHalf {
            ratings: out,
            n_subjects: index.len(),
        })
    }

    /// Items rated in both halves of split `k`, in item-id order.
    fn common(&self, seed: u64, k: usize) -> Vec<(Tally, Tally)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut perm: Vec<usize> = (0..self.n_subjects).collect();
        perm.shuffle(&mut rng);
        let first = self.n_subjects.div_ceil(2);
        let mut in_a = vec![false; self.n_subjects];
        for &s in &perm[..first] {
            in_a[s] = true;
        }
        let mut a: BTreeMap<&str, Tally> = BTreeMap::new();
        let mut b: BTreeMap<&str, Tally> = BTreeMap::new();
        for &(s, r) in &self.ratings {
            let t = if in_a[s] { &mut a } else { &mut b }
                .entry(r.item_id.as_str())
                .or_default();
            t.sum += r.quality;
            t.n += 1;
            for (c, &f) in r.distortions.0.iter().enumerate() {
                t.labels[c] += f as usize;
            }
        }
        a.into_iter()
            .filter_map(|(id, ta)| b.get(id).map(|tb| (ta, *tb)))
            .collect()
    }

    fn run<T: Send>(
        &self,
        n_splits: usize,
        seed: u64,
        f: impl Fn(&[(Tally, Tally)]) -> T + Sync,
    ) -> Result<Vec<T>> {
        if n_splits == 0 {
            return Err(Error::Invalid("n_splits must be at least 1".into()));
        }
        Ok((0..n_splits)
            .into_par_iter()
            .map(|k| f(&self.common(seed, k)))
            .collect())
    }
}

/// Mean SRCC between per-item MOS vectors of two random disjoint subject
/// halves, averaged over `n_splits` seeded splits.
pub fn inter_subject_consistency(
    ratings: &[RatingRecord],
    n_splits: usize,
    seed: u64,
    scope: Scope,
) -> Result<ConsistencyReport> {
    let sh = SplitHalf::new(ratings)?;
    let results = sh.run(n_splits, seed, |common| {
        if common.len() < 3 {
            return None;
        }
        let (a, b): (Vec<f64>, Vec<f64>) = common.iter().map(|(a, b)| (a.mos(), b.mos())).unzip();
        stats::srcc(&a, &b).ok()
    })?;
    let per_split: Vec<f64> = results.iter().flatten().copied().collect();
    let skipped = results.len() - per_split.len();
    if skipped > 0 {
        log::warn!("{skipped} of {n_splits} splits skipped (fewer than 3 common items or no rank variance)");
    }
    if per_split.is_empty() {
        return Err(Error::InsufficientData("every split was skipped".into()));
    }
    Ok(ConsistencyReport {
        scope,
        mean_split_half_srcc: stats::mean(&per_split),
        n_splits: per_split.len(),
        per_split,
        skipped_splits: skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntraSubjectReport {
    pub median_lcc: f64,
    pub per_subject: Vec<(String, f64)>,
    /// Subjects with fewer than 3 golden ratings or constant golden scores.
    pub excluded: Vec<String>,
}

/// Median over subjects of the LCC between a subject's golden scores and the
/// reference scores.
pub fn intra_subject_consistency(
    sessions: &[SessionRecord],
    golden_reference: &HashMap<String, f64>,
) -> Result<IntraSubjectReport> {
    let mut per_subject = Vec::new();
    let mut excluded = Vec::new();
    for s in sessions {
        let (x, y) = crate::screening::golden_pairs(s, golden_reference);
        match stats::lcc(&x, &y) {
            Ok(r) => per_subject.push((s.subject_id.clone(), r)),
            Err(_) => excluded.push(s.subject_id.clone()),
        }
    }
    if per_subject.is_empty() {
        return Err(Error::InsufficientData(
            "no subject has 3 usable golden ratings".into(),
        ));
    }
    let values: Vec<f64> = per_subject.iter().map(|(_, r)| *r).collect();
    Ok(IntraSubjectReport {
        median_lcc: stats::median(&values),
        per_subject,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchImageReport {
    pub overall: f64,
    pub n_overall: usize,
    /// `None` when fewer than 3 patches of the kind are available or the
    /// correlation is undefined.
    pub random: Option<f64>,
    pub salient: Option<f64>,
    /// Per-category SRCC between patch and parent distortion probabilities.
    pub distortion: BTreeMap<DistortionCategory, Option<f64>>,
}

/// SRCC between each patch's MOS and its parent image's MOS.
pub fn patch_vs_image_correlation(
    item_stats: &[ItemStats],
    items: &[ItemRecord],
) -> Result<PatchImageReport> {
    let by_id: HashMap<&str, &ItemStats> =
        item_stats.iter().map(|s| (s.item_id.as_str(), s)).collect();
    let mut pairs: Vec<(ItemKind, &ItemStats, &ItemStats)> = Vec::new();
    for item in items.iter().filter(|i| i.kind.is_patch()) {
        let Some(patch) = by_id.get(item.item_id.as_str()) else {
            continue;
        };
        let parent_id = item.parent_id.as_deref().unwrap_or_default();
        let parent = by_id.get(parent_id).ok_or_else(|| {
            Error::Invalid(format!(
                "patch `{}` has no parent statistics (`{parent_id}`)",
                item.item_id
            ))
        })?;
        pairs.push((item.kind, patch, parent));
    }
    pairs.sort_by(|a, b| a.1.item_id.cmp(&b.1.item_id));
    let corr = |kind: Option<ItemKind>| -> Result<f64> {
        let (p, q): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter(|(k, _, _)| kind.is_none_or(|want| *k == want))
            .map(|(_, patch, parent)| (patch.mos, parent.mos))
            .unzip();
        if p.is_empty() {
            return Err(Error::UndefinedCorrelation("no patch has parent statistics"));
        }
        stats::srcc(&p, &q)
    };
    let distortion = DistortionCategory::ALL
        .into_iter()
        .map(|c| {
            let (p, q): (Vec<f64>, Vec<f64>) = pairs
                .iter()
                .map(|(_, patch, parent)| {
                    (patch.distortion_prob.get(c), parent.distortion_prob.get(c))
                })
                .unzip();
            (c, stats::srcc(&p, &q).ok())
        })
        .collect();
    Ok(PatchImageReport {
        overall: corr(None)?,
        n_overall: pairs.len(),
        random: corr(Some(ItemKind::RandomPatch)).ok(),
        salient: corr(Some(ItemKind::SalientPatch)).ok(),
        distortion,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryConsistency {
    /// Mean split-half SRCC; `None` when every split was skipped.
    pub mean_srcc: Option<f64>,
    pub n_splits: usize,
}

fn summarize(per_split: impl Iterator<Item = Option<f64>>) -> CategoryConsistency {
    let vals: Vec<f64> = per_split.flatten().collect();
    CategoryConsistency {
        mean_srcc: (!vals.is_empty()).then(|| stats::mean(&vals)),
        n_splits: vals.len(),
    }
}

fn category_srcc(common: &[(Tally, Tally)], f: impl Fn(&Tally) -> f64) -> Option<f64> {
    if common.len() < 3 {
        return None;
    }
    let (a, b): (Vec<f64>, Vec<f64>) = common.iter().map(|(a, b)| (f(a), f(b))).unzip();
    stats::srcc(&a, &b).ok()
}

/// Split-half SRCC of per-item distortion probabilities, one per category.
pub fn distortion_consistency(
    ratings: &[RatingRecord],
    n_splits: usize,
    seed: u64,
) -> Result<BTreeMap<DistortionCategory, CategoryConsistency>> {
    let sh = SplitHalf::new(ratings)?;
    let results = sh.run(n_splits, seed, |common| {
        (0..NUM_CATEGORIES)
            .map(|c| category_srcc(common, |t| t.prob(c)))
            .collect::<Vec<_>>()
    })?;
    Ok(DistortionCategory::ALL
        .into_iter()
        .map(|c| (c, summarize(results.iter().map(|r| r[c.index()]))))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizationRow {
    pub strategy: BinarizeStrategy,
    pub label: String,
    pub per_category: BTreeMap<DistortionCategory, CategoryConsistency>,
    /// `100 * (probabilistic - binarized) / probabilistic`.
    pub drop_pct: BTreeMap<DistortionCategory, Option<f64>>,
    pub mean_srcc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizationStudy {
    pub probabilistic: BTreeMap<DistortionCategory, CategoryConsistency>,
    pub rows: Vec<BinarizationRow>,
}

/// Compares split-half consistency of probabilistic labels against each
/// binarization strategy applied to the per-half probability vectors.
pub fn binarization_consistency_study(
    ratings: &[RatingRecord],
    strategies: &[BinarizeStrategy],
    n_splits: usize,
    seed: u64,
) -> Result<BinarizationStudy> {
    let sh = SplitHalf::new(ratings)?;
    // per split: [probabilistic, strategy 0, strategy 1, ...] x category
    let results = sh.run(n_splits, seed, |common| {
        let mut rows = vec![(0..NUM_CATEGORIES)
            .map(|c| category_srcc(common, |t| t.prob(c)))
            .collect::<Vec<_>>()];
        for &s in strategies {
            let bin: Vec<_> = common
                .iter()
                .map(|(a, b)| (binarize(&a.prob_vector(), s), binarize(&b.prob_vector(), s)))
                .collect();
            rows.push(
                (0..NUM_CATEGORIES)
                    .map(|c| {
                        if bin.len() < 3 {
                            return None;
                        }
                        let (x, y): (Vec<f64>, Vec<f64>) = bin
                            .iter()
                            .map(|(a, b)| (a.0[c] as u8 as f64, b.0[c] as u8 as f64))
                            .unzip();
                        stats::srcc(&x, &y).ok()
                    })
                    .collect(),
            );
        }
        rows
    })?;
    let table = |row: usize| -> BTreeMap<DistortionCategory, CategoryConsistency> {
        DistortionCategory::ALL
            .into_iter()
            .map(|c| (c, summarize(results.iter().map(|r| r[row][c.index()]))))
            .collect()
    };
    let probabilistic = table(0);
    let rows = strategies
        .iter()
        .enumerate()
        .map(|(i, &strategy)| {
            let per_category = table(i + 1);
            let drop_pct = DistortionCategory::ALL
                .into_iter()
                .map(|c| {
                    let d = match (probabilistic[&c].mean_srcc, per_category[&c].mean_srcc) {
                        (Some(p), Some(b)) if p != 0.0 => Some(100.0 * (p - b) / p),
                        _ => None,
                    };
                    (c, d)
                })
                .collect();
            let vals: Vec<f64> = per_category.values().filter_map(|v| v.mean_srcc).collect();
            BinarizationRow {
                strategy,
                label: strategy.label(),
                per_category,
                drop_pct,
                mean_srcc: (!vals.is_empty()).then(|| stats::mean(&vals)),
            }
        })
        .collect();
    Ok(BinarizationStudy {
        probabilistic,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    /// `bins + 1` edges spanning [0, 100].
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Mean distortion probability per category across items.
    pub distortion_mass: BTreeMap<DistortionCategory, f64>,
}

/// MOS histogram over [0, 100] with equal-width bins (the last bin includes
/// 100) and per-category mean distortion probability.
pub fn histograms(item_stats: &[ItemStats], bins: usize) -> Result<Histograms> {
    if item_stats.is_empty() {
        return Err(Error::InsufficientData("histogram needs at least one item".into()));
    }
    if bins == 0 {
        return Err(Error::Invalid("bins must be at least 1".into()));
    }
    let width = 100.0 / bins as f64;
    let mut counts = vec![0; bins];
    for s in item_stats {
        let b = ((s.mos / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = item_stats.len() as f64;
    let distortion_mass = DistortionCategory::ALL
        .into_iter()
        .map(|c| {
            let total: f64 = item_stats.iter().map(|s| s.distortion_prob.get(c)).sum();
            (c, total / n)
        })
        .collect();
    Ok(Histograms {
        edges: (0..=bins).map(|i| i as f64 * width).collect(),
        counts,
        distortion_mass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MosRange {
    Low,
    Mid,
    High,
}

impl MosRange {
    pub const ALL: [MosRange; 3] = [MosRange::Low, MosRange::Mid, MosRange::High];

    /// [0, 33], [34, 66], [67, 100] after flooring the MOS.
    pub fn of(mos: f64) -> MosRange {
        match mos.floor() as i64 {
            i64::MIN..=33 => MosRange::Low,
            34..=66 => MosRange::Mid,
            _ => MosRange::High,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MosRange::Low => "0-33",
            MosRange::Mid => "34-66",
            MosRange::High => "67-100",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stratum {
    Device,
    Resolution,
    Distance,
    Age,
    Gender,
}

impl Stratum {
    pub const ALL: [Stratum; 5] = [
        Stratum::Device,
        Stratum::Resolution,
        Stratum::Distance,
        Stratum::Age,
        Stratum::Gender,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Device => "device",
            Stratum::Resolution => "resolution",
            Stratum::Distance => "distance",
            Stratum::Age => "age",
            Stratum::Gender => "gender",
        }
    }

    pub fn key(self, session: &SessionRecord) -> String {
        let m = &session.meta;
        match self {
            Stratum::Device => m.device.as_str().into(),
            Stratum::Resolution => format!("{}x{}", m.resolution.0, m.resolution.1),
            Stratum::Distance => m.distance.as_str().into(),
            Stratum::Age => m.age.as_str().into(),
            Stratum::Gender => m.gender.as_str().into(),
        }
    }
}

impl std::str::FromStr for Stratum {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "device" => Stratum::Device,
            "resolution" => Stratum::Resolution,
            "distance" => Stratum::Distance,
            "age" => Stratum::Age,
            "gender" => Stratum::Gender,
            _ => return Err(Error::Invalid(format!("unknown stratum `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumComparison {
    pub stratum: Stratum,
    pub group_a: String,
    /// `"all"` when compared against the whole subject pool.
    pub group_b: String,
    pub n_common: usize,
    pub srcc: f64,
}

/// SRCC between per-item MOS computed within two groups of a stratum.
///
/// A group is one or more stratum values joined by `+` (for example
/// `laptop+desktop`). With `group_b = None` the comparison is against all
/// subjects.
pub fn stratified_consistency(
    ratings: &[RatingRecord],
    sessions: &[SessionRecord],
    stratum: Stratum,
    group_a: &str,
    group_b: Option<&str>,
) -> Result<StratumComparison> {
    let keys: HashMap<&str, String> = sessions
        .iter()
        .map(|s| (s.subject_id.as_str(), stratum.key(s)))
        .collect();
    let members = |group: Option<&str>| -> HashMap<&str, Tally> {
        let wanted: Option<HashSet<&str>> = group.map(|g| g.split('+').collect());
        let mut out: HashMap<&str, Tally> = HashMap::new();
        for r in ratings.iter().filter(|r| !r.is_repeat) {
            let keep = match (&wanted, keys.get(r.subject_id.as_str())) {
                (None, _) => true,
                (Some(w), Some(k)) => w.contains(k.as_str()),
                (Some(_), None) => false,
            };
            if keep {
                let t = out.entry(r.item_id.as_str()).or_default();
                t.sum += r.quality;
                t.n += 1;
            }
        }
        out
    };
    let a = members(Some(group_a));
    let b = members(group_b);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(format!(
            "stratum group `{}` has no ratings",
            if a.is_empty() { group_a } else { group_b.unwrap_or("all") }
        )));
    }
    let mut common: Vec<(&str, f64, f64)> = a
        .iter()
        .filter_map(|(id, ta)| b.get(id).map(|tb| (*id, ta.mos(), tb.mos())))
        .collect();
    if common.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "groups share {} items (need 3)",
            common.len()
        )));
    }
    common.sort_by(|x, y| x.0.cmp(y.0));
    let (x, y): (Vec<f64>, Vec<f64>) = common.iter().map(|&(_, p, q)| (p, q)).unzip();
    Ok(StratumComparison {
        stratum,
        group_a: group_a.into(),
        group_b: group_b.unwrap_or("all").into(),
        n_common: common.len(),
        srcc: stats::srcc(&x, &y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::simulate::*;
    use super::*;
    use crate::data::{DeviceClass, LabelSet, SessionMeta};
    use approx::assert_abs_diff_eq;

    fn rating(subject: &str, item: &str, q: f64, labels: [bool; 7]) -> RatingRecord {
        RatingRecord {
            subject_id: subject.into(),
            item_id: item.into(),
            quality: q,
            distortions: LabelSet(labels),
            position_in_session: 0,
            is_repeat: false,
            is_golden: false,
        }
    }

    fn study(noise: f64, n_raters: usize, seed: u64) -> (Vec<RatingRecord>, Vec<SimulatedItem>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items = random_items(200, "i", &mut rng);
        let raters: Vec<_> = (0..n_raters)
            .map(|i| SimulatedRaterConfig::new(format!("s{i}"), RaterKind::Faithful, noise))
            .collect();
        let design = StudyDesign {
            items_per_session: 200,
            repeats: 0,
            golden: vec![],
        };
        let s = simulate_study(&raters, &items, &design, seed).unwrap();
        (s.sessions.into_iter().flat_map(|s| s.ratings).collect(), items)
    }

    #[test]
    fn zero_noise_is_perfectly_consistent() {
        let (ratings, _) = study(0.0, 6, 1);
        let r = inter_subject_consistency(&ratings, 10, 3, Scope::Images).unwrap();
        assert_eq!(r.n_splits, 10);
        assert!(r.per_split.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_abs_diff_eq!(r.mean_split_half_srcc, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn split_half_matches_reference_run() {
        let (ratings, _) = study(15.0, 40, 7);
        let a = inter_subject_consistency(&ratings, 50, 1, Scope::Images).unwrap();
        let b = inter_subject_consistency(&ratings, 50, 2, Scope::Images).unwrap();
        assert!((a.mean_split_half_srcc - b.mean_split_half_srcc).abs() < 0.03);
        assert!(a.mean_split_half_srcc > 0.9);
        let mean: f64 = a.per_split.iter().sum::<f64>() / a.per_split.len() as f64;
        assert_abs_diff_eq!(mean, a.mean_split_half_srcc, epsilon = 1e-12);
    }

    #[test]
    fn relabeling_subjects_is_invariant() {
        let (ratings, _) = study(10.0, 9, 4);
        let renamed: Vec<RatingRecord> = ratings
            .iter()
            .map(|r| RatingRecord {
                subject_id: format!("zz-{}", r.subject_id.chars().rev().collect::<String>()),
                ..r.clone()
            })
            .collect();
        let a = inter_subject_consistency(&ratings, 20, 5, Scope::Images).unwrap();
        let b = inter_subject_consistency(&renamed, 20, 5, Scope::Images).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_half_preconditions() {
        let few: Vec<_> = (0..3).map(|s| rating(&format!("s{s}"), "a", 50.0, [false; 7])).collect();
        assert!(matches!(
            inter_subject_consistency(&few, 5, 0, Scope::Images),
            Err(Error::InsufficientData(_))
        ));
        let mut lonely: Vec<_> = (0..4).map(|s| rating(&format!("s{s}"), "a", 50.0, [false; 7])).collect();
        lonely.push(rating("s0", "b", 10.0, [false; 7]));
        assert!(inter_subject_consistency(&lonely, 5, 0, Scope::Images).is_err());
        // only two items in common: every split is skipped
        let two: Vec<_> = (0..4)
            .flat_map(|s| {
                let id = format!("s{s}");
                vec![rating(&id, "a", 10.0, [false; 7]), rating(&id, "b", 90.0, [false; 7])]
            })
            .collect();
        assert!(inter_subject_consistency(&two, 5, 0, Scope::Images).is_err());
    }

    #[test]
    fn golden_agreement_median() {
        let reference: HashMap<String, f64> =
            (0..5).map(|i| (format!("g{i}"), 10.0 + 20.0 * i as f64)).collect();
        let session = |id: &str, f: &dyn Fn(f64) -> f64| SessionRecord {
            subject_id: id.into(),
            ratings: (0..5)
                .map(|i| RatingRecord {
                    is_golden: true,
                    position_in_session: i,
                    ..rating(id, &format!("g{i}"), f(reference[&format!("g{i}")]), [false; 7])
                })
                .collect(),
            meta: SessionMeta::default(),
        };
        let sessions = vec![
            session("a", &|v| v),
            session("b", &|v| v * 0.5 + 3.0),
            session("c", &|_| 40.0),
        ];
        let r = intra_subject_consistency(&sessions, &reference).unwrap();
        assert_abs_diff_eq!(r.median_lcc, 1.0, epsilon = 1e-12);
        assert_eq!(r.excluded, vec!["c".to_string()]);
    }

    fn stats_of(id: &str, mos: f64) -> ItemStats {
        ItemStats {
            item_id: id.into(),
            mos,
            stddev: 0.0,
            count: 5,
            distortion_prob: DistortionVector([mos / 100.0; 7]),
        }
    }

    fn item(id: &str, kind: ItemKind, parent: Option<&str>) -> ItemRecord {
        ItemRecord {
            item_id: id.into(),
            kind,
            parent_id: parent.map(Into::into),
            width_px: 100,
            height_px: 100,
            source_path: format!("{id}.png").into(),
        }
    }

    #[test]
    fn patches_identical_to_parents() {
        let mut stats = Vec::new();
        let mut items = Vec::new();
        for (i, mos) in [12.0, 40.0, 55.0, 71.0, 90.0].into_iter().enumerate() {
            let p = format!("p{i}");
            stats.push(stats_of(&p, mos));
            items.push(item(&p, ItemKind::WholeImage, None));
            for (kind, suffix) in [(ItemKind::RandomPatch, "r"), (ItemKind::SalientPatch, "s")] {
                let id = format!("{p}_{suffix}");
                stats.push(stats_of(&id, mos));
                items.push(item(&id, kind, Some(&p)));
            }
        }
        let r = patch_vs_image_correlation(&stats, &items).unwrap();
        assert_abs_diff_eq!(r.overall, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.random.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.salient.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(r.n_overall, 10);

        stats.retain(|s| s.item_id != "p2");
        assert!(patch_vs_image_correlation(&stats, &items).is_err());
        assert!(matches!(
            patch_vs_image_correlation(&[], &items),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn patch_kinds_recover_ordering() {
        // salient patches track the parent more closely than random ones
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        use rand_distr::Distribution;
        let mut stats = Vec::new();
        let mut items = Vec::new();
        for i in 0..400 {
            let p = format!("p{i:03}");
            let z: f64 = normal.sample(&mut rng);
            stats.push(stats_of(&p, 50.0 + 15.0 * z));
            items.push(item(&p, ItemKind::WholeImage, None));
            for (kind, suffix, rho) in [
                (ItemKind::RandomPatch, "r", 0.8f64),
                (ItemKind::SalientPatch, "s", 0.9),
            ] {
                let e: f64 = normal.sample(&mut rng);
                let v = rho * z + (1.0 - rho * rho).sqrt() * e;
                let id = format!("{p}_{suffix}");
                stats.push(stats_of(&id, 50.0 + 15.0 * v));
                items.push(item(&id, kind, Some(&p)));
            }
        }
        let r = patch_vs_image_correlation(&stats, &items).unwrap();
        assert!(r.salient.unwrap() > r.random.unwrap());
    }

    #[test]
    fn deterministic_labels_are_fully_consistent() {
        // every subject agrees on every label, item probabilities vary via quality
        let mut ratings = Vec::new();
        for s in 0..6 {
            for i in 0..20 {
                let mut labels = [false; 7];
                for (c, l) in labels.iter_mut().enumerate() {
                    *l = (i + c) % 3 == 0 || (i * (c + 2)) % 11 < 3;
                }
                ratings.push(rating(&format!("s{s}"), &format!("i{i:02}"), i as f64, labels));
            }
        }
        let d = distortion_consistency(&ratings, 8, 1).unwrap();
        for c in d.values() {
            assert_abs_diff_eq!(c.mean_srcc.unwrap(), 1.0, epsilon = 1e-12);
        }
        let study = binarization_consistency_study(&ratings, &BinarizeStrategy::standard_set(), 8, 1)
            .unwrap();
        for row in &study.rows {
            for (c, v) in &row.per_category {
                if let Some(m) = v.mean_srcc {
                    assert_abs_diff_eq!(m, 1.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(row.drop_pct[c].unwrap(), 0.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn probabilistic_beats_binarized_on_noisy_labels() {
        let (ratings, _) = study(10.0, 20, 3);
        let study = binarization_consistency_study(&ratings, &BinarizeStrategy::standard_set(), 20, 9)
            .unwrap();
        for row in &study.rows {
            for c in DistortionCategory::ALL {
                let p = study.probabilistic[&c].mean_srcc.unwrap();
                if let Some(b) = row.per_category[&c].mean_srcc {
                    assert!(p > b, "{} {:?}: {p} vs {b}", row.label, c);
                }
            }
        }
    }

    #[test]
    fn histogram_tallies() {
        let h = histograms(&[stats_of("a", 50.0)], 10).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0, 0, 0, 1, 0, 0, 0, 0]);
        let four = [
            stats_of("a", 0.0),
            stats_of("b", 24.9),
            stats_of("c", 25.0),
            stats_of("d", 100.0),
        ];
        let h = histograms(&four, 4).unwrap();
        assert_eq!(h.counts, vec![2, 1, 0, 1]);
        assert_eq!(h.edges, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert_abs_diff_eq!(
            h.distortion_mass[&DistortionCategory::Blurry],
            (0.0 + 0.249 + 0.25 + 1.0) / 4.0,
            epsilon = 1e-12
        );
        assert!(histograms(&[], 10).is_err());
    }

    #[test]
    fn uniform_mos_histogram_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let items = random_items(5000, "u", &mut rng);
        let stats: Vec<_> = items
            .iter()
            .map(|i| stats_of(&i.item_id, (i.true_mos - 5.0) * 100.0 / 90.0))
            .collect();
        let h = histograms(&stats, 10).unwrap();
        let expected = 500.0;
        let chi2: f64 = h
            .counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9th percentile of chi-square with 9 degrees of freedom
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[test]
    fn mos_range_boundaries() {
        assert_eq!(MosRange::of(0.0), MosRange::Low);
        assert_eq!(MosRange::of(33.9), MosRange::Low);
        assert_eq!(MosRange::of(34.0), MosRange::Mid);
        assert_eq!(MosRange::of(66.99), MosRange::Mid);
        assert_eq!(MosRange::of(67.0), MosRange::High);
        assert_eq!(MosRange::of(100.0), MosRange::High);
    }

    fn device_sessions(ratings: &[RatingRecord]) -> Vec<SessionRecord> {
        let mut ids: Vec<&str> = ratings.iter().map(|r| r.subject_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.iter()
            .enumerate()
            .map(|(i, id)| SessionRecord {
                subject_id: id.to_string(),
                ratings: vec![],
                meta: SessionMeta {
                    device: if i % 2 == 0 { DeviceClass::Laptop } else { DeviceClass::Phone },
                    ..SessionMeta::default()
                },
            })
            .collect()
    }

    #[test]
    fn strata_from_same_distribution_agree() {
        let (ratings, _) = study(10.0, 30, 8);
        let sessions = device_sessions(&ratings);
        let r = stratified_consistency(&ratings, &sessions, Stratum::Device, "laptop", Some("phone"))
            .unwrap();
        assert!(r.srcc > 0.9, "{}", r.srcc);
        let all = stratified_consistency(&ratings, &sessions, Stratum::Device, "laptop+phone", None)
            .unwrap();
        assert_abs_diff_eq!(all.srcc, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_stratum_is_uncorrelated() {
        let (mut ratings, _) = study(10.0, 30, 8);
        let sessions = device_sessions(&ratings);
        let phone: HashSet<String> = sessions
            .iter()
            .filter(|s| s.meta.device == DeviceClass::Phone)
            .map(|s| s.subject_id.clone())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for r in ratings.iter_mut().filter(|r| phone.contains(&r.subject_id)) {
            r.quality = rand::Rng::random_range(&mut rng, 0.0..100.0);
        }
        let r = stratified_consistency(&ratings, &sessions, Stratum::Device, "laptop", Some("phone"))
            .unwrap();
        assert!(r.srcc.abs() < 0.25, "{}", r.srcc);
        assert!(stratified_consistency(&ratings, &sessions, Stratum::Device, "tablet", None).is_err());
    }
}
