//! Per-item score outlier rejection and MOS / distortion-probability
//! computation.
//!
//! Each item's scores are first tested for normality by kurtosis. Scores
//! judged normal go through the modified Z-score test (median / MAD);
//! everything else goes through Tukey fences.

use std::collections::BTreeMap;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DistortionVector, ItemRecord, ItemStats, LabelSet, RatingRecord, NUM_CATEGORIES};
use crate::error::{Error, Result};
use crate::stats;

pub use crate::stats::kurtosis;

/// Modified Z-score scale (0.6745 = Phi^-1(0.75)).
pub const MODIFIED_Z_SCALE: f64 = 0.6745;
pub const DEGENERATE_VARIANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    /// Kurtosis interval treated as normal (inclusive).
    pub normal_kurtosis: (f64, f64),
    pub modified_z_cutoff: f64,
    /// Use the classical (mean / stddev) Z-score instead of the modified one.
    pub plain_z: bool,
    pub plain_z_cutoff: f64,
    pub tukey_k: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            normal_kurtosis: (2.0, 4.0),
            modified_z_cutoff: 3.5,
            plain_z: false,
            plain_z_cutoff: 3.0,
            tukey_k: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierMethod {
    ModifiedZ,
    PlainZ,
    Tukey,
    /// Normal by kurtosis but MAD was zero.
    TukeyMadFallback,
    /// Zero variance: nothing to reject.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierResult {
    pub retained: Vec<f64>,
    pub rejected: Vec<usize>,
    pub method: OutlierMethod,
    pub kurtosis: Option<f64>,
}

pub fn is_normal(kurt: f64, config: &CleaningConfig) -> bool {
    kurt >= config.normal_kurtosis.0 && kurt <= config.normal_kurtosis.1
}

pub fn reject_outliers(scores: &[f64], config: &CleaningConfig) -> Result<OutlierResult> {
    if scores.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "outlier rejection needs at least 4 scores, got {}",
            scores.len()
        )));
    }
    let kurt = match kurtosis(scores) {
        Ok(k) => k,
        Err(Error::UndefinedKurtosis) => {
            return Ok(OutlierResult {
                retained: scores.to_vec(),
                rejected: Vec::new(),
                method: OutlierMethod::Degenerate,
                kurtosis: None,
            })
        }
        Err(e) => return Err(e),
    };

    let (method, rejected) = if is_normal(kurt, config) {
        if config.plain_z {
            let m = stats::mean(scores);
            let sd = stats::sample_std(scores);
            let idx = (0..scores.len())
                .filter(|&i| ((scores[i] - m) / sd).abs() > config.plain_z_cutoff)
                .collect();
            (OutlierMethod::PlainZ, idx)
        } else {
            let med = stats::median(scores);
            let deviations: Vec<f64> = scores.iter().map(|x| (x - med).abs()).collect();
            let mad = stats::median(&deviations);
            if mad > 0.0 {
                let idx = (0..scores.len())
                    .filter(|&i| {
                        (MODIFIED_Z_SCALE * (scores[i] - med) / mad).abs() > config.modified_z_cutoff
                    })
                    .collect();
                (OutlierMethod::ModifiedZ, idx)
            } else {
                (OutlierMethod::TukeyMadFallback, tukey(scores, config.tukey_k))
            }
        }
    } else {
        (OutlierMethod::Tukey, tukey(scores, config.tukey_k))
    };

    assert!(
        rejected.len() <= scores.len() / 2,
        "rejected {} of {} scores",
        rejected.len(),
        scores.len()
    );
    let retained = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !rejected.contains(i))
        .map(|(_, &v)| v)
        .collect();
    Ok(OutlierResult {
        retained,
        rejected,
        method,
        kurtosis: Some(kurt),
    })
}

fn tukey(scores: &[f64], k: f64) -> Vec<usize> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = stats::quantile_sorted(&sorted, 0.25);
    let q3 = stats::quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - k * iqr, q3 + k * iqr);
    (0..scores.len())
        .filter(|&i| scores[i] < lo || scores[i] > hi)
        .collect()
}

/// MOS, sample stddev and per-category label fractions over retained ratings.
pub fn compute_item_stats(item_id: &str, ratings: &[(f64, LabelSet)]) -> Result<ItemStats> {
    if ratings.is_empty() {
        return Err(Error::InsufficientData(format!(
            "item {item_id}: no retained ratings"
        )));
    }
    let scores: Vec<f64> = ratings.iter().map(|r| r.0).collect();
    let n = ratings.len() as f64;
    let mut probs = [0.0; NUM_CATEGORIES];
    for (c, p) in probs.iter_mut().enumerate() {
        *p = ratings.iter().filter(|r| r.1 .0[c]).count() as f64 / n;
    }
    Ok(ItemStats {
        item_id: item_id.to_string(),
        mos: stats::mean(&scores),
        stddev: stats::sample_std(&scores),
        count: ratings.len(),
        distortion_prob: DistortionVector(probs),
    })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CleaningReport {
    pub items: usize,
    pub ratings_in: usize,
    pub ratings_rejected: usize,
    pub by_method: BTreeMap<String, usize>,
    pub dropped_items: Vec<String>,
}

/// Runs outlier rejection on every item and computes its stats. Items with
/// fewer than 4 ratings keep all of them. Output is sorted by item id.
pub fn clean_ratings<'a>(
    ratings: impl IntoIterator<Item = &'a RatingRecord>,
    config: &CleaningConfig,
) -> (Vec<ItemStats>, CleaningReport) {
    let mut by_item: BTreeMap<&str, Vec<(f64, LabelSet)>> = BTreeMap::new();
    for r in ratings {
        by_item
            .entry(r.item_id.as_str())
            .or_default()
            .push((r.quality, r.distortions));
    }
    let results: Vec<(&str, usize, Option<OutlierMethod>, Result<ItemStats>)> = by_item
        .par_iter()
        .map(|(&item, rows)| {
            let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let (kept, method) = if rows.len() >= 4 {
                match reject_outliers(&scores, config) {
                    Ok(res) => {
                        let kept: Vec<(f64, LabelSet)> = rows
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| !res.rejected.contains(i))
                            .map(|(_, r)| *r)
                            .collect();
                        (kept, Some(res.method))
                    }
                    Err(_) => (rows.clone(), None),
                }
            } else {
                (rows.clone(), None)
            };
            let rejected = rows.len() - kept.len();
            (item, rejected, method, compute_item_stats(item, &kept))
        })
        .collect();

    let mut report = CleaningReport {
        items: by_item.len(),
        ratings_in: by_item.values().map(Vec::len).sum(),
        ..Default::default()
    };
    let mut out = Vec::with_capacity(results.len());
    for (item, rejected, method, stats) in results {
        report.ratings_rejected += rejected;
        if let Some(m) = method {
            let key = serde_json::to_value(m)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            *report.by_method.entry(key).or_default() += 1;
        }
        match stats {
            Ok(s) => out.push(s),
            Err(e) => {
                log::warn!("dropping item {item}: {e}");
                report.dropped_items.push(item.to_string());
            }
        }
    }
    (out, report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DroppedItem {
    pub item_id: String,
    pub reason: String,
}

/// Per-channel pixel variance on [0, 1] intensities.
pub fn channel_variances(img: &RgbImage) -> [f64; 3] {
    let n = (img.width() as f64) * (img.height() as f64);
    let mut out = [0.0; 3];
    for (c, var) in out.iter_mut().enumerate() {
        let m = img.pixels().map(|p| p[c] as f64 / 255.0).sum::<f64>() / n;
        *var = img
            .pixels()
            .map(|p| (p[c] as f64 / 255.0 - m).powi(2))
            .sum::<f64>()
            / n;
    }
    out
}

/// Drops constant-color items (every channel's variance below 1e-6 on [0, 1]
/// intensities) and items whose pixels cannot be loaded.
pub fn drop_degenerate_items(
    items: Vec<ItemRecord>,
    load: impl Fn(&ItemRecord) -> Result<RgbImage> + Sync,
) -> (Vec<ItemRecord>, Vec<DroppedItem>) {
    let verdicts: Vec<Option<String>> = items
        .par_iter()
        .map(|item| match load(item) {
            Ok(img) => {
                let var = channel_variances(&img);
                var.iter()
                    .all(|&v| v < DEGENERATE_VARIANCE)
                    .then(|| format!("constant color (max channel variance {:.3e})", var.iter().cloned().fold(0.0, f64::max)))
            }
            Err(e) => Some(format!("undecodable: {e}")),
        })
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (item, verdict) in items.into_iter().zip(verdicts) {
        match verdict {
            None => kept.push(item),
            Some(reason) => dropped.push(DroppedItem {
                item_id: item.item_id,
                reason,
            }),
        }
    }
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DistortionCategory;
    use approx::assert_abs_diff_eq;

    #[test]
    fn modified_z_rejects_far_point() {
        // Oracle: median of the 9 values is 50, |x - 50| = [0,1,1,2,2,0,1,1,45];
        // MAD = 1; M(95) = 0.6745 * 45 = 30.4 > 3.5, every other |M| <= 1.35.
        let mut scores = vec![50.0, 51.0, 49.0, 52.0, 48.0, 50.0, 51.0, 49.0];
        scores.push(95.0);
        let k = kurtosis(&scores).unwrap();
        let res = reject_outliers(&scores, &CleaningConfig::default()).unwrap();
        assert_eq!(res.rejected, vec![8]);
        // kurtosis of this fixture is 7.04, so Tukey runs; the Z branch
        // is checked on the same data by widening the normal interval.
        assert!(k > 4.0);
        assert_eq!(res.method, OutlierMethod::Tukey);
        let wide = CleaningConfig {
            normal_kurtosis: (0.0, 10.0),
            ..Default::default()
        };
        let res = reject_outliers(&scores, &wide).unwrap();
        assert_eq!(res.method, OutlierMethod::ModifiedZ);
        assert_eq!(res.rejected, vec![8]);
    }

    #[test]
    fn spike_fixtures_reject_the_spike() {
        // [1,2,3,4,100]: b2 = (37604834 / 5) / 1522^2 = 3.247, normal; median 3, MAD 1,
        // M(100) = 0.6745 * 97 = 65.4.
        let scores = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_abs_diff_eq!(kurtosis(&scores).unwrap(), 37_604_834.0 / 5.0 / (1522.0 * 1522.0), epsilon = 1e-12);
        let res = reject_outliers(&scores, &CleaningConfig::default()).unwrap();
        assert_eq!(res.method, OutlierMethod::ModifiedZ);
        assert_eq!(res.rejected, vec![4]);
        assert_eq!(res.retained, vec![1.0, 2.0, 3.0, 4.0]);

        // [1..8, 100]: b2 > 4, Tukey; Q1 = 3, Q3 = 7, fences [-3, 13].
        let heavy = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 100.0];
        assert!(kurtosis(&heavy).unwrap() > 4.0);
        let res = reject_outliers(&heavy, &CleaningConfig::default()).unwrap();
        assert_eq!(res.method, OutlierMethod::Tukey);
        assert_eq!(res.rejected, vec![8]);
    }

    #[test]
    fn identical_scores_are_untouched() {
        let res = reject_outliers(&[42.0; 10], &CleaningConfig::default()).unwrap();
        assert!(res.rejected.is_empty());
        assert_eq!(res.method, OutlierMethod::Degenerate);
    }

    #[test]
    fn zero_mad_falls_back_to_tukey() {
        let scores = [50.0, 50.0, 50.0, 50.0, 50.0, 50.0, 40.0, 60.0];
        // deviations from mean 50: six 0s, -10, 10 -> m2 = 200/8 = 25, m4 = 20000/8 = 2500, b2 = 4
        assert_abs_diff_eq!(kurtosis(&scores).unwrap(), 4.0, epsilon = 1e-12);
        let res = reject_outliers(&scores, &CleaningConfig::default()).unwrap();
        assert_eq!(res.method, OutlierMethod::TukeyMadFallback);
        assert_eq!(res.rejected, vec![6, 7]);
    }

    #[test]
    fn plain_z_flag() {
        let mut scores: Vec<f64> = (0..40).map(|i| 50.0 + (i % 7) as f64 - 3.0).collect();
        scores.push(75.0);
        let cfg = CleaningConfig {
            plain_z: true,
            normal_kurtosis: (0.0, 100.0),
            ..Default::default()
        };
        let res = reject_outliers(&scores, &cfg).unwrap();
        assert_eq!(res.method, OutlierMethod::PlainZ);
        assert_eq!(res.rejected, vec![40]);
    }

    #[test]
    fn too_few_scores() {
        assert!(reject_outliers(&[1.0, 2.0, 3.0], &CleaningConfig::default()).is_err());
    }

    #[test]
    fn item_stats_fractions() {
        let blurry = LabelSet::only(DistortionCategory::Blurry);
        let none = LabelSet::only(DistortionCategory::None);
        let rows: Vec<(f64, LabelSet)> = (0..34)
            .map(|i| (60.0, if i < 17 { blurry } else { none }))
            .collect();
        let s = compute_item_stats("x", &rows).unwrap();
        assert_eq!(s.distortion_prob.get(DistortionCategory::Blurry), 0.5);
        assert_eq!(s.distortion_prob.get(DistortionCategory::None), 0.5);
        assert_eq!(s.count, 34);

        let single = compute_item_stats("y", &[(70.0, none)]).unwrap();
        assert_eq!((single.mos, single.stddev, single.count), (70.0, 0.0, 1));
        assert!(compute_item_stats("z", &[]).is_err());
    }

    #[test]
    fn item_stats_match_spreadsheet_recomputation() {
        let rows = vec![
            (80.0, LabelSet([true, false, false, false, false, false, false])),
            (65.5, LabelSet([true, true, false, false, false, false, false])),
            (72.0, LabelSet([false, false, false, false, false, true, false])),
            (90.0, LabelSet([false, false, true, false, true, false, false])),
            (55.25, LabelSet([true, false, false, false, false, false, true])),
        ];
        let s = compute_item_stats("m", &rows).unwrap();
        // hand tally: sum = 362.75, mean = 72.55
        assert_abs_diff_eq!(s.mos, 72.55, epsilon = 1e-12);
        let ss: f64 = [80.0, 65.5, 72.0, 90.0, 55.25]
            .iter()
            .map(|v: &f64| (v - 72.55).powi(2))
            .sum();
        assert_abs_diff_eq!(s.stddev, (ss / 4.0).sqrt(), epsilon = 1e-12);
        assert_eq!(s.distortion_prob.0, [0.6, 0.2, 0.2, 0.0, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn degenerate_images() {
        let item = |id: &str| ItemRecord {
            item_id: id.into(),
            kind: crate::data::ItemKind::WholeImage,
            parent_id: None,
            width_px: 100,
            height_px: 100,
            source_path: format!("{id}.png").into(),
        };
        let items = vec![item("gray"), item("photo"), item("near"), item("broken")];
        let (kept, dropped) = drop_degenerate_items(items, |i| match i.item_id.as_str() {
            "gray" => Ok(RgbImage::from_pixel(100, 100, image::Rgb([128, 128, 128]))),
            "photo" => Ok(RgbImage::from_fn(100, 100, |x, y| {
                image::Rgb([(x * 2) as u8, (y * 2) as u8, ((x + y) % 256) as u8])
            })),
            "near" => {
                let mut img = RgbImage::from_pixel(100, 100, image::Rgb([128, 128, 128]));
                img.put_pixel(3, 4, image::Rgb([136, 128, 128]));
                // one pixel off by 8/255 in 10^4: var = 1e-4 * (1 - 1e-4) * (8/255)^2
                let v = channel_variances(&img)[0];
                assert_abs_diff_eq!(v, 1e-4 * (1.0 - 1e-4) * (8.0f64 / 255.0).powi(2), epsilon = 1e-17);
                assert!(v < 1e-6 && v > 5e-8);
                Ok(img)
            }
            _ => Err(Error::Image("bad bytes".into())),
        });
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].item_id, "photo");
        let ids: Vec<_> = dropped.iter().map(|d| d.item_id.as_str()).collect();
        assert_eq!(ids, ["gray", "near", "broken"]);
        assert!(dropped[2].reason.starts_with("undecodable"));
    }

    proptest::proptest! {
        #[test]
        fn tukey_affine_invariant(xs in proptest::collection::vec(0.0f64..100.0, 6..40), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            proptest::prop_assert_eq!(tukey(&xs, 1.5), tukey(&ys, 1.5));
        }

        #[test]
        fn never_rejects_more_than_half(xs in proptest::collection::vec(0.0f64..100.0, 4..60)) {
            let res = reject_outliers(&xs, &CleaningConfig::default()).unwrap();
            proptest::prop_assert!(res.rejected.len() <= xs.len() / 2);
        }

        #[test]
        fn mos_within_range(xs in proptest::collection::vec(0.0f64..=100.0, 1..50)) {
            let rows: Vec<(f64, LabelSet)> = xs.iter().map(|&q| (q, LabelSet::only(DistortionCategory::None))).collect();
            let s = compute_item_stats("p", &rows).unwrap();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!(s.mos >= lo - 1e-9 && s.mos <= hi + 1e-9);
        }
    }
}
