use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::model::{MultiTaskModel, Prediction};
use super::train::TrainingSample;
use crate::analysis::MosRange;
use crate::data::{DistortionCategory, DistortionVector, ItemKind};
use crate::error::{Error, Result};
use crate::stats;

/// A correlation value, or the reason it could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl Metric {
    fn from(r: Result<f64>) -> Self {
        match r {
            Ok(v) => Metric {
                value: Some(v),
                note: None,
            },
            Err(e) => Metric {
                value: None,
                note: Some(e.to_string()),
            },
        }
    }

    fn omitted(note: String) -> Self {
        Metric {
            value: None,
            note: Some(note),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeMetrics {
    pub n: usize,
    pub srcc: Metric,
    pub lcc: Metric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub quality_srcc: Metric,
    pub quality_lcc: Metric,
    pub by_range: BTreeMap<MosRange, RangeMetrics>,
    pub distortion_srcc: BTreeMap<DistortionCategory, Metric>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Metrics,
    /// Whole images, random patches and salient patches (kinds present only).
    pub by_kind: BTreeMap<ItemKind, Metrics>,
}

/// One evaluated item: ground truth against prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub kind: ItemKind,
    pub mos: f64,
    pub distortion: DistortionVector,
    pub predicted: Prediction,
}

fn metrics(rows: &[&Scored]) -> Metrics {
    let truth: Vec<f64> = rows.iter().map(|r| r.mos).collect();
    let pred: Vec<f64> = rows.iter().map(|r| r.predicted.quality).collect();
    let by_range = MosRange::ALL
        .into_iter()
        .map(|range| {
            let (t, p): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| MosRange::of(r.mos) == range)
                .map(|r| (r.mos, r.predicted.quality))
                .unzip();
            let m = if t.len() < 3 {
                let note = format!("{} item(s) in range; at least 3 needed", t.len());
                RangeMetrics {
                    n: t.len(),
                    srcc: Metric::omitted(note.clone()),
                    lcc: Metric::omitted(note),
                }
            } else {
                RangeMetrics {
                    n: t.len(),
                    srcc: Metric::from(stats::srcc(&p, &t)),
                    lcc: Metric::from(stats::lcc(&p, &t)),
                }
            };
            (range, m)
        })
        .collect();
    let distortion_srcc = DistortionCategory::ALL
        .into_iter()
        .map(|c| {
            let (t, p): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .map(|r| (r.distortion.get(c), r.predicted.distortions.get(c)))
                .unzip();
            (c, Metric::from(stats::srcc(&p, &t)))
        })
        .collect();
    Metrics {
        n: rows.len(),
        quality_srcc: Metric::from(stats::srcc(&pred, &truth)),
        quality_lcc: Metric::from(stats::lcc(&pred, &truth)),
        by_range,
        distortion_srcc,
    }
}

pub fn evaluate_predictions(rows: &[Scored]) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("nothing to evaluate".into()));
    }
    let all: Vec<&Scored> = rows.iter().collect();
    let by_kind = [ItemKind::WholeImage, ItemKind::RandomPatch, ItemKind::SalientPatch]
        .into_iter()
        .filter_map(|k| {
            let subset: Vec<&Scored> = rows.iter().filter(|r| r.kind == k).collect();
            (!subset.is_empty()).then(|| (k, metrics(&subset)))
        })
        .collect();
    Ok(EvalReport {
        overall: metrics(&all),
        by_kind,
    })
}

/// Scores the model on the samples whose ids are listed in `ids`.
pub fn evaluate(model: &MultiTaskModel, samples: &[TrainingSample], ids: &[String]) -> Result<EvalReport> {
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let rows: Vec<Scored> = samples
        .iter()
        .filter(|s| wanted.contains(s.item_id.as_str()))
        .map(|s| Scored {
            kind: s.kind,
            mos: s.mos,
            distortion: s.distortion.clone(),
            predicted: model.predict_raw(&s.features),
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData("evaluation split has no samples".into()));
    }
    evaluate_predictions(&rows)
}

impl EvalReport {
    /// Flat `scope,metric,value,note` rows.
    pub fn csv_rows(&self) -> Vec<[String; 4]> {
        let mut out = Vec::new();
        let mut push = |scope: &str, name: String, m: &Metric| {
            out.push([
                scope.to_string(),
                name,
                m.value.map(|v| v.to_string()).unwrap_or_default(),
                m.note.clone().unwrap_or_default(),
            ]);
        };
        let scopes = std::iter::once(("overall", &self.overall))
            .chain(self.by_kind.iter().map(|(k, m)| (k.as_str(), m)));
        for (scope, m) in scopes {
            push(scope, "quality_srcc".into(), &m.quality_srcc);
            push(scope, "quality_lcc".into(), &m.quality_lcc);
            for (r, rm) in &m.by_range {
                push(scope, format!("quality_srcc_{}", r.as_str()), &rm.srcc);
                push(scope, format!("quality_lcc_{}", r.as_str()), &rm.lcc);
            }
            for (c, dm) in &m.distortion_srcc {
                push(scope, format!("distortion_srcc_{}", c.name()), dm);
            }
        }
        out
    }
}
