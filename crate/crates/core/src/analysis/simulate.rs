//! Synthetic rating study generator used as a test oracle.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{
    DistortionCategory, DistortionVector, LabelSet, RatingRecord, SessionMeta, SessionRecord,
    NUM_CATEGORIES,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RaterKind {
    Faithful,
    Constant,
    Haphazard,
    Antagonist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRaterConfig {
    pub subject_id: String,
    pub kind: RaterKind,
    /// Spread of the rater's opinion around the true MOS. An opinion is drawn
    /// once per item and reused when the item is shown again.
    pub noise_sd: f64,
    /// Jitter added independently to every presentation.
    pub retest_sd: f64,
    pub bias: f64,
    /// Probability of toggling each distortion checkbox after sampling.
    pub label_flip_prob: f64,
    pub meta: SessionMeta,
}

impl SimulatedRaterConfig {
    pub fn new(subject_id: impl Into<String>, kind: RaterKind, noise_sd: f64) -> Self {
        SimulatedRaterConfig {
            subject_id: subject_id.into(),
            kind,
            noise_sd,
            retest_sd: noise_sd / 2.0,
            bias: 0.0,
            label_flip_prob: 0.0,
            meta: SessionMeta {
                lenses: crate::data::Lenses::Yes,
                ..SessionMeta::default()
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise_sd >= 0.0 && self.retest_sd >= 0.0) {
            return Err(Error::Invalid(format!(
                "rater {}: noise must be non-negative",
                self.subject_id
            )));
        }
        if !(0.0..=1.0).contains(&self.label_flip_prob) {
            return Err(Error::Invalid(format!(
                "rater {}: flip probability outside [0, 1]",
                self.subject_id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedItem {
    pub item_id: String,
    pub true_mos: f64,
    pub true_distortion: DistortionVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    /// Distinct regular items per session (the pool is sampled without replacement).
    pub items_per_session: usize,
    /// Regular items shown a second time.
    pub repeats: usize,
    /// Golden items shown once to every subject; `true_mos` is the reference.
    pub golden: Vec<SimulatedItem>,
}

impl Default for StudyDesign {
    /// 100 regular + 5 repeats + 5 golden = 110 presentations.
    fn default() -> Self {
        StudyDesign {
            items_per_session: 100,
            repeats: 5,
            golden: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedStudy {
    pub sessions: Vec<SessionRecord>,
    pub golden_reference: HashMap<String, f64>,
}

/// Items with uniform true MOS in [5, 95] and skewed random distortion
/// probabilities.
pub fn random_items(n: usize, prefix: &str, rng: &mut impl Rng) -> Vec<SimulatedItem> {
    (0..n)
        .map(|i| {
            let mut p = [0.0; NUM_CATEGORIES];
            for v in &mut p {
                let u: f64 = rng.random();
                *v = u * u;
            }
            SimulatedItem {
                item_id: format!("{prefix}{i:04}"),
                true_mos: rng.random_range(5.0..95.0),
                true_distortion: DistortionVector(p),
            }
        })
        .collect()
}

/// Golden items with references spread evenly over [15, 85].
pub fn golden_items(n: usize) -> Vec<SimulatedItem> {
    (0..n)
        .map(|i| SimulatedItem {
            item_id: format!("golden{i}"),
            true_mos: 15.0 + 70.0 * i as f64 / (n.max(2) - 1) as f64,
            true_distortion: DistortionVector([0.2; NUM_CATEGORIES]),
        })
        .collect()
}

pub fn simulate_study(
    raters: &[SimulatedRaterConfig],
    items: &[SimulatedItem],
    design: &StudyDesign,
    seed: u64,
) -> Result<SimulatedStudy> {
    for r in raters {
        r.validate()?;
    }
    if design.items_per_session > items.len() {
        return Err(Error::Invalid(format!(
            "{} items per session but only {} items",
            design.items_per_session,
            items.len()
        )));
    }
    if design.repeats > design.items_per_session {
        return Err(Error::Invalid("more repeats than items per session".into()));
    }
    let sessions = raters
        .iter()
        .enumerate()
        .map(|(idx, rater)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);
            simulate_session(rater, items, design, &mut rng)
        })
        .collect();
    let golden_reference = design
        .golden
        .iter()
        .map(|g| (g.item_id.clone(), g.true_mos))
        .collect();
    Ok(SimulatedStudy {
        sessions,
        golden_reference,
    })
}

fn simulate_session(
    rater: &SimulatedRaterConfig,
    pool: &[SimulatedItem],
    design: &StudyDesign,
    rng: &mut ChaCha8Rng,
) -> SessionRecord {
    let mut chosen: Vec<&SimulatedItem> = pool
        .choose_multiple(rng, design.items_per_session)
        .collect();
    chosen.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let mut order: Vec<(&SimulatedItem, bool)> = chosen
        .iter()
        .map(|&i| (i, false))
        .chain(design.golden.iter().map(|g| (g, true)))
        .collect();
    order.shuffle(rng);

    let repeated: Vec<&SimulatedItem> = chosen.choose_multiple(rng, design.repeats).copied().collect();
    for item in repeated {
        let first = order
            .iter()
            .position(|(i, _)| i.item_id == item.item_id)
            .expect("repeated item was scheduled");
        let at = rng.random_range(first + 1..=order.len());
        order.insert(at, (item, false));
    }

    let normal = |sd: f64| Normal::new(0.0, sd.max(0.0)).expect("finite sd");
    let constant_level = (50.0 + rater.bias).clamp(0.0, 100.0);
    let mut opinions: HashMap<&str, f64> = HashMap::new();
    let mut seen: HashMap<&str, bool> = HashMap::new();
    let mut ratings = Vec::with_capacity(order.len());
    for (pos, (item, golden)) in order.into_iter().enumerate() {
        let is_repeat = seen.insert(item.item_id.as_str(), true).is_some();
        let quality = match rater.kind {
            RaterKind::Faithful | RaterKind::Antagonist => {
                let target = match rater.kind {
                    RaterKind::Antagonist => 100.0 - item.true_mos,
                    _ => item.true_mos,
                };
                let opinion = *opinions
                    .entry(item.item_id.as_str())
                    .or_insert_with(|| target + rater.bias + normal(rater.noise_sd).sample(rng));
                opinion + normal(rater.retest_sd).sample(rng)
            }
            RaterKind::Constant => constant_level + rng.random_range(-0.5..=0.5),
            RaterKind::Haphazard => rng.random_range(0.0..=100.0),
        }
        .clamp(0.0, 100.0);

        let mut flags = [false; NUM_CATEGORIES];
        match rater.kind {
            RaterKind::Faithful => {
                for (f, &p) in flags.iter_mut().zip(&item.true_distortion.0) {
                    *f = rng.random::<f64>() < p;
                }
            }
            RaterKind::Antagonist => {
                for (f, &p) in flags.iter_mut().zip(&item.true_distortion.0) {
                    *f = rng.random::<f64>() < 1.0 - p;
                }
            }
            RaterKind::Haphazard => {
                for f in flags.iter_mut() {
                    *f = rng.random::<bool>();
                }
            }
            RaterKind::Constant => flags[DistortionCategory::None.index()] = true,
        }
        if rater.kind != RaterKind::Constant {
            for f in flags.iter_mut() {
                if rng.random::<f64>() < rater.label_flip_prob {
                    *f = !*f;
                }
            }
        }
        if !flags.iter().any(|&f| f) {
            flags[DistortionCategory::None.index()] = true;
        }
        ratings.push(RatingRecord {
            subject_id: rater.subject_id.clone(),
            item_id: item.item_id.clone(),
            quality,
            distortions: LabelSet(flags),
            position_in_session: pos as u32,
            is_repeat,
            is_golden: golden,
        });
    }
    SessionRecord {
        subject_id: rater.subject_id.clone(),
        ratings,
        meta: rater.meta.clone(),
    }
}
