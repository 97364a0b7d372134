//! Ratings, items and study metadata.

mod crop;
mod io;
mod saliency;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use crop::{crop_patches, CropMode, Patch};
pub use io::{
    attach_session_meta, load_golden, load_item_stats, load_items, load_ratings, load_session_meta,
    save_golden, save_item_stats, save_items, save_ratings, save_session_meta, RatingFormat,
};
pub use saliency::{best_window, spectral_residual_saliency};

pub const NUM_CATEGORIES: usize = 7;

/// The seven distortion labels offered to raters, in their fixed column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistortionCategory {
    Blurry,
    Shaky,
    Bright,
    Dark,
    Grainy,
    None,
    Other,
}

impl DistortionCategory {
    pub const ALL: [DistortionCategory; NUM_CATEGORIES] = [
        DistortionCategory::Blurry,
        DistortionCategory::Shaky,
        DistortionCategory::Bright,
        DistortionCategory::Dark,
        DistortionCategory::Grainy,
        DistortionCategory::None,
        DistortionCategory::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DistortionCategory::Blurry => "blurry",
            DistortionCategory::Shaky => "shaky",
            DistortionCategory::Bright => "bright",
            DistortionCategory::Dark => "dark",
            DistortionCategory::Grainy => "grainy",
            DistortionCategory::None => "none",
            DistortionCategory::Other => "other",
        }
    }
}

impl fmt::Display for DistortionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownColumn(s.to_string()))
    }
}

impl Serialize for DistortionCategory {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for DistortionCategory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// One rater's distortion checkboxes for one item.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LabelSet(pub [bool; NUM_CATEGORIES]);

impl LabelSet {
    pub fn only(c: DistortionCategory) -> Self {
        let mut flags = [false; NUM_CATEGORIES];
        flags[c.index()] = true;
        LabelSet(flags)
    }

    pub fn get(&self, c: DistortionCategory) -> bool {
        self.0[c.index()]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }
}

/// Per-category values in [0, 1], serialized as an object keyed by category name.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DistortionVector(pub [f64; NUM_CATEGORIES]);

impl DistortionVector {
    pub fn get(&self, c: DistortionCategory) -> f64 {
        self.0[c.index()]
    }
}

impl Serialize for DistortionVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(NUM_CATEGORIES))?;
        for c in DistortionCategory::ALL {
            map.serialize_entry(c.name(), &self.0[c.index()])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for DistortionVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = DistortionVector;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object keyed by distortion category")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut out = [f64::NAN; NUM_CATEGORIES];
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    let c: DistortionCategory = k.parse().map_err(de::Error::custom)?;
                    out[c.index()] = v;
                }
                if let Some(i) = out.iter().position(|v| v.is_nan()) {
                    return Err(de::Error::missing_field(DistortionCategory::ALL[i].name()));
                }
                Ok(DistortionVector(out))
            }
        }
        d.deserialize_map(V)
    }
}

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Invalid(format!(
                        concat!("unknown ", stringify!($name), " `{}`"), other
                    ))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

string_enum!(ItemKind {
    WholeImage => "whole-image",
    RandomPatch => "random-patch",
    SalientPatch => "salient-patch",
    VideoFrame => "video-frame",
});

impl ItemKind {
    pub fn is_patch(self) -> bool {
        matches!(self, ItemKind::RandomPatch | ItemKind::SalientPatch)
    }
}

string_enum!(DeviceClass {
    Laptop => "laptop",
    Desktop => "desktop",
    Phone => "phone",
    Tablet => "tablet",
    Other => "other",
});

string_enum!(ViewingDistance {
    Under15 => "under-15",
    From15To30 => "15-30",
    Over30 => "over-30",
    Unknown => "unknown",
});

string_enum!(AgeBucket {
    Under20 => "under-20",
    From20To30 => "20-30",
    From30To40 => "30-40",
    From40To50 => "40-50",
    Over50 => "over-50",
    Unknown => "unknown",
});

string_enum!(Gender {
    Female => "female",
    Male => "male",
    Other => "other",
    Undisclosed => "undisclosed",
});

string_enum!(
    /// Whether the subject wore prescribed corrective lenses during the task.
    Lenses {
        Yes => "yes",
        No => "no",
        NotApplicable => "not-applicable",
    }
);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: String,
    pub kind: ItemKind,
    pub parent_id: Option<String>,
    pub width_px: u32,
    pub height_px: u32,
    pub source_path: PathBuf,
}

impl ItemRecord {
    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Invalid(format!(
                "item {}: dimensions must be positive",
                self.item_id
            )));
        }
        if self.kind.is_patch() && self.parent_id.is_none() {
            return Err(Error::Invalid(format!(
                "patch item {} has no parent",
                self.item_id
            )));
        }
        Ok(())
    }

    pub fn aspect(&self) -> f64 {
        self.width_px as f64 / self.height_px as f64
    }

    /// Checks the patch-vs-parent aspect ratio rule (1% tolerance).
    pub fn validate_against_parent(&self, parent: &ItemRecord) -> Result<()> {
        let rel = (self.aspect() - parent.aspect()).abs() / parent.aspect();
        if rel > 0.01 {
            return Err(Error::Invalid(format!(
                "patch {} aspect {:.4} differs from parent {} aspect {:.4}",
                self.item_id,
                self.aspect(),
                parent.item_id,
                parent.aspect()
            )));
        }
        Ok(())
    }
}

/// Validates every item and every patch-parent link in a collection.
pub fn validate_items(items: &[ItemRecord]) -> Result<()> {
    let by_id: HashMap<&str, &ItemRecord> =
        items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    for item in items {
        item.validate()?;
        if let Some(pid) = &item.parent_id {
            let parent = by_id.get(pid.as_str()).ok_or_else(|| {
                Error::Invalid(format!("item {}: unknown parent {pid}", item.item_id))
            })?;
            if item.kind.is_patch() {
                item.validate_against_parent(parent)?;
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatingRecord {
    pub subject_id: String,
    pub item_id: String,
    pub quality: f64,
    pub distortions: LabelSet,
    pub position_in_session: u32,
    /// Set on the second presentation of a repeated item.
    pub is_repeat: bool,
    pub is_golden: bool,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.quality) {
            return Err(Error::QualityOutOfRange {
                row: self.position_in_session as usize,
                value: self.quality,
            });
        }
        if self.distortions.is_empty() {
            return Err(Error::Invalid(format!(
                "subject {} item {}: no distortion option selected",
                self.subject_id, self.item_id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub device: DeviceClass,
    pub resolution: (u32, u32),
    pub distance: ViewingDistance,
    pub age: AgeBucket,
    pub gender: Gender,
    pub lenses: Lenses,
}

impl Default for SessionMeta {
    fn default() -> Self {
        SessionMeta {
            device: DeviceClass::Other,
            resolution: (0, 0),
            distance: ViewingDistance::Unknown,
            age: AgeBucket::Unknown,
            gender: Gender::Undisclosed,
            lenses: Lenses::NotApplicable,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionRecord {
    pub subject_id: String,
    pub ratings: Vec<RatingRecord>,
    pub meta: SessionMeta,
}

impl SessionRecord {
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut last_pos = None;
        for r in &self.ratings {
            r.validate()?;
            if r.subject_id != self.subject_id {
                return Err(Error::Invalid(format!(
                    "session {} contains a rating from {}",
                    self.subject_id, r.subject_id
                )));
            }
            if last_pos.is_some_and(|p| r.position_in_session < p) {
                return Err(Error::Invalid(format!(
                    "session {}: ratings not ordered by position",
                    self.subject_id
                )));
            }
            last_pos = Some(r.position_in_session);
            let e = seen.entry(r.item_id.as_str()).or_default();
            e.0 += 1;
            if r.is_repeat {
                e.1 += 1;
            }
        }
        for r in &self.ratings {
            let (count, repeats) = seen[r.item_id.as_str()];
            let ok = if r.is_golden {
                count == 1
            } else {
                (count == 1 && repeats == 0) || (count == 2 && repeats == 1)
            };
            if !ok {
                return Err(Error::Invalid(format!(
                    "session {}: item {} shown {count} times ({repeats} flagged as repeat)",
                    self.subject_id, r.item_id
                )));
            }
        }
        Ok(())
    }

    /// (first, second) quality scores for every repeated item, in order of the repeat.
    pub fn repeat_pairs(&self) -> Vec<(f64, f64)> {
        self.ratings
            .iter()
            .filter(|r| r.is_repeat)
            .filter_map(|rep| {
                self.ratings
                    .iter()
                    .find(|r| r.item_id == rep.item_id && !r.is_repeat)
                    .map(|first| (first.quality, rep.quality))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub item_id: String,
    pub mos: f64,
    pub stddev: f64,
    pub count: usize,
    pub distortion_prob: DistortionVector,
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Rect::new(0, 0, width, height)
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x as u64 + self.w as u64 <= width as u64 && self.y as u64 + self.h as u64 <= height as u64
    }
}

impl FromStr for Rect {
    type Err = Error;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Invalid(format!("region `{s}`: {e}")))?;
        match parts.as_slice() {
            &[x, y, w, h] => Ok(Rect::new(x, y, w, h)),
            _ => Err(Error::Invalid(format!("region `{s}`: expected x,y,w,h"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(item: &str, pos: u32, repeat: bool, golden: bool) -> RatingRecord {
        RatingRecord {
            subject_id: "s".into(),
            item_id: item.into(),
            quality: 50.0,
            distortions: LabelSet::only(DistortionCategory::None),
            position_in_session: pos,
            is_repeat: repeat,
            is_golden: golden,
        }
    }

    #[test]
    fn category_order_is_fixed() {
        let names: Vec<_> = DistortionCategory::ALL.iter().map(|c| c.name()).collect();
        assert_eq!(
            names,
            ["blurry", "shaky", "bright", "dark", "grainy", "none", "other"]
        );
        for (i, c) in DistortionCategory::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
        }
    }

    #[test]
    fn session_validation() {
        let ok = SessionRecord {
            subject_id: "s".into(),
            ratings: vec![
                rating("a", 0, false, false),
                rating("g", 1, false, true),
                rating("a", 2, true, false),
            ],
            meta: SessionMeta::default(),
        };
        ok.validate().unwrap();
        assert_eq!(ok.repeat_pairs(), vec![(50.0, 50.0)]);

        let mut dup = ok.clone();
        dup.ratings.push(rating("a", 3, false, false));
        assert!(dup.validate().is_err());

        let mut unordered = ok.clone();
        unordered.ratings.swap(0, 1);
        assert!(unordered.validate().is_err());

        let mut golden_twice = ok;
        golden_twice.ratings.push(rating("g", 4, true, true));
        assert!(golden_twice.validate().is_err());
    }

    #[test]
    fn patch_aspect_rule() {
        let parent = ItemRecord {
            item_id: "p".into(),
            kind: ItemKind::WholeImage,
            parent_id: None,
            width_px: 1000,
            height_px: 500,
            source_path: "p.png".into(),
        };
        let mut patch = ItemRecord {
            item_id: "c".into(),
            kind: ItemKind::RandomPatch,
            parent_id: Some("p".into()),
            width_px: 400,
            height_px: 200,
            source_path: "c.png".into(),
        };
        validate_items(&[parent.clone(), patch.clone()]).unwrap();
        patch.height_px = 250;
        assert!(validate_items(&[parent, patch]).is_err());
    }

    #[test]
    fn rect_parse() {
        assert_eq!("1,2,30,40".parse::<Rect>().unwrap(), Rect::new(1, 2, 30, 40));
        assert!("1,2,3".parse::<Rect>().is_err());
    }

    #[test]
    fn distortion_vector_json_is_keyed() {
        let v = DistortionVector([0.5, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0]);
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.starts_with(r#"{"blurry":0.5,"shaky":0.0"#));
        let back: DistortionVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
