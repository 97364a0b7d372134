use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    DistortionCategory, DistortionVector, ItemRecord, ItemStats, LabelSet, RatingRecord,
    SessionMeta, SessionRecord, NUM_CATEGORIES,
};
use crate::error::{Error, Result};

pub const RATINGS_HEADER: [&str; 13] = [
    "subject_id", "item_id", "quality", "blurry", "shaky", "bright", "dark", "grainy", "none",
    "other", "position", "is_repeat", "is_golden",
];
pub const SESSIONS_HEADER: [&str; 8] = [
    "subject_id", "device", "resolution_w", "resolution_h", "distance", "age", "gender", "lenses",
];
pub const ITEMS_HEADER: [&str; 6] = ["item_id", "kind", "parent_id", "width", "height", "path"];
pub const ITEM_STATS_HEADER: [&str; 11] = [
    "item_id", "mos", "stddev", "count", "p_blurry", "p_shaky", "p_bright", "p_dark", "p_grainy",
    "p_none", "p_other",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatingFormat {
    Csv,
    JsonLines,
}

impl RatingFormat {
    pub fn from_path(path: &Path) -> RatingFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => RatingFormat::JsonLines,
            _ => RatingFormat::Csv,
        }
    }
}

/// Flat row shared by the CSV and JSON-lines rating files.
#[derive(Debug, Serialize, Deserialize)]
struct RatingRow {
    subject_id: String,
    item_id: String,
    quality: f64,
    blurry: bool,
    shaky: bool,
    bright: bool,
    dark: bool,
    grainy: bool,
    none: bool,
    other: bool,
    position: u32,
    is_repeat: bool,
    is_golden: bool,
}

impl From<&RatingRecord> for RatingRow {
    fn from(r: &RatingRecord) -> Self {
        let d = r.distortions.0;
        RatingRow {
            subject_id: r.subject_id.clone(),
            item_id: r.item_id.clone(),
            quality: r.quality,
            blurry: d[0],
            shaky: d[1],
            bright: d[2],
            dark: d[3],
            grainy: d[4],
            none: d[5],
            other: d[6],
            position: r.position_in_session,
            is_repeat: r.is_repeat,
            is_golden: r.is_golden,
        }
    }
}

impl From<RatingRow> for RatingRecord {
    fn from(r: RatingRow) -> Self {
        RatingRecord {
            subject_id: r.subject_id,
            item_id: r.item_id,
            quality: r.quality,
            distortions: LabelSet([
                r.blurry, r.shaky, r.bright, r.dark, r.grainy, r.none, r.other,
            ]),
            position_in_session: r.position,
            is_repeat: r.is_repeat,
            is_golden: r.is_golden,
        }
    }
}

struct RowReader<'a> {
    path: &'a Path,
    row: usize,
    record: &'a csv::StringRecord,
}

impl RowReader<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::MalformedRow {
            path: self.path.to_path_buf(),
            row: self.row,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn str(&self, idx: usize, field: &str) -> Result<&str> {
        self.record
            .get(idx)
            .map(str::trim)
            .ok_or_else(|| self.err(field, "missing value"))
    }

    fn parse<T: std::str::FromStr>(&self, idx: usize, field: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.str(idx, field)?;
        s.parse::<T>().map_err(|e| self.err(field, format!("`{s}`: {e}")))
    }

    fn flag(&self, idx: usize, field: &str) -> Result<bool> {
        match self.str(idx, field)? {
            "1" | "true" | "TRUE" | "True" => Ok(true),
            "0" | "false" | "FALSE" | "False" => Ok(false),
            other => Err(self.err(field, format!("`{other}` is not a boolean"))),
        }
    }
}

fn check_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    for name in header.iter() {
        if !expected.contains(&name.trim()) {
            return Err(Error::UnknownColumn(name.trim().to_string()));
        }
    }
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Invalid(format!(
            "{}: header must be `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    Ok(())
}

fn read_csv<T>(
    path: &Path,
    header: &[&str],
    mut parse: impl FnMut(&RowReader<'_>) -> Result<T>,
) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    check_header(path, reader.headers()?, header)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = RowReader {
            path,
            // data rows are numbered from 1, header excluded
            row: i + 1,
            record: &record,
        };
        if record.len() != header.len() {
            return Err(row.err(
                "*",
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        out.push(parse(&row)?);
    }
    Ok(out)
}

fn parse_rating_row(row: &RowReader<'_>) -> Result<RatingRecord> {
    let quality: f64 = row.parse(2, "quality")?;
    if !(0.0..=100.0).contains(&quality) {
        return Err(Error::QualityOutOfRange {
            row: row.row,
            value: quality,
        });
    }
    let mut flags = [false; NUM_CATEGORIES];
    for c in DistortionCategory::ALL {
        flags[c.index()] = row.flag(3 + c.index(), c.name())?;
    }
    let rec = RatingRecord {
        subject_id: row.str(0, "subject_id")?.to_string(),
        item_id: row.str(1, "item_id")?.to_string(),
        quality,
        distortions: LabelSet(flags),
        position_in_session: row.parse(10, "position")?,
        is_repeat: row.flag(11, "is_repeat")?,
        is_golden: row.flag(12, "is_golden")?,
    };
    if rec.distortions.is_empty() {
        return Err(row.err("blurry..other", "no distortion option selected"));
    }
    Ok(rec)
}

fn group_sessions(records: Vec<RatingRecord>) -> Result<Vec<SessionRecord>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_subject: HashMap<String, Vec<RatingRecord>> = HashMap::new();
    for r in records {
        if !by_subject.contains_key(&r.subject_id) {
            order.push(r.subject_id.clone());
        }
        by_subject.entry(r.subject_id.clone()).or_default().push(r);
    }
    order
        .into_iter()
        .map(|subject_id| {
            let mut ratings = by_subject.remove(&subject_id).unwrap_or_default();
            ratings.sort_by_key(|r| r.position_in_session);
            let session = SessionRecord {
                subject_id,
                ratings,
                meta: SessionMeta::default(),
            };
            session.validate()?;
            Ok(session)
        })
        .collect()
}

/// Loads a ratings file and groups it into per-subject sessions (in order of
/// first appearance). Session metadata is left at its default; see
/// [`attach_session_meta`].
pub fn load_ratings(path: &Path, format: RatingFormat) -> Result<Vec<SessionRecord>> {
    let records = match format {
        RatingFormat::Csv => read_csv(path, &RATINGS_HEADER, parse_rating_row)?,
        RatingFormat::JsonLines => {
            let reader = BufReader::new(File::open(path)?);
            let mut out = Vec::new();
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: RatingRow =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
                        path: path.to_path_buf(),
                        row: i + 1,
                        field: "*".into(),
                        message: e.to_string(),
                    })?;
                if !(0.0..=100.0).contains(&row.quality) {
                    return Err(Error::QualityOutOfRange {
                        row: i + 1,
                        value: row.quality,
                    });
                }
                let rec = RatingRecord::from(row);
                rec.validate()?;
                out.push(rec);
            }
            out
        }
    };
    group_sessions(records)
}

pub fn save_ratings(path: &Path, sessions: &[SessionRecord], format: RatingFormat) -> Result<()> {
    let ratings = sessions.iter().flat_map(|s| s.ratings.iter());
    match format {
        RatingFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(RATINGS_HEADER)?;
            for r in ratings {
                let b = |v: bool| if v { "1" } else { "0" };
                let mut rec = vec![r.subject_id.clone(), r.item_id.clone(), r.quality.to_string()];
                rec.extend(r.distortions.0.iter().map(|&v| b(v).to_string()));
                rec.push(r.position_in_session.to_string());
                rec.push(b(r.is_repeat).to_string());
                rec.push(b(r.is_golden).to_string());
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        RatingFormat::JsonLines => {
            let mut w = BufWriter::new(File::create(path)?);
            for r in ratings {
                serde_json::to_writer(&mut w, &RatingRow::from(r))?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn load_session_meta(path: &Path) -> Result<Vec<(String, SessionMeta)>> {
    read_csv(path, &SESSIONS_HEADER, |row| {
        let meta = SessionMeta {
            device: row.parse(1, "device")?,
            resolution: (row.parse(2, "resolution_w")?, row.parse(3, "resolution_h")?),
            distance: row.parse(4, "distance")?,
            age: row.parse(5, "age")?,
            gender: row.parse(6, "gender")?,
            lenses: row.parse(7, "lenses")?,
        };
        Ok((row.str(0, "subject_id")?.to_string(), meta))
    })
}

pub fn save_session_meta(path: &Path, sessions: &[SessionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SESSIONS_HEADER)?;
    for s in sessions {
        let m = &s.meta;
        w.write_record([
            s.subject_id.clone(),
            m.device.to_string(),
            m.resolution.0.to_string(),
            m.resolution.1.to_string(),
            m.distance.to_string(),
            m.age.to_string(),
            m.gender.to_string(),
            m.lenses.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Joins metadata rows onto sessions by subject id. Subjects without a row keep
/// the default metadata; metadata rows without ratings are ignored.
pub fn attach_session_meta(sessions: &mut [SessionRecord], meta: Vec<(String, SessionMeta)>) {
    let lookup: HashMap<String, SessionMeta> = meta.into_iter().collect();
    for s in sessions {
        if let Some(m) = lookup.get(&s.subject_id) {
            s.meta = m.clone();
        }
    }
}

pub fn load_items(path: &Path) -> Result<Vec<ItemRecord>> {
    let items = read_csv(path, &ITEMS_HEADER, |row| {
        let parent = row.str(2, "parent_id")?;
        let item = ItemRecord {
            item_id: row.str(0, "item_id")?.to_string(),
            kind: row.parse(1, "kind")?,
            parent_id: (!parent.is_empty()).then(|| parent.to_string()),
            width_px: row.parse(3, "width")?,
            height_px: row.parse(4, "height")?,
            source_path: row.str(5, "path")?.into(),
        };
        item.validate().map_err(|e| row.err("*", e.to_string()))?;
        Ok(item)
    })?;
    super::validate_items(&items)?;
    Ok(items)
}

pub fn save_items(path: &Path, items: &[ItemRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ITEMS_HEADER)?;
    for i in items {
        w.write_record([
            i.item_id.clone(),
            i.kind.to_string(),
            i.parent_id.clone().unwrap_or_default(),
            i.width_px.to_string(),
            i.height_px.to_string(),
            i.source_path.display().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_item_stats(path: &Path, stats: &[ItemStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ITEM_STATS_HEADER)?;
    for s in stats {
        let mut rec = vec![
            s.item_id.clone(),
            s.mos.to_string(),
            s.stddev.to_string(),
            s.count.to_string(),
        ];
        rec.extend(s.distortion_prob.0.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_item_stats(path: &Path) -> Result<Vec<ItemStats>> {
    read_csv(path, &ITEM_STATS_HEADER, |row| {
        let mut probs = [0.0; NUM_CATEGORIES];
        for (i, p) in probs.iter_mut().enumerate() {
            *p = row.parse(4 + i, ITEM_STATS_HEADER[4 + i])?;
        }
        Ok(ItemStats {
            item_id: row.str(0, "item_id")?.to_string(),
            mos: row.parse(1, "mos")?,
            stddev: row.parse(2, "stddev")?,
            count: row.parse(3, "count")?,
            distortion_prob: DistortionVector(probs),
        })
    })
}

/// Golden reference scores: `item_id,reference`.
pub fn load_golden(path: &Path) -> Result<HashMap<String, f64>> {
    let rows = read_csv(path, &["item_id", "reference"], |row| {
        Ok((row.str(0, "item_id")?.to_string(), row.parse(1, "reference")?))
    })?;
    Ok(rows.into_iter().collect())
}

pub fn save_golden(path: &Path, golden: &HashMap<String, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["item_id", "reference"])?;
    let mut keys: Vec<&String> = golden.keys().collect();
    keys.sort();
    for k in keys {
        w.write_record([k.clone(), golden[k].to_string()])?;
    }
    w.flush()?;
    Ok(())
}
