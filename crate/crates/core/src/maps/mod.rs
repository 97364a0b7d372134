//! Tiled quality and distortion maps and their colour overlays.

mod lut;

use std::path::Path;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DistortionCategory, Rect};
use crate::error::{Error, Result};
use crate::predictor::features::MIN_REGION;
use crate::predictor::{MultiTaskModel, Prediction};

pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "category", rename_all = "lowercase")]
pub enum MapKind {
    Quality,
    Distortion(DistortionCategory),
}

impl MapKind {
    pub fn label(&self) -> String {
        match self {
            MapKind::Quality => "quality".into(),
            MapKind::Distortion(c) => c.name().into(),
        }
    }

    fn upper(&self) -> f64 {
        match self {
            MapKind::Quality => 100.0,
            MapKind::Distortion(_) => 1.0,
        }
    }
}

/// A rows × cols grid of per-tile predictions over a `width` × `height` image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialMap {
    #[serde(flatten)]
    pub kind: MapKind,
    #[serde(rename = "N")]
    pub tile_size: u32,
    pub width: u32,
    pub height: u32,
    /// Row-major.
    pub grid: Vec<Vec<f64>>,
}

impl SpatialMap {
    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let (rows, cols) = grid_dims(self.width, self.height, self.tile_size);
        if self.rows() != rows || self.grid.iter().any(|r| r.len() != cols) {
            return Err(Error::Invalid(format!(
                "grid is not {rows}x{cols} for a {}x{} image with N={}",
                self.width, self.height, self.tile_size
            )));
        }
        Ok(())
    }
}

/// `(rows, cols)` of the tiling.
pub fn grid_dims(width: u32, height: u32, n: u32) -> (usize, usize) {
    (height.div_ceil(n.max(1)) as usize, width.div_ceil(n.max(1)) as usize)
}

/// Non-overlapping N×N tiles in row-major order; the last row and column
/// are truncated to the image bounds.
pub fn tile(width: u32, height: u32, n: u32) -> Result<Vec<Rect>> {
    if n < MIN_REGION {
        return Err(Error::Invalid(format!("tile size {n} is below {MIN_REGION}")));
    }
    if n > width || n > height {
        return Err(Error::Invalid(format!(
            "tile size {n} does not fit a {width}x{height} image"
        )));
    }
    let mut out = Vec::new();
    for y in (0..height).step_by(n as usize) {
        for x in (0..width).step_by(n as usize) {
            out.push(Rect::new(x, y, n.min(width - x), n.min(height - y)));
        }
    }
    Ok(out)
}

/// Predicts every tile. Tiles under the minimum region size copy the
/// prediction of their inward neighbour.
fn predict_tiles(model: &MultiTaskModel, pixels: &RgbImage, n: u32) -> Result<Vec<Vec<Prediction>>> {
    let (width, height) = pixels.dimensions();
    let tiles = tile(width, height, n)?;
    let (rows, cols) = grid_dims(width, height, n);
    let small = |r: &Rect| r.w < MIN_REGION || r.h < MIN_REGION;
    let predicted: Vec<Option<Prediction>> = tiles
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            if small(r) {
                return Ok(None);
            }
            model.predict(pixels, Some(*r)).map(Some).map_err(|e| Error::Tile {
                row: i / cols,
                col: i % cols,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut grid = Vec::with_capacity(rows);
    for row in 0..rows {
        let mut line = Vec::with_capacity(cols);
        for col in 0..cols {
            let r = &tiles[row * cols + col];
            let src_row = if r.h < MIN_REGION { row - 1 } else { row };
            let src_col = if r.w < MIN_REGION { col - 1 } else { col };
            let p = predicted[src_row * cols + src_col]
                .clone()
                .expect("tiles with full height and width are predicted");
            line.push(p);
        }
        grid.push(line);
    }
    Ok(grid)
}

pub fn quality_map(model: &MultiTaskModel, pixels: &RgbImage, n: u32) -> Result<SpatialMap> {
    let preds = predict_tiles(model, pixels, n)?;
    Ok(SpatialMap {
        kind: MapKind::Quality,
        tile_size: n,
        width: pixels.width(),
        height: pixels.height(),
        grid: preds.iter().map(|r| r.iter().map(|p| p.quality).collect()).collect(),
    })
}

/// One map per distortion category, in category order.
pub fn distortion_maps(model: &MultiTaskModel, pixels: &RgbImage, n: u32) -> Result<Vec<SpatialMap>> {
    let preds = predict_tiles(model, pixels, n)?;
    Ok(DistortionCategory::ALL
        .into_iter()
        .map(|c| SpatialMap {
            kind: MapKind::Distortion(c),
            tile_size: n,
            width: pixels.width(),
            height: pixels.height(),
            grid: preds
                .iter()
                .map(|r| r.iter().map(|p| p.distortions.get(c)).collect())
                .collect(),
        })
        .collect())
}

/// Interpolation weights along one axis for pixel centre `p`, given the
/// tile centres `centers`.
fn axis_weights(centers: &[f64], p: f64) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.partition_point(|c| *c <= p) - 1;
    let t = (p - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, t)
}

fn centers(extent: u32, n: u32, count: usize) -> Vec<f64> {
    (0..count as u32)
        .map(|i| {
            let start = i * n;
            start as f64 + n.min(extent - start) as f64 / 2.0
        })
        .collect()
}

/// Bilinear upsampling of the grid to one value per pixel (row-major),
/// anchored at tile centres and clamped at the borders.
pub fn upsample(map: &SpatialMap) -> Result<Vec<f64>> {
    map.validate()?;
    let cx = centers(map.width, map.tile_size, map.cols());
    let cy = centers(map.height, map.tile_size, map.rows());
    let xw: Vec<_> = (0..map.width).map(|x| axis_weights(&cx, x as f64 + 0.5)).collect();
    let mut out = Vec::with_capacity(map.width as usize * map.height as usize);
    for y in 0..map.height {
        let (r0, r1, ty) = axis_weights(&cy, y as f64 + 0.5);
        for &(c0, c1, tx) in &xw {
            let g = &map.grid;
            let top = g[r0][c0] * (1.0 - tx) + g[r0][c1] * tx;
            let bottom = g[r1][c0] * (1.0 - tx) + g[r1][c1] * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Ok(out)
}

/// Colormap entry for a map value: magma for quality, cividis for distortion.
pub fn colormap(kind: MapKind, value: f64) -> [u8; 3] {
    let t = (value / kind.upper()).clamp(0.0, 1.0);
    let idx = (t * 255.0).round() as usize;
    match kind {
        MapKind::Quality => lut::MAGMA[idx],
        MapKind::Distortion(_) => lut::CIVIDIS[idx],
    }
}

/// Blends `alpha · colormap + (1 − alpha) · image`.
pub fn render(map: &SpatialMap, pixels: &RgbImage, alpha: f64) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if pixels.dimensions() != (map.width, map.height) {
        return Err(Error::Invalid(format!(
            "map covers {}x{} but the image is {}x{}",
            map.width,
            map.height,
            pixels.width(),
            pixels.height()
        )));
    }
    let field = upsample(map)?;
    Ok(RgbImage::from_fn(map.width, map.height, |x, y| {
        let v = field[(y * map.width + x) as usize];
        let cm = colormap(map.kind, v);
        let px = pixels.get_pixel(x, y).0;
        Rgb(std::array::from_fn(|c| {
            (alpha * cm[c] as f64 + (1.0 - alpha) * px[c] as f64)
                .round()
                .clamp(0.0, 255.0) as u8
        }))
    }))
}
