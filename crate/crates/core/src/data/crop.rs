use std::path::PathBuf;

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::saliency::{best_window, spectral_residual_saliency};
use super::{ItemKind, ItemRecord, Rect};
use crate::error::{Error, Result};
use crate::raster::LumaImage;

const MIN_SIDE: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CropMode {
    Random,
    Salient,
}

impl std::str::FromStr for CropMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(CropMode::Random),
            "salient" => Ok(CropMode::Salient),
            _ => Err(Error::Invalid(format!("unknown crop mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub record: ItemRecord,
    pub rect: Rect,
    pub pixels: RgbImage,
}

/// Crops a patch of `fraction` times each side of the parent image.
///
/// Patch sides are rounded half away from zero. Random crops draw the offset
/// uniformly over valid positions from `seed`; salient crops take the window
/// with the largest mean spectral-residual saliency.
pub fn crop_patches(
    parent: &ItemRecord,
    pixels: &RgbImage,
    mode: CropMode,
    fraction: f64,
    seed: u64,
) -> Result<Patch> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Invalid(format!("fraction {fraction} not in (0, 1]")));
    }
    let (w, h) = pixels.dimensions();
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::Image(format!(
            "image {w}x{h} is smaller than {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    let pw = ((fraction * w as f64).round() as u32).clamp(1, w);
    let ph = ((fraction * h as f64).round() as u32).clamp(1, h);

    let (x, y) = match mode {
        CropMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (rng.random_range(0..=w - pw), rng.random_range(0..=h - ph))
        }
        CropMode::Salient => {
            let sal = spectral_residual_saliency(&LumaImage::from_rgb(pixels));
            best_window(&sal, pw, ph)
        }
    };
    let rect = Rect::new(x, y, pw, ph);
    let patch_pixels = image::imageops::crop_imm(pixels, x, y, pw, ph).to_image();

    let (kind, suffix) = match mode {
        CropMode::Random => (ItemKind::RandomPatch, "random"),
        CropMode::Salient => (ItemKind::SalientPatch, "salient"),
    };
    let source_path = patch_path(&parent.source_path, suffix);
    Ok(Patch {
        record: ItemRecord {
            item_id: format!("{}_{suffix}", parent.item_id),
            kind,
            parent_id: Some(parent.item_id.clone()),
            width_px: pw,
            height_px: ph,
            source_path,
        },
        rect,
        pixels: patch_pixels,
    })
}

fn patch_path(parent: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = parent
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "item".into());
    parent.with_file_name(format!("{stem}_{suffix}.png"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parent(w: u32, h: u32) -> (ItemRecord, RgbImage) {
        let rec = ItemRecord {
            item_id: "img".into(),
            kind: ItemKind::WholeImage,
            parent_id: None,
            width_px: w,
            height_px: h,
            source_path: "data/img.jpg".into(),
        };
        let px = RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([(x % 251) as u8, (y % 251) as u8, ((x * y) % 256) as u8])
        });
        (rec, px)
    }

    #[test]
    fn forty_percent_of_each_side() {
        let (rec, px) = parent(1000, 500);
        let p = crop_patches(&rec, &px, CropMode::Random, 0.4, 3).unwrap();
        assert_eq!((p.rect.w, p.rect.h), (400, 200));
        assert_eq!(p.pixels.dimensions(), (400, 200));
        assert_eq!(p.record.kind, ItemKind::RandomPatch);
        assert_eq!(p.record.parent_id.as_deref(), Some("img"));
        p.record.validate_against_parent(&rec).unwrap();
        assert_eq!(p.record.source_path, PathBuf::from("data/img_random.png"));
    }

    #[test]
    fn full_fraction_is_identity() {
        let (rec, px) = parent(64, 48);
        for mode in [CropMode::Random, CropMode::Salient] {
            let p = crop_patches(&rec, &px, mode, 1.0, 9).unwrap();
            assert_eq!(p.rect, Rect::new(0, 0, 64, 48));
            assert_eq!(p.pixels, px);
        }
    }

    #[test]
    fn seeded_random_crop_is_deterministic() {
        let (rec, px) = parent(300, 200);
        let a = crop_patches(&rec, &px, CropMode::Random, 0.4, 42).unwrap();
        let b = crop_patches(&rec, &px, CropMode::Random, 0.4, 42).unwrap();
        assert_eq!(a.rect, b.rect);
        let offsets: std::collections::HashSet<_> = (0..20)
            .map(|s| crop_patches(&rec, &px, CropMode::Random, 0.4, s).unwrap().rect)
            .collect();
        assert!(offsets.len() > 1);
    }

    #[test]
    fn salient_crop_centres_on_object() {
        let (rec, _) = parent(200, 100);
        let px = RgbImage::from_fn(200, 100, |x, y| {
            let (dx, dy) = (x as f64 - 40.0, y as f64 - 70.0);
            if dx * dx + dy * dy < 64.0 {
                image::Rgb([255, 255, 255])
            } else {
                image::Rgb([90, 90, 90])
            }
        });
        let p = crop_patches(&rec, &px, CropMode::Salient, 0.4, 0).unwrap();
        assert!(p.rect.x <= 40 && 40 < p.rect.x + p.rect.w, "{:?}", p.rect);
        assert!(p.rect.y <= 70 && 70 < p.rect.y + p.rect.h, "{:?}", p.rect);
        assert_eq!(p.record.kind, ItemKind::SalientPatch);
    }

    #[test]
    fn errors() {
        let (rec, px) = parent(7, 30);
        assert!(matches!(
            crop_patches(&rec, &px, CropMode::Random, 0.4, 0),
            Err(Error::Image(_))
        ));
        let (rec, px) = parent(30, 30);
        assert!(crop_patches(&rec, &px, CropMode::Random, 0.0, 0).is_err());
        assert!(crop_patches(&rec, &px, CropMode::Random, 1.5, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn crop_keeps_aspect_and_bounds(w in 8u32..300, h in 8u32..300, f in 0.05f64..=1.0, seed in 0u64..1000) {
            let (rec, px) = parent(w, h);
            let p = crop_patches(&rec, &px, CropMode::Random, f, seed).unwrap();
            let ew = f * w as f64;
            let eh = f * h as f64;
            proptest::prop_assert!((p.rect.w as f64 - ew).abs() <= 1.0);
            proptest::prop_assert!((p.rect.h as f64 - eh).abs() <= 1.0);
            proptest::prop_assert!(p.rect.fits(w, h));
        }
    }
}
