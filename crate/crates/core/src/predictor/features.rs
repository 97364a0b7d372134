//! Perceptual image statistics used as the predictor's input.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::data::Rect;
use crate::error::{Error, Result};
use crate::raster::{gaussian_kernel, separable_filter, LumaImage};
use crate::stats;

pub const FEATURE_CONFIG_ID: &str = "stats-2scale-v1";
pub const FEATURES_PER_SCALE: usize = 18;
pub const FEATURE_DIM: usize = 2 * FEATURES_PER_SCALE;
pub const MIN_REGION: u32 = 16;

const MSCN_C: f64 = 1.0;
const MSCN_SIGMA: f64 = 7.0 / 6.0;
const LOCAL_VAR_RADIUS: usize = 3;

pub const SCALE_FEATURE_NAMES: [&str; FEATURES_PER_SCALE] = [
    "mscn_std",
    "mscn_skew",
    "mscn_log_kurtosis",
    "mscn_pair_h",
    "mscn_pair_v",
    "laplacian_log_var",
    "gradient_mean",
    "gradient_std",
    "luma_mean",
    "luma_std",
    "luma_p2",
    "luma_p98",
    "frac_bright",
    "frac_dark",
    "local_var_log_var",
    "autocorr_h",
    "autocorr_v",
    "noise_sigma",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub id: String,
    pub dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            id: FEATURE_CONFIG_ID.into(),
            dim: FEATURE_DIM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub config: FeatureConfig,
    pub values: Vec<f64>,
}

/// Names in vector order, suffixed with the scale.
pub fn feature_names() -> Vec<String> {
    ["full", "half"]
        .iter()
        .flat_map(|s| SCALE_FEATURE_NAMES.iter().map(move |n| format!("{n}@{s}")))
        .collect()
}

pub fn check_region(width: u32, height: u32, region: Rect) -> Result<()> {
    let err = |reason| Error::Region {
        x: region.x,
        y: region.y,
        w: region.w,
        h: region.h,
        width,
        height,
        reason,
    };
    if !region.fits(width, height) {
        return Err(err("outside image bounds"));
    }
    if region.w < MIN_REGION || region.h < MIN_REGION {
        return Err(err("smaller than 16x16"));
    }
    Ok(())
}

/// Features of `region` (default: the whole image) at full and half scale.
pub fn extract_features(pixels: &RgbImage, region: Option<Rect>) -> Result<FeatureVector> {
    let region = region.unwrap_or(Rect::full(pixels.width(), pixels.height()));
    check_region(pixels.width(), pixels.height(), region)?;
    let luma = LumaImage::from_rgb(pixels).crop(region);
    Ok(extract_luma(&luma))
}

pub fn extract_luma(luma: &LumaImage) -> FeatureVector {
    let mut values = scale_features(luma);
    values.extend(scale_features(&luma.downsample2()));
    FeatureVector {
        config: FeatureConfig::default(),
        values,
    }
}

fn guarded_div(num: f64, den: f64) -> f64 {
    if den.abs() < 1e-12 {
        0.0
    } else {
        num / den
    }
}

fn variance(xs: &[f64]) -> f64 {
    stats::central_moment(xs, 2)
}

fn scale_features(img: &LumaImage) -> Vec<f64> {
    let (w, h) = (img.width as i64, img.height as i64);
    let n = img.data.len() as f64;

    // MSCN coefficients
    let g = gaussian_kernel(MSCN_SIGMA, 3);
    let mu = separable_filter(img, &g);
    let sq = LumaImage::new(img.width, img.height, img.data.iter().map(|v| v * v).collect());
    let mu_sq = separable_filter(&sq, &g);
    let mscn: Vec<f64> = img
        .data
        .iter()
        .zip(&mu.data)
        .zip(&mu_sq.data)
        .map(|((&v, &m), &m2)| (v - m) / ((m2 - m * m).abs().sqrt() + MSCN_C))
        .collect();
    let m2 = variance(&mscn);
    let mscn_std = m2.sqrt();
    let mscn_skew = guarded_div(stats::central_moment(&mscn, 3), m2.powf(1.5));
    let mscn_kurt = guarded_div(stats::central_moment(&mscn, 4), m2 * m2);
    let mscn_at = |x: i64, y: i64| mscn[(y * w + x) as usize];
    let (mut pair_h, mut pair_v) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w - 1 {
            pair_h += mscn_at(x, y) * mscn_at(x + 1, y);
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            pair_v += mscn_at(x, y) * mscn_at(x, y + 1);
        }
    }
    pair_h = guarded_div(pair_h, ((w - 1) * h) as f64);
    pair_v = guarded_div(pair_v, (w * (h - 1)) as f64);

    // Laplacian and gradient
    let mut lap = Vec::with_capacity(img.data.len());
    let mut grad = Vec::with_capacity(img.data.len());
    for y in 0..h {
        for x in 0..w {
            let c = img.at_clamped(x, y);
            let (l, r) = (img.at_clamped(x - 1, y), img.at_clamped(x + 1, y));
            let (u, d) = (img.at_clamped(x, y - 1), img.at_clamped(x, y + 1));
            lap.push(l + r + u + d - 4.0 * c);
            grad.push((((r - l) / 2.0).powi(2) + ((d - u) / 2.0).powi(2)).sqrt());
        }
    }
    let lap_var = variance(&lap);
    let grad_mean = stats::mean(&grad);
    let grad_std = variance(&grad).sqrt();

    // luminance distribution
    let mut sorted = img.data.clone();
    sorted.sort_by(f64::total_cmp);
    let luma_mean = stats::mean(&img.data);
    let luma_std = variance(&img.data).sqrt();
    let p2 = stats::quantile_sorted(&sorted, 0.02);
    let p98 = stats::quantile_sorted(&sorted, 0.98);
    let bright = img.data.iter().filter(|&&v| v >= 250.0).count() as f64 / n;
    let dark = img.data.iter().filter(|&&v| v <= 5.0).count() as f64 / n;

    // spread of local variance
    let box_k = vec![1.0 / (2 * LOCAL_VAR_RADIUS + 1) as f64; 2 * LOCAL_VAR_RADIUS + 1];
    let bm = separable_filter(img, &box_k);
    let bm2 = separable_filter(&sq, &box_k);
    let local_var: Vec<f64> = bm
        .data
        .iter()
        .zip(&bm2.data)
        .map(|(m, m2)| (m2 - m * m).max(0.0))
        .collect();
    let var_of_var = variance(&local_var);

    // lag-1 autocorrelation
    let (mut ha, mut hb, mut va, mut vb) = (vec![], vec![], vec![], vec![]);
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                ha.push(img.at_clamped(x, y));
                hb.push(img.at_clamped(x + 1, y));
            }
            if y + 1 < h {
                va.push(img.at_clamped(x, y));
                vb.push(img.at_clamped(x, y + 1));
            }
        }
    }
    let ac_h = stats::lcc(&ha, &hb).unwrap_or(0.0);
    let ac_v = stats::lcc(&va, &vb).unwrap_or(0.0);

    vec![
        mscn_std,
        mscn_skew,
        mscn_kurt.ln_1p(),
        pair_h,
        pair_v,
        lap_var.ln_1p(),
        grad_mean,
        grad_std,
        luma_mean,
        luma_std,
        p2,
        p98,
        bright,
        dark,
        var_of_var.ln_1p(),
        ac_h,
        ac_v,
        immerkaer_sigma(img),
    ]
}

/// Fast noise standard deviation estimate from a Laplacian-difference mask.
fn immerkaer_sigma(img: &LumaImage) -> f64 {
    let (w, h) = (img.width as i64, img.height as i64);
    if w < 3 || h < 3 {
        return 0.0;
    }
    const MASK: [[f64; 3]; 3] = [[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]];
    let mut acc = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut s = 0.0;
            for (dy, row) in MASK.iter().enumerate() {
                for (dx, m) in row.iter().enumerate() {
                    s += m * img.at_clamped(x + dx as i64 - 1, y + dy as i64 - 1);
                }
            }
            acc += s.abs();
        }
    }
    (std::f64::consts::FRAC_PI_2).sqrt() * acc / (6.0 * ((w - 2) * (h - 2)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn index(name: &str) -> usize {
        SCALE_FEATURE_NAMES.iter().position(|n| *n == name).unwrap()
    }

    fn textured(w: u32, h: u32, seed: u64) -> LumaImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..w * h).map(|_| rng.random_range(-20.0..20.0)).collect();
        LumaImage::from_fn(w, h, |x, y| {
            let base = 120.0 + 60.0 * ((x as f64 / 5.0).sin() * (y as f64 / 9.0).cos());
            (base + noise[(y * w + x) as usize] + if x > w / 2 { 30.0 } else { 0.0 }).clamp(0.0, 255.0)
        })
    }

    #[test]
    fn constant_image_degenerate_values() {
        let f = extract_luma(&LumaImage::filled(32, 32, 128.0));
        assert_eq!(f.values.len(), FEATURE_DIM);
        for scale in 0..2 {
            let v = &f.values[scale * FEATURES_PER_SCALE..(scale + 1) * FEATURES_PER_SCALE];
            for (i, name) in SCALE_FEATURE_NAMES.iter().enumerate() {
                let expected = match *name {
                    "luma_mean" | "luma_p2" | "luma_p98" => 128.0,
                    _ => 0.0,
                };
                assert_eq!(v[i], expected, "{name}");
            }
        }
    }

    #[test]
    fn rotation_symmetry() {
        let img = textured(48, 64, 3);
        let a = extract_luma(&img).values;
        let b = extract_luma(&img.rotate90()).values;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
        let swaps = [
            (index("mscn_pair_h"), index("mscn_pair_v")),
            (index("autocorr_h"), index("autocorr_v")),
        ];
        for scale in 0..2 {
            let off = scale * FEATURES_PER_SCALE;
            for i in 0..FEATURES_PER_SCALE {
                let j = swaps
                    .iter()
                    .find_map(|&(p, q)| (i == p).then_some(q).or((i == q).then_some(p)))
                    .unwrap_or(i);
                assert!(close(a[off + i], b[off + j]), "{}: {} vs {}", SCALE_FEATURE_NAMES[i], a[off + i], b[off + j]);
            }
        }
        assert!(!close(a[index("autocorr_h")], a[index("autocorr_v")]));
    }

    #[test]
    fn blur_lowers_laplacian_variance() {
        let img = textured(64, 64, 9);
        let sharp = extract_luma(&img).values;
        let blurred = extract_luma(&img.gaussian_blur(2.0)).values;
        let i = index("laplacian_log_var");
        assert!(blurred[i] < sharp[i]);
        assert!(blurred[FEATURES_PER_SCALE + i] < sharp[FEATURES_PER_SCALE + i]);
    }

    #[test]
    fn noise_estimate_tracks_added_noise() {
        let flat = LumaImage::filled(64, 64, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let normal = rand_distr::Normal::new(0.0, 10.0).unwrap();
        let noisy = LumaImage::new(
            64,
            64,
            flat.data.iter().map(|v| v + rand_distr::Distribution::sample(&normal, &mut rng)).collect(),
        );
        let sigma = extract_luma(&noisy).values[index("noise_sigma")];
        assert!((sigma - 10.0).abs() < 1.0, "{sigma}");
    }

    #[test]
    fn region_matches_crop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rgb = RgbImage::from_fn(80, 60, |_, _| image::Rgb([rng.random(), rng.random(), rng.random()]));
        let r = Rect::new(13, 7, 40, 33);
        let via_region = extract_features(&rgb, Some(r)).unwrap();
        let cropped = image::imageops::crop_imm(&rgb, r.x, r.y, r.w, r.h).to_image();
        let via_crop = extract_features(&cropped, None).unwrap();
        for (a, b) in via_region.values.iter().zip(&via_crop.values) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn region_errors() {
        let rgb = RgbImage::new(40, 40);
        assert!(matches!(
            extract_features(&rgb, Some(Rect::new(0, 0, 15, 30))),
            Err(Error::Region { .. })
        ));
        assert!(extract_features(&rgb, Some(Rect::new(30, 0, 16, 16))).is_err());
        assert!(extract_features(&RgbImage::new(10, 40), None).is_err());
        assert!(extract_features(&rgb, Some(Rect::new(24, 24, 16, 16))).is_ok());
    }

    #[test]
    fn names_cover_vector() {
        assert_eq!(feature_names().len(), FEATURE_DIM);
        assert_eq!(feature_names()[FEATURES_PER_SCALE], "mscn_std@half");
    }
}
