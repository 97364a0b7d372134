//! Procedural test photographs with controlled distortions and known
//! ground-truth quality and distortion scores.

use image::{Rgb, RgbImage};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DistortionCategory, DistortionVector, NUM_CATEGORIES};
use crate::raster::{gaussian_kernel, separable_filter, LumaImage};

pub const BLUR_LEVELS: [f64; 3] = [0.0, 2.0, 6.0];
pub const GAMMA_LEVELS: [f64; 3] = [0.4, 1.0, 2.2];
pub const NOISE_LEVELS: [f64; 3] = [0.0, 10.0, 25.0];

/// A scene of gradients, shapes and texture.
pub fn base_photo(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let color = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        std::array::from_fn(|_| rng.random_range(40.0..215.0))
    };
    let (c0, c1) = (color(&mut rng), color(&mut rng));
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());
    let (w, h) = (width as f64, height as f64);
    let mut px: Vec<[f64; 3]> = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x as f64, y as f64)))
        .map(|(x, y)| {
            let t = (((x / w - 0.5) * ca + (y / h - 0.5) * sa) + 0.5).clamp(0.0, 1.0);
            std::array::from_fn(|c| c0[c] * (1.0 - t) + c1[c] * t)
        })
        .collect();

    for _ in 0..rng.random_range(4..9) {
        let fill = color(&mut rng);
        let cx = rng.random_range(0.0..w);
        let cy = rng.random_range(0.0..h);
        let rx = rng.random_range(0.08..0.3) * w;
        let ry = rng.random_range(0.08..0.3) * h;
        let ellipse = rng.random_bool(0.5);
        let stripes = rng.random_bool(0.4).then(|| rng.random_range(3.0..9.0));
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let inside = if ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if !inside {
                    continue;
                }
                let shade = match stripes {
                    Some(p) if ((x as f64 + y as f64) / p).floor() as i64 % 2 == 0 => 0.7,
                    _ => 1.0,
                };
                px[(y * width + x) as usize] = fill.map(|v| v * shade);
            }
        }
    }

    // smooth texture: blurred white noise
    let amp = rng.random_range(6.0..18.0);
    let tex = LumaImage::new(
        width,
        height,
        (0..width * height).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    let tex = separable_filter(&tex, &gaussian_kernel(1.5, 4));
    let scale = amp / tex.data.iter().map(|v| v.abs()).fold(1e-9, f64::max);
    let data = px
        .iter()
        .zip(&tex.data)
        .map(|(p, t)| p.map(|v| v + t * scale))
        .collect::<Vec<_>>();
    to_rgb(width, height, &data)
}

fn to_rgb(width: u32, height: u32, data: &[[f64; 3]]) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let p = data[(y * width + x) as usize];
        Rgb(p.map(|v| v.round().clamp(0.0, 255.0) as u8))
    })
}

fn channels(img: &RgbImage) -> [LumaImage; 3] {
    std::array::from_fn(|c| {
        LumaImage::new(
            img.width(),
            img.height(),
            img.pixels().map(|p| p[c] as f64).collect(),
        )
    })
}

/// Per-channel Gaussian blur.
pub fn blur_rgb(img: &RgbImage, sigma: f64) -> RgbImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let [r, g, b] = channels(img).map(|c| c.gaussian_blur(sigma));
    let data: Vec<[f64; 3]> = (0..r.data.len())
        .map(|i| [r.data[i], g.data[i], b.data[i]])
        .collect();
    to_rgb(img.width(), img.height(), &data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub blur_sigma: f64,
    pub gamma: f64,
    pub noise_sigma: f64,
}

impl DistortionSpec {
    pub const CLEAN: DistortionSpec = DistortionSpec {
        blur_sigma: 0.0,
        gamma: 1.0,
        noise_sigma: 0.0,
    };

    /// All 27 combinations of the standard levels.
    pub fn grid() -> Vec<DistortionSpec> {
        let mut out = Vec::with_capacity(27);
        for &blur_sigma in &BLUR_LEVELS {
            for &gamma in &GAMMA_LEVELS {
                for &noise_sigma in &NOISE_LEVELS {
                    out.push(DistortionSpec {
                        blur_sigma,
                        gamma,
                        noise_sigma,
                    });
                }
            }
        }
        out
    }

    /// Blur, then gamma, then additive Gaussian noise.
    pub fn apply(&self, img: &RgbImage, seed: u64) -> RgbImage {
        let blurred = blur_rgb(img, self.blur_sigma);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("finite sigma");
        let data: Vec<[f64; 3]> = blurred
            .pixels()
            .map(|p| {
                p.0.map(|v| {
                    let g = 255.0 * (v as f64 / 255.0).powf(self.gamma);
                    if self.noise_sigma > 0.0 {
                        g + noise.sample(&mut rng)
                    } else {
                        g
                    }
                })
            })
            .collect();
        to_rgb(img.width(), img.height(), &data)
    }

    /// Ground-truth MOS: 95 minus a saturating penalty per distortion.
    pub fn mos(&self) -> f64 {
        let blur = 40.0 * (1.0 - (-self.blur_sigma / 3.0).exp());
        let gamma = 30.0 * (self.gamma.ln().abs() / 2.5f64.ln()).min(1.2);
        let noise = 35.0 * (1.0 - (-self.noise_sigma / 12.0).exp());
        (95.0 - blur - gamma - noise).clamp(0.0, 100.0)
    }

    /// Ground-truth distortion probabilities.
    pub fn distortion(&self) -> DistortionVector {
        use DistortionCategory as C;
        let mut p = [0.0; NUM_CATEGORIES];
        let exposure = (self.gamma.ln() / 2.5f64.ln()).clamp(-1.0, 1.0);
        p[C::Blurry.index()] = 1.0 - (-self.blur_sigma / 2.0).exp();
        p[C::Bright.index()] = (-exposure).max(0.0);
        p[C::Dark.index()] = exposure.max(0.0);
        p[C::Grainy.index()] = 1.0 - (-self.noise_sigma / 10.0).exp();
        p[C::None.index()] = [C::Blurry, C::Bright, C::Dark, C::Grainy]
            .iter()
            .map(|c| 1.0 - p[c.index()])
            .product();
        DistortionVector(p)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticImage {
    pub item_id: String,
    pub base: usize,
    pub spec: DistortionSpec,
    pub pixels: RgbImage,
    pub mos: f64,
    pub distortion: DistortionVector,
}

/// `n_bases` scenes, each rendered under `per_base` distinct grid
/// combinations chosen at random.
pub fn corpus(n_bases: usize, per_base: usize, size: u32, seed: u64) -> Vec<SyntheticImage> {
    let grid = DistortionSpec::grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_bases * per_base);
    for base in 0..n_bases {
        let photo = base_photo(size, size, rng.random());
        for (k, spec) in grid.choose_multiple(&mut rng, per_base.min(grid.len())).enumerate() {
            let pixels = spec.apply(&photo, rng.random());
            out.push(SyntheticImage {
                item_id: format!("b{base:03}_v{k:02}"),
                base,
                spec: *spec,
                pixels,
                mos: spec.mos(),
                distortion: spec.distortion(),
            });
        }
    }
    out
}
