//! Grayscale working planes and the image I/O boundary.

use std::path::Path;

use image::ImageReader;
pub use image::RgbImage;

use crate::data::Rect;
use crate::error::{Error, Result};

/// Luminance plane in [0, 255], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LumaImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl LumaImage {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize);
        LumaImage {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// ITU-R BT.601 luma.
    pub fn from_rgb(img: &RgbImage) -> Self {
        let data = img
            .pixels()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        Self::new(img.width(), img.height(), data)
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Clamped-border access.
    #[inline]
    pub fn at_clamped(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.width as i64 - 1) as u32;
        let y = y.clamp(0, self.height as i64 - 1) as u32;
        self.at(x, y)
    }

    pub fn crop(&self, r: Rect) -> LumaImage {
        assert!(r.fits(self.width, self.height));
        let mut data = Vec::with_capacity(r.area() as usize);
        for y in r.y..r.y + r.h {
            let start = y as usize * self.width as usize + r.x as usize;
            data.extend_from_slice(&self.data[start..start + r.w as usize]);
        }
        LumaImage::new(r.w, r.h, data)
    }

    /// 2x2 box average; an odd trailing row or column is dropped.
    pub fn downsample2(&self) -> LumaImage {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        if self.width < 2 || self.height < 2 {
            return self.clone();
        }
        LumaImage::from_fn(w, h, |x, y| {
            (self.at(2 * x, 2 * y)
                + self.at(2 * x + 1, 2 * y)
                + self.at(2 * x, 2 * y + 1)
                + self.at(2 * x + 1, 2 * y + 1))
                / 4.0
        })
    }

    /// Rotates 90 degrees clockwise.
    pub fn rotate90(&self) -> LumaImage {
        let (w, h) = (self.width, self.height);
        LumaImage::from_fn(h, w, |x, y| self.at(y, h - 1 - x))
    }

    pub fn gaussian_blur(&self, sigma: f64) -> LumaImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let kernel = gaussian_kernel(sigma, (3.0 * sigma).ceil() as usize);
        separable_filter(self, &kernel)
    }
}

/// Normalized 1-D Gaussian of the given radius.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Symmetric separable convolution with clamped borders.
pub fn separable_filter(img: &LumaImage, kernel: &[f64]) -> LumaImage {
    let r = (kernel.len() / 2) as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let mut tmp = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * img.at_clamped(x + k as i64 - r, y);
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let tmp = LumaImage::new(img.width, img.height, tmp);
    let mut out = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * tmp.at_clamped(x, y + k as i64 - r);
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    LumaImage::new(img.width, img.height, out)
}

/// Decodes PNG or JPEG bytes.
pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage> {
    let reader = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Image(e.to_string()))?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
        _ => return Err(Error::Image("unsupported or unrecognized image format".into())),
    }
    let img = reader.decode().map_err(|e| Error::Image(e.to_string()))?;
    Ok(img.to_rgb8())
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path)?;
    decode_rgb(&bytes).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(buf.into_inner())
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}
