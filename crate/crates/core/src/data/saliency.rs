//! Spectral-residual saliency and maximal-mean window search.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::raster::{gaussian_kernel, separable_filter, LumaImage};

const WORK_SIZE: u32 = 64;
const SMOOTH_SIGMA: f64 = 3.0;

/// Saliency map of the same size as `img`, values in [0, 1].
///
/// The luminance is area-resampled to a 64x64 working grid; the log-amplitude
/// spectrum minus its 3x3 local mean is recombined with the original phase,
/// inverted, squared, Gaussian-smoothed, normalized and bilinearly resampled
/// back to full resolution.
pub fn spectral_residual_saliency(img: &LumaImage) -> LumaImage {
    let small = resize_area(img, WORK_SIZE, WORK_SIZE);
    let n = WORK_SIZE as usize;
    let mut spec: Vec<Complex<f64>> = small.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut spec, n, false);

    let log_amp: Vec<f64> = spec.iter().map(|c| (c.norm() + 1e-9).ln()).collect();
    let phase: Vec<f64> = spec.iter().map(|c| c.arg()).collect();
    let amp_img = LumaImage::new(WORK_SIZE, WORK_SIZE, log_amp.clone());
    let local_mean = separable_filter(&amp_img, &[1.0 / 3.0; 3]);

    let mut rec: Vec<Complex<f64>> = log_amp
        .iter()
        .zip(&local_mean.data)
        .zip(&phase)
        .map(|((a, m), p)| Complex::from_polar((a - m).exp(), *p))
        .collect();
    fft2(&mut rec, n, true);
    let sal = LumaImage::new(
        WORK_SIZE,
        WORK_SIZE,
        rec.iter().map(|c| c.norm_sqr()).collect(),
    );
    let kernel = gaussian_kernel(SMOOTH_SIGMA, (3.0 * SMOOTH_SIGMA).ceil() as usize);
    let mut sal = separable_filter(&sal, &kernel);

    let (lo, hi) = sal
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    for v in &mut sal.data {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
    resize_bilinear(&sal, img.width, img.height)
}

fn fft2(buf: &mut [Complex<f64>], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    for row in buf.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = buf[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            buf[y * n + x] = col[y];
        }
    }
    if inverse {
        let scale = 1.0 / (n * n) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }
}

/// Area-weighted resampling (each output pixel averages the source footprint).
pub(crate) fn resize_area(img: &LumaImage, w: u32, h: u32) -> LumaImage {
    let sx = img.width as f64 / w as f64;
    let sy = img.height as f64 / h as f64;
    LumaImage::from_fn(w, h, |ox, oy| {
        let (x0, x1) = (ox as f64 * sx, (ox + 1) as f64 * sx);
        let (y0, y1) = (oy as f64 * sy, (oy + 1) as f64 * sy);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        let mut y = y0.floor() as u32;
        while (y as f64) < y1 && y < img.height {
            let wy = (y1.min((y + 1) as f64) - y0.max(y as f64)).max(0.0);
            let mut x = x0.floor() as u32;
            while (x as f64) < x1 && x < img.width {
                let wx = (x1.min((x + 1) as f64) - x0.max(x as f64)).max(0.0);
                acc += wx * wy * img.at(x, y);
                wsum += wx * wy;
                x += 1;
            }
            y += 1;
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            0.0
        }
    })
}

/// Pixel-center-aligned bilinear resampling with clamped edges.
pub(crate) fn resize_bilinear(img: &LumaImage, w: u32, h: u32) -> LumaImage {
    let sx = img.width as f64 / w as f64;
    let sy = img.height as f64 / h as f64;
    LumaImage::from_fn(w, h, |ox, oy| {
        let fx = ((ox as f64 + 0.5) * sx - 0.5).max(0.0);
        let fy = ((oy as f64 + 0.5) * sy - 0.5).max(0.0);
        let x0 = (fx.floor() as u32).min(img.width - 1);
        let y0 = (fy.floor() as u32).min(img.height - 1);
        let x1 = (x0 + 1).min(img.width - 1);
        let y1 = (y0 + 1).min(img.height - 1);
        let tx = (fx - x0 as f64).clamp(0.0, 1.0);
        let ty = (fy - y0 as f64).clamp(0.0, 1.0);
        let top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
        let bot = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
        top * (1.0 - ty) + bot * ty
    })
}

/// Top-left corner of the `w` x `h` window with the largest total value.
/// Ties resolve to the first window in raster order.
pub fn best_window(map: &LumaImage, w: u32, h: u32) -> (u32, u32) {
    let (mw, mh) = (map.width as usize, map.height as usize);
    assert!(w as usize <= mw && h as usize <= mh && w > 0 && h > 0);
    let stride = mw + 1;
    let mut integral = vec![0.0f64; stride * (mh + 1)];
    for y in 0..mh {
        let mut row = 0.0;
        for x in 0..mw {
            row += map.data[y * mw + x];
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let (w, h) = (w as usize, h as usize);
    let mut best = (0, 0);
    let mut best_sum = integral[h * stride + w];
    for y in 0..=mh - h {
        for x in 0..=mw - w {
            let s = integral[(y + h) * stride + x + w] - integral[y * stride + x + w]
                - integral[(y + h) * stride + x]
                + integral[y * stride + x];
            // integral-image sums carry rounding noise; near-ties keep the earlier window
            if s > best_sum + 1e-9 * best_sum.abs().max(1.0) {
                best_sum = s;
                best = (x as u32, y as u32);
            }
        }
    }
    best
}
