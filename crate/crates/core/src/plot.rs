//! PNG renderings of fields and loss curves.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};

/// Upscaling so that small grids stay legible.
fn scale_for(n: usize) -> u32 {
    (256 / n.max(1)).clamp(1, 8) as u32
}

fn image_error(e: image::ImageError) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Grayscale map of `field` over `[lo, hi]`, row 0 at the bottom.
pub fn save_real_field(field: &RealField, range: Option<(f64, f64)>, path: &Path) -> Result<()> {
    let g = field.grid();
    let (lo, hi) = range.unwrap_or((field.min(), field.max()));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let s = scale_for(g.nx().max(g.ny()));
    let img = GrayImage::from_fn(g.nx() as u32 * s, g.ny() as u32 * s, |x, y| {
        let (i, j) = ((x / s) as usize, g.ny() - 1 - (y / s) as usize);
        let t = ((field.get(i, j) - lo) / span).clamp(0.0, 1.0);
        Luma([(t * 255.0).round() as u8])
    });
    img.save(path).map_err(image_error)
}

/// Real part in a blue-white-red map, symmetric about zero.
pub fn save_complex_real_part(field: &ComplexField, path: &Path) -> Result<()> {
    let g = field.grid();
    let peak = field.values().iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    let peak = if peak > 0.0 { peak } else { 1.0 };
    let s = scale_for(g.nx().max(g.ny()));
    let img = RgbImage::from_fn(g.nx() as u32 * s, g.ny() as u32 * s, |x, y| {
        let (i, j) = ((x / s) as usize, g.ny() - 1 - (y / s) as usize);
        let t = (field.get(i, j).re / peak).clamp(-1.0, 1.0);
        let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
        if t >= 0.0 {
            Rgb([255, fade(t), fade(t)])
        } else {
            Rgb([fade(t), fade(t), 255])
        }
    });
    img.save(path).map_err(image_error)
}

/// `log10(loss)` against iteration as a polyline on white.
pub fn save_loss_curve(losses: &[f64], path: &Path) -> Result<()> {
    let (w, h) = (480u32, 320u32);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let logs: Vec<f64> = losses.iter().map(|l| l.max(f64::MIN_POSITIVE).log10()).collect();
    if logs.len() >= 2 {
        let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let pad = 16.0;
        let to_px = |k: usize, v: f64| -> (f64, f64) {
            (
                pad + (w as f64 - 2.0 * pad) * k as f64 / (logs.len() - 1) as f64,
                pad + (h as f64 - 2.0 * pad) * (hi - v) / span,
            )
        };
        for k in 1..logs.len() {
            let (x0, y0) = to_px(k - 1, logs[k - 1]);
            let (x1, y1) = to_px(k, logs[k]);
            let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
            for t in 0..=steps {
                let f = t as f64 / steps as f64;
                let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
                img.put_pixel(x.round() as u32, y.round() as u32, Rgb([20, 60, 160]));
            }
        }
    }
    img.save(path).map_err(image_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;

    #[test]
    fn writes_pngs() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::centered(16, 8, 1.0).unwrap();
        let f = RealField::from_fn(g, |i, j, _| (i + j) as f64).unwrap();
        save_real_field(&f, None, &dir.path().join("a.png")).unwrap();
        save_complex_real_part(&f.to_complex(), &dir.path().join("b.png")).unwrap();
        save_loss_curve(&[1.0, 0.5, 0.1], &dir.path().join("c.png")).unwrap();
        let img = image::open(dir.path().join("a.png")).unwrap();
        // 256 / 16 would be 16x, but upscaling stops at 8x.
        assert_eq!((img.width(), img.height()), (16 * 8, 8 * 8));
    }
}
