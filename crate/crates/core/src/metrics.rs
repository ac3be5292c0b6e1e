//! Wavefield and image-quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};

pub const DEFAULT_SSIM_WINDOW: usize = 11;
pub const DEFAULT_SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// `sqrt(Σ|u - û|² / Σ|u|²)` over every cell of `u`'s grid. Crop absorbing
/// layers before calling.
pub fn rrmse(u: &ComplexField, u_hat: &ComplexField) -> Result<f64> {
    u.grid().check_same(u_hat.grid(), "rrmse operands")?;
    let den = u.norm_sqr();
    if den == 0.0 {
        return Err(Error::InvalidArgument("rrmse reference field is identically zero".into()));
    }
    let num: f64 = u
        .values()
        .iter()
        .zip(u_hat.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok((num / den).sqrt())
}

/// Peak signal-to-noise ratio in dB, `+∞` for identical inputs.
pub fn psnr(reference: &RealField, estimate: &RealField, data_range: f64) -> Result<f64> {
    reference.grid().check_same(estimate.grid(), "psnr operands")?;
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(Error::InvalidArgument(format!("data range {data_range} must be positive")));
    }
    let mse = reference
        .values()
        .iter()
        .zip(estimate.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / reference.values().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

/// Normalized 1D Gaussian taps.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let w: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Mean structural similarity over every full window position ("valid"
/// windows, no padding), Gaussian weighted.
pub fn ssim(reference: &RealField, estimate: &RealField, window: usize, data_range: f64) -> Result<f64> {
    ssim_with_sigma(reference, estimate, window, DEFAULT_SSIM_SIGMA, data_range)
}

pub fn ssim_with_sigma(
    reference: &RealField,
    estimate: &RealField,
    window: usize,
    sigma: f64,
    data_range: f64,
) -> Result<f64> {
    let g = reference.grid();
    g.check_same(estimate.grid(), "ssim operands")?;
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("ssim window {window} must be odd")));
    }
    if window > g.nx() || window > g.ny() {
        return Err(Error::InvalidArgument(format!(
            "ssim window {window} exceeds field {}x{}",
            g.nx(),
            g.ny()
        )));
    }
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(Error::InvalidArgument(format!("data range {data_range} must be positive")));
    }
    let taps = gaussian_window(window, sigma);
    let (nx, ny) = (g.nx(), g.ny());
    let x = reference.values();
    let y = estimate.values();
    let products: [Vec<f64>; 5] = [
        x.to_vec(),
        y.to_vec(),
        x.iter().map(|a| a * a).collect(),
        y.iter().map(|b| b * b).collect(),
        x.iter().zip(y).map(|(a, b)| a * b).collect(),
    ];
    let [mx, my, xx, yy, xy] = products.map(|p| filter_valid(&p, nx, ny, &taps));

    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|k| {
            let (ux, uy) = (mx[k], my[k]);
            let vx = xx[k] - ux * ux;
            let vy = yy[k] - uy * uy;
            let cov = xy[k] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Separable correlation keeping only positions where the window fits.
fn filter_valid(values: &[f64], nx: usize, ny: usize, taps: &[f64]) -> Vec<f64> {
    let w = taps.len();
    let (ox, oy) = (nx - w + 1, ny - w + 1);
    let mut rows = vec![0.0; ox * ny];
    for j in 0..ny {
        let row = &values[j * nx..(j + 1) * nx];
        for i in 0..ox {
            rows[j * ox + i] = taps.iter().zip(&row[i..i + w]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ox * oy];
    for j in 0..oy {
        for i in 0..ox {
            out[j * ox + i] = taps
                .iter()
                .enumerate()
                .map(|(t, tap)| tap * rows[(j + t) * ox + i])
                .sum();
        }
    }
    out
}

/// `max - min` of the reference map.
pub fn data_range_of(reference: &RealField) -> f64 {
    reference.max() - reference.min()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    pub data_range: Option<f64>,
    pub window: Option<usize>,
    pub sigma: Option<f64>,
    pub reference: String,
    pub estimate: String,
}

impl MetricReport {
    /// Tab-separated row: name, value, data range, window, operands.
    pub fn table_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.name,
            format_value(self.value),
            opt(self.data_range.map(|d| format!("{d}"))),
            opt(self.window.map(|w| format!("{w}"))),
            self.reference,
            self.estimate
        )
    }
}

pub const TABLE_HEADER: &str = "metric\tvalue\tdata_range\twindow\treference\testimate";

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

/// PSNR and SSIM of a reconstruction against ground truth, both on the
/// truth's data range.
pub fn image_reports(truth: &RealField, estimate: &RealField, labels: (&str, &str)) -> Result<Vec<MetricReport>> {
    let range = data_range_of(truth);
    let range = if range > 0.0 { range } else { 1.0 };
    let base = |name: &str, value: f64, window: Option<usize>| MetricReport {
        name: name.into(),
        value,
        data_range: Some(range),
        window,
        sigma: window.map(|_| DEFAULT_SSIM_SIGMA),
        reference: labels.0.into(),
        estimate: labels.1.into(),
    };
    Ok(vec![
        base("psnr", psnr(truth, estimate, range)?, None),
        base("ssim", ssim(truth, estimate, DEFAULT_SSIM_WINDOW, range)?, Some(DEFAULT_SSIM_WINDOW)),
    ])
}
