//! Oracles shared by the integration tests. Nothing here calls the code
//! under test to produce expected values, except to read its discretization
//! (padded grid, wavenumber) when that is the thing being compared.
#![allow(dead_code)]

use faer::prelude::Solve;
use faer::Mat;
use num_complex::Complex64;
use usct::array::{SourcePlan, TransducerRing};
use usct::field::{ComplexField, Grid2D, Point, RealField};
use usct::medium::SoundSpeedMap;
use usct::phantom::{gen_phantom, InclusionParams, PhantomKind, PhantomSpec};
use usct::solver::HelmholtzSolver;

pub const FREQ_HZ: f64 = 5e5;
pub const C0: f64 = 1500.0;

pub fn omega() -> f64 {
    2.0 * std::f64::consts::PI * FREQ_HZ
}

pub fn wavelength() -> f64 {
    C0 / FREQ_HZ
}

/// Naive 2D inverse DFT of `-p²`: the spectral Laplacian's convolution
/// kernel, indexed by cell offset.
fn laplacian_kernel(grid: &Grid2D) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    // Separable: -p² = -(px² + py²), so the kernel is δ_y K_x + δ_x K_y.
    let axis = |n: usize, d: usize| -> f64 {
        (0..n)
            .map(|m| {
                let p = usct::field::mode_frequency(m, n, grid.dx());
                -p * p * (2.0 * std::f64::consts::PI * (m * d) as f64 / n as f64).cos()
            })
            .sum::<f64>()
            / n as f64
    };
    let kx: Vec<f64> = (0..nx).map(|d| axis(nx, d)).collect();
    let ky: Vec<f64> = (0..ny).map(|d| axis(ny, d)).collect();
    let mut k = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let mut v = 0.0;
            if j == 0 {
                v += kx[i];
            }
            if i == 0 {
                v += ky[j];
            }
            k[j * nx + i] = v;
        }
    }
    k
}

/// Dense LU solve of `[L + diag(k²)] u = -ρ` on the solver's padded grid.
pub fn dense_direct_solve(solver: &HelmholtzSolver, rho_padded: &[Complex64]) -> Vec<Complex64> {
    let grid = *solver.padded_grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let n = nx * ny;
    let kernel = laplacian_kernel(&grid);
    let k_sq = solver.wavenumber_sq();
    let a = Mat::<Complex64>::from_fn(n, n, |r, c| {
        let (ir, jr) = (r % nx, r / nx);
        let (ic, jc) = (c % nx, c / nx);
        let di = (ir + nx - ic) % nx;
        let dj = (jr + ny - jc) % ny;
        let mut v = Complex64::new(kernel[dj * nx + di], 0.0);
        if r == c {
            v += k_sq[r];
        }
        v
    });
    let b = Mat::<Complex64>::from_fn(n, 1, |r, _| -rho_padded[r]);
    let x = a.partial_piv_lu().solve(&b);
    (0..n).map(|r| x[(r, 0)]).collect()
}

pub fn rrmse_slices(reference: &[Complex64], estimate: &[Complex64]) -> f64 {
    let num: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = reference.iter().map(|a| a.norm_sqr()).sum();
    (num / den).sqrt()
}

/// `J0` by the midpoint rule on `(1/π)∫₀^π cos(x sin θ) dθ` and `Y0` by
/// the integral `(4/π²)∫₀^{π/2} cos(x cos θ)(γ + ln(2x sin²θ)) dθ`.
pub fn bessel_j0_y0_quadrature(x: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    let n = 4000;
    let j0 = (0..n)
        .map(|m| (x * (PI * (m as f64 + 0.5) / n as f64).sin()).cos())
        .sum::<f64>()
        / n as f64;
    // The log singularity at θ = 0 is integrable; midpoints avoid it but
    // converge slowly, so substitute θ = t² to smooth it.
    let gamma = 0.577_215_664_901_532_9;
    let m = 20_000;
    let upper = (PI / 2.0).sqrt();
    let h = upper / m as f64;
    let y_int: f64 = (0..m)
        .map(|k| {
            let t = (k as f64 + 0.5) * h;
            let th = t * t;
            (x * th.cos()).cos() * (gamma + (2.0 * x * th.sin().powi(2)).ln()) * 2.0 * t * h
        })
        .sum();
    (j0, 4.0 / (PI * PI) * y_int)
}

/// Free-space solution `(i/4) H0⁽¹⁾(kr)` from the quadrature Bessel values.
pub fn hankel_green_quadrature(k: f64, r: f64) -> Complex64 {
    let (j, y) = bessel_j0_y0_quadrature(k * r);
    Complex64::new(0.0, 0.25) * Complex64::new(j, y)
}

/// Per-window SSIM with explicit Gaussian weights, averaged over every
/// window position that fits.
pub fn ssim_brute_force(x: &RealField, y: &RealField, window: usize, sigma: f64, range: f64) -> f64 {
    let half = (window / 2) as f64;
    let mut w = vec![0.0; window * window];
    for b in 0..window {
        for a in 0..window {
            w[b * window + a] = (-((a as f64 - half).powi(2) + (b as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let (nx, ny) = (x.grid().nx(), x.grid().ny());
    let mut acc = 0.0;
    let mut count = 0;
    for j in 0..=ny - window {
        for i in 0..=nx - window {
            let (mut mx, mut my) = (0.0, 0.0);
            for b in 0..window {
                for a in 0..window {
                    let wt = w[b * window + a];
                    mx += wt * x.get(i + a, j + b);
                    my += wt * y.get(i + a, j + b);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for b in 0..window {
                for a in 0..window {
                    let wt = w[b * window + a];
                    let (dx, dy) = (x.get(i + a, j + b) - mx, y.get(i + a, j + b) - my);
                    vx += wt * dx * dx;
                    vy += wt * dy * dy;
                    cxy += wt * dx * dy;
                }
            }
            acc += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Grid with `n` cells per side at `ppw` points per background wavelength.
pub fn grid_at_ppw(n: usize, ppw: f64) -> Grid2D {
    Grid2D::centered(n, n, wavelength() / ppw).unwrap()
}

/// Ring at `fraction` of the half-extent around the grid center.
pub fn ring_for(grid: &Grid2D, count: usize, fraction: f64) -> TransducerRing {
    let (w, _) = grid.extent();
    TransducerRing::new(grid.center(), 0.5 * w * fraction, count).unwrap()
}

pub fn all_sources(ring: &TransducerRing) -> SourcePlan {
    SourcePlan::every_nth(ring, 1).unwrap()
}

/// Disk of background water holding `count` inclusions at ±`contrast`.
pub fn inclusion_phantom(grid: Grid2D, count: usize, contrast: f64, radius_fraction: f64, seed: u64) -> SoundSpeedMap {
    let mut spec = PhantomSpec::new(PhantomKind::InclusionTest, grid, seed);
    spec.organ_radius_fraction = 0.7;
    spec.inclusions = InclusionParams { count, contrast, radius_fraction };
    gen_phantom(&spec).unwrap()
}

pub fn point(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

pub fn complex_field(grid: Grid2D, values: Vec<Complex64>) -> ComplexField {
    ComplexField::new(grid, values).unwrap()
}
