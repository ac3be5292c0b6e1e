//! Convergent Born series solver for `[∇² + (ω/c)²] u = -ρ`.
//!
//! The fixed point iterated is
//!
//! ```text
//! u_{k+1} = M u_k + qGρ,   M = qGv + 1 - q
//!         = u_k + q (G(v u_k + ρ) - u_k)
//! ```
//!
//! starting from `u = 0`, so the first iterate is `qGρ`. The Laplacian is the
//! spectral one implied by `G`; at convergence `u` satisfies
//! `F⁻¹(-p² F u) + k² u = -ρ` on the padded periodic domain.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::born::{green_multiplier, potential_from_wavenumber, BornParams, HOMOGENEOUS_EPSILON_FLOOR};
use crate::boundary::{pad_with_boundary, BoundarySpec, CropDescriptor};
use crate::error::{Error, Result};
use crate::fft::{Fft2, FftScratch};
use crate::field::{fourier_symbol, ComplexField, Grid2D};
use crate::medium::SoundSpeedMap;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Points per wavelength below which a solve is refused.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 4.0;
/// Points per wavelength below which a warning is attached.
pub const RECOMMENDED_POINTS_PER_WAVELENGTH: f64 = 6.0;
/// Layer thickness below which a warning is attached, wavelengths.
pub const MIN_LAYER_WAVELENGTHS: f64 = 2.0;

/// Growth of the iterate norm, relative to the first iterate, at which an
/// unpreconditioned series is declared divergent.
const DIVERGENCE_GROWTH: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once `‖u_{k+1} - u_k‖ / ‖u_k‖` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// `None` picks [`BoundarySpec::for_wavelength`] at the background speed.
    pub boundary: Option<BoundarySpec>,
    /// `false` runs the plain Born series: `q ≡ 1` and `ε` shrunk to the
    /// small homogeneous floor, as in the classical limiting-absorption
    /// expansion. Only useful to demonstrate divergence.
    pub preconditioned: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            boundary: None,
            preconditioned: true,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative update norm after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Set when the iterate grew without bound (plain Born series).
    pub diverged: bool,
    pub wall_time: f64,
    /// Parameters of the padded problem actually iterated.
    pub params: BornParams,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// A medium prepared for repeated solves at one frequency: padded grid,
/// potential, preconditioner and Green multiplier. Shareable across threads.
#[derive(Debug, Clone)]
pub struct HelmholtzSolver {
    crop: CropDescriptor,
    omega: f64,
    params: BornParams,
    k_sq: Vec<Complex64>,
    v: Vec<Complex64>,
    q: Vec<Complex64>,
    green: Vec<Complex64>,
    fft: Fft2,
    options: SolverOptions,
    warnings: Vec<String>,
}

impl HelmholtzSolver {
    pub fn new(c: &SoundSpeedMap, omega: f64, options: &SolverOptions) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("angular frequency {omega} must be positive")));
        }
        if !(options.tol > 0.0 && options.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must lie in (0, 1)", options.tol)));
        }
        let grid = *c.grid();
        let wavelength0 = 2.0 * std::f64::consts::PI * c.c0() / omega;
        let c_min = c.speeds().iter().copied().fold(c.c0(), f64::min);
        let ppw = 2.0 * std::f64::consts::PI * c_min / omega / grid.dx();
        if ppw < MIN_POINTS_PER_WAVELENGTH {
            return Err(Error::InvalidArgument(format!(
                "grid resolves only {ppw:.2} points per wavelength (need {MIN_POINTS_PER_WAVELENGTH})"
            )));
        }
        let mut warnings = Vec::new();
        if ppw < RECOMMENDED_POINTS_PER_WAVELENGTH {
            warnings.push(format!("{ppw:.2} points per wavelength is below {RECOMMENDED_POINTS_PER_WAVELENGTH}"));
        }
        let spec = options
            .boundary
            .unwrap_or_else(|| BoundarySpec::for_wavelength(&grid, wavelength0));
        if spec.width_in_wavelengths(grid.dx(), wavelength0) < MIN_LAYER_WAVELENGTHS {
            warnings.push(format!(
                "absorbing layer is {:.2} wavelengths thick (recommended ≥ {MIN_LAYER_WAVELENGTHS})",
                spec.width_in_wavelengths(grid.dx(), wavelength0)
            ));
        }

        let padded = pad_with_boundary(c, &ComplexField::zeros(grid), &spec)?;
        let k_sq = padded.crop.padded_wavenumber_sq(&padded.speed, omega);
        let mut params = BornParams::fit(&k_sq, omega)?;
        if !options.preconditioned {
            params.epsilon = HOMOGENEOUS_EPSILON_FLOOR * params.kappa_sq;
        }
        let pot = potential_from_wavenumber(&padded.crop.padded, &k_sq, &params)?;
        let green = green_multiplier(&padded.crop.padded, &params);
        let fft = Fft2::for_grid(&padded.crop.padded);
        Ok(Self {
            crop: padded.crop,
            omega,
            params,
            k_sq,
            v: pot.v.into_values(),
            q: pot.q.into_values(),
            green,
            fft,
            options: *options,
            warnings,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn params(&self) -> &BornParams {
        &self.params
    }

    pub fn crop(&self) -> &CropDescriptor {
        &self.crop
    }

    pub fn interior_grid(&self) -> &Grid2D {
        &self.crop.interior
    }

    pub fn padded_grid(&self) -> &Grid2D {
        &self.crop.padded
    }

    /// Complex `k²` on the padded grid, layer absorption included.
    pub fn wavenumber_sq(&self) -> &[Complex64] {
        &self.k_sq
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// Embeds an interior source into the padded grid.
    pub fn pad_source(&self, rho: &ComplexField) -> Result<Vec<Complex64>> {
        self.crop.interior.check_same(rho.grid(), "source vs medium")?;
        Ok(self.crop.embed_slice(rho.values(), Complex64::new(0.0, 0.0)))
    }

    /// Solves for an interior source and returns the interior field.
    pub fn solve(&self, rho: &ComplexField) -> Result<(ComplexField, SolveReport)> {
        let padded = self.pad_source(rho)?;
        let (u, report) = self.solve_padded(&padded, None)?;
        Ok((ComplexField::from_parts(self.crop.interior, self.crop.crop_slice(&u)), report))
    }

    /// Iterates on the padded grid. `guess` replaces the zero start.
    pub fn solve_padded(
        &self,
        rho: &[Complex64],
        guess: Option<&[Complex64]>,
    ) -> Result<(Vec<Complex64>, SolveReport)> {
        let n = self.crop.padded.len();
        if rho.len() != n || guess.is_some_and(|g| g.len() != n) {
            return Err(Error::InvalidArgument(format!("padded buffers must hold {n} values")));
        }
        let start = Instant::now();
        let mut report = SolveReport {
            iterations: 0,
            residual_history: Vec::new(),
            converged: false,
            diverged: false,
            wall_time: 0.0,
            params: self.params,
            warnings: self.warnings.clone(),
        };
        let zero = Complex64::new(0.0, 0.0);
        let mut u = guess.map_or_else(|| vec![zero; n], <[Complex64]>::to_vec);
        if rho.iter().all(|r| *r == zero) && guess.is_none() {
            report.converged = true;
            report.wall_time = start.elapsed().as_secs_f64();
            return Ok((u, report));
        }

        let mut scratch = FftScratch::default();
        let mut t = vec![zero; n];
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        let mut first_norm = None;
        let one = Complex64::new(1.0, 0.0);

        for it in 1..=self.options.max_iter {
            for ((t, u), (v, r)) in t.iter_mut().zip(&u).zip(self.v.iter().zip(rho)) {
                *t = v * u + r;
            }
            self.fft.forward(&mut t, &mut scratch);
            for (t, g) in t.iter_mut().zip(&self.green) {
                *t *= g;
            }
            self.fft.inverse(&mut t, &mut scratch);

            let (mut du2, mut u2_old, mut u2_new) = (0.0, 0.0, 0.0);
            for ((u, t), q) in u.iter_mut().zip(&t).zip(&self.q) {
                let q = if self.options.preconditioned { *q } else { one };
                let du = q * (t - *u);
                u2_old += u.norm_sqr();
                *u += du;
                du2 += du.norm_sqr();
                u2_new += u.norm_sqr();
            }
            if !(du2.is_finite() && u2_new.is_finite()) {
                if self.options.preconditioned {
                    return Err(Error::NonFinite { iteration: it });
                }
                report.diverged = true;
                break;
            }
            let denom = if u2_old > 0.0 { u2_old } else { u2_new };
            let rel = if denom > 0.0 { (du2 / denom).sqrt() } else { 0.0 };
            report.iterations = it;
            report.residual_history.push(rel);

            if rel < self.options.tol {
                report.converged = true;
                break;
            }
            let first = *first_norm.get_or_insert(u2_new.sqrt());
            if !self.options.preconditioned && u2_new.sqrt() > DIVERGENCE_GROWTH * first {
                report.diverged = true;
                break;
            }
            if best.as_ref().is_none_or(|(b, _)| rel < *b) {
                match &mut best {
                    Some((b, buf)) => {
                        *b = rel;
                        buf.copy_from_slice(&u);
                    }
                    None => best = Some((rel, u.clone())),
                }
            }
        }

        if !report.converged {
            let last = report.final_residual();
            if let Some((b, buf)) = best {
                if b < last || report.diverged {
                    u = buf;
                }
            }
        }
        report.wall_time = start.elapsed().as_secs_f64();
        Ok((u, report))
    }

    /// `F⁻¹(-p² F u) + k² u` on the padded grid.
    pub fn apply_operator(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut lap = u.to_vec();
        let mut scratch = FftScratch::default();
        self.fft.forward(&mut lap, &mut scratch);
        for (l, p) in lap.iter_mut().zip(fourier_symbol(&self.crop.padded).psq()) {
            *l *= -p;
        }
        self.fft.inverse(&mut lap, &mut scratch);
        lap.iter()
            .zip(u)
            .zip(&self.k_sq)
            .map(|((l, u), k)| l + k * u)
            .collect()
    }
}

/// One-shot solve: pads, iterates, crops.
pub fn cbs_solve(
    c: &SoundSpeedMap,
    rho: &ComplexField,
    omega: f64,
    options: &SolverOptions,
) -> Result<(ComplexField, SolveReport)> {
    c.grid().check_same(rho.grid(), "source vs sound speed")?;
    HelmholtzSolver::new(c, omega, options)?.solve(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::make_point_source;
    use crate::field::{Point, RealField};

    const OMEGA: f64 = 2.0 * std::f64::consts::PI * 5e5;

    /// 64² at 8 points per wavelength.
    fn grid() -> Grid2D {
        Grid2D::centered(64, 64, 1500.0 / 5e5 / 8.0).unwrap()
    }

    /// Disk of radius `r` (cells) at `c0 (1 + contrast)` plus a smaller
    /// one at `c0 (1 - contrast)`.
    fn two_disk(contrast: f64, r: f64) -> SoundSpeedMap {
        let g = grid();
        let c = RealField::from_fn(g, |i, j, _| {
            let (x, y) = (i as f64 - 31.5, j as f64 - 31.5);
            if (x - r * 0.3).hypot(y) < r * 0.45 {
                1500.0 * (1.0 - contrast)
            } else if x.hypot(y) < r {
                1500.0 * (1.0 + contrast)
            } else {
                1500.0
            }
        })
        .unwrap();
        SoundSpeedMap::new(c, 1500.0, None).unwrap()
    }

    fn source(g: &Grid2D, p: Point) -> ComplexField {
        make_point_source(g, p, Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn zero_source_returns_zero() {
        let c = two_disk(0.1, 20.0);
        let (u, report) = cbs_solve(&c, &ComplexField::zeros(*c.grid()), OMEGA, &SolverOptions::default()).unwrap();
        assert!(u.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        assert!(report.iterations <= 1 && report.converged);
    }

    #[test]
    fn rejects_coarse_grid_and_bad_options() {
        let g = Grid2D::centered(16, 16, 1500.0 / 5e5 / 3.0).unwrap();
        let c = SoundSpeedMap::homogeneous(g, 1500.0).unwrap();
        assert!(HelmholtzSolver::new(&c, OMEGA, &SolverOptions::default()).is_err());
        let c = two_disk(0.0, 1.0);
        assert!(HelmholtzSolver::new(&c, OMEGA, &SolverOptions::with_tol(1.0)).is_err());
        assert!(HelmholtzSolver::new(&c, -1.0, &SolverOptions::default()).is_err());
        let g = Grid2D::centered(16, 16, 1500.0 / 5e5 / 5.0).unwrap();
        let c = SoundSpeedMap::homogeneous(g, 1500.0).unwrap();
        let s = HelmholtzSolver::new(&c, OMEGA, &SolverOptions::default()).unwrap();
        assert!(s.warnings.iter().any(|w| w.contains("points per wavelength")));
    }

    #[test]
    fn linear_in_source() {
        let c = two_disk(0.1, 20.0);
        let g = *c.grid();
        let s = HelmholtzSolver::new(&c, OMEGA, &SolverOptions::with_tol(1e-12)).unwrap();
        let r1 = source(&g, Point::new(0.004, -0.002));
        let r2 = source(&g, Point::new(-0.005, 0.0031));
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
        let (u1, _) = s.solve(&r1).unwrap();
        let (u2, _) = s.solve(&r2).unwrap();
        let (u12, rep) = s.solve(&r1.combine(a, &r2, b).unwrap()).unwrap();
        assert!(rep.converged);
        let expect = u1.combine(a, &u2, b).unwrap();
        let err = u12.combine(Complex64::new(1.0, 0.0), &expect, Complex64::new(-1.0, 0.0)).unwrap();
        assert!(err.norm() / expect.norm() < 1e-9, "{}", err.norm() / expect.norm());
    }

    #[test]
    fn residual_history_contracts_and_pde_holds() {
        for contrast in [-0.1, -0.05, 0.05, 0.1] {
            let c = two_disk(contrast, 22.0);
            let g = *c.grid();
            let s = HelmholtzSolver::new(&c, OMEGA, &SolverOptions::default()).unwrap();
            let rho = s.pad_source(&source(&g, Point::new(0.007, 0.001))).unwrap();
            let (u, rep) = s.solve_padded(&rho, None).unwrap();
            assert!(rep.converged, "contrast {contrast}");
            let h = &rep.residual_history;
            for w in h[3..].windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-9), "contrast {contrast}: {} then {}", w[0], w[1]);
            }
            let au = s.apply_operator(&u);
            let num: f64 = au.iter().zip(&rho).map(|(a, r)| (a + r).norm_sqr()).sum();
            let den: f64 = rho.iter().map(|r| r.norm_sqr()).sum();
            let rel = (num / den).sqrt();
            assert!(rel < 10.0 * s.options().tol, "contrast {contrast}: PDE residual {rel}");
        }
    }

    #[test]
    fn plain_born_series_diverges_where_preconditioned_converges() {
        let c = two_disk(0.1, 24.0);
        let g = *c.grid();
        let rho = source(&g, Point::new(0.0, 0.0));
        let (_, ok) = cbs_solve(&c, &rho, OMEGA, &SolverOptions::default()).unwrap();
        assert!(ok.converged);
        let plain = SolverOptions { preconditioned: false, ..SolverOptions::default() };
        let (_, bad) = cbs_solve(&c, &rho, OMEGA, &plain).unwrap();
        assert!(!bad.converged && bad.diverged, "{} iterations", bad.iterations);
    }
}
