//! Scattering potential, preconditioner and Green operator of the
//! convergent Born series.
//!
//! The Helmholtz equation `[∇² + k²(x)] u = -ρ` is split around a constant
//! background `κ² + iε`:
//!
//! ```text
//! v(x) = k²(x) - κ² - iε          scattering potential
//! G    = F⁻¹ (p² - κ² - iε)⁻¹ F   Green operator of ∇² + κ² + iε
//! q(x) = i v(x) / ε               preconditioner
//! ```
//!
//! With `ε ≥ max |k² - κ²|` the iteration operator `M = qGv + 1 - q` is a
//! contraction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{Fft2, FftScratch};
use crate::field::{fourier_symbol, ComplexField, Grid2D};
use crate::medium::SoundSpeedMap;

/// Relative head-room added to `ε` above `max |k² - κ²|`.
pub const EPSILON_MARGIN: f64 = 1e-3;

/// `ε` is kept at least this multiple of the largest `Im k²`, so that
/// `|q| ≥ 1 - 1/1.3` inside absorbing layers. Without it `q → 0` at the
/// layer's peak and those cells stall the iteration.
pub const ABSORPTION_EPSILON_FACTOR: f64 = 1.3;

/// `ε / κ²` used when the medium is homogeneous and the spread is zero.
pub const HOMOGENEOUS_EPSILON_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BornParams {
    /// κ², rad²/m².
    pub kappa_sq: f64,
    /// ε, rad²/m².
    pub epsilon: f64,
    /// ω, rad/s.
    pub omega: f64,
}

impl BornParams {
    /// Centers `κ²` on the real parts of `k_sq` and sizes `ε` to cover every
    /// deviation, including imaginary (absorbing) parts. For real `k_sq` this
    /// is [`choose_born_params`].
    pub fn fit(k_sq: &[Complex64], omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("angular frequency {omega} must be positive")));
        }
        if k_sq.is_empty() {
            return Err(Error::InvalidArgument("empty medium".into()));
        }
        let (lo, hi) = k_sq
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(k.re), hi.max(k.re)));
        let kappa_sq = 0.5 * (lo + hi);
        let spread = k_sq
            .iter()
            .map(|k| (k - kappa_sq).norm())
            .fold(0.0, f64::max);
        let absorption = k_sq.iter().map(|k| k.im).fold(0.0, f64::max);
        let epsilon = (spread * (1.0 + EPSILON_MARGIN))
            .max(ABSORPTION_EPSILON_FACTOR * absorption)
            .max(HOMOGENEOUS_EPSILON_FLOOR * kappa_sq);
        if !(kappa_sq > 0.0) {
            return Err(Error::InvalidArgument("κ² must be positive".into()));
        }
        Ok(Self { kappa_sq, epsilon, omega })
    }

    /// `max |k² - κ²| ≤ ε`, with rounding slack.
    pub fn covers(&self, k_sq: &[Complex64]) -> bool {
        k_sq
            .iter()
            .all(|k| (k - self.kappa_sq).norm() <= self.epsilon * (1.0 + 1e-12))
    }
}

/// `κ²` at the midpoint of the `k²` extremes and `ε` at half their spread
/// (plus margin), floored at `1e-3·κ²` for homogeneous media.
pub fn choose_born_params(c: &SoundSpeedMap, omega: f64) -> Result<BornParams> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("angular frequency {omega} must be positive")));
    }
    let k_sq: Vec<Complex64> = c
        .wavenumber_sq(omega)
        .into_iter()
        .map(|k| Complex64::new(k, 0.0))
        .collect();
    BornParams::fit(&k_sq, omega)
}

/// `v` and `q = iv/ε`, stored side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringPotential {
    pub v: ComplexField,
    pub q: ComplexField,
}

impl ScatteringPotential {
    /// `max |1 - q| = max |k² - κ²| / ε`; at most one for a contraction.
    pub fn contraction_bound(&self) -> f64 {
        self.q
            .values()
            .iter()
            .map(|q| (Complex64::new(1.0, 0.0) - q).norm())
            .fold(0.0, f64::max)
    }
}

pub fn build_potential(c: &SoundSpeedMap, params: &BornParams) -> Result<ScatteringPotential> {
    let k_sq: Vec<Complex64> = c
        .wavenumber_sq(params.omega)
        .into_iter()
        .map(|k| Complex64::new(k, 0.0))
        .collect();
    potential_from_wavenumber(c.grid(), &k_sq, params)
}

pub(crate) fn potential_from_wavenumber(
    grid: &Grid2D,
    k_sq: &[Complex64],
    params: &BornParams,
) -> Result<ScatteringPotential> {
    if !(params.epsilon > 0.0 && params.epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε = {} must be positive", params.epsilon)));
    }
    let shift = Complex64::new(params.kappa_sq, params.epsilon);
    let v: Vec<Complex64> = k_sq.iter().map(|k| k - shift).collect();
    let q: Vec<Complex64> = v
        .iter()
        .map(|v| Complex64::new(0.0, 1.0) * v / params.epsilon)
        .collect();
    Ok(ScatteringPotential {
        v: ComplexField::new(*grid, v)?,
        q: ComplexField::new(*grid, q)?,
    })
}

/// Fourier multiplier `1 / (p² - κ² - iε)` laid out like the grid.
pub(crate) fn green_multiplier(grid: &Grid2D, params: &BornParams) -> Vec<Complex64> {
    let shift = Complex64::new(params.kappa_sq, params.epsilon);
    fourier_symbol(grid)
        .psq()
        .iter()
        .map(|&p| (Complex64::new(p, 0.0) - shift).inv())
        .collect()
}

/// Applies `G = F⁻¹ (p² - κ² - iε)⁻¹ F` spectrally.
pub fn green_apply(f: &ComplexField, params: &BornParams) -> Result<ComplexField> {
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidArgument("ε must be positive".into()));
    }
    let plan = Fft2::for_grid(f.grid());
    let mut scratch = FftScratch::default();
    let mut data = f.values().to_vec();
    plan.forward(&mut data, &mut scratch);
    for (d, g) in data.iter_mut().zip(green_multiplier(f.grid(), params)) {
        *d *= g;
    }
    plan.inverse(&mut data, &mut scratch);
    ComplexField::new(*f.grid(), data)
}
