//! Absorbing layers that stand in for the outgoing radiation condition.
//!
//! The computational domain is extended on every side by a layer filled with
//! the background speed. Inside the layer the squared wavenumber gains a
//! positive imaginary part `a(x) = a_max · s(x)`, where `s` is a cubic ramp in
//! the normalized distance from the interior (0 at the interface, 1 at the
//! outer edge). `a_max` is set so that a wave crossing one layer width is
//! attenuated by `strength` nepers:
//!
//! ```text
//! ∫ a(d) / (2 k0) dd = a_max · W / (8 k0) = strength
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid2D, Point, RealField};
use crate::medium::SoundSpeedMap;

/// Layer thickness used by [`BoundarySpec::for_wavelength`], in wavelengths.
pub const DEFAULT_WIDTH_WAVELENGTHS: f64 = 3.0;
/// One-pass amplitude attenuation used by default, nepers.
pub const DEFAULT_STRENGTH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryProfile {
    #[default]
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// Cells added on each side, `[x, y]`.
    pub width: [usize; 2],
    pub profile: BoundaryProfile,
    /// One-pass attenuation across the layer, nepers.
    pub strength: f64,
}

impl BoundarySpec {
    pub fn none() -> Self {
        Self {
            width: [0, 0],
            profile: BoundaryProfile::Cubic,
            strength: 0.0,
        }
    }

    /// Default layer for a background wavelength. The width is rounded up so
    /// that the padded size factors into 2, 3 and 5 only.
    pub fn for_wavelength(grid: &Grid2D, wavelength: f64) -> Self {
        Self::with_wavelengths(grid, wavelength, DEFAULT_WIDTH_WAVELENGTHS, DEFAULT_STRENGTH)
    }

    pub fn with_wavelengths(grid: &Grid2D, wavelength: f64, wavelengths: f64, strength: f64) -> Self {
        let cells = (wavelengths * wavelength / grid.dx()).ceil().max(1.0) as usize;
        Self {
            width: [smooth_width(grid.nx(), cells), smooth_width(grid.ny(), cells)],
            profile: BoundaryProfile::Cubic,
            strength,
        }
    }

    pub fn is_none(&self) -> bool {
        self.width == [0, 0]
    }

    /// Thinnest side measured in wavelengths.
    pub fn width_in_wavelengths(&self, dx: f64, wavelength: f64) -> f64 {
        self.width[0].min(self.width[1]) as f64 * dx / wavelength
    }

    /// Peak added imaginary part of `k²` for background wavenumber `k0`.
    pub fn peak_absorption(&self, dx: f64, k0: f64) -> f64 {
        let w = self.width[0].min(self.width[1]);
        if w == 0 {
            return 0.0;
        }
        8.0 * k0 * self.strength / (w as f64 * dx)
    }
}

/// Smallest `w ≥ min_w` with `n + 2w` 5-smooth.
fn smooth_width(n: usize, min_w: usize) -> usize {
    (min_w..)
        .find(|w| is_smooth(n + 2 * w))
        .expect("5-smooth numbers are unbounded")
}

fn is_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5] {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n == 1
}

/// Maps a padded domain back to its interior.
#[derive(Debug, Clone, PartialEq)]
pub struct CropDescriptor {
    pub offset: [usize; 2],
    pub interior: Grid2D,
    pub padded: Grid2D,
    /// Normalized absorption shape `s(x) ∈ [0, 1]` on the padded grid; scale
    /// by [`BoundarySpec::peak_absorption`] to get the added `Im k²`.
    pub absorption: RealField,
    pub spec: BoundarySpec,
}

impl CropDescriptor {
    pub fn crop<T: crate::field::Sample>(&self, f: &crate::field::Field<T>) -> Result<crate::field::Field<T>> {
        self.padded.check_same(f.grid(), "crop")?;
        let values = crop_values(f.values(), &self.padded, &self.interior, self.offset);
        Ok(crate::field::Field::from_parts(self.interior, values))
    }

    pub(crate) fn crop_slice<T: Copy>(&self, values: &[T]) -> Vec<T> {
        crop_values(values, &self.padded, &self.interior, self.offset)
    }

    pub(crate) fn embed_slice<T: Copy>(&self, values: &[T], fill: T) -> Vec<T> {
        let mut out = vec![fill; self.padded.len()];
        let [ox, oy] = self.offset;
        for j in 0..self.interior.ny() {
            let src = &values[j * self.interior.nx()..(j + 1) * self.interior.nx()];
            let start = (j + oy) * self.padded.nx() + ox;
            out[start..start + src.len()].copy_from_slice(src);
        }
        out
    }

    /// Complex `k²` on the padded grid including layer absorption.
    pub fn padded_wavenumber_sq(&self, padded_speed: &SoundSpeedMap, omega: f64) -> Vec<Complex64> {
        let k0 = omega / padded_speed.c0();
        let peak = self.spec.peak_absorption(self.padded.dx(), k0);
        padded_speed
            .wavenumber_sq(omega)
            .into_iter()
            .zip(self.absorption.values())
            .map(|(k, s)| Complex64::new(k, peak * s))
            .collect()
    }
}

fn crop_values<T: Copy>(values: &[T], padded: &Grid2D, interior: &Grid2D, offset: [usize; 2]) -> Vec<T> {
    let mut out = Vec::with_capacity(interior.len());
    for j in 0..interior.ny() {
        let start = (j + offset[1]) * padded.nx() + offset[0];
        out.extend_from_slice(&values[start..start + interior.nx()]);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaddedProblem {
    pub speed: SoundSpeedMap,
    pub source: ComplexField,
    pub crop: CropDescriptor,
}

/// Extends `c` and `rho` by the layer. The layer holds `c0` and no source.
pub fn pad_with_boundary(c: &SoundSpeedMap, rho: &ComplexField, spec: &BoundarySpec) -> Result<PaddedProblem> {
    let interior = *c.grid();
    interior.check_same(rho.grid(), "source vs sound speed")?;
    if !(spec.strength >= 0.0 && spec.strength.is_finite()) {
        return Err(Error::InvalidArgument(format!("layer strength {} must be non-negative", spec.strength)));
    }
    if spec.is_none() && touches_edge(c) {
        return Err(Error::InvalidArgument(
            "heterogeneity touches the domain edge; an absorbing layer is required".into(),
        ));
    }
    let [wx, wy] = spec.width;
    let origin = interior.origin();
    let padded = Grid2D::new(
        interior.nx() + 2 * wx,
        interior.ny() + 2 * wy,
        interior.dx(),
        Point::new(origin.x - wx as f64 * interior.dx(), origin.y - wy as f64 * interior.dx()),
    )?;

    let absorption = RealField::from_fn(padded, |i, j, _| {
        let dist = |k: usize, w: usize, n: usize| -> f64 {
            if w == 0 {
                return 0.0;
            }
            let before = w.saturating_sub(k);
            let after = (k + 1).saturating_sub(w + n);
            before.max(after) as f64 / w as f64
        };
        let sx = dist(i, wx, interior.nx());
        let sy = dist(j, wy, interior.ny());
        sx.hypot(sy).min(1.0).powi(3)
    })?;

    let crop = CropDescriptor {
        offset: [wx, wy],
        interior,
        padded,
        absorption,
        spec: *spec,
    };
    let mask = c.doi_mask().map(|m| crop.embed_slice(m, false));
    let speed = SoundSpeedMap::new(
        RealField::new(padded, crop.embed_slice(c.speeds(), c.c0()))?,
        c.c0(),
        mask,
    )?;
    let source = ComplexField::new(padded, crop.embed_slice(rho.values(), Complex64::new(0.0, 0.0)))?;
    Ok(PaddedProblem { speed, source, crop })
}

fn touches_edge(c: &SoundSpeedMap) -> bool {
    let g = c.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let off = |i: usize, j: usize| c.field().get(i, j) != c.c0();
    (0..nx).any(|i| off(i, 0) || off(i, ny - 1)) || (0..ny).any(|j| off(0, j) || off(nx - 1, j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_padding_size() {
        let g = Grid2D::centered(480, 480, 0.0005).unwrap();
        let c = SoundSpeedMap::homogeneous(g, 1500.0).unwrap();
        let rho = ComplexField::zeros(g);
        let spec = BoundarySpec { width: [75, 75], profile: BoundaryProfile::Cubic, strength: 4.0 };
        let p = pad_with_boundary(&c, &rho, &spec).unwrap();
        assert_eq!((p.speed.grid().nx(), p.speed.grid().ny()), (630, 630));
        // Physical coordinates are preserved.
        let a = p.crop.padded.cell_center(75, 75);
        assert!(a.distance(&g.cell_center(0, 0)) < 1e-12);
    }

    #[test]
    fn crop_restores_interior() {
        let g = Grid2D::centered(12, 9, 1e-3).unwrap();
        let f = RealField::from_fn(g, |i, j, _| 1500.0 + (i * 3 + j) as f64).unwrap();
        let c = SoundSpeedMap::new(f, 1500.0, None).unwrap();
        let rho = ComplexField::from_fn(g, |i, j, _| Complex64::new(i as f64, j as f64)).unwrap();
        let spec = BoundarySpec { width: [4, 6], profile: BoundaryProfile::Cubic, strength: 2.0 };
        let p = pad_with_boundary(&c, &rho, &spec).unwrap();
        assert_eq!(p.crop.crop(p.speed.field()).unwrap().values(), c.speeds());
        assert_eq!(p.crop.crop(&p.source).unwrap().values(), rho.values());
        // The layer itself is background.
        assert_eq!(p.speed.field().get(0, 0), 1500.0);
    }

    #[test]
    fn absorption_profile_shape() {
        let g = Grid2D::centered(10, 10, 1e-3).unwrap();
        let c = SoundSpeedMap::homogeneous(g, 1500.0).unwrap();
        let spec = BoundarySpec { width: [5, 5], profile: BoundaryProfile::Cubic, strength: 1.0 };
        let p = pad_with_boundary(&c, &ComplexField::zeros(g), &spec).unwrap();
        let s = &p.crop.absorption;
        for j in 5..15 {
            for i in 5..15 {
                assert_eq!(s.get(i, j), 0.0);
            }
        }
        assert_eq!(s.get(0, 10), 1.0);
        assert!((s.get(2, 10) - (3.0f64 / 5.0).powi(3)).abs() < 1e-15);
        assert!(s.get(4, 10) < s.get(3, 10));
        assert!(s.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn zero_width_with_edge_heterogeneity_is_rejected() {
        let g = Grid2D::centered(8, 8, 1e-3).unwrap();
        let f = RealField::from_fn(g, |i, _, _| if i == 0 { 1550.0 } else { 1500.0 }).unwrap();
        let c = SoundSpeedMap::new(f, 1500.0, None).unwrap();
        assert!(pad_with_boundary(&c, &ComplexField::zeros(g), &BoundarySpec::none()).is_err());
        let inner = SoundSpeedMap::homogeneous(g, 1500.0).unwrap();
        assert!(pad_with_boundary(&inner, &ComplexField::zeros(g), &BoundarySpec::none()).is_ok());
    }

    #[test]
    fn default_width_is_fft_friendly() {
        let g = Grid2D::centered(192, 192, 1e-3).unwrap();
        let spec = BoundarySpec::for_wavelength(&g, 12.8e-3);
        assert!(spec.width[0] as f64 >= DEFAULT_WIDTH_WAVELENGTHS * 12.8);
        assert!(is_smooth(192 + 2 * spec.width[0]));
    }
}
