//! Regular 2D grids, real and complex scalar fields, and the Fourier-space
//! symbol `p_x² + p_y²` shared by the physics modules.
//!
//! Storage is row-major with `x` fastest: cell `(i, j)` lives at `j * nx + i`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted cell count per axis.
pub const MIN_CELLS: usize = 8;

/// A point in physical coordinates, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Regular isotropic grid. `origin` is the center of cell `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    dx: f64,
    origin: Point,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, origin: Point) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "grid {nx}x{ny} is smaller than {MIN_CELLS}x{MIN_CELLS}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing {dx} must be positive")));
        }
        if !(origin.x.is_finite() && origin.y.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { nx, ny, dx, origin })
    }

    /// Grid whose geometric center sits at `(0, 0)`.
    pub fn centered(nx: usize, ny: usize, dx: f64) -> Result<Self> {
        let origin = Point::new(
            -0.5 * (nx as f64 - 1.0) * dx,
            -0.5 * (ny as f64 - 1.0) * dx,
        );
        Self::new(nx, ny, dx, origin)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical extent `(nx·dx, ny·dx)`.
    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.dx, self.ny as f64 * self.dx)
    }

    pub fn center(&self) -> Point {
        Point::new(
            self.origin.x + 0.5 * (self.nx as f64 - 1.0) * self.dx,
            self.origin.y + 0.5 * (self.ny as f64 - 1.0) * self.dx,
        )
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + i as f64 * self.dx,
            self.origin.y + j as f64 * self.dx,
        )
    }

    /// Continuous cell coordinates of a physical point.
    pub fn fractional_index(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.dx,
            (p.y - self.origin.y) / self.dx,
        )
    }

    /// True when `p` lies within the hull of cell centers, where bilinear
    /// interpolation is defined.
    pub fn contains(&self, p: Point) -> bool {
        let (fx, fy) = self.fractional_index(p);
        let tol = 1e-9;
        fx >= -tol && fy >= -tol && fx <= self.nx as f64 - 1.0 + tol && fy <= self.ny as f64 - 1.0 + tol
    }

    /// Shape and spacing agree; origins are not compared.
    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dx == other.dx
    }

    pub fn check_same(&self, other: &Grid2D, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}x{} (dx {}) vs {}x{} (dx {})",
                self.nx, self.ny, self.dx, other.nx, other.ny, other.dx
            )))
        }
    }
}

/// Element types a field can hold.
pub trait Sample: Copy + Send + Sync + 'static {
    fn zero() -> Self;
    fn is_finite(&self) -> bool;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Sample for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Immutable scalar field on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid2D,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Sample> Field<T> {
    pub fn new(grid: Grid2D, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at index {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Constructor for values already known to be finite and correctly sized.
    pub(crate) fn from_parts(grid: Grid2D, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::filled(grid, T::zero())
    }

    pub fn filled(grid: Grid2D, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Builds a field by evaluating `f(i, j, center)` at every cell.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(usize, usize, Point) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(i, j, grid.cell_center(i, j)));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    /// Same values on a grid with a different origin.
    pub fn with_origin(&self, origin: Point) -> Result<Self> {
        let grid = Grid2D::new(self.grid.nx, self.grid.ny, self.grid.dx, origin)?;
        Ok(Self::from_parts(grid, self.values.clone()))
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> Result<Field<U>> {
        Field::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }
}

impl ComplexField {
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, factor: Complex64) -> ComplexField {
        Self::from_parts(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    pub fn conj(&self) -> ComplexField {
        Self::from_parts(self.grid, self.values.iter().map(|v| v.conj()).collect())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &ComplexField, b: Complex64) -> Result<ComplexField> {
        self.grid.check_same(&other.grid, "combine")?;
        Ok(Self::from_parts(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn real(&self) -> RealField {
        Field::from_parts(self.grid, self.values.iter().map(|v| v.re).collect())
    }
}

impl RealField {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_complex(&self) -> ComplexField {
        Field::from_parts(
            self.grid,
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }
}

/// Angular frequency of DFT mode `m` on an axis of `n` cells spaced `dx`.
/// Modes above `(n-1)/2` wrap to negative frequencies.
pub fn mode_frequency(m: usize, n: usize, dx: f64) -> f64 {
    let signed = if m <= (n - 1) / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    };
    2.0 * PI * signed / (n as f64 * dx)
}

/// `p_x² + p_y²` for every Fourier mode, laid out like the field it transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSymbol {
    grid: Grid2D,
    psq: Vec<f64>,
}

impl FourierSymbol {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn psq(&self) -> &[f64] {
        &self.psq
    }

    pub fn at(&self, mx: usize, my: usize) -> f64 {
        self.psq[self.grid.index(mx, my)]
    }
}

pub fn fourier_symbol(grid: &Grid2D) -> FourierSymbol {
    let px: Vec<f64> = (0..grid.nx())
        .map(|m| mode_frequency(m, grid.nx(), grid.dx()).powi(2))
        .collect();
    let py: Vec<f64> = (0..grid.ny())
        .map(|m| mode_frequency(m, grid.ny(), grid.dx()).powi(2))
        .collect();
    let mut psq = Vec::with_capacity(grid.len());
    for y in &py {
        for x in &px {
            psq.push(x + y);
        }
    }
    FourierSymbol { grid: *grid, psq }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_extents() {
        let g = Grid2D::centered(480, 480, 0.0005).unwrap();
        let (ex, ey) = g.extent();
        assert!((ex - 0.24).abs() < 1e-12 && (ey - 0.24).abs() < 1e-12);
        assert!(g.center().x.abs() < 1e-15);

        let g = Grid2D::new(8, 8, 1.0, Point::default()).unwrap();
        assert_eq!(g.extent(), (8.0, 8.0));
        assert_eq!(g.cell_center(3, 5), Point::new(3.0, 5.0));

        let g = Grid2D::centered(64, 64, 0.0005).unwrap();
        assert!((g.extent().0 - 0.032).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid2D::new(7, 8, 1.0, Point::default()).is_err());
        assert!(Grid2D::new(8, 8, 0.0, Point::default()).is_err());
        assert!(Grid2D::new(8, 8, -1.0, Point::default()).is_err());
        assert!(Grid2D::new(8, 8, f64::NAN, Point::default()).is_err());
    }

    #[test]
    fn layout_is_x_fastest() {
        let g = Grid2D::new(9, 8, 1.0, Point::default()).unwrap();
        let f = RealField::from_fn(g, |i, j, _| (100 * j + i) as f64).unwrap();
        for j in 0..8 {
            for i in 0..9 {
                assert_eq!(f.values()[j * 9 + i], (100 * j + i) as f64);
                assert_eq!(f.get(i, j), (100 * j + i) as f64);
            }
        }
    }

    #[test]
    fn field_rejects_nonfinite_and_wrong_length() {
        let g = Grid2D::new(8, 8, 1.0, Point::default()).unwrap();
        assert!(RealField::new(g, vec![0.0; 63]).is_err());
        let mut v = vec![0.0; 64];
        v[10] = f64::NAN;
        assert!(RealField::new(g, v).is_err());
    }

    #[test]
    fn symbol_values() {
        let g = Grid2D::new(8, 8, 1.0, Point::default()).unwrap();
        let s = fourier_symbol(&g);
        assert_eq!(s.at(0, 0), 0.0);
        assert!((s.at(1, 0) - (2.0 * PI / 8.0).powi(2)).abs() < 1e-15);
        assert!((s.at(1, 0) - 0.61685).abs() < 1e-5);
        for k in 1..8 {
            assert_eq!(s.at(k, 0), s.at(8 - k, 0));
            assert_eq!(s.at(0, k), s.at(0, 8 - k));
        }
    }

    #[test]
    fn symbol_is_even_and_nonnegative() {
        for &(nx, ny) in &[(8, 8), (9, 12), (15, 10)] {
            let g = Grid2D::new(nx, ny, 0.3, Point::default()).unwrap();
            let s = fourier_symbol(&g);
            for my in 0..ny {
                for mx in 0..nx {
                    let v = s.at(mx, my);
                    assert!(v >= 0.0);
                    assert_eq!(v, s.at((nx - mx) % nx, (ny - my) % ny));
                }
            }
        }
    }
}
