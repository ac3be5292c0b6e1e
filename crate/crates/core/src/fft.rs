//! 2D discrete Fourier transforms on row-major buffers.
//!
//! Forward uses the `e^{-ip·x}` kernel and is unnormalized; the inverse
//! carries the `1/N` factor.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::{ComplexField, Grid2D};

/// Planned 2D transform for one grid shape. Plans are shareable; scratch
/// buffers are allocated per call so a plan can be used from many threads.
#[derive(Clone)]
pub struct Fft2 {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

/// Reusable buffers for [`Fft2`].
#[derive(Debug, Default)]
pub struct FftScratch {
    transposed: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
        }
    }

    pub fn for_grid(grid: &Grid2D) -> Self {
        Self::new(grid.nx(), grid.ny())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut FftScratch) {
        self.run(data, scratch, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut FftScratch) {
        self.run(data, scratch, &self.row_inv, &self.col_inv);
        let norm = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }

    fn run(
        &self,
        data: &mut [Complex64],
        scratch: &mut FftScratch,
        rows: &Arc<dyn Fft<f64>>,
        cols: &Arc<dyn Fft<f64>>,
    ) {
        assert_eq!(data.len(), self.len(), "buffer does not match plan");
        let (nx, ny) = (self.nx, self.ny);
        let need = rows
            .get_inplace_scratch_len()
            .max(cols.get_inplace_scratch_len());
        if scratch.work.len() < need {
            scratch.work.resize(need, Complex64::default());
        }
        rows.process_with_scratch(data, &mut scratch.work);

        scratch.transposed.resize(data.len(), Complex64::default());
        transpose(data, &mut scratch.transposed, nx, ny);
        cols.process_with_scratch(&mut scratch.transposed, &mut scratch.work);
        transpose(&scratch.transposed, data, ny, nx);
    }
}

/// `src` is `rows × cols` row-major; `dst` becomes `cols × rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    const BLOCK: usize = 16;
    for jb in (0..rows).step_by(BLOCK) {
        for ib in (0..cols).step_by(BLOCK) {
            for j in jb..(jb + BLOCK).min(rows) {
                for i in ib..(ib + BLOCK).min(cols) {
                    dst[i * rows + j] = src[j * cols + i];
                }
            }
        }
    }
}

/// Forward transform of a field; the result is indexed by Fourier mode.
pub fn fft2(field: &ComplexField) -> ComplexField {
    let plan = Fft2::for_grid(field.grid());
    let mut data = field.values().to_vec();
    plan.forward(&mut data, &mut FftScratch::default());
    ComplexField::from_parts(*field.grid(), data)
}

pub fn ifft2(spectrum: &ComplexField) -> ComplexField {
    let plan = Fft2::for_grid(spectrum.grid());
    let mut data = spectrum.values().to_vec();
    plan.inverse(&mut data, &mut FftScratch::default());
    ComplexField::from_parts(*spectrum.grid(), data)
}
