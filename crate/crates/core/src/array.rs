//! Annular transducer array: geometry, point sources, sampling and full
//! observation simulation.
//!
//! Sources and receivers share one bilinear stencil. [`splat`] is the exact
//! transpose of [`sample_at`], so residuals injected by the adjoint step see
//! the same discretization as the forward measurements.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid2D, Point};
use crate::medium::SoundSpeedMap;
use crate::solver::{HelmholtzSolver, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransducerRing {
    pub center: Point,
    /// Meters.
    pub radius: f64,
    pub count: usize,
}

impl TransducerRing {
    pub fn new(center: Point, radius: f64, count: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("ring radius {radius} must be positive")));
        }
        if count < 3 {
            return Err(Error::InvalidArgument(format!("ring needs at least 3 transducers, got {count}")));
        }
        Ok(Self { center, radius, count })
    }

    pub fn position(&self, i: usize) -> Point {
        let theta = 2.0 * PI * i as f64 / self.count as f64;
        Point::new(
            self.center.x + self.radius * theta.cos(),
            self.center.y + self.radius * theta.sin(),
        )
    }

    /// Arc length between neighbors.
    pub fn spacing(&self) -> f64 {
        2.0 * PI * self.radius / self.count as f64
    }
}

pub fn ring_positions(ring: &TransducerRing) -> Vec<Point> {
    (0..ring.count).map(|i| ring.position(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePlan {
    pub source_indices: Vec<usize>,
    pub amplitude: Complex64,
}

impl SourcePlan {
    pub fn new(source_indices: Vec<usize>, amplitude: Complex64, ring: &TransducerRing) -> Result<Self> {
        let mut seen = vec![false; ring.count];
        for &k in &source_indices {
            if k >= ring.count {
                return Err(Error::InvalidArgument(format!(
                    "source index {k} outside ring of {} transducers",
                    ring.count
                )));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidArgument(format!("source index {k} repeated")));
            }
        }
        if source_indices.is_empty() {
            return Err(Error::InvalidArgument("source plan is empty".into()));
        }
        Ok(Self { source_indices, amplitude })
    }

    /// Every `stride`-th transducer starting at 0, unit amplitude.
    pub fn every_nth(ring: &TransducerRing, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        Self::new((0..ring.count).step_by(stride).collect(), Complex64::new(1.0, 0.0), ring)
    }

    pub fn len(&self) -> usize {
        self.source_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_indices.is_empty()
    }
}

/// Four-cell bilinear stencil of a point.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    idx: [usize; 4],
    w: [f64; 4],
}

fn stencil(grid: &Grid2D, p: Point) -> Result<Stencil> {
    if !grid.contains(p) {
        return Err(Error::OutOfExtent { x: p.x, y: p.y });
    }
    let (fx, fy) = grid.fractional_index(p);
    let axis = |f: f64, n: usize| -> (usize, f64) {
        let snapped = if (f - f.round()).abs() < 1e-9 { f.round() } else { f };
        let clamped = snapped.clamp(0.0, (n - 1) as f64);
        let i0 = (clamped.floor() as usize).min(n - 2);
        (i0, clamped - i0 as f64)
    };
    let (i0, tx) = axis(fx, grid.nx());
    let (j0, ty) = axis(fy, grid.ny());
    Ok(Stencil {
        idx: [
            grid.index(i0, j0),
            grid.index(i0 + 1, j0),
            grid.index(i0, j0 + 1),
            grid.index(i0 + 1, j0 + 1),
        ],
        w: [
            (1.0 - tx) * (1.0 - ty),
            tx * (1.0 - ty),
            (1.0 - tx) * ty,
            tx * ty,
        ],
    })
}

/// Bilinear interpolation of `u` at each position, in order.
pub fn sample_at(u: &ComplexField, positions: &[Point]) -> Result<Vec<Complex64>> {
    positions
        .iter()
        .map(|&p| {
            let s = stencil(u.grid(), p)?;
            Ok(s.idx
                .iter()
                .zip(&s.w)
                .map(|(&k, &w)| u.values()[k] * w)
                .sum())
        })
        .collect()
}

/// Transpose of [`sample_at`]: deposits `weights[i]` at `positions[i]`.
pub fn splat(grid: &Grid2D, positions: &[Point], weights: &[Complex64]) -> Result<ComplexField> {
    if positions.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} positions but {} weights",
            positions.len(),
            weights.len()
        )));
    }
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (&p, &g) in positions.iter().zip(weights) {
        let s = stencil(grid, p)?;
        for (&k, &w) in s.idx.iter().zip(&s.w) {
            if w != 0.0 {
                values[k] += g * w;
            }
        }
    }
    ComplexField::new(*grid, values)
}

/// Discrete point source integrating to `amplitude`: a bilinear splat
/// scaled by `1/dx²`.
pub fn make_point_source(grid: &Grid2D, position: Point, amplitude: Complex64) -> Result<ComplexField> {
    splat(grid, &[position], &[amplitude / (grid.dx() * grid.dx())])
}

/// Source-by-receiver matrix of complex readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    /// Row-major, `rows = sources`, `cols = receivers`.
    pub data: Vec<Complex64>,
    pub ring: TransducerRing,
    pub plan: SourcePlan,
    pub omega: f64,
    pub snr_db: Option<f64>,
    pub noise_seed: Option<u64>,
    /// Whether the misfit ignores receiver `j` for the source sitting at `j`.
    pub exclude_self: bool,
    /// Per-row solver convergence.
    pub row_converged: Vec<bool>,
}

impl MeasurementSet {
    pub fn new(data: Vec<Complex64>, ring: TransducerRing, plan: SourcePlan, omega: f64) -> Result<Self> {
        let set = Self {
            row_converged: vec![true; plan.len()],
            data,
            ring,
            plan,
            omega,
            snr_db: None,
            noise_seed: None,
            exclude_self: true,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.rows() * self.cols() {
            return Err(Error::InvalidArgument(format!(
                "measurement holds {} entries, expected {}x{}",
                self.data.len(),
                self.rows(),
                self.cols()
            )));
        }
        if self.row_converged.len() != self.rows() {
            return Err(Error::InvalidArgument("row flags do not match row count".into()));
        }
        if self.data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("measurement contains non-finite entries".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.plan.len()
    }

    pub fn cols(&self) -> usize {
        self.ring.count
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.cols()..(row + 1) * self.cols()]
    }

    /// Same geometry, new readings.
    pub fn with_data(&self, data: Vec<Complex64>) -> Result<Self> {
        let set = Self { data, ..self.clone() };
        set.validate()?;
        Ok(set)
    }

    /// Mean `|y|²` over the whole matrix, self entries included.
    pub fn signal_power(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len().max(1) as f64
    }

    /// Per-entry noise variance implied by `snr_db`. The data already hold
    /// the noise, so the clean power is recovered from
    /// `mean|y|² = P (1 + 10^(-snr/10))`.
    pub fn noise_variance(&self) -> Option<f64> {
        let snr = self.snr_db?;
        let ratio = 10f64.powf(-snr / 10.0);
        Some(self.signal_power() * ratio / (1.0 + ratio))
    }

    pub fn is_self_entry(&self, row: usize, col: usize) -> bool {
        self.plan.source_indices[row] == col
    }
}

/// Checks that every transducer sits on the grid, away from its edge.
pub fn check_ring_inside(grid: &Grid2D, ring: &TransducerRing) -> Result<()> {
    for p in ring_positions(ring) {
        if !grid.contains(p) {
            return Err(Error::OutOfExtent { x: p.x, y: p.y });
        }
    }
    Ok(())
}

/// Fires each planned source in turn and records the field at every
/// transducer. Rows run in parallel; each is an independent solve.
pub fn simulate_observation(
    c: &SoundSpeedMap,
    ring: &TransducerRing,
    plan: &SourcePlan,
    omega: f64,
    options: &SolverOptions,
) -> Result<MeasurementSet> {
    check_ring_inside(c.grid(), ring)?;
    let solver = HelmholtzSolver::new(c, omega, options)?;
    let positions = ring_positions(ring);
    let rows: Vec<(Vec<Complex64>, bool)> = plan
        .source_indices
        .par_iter()
        .map(|&k| {
            let rho = make_point_source(c.grid(), positions[k], plan.amplitude)?;
            let (u, report) = solver.solve(&rho)?;
            Ok((sample_at(&u, &positions)?, report.converged))
        })
        .collect::<Result<_>>()?;
    let mut set = MeasurementSet::new(
        rows.iter().flat_map(|(r, _)| r.iter().copied()).collect(),
        *ring,
        plan.clone(),
        omega,
    )?;
    set.row_converged = rows.iter().map(|(_, ok)| *ok).collect();
    Ok(set)
}

/// Adds circularly-symmetric complex Gaussian noise at the given SNR,
/// measured on the whole matrix (see [`MeasurementSet::signal_power`]).
/// Row `r` draws from stream `r` of a ChaCha generator seeded with `seed`,
/// so the result does not depend on threading.
pub fn add_noise(y: &MeasurementSet, snr_db: f64, seed: u64) -> Result<MeasurementSet> {
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR must not be NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    let noise_power = y.signal_power() / 10f64.powf(snr_db / 10.0);
    let normal = Normal::new(0.0, (0.5 * noise_power).sqrt())
        .map_err(|e| Error::InvalidArgument(format!("noise level: {e}")))?;
    let cols = y.cols();
    let mut data = y.data.clone();
    for (r, row) in data.chunks_mut(cols).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        for v in row {
            *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    let mut out = y.with_data(data)?;
    out.snr_db = Some(snr_db);
    out.noise_seed = Some(seed);
    Ok(out)
}
