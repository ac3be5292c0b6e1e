//! Frequency-domain full-waveform inversion of sound speed.
//!
//! The misfit is `L(c) = Σ_k Σ_j |S_j u_k - y_kj|²` over every source `k`
//! and receiver `j`, skipping `j = k` when the observation says so. With
//! `A = ∇² + ω²/c²` (complex symmetric, absorbing layer included) and
//! `A u_k = -ρ_k`, the adjoint field `w_k` solves `A w_k = -Sᵀ conj(r_k)`
//! for the residual row `r_k`, and
//!
//! ```text
//! ∂L/∂c(x) = -4 ω² Σ_k Re(w_k(x) u_k(x)) / c(x)³
//! ```
//!
//! which is the derivative of the discrete misfit with respect to each cell
//! value. `w_k` comes from the forward solver since `Aᵀ = A`.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{make_point_source, ring_positions, sample_at, splat, MeasurementSet, SourcePlan, TransducerRing};
use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid2D, RealField};
use crate::lbfgs::{minimize, LbfgsOptions, Objective, Termination};
use crate::medium::SoundSpeedMap;
use crate::solver::{HelmholtzSolver, SolverOptions};

/// Accepted iterates keep `c > MIN_SPEED_FRACTION · c0`.
pub const MIN_SPEED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FwiOptions {
    pub lbfgs: LbfgsOptions,
    /// Stop once the misfit drops below this fraction of the observed
    /// energy (over the entries the misfit counts).
    pub relative_loss_floor: f64,
    /// Penalty added to the misfit. Off by default.
    pub regularization: Regularization,
    /// Keep every accepted iterate in the trace.
    pub keep_snapshots: bool,
}

impl Default for FwiOptions {
    fn default() -> Self {
        Self {
            lbfgs: LbfgsOptions { first_step_max_change: 10.0, ..LbfgsOptions::default() },
            relative_loss_floor: 1e-10,
            regularization: Regularization::default(),
            keep_snapshots: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    #[default]
    None,
    /// `Σ (c - c_init)²` over the inversion mask.
    Tikhonov,
    /// `Σ (c_a - c_b)²` over neighboring cells with at least one inside
    /// the mask.
    Gradient,
    /// `Σ sqrt(|∇c|² + β²)` with forward differences, `β` the smoothing.
    TotalVariation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Regularization {
    pub kind: PenaltyKind,
    pub weight: f64,
    /// `β` of the total-variation penalty, m/s.
    pub tv_smoothing_m_per_s: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self { kind: PenaltyKind::None, weight: 0.0, tv_smoothing_m_per_s: 1.0 }
    }
}

impl Regularization {
    /// Weight that makes the penalized misfit a scaled negative log
    /// posterior. With complex Gaussian noise of variance `σ²` per entry:
    /// a Gaussian prior of standard deviation `scale` on each penalized
    /// difference gives `σ² / (2 scale²)` (Tikhonov, gradient), and a
    /// Laplace prior of mean absolute value `scale` on `|∇c|` gives
    /// `σ² / scale` (total variation).
    pub fn map_weight(kind: PenaltyKind, noise_variance: f64, scale: f64) -> f64 {
        match kind {
            PenaltyKind::None => 0.0,
            PenaltyKind::Tikhonov | PenaltyKind::Gradient => noise_variance / (2.0 * scale * scale),
            PenaltyKind::TotalVariation => noise_variance / scale,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FwiProblem {
    pub observed: MeasurementSet,
    pub c_init: SoundSpeedMap,
    /// Cells the inversion may change.
    pub inversion_mask: Vec<bool>,
    pub solver: SolverOptions,
    pub options: FwiOptions,
}

impl FwiProblem {
    pub fn new(
        observed: MeasurementSet,
        c_init: SoundSpeedMap,
        inversion_mask: Vec<bool>,
        solver: SolverOptions,
        options: FwiOptions,
    ) -> Result<Self> {
        observed.validate()?;
        if inversion_mask.len() != c_init.grid().len() {
            return Err(Error::InvalidArgument(format!(
                "inversion mask has {} cells, grid has {}",
                inversion_mask.len(),
                c_init.grid().len()
            )));
        }
        crate::array::check_ring_inside(c_init.grid(), &observed.ring)?;
        Ok(Self { observed, c_init, inversion_mask, solver, options })
    }

    /// Mask of the disk strictly inside the ring, shrunk by `margin` meters.
    pub fn disk_mask(grid: &Grid2D, ring: &TransducerRing, margin: f64) -> Vec<bool> {
        let mut mask = vec![false; grid.len()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                mask[grid.index(i, j)] = grid.cell_center(i, j).distance(&ring.center) < ring.radius - margin;
            }
        }
        mask
    }

    pub fn ring(&self) -> &TransducerRing {
        &self.observed.ring
    }

    pub fn plan(&self) -> &SourcePlan {
        &self.observed.plan
    }

    pub fn omega(&self) -> f64 {
        self.observed.omega
    }

    pub fn grid(&self) -> &Grid2D {
        self.c_init.grid()
    }
}

/// Misfit and residual rows `y_pred - y_obs`, excluded entries zeroed.
pub fn misfit(y_obs: &MeasurementSet, y_pred: &MeasurementSet) -> Result<(f64, Vec<Vec<Complex64>>)> {
    if y_obs.rows() != y_pred.rows() || y_obs.cols() != y_pred.cols() {
        return Err(Error::InvalidArgument(format!(
            "measurement shapes differ: {}x{} vs {}x{}",
            y_obs.rows(),
            y_obs.cols(),
            y_pred.rows(),
            y_pred.cols()
        )));
    }
    let rows: Vec<Vec<Complex64>> = (0..y_obs.rows())
        .map(|k| residual_row(y_obs, k, y_pred.row(k)))
        .collect();
    Ok((rows.iter().flatten().map(|r| r.norm_sqr()).sum(), rows))
}

fn residual_row(y_obs: &MeasurementSet, k: usize, predicted: &[Complex64]) -> Vec<Complex64> {
    predicted
        .iter()
        .zip(y_obs.row(k))
        .enumerate()
        .map(|(j, (p, o))| {
            if y_obs.exclude_self && y_obs.is_self_entry(k, j) {
                Complex64::new(0.0, 0.0)
            } else {
                p - o
            }
        })
        .collect()
}

/// Deposits a residual row at the transducers: the transpose of sampling.
pub fn adjoint_source(residual: &[Complex64], ring: &TransducerRing, grid: &Grid2D) -> Result<ComplexField> {
    if residual.len() != ring.count {
        return Err(Error::InvalidArgument(format!(
            "residual row has {} entries for {} transducers",
            residual.len(),
            ring.count
        )));
    }
    splat(grid, &ring_positions(ring), residual)
}

/// Observed energy over the entries the misfit counts.
pub fn observed_energy(y: &MeasurementSet) -> f64 {
    (0..y.rows())
        .flat_map(|k| (0..y.cols()).map(move |j| (k, j)))
        .filter(|&(k, j)| !(y.exclude_self && y.is_self_entry(k, j)))
        .map(|(k, j)| y.get(k, j).norm_sqr())
        .sum()
}

fn solve_checked(solver: &HelmholtzSolver, rho: &ComplexField, source_index: usize) -> Result<ComplexField> {
    let (u, report) = solver.solve(rho)?;
    if !report.converged {
        return Err(Error::NotConverged { source_index, residual: report.final_residual() });
    }
    Ok(u)
}

/// Penalty value and its gradient (zero outside the mask).
fn penalty(c: &SoundSpeedMap, problem: &FwiProblem) -> (f64, Vec<f64>) {
    let reg = problem.options.regularization;
    let mask = &problem.inversion_mask;
    let mut grad = vec![0.0; c.grid().len()];
    if reg.weight == 0.0 || reg.kind == PenaltyKind::None {
        return (0.0, grad);
    }
    let speeds = c.speeds();
    let g = c.grid();
    let neighbors = |i: usize, j: usize| {
        (
            (i + 1 < g.nx()).then(|| g.index(i + 1, j)),
            (j + 1 < g.ny()).then(|| g.index(i, j + 1)),
        )
    };
    let mut value = 0.0;
    match reg.kind {
        PenaltyKind::None => {}
        PenaltyKind::Tikhonov => {
            for (k, (&a, &b)) in speeds.iter().zip(problem.c_init.speeds()).enumerate() {
                if mask[k] {
                    value += (a - b).powi(2);
                    grad[k] = 2.0 * (a - b);
                }
            }
        }
        PenaltyKind::Gradient => {
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let a = g.index(i, j);
                    let (right, up) = neighbors(i, j);
                    for b in [right, up].into_iter().flatten() {
                        if mask[a] || mask[b] {
                            let d = speeds[a] - speeds[b];
                            value += d * d;
                            grad[a] += 2.0 * d;
                            grad[b] -= 2.0 * d;
                        }
                    }
                }
            }
        }
        PenaltyKind::TotalVariation => {
            let beta2 = reg.tv_smoothing_m_per_s.powi(2);
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let a = g.index(i, j);
                    let (right, up) = neighbors(i, j);
                    let touches = mask[a] || right.is_some_and(|b| mask[b]) || up.is_some_and(|b| mask[b]);
                    if !touches {
                        continue;
                    }
                    let dx = right.map_or(0.0, |b| speeds[a] - speeds[b]);
                    let dy = up.map_or(0.0, |b| speeds[a] - speeds[b]);
                    let t = (dx * dx + dy * dy + beta2).sqrt();
                    value += t;
                    grad[a] += (dx + dy) / t;
                    if let Some(b) = right {
                        grad[b] -= dx / t;
                    }
                    if let Some(b) = up {
                        grad[b] -= dy / t;
                    }
                }
            }
        }
    }
    for (g, &m) in grad.iter_mut().zip(mask) {
        *g = if m { reg.weight * *g } else { 0.0 };
    }
    (reg.weight * value, grad)
}

/// Misfit plus penalty at `c`; forward solves only.
pub fn loss(c: &SoundSpeedMap, problem: &FwiProblem) -> Result<f64> {
    let solver = HelmholtzSolver::new(c, problem.omega(), &problem.solver)?;
    let positions = ring_positions(problem.ring());
    let y = &problem.observed;
    let per_source: Vec<f64> = y
        .plan
        .source_indices
        .par_iter()
        .enumerate()
        .map(|(k, &src)| {
            let rho = make_point_source(c.grid(), positions[src], y.plan.amplitude)?;
            let u = solve_checked(&solver, &rho, src)?;
            let r = residual_row(y, k, &sample_at(&u, &positions)?);
            Ok(r.iter().map(|r| r.norm_sqr()).sum())
        })
        .collect::<Result<_>>()?;
    Ok(per_source.iter().sum::<f64>() + penalty(c, problem).0)
}

/// Misfit and its gradient with respect to each cell's speed, zero outside
/// the inversion mask.
pub fn gradient(c: &SoundSpeedMap, problem: &FwiProblem) -> Result<(RealField, f64)> {
    let grid = *c.grid();
    let solver = HelmholtzSolver::new(c, problem.omega(), &problem.solver)?;
    let positions = ring_positions(problem.ring());
    let y = &problem.observed;
    let per_source: Vec<(f64, Vec<f64>)> = y
        .plan
        .source_indices
        .par_iter()
        .enumerate()
        .map(|(k, &src)| {
            let rho = make_point_source(&grid, positions[src], y.plan.amplitude)?;
            let u = solve_checked(&solver, &rho, src)?;
            let r = residual_row(y, k, &sample_at(&u, &positions)?);
            let l: f64 = r.iter().map(|r| r.norm_sqr()).sum();
            let conj: Vec<Complex64> = r.iter().map(|r| r.conj()).collect();
            let w = solve_checked(&solver, &adjoint_source(&conj, problem.ring(), &grid)?, src)?;
            let g = w.values().iter().zip(u.values()).map(|(w, u)| (w * u).re).collect();
            Ok((l, g))
        })
        .collect::<Result<_>>()?;

    // Fixed-order reduction so the result does not depend on scheduling.
    let mut total = vec![0.0; grid.len()];
    let mut misfit = 0.0;
    for (l, g) in &per_source {
        misfit += l;
        total.iter_mut().zip(g).for_each(|(t, g)| *t += g);
    }
    let omega2 = problem.omega().powi(2);
    let (penalty, penalty_grad) = penalty(c, problem);
    for (((t, &speed), &inside), pg) in total
        .iter_mut()
        .zip(c.speeds())
        .zip(&problem.inversion_mask)
        .zip(&penalty_grad)
    {
        *t = if inside { -4.0 * omega2 * *t / speed.powi(3) + pg } else { 0.0 };
    }
    Ok((RealField::new(grid, total)?, misfit + penalty))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwiTrace {
    /// Misfit at the start and after each accepted step.
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub step_sizes: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<RealField>,
    pub termination: Termination,
    /// Set when the line search failed before any step was accepted.
    pub no_progress: bool,
    pub wall_time: f64,
}

impl FwiTrace {
    pub fn iterations(&self) -> usize {
        self.step_sizes.len()
    }

    /// `iteration\tloss\tgrad_norm\tstep` rows.
    pub fn to_table(&self) -> String {
        let mut s = String::from("iteration\tloss\tgrad_norm\tstep\n");
        for (i, (l, g)) in self.losses.iter().zip(&self.grad_norms).enumerate() {
            let step = if i == 0 { "-".to_string() } else { format!("{:.6e}", self.step_sizes[i - 1]) };
            s.push_str(&format!("{i}\t{l:.9e}\t{g:.6e}\t{step}\n"));
        }
        s
    }
}

/// Packs the masked cells into the optimizer's vector and back.
struct MaskedObjective<'a> {
    problem: &'a FwiProblem,
    cells: Vec<usize>,
    floor: f64,
}

impl MaskedObjective<'_> {
    fn speeds(&self, x: &[f64]) -> Result<SoundSpeedMap> {
        let mut s = self.problem.c_init.speeds().to_vec();
        for (&k, &v) in self.cells.iter().zip(x) {
            s[k] = v;
        }
        self.problem.c_init.with_speeds(s)
    }
}

impl Objective for MaskedObjective<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        loss(&self.speeds(x)?, self.problem)
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (g, l) = gradient(&self.speeds(x)?, self.problem)?;
        Ok((l, self.cells.iter().map(|&k| g.values()[k]).collect()))
    }

    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        x.iter()
            .zip(d)
            .filter(|(_, d)| **d < 0.0)
            .map(|(x, d)| (x - self.floor) / -d)
            .fold(f64::INFINITY, f64::min)
    }
}

/// L-BFGS reconstruction from `problem.c_init`.
pub fn reconstruct(problem: &FwiProblem) -> Result<(SoundSpeedMap, FwiTrace)> {
    let start = Instant::now();
    let cells: Vec<usize> = problem
        .inversion_mask
        .iter()
        .enumerate()
        .filter_map(|(k, &m)| m.then_some(k))
        .collect();
    let x0: Vec<f64> = cells.iter().map(|&k| problem.c_init.speeds()[k]).collect();
    let mut objective = MaskedObjective {
        problem,
        cells,
        floor: MIN_SPEED_FRACTION * problem.c_init.c0(),
    };
    let mut opts = problem.options.lbfgs;
    opts.loss_floor = opts.loss_floor.max(problem.options.relative_loss_floor * observed_energy(&problem.observed));
    let mut snapshots = Vec::new();
    let keep = problem.options.keep_snapshots;
    let result = {
        let obj = &mut objective;
        let mut snaps = |_: usize, x: &[f64], _: f64| {
            if keep {
                snaps_push(&mut snapshots, problem, x);
            }
        };
        minimize(obj, x0, &opts, &mut snaps)?
    };
    let c = objective.speeds(&result.x)?;
    Ok((
        c,
        FwiTrace {
            no_progress: result.termination == Termination::LineSearchFailed && result.iterations() == 0,
            losses: result.losses,
            grad_norms: result.grad_norms,
            step_sizes: result.steps,
            snapshots,
            termination: result.termination,
            wall_time: start.elapsed().as_secs_f64(),
        },
    ))
}

fn snaps_push(snapshots: &mut Vec<RealField>, problem: &FwiProblem, x: &[f64]) {
    let mut s = problem.c_init.speeds().to_vec();
    for (k, v) in problem.inversion_mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k).zip(x) {
        s[k] = *v;
    }
    if let Ok(f) = RealField::new(*problem.grid(), s) {
        snapshots.push(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(rows: usize, cols: usize, seed: u64) -> MeasurementSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ring = TransducerRing::new(Point::default(), 1.0, cols).unwrap();
        let plan = SourcePlan::new((0..rows).collect(), Complex64::new(1.0, 0.0), &ring).unwrap();
        let data = (0..rows * cols).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        MeasurementSet::new(data, ring, plan, 1.0).unwrap()
    }

    #[test]
    fn misfit_cases() {
        let a = set(8, 8, 1);
        assert_eq!(misfit(&a, &a).unwrap().0, 0.0);
        let mut d = a.data.clone();
        d[3] += Complex64::new(3.0, 4.0);
        assert!((misfit(&a, &a.with_data(d).unwrap()).unwrap().0 - 25.0).abs() < 1e-12);
        // The self entry does not count.
        let mut d = a.data.clone();
        d[2 * 8 + 2] += Complex64::new(3.0, 4.0);
        assert_eq!(misfit(&a, &a.with_data(d.clone()).unwrap()).unwrap().0, 0.0);
        let mut keep = a.clone();
        keep.exclude_self = false;
        assert!((misfit(&keep, &a.with_data(d).unwrap()).unwrap().0 - 25.0).abs() < 1e-12);
        assert!(misfit(&a, &set(8, 9, 1)).is_err());
    }

    #[test]
    fn misfit_matches_double_loop() {
        for seed in 0..5 {
            let (a, b) = (set(8, 8, seed), set(8, 8, seed + 100));
            let mut brute = 0.0;
            for k in 0..8 {
                for j in 0..8 {
                    if j != k {
                        brute += (a.get(k, j) - b.get(k, j)).norm_sqr();
                    }
                }
            }
            let (l, rows) = misfit(&a, &b).unwrap();
            assert!((l - brute).abs() < 1e-12 * brute);
            assert_eq!(rows[3][3], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn adjoint_source_cases() {
        let grid = Grid2D::centered(16, 16, 0.25).unwrap();
        // Transducer 2 lands exactly on a cell center.
        let ring = TransducerRing::new(grid.cell_center(8, 8), 1.5, 8).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        assert!(adjoint_source(&zero, &ring, &grid).unwrap().norm() == 0.0);
        let mut one = zero.clone();
        one[2] = Complex64::new(1.0, -1.0);
        let f = adjoint_source(&one, &ring, &grid).unwrap();
        let total: Complex64 = f.values().iter().sum();
        assert!((total - one[2]).norm() < 1e-14);
        assert_eq!(f.values().iter().filter(|v| v.norm() > 0.0).count(), 1);
        assert!(adjoint_source(&zero[..7], &ring, &grid).is_err());
    }
}
