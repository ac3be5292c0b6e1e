//! Wall-clock timing of forward solves, one source at a time and in
//! batches, on one or more thread pools.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::array::make_point_source;
use crate::error::{Error, Result};
use crate::io::RunConfig;
use crate::phantom::gen_phantom;
use crate::solver::HelmholtzSolver;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    /// Solver and thread count, e.g. `cbs-4t`.
    pub backend: String,
    /// `single` or `batch`.
    pub mode: String,
    pub runs: usize,
    pub solves_per_run: usize,
    /// Per-solve wall time over runs, seconds.
    pub mean_s: f64,
    pub std_s: f64,
}

pub const TABLE_HEADER: &str = "backend\tmode\truns\tsolves_per_run\tper_solve_s (mean ± std)";

impl BenchRow {
    pub fn table_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.6} ± {:.6}",
            self.backend, self.mode, self.runs, self.solves_per_run, self.mean_s, self.std_s
        )
    }
}

/// Sample mean and standard deviation (zero for a single sample).
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Times phantom 0 of `config` on each pool size in `threads`.
pub fn run(config: &RunConfig, threads: &[usize]) -> Result<Vec<BenchRow>> {
    let c = gen_phantom(&config.phantom_spec(0)?)?;
    let solver = HelmholtzSolver::new(&c, config.omega(), &config.solver_options()?)?;
    let ring = config.ring()?;
    let plan = config.plan(&ring)?;
    let batch = config.bench.batch_sources.unwrap_or(plan.len()).clamp(1, plan.len());
    let sources = plan.source_indices[..batch]
        .iter()
        .map(|&k| make_point_source(solver.interior_grid(), ring.position(k), plan.amplitude))
        .collect::<Result<Vec<_>>>()?;
    let repeats = config.bench.repeats.max(1);

    let mut rows = Vec::new();
    for &t in threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        let backend = format!("cbs-{t}t");
        let single = pool.install(|| -> Result<Vec<f64>> {
            (0..repeats)
                .map(|_| {
                    let start = Instant::now();
                    solver.solve(&sources[0])?;
                    Ok(start.elapsed().as_secs_f64())
                })
                .collect()
        })?;
        let batched = pool.install(|| -> Result<Vec<f64>> {
            (0..repeats)
                .map(|_| {
                    let start = Instant::now();
                    sources.par_iter().map(|rho| solver.solve(rho).map(|_| ())).collect::<Result<()>>()?;
                    Ok(start.elapsed().as_secs_f64() / batch as f64)
                })
                .collect()
        })?;
        for (mode, samples, per_run) in [("single", single, 1), ("batch", batched, batch)] {
            let (mean_s, std_s) = mean_std(&samples);
            rows.push(BenchRow { backend: backend.clone(), mode: mode.into(), runs: repeats, solves_per_run: per_run, mean_s, std_s });
        }
    }
    Ok(rows)
}
