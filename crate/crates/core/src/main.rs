use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use usct::array::{add_noise, make_point_source, simulate_observation};
use usct::field::{ComplexField, Point};
use usct::fwi::{reconstruct, FwiProblem};
use usct::io::{self, RunConfig};
use usct::medium::SoundSpeedMap;
use usct::metrics::{self, MetricReport};
use usct::phantom::{contrast_stats, gen_phantom};
use usct::solver::HelmholtzSolver;
use usct::special::free_space_green;
use usct::{plot, Error, Result};

/// Overrides the worker count; nothing else is read from the environment.
const THREADS_ENV: &str = "USCT_THREADS";

#[derive(Parser)]
#[command(name = "usct", version, about = "Frequency-domain ultrasound tomography: simulation, inversion, datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` from the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let cfg = RunConfig::load(&self.config)?;
        let out = self.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        fs::create_dir_all(&out)?;
        Ok((cfg, out))
    }
}

#[derive(Args)]
struct MediumArg {
    /// Use phantom number N of the config.
    #[arg(long, conflicts_with_all = ["speed", "homogeneous"])]
    phantom: Option<usize>,
    /// Read the sound speed from a field container.
    #[arg(long, conflicts_with = "homogeneous")]
    speed: Option<PathBuf>,
    /// Homogeneous background medium.
    #[arg(long)]
    homogeneous: bool,
}

impl MediumArg {
    fn resolve(&self, cfg: &RunConfig) -> Result<SoundSpeedMap> {
        let c0 = cfg.wave.background_speed_m_per_s;
        if self.homogeneous {
            return SoundSpeedMap::homogeneous(cfg.grid()?, c0);
        }
        if let Some(path) = &self.speed {
            let field = io::read_real_field(path)?;
            field.grid().check_same(&cfg.grid()?, "speed file vs config grid")?;
            return SoundSpeedMap::new(field, c0, None);
        }
        gen_phantom(&cfg.phantom_spec(self.phantom.unwrap_or(0))?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured phantoms as real64 containers.
    GenPhantoms {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Overrides `phantom.count`.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        plot: bool,
    },
    /// One forward solve for a single source.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[command(flatten)]
        medium: MediumArg,
        /// Transducer that fires.
        #[arg(long, default_value_t = 0, conflicts_with = "center")]
        source: usize,
        /// Fire a point source at the cell nearest the grid center instead
        /// of a transducer.
        #[arg(long)]
        center: bool,
        #[arg(long)]
        plot: bool,
    },
    /// Full measurement matrix, optionally with noise.
    Observe {
        #[command(flatten)]
        cfg: ConfigArg,
        #[command(flatten)]
        medium: MediumArg,
        /// Overrides `noise.snr_db`.
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Training pairs for every phantom and source, plus a manifest.
    GenDataset {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Full waveform inversion of a measurement file.
    Reconstruct {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Measurement set written by `observe`.
        #[arg(long)]
        observed: PathBuf,
        /// Ground-truth speed container, for PSNR and SSIM.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Overrides `inversion.max_iter`.
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        plot: bool,
    },
    /// Compare two containers: PSNR and SSIM for real maps, RRMSE for
    /// complex fields.
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// SSIM window side.
        #[arg(long, default_value_t = metrics::DEFAULT_SSIM_WINDOW)]
        window: usize,
    },
    /// Time single and batched forward solves.
    Bench {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Pool sizes to try, e.g. `1,4`.
        #[arg(long, value_delimiter = ',')]
        threads: Option<Vec<usize>>,
        /// Overrides `bench.repeats`.
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Exit status per error category; clap uses 2 for usage errors.
fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 3,
        "io" => 4,
        "format" => 5,
        "invalid-input" => 6,
        "solver" => 7,
        _ => 1,
    }
}

fn fail(e: &Error) -> ExitCode {
    let message = e.to_string().replace(['\n', '\r'], " ");
    eprintln!("error category={} message={message}", e.category());
    ExitCode::from(exit_code(e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenPhantoms { cfg, count, plot } => gen_phantoms(&cfg, count, plot),
        Command::Simulate { cfg, medium, source, center, plot } => simulate(&cfg, &medium, source, center, plot),
        Command::Observe { cfg, medium, snr_db, noise_seed } => observe(&cfg, &medium, snr_db, noise_seed),
        Command::GenDataset { cfg } => {
            let (config, out) = cfg.load()?;
            let manifest = io::gen_dataset(&config, &out)?;
            println!(
                "records {} valid {} manifest {}",
                manifest.records.len(),
                manifest.valid.len(),
                out.join(io::dataset::MANIFEST_FILE).display()
            );
            Ok(())
        }
        Command::Reconstruct { cfg, observed, truth, max_iter, plot } => {
            reconstruct_cmd(&cfg, &observed, truth.as_deref(), max_iter, plot)
        }
        Command::Metrics { reference, estimate, window } => metrics_cmd(&reference, &estimate, window),
        Command::Bench { cfg, threads, repeats } => {
            let (mut config, _) = cfg.load()?;
            if let Some(r) = repeats {
                config.bench.repeats = r.max(1);
            }
            let threads = threads.unwrap_or_else(|| {
                let all = rayon::current_num_threads();
                if all > 1 { vec![1, all] } else { vec![1] }
            });
            println!("{}", usct::bench::TABLE_HEADER);
            for row in usct::bench::run(&config, &threads)? {
                println!("{}", row.table_row());
            }
            Ok(())
        }
    }
}

fn gen_phantoms(cfg: &ConfigArg, count: Option<usize>, plot: bool) -> Result<()> {
    let (config, out) = cfg.load()?;
    let ring = config.ring()?;
    for p in 0..count.unwrap_or(config.phantom.count) {
        let spec = config.phantom_spec(p)?;
        spec.check_inside_ring(&ring)?;
        let c = gen_phantom(&spec)?;
        let path = out.join(format!("phantom_{p:04}.fld"));
        io::write_real_field(&path, c.field())?;
        if plot {
            plot::save_real_field(c.field(), None, &path.with_extension("png"))?;
        }
        let s = contrast_stats(&c);
        println!("{}\tmin {:.2}\tmax {:.2}\tcontrast {:.4}", path.display(), s.min, s.max, s.relative_contrast);
    }
    Ok(())
}

fn simulate(cfg: &ConfigArg, medium: &MediumArg, source: usize, center: bool, plot: bool) -> Result<()> {
    let (config, out) = cfg.load()?;
    let c = medium.resolve(&config)?;
    let ring = config.ring()?;
    if source >= ring.count {
        return Err(Error::InvalidArgument(format!("source {source} out of range for {} transducers", ring.count)));
    }
    let plan = config.plan(&ring)?;
    let solver = HelmholtzSolver::new(&c, config.omega(), &config.solver_options()?)?;
    // A source between cells is a bilinear blur of four deltas, which
    // damps the field by O((k dx)²); the centered option avoids that.
    let g = c.grid();
    let position = if center { g.cell_center(g.nx() / 2, g.ny() / 2) } else { ring.position(source) };
    let rho = make_point_source(c.grid(), position, plan.amplitude)?;
    let (u, report) = solver.solve(&rho)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.converged {
        return Err(Error::NotConverged { source_index: source, residual: report.final_residual() });
    }
    let path = out.join(format!("field_s{source:04}.fld"));
    io::write_complex_field(&path, &u)?;
    println!(
        "field {}\titerations {}\tresidual {:.3e}\ttime {:.3}s",
        path.display(),
        report.iterations,
        report.final_residual(),
        report.wall_time
    );
    if c.is_homogeneous() {
        let k = config.omega() / config.wave.background_speed_m_per_s;
        let lambda = config.wavelength();
        // Largest circle around the source that stays on the interior grid.
        let (lo, (w, h)) = (g.origin(), g.extent());
        let half = 0.5 * g.dx();
        let inner = [position.x - (lo.x - half), lo.x - half + w - position.x, position.y - (lo.y - half), lo.y - half + h - position.y]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let e = oracle_rrmse(&u, position, k, plan.amplitude, 3.0 * lambda, inner)?;
        println!("rrmse_vs_analytic {e:.6e}\tannulus {:.3e}..{:.3e} m", 3.0 * lambda, inner);
    }
    if plot {
        plot::save_complex_real_part(&u, &path.with_extension("png"))?;
        plot::save_real_field(c.field(), None, &out.join("speed.png"))?;
    }
    Ok(())
}

/// RRMSE of `u` against `amplitude · (i/4) H0(k r)` over the annulus
/// `r_min ≤ r ≤ r_max` around `source`.
fn oracle_rrmse(u: &ComplexField, source: Point, k: f64, amplitude: Complex64, r_min: f64, r_max: f64) -> Result<f64> {
    let g = u.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let r = g.cell_center(i, j).distance(&source);
            if r >= r_min && r <= r_max {
                let exact = amplitude * free_space_green(k, r);
                num += (u.get(i, j) - exact).norm_sqr();
                den += exact.norm_sqr();
            }
        }
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("oracle annulus contains no cells".into()));
    }
    Ok((num / den).sqrt())
}

fn observe(cfg: &ConfigArg, medium: &MediumArg, snr_db: Option<f64>, noise_seed: Option<u64>) -> Result<()> {
    let (config, out) = cfg.load()?;
    let c = medium.resolve(&config)?;
    let ring = config.ring()?;
    let plan = config.plan(&ring)?;
    let y = simulate_observation(&c, &ring, &plan, config.omega(), &config.solver_options()?)?;
    if let Some(k) = y.row_converged.iter().position(|ok| !ok) {
        return Err(Error::NotConverged { source_index: plan.source_indices[k], residual: f64::NAN });
    }
    let y = match snr_db.or(config.noise.snr_db) {
        Some(snr) => add_noise(&y, snr, noise_seed.unwrap_or(config.noise.seed))?,
        None => y,
    };
    let path = out.join("measurements.json");
    io::write_measurements(&path, &y)?;
    io::write_real_field(&out.join("truth.fld"), c.field())?;
    println!("measurements {}\trows {}\tcols {}", path.display(), y.rows(), y.cols());
    Ok(())
}

fn reconstruct_cmd(cfg: &ConfigArg, observed: &Path, truth: Option<&Path>, max_iter: Option<usize>, plot: bool) -> Result<()> {
    let (mut config, out) = cfg.load()?;
    if let Some(n) = max_iter {
        config.inversion.max_iter = n;
    }
    let y = io::read_measurements(observed)?;
    let options = config.fwi_options(&y);
    let problem = FwiProblem::new(y, config.initial_model()?, config.inversion_mask()?, config.solver_options()?, options)?;
    let (rec, trace) = reconstruct(&problem)?;
    io::write_real_field(&out.join("reconstruction.fld"), rec.field())?;
    fs::write(out.join("trace.tsv"), trace.to_table())?;
    println!(
        "iterations {}\tloss {:.6e} -> {:.6e}\ttermination {:?}\ttime {:.1}s",
        trace.losses.len() - 1,
        trace.losses[0],
        trace.losses.last().copied().unwrap_or(f64::NAN),
        trace.termination,
        trace.wall_time
    );
    let truth = truth.map(io::read_real_field).transpose()?;
    if let Some(t) = &truth {
        println!("{}", metrics::TABLE_HEADER);
        for (est, label) in [(problem.c_init.field(), "initial"), (rec.field(), "reconstruction")] {
            for r in metrics::image_reports(t, est, ("truth", label))? {
                println!("{}", r.table_row());
            }
        }
    }
    if plot {
        let range = truth.as_ref().map(|t| (t.min(), t.max()));
        plot::save_real_field(rec.field(), range, &out.join("reconstruction.png"))?;
        plot::save_loss_curve(&trace.losses, &out.join("loss.png"))?;
        if let Some(t) = &truth {
            plot::save_real_field(t, range, &out.join("truth.png"))?;
        }
    }
    Ok(())
}

fn metrics_cmd(reference: &Path, estimate: &Path, window: usize) -> Result<()> {
    let a = io::FieldContainer::read(reference)?;
    let b = io::FieldContainer::read(estimate)?;
    let labels = (reference.display().to_string(), estimate.display().to_string());
    println!("{}", metrics::TABLE_HEADER);
    if a.dtype().is_complex() || b.dtype().is_complex() {
        let value = metrics::rrmse(&a.to_complex_field()?, &b.to_complex_field()?)?;
        let report = MetricReport {
            name: "rrmse".into(),
            value,
            data_range: None,
            window: None,
            sigma: None,
            reference: labels.0,
            estimate: labels.1,
        };
        println!("{}", report.table_row());
        return Ok(());
    }
    let (t, e) = (a.to_real_field()?, b.to_real_field()?);
    let range = metrics::data_range_of(&t);
    let range = if range > 0.0 { range } else { 1.0 };
    let base = |name: &str, value: f64, window: Option<usize>| MetricReport {
        name: name.into(),
        value,
        data_range: Some(range),
        window,
        sigma: window.map(|_| metrics::DEFAULT_SSIM_SIGMA),
        reference: labels.0.clone(),
        estimate: labels.1.clone(),
    };
    println!("{}", base("psnr", metrics::psnr(&t, &e, range)?, None).table_row());
    println!("{}", base("ssim", metrics::ssim(&t, &e, window, range)?, Some(window)).table_row());
    Ok(())
}
