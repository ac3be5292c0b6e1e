//! TOML run configuration. Unknown keys are rejected and every physical
//! quantity names its unit in the key.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::{MeasurementSet, SourcePlan, TransducerRing};
use crate::boundary::{BoundarySpec, DEFAULT_STRENGTH, DEFAULT_WIDTH_WAVELENGTHS};
use crate::error::{Error, Result};
use crate::field::Grid2D;
use crate::fwi::{FwiOptions, PenaltyKind, Regularization};
use crate::lbfgs::LbfgsOptions;
use crate::medium::{SoundSpeedMap, WATER_SPEED};
use crate::phantom::{InclusionParams, PhantomKind, PhantomSpec};
use crate::solver::{SolverOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub wave: WaveConfig,
    #[serde(default)]
    pub ring: RingConfig,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub dx_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub frequency_hz: f64,
    #[serde(default = "water")]
    pub background_speed_m_per_s: f64,
}

fn water() -> f64 {
    WATER_SPEED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingConfig {
    pub count: usize,
    /// Explicit radius; otherwise `radius_fraction` of the half-extent.
    pub radius_m: Option<f64>,
    pub radius_fraction: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self { count: 32, radius_m: None, radius_fraction: 0.47 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    /// Every `stride`-th transducer fires, unless `source_indices` is given.
    pub stride: usize,
    pub source_indices: Option<Vec<usize>>,
    /// Integrated source strength.
    pub amplitude: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { stride: 1, source_indices: None, amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub width_wavelengths: f64,
    pub strength_np: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { width_wavelengths: DEFAULT_WIDTH_WAVELENGTHS, strength_np: DEFAULT_STRENGTH }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub kind: PhantomKind,
    pub count: usize,
    /// Phantom `i` uses `seed + i`.
    pub seed: u64,
    pub organ_radius_fraction: f64,
    pub inclusion_count: usize,
    pub inclusion_contrast_fraction: f64,
    pub inclusion_radius_fraction: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        let inc = InclusionParams::default();
        Self {
            kind: PhantomKind::BreastLike,
            count: 1,
            seed: 0,
            organ_radius_fraction: 0.6,
            inclusion_count: inc.count,
            inclusion_contrast_fraction: inc.contrast,
            inclusion_radius_fraction: inc.radius_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioned: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, preconditioned: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Absent means noise-free.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    /// Defaults to the background speed.
    pub initial_speed_m_per_s: Option<f64>,
    /// Gap between the ring and the edge of the updated disk.
    pub mask_margin_wavelengths: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub first_step_max_change_m_per_s: f64,
    pub relative_loss_floor: f64,
    pub regularization: PenaltyKind,
    /// Fixed penalty weight. When absent the weight follows from the noise
    /// level and `prior_scale_m_per_s`.
    pub regularization_weight: Option<f64>,
    /// Typical size of a neighbor difference in the unknown medium.
    pub prior_scale_m_per_s: f64,
    pub tv_smoothing_m_per_s: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        let fwi = FwiOptions::default();
        Self {
            initial_speed_m_per_s: None,
            mask_margin_wavelengths: 1.25,
            max_iter: fwi.lbfgs.max_iter,
            memory: fwi.lbfgs.memory,
            grad_tol: fwi.lbfgs.grad_tol,
            first_step_max_change_m_per_s: fwi.lbfgs.first_step_max_change,
            relative_loss_floor: fwi.relative_loss_floor,
            regularization: PenaltyKind::None,
            regularization_weight: None,
            prior_scale_m_per_s: 7.8,
            tv_smoothing_m_per_s: fwi.regularization.tv_smoothing_m_per_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub repeats: usize,
    /// Sources per batched run; all planned sources when absent.
    pub batch_sources: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { repeats: 5, batch_sources: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    /// Minimal config with every optional table at its default.
    pub fn new(grid: GridConfig, frequency_hz: f64) -> Self {
        Self {
            grid,
            wave: WaveConfig { frequency_hz, background_speed_m_per_s: WATER_SPEED },
            ring: RingConfig::default(),
            plan: PlanConfig::default(),
            boundary: BoundaryConfig::default(),
            phantom: PhantomConfig::default(),
            solver: SolverConfig::default(),
            noise: NoiseConfig::default(),
            inversion: InversionConfig::default(),
            bench: BenchConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("config file {} not found", path.display())),
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the normalized document, so formatting and key order do
    /// not matter.
    pub fn checksum(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Builds every derived object once to surface errors early.
    pub fn validate(&self) -> Result<()> {
        let f = self.wave.frequency_hz;
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Config(format!("frequency_hz = {f} must be positive")));
        }
        let c0 = self.wave.background_speed_m_per_s;
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Config(format!("background_speed_m_per_s = {c0} must be positive")));
        }
        let grid = self.grid()?;
        let ring = self.ring()?;
        crate::array::check_ring_inside(&grid, &ring)?;
        self.plan(&ring)?;
        if self.phantom.count > 0 {
            let spec = self.phantom_spec(0)?;
            spec.validate()?;
            spec.check_inside_ring(&ring)?;
        }
        if self.bench.repeats == 0 {
            return Err(Error::Config("bench.repeats must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::centered(self.grid.nx, self.grid.ny, self.grid.dx_m)
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.wave.frequency_hz
    }

    pub fn wavelength(&self) -> f64 {
        self.wave.background_speed_m_per_s / self.wave.frequency_hz
    }

    pub fn ring(&self) -> Result<TransducerRing> {
        let grid = self.grid()?;
        let (w, h) = grid.extent();
        let radius = self.ring.radius_m.unwrap_or(self.ring.radius_fraction * w.min(h));
        TransducerRing::new(grid.center(), radius, self.ring.count)
    }

    pub fn plan(&self, ring: &TransducerRing) -> Result<SourcePlan> {
        let amp = Complex64::new(self.plan.amplitude, 0.0);
        match &self.plan.source_indices {
            Some(idx) => SourcePlan::new(idx.clone(), amp, ring),
            None => {
                let mut plan = SourcePlan::every_nth(ring, self.plan.stride)?;
                plan.amplitude = amp;
                Ok(plan)
            }
        }
    }

    pub fn boundary(&self) -> Result<BoundarySpec> {
        Ok(BoundarySpec::with_wavelengths(
            &self.grid()?,
            self.wavelength(),
            self.boundary.width_wavelengths,
            self.boundary.strength_np,
        ))
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        Ok(SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            boundary: Some(self.boundary()?),
            preconditioned: self.solver.preconditioned,
        })
    }

    /// Spec of phantom number `index`.
    pub fn phantom_spec(&self, index: usize) -> Result<PhantomSpec> {
        let p = &self.phantom;
        let mut spec = PhantomSpec::new(p.kind, self.grid()?, p.seed.wrapping_add(index as u64));
        spec.c0 = self.wave.background_speed_m_per_s;
        spec.organ_radius_fraction = p.organ_radius_fraction;
        spec.inclusions = InclusionParams {
            count: p.inclusion_count,
            contrast: p.inclusion_contrast_fraction,
            radius_fraction: p.inclusion_radius_fraction,
        };
        Ok(spec)
    }

    pub fn initial_model(&self) -> Result<SoundSpeedMap> {
        let c0 = self.wave.background_speed_m_per_s;
        let init = self.inversion.initial_speed_m_per_s.unwrap_or(c0);
        SoundSpeedMap::new(crate::field::RealField::filled(self.grid()?, init), c0, None)
    }

    pub fn inversion_mask(&self) -> Result<Vec<bool>> {
        let margin = self.inversion.mask_margin_wavelengths * self.wavelength();
        Ok(crate::fwi::FwiProblem::disk_mask(&self.grid()?, &self.ring()?, margin))
    }

    /// Optimizer settings. The penalty weight follows the noise level
    /// recorded in `observed` unless fixed in the config.
    pub fn fwi_options(&self, observed: &MeasurementSet) -> FwiOptions {
        let inv = &self.inversion;
        let weight = inv.regularization_weight.unwrap_or_else(|| {
            observed
                .noise_variance()
                .map_or(0.0, |s2| Regularization::map_weight(inv.regularization, s2, inv.prior_scale_m_per_s))
        });
        FwiOptions {
            lbfgs: LbfgsOptions {
                max_iter: inv.max_iter,
                memory: inv.memory,
                grad_tol: inv.grad_tol,
                first_step_max_change: inv.first_step_max_change_m_per_s,
                ..LbfgsOptions::default()
            },
            relative_loss_floor: inv.relative_loss_floor,
            regularization: Regularization {
                kind: inv.regularization,
                weight,
                tv_smoothing_m_per_s: inv.tv_smoothing_m_per_s,
            },
            keep_snapshots: false,
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[grid]
nx = 64
ny = 64
dx_m = 3.75e-4

[wave]
frequency_hz = 5e5

[ring]
count = 16
"#;

    #[test]
    fn parses_with_defaults_and_rejects_unknown_keys() {
        let cfg = RunConfig::parse(SMALL).unwrap();
        assert_eq!(cfg.ring.count, 16);
        assert_eq!(cfg.wave.background_speed_m_per_s, 1500.0);
        assert_eq!(cfg.plan(&cfg.ring().unwrap()).unwrap().len(), 16);
        let bad = format!("{SMALL}\n[solver]\ntolerance = 1e-3\n");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
        let unitless = SMALL.replace("dx_m", "dx");
        assert!(matches!(RunConfig::parse(&unitless), Err(Error::Config(_))));
    }

    #[test]
    fn checksum_ignores_formatting() {
        let a = RunConfig::parse(SMALL).unwrap();
        let b = RunConfig::parse(&SMALL.replace("nx = 64", "nx=64   # cells")).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        let c = RunConfig::parse(&SMALL.replace("count = 16", "count = 17")).unwrap();
        assert_ne!(a.checksum(), c.checksum());
        assert_eq!(RunConfig::parse(&a.to_toml()).unwrap(), a);
    }

    #[test]
    fn missing_file_is_a_config_error() {
        let e = RunConfig::load(Path::new("/definitely/not/here.toml")).unwrap_err();
        assert_eq!(e.category(), "config");
    }
}
