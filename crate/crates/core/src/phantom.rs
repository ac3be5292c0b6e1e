//! Seeded parametric sound-speed phantoms: breast-like, brain-like and a
//! disk-with-inclusions test object.
//!
//! Tissue speed intervals are configuration. The defaults below are common
//! literature values for soft tissue, not measurements.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::TransducerRing;
use crate::error::{Error, Result};
use crate::field::{Grid2D, Point, RealField};
use crate::medium::{SoundSpeedMap, WATER_SPEED};

/// Sub-samples per cell side used to anti-alias organ and region edges.
const SUPERSAMPLE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    BreastLike,
    BrainLike,
    InclusionTest,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "breast-like" => Ok(Self::BreastLike),
            "brain-like" => Ok(Self::BrainLike),
            "inclusion-test" => Ok(Self::InclusionTest),
            other => Err(Error::InvalidArgument(format!("unknown phantom kind '{other}'"))),
        }
    }
}

/// Closed speed interval, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedRange {
    pub min_m_per_s: f64,
    pub max_m_per_s: f64,
}

impl SpeedRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min_m_per_s: min, max_m_per_s: max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min_m_per_s > 0.0 && self.min_m_per_s <= self.max_m_per_s && self.max_m_per_s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} range [{}, {}] is not a positive interval",
                self.min_m_per_s, self.max_m_per_s
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.min_m_per_s + (self.max_m_per_s - self.min_m_per_s) * rng.random::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TissueRanges {
    pub fat: SpeedRange,
    pub fibroglandular: SpeedRange,
    /// Region classes of the brain-like phantom, outermost first.
    pub brain: Vec<SpeedRange>,
}

impl Default for TissueRanges {
    fn default() -> Self {
        Self {
            fat: SpeedRange::new(1420.0, 1470.0),
            fibroglandular: SpeedRange::new(1510.0, 1580.0),
            brain: vec![
                SpeedRange::new(1480.0, 1510.0),
                SpeedRange::new(1520.0, 1560.0),
                SpeedRange::new(1540.0, 1580.0),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InclusionParams {
    /// 0 to 3.
    pub count: usize,
    /// Relative speed change of the first inclusion; signs alternate.
    pub contrast: f64,
    /// Inclusion radius as a fraction of the organ radius.
    pub radius_fraction: f64,
}

impl Default for InclusionParams {
    fn default() -> Self {
        Self { count: 2, contrast: 0.03, radius_fraction: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub grid: Grid2D,
    pub c0: f64,
    pub tissue: TissueRanges,
    /// Organ radius over the grid half-extent (smaller side).
    pub organ_radius_fraction: f64,
    pub inclusions: InclusionParams,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn new(kind: PhantomKind, grid: Grid2D, seed: u64) -> Self {
        Self {
            kind,
            grid,
            c0: WATER_SPEED,
            tissue: TissueRanges::default(),
            organ_radius_fraction: 0.6,
            inclusions: InclusionParams::default(),
            seed,
        }
    }

    pub fn organ_radius(&self) -> f64 {
        let (w, h) = self.grid.extent();
        0.5 * w.min(h) * self.organ_radius_fraction
    }

    /// Largest distance from the grid center any organ cell can reach.
    pub fn max_organ_extent(&self) -> f64 {
        self.organ_radius() * (1.0 + BREAST_LOBE_AMPLITUDE * BREAST_LOBES as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidArgument(format!("background speed {} must be positive", self.c0)));
        }
        self.tissue.fat.validate("fat")?;
        self.tissue.fibroglandular.validate("fibroglandular")?;
        if self.tissue.brain.is_empty() {
            return Err(Error::InvalidArgument("brain phantom needs at least one tissue class".into()));
        }
        for (k, r) in self.tissue.brain.iter().enumerate() {
            r.validate(&format!("brain class {k}"))?;
        }
        if !(self.organ_radius_fraction > 0.0) {
            return Err(Error::InvalidArgument("organ radius must be positive".into()));
        }
        let (w, h) = self.grid.extent();
        let room = 0.5 * w.min(h) - self.grid.dx();
        if self.max_organ_extent() > room {
            return Err(Error::InvalidArgument(format!(
                "organ reaches {:.4} m from the center but the domain leaves {:.4} m before the absorbing layer",
                self.max_organ_extent(),
                room
            )));
        }
        let inc = &self.inclusions;
        if inc.count > 3 {
            return Err(Error::InvalidArgument(format!("at most 3 inclusions, got {}", inc.count)));
        }
        if !(inc.contrast.abs() < 0.5 && inc.radius_fraction > 0.0 && inc.radius_fraction <= 0.45) {
            return Err(Error::InvalidArgument(
                "inclusion contrast must be below 50% and radius fraction within (0, 0.45]".into(),
            ));
        }
        Ok(())
    }

    /// Errors unless the organ stays strictly inside the transducer ring.
    pub fn check_inside_ring(&self, ring: &TransducerRing) -> Result<()> {
        let offset = ring.center.distance(&self.grid.center());
        if self.max_organ_extent() + offset >= ring.radius {
            return Err(Error::InvalidArgument(format!(
                "organ (radius up to {:.4} m) does not fit inside the {:.4} m ring",
                self.max_organ_extent(),
                ring.radius
            )));
        }
        Ok(())
    }
}

const BREAST_LOBES: usize = 3;
const BREAST_LOBE_AMPLITUDE: f64 = 0.05;

/// A speed value over an organ, with `None` outside it.
type Painter = Box<dyn Fn(Point) -> Option<f64>>;

pub fn gen_phantom(spec: &PhantomSpec) -> Result<SoundSpeedMap> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let center = spec.grid.center();
    let painter = match spec.kind {
        PhantomKind::BreastLike => breast(spec, center, &mut rng),
        PhantomKind::BrainLike => brain(spec, center, &mut rng),
        PhantomKind::InclusionTest => inclusions(spec, center, &mut rng),
    };
    rasterize(&spec.grid, spec.c0, &painter)
}

/// Averages the painter over sub-samples of each cell. Cells untouched by
/// the organ hold exactly `c0` and fall outside the mask.
fn rasterize(grid: &Grid2D, c0: f64, painter: &Painter) -> Result<SoundSpeedMap> {
    let n = SUPERSAMPLE;
    let mut mask = vec![false; grid.len()];
    let field = RealField::from_fn(*grid, |i, j, p| {
        let mut total = 0.0;
        let mut inside = false;
        for a in 0..n {
            for b in 0..n {
                let sub = Point::new(
                    p.x + grid.dx() * ((a as f64 + 0.5) / n as f64 - 0.5),
                    p.y + grid.dx() * ((b as f64 + 0.5) / n as f64 - 0.5),
                );
                total += match painter(sub) {
                    Some(c) => {
                        inside = true;
                        c
                    }
                    None => c0,
                };
            }
        }
        mask[grid.index(i, j)] = inside;
        if inside {
            total / (n * n) as f64
        } else {
            c0
        }
    })?;
    SoundSpeedMap::new(field, c0, Some(mask))
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Closed curve `r(θ) = r0 (1 + Σ a_m cos(mθ + φ_m))`, `m = 2..`.
#[derive(Clone)]
struct Lobed {
    r0: f64,
    terms: Vec<(f64, f64)>,
}

impl Lobed {
    fn random(r0: f64, lobes: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> Self {
        let terms = (0..lobes)
            .map(|_| (amplitude * (2.0 * rng.random::<f64>() - 1.0), 2.0 * PI * rng.random::<f64>()))
            .collect();
        Self { r0, terms }
    }

    fn radius(&self, theta: f64) -> f64 {
        self.r0
            * (1.0
                + self
                    .terms
                    .iter()
                    .enumerate()
                    .map(|(m, (a, phi))| a * ((m as f64 + 2.0) * theta + phi).cos())
                    .sum::<f64>())
    }

    /// Distance from the center relative to the boundary radius there.
    fn level(&self, dx: f64, dy: f64) -> f64 {
        dx.hypot(dy) / self.radius(dy.atan2(dx))
    }
}

fn breast(spec: &PhantomSpec, center: Point, rng: &mut ChaCha8Rng) -> Painter {
    let r0 = spec.organ_radius();
    let outline = Lobed::random(r0, BREAST_LOBES, BREAST_LOBE_AMPLITUDE, rng);
    let fat = spec.tissue.fat.draw(rng);
    let blob_count = rng.random_range(2..=8);
    let blobs: Vec<(Point, f64, f64, f64, f64)> = (0..blob_count)
        .map(|_| {
            let rad = 0.6 * r0 * rng.random::<f64>().sqrt();
            let ang = 2.0 * PI * rng.random::<f64>();
            let c = Point::new(center.x + rad * ang.cos(), center.y + rad * ang.sin());
            let a = r0 * (0.12 + 0.18 * rng.random::<f64>());
            let b = a * (0.5 + 0.5 * rng.random::<f64>());
            let rot = PI * rng.random::<f64>();
            (c, a, b, rot, spec.tissue.fibroglandular.draw(rng))
        })
        .collect();
    Box::new(move |p| {
        if outline.level(p.x - center.x, p.y - center.y) > 1.0 {
            return None;
        }
        let mut c = fat;
        for &(bc, a, b, rot, speed) in &blobs {
            let (dx, dy) = (p.x - bc.x, p.y - bc.y);
            let (u, v) = (dx * rot.cos() + dy * rot.sin(), -dx * rot.sin() + dy * rot.cos());
            let d = (u / a).hypot(v / b);
            c += smoothstep(1.0 - d) * (speed - c);
        }
        Some(c)
    })
}

fn brain(spec: &PhantomSpec, center: Point, rng: &mut ChaCha8Rng) -> Painter {
    let r0 = spec.organ_radius();
    let aspect = 0.75 + 0.15 * rng.random::<f64>();
    let tilt = PI * rng.random::<f64>();
    let regions = rng.random_range(3..=6);
    let classes = &spec.tissue.brain;
    // Nested outlines shrinking inward, each with its own speed.
    let layers: Vec<(Lobed, Point, f64)> = (0..regions)
        .map(|k| {
            let scale = 1.0 - 0.7 * k as f64 / regions as f64;
            let amp = if k == 0 { 0.0 } else { 0.08 };
            let shape = Lobed::random(r0 * scale, 2, amp, rng);
            let jitter = if k == 0 { 0.0 } else { 0.08 * r0 * scale };
            let off = Point::new(jitter * (2.0 * rng.random::<f64>() - 1.0), jitter * (2.0 * rng.random::<f64>() - 1.0));
            (shape, off, classes[k % classes.len()].draw(rng))
        })
        .collect();
    Box::new(move |p| {
        let (dx, dy) = (p.x - center.x, p.y - center.y);
        let (u, v) = (dx * tilt.cos() + dy * tilt.sin(), (-dx * tilt.sin() + dy * tilt.cos()) / aspect);
        if layers[0].0.level(u, v) > 1.0 {
            return None;
        }
        let mut c = layers[0].2;
        for (shape, off, speed) in &layers[1..] {
            if shape.level(u - off.x, v - off.y) <= 1.0 {
                c = *speed;
            }
        }
        Some(c)
    })
}

fn inclusions(spec: &PhantomSpec, center: Point, rng: &mut ChaCha8Rng) -> Painter {
    let r0 = spec.organ_radius();
    let params = spec.inclusions;
    let ri = params.radius_fraction * r0;
    let mut placed: Vec<(Point, f64)> = Vec::new();
    let mut attempts = 0;
    while placed.len() < params.count && attempts < 10_000 {
        attempts += 1;
        let rad = (r0 - ri * 1.2) * rng.random::<f64>().sqrt();
        let ang = 2.0 * PI * rng.random::<f64>();
        let p = Point::new(center.x + rad * ang.cos(), center.y + rad * ang.sin());
        if placed.iter().all(|(q, _)| q.distance(&p) > 2.4 * ri) {
            let sign = if placed.len().is_multiple_of(2) { 1.0 } else { -1.0 };
            placed.push((p, spec.c0 * (1.0 + sign * params.contrast)));
        }
    }
    let c0 = spec.c0;
    Box::new(move |p| {
        if p.distance(&center) > r0 {
            return None;
        }
        Some(
            placed
                .iter()
                .find(|(q, _)| q.distance(&p) <= ri)
                .map_or(c0, |&(_, c)| c),
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastStats {
    pub min: f64,
    pub max: f64,
    /// `max |c - c0| / c0`.
    pub relative_contrast: f64,
}

pub fn contrast_stats(c: &SoundSpeedMap) -> ContrastStats {
    let (min, max) = (c.field().min(), c.field().max());
    ContrastStats {
        min,
        max,
        relative_contrast: (max - c.c0()).abs().max((min - c.c0()).abs()) / c.c0(),
    }
}
