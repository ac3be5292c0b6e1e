//! Dataset of (sound speed, wavefield) pairs for surrogate training.
//!
//! Directory layout:
//!
//! ```text
//! config.toml               normalized copy of the run config
//! phantoms/pNNNN.fld        sound speed, real32
//! u_in/sNNNN.fld            homogeneous field per source, complex64
//! fields/pNNNN_sNNNN.fld    total field, complex64
//! manifest.json             written last
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, RunConfig};
use super::container::FieldContainer;
use crate::array::{make_point_source, ring_positions};
use crate::error::{Error, Result};
use crate::field::{ComplexField, Point};
use crate::medium::SoundSpeedMap;
use crate::phantom::{gen_phantom, PhantomKind};
use crate::solver::HelmholtzSolver;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "state")]
pub enum RecordStatus {
    Ok,
    Failed { category: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the dataset directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomEntry {
    pub id: usize,
    pub kind: PhantomKind,
    pub seed: u64,
    pub speed: FileEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UInEntry {
    pub source_index: usize,
    pub field: FileEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub phantom_id: usize,
    pub source_index: usize,
    pub source_position: Point,
    pub omega_rad_per_s: f64,
    pub speed_path: String,
    pub u_in_path: String,
    /// Absent when the solve failed.
    pub field: Option<FileEntry>,
    pub phantom_seed: u64,
    pub solver_tol: f64,
    pub iterations: usize,
    pub code_version: String,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_sha256: String,
    pub nx: usize,
    pub ny: usize,
    pub dx_m: f64,
    pub omega_rad_per_s: f64,
    pub phantoms: Vec<PhantomEntry>,
    pub u_in: Vec<UInEntry>,
    pub records: Vec<DatasetRecord>,
    /// Ids of records whose solve converged.
    pub valid: Vec<String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

/// Writes `container` under `dir/rel` and returns its entry.
fn store(dir: &Path, rel: String, container: &FieldContainer) -> Result<FileEntry> {
    let bytes = container.to_bytes();
    fs::write(dir.join(&rel), &bytes)?;
    Ok(FileEntry { path: rel, sha256: hex(&Sha256::digest(&bytes)) })
}

fn narrow(field: &ComplexField) -> Result<FieldContainer> {
    Ok(FieldContainer::from_complex(field)?.narrowed())
}

/// Field of source `source_index` in the homogeneous background.
pub fn homogeneous_field(config: &RunConfig, source_index: usize) -> Result<ComplexField> {
    let grid = config.grid()?;
    let c = SoundSpeedMap::homogeneous(grid, config.wave.background_speed_m_per_s)?;
    let solver = HelmholtzSolver::new(&c, config.omega(), &config.solver_options()?)?;
    solve_source(&solver, config, source_index).map(|(u, _)| u)
}

fn solve_source(solver: &HelmholtzSolver, config: &RunConfig, k: usize) -> Result<(ComplexField, usize)> {
    let ring = config.ring()?;
    let plan = config.plan(&ring)?;
    let rho = make_point_source(solver.interior_grid(), ring.position(k), plan.amplitude)?;
    let (u, report) = solver.solve(&rho)?;
    if !report.converged {
        return Err(Error::NotConverged { source_index: k, residual: report.final_residual() });
    }
    Ok((u, report.iterations))
}

/// Generates every phantom and every (phantom, source) record under `dir`.
pub fn gen_dataset(config: &RunConfig, dir: &Path) -> Result<Manifest> {
    config.validate()?;
    for sub in ["phantoms", "u_in", "fields"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    fs::write(dir.join("config.toml"), config.to_toml())?;
    let grid = config.grid()?;
    let ring = config.ring()?;
    let plan = config.plan(&ring)?;
    let positions = ring_positions(&ring);
    let omega = config.omega();
    let options = config.solver_options()?;

    let background = SoundSpeedMap::homogeneous(grid, config.wave.background_speed_m_per_s)?;
    let free = HelmholtzSolver::new(&background, omega, &options)?;
    let u_in = plan
        .source_indices
        .par_iter()
        .map(|&k| {
            let (u, _) = solve_source(&free, config, k)?;
            Ok(UInEntry { source_index: k, field: store(dir, format!("u_in/s{k:04}.fld"), &narrow(&u)?)? })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_phantom = (0..config.phantom.count)
        .into_par_iter()
        .map(|p| -> Result<(PhantomEntry, Vec<DatasetRecord>)> {
            let spec = config.phantom_spec(p)?;
            let c = gen_phantom(&spec)?;
            let speed = FieldContainer::from_real(c.field())?.narrowed();
            let entry = PhantomEntry { id: p, kind: spec.kind, seed: spec.seed, speed: store(dir, format!("phantoms/p{p:04}.fld"), &speed)? };
            let solver = HelmholtzSolver::new(&c, omega, &options)?;
            let records = plan
                .source_indices
                .par_iter()
                .map(|&k| {
                    let id = format!("p{p:04}_s{k:04}");
                    let (field, iterations, status) = match solve_source(&solver, config, k) {
                        Ok((u, its)) => (Some(store(dir, format!("fields/{id}.fld"), &narrow(&u)?)?), its, RecordStatus::Ok),
                        Err(e) => (None, 0, RecordStatus::Failed { category: e.category().into(), message: e.to_string() }),
                    };
                    Ok(DatasetRecord {
                        id,
                        phantom_id: p,
                        source_index: k,
                        source_position: positions[k],
                        omega_rad_per_s: omega,
                        speed_path: entry.speed.path.clone(),
                        u_in_path: format!("u_in/s{k:04}.fld"),
                        field,
                        phantom_seed: spec.seed,
                        solver_tol: options.tol,
                        iterations,
                        code_version: CODE_VERSION.into(),
                        status,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((entry, records))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut phantoms = Vec::new();
    let mut records = Vec::new();
    for (entry, recs) in per_phantom {
        phantoms.push(entry);
        records.extend(recs);
    }
    let valid = records.iter().filter(|r| r.status == RecordStatus::Ok).map(|r| r.id.clone()).collect();
    let manifest = Manifest {
        code_version: CODE_VERSION.into(),
        config_sha256: config.checksum(),
        nx: grid.nx(),
        ny: grid.ny(),
        dx_m: grid.dx(),
        omega_rad_per_s: omega,
        phantoms,
        u_in,
        records,
        valid,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Re-hashes every referenced file and counts valid records whose field,
/// speed map and `u_in` are all present and intact.
pub fn verify_dataset(dir: &Path) -> Result<usize> {
    let manifest = Manifest::load(dir)?;
    let check = |entry: &FileEntry| -> Result<bool> {
        let path: PathBuf = dir.join(&entry.path);
        Ok(path.is_file() && sha256_file(&path)? == entry.sha256)
    };
    let speeds: Vec<bool> = manifest.phantoms.iter().map(|p| check(&p.speed)).collect::<Result<_>>()?;
    let u_in: Vec<(usize, bool)> = manifest.u_in.iter().map(|u| Ok((u.source_index, check(&u.field)?))).collect::<Result<_>>()?;
    let mut count = 0;
    for r in manifest.records.iter().filter(|r| manifest.valid.contains(&r.id)) {
        let speed_ok = speeds.get(r.phantom_id).copied().unwrap_or(false);
        let u_in_ok = u_in.iter().any(|&(k, ok)| k == r.source_index && ok);
        let field_ok = match &r.field {
            Some(f) => check(f)?,
            None => false,
        };
        if speed_ok && u_in_ok && field_ok {
            count += 1;
        }
    }
    Ok(count)
}
