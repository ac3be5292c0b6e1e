//! On-disk formats: field containers, run configs, measurement sets and
//! training datasets.

pub mod config;
pub mod container;
pub mod dataset;

use std::path::Path;

use crate::array::MeasurementSet;
use crate::error::{Error, Result};

pub use config::RunConfig;
pub use container::{read_complex_field, read_real_field, write_complex_field, write_real_field, Dtype, FieldContainer, Payload};
pub use dataset::{gen_dataset, verify_dataset, Manifest};

/// JSON with full-precision floats, so a round trip is exact.
pub fn write_measurements(path: &Path, y: &MeasurementSet) -> Result<()> {
    let text = serde_json::to_string(y).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    let text = std::fs::read_to_string(path)?;
    let y: MeasurementSet = serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("measurement file: {e}")))?;
    y.validate()?;
    Ok(y)
}
