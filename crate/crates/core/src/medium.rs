use crate::error::{Error, Result};
use crate::field::{Grid2D, RealField};

/// Water, m/s.
pub const WATER_SPEED: f64 = 1500.0;

/// Sound-speed distribution `c(x)` in m/s with a constant background `c0`.
///
/// When a domain-of-interest mask is present, every cell outside it holds
/// exactly `c0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundSpeedMap {
    field: RealField,
    c0: f64,
    doi_mask: Option<Vec<bool>>,
}

impl SoundSpeedMap {
    pub fn new(field: RealField, c0: f64, doi_mask: Option<Vec<bool>>) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidArgument(format!("background speed {c0} must be positive")));
        }
        if let Some(k) = field.values().iter().position(|&c| c <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sound speed {} at index {k} is not positive",
                field.values()[k]
            )));
        }
        if let Some(mask) = &doi_mask {
            if mask.len() != field.grid().len() {
                return Err(Error::InvalidArgument(format!(
                    "mask has {} cells, grid has {}",
                    mask.len(),
                    field.grid().len()
                )));
            }
            if let Some(k) = mask
                .iter()
                .zip(field.values())
                .position(|(&inside, &c)| !inside && c != c0)
            {
                return Err(Error::InvalidArgument(format!(
                    "cell {k} outside the domain of interest has speed {} != c0 = {c0}",
                    field.values()[k]
                )));
            }
        }
        Ok(Self { field, c0, doi_mask })
    }

    pub fn homogeneous(grid: Grid2D, c0: f64) -> Result<Self> {
        Self::new(RealField::filled(grid, c0), c0, None)
    }

    pub fn grid(&self) -> &Grid2D {
        self.field.grid()
    }

    pub fn field(&self) -> &RealField {
        &self.field
    }

    pub fn speeds(&self) -> &[f64] {
        self.field.values()
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn doi_mask(&self) -> Option<&[bool]> {
        self.doi_mask.as_deref()
    }

    /// Replaces the speed values, keeping `c0` and the mask.
    pub fn with_speeds(&self, speeds: Vec<f64>) -> Result<Self> {
        Self::new(RealField::new(*self.grid(), speeds)?, self.c0, self.doi_mask.clone())
    }

    pub fn is_homogeneous(&self) -> bool {
        self.speeds().iter().all(|&c| c == self.c0)
    }

    /// `(ω / c(x))²` per cell.
    pub fn wavenumber_sq(&self, omega: f64) -> Vec<f64> {
        self.speeds().iter().map(|c| (omega / c).powi(2)).collect()
    }
}
