//! `USCTFLD1` field container.
//!
//! Layout, all little-endian:
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | ASCII `USCTFLD1`                          |
//! | 8      | 4    | `nx`, u32                                 |
//! | 12     | 4    | `ny`, u32                                 |
//! | 16     | 8    | `dx` in meters, f64                       |
//! | 24     | 1    | dtype code                                |
//! | 25     | ...  | `nx * ny` values, row-major, `x` fastest  |
//!
//! Complex values are interleaved `re, im`. The origin is not stored:
//! readers place the grid centered on zero.

use std::fs;
use std::path::Path;

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid2D, RealField};

pub const MAGIC: &[u8; 8] = b"USCTFLD1";
pub const HEADER_LEN: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    Real32 = 0,
    Complex64 = 1,
    Real64 = 2,
    Complex128 = 3,
}

impl Dtype {
    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => Dtype::Real32,
            1 => Dtype::Complex64,
            2 => Dtype::Real64,
            3 => Dtype::Complex128,
            other => return Err(Error::UnknownDtype(other)),
        })
    }

    /// Bytes per value.
    pub fn width(self) -> usize {
        match self {
            Dtype::Real32 => 4,
            Dtype::Complex64 | Dtype::Real64 => 8,
            Dtype::Complex128 => 16,
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, Dtype::Complex64 | Dtype::Complex128)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Real32(Vec<f32>),
    Complex64(Vec<Complex32>),
    Real64(Vec<f64>),
    Complex128(Vec<Complex64>),
}

impl Payload {
    pub fn dtype(&self) -> Dtype {
        match self {
            Payload::Real32(_) => Dtype::Real32,
            Payload::Complex64(_) => Dtype::Complex64,
            Payload::Real64(_) => Dtype::Real64,
            Payload::Complex128(_) => Dtype::Complex128,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::Real32(v) => v.len(),
            Payload::Complex64(v) => v.len(),
            Payload::Real64(v) => v.len(),
            Payload::Complex128(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A grid shape, spacing and one typed payload.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldContainer {
    pub nx: u32,
    pub ny: u32,
    pub dx: f64,
    pub payload: Payload,
}

impl FieldContainer {
    pub fn new(nx: u32, ny: u32, dx: f64, payload: Payload) -> Result<Self> {
        let needed = nx as usize * ny as usize;
        if payload.len() != needed {
            return Err(Error::InvalidArgument(format!(
                "payload holds {} values, {nx}x{ny} needs {needed}",
                payload.len()
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx = {dx} must be positive")));
        }
        Ok(Self { nx, ny, dx, payload })
    }

    fn shape_of(grid: &Grid2D) -> Result<(u32, u32)> {
        let conv = |n: usize| u32::try_from(n).map_err(|_| Error::InvalidGrid(format!("{n} cells overflow u32")));
        Ok((conv(grid.nx())?, conv(grid.ny())?))
    }

    /// Full double precision.
    pub fn from_real(field: &RealField) -> Result<Self> {
        let (nx, ny) = Self::shape_of(field.grid())?;
        Self::new(nx, ny, field.grid().dx(), Payload::Real64(field.values().to_vec()))
    }

    /// Full double precision.
    pub fn from_complex(field: &ComplexField) -> Result<Self> {
        let (nx, ny) = Self::shape_of(field.grid())?;
        Self::new(nx, ny, field.grid().dx(), Payload::Complex128(field.values().to_vec()))
    }

    /// Single-precision copy. The only lossy conversion, and only on request.
    pub fn narrowed(&self) -> Self {
        let payload = match &self.payload {
            Payload::Real64(v) => Payload::Real32(v.iter().map(|&x| x as f32).collect()),
            Payload::Complex128(v) => Payload::Complex64(v.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect()),
            p => p.clone(),
        };
        Self { payload, ..self.clone() }
    }

    pub fn dtype(&self) -> Dtype {
        self.payload.dtype()
    }

    /// Centered grid of the stored shape.
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::centered(self.nx as usize, self.ny as usize, self.dx)
    }

    /// Widens to a real field. Complex payloads are refused.
    pub fn to_real_field(&self) -> Result<RealField> {
        let values = match &self.payload {
            Payload::Real32(v) => v.iter().map(|&x| x as f64).collect(),
            Payload::Real64(v) => v.clone(),
            _ => return Err(Error::InvalidArgument("container holds a complex field".into())),
        };
        RealField::new(self.grid()?, values)
    }

    /// Widens to a complex field; real payloads get a zero imaginary part.
    pub fn to_complex_field(&self) -> Result<ComplexField> {
        let values = match &self.payload {
            Payload::Real32(v) => v.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect(),
            Payload::Real64(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Payload::Complex64(v) => v.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect(),
            Payload::Complex128(v) => v.clone(),
        };
        ComplexField::new(self.grid()?, values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() * self.dtype().width());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.nx.to_le_bytes());
        out.extend_from_slice(&self.ny.to_le_bytes());
        out.extend_from_slice(&self.dx.to_le_bytes());
        out.push(self.dtype() as u8);
        match &self.payload {
            Payload::Real32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::Real64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::Complex64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            Payload::Complex128(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
        }
        let nx = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let ny = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let dx = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let dtype = Dtype::from_code(bytes[24])?;
        let count = nx as usize * ny as usize;
        let expected = HEADER_LEN + count * dtype.width();
        if bytes.len() != expected {
            return Err(Error::TruncatedPayload { expected, found: bytes.len() });
        }
        let body = &bytes[HEADER_LEN..];
        let f32s = || body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let f64s = || body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let payload = match dtype {
            Dtype::Real32 => Payload::Real32(f32s().collect()),
            Dtype::Real64 => Payload::Real64(f64s().collect()),
            Dtype::Complex64 => {
                let v: Vec<f32> = f32s().collect();
                Payload::Complex64(v.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect())
            }
            Dtype::Complex128 => {
                let v: Vec<f64> = f64s().collect();
                Payload::Complex128(v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
            }
        };
        Self::new(nx, ny, dx, payload)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn write_real_field(path: &Path, field: &RealField) -> Result<()> {
    FieldContainer::from_real(field)?.write(path)
}

pub fn write_complex_field(path: &Path, field: &ComplexField) -> Result<()> {
    FieldContainer::from_complex(field)?.write(path)
}

pub fn read_real_field(path: &Path) -> Result<RealField> {
    FieldContainer::read(path)?.to_real_field()
}

pub fn read_complex_field(path: &Path) -> Result<ComplexField> {
    FieldContainer::read(path)?.to_complex_field()
}
