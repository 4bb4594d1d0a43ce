//! Binary state container.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size      | field                                          |
//! |--------|-----------|------------------------------------------------|
//! | 0      | 4         | magic `b"FKST"`                                |
//! | 4      | 1         | format version, currently `1`                  |
//! | 5      | 1         | kind: `0` pure state, `1` density operator     |
//! | 6      | 2         | reserved, zero                                 |
//! | 8      | 4         | mode count `m` (u32)                           |
//! | 12     | 4 m       | per-mode dimensions `d_i` (u32)                |
//! | 12+4m  | 8         | kept mass before renormalization (f64)         |
//! | 20+4m  | 16 n      | complex entries as `(re, im)` f64 pairs        |
//!
//! `n = D` for a pure state and `n = D * D` (row-major) for a density
//! operator, with `D = d_1 * ... * d_m`.

use std::path::Path;

use super::{total_dim, DensityOperator, PureState};
use crate::linalg::{CMatrix, CVector, C64};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"FKST";
const VERSION: u8 = 1;
const KIND_PURE: u8 = 0;
const KIND_DENSITY: u8 = 1;

/// Either kind of state read back from a container.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredState {
    Pure(PureState),
    Density(DensityOperator),
}

impl StoredState {
    /// Density operator view (projector for pure states).
    pub fn to_density(&self) -> DensityOperator {
        match self {
            StoredState::Pure(p) => p.density(),
            StoredState::Density(d) => d.clone(),
        }
    }

    pub fn mode_dims(&self) -> &[usize] {
        match self {
            StoredState::Pure(p) => p.mode_dims(),
            StoredState::Density(d) => d.mode_dims(),
        }
    }
}

fn header(kind: u8, mode_dims: &[usize], kept_mass: f64, entries: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 4 * mode_dims.len() + 16 * entries);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(kind);
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(mode_dims.len() as u32).to_le_bytes());
    for &d in mode_dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&kept_mass.to_le_bytes());
    out
}

fn push_complex(out: &mut Vec<u8>, z: C64) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

pub fn encode_pure(state: &PureState) -> Vec<u8> {
    let mut out = header(KIND_PURE, state.mode_dims(), 1.0, state.dim());
    for &z in state.amplitudes().iter() {
        push_complex(&mut out, z);
    }
    out
}

pub fn encode_density(rho: &DensityOperator) -> Vec<u8> {
    let dim = rho.dim();
    let mut out = header(KIND_DENSITY, rho.mode_dims(), rho.kept_mass(), dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            push_complex(&mut out, rho.matrix()[(r, c)]);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated container at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn complex(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }
}

pub fn decode_state(bytes: &[u8]) -> Result<StoredState> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected FKST".into()));
    }
    let fixed = r.take(4)?;
    let (version, kind) = (fixed[0], fixed[1]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let modes = r.u32()? as usize;
    if modes == 0 || modes > 64 {
        return Err(Error::Format(format!("implausible mode count {modes}")));
    }
    let mode_dims = (0..modes).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let dim = total_dim(&mode_dims).map_err(|e| Error::Format(e.to_string()))?;
    let kept_mass = r.f64()?;
    let state = match kind {
        KIND_PURE => {
            let amps = (0..dim).map(|_| r.complex()).collect::<Result<Vec<_>>>()?;
            StoredState::Pure(PureState::new(CVector::from_vec(amps), mode_dims)?)
        }
        KIND_DENSITY => {
            let count = dim
                .checked_mul(dim)
                .filter(|&n| n.saturating_mul(16) <= bytes.len())
                .ok_or_else(|| Error::Format("container shorter than its header claims".into()))?;
            let entries = (0..count).map(|_| r.complex()).collect::<Result<Vec<_>>>()?;
            let matrix = CMatrix::from_row_slice(dim, dim, &entries);
            StoredState::Density(DensityOperator::new(matrix, mode_dims)?.with_kept_mass(kept_mass))
        }
        other => return Err(Error::Format(format!("unknown state kind {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after state payload",
            bytes.len() - r.pos
        )));
    }
    Ok(state)
}

pub fn write_state(path: impl AsRef<Path>, state: &StoredState) -> Result<()> {
    let bytes = match state {
        StoredState::Pure(p) => encode_pure(p),
        StoredState::Density(d) => encode_density(d),
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_state(path: impl AsRef<Path>) -> Result<StoredState> {
    decode_state(&std::fs::read(path)?)
}
