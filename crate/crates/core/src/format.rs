//! Binary and text formats for matrices.
//!
//! Matrix file layout, all little-endian:
//!
//! ```text
//! magic  [u8; 4]  b"SDMX"
//! p      u64
//! t      u32      u32::MAX for a real matrix
//! seed   u64
//! data   p*p      i64 mantissas (dyadic) or f64 (real), row-major
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{DataMatrix, QuantizedMatrix};

pub const MATRIX_MAGIC: &[u8; 4] = b"SDMX";
pub const REAL_SENTINEL: u32 = u32::MAX;

/// Contents of a matrix file.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixPayload {
    Real(DataMatrix),
    Dyadic(QuantizedMatrix),
}

impl MatrixPayload {
    pub fn dim(&self) -> usize {
        match self {
            MatrixPayload::Real(m) => m.dim(),
            MatrixPayload::Dyadic(m) => m.dim(),
        }
    }

    pub fn to_real(&self) -> DataMatrix {
        match self {
            MatrixPayload::Real(m) => m.clone(),
            MatrixPayload::Dyadic(m) => m.to_real(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub seed: u64,
    pub payload: MatrixPayload,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(b)
}

impl MatrixFile {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MATRIX_MAGIC).map_err(io_err)?;
        w.write_all(&(self.payload.dim() as u64).to_le_bytes()).map_err(io_err)?;
        let t = match &self.payload {
            MatrixPayload::Real(_) => REAL_SENTINEL,
            MatrixPayload::Dyadic(m) => m.scale(),
        };
        w.write_all(&t.to_le_bytes()).map_err(io_err)?;
        w.write_all(&self.seed.to_le_bytes()).map_err(io_err)?;
        match &self.payload {
            MatrixPayload::Real(m) => {
                for v in m.as_slice() {
                    w.write_all(&v.to_le_bytes()).map_err(io_err)?;
                }
            }
            MatrixPayload::Dyadic(m) => {
                for v in m.mantissas() {
                    w.write_all(&v.to_le_bytes()).map_err(io_err)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let magic: [u8; 4] = read_array(r)?;
        if &magic != MATRIX_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let p = u64::from_le_bytes(read_array(r)?) as usize;
        let t = u32::from_le_bytes(read_array(r)?);
        let seed = u64::from_le_bytes(read_array(r)?);
        let n = p.checked_mul(p).ok_or_else(|| Error::Format(format!("dimension {p} too large")))?;
        let payload = if t == REAL_SENTINEL {
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(f64::from_le_bytes(read_array(r)?));
            }
            MatrixPayload::Real(DataMatrix::from_vec(p, data)?)
        } else {
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(i64::from_le_bytes(read_array(r)?));
            }
            MatrixPayload::Dyadic(QuantizedMatrix::from_mantissas(p, t, data)?)
        };
        Ok(MatrixFile { seed, payload })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        self.write_to(&mut f)?;
        f.flush().map_err(io_err)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
        Self::read_from(&mut f)
    }
}

/// Comma-separated rows; dyadic entries are printed as their exact decimal
/// expansion of `mantissa * 2^-t` via f64 (exact below 2^53).
pub fn to_csv(payload: &MatrixPayload) -> String {
    let m = payload.to_real();
    let p = m.dim();
    let mut s = String::new();
    for i in 0..p {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
