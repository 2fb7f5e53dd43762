//! Binary snapshot-file format, the ingestion path for externally supplied
//! range-cell data.
//!
//! Layout (little-endian), 24-byte header then payload:
//!
//! ```text
//! offset  size  field
//! 0       9     magic "STAPSNAP1"
//! 9       1     version (u8, currently 1)
//! 10      1     layout flag (u8, 0 = column-major interleaved re/im)
//! 11      1     reserved (0)
//! 12      4     N (u32, sensors)
//! 16      4     M (u32, pulses)
//! 20      4     L (u32, snapshots / range cells)
//! 24      ...   payload: L columns of NM complex values, each value an
//!               IEEE-754 float32 pair (re, im); 2*4*NM*L bytes total
//! ```

use ndarray::Array2;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 9] = b"STAPSNAP1";
pub const VERSION: u8 = 1;
pub const LAYOUT_COLUMN_MAJOR: u8 = 0;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum SnapFileError {
    #[error("bad magic at byte offset 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported version {found} at byte offset 9 (supported: {VERSION})")]
    BadVersion { found: u8 },
    #[error("unsupported layout flag {found} at byte offset 10")]
    BadLayout { found: u8 },
    #[error("file truncated at byte offset {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("zero dimension in header: N={n}, M={m}, L={l}")]
    ZeroDimension { n: u32, m: u32, l: u32 },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SnapFileError + '_ {
    move |source| SnapFileError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write snapshots to disk. Complex values are narrowed to f32.
pub fn write(
    path: &Path,
    n_sensors: usize,
    n_pulses: usize,
    data: &Array2<Complex64>,
) -> Result<(), SnapFileError> {
    let nm = n_sensors * n_pulses;
    assert_eq!(data.nrows(), nm, "data rows must equal N*M");
    let l = data.ncols();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.push(VERSION);
    header.push(LAYOUT_COLUMN_MAJOR);
    header.push(0);
    header.extend_from_slice(&(n_sensors as u32).to_le_bytes());
    header.extend_from_slice(&(n_pulses as u32).to_le_bytes());
    header.extend_from_slice(&(l as u32).to_le_bytes());
    debug_assert_eq!(header.len(), HEADER_LEN);

    let mut payload = Vec::with_capacity(2 * 4 * nm * l);
    for col in data.columns() {
        for z in col.iter() {
            payload.extend_from_slice(&(z.re as f32).to_le_bytes());
            payload.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
    }

    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&header).map_err(io_err(path))?;
    f.write_all(&payload).map_err(io_err(path))?;
    Ok(())
}

/// Read a snapshot file; returns (N, M, data).
pub fn read(path: &Path) -> Result<(usize, usize, Array2<Complex64>), SnapFileError> {
    let mut f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(io_err(path))?;

    if bytes.len() < HEADER_LEN {
        return Err(SnapFileError::Truncated {
            offset: bytes.len(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..9] != MAGIC {
        return Err(SnapFileError::BadMagic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes[..9]).into_owned(),
        });
    }
    if bytes[9] != VERSION {
        return Err(SnapFileError::BadVersion { found: bytes[9] });
    }
    if bytes[10] != LAYOUT_COLUMN_MAJOR {
        return Err(SnapFileError::BadLayout { found: bytes[10] });
    }
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let m = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let l = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
    if n == 0 || m == 0 || l == 0 {
        return Err(SnapFileError::ZeroDimension { n, m, l });
    }
    let nm = (n * m) as usize;
    let expected = HEADER_LEN + 2 * 4 * nm * l as usize;
    if bytes.len() != expected {
        return Err(SnapFileError::Truncated {
            offset: bytes.len().min(expected),
            expected,
            found: bytes.len(),
        });
    }

    let mut data = Array2::<Complex64>::zeros((nm, l as usize));
    let mut off = HEADER_LEN;
    for k in 0..l as usize {
        for i in 0..nm {
            let re = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            let im = f32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap());
            data[(i, k)] = Complex64::new(re as f64, im as f64);
            off += 8;
        }
    }
    Ok((n as usize, m as usize, data))
}
