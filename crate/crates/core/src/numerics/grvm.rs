//! GRVM binary matrix format.
//!
//! Layout: 4-byte magic `GRVM`, version byte `0x01`, u32 little-endian row
//! count, u32 little-endian column count, then rows x cols little-endian
//! 32-bit floats in row-major order. In-memory matrices are f64; files
//! store f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use super::{NumericsError, Result};

const MAGIC: &[u8; 4] = b"GRVM";
const VERSION: u8 = 0x01;

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    let rows = u32::try_from(m.rows())
        .map_err(|_| NumericsError::Format(format!("row count {} exceeds u32", m.rows())))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| NumericsError::Format(format!("column count {} exceeds u32", m.cols())))?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for &v in m.data() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NumericsError::Format(format!(
            "{}: bad magic {:?}, expected GRVM",
            path.display(),
            magic
        )));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != VERSION {
        return Err(NumericsError::Format(format!(
            "{}: unsupported version {}",
            path.display(),
            version[0]
        )));
    }
    let mut dim = [0u8; 4];
    r.read_exact(&mut dim)?;
    let rows = u32::from_le_bytes(dim) as usize;
    r.read_exact(&mut dim)?;
    let cols = u32::from_le_bytes(dim) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| NumericsError::Format("dimension overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|_| {
            NumericsError::Format(format!("{}: truncated payload", path.display()))
        })?;
        data.push(f32::from_le_bytes(buf) as f64);
    }
    let m = Matrix::from_vec(rows, cols, data)?;
    m.check_finite("grvm::read_matrix")?;
    Ok(m)
}

/// One integer per line, used for label files.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| NumericsError::Format(format!("{}: bad label line {l:?}: {e}", path.display())))
        })
        .collect()
}
