//! On-disk formats: the UDFT matrix container and frame label files.
//!
//! UDFT layout, all integers little-endian:
//!
//! ```text
//! magic "UDFT" | version u32 | T u32 | dim u32 | flags u32 | T*dim f32 rows
//! ```
//!
//! `flags` marks what the matrix holds: features, variances or posteriors.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"UDFT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Features,
    Variances,
    Posteriors,
}

impl MatrixKind {
    fn to_flags(self) -> u32 {
        match self {
            MatrixKind::Features => 0,
            MatrixKind::Variances => 1,
            MatrixKind::Posteriors => 2,
        }
    }

    fn from_flags(flags: u32) -> Result<Self> {
        match flags {
            0 => Ok(MatrixKind::Features),
            1 => Ok(MatrixKind::Variances),
            2 => Ok(MatrixKind::Posteriors),
            other => Err(Error::format(format!("unknown UDFT flags {other}"))),
        }
    }
}

/// Write a row-major matrix as float32. The file is written atomically
/// (temporary sibling, then rename).
pub fn write_matrix(path: &Path, rows: &[Vec<f64>], kind: MatrixKind) -> Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::dimension("ragged matrix rows"));
    }
    let mut buf = Vec::with_capacity(16 + rows.len() * dim * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&kind.to_flags().to_le_bytes());
    for row in rows {
        for &v in row {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let tmp = tmp_sibling(path);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&buf)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Read a UDFT matrix back as f64 rows.
pub fn read_matrix(path: &Path) -> Result<(Vec<Vec<f64>>, MatrixKind)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(Error::format("not a UDFT file"));
    }
    let version = read_u32(&bytes, 4);
    if version != VERSION {
        return Err(Error::format(format!("unsupported UDFT version {version}")));
    }
    let t = read_u32(&bytes, 8) as usize;
    let dim = read_u32(&bytes, 12) as usize;
    let kind = MatrixKind::from_flags(read_u32(&bytes, 16))?;
    let expect = 20 + t * dim * 4;
    if bytes.len() != expect {
        return Err(Error::format(format!(
            "UDFT payload is {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    let mut rows = Vec::with_capacity(t);
    let mut at = 20;
    for _ in 0..t {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            row.push(v as f64);
            at += 4;
        }
        rows.push(row);
    }
    Ok((rows, kind))
}

/// Write frame labels, one integer per line.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 4);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    let tmp = tmp_sibling(path);
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::format(format!("labels line {}: '{l}'", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.udft");
        let rng = CounterRng::new(3);
        // f32-representable payload survives exactly
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|t| {
                (0..24)
                    .map(|d| rng.gaussian_at((t * 24 + d) as u64) as f32 as f64)
                    .collect()
            })
            .collect();
        write_matrix(&path, &rows, MatrixKind::Variances).unwrap();
        let (back, kind) = read_matrix(&path).unwrap();
        assert_eq!(kind, MatrixKind::Variances);
        assert_eq!(back, rows);
    }

    #[test]
    fn corrupt_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.udft");
        std::fs::write(&path, b"NOPE00000000000000000000").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.udft");
        write_matrix(&path, &vec![vec![1.0; 8]; 4], MatrixKind::Features).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Format(_))));
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.txt");
        let labels = vec![0usize, 3, 11, 2, 2, 7];
        write_labels(&path, &labels).unwrap();
        assert_eq!(read_labels(&path).unwrap(), labels);
    }
}
