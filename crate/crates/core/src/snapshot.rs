//! Binary snapshot file format.
//!
//! Layout (little-endian): magic `ENTV`, format version u32, component
//! count u32, grid size u32, domain length f64, time f64, then the field
//! values as f64, row-major by component.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pde::Field;

pub const MAGIC: &[u8; 4] = b"ENTV";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_snapshot(path: &Path, field: &Field) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * field.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(field.n_components as u32).to_le_bytes());
    buf.extend_from_slice(&(field.grid_points as u32).to_le_bytes());
    buf.extend_from_slice(&field.domain_length.to_le_bytes());
    buf.extend_from_slice(&field.time.to_le_bytes());
    for v in &field.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 || &bytes[0..4] != MAGIC {
        return Err(Error::validation(format!(
            "{} is not a snapshot file (bad magic)",
            path.display()
        )));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::validation(format!(
            "unsupported snapshot format version {version}"
        )));
    }
    let n = u32_at(8) as usize;
    let g = u32_at(12) as usize;
    let domain_length = f64_at(16);
    let time = f64_at(24);
    let expected = 32 + 8 * n * g;
    if bytes.len() != expected {
        return Err(Error::validation(format!(
            "snapshot {} has {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let data: Vec<f64> = (0..n * g).map(|i| f64_at(32 + 8 * i)).collect();
    Ok(Field { n_components: n, grid_points: g, domain_length, time, data })
}


/// Record file layout (little-endian): magic `ENTR`, version u32, component
/// count u32, points u32, snapshot count u32, tau f64, delta f64, lambda
/// f64, t_start f64, seed u64, model hash u64, then the snapshots.
pub const RECORD_MAGIC: &[u8; 4] = b"ENTR";

pub fn write_record(path: &Path, record: &crate::entropy::TrajectoryRecord) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(RECORD_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(record.n_components as u32).to_le_bytes());
    buf.extend_from_slice(&(record.points as u32).to_le_bytes());
    buf.extend_from_slice(&(record.snapshots.len() as u32).to_le_bytes());
    buf.extend_from_slice(&record.tau.to_le_bytes());
    buf.extend_from_slice(&record.delta.to_le_bytes());
    buf.extend_from_slice(&record.lambda.to_le_bytes());
    buf.extend_from_slice(&record.meta.t_start.to_le_bytes());
    buf.extend_from_slice(&record.meta.seed.to_le_bytes());
    let hash_bits = u64::from_str_radix(record.meta.model_hash.trim_start_matches("0x"), 16)
        .unwrap_or(0);
    buf.extend_from_slice(&hash_bits.to_le_bytes());
    for snap in &record.snapshots {
        for v in snap {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<crate::entropy::TrajectoryRecord> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 64 || &bytes[0..4] != RECORD_MAGIC {
        return Err(Error::validation(format!(
            "{} is not a record file (bad magic)",
            path.display()
        )));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let u64_at = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::validation(format!(
            "unsupported record format version {version}"
        )));
    }
    let n_components = u32_at(8) as usize;
    let points = u32_at(12) as usize;
    let count = u32_at(16) as usize;
    let tau = f64_at(20);
    let delta = f64_at(28);
    let lambda = f64_at(36);
    let t_start = f64_at(44);
    let seed = u64_at(52);
    let model_hash = format!("{:#018x}", u64_at(60));
    let expected = 68 + 8 * count * points * n_components;
    if bytes.len() != expected {
        return Err(Error::validation(format!(
            "record {} has {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let row = points * n_components;
    let snapshots = (0..count)
        .map(|s| (0..row).map(|i| f64_at(68 + 8 * (s * row + i))).collect())
        .collect();
    Ok(crate::entropy::TrajectoryRecord {
        n_components,
        points,
        snapshots,
        tau,
        delta,
        lambda,
        meta: crate::entropy::RecordMeta { model_hash, seed, t_start },
    })
}
