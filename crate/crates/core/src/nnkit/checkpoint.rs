//! Versioned flat binary parameter checkpoints. Header carries block names
//! and shapes; body is little-endian f64 values. Round-trips bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{ParamEntry, ParamSet};

const MAGIC: &[u8; 4] = b"CLG\x01";

pub fn save_checkpoint(path: &Path, ps: &ParamSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(ps.entries.len() as u32).to_le_bytes())?;
    for e in &ps.entries {
        let name = e.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(e.rows as u32).to_le_bytes())?;
        w.write_all(&(e.cols as u32).to_le_bytes())?;
    }
    for v in &ps.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic in {}",
            path.display()
        )));
    }
    let n = read_u32(&mut r)? as usize;
    let mut entries = Vec::with_capacity(n);
    let mut offset = 0usize;
    for _ in 0..n {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(Error::Checkpoint("unreasonable name length".to_string()));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("non-utf8 block name".to_string()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        entries.push(ParamEntry {
            name,
            rows,
            cols,
            offset,
        });
        offset += rows * cols;
    }
    let mut data = Vec::with_capacity(offset);
    let mut buf = [0u8; 8];
    for _ in 0..offset {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    // No trailing bytes allowed.
    if r.read(&mut buf)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".to_string()));
    }
    Ok(ParamSet { entries, data })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
