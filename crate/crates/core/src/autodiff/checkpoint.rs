//! Binary parameter files: the magic `HAE1`, then one record per parameter
//! of `name_len: u32`, the UTF-8 name, `rows: u64`, `cols: u64` and
//! `rows * cols` row-major `f64`s, all little-endian.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::linalg::Matrix;

const MAGIC: &[u8; 4] = b"HAE1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Stream(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("truncated record for `{0}`")]
    Truncated(String),
    #[error("parameter name is not UTF-8")]
    BadName,
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &[(String, Matrix)]) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    for (name, m) in params {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Matrix)>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut out = Vec::new();
    loop {
        let mut len = [0u8; 4];
        match r.read(&mut len[..1])? {
            0 => break,
            _ => r.read_exact(&mut len[1..]).map_err(|_| CheckpointError::Truncated(String::new()))?,
        }
        let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut name).map_err(|_| CheckpointError::Truncated(String::new()))?;
        let name = String::from_utf8(name).map_err(|_| CheckpointError::BadName)?;
        let truncated = |_| CheckpointError::Truncated(name.clone());
        let mut dims = [0u8; 16];
        r.read_exact(&mut dims).map_err(truncated)?;
        let rows = u64::from_le_bytes(dims[..8].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(dims[8..].try_into().unwrap()) as usize;
        let mut data = vec![0u8; rows * cols * 8];
        r.read_exact(&mut data).map_err(truncated)?;
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Matrix::from_vec(rows, cols, values)));
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, params: &[(String, Matrix)]) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = File::create(path).map_err(io_err)?;
    write_checkpoint(BufWriter::new(f), params)
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Matrix)>, CheckpointError> {
    let f = File::open(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_checkpoint(BufReader::new(f))
}
