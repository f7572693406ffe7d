//! Model files.
//!
//! Binary layout (little-endian): magic `CTIV1`, `u32` dimension, `u32` term
//! count, then per term a `u32` byte length, the UTF-8 term, and `d` `f32`
//! values. The text export is the common word-vector format: a `|V| d` header
//! line followed by `term v1 ... vd` lines.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingError, EmbeddingModel};

pub const MAGIC: &[u8; 5] = b"CTIV1";

pub fn write_model<W: Write>(model: &EmbeddingModel, mut out: W) -> Result<(), EmbeddingError> {
    out.write_all(MAGIC)?;
    out.write_all(&(model.dim() as u32).to_le_bytes())?;
    out.write_all(&(model.len() as u32).to_le_bytes())?;
    for (term, row) in model
        .terms()
        .iter()
        .zip(model.raw_vectors().chunks(model.dim()))
    {
        out.write_all(&(term.len() as u32).to_le_bytes())?;
        out.write_all(term.as_bytes())?;
        for &v in row {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, EmbeddingError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> EmbeddingError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        EmbeddingError::Format("file is truncated".into())
    } else {
        EmbeddingError::Io(e)
    }
}

pub fn read_model<R: Read>(mut input: R) -> Result<EmbeddingModel, EmbeddingError> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(EmbeddingError::Format(format!("bad magic {magic:?}")));
    }
    let dim = read_u32(&mut input)? as usize;
    let count = read_u32(&mut input)? as usize;
    let mut rows = Vec::with_capacity(count.min(1 << 20));
    let mut buf = vec![0u8; dim * 4];
    for _ in 0..count {
        let len = read_u32(&mut input)? as usize;
        let mut term = vec![0u8; len];
        input.read_exact(&mut term).map_err(truncated)?;
        let term = String::from_utf8(term).map_err(|e| EmbeddingError::Format(e.to_string()))?;
        input.read_exact(&mut buf).map_err(truncated)?;
        let values = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        rows.push((term, values));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(EmbeddingError::Format(
            "trailing bytes after last term".into(),
        ));
    }
    EmbeddingModel::from_vectors(dim, rows)
}

pub fn save_model(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    write_model(model, BufWriter::new(File::create(path)?))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EmbeddingModel, EmbeddingError> {
    read_model(BufReader::new(File::open(path)?))
}

pub fn write_text<W: Write>(model: &EmbeddingModel, mut out: W) -> Result<(), EmbeddingError> {
    writeln!(out, "{} {}", model.len(), model.dim())?;
    for (term, row) in model
        .terms()
        .iter()
        .zip(model.raw_vectors().chunks(model.dim()))
    {
        write!(out, "{term}")?;
        for &v in row {
            write!(out, " {}", v as f32)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
