//! Binary checkpoint format.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic      8 bytes  "NESTKGCK"
//! version    u32      1
//! precision  u8       4 (f32) or 8 (f64)
//! algebra    u8       0 = Q, 1 = H, 2 = S
//! dim        u32
//! counts     3 × u32  entities, relations, nested relations
//! names      per table, per name: u32 byte length + UTF-8 bytes
//! arrays     entities, relation rotations, relation translations,
//!            nested rotations (9 cells each), nested translations (3 cells each)
//! ```
//!
//! Arrays are written in the store's native precision, so a save/load round
//! trip is bit-exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{SymbolTable, Symbols};
use crate::hypercomplex::{Algebra, Real};
use crate::scoring::EmbeddingStore;

pub const MAGIC: &[u8; 8] = b"NESTKGCK";
pub const VERSION: u32 = 1;

/// Fixed-size prefix of a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub precision_bytes: u8,
    pub algebra: Algebra,
    pub dim: usize,
    pub entities: usize,
    pub relations: usize,
    pub nested_relations: usize,
}

pub fn encode<T: Real>(store: &EmbeddingStore<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::BYTES);
    out.push(store.algebra.tag());
    out.extend_from_slice(&(store.dim as u32).to_le_bytes());
    let tables = [&store.symbols.entities, &store.symbols.relations, &store.symbols.nested_relations];
    for t in tables {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
    }
    for t in tables {
        for name in t.names() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
    }
    for buf in [
        &store.entities,
        &store.rel_rotation,
        &store.rel_translation,
        &store.nested_rotation,
        &store.nested_translation,
    ] {
        for v in buf.iter() {
            v.write_le(&mut out);
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
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn read_header(r: &mut Reader<'_>) -> Result<CheckpointHeader> {
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let precision_bytes = r.u8()?;
    if precision_bytes != 4 && precision_bytes != 8 {
        return Err(Error::Checkpoint(format!("unknown precision tag {precision_bytes}")));
    }
    let tag = r.u8()?;
    let algebra = Algebra::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown algebra tag {tag}")))?;
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(Error::Checkpoint("dimension 0".into()));
    }
    Ok(CheckpointHeader {
        version,
        precision_bytes,
        algebra,
        dim,
        entities: r.u32()? as usize,
        relations: r.u32()? as usize,
        nested_relations: r.u32()? as usize,
    })
}

pub fn decode_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    read_header(&mut Reader { bytes, pos: 0 })
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<EmbeddingStore<T>> {
    let mut r = Reader { bytes, pos: 0 };
    let h = read_header(&mut r)?;
    if h.precision_bytes != T::BYTES {
        return Err(Error::Checkpoint(format!(
            "checkpoint stores {}-byte floats, requested {}-byte",
            h.precision_bytes,
            T::BYTES
        )));
    }
    let mut read_table = |n: usize| -> Result<SymbolTable> {
        let mut names = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Checkpoint(format!("symbol name: {e}")))?;
            names.push(s.to_owned());
        }
        SymbolTable::from_names(names).map_err(|e| Error::Checkpoint(e.to_string()))
    };
    let symbols = Symbols {
        entities: read_table(h.entities)?,
        relations: read_table(h.relations)?,
        nested_relations: read_table(h.nested_relations)?,
    };
    let mut store = EmbeddingStore::<T>::zeros(symbols, h.dim, h.algebra)?;
    let width = T::BYTES as usize;
    for buf in [
        &mut store.entities,
        &mut store.rel_rotation,
        &mut store.rel_translation,
        &mut store.nested_rotation,
        &mut store.nested_translation,
    ] {
        let raw = r.take(buf.len() * width)?;
        for (v, chunk) in buf.iter_mut().zip(raw.chunks_exact(width)) {
            *v = T::read_le(chunk);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(store)
}

pub fn save<T: Real>(store: &EmbeddingStore<T>, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode(store)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Real>(path: &Path) -> Result<EmbeddingStore<T>> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// A checkpoint in whichever precision it was written.
#[derive(Debug, Clone)]
pub enum AnyStore {
    F32(EmbeddingStore<f32>),
    F64(EmbeddingStore<f64>),
}

impl AnyStore {
    pub fn algebra(&self) -> Algebra {
        match self {
            AnyStore::F32(s) => s.algebra(),
            AnyStore::F64(s) => s.algebra(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyStore::F32(s) => s.dim(),
            AnyStore::F64(s) => s.dim(),
        }
    }

    pub fn symbols(&self) -> &Symbols {
        match self {
            AnyStore::F32(s) => s.symbols(),
            AnyStore::F64(s) => s.symbols(),
        }
    }

    /// The parameters in f64 (exact for either precision).
    pub fn to_f64(&self) -> EmbeddingStore<f64> {
        match self {
            AnyStore::F32(s) => s.cast(),
            AnyStore::F64(s) => s.clone(),
        }
    }
}

pub fn load_any(path: &Path) -> Result<AnyStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match decode_header(&bytes)?.precision_bytes {
        4 => Ok(AnyStore::F32(decode(&bytes)?)),
        _ => Ok(AnyStore::F64(decode(&bytes)?)),
    }
}
