//! Precomputed document vectors from an external encoder.
//!
//! Binary layout, little-endian: `"HVEC"`, u32 version, u32 dim, u64 count,
//! then `count * dim` f32 values row by row. A sidecar TSV maps each row
//! to its page as `row<TAB>lang<TAB>pageid`.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use enetype_core::{DocVector, PageKey};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HVEC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    pub dim: usize,
    pub rows: Vec<Vec<f32>>,
}

impl VectorTable {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.rows.len() as u64).to_le_bytes())?;
        for row in &self.rows {
            for v in row {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn read<R: Read>(mut input: R, source: &str) -> Result<Self> {
        let bad = |m: &str| Error::Data(format!("{source}: {m}"));
        let mut header = [0u8; 20];
        input.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if &header[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(bad("zero dimension"));
        }
        let mut rows = Vec::with_capacity(count.min(1 << 20));
        let mut buf = vec![0u8; dim * 4];
        for _ in 0..count {
            input.read_exact(&mut buf).map_err(|_| bad("truncated data"))?;
            rows.push(buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect());
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(|e| Error::io(source, e))? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(VectorTable { dim, rows })
    }
}

pub fn read_sidecar<R: BufRead>(reader: R, source: &str) -> Result<Vec<(usize, PageKey)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [row, lang, page] = fields[..] else {
            return Err(Error::parse(source, i + 1, "expected row<TAB>lang<TAB>pageid"));
        };
        let row = row.parse().map_err(|_| Error::parse(source, i + 1, "row is not an integer"))?;
        out.push((row, (lang.to_string(), page.to_string())));
    }
    Ok(out)
}

/// Joins a vector table with its sidecar into a per-page map.
pub fn index_vectors(table: VectorTable, sidecar: Vec<(usize, PageKey)>) -> Result<BTreeMap<PageKey, DocVector>> {
    let mut map = BTreeMap::new();
    for (row, key) in sidecar {
        let v = table
            .rows
            .get(row)
            .ok_or_else(|| Error::Data(format!("sidecar row {row} beyond {} vectors", table.rows.len())))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("vector row {row} has non-finite entries")));
        }
        let vector = DocVector(v.iter().map(|&x| f64::from(x)).collect());
        if map.insert(key.clone(), vector).is_some() {
            return Err(Error::Data(format!("page {}:{} mapped twice", key.0, key.1)));
        }
    }
    Ok(map)
}

pub fn write_sidecar<'a, W: Write, I: IntoIterator<Item = &'a PageKey>>(mut out: W, keys: I) -> std::io::Result<()> {
    for (row, (lang, page)) in keys.into_iter().enumerate() {
        writeln!(out, "{row}\t{lang}\t{page}")?;
    }
    out.flush()
}
