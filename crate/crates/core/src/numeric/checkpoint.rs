//! Binary checkpoint format.
//!
//! ```text
//! magic   8 bytes  "KGCWALK1"
//! repeated until EOF:
//!   name_len  u32 LE
//!   name      name_len bytes, UTF-8
//!   rank      u32 LE
//!   dims      rank × u32 LE
//!   data      prod(dims) × f64 LE
//! ```

use std::io::{ErrorKind, Read, Write};

use super::params::ParamStore;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"KGCWALK1";

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn write_entry<W: Write>(w: &mut W, name: &str, dims: &[usize], data: &[f64]) -> Result<()> {
    let numel: usize = dims.iter().product();
    if numel != data.len() {
        return Err(Error::shape(numel, data.len()));
    }
    w.write_all(&u32_of(name.len())?.to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&u32_of(dims.len())?.to_le_bytes())?;
    for &d in dims {
        w.write_all(&u32_of(d)?.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(data.len() * 8);
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Checkpoint(format!("{n} does not fit in u32")))
}

pub fn write_magic<W: Write>(w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    Ok(())
}

/// Writes every parameter of `store` in registration order.
pub fn write_params<W: Write>(w: &mut W, store: &ParamStore) -> Result<()> {
    for p in store.iter() {
        write_entry(w, p.name(), p.dims(), p.data())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated file".into())
    } else {
        Error::Io(e)
    }
}

/// Reads all entries; the magic string is validated first.
pub fn read_entries<R: Read>(r: &mut R) -> Result<Vec<Entry>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a KGCWALK1 checkpoint".into()));
    }
    let mut entries = Vec::new();
    loop {
        // A clean EOF is only allowed on an entry boundary.
        let mut first = [0u8; 4];
        let mut got = 0;
        while got < 4 {
            match r.read(&mut first[got..]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        if got == 0 {
            return Ok(entries);
        }
        if got < 4 {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let name_len = u32::from_le_bytes(first) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
        let rank = read_u32(r)? as usize;
        let dims = (0..rank).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel: usize = dims.iter().product();
        let mut raw = vec![0u8; numel * 8];
        r.read_exact(&mut raw).map_err(truncated)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        entries.push(Entry { name, dims, data });
    }
}

/// Rebuilds a store from entries, preserving order.
pub fn params_from_entries<'a>(entries: impl IntoIterator<Item = &'a Entry>) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    for e in entries {
        store.add(e.name.clone(), &e.dims, e.data.clone())?;
    }
    Ok(store)
}
