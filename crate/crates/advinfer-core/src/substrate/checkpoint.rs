//! Binary checkpoint container for a [`ParamStore`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes   "ADCKPT01"
//! meta    u32 len + UTF-8 JSON (free-form key/value map, e.g. vocab hash)
//! count   u32       number of entries
//! entry   u16 name-len + name bytes
//!         u8  dtype (0 = f64)
//!         u8  ndim, then ndim × u32 dims
//!         dims-product × f64 payload
//! ```
//!
//! Parameters are stored under their own names; Adam state is stored as
//! `<name>!m`, `<name>!v` and a step scalar `<name>!t` so a save → load →
//! save round trip is byte-identical. Entries are written in sorted name
//! order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::optim::{AdamMoments, ParamStore};
use super::tensor::Tensor;
use super::SubstrateError;

const MAGIC: &[u8; 8] = b"ADCKPT01";
const DTYPE_F64: u8 = 0;

/// Reserved separator: parameter names must not contain `!`.
const STATE_SEP: char = '!';

pub fn save_checkpoint<W: Write>(
    store: &ParamStore,
    meta: &BTreeMap<String, String>,
    mut w: W,
) -> Result<(), SubstrateError> {
    let mut entries: BTreeMap<String, Tensor> = BTreeMap::new();
    for (name, tensor) in store.iter() {
        if name.contains(STATE_SEP) {
            return Err(SubstrateError::Checkpoint {
                detail: format!("parameter name {name:?} contains reserved '!'"),
            });
        }
        entries.insert(name.clone(), tensor.as_ref().clone());
    }
    for (name, m) in store.moment_entries() {
        entries.insert(format!("{name}!m"), m.m.clone());
        entries.insert(format!("{name}!v"), m.v.clone());
        entries.insert(format!("{name}!t"), Tensor::scalar(m.step as f64));
    }

    w.write_all(MAGIC).map_err(io_err)?;
    let meta_json = serde_json::to_vec(meta)
        .map_err(|e| SubstrateError::Checkpoint { detail: e.to_string() })?;
    w.write_all(&(meta_json.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&meta_json).map_err(io_err)?;
    w.write_all(&(entries.len() as u32).to_le_bytes()).map_err(io_err)?;
    for (name, tensor) in &entries {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u16).to_le_bytes()).map_err(io_err)?;
        w.write_all(name_bytes).map_err(io_err)?;
        w.write_all(&[DTYPE_F64, tensor.shape().len() as u8]).map_err(io_err)?;
        for &d in tensor.shape() {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(
    mut r: R,
) -> Result<(ParamStore, BTreeMap<String, String>), SubstrateError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(SubstrateError::Checkpoint {
            detail: format!("bad magic {:?}, expected {:?}", magic, MAGIC),
        });
    }
    let meta_len = read_u32(&mut r)? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes).map_err(io_err)?;
    let meta: BTreeMap<String, String> = serde_json::from_slice(&meta_bytes)
        .map_err(|e| SubstrateError::Checkpoint { detail: format!("meta: {e}") })?;

    let count = read_u32(&mut r)? as usize;
    let mut raw: BTreeMap<String, Tensor> = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u16(&mut r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes).map_err(io_err)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| SubstrateError::Checkpoint { detail: e.to_string() })?;
        let mut head = [0u8; 2];
        r.read_exact(&mut head).map_err(io_err)?;
        if head[0] != DTYPE_F64 {
            return Err(SubstrateError::Checkpoint {
                detail: format!("entry {name}: unsupported dtype {}", head[0]),
            });
        }
        let ndim = head[1] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut r)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(io_err)?;
            data.push(f64::from_le_bytes(buf));
        }
        raw.insert(name, Tensor::new(shape, data)?);
    }

    let mut store = ParamStore::new();
    for (name, tensor) in &raw {
        if !name.contains(STATE_SEP) {
            store.insert(name, tensor.clone())?;
        }
    }
    let names: Vec<String> = store.names().cloned().collect();
    for name in names {
        let (m, v, t) = (
            raw.get(&format!("{name}!m")),
            raw.get(&format!("{name}!v")),
            raw.get(&format!("{name}!t")),
        );
        if let (Some(m), Some(v), Some(t)) = (m, v, t) {
            store.set_moments(
                name,
                AdamMoments { m: m.clone(), v: v.clone(), step: t.item() as u64 },
            );
        }
    }
    Ok((store, meta))
}

pub fn save_checkpoint_file(
    store: &ParamStore,
    meta: &BTreeMap<String, String>,
    path: &Path,
) -> Result<(), SubstrateError> {
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut buf = std::io::BufWriter::new(file);
    save_checkpoint(store, meta, &mut buf)?;
    buf.flush().map_err(io_err)
}

pub fn load_checkpoint_file(
    path: &Path,
) -> Result<(ParamStore, BTreeMap<String, String>), SubstrateError> {
    let file = std::fs::File::open(path).map_err(io_err)?;
    load_checkpoint(std::io::BufReader::new(file))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SubstrateError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, SubstrateError> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(u16::from_le_bytes(buf))
}

fn io_err(e: std::io::Error) -> SubstrateError {
    SubstrateError::Checkpoint { detail: e.to_string() }
}
