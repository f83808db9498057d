//! Parameter checkpoints: one line of JSON header, then little-endian `f64`
//! payload for every tensor in header order (values, then Adam `m` and `v`
//! when the optimizer state flag is set).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::fsutil;

pub const FORMAT: &str = "cellfacet-checkpoint";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub names: Vec<String>,
    pub shapes: Vec<[usize; 2]>,
    pub step: u64,
    pub optimizer_state: bool,
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn encode(store: &ParamStore, optimizer_state: bool, meta: serde_json::Value) -> Vec<u8> {
    let header = Header {
        format: FORMAT.into(),
        version: 1,
        names: store.names().to_vec(),
        shapes: store.values.iter().map(|m| [m.rows, m.cols]).collect(),
        step: store.step,
        optimizer_state,
        meta,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    let mut put = |ms: &[Matrix]| {
        for m in ms {
            for x in &m.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    };
    put(&store.values);
    if optimizer_state {
        put(&store.m);
        put(&store.v);
    }
    out
}

pub fn decode(bytes: &[u8], origin: &str) -> Result<(ParamStore, Header)> {
    let parse_err = |msg: String| Error::Parse {
        path: origin.to_string(),
        msg,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err("missing header line".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| parse_err(e.to_string()))?;
    if header.format != FORMAT {
        return Err(parse_err(format!("unexpected format {:?}", header.format)));
    }
    if header.names.len() != header.shapes.len() {
        return Err(parse_err("names and shapes differ in length".into()));
    }
    let scalars: usize = header.shapes.iter().map(|[r, c]| r * c).sum();
    let copies = if header.optimizer_state { 3 } else { 1 };
    let payload = &bytes[nl + 1..];
    if payload.len() != 8 * scalars * copies {
        return Err(parse_err(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            8 * scalars * copies
        )));
    }
    let mut floats = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut read = || -> Vec<Matrix> {
        header
            .shapes
            .iter()
            .map(|&[r, c]| Matrix::from_vec(r, c, floats.by_ref().take(r * c).collect()))
            .collect()
    };
    let values = read();
    let mut store = ParamStore::from_parts(header.names.clone(), values);
    if header.optimizer_state {
        store.m = read();
        store.v = read();
    }
    store.step = header.step;
    Ok((store, header))
}

pub fn save(
    path: &Path,
    store: &ParamStore,
    optimizer_state: bool,
    meta: serde_json::Value,
) -> Result<()> {
    fsutil::write_atomic(path, &encode(store, optimizer_state, meta))
}

pub fn load(path: &Path) -> Result<(ParamStore, Header)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}
