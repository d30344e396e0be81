use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dense::DenseNetwork;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const FORMAT: &str = "v2xbench-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub sizes: Vec<usize>,
    pub num_params: usize,
}

/// First line of a checkpoint file. The parameters of all entries follow as
/// one little-endian array in entry order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub networks: Vec<TensorEntry>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub meta: serde_json::Value,
    pub networks: Vec<(String, DenseNetwork<T>)>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn get(&self, name: &str) -> Option<&DenseNetwork<T>> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, net)| net)
    }
}

pub fn encode_checkpoint<T: Scalar>(networks: &[(&str, &DenseNetwork<T>)], meta: serde_json::Value) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        format: FORMAT.into(),
        version: VERSION,
        dtype: T::NAME.into(),
        networks: networks
            .iter()
            .map(|(name, net)| TensorEntry { name: (*name).into(), sizes: net.sizes().to_vec(), num_params: net.num_params() })
            .collect(),
        meta,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    for (_, net) in networks {
        for &p in net.params() {
            p.write_le(&mut out);
        }
    }
    Ok(out)
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl])?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format {} v{}", header.format, header.version)));
    }
    if header.dtype != T::NAME {
        return Err(Error::Checkpoint(format!("stored dtype {} but {} requested", header.dtype, T::NAME)));
    }
    let body = &bytes[nl + 1..];
    let total: usize = header.networks.iter().map(|e| e.num_params).sum();
    if body.len() != total * T::BYTES {
        return Err(Error::Checkpoint(format!("expected {} parameter bytes, found {}", total * T::BYTES, body.len())));
    }
    let mut chunks = body.chunks_exact(T::BYTES);
    let mut networks = Vec::with_capacity(header.networks.len());
    for e in header.networks {
        let params: Vec<T> = chunks.by_ref().take(e.num_params).map(T::read_le).collect();
        networks.push((e.name, DenseNetwork::from_params(&e.sizes, params)?));
    }
    Ok(Checkpoint { meta: header.meta, networks })
}

pub fn save_checkpoint<T: Scalar>(path: &Path, networks: &[(&str, &DenseNetwork<T>)], meta: serde_json::Value) -> Result<()> {
    let bytes = encode_checkpoint(networks, meta)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn roundtrip_bytes_and_file() {
        let mut r = rng::seeded(3, 0);
        let a = DenseNetwork::<f32>::new(&[5, 8, 3], &mut r);
        let b = DenseNetwork::<f32>::new(&[2, 1], &mut r);
        let bytes = encode_checkpoint(&[("a", &a), ("b", &b)], serde_json::json!({"episode": 7})).unwrap();
        let ck = decode_checkpoint::<f32>(&bytes).unwrap();
        assert_eq!(ck.get("a"), Some(&a));
        assert_eq!(ck.get("b"), Some(&b));
        assert_eq!(ck.meta["episode"], 7);
        assert!(decode_checkpoint::<f64>(&bytes).is_err());
        assert!(decode_checkpoint::<f32>(&bytes[..bytes.len() - 1]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck").join("net.bin");
        save_checkpoint(&path, &[("a", &a)], serde_json::Value::Null).unwrap();
        assert_eq!(load_checkpoint::<f32>(&path).unwrap().get("a"), Some(&a));
    }
}
