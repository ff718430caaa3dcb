//! Model checkpoint file: a JSON header followed by one tensor record per named parameter.
//!
//! ```text
//! "PNOC" | version u32 | header_len u64 | header JSON | count u32
//!        | count x (name_len u32 | name UTF-8 | record_len u64 | tensor container bytes)
//! ```

use std::fs;
use std::path::Path;

use crate::data::container::{decode_tensor, encode_tensor, Reader};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PNOC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub params: Vec<(String, Tensor<f64>)>,
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let count = u32::try_from(self.params.len()).map_err(|_| Error::config("too many parameters"))?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&count.to_le_bytes());
        for (name, t) in &self.params {
            let name_len = u32::try_from(name.len()).map_err(|_| Error::config("parameter name too long"))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let record = encode_tensor(t)?;
            out.extend_from_slice(&(record.len() as u64).to_le_bytes());
            out.extend_from_slice(&record);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            r.pos = 0;
            return Err(r.error("bad magic, expected \"PNOC\"".into()));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            r.pos -= 4;
            return Err(r.error(format!("unsupported checkpoint version {version}")));
        }
        let header_len = r.u64("header length")?;
        let header_len = usize::try_from(header_len).map_err(|_| r.error("header too large".into()))?;
        let header_bytes = r.take(header_len, "header")?;
        let header = serde_json::from_slice(header_bytes).map_err(|e| Error::Format {
            offset: (r.pos - header_len) as u64,
            message: format!("invalid header JSON: {e}"),
        })?;
        let count = r.u32("parameter count")?;
        let mut params = Vec::with_capacity(count.min(1024) as usize);
        for _ in 0..count {
            let name_len = r.u32("name length")? as usize;
            let start = r.pos;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| Error::Format {
                    offset: start as u64,
                    message: "parameter name is not UTF-8".into(),
                })?
                .to_string();
            let record_len = r.u64("record length")?;
            let record_len = usize::try_from(record_len).map_err(|_| r.error("record too large".into()))?;
            let base = r.pos;
            let record = r.take(record_len, "tensor record")?;
            let t = decode_tensor(record).map_err(|e| match e {
                Error::Format { offset, message } => Error::Format {
                    offset: base as u64 + offset,
                    message: format!("parameter `{name}`: {message}"),
                },
                other => other,
            })?;
            params.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(r.error(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
