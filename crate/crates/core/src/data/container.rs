//! Little-endian tensor container:
//!
//! ```text
//! "PNOT" | version u32 | dtype u8 (0 real, 1 complex) | ndim u8 | ndim x u64 shape | f64 payload
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"PNOT";
pub const VERSION: u32 = 1;

pub fn encode_tensor(t: &Tensor<f64>) -> Result<Vec<u8>> {
    let ndim = u8::try_from(t.ndim()).map_err(|_| Error::config("tensor has more than 255 axes"))?;
    let mut out = Vec::with_capacity(10 + 8 * t.ndim() + 8 * t.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(u8::from(t.is_complex()));
    out.push(ndim);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error(format!(
                "truncated {what}: need {n} bytes, {} remain",
                self.bytes.len() - self.pos
            ))),
        }
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn error(&self, message: String) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message,
        }
    }
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor<f64>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        r.pos = 0;
        return Err(r.error("bad magic, expected \"PNOT\"".into()));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        r.pos -= 4;
        return Err(r.error(format!("unsupported version {version}")));
    }
    let dtype = r.take(1, "dtype")?[0];
    if dtype > 1 {
        r.pos -= 1;
        return Err(r.error(format!("unknown dtype {dtype}")));
    }
    let ndim = r.take(1, "ndim")?[0] as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = u64::from_le_bytes(r.take(8, "shape")?.try_into().expect("8 bytes"));
        shape.push(usize::try_from(d).map_err(|_| r.error(format!("extent {d} too large")))?);
    }
    let count = shape
        .iter()
        .try_fold(if dtype == 1 { 2usize } else { 1 }, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| r.error("shape overflows".into()))?;
    let payload_len = count
        .checked_mul(8)
        .ok_or_else(|| r.error("shape overflows".into()))?;
    let payload = r.take(payload_len, "payload")?;
    if r.pos != bytes.len() {
        return Err(r.error(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if dtype == 1 {
        Tensor::complex_from_interleaved(shape, data)
    } else {
        Tensor::from_vec(shape, data)
    }
}

pub fn save_tensor(path: &Path, t: &Tensor<f64>) -> Result<()> {
    fs::write(path, encode_tensor(t)?).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: &Path) -> Result<Tensor<f64>> {
    decode_tensor(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = Tensor::from_vec(vec![2], vec![1.0, -0.0]).unwrap();
        let b = encode_tensor(&t).unwrap();
        assert_eq!(&b[..4], b"PNOT");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!((b[8], b[9]), (0, 1));
        assert_eq!(&b[10..18], &2u64.to_le_bytes());
        assert_eq!(b.len(), 18 + 16);
        assert_eq!(decode_tensor(&b).unwrap().data()[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn scalar_and_complex_roundtrip() {
        let s = Tensor::scalar(3.25);
        assert_eq!(decode_tensor(&encode_tensor(&s).unwrap()).unwrap(), s);
        let c = Tensor::complex_from_interleaved(vec![2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(decode_tensor(&encode_tensor(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn corruption_names_the_offset() {
        let t = Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut b = encode_tensor(&t).unwrap();
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tensor(&bad), Err(Error::Format { offset: 0, .. })));
        let mut bad = b.clone();
        bad[4] = 2;
        assert!(matches!(decode_tensor(&bad), Err(Error::Format { offset: 4, .. })));
        b.truncate(b.len() - 3);
        assert!(matches!(decode_tensor(&b), Err(Error::Format { offset: 18, .. })));
    }
}
