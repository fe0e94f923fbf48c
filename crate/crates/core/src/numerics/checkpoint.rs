//! Named-tensor container.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "PDAC-CKPT\x01"
//! metadata_len, metadata (UTF-8 JSON)
//! tensor_count
//! per tensor: name_len, name (UTF-8), rank, extents[rank], payload (f32 LE)
//! ```

use std::io::{self, Read, Write};

use super::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 10] = b"PDAC-CKPT\x01";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic header)")]
    BadMagic,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), CheckpointError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        write_bytes(w, self.metadata.as_bytes())?;
        write_u32(w, self.tensors.len())?;
        for (name, t) in &self.tensors {
            write_bytes(w, name.as_bytes())?;
            write_u32(w, t.shape().len())?;
            for &d in t.shape() {
                write_u32(w, d)?;
            }
            let mut payload = Vec::with_capacity(t.len() * 4);
            for &v in t.data() {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&payload)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 10];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let metadata = String::from_utf8(read_bytes(r)?)
            .map_err(|_| CheckpointError::Malformed("metadata is not UTF-8".into()))?;
        let count = read_u32(r)?;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name = String::from_utf8(read_bytes(r)?)
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
            let rank = read_u32(r)?;
            let shape = (0..rank).map(|_| read_u32(r)).collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let mut raw = vec![0u8; n * 4];
            r.read_exact(&mut raw)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let t = Tensor::new(shape, data)
                .map_err(|e| CheckpointError::Malformed(format!("tensor {name}: {e}")))?;
            tensors.push((name, t));
        }
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        let mut f = io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

fn write_u32(w: &mut impl Write, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn write_bytes(w: &mut impl Write, bytes: &[u8]) -> io::Result<()> {
    write_u32(w, bytes.len())?;
    w.write_all(bytes)
}

fn read_u32(r: &mut impl Read) -> Result<usize, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn read_bytes(r: &mut impl Read) -> Result<Vec<u8>, CheckpointError> {
    let n = read_u32(r)?;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
