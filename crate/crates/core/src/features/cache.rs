//! Binary feature cache.
//!
//! ```text
//! "PDAC-FEAT\x01", record_count: u32
//! per record: id_len: u32, id (UTF-8), t: u32,
//!             t×40 LFBE, t×3 energy, t×3 pitch   (f32 little-endian)
//! ```

use std::io::{self, Read, Write};
use std::path::Path;

use super::{FeatureError, FeatureSequence, FrameFeatures, LFBE_DIM};

pub const FEATURE_MAGIC: &[u8; 10] = b"PDAC-FEAT\x01";

pub fn write_cache<'a>(
    w: &mut impl Write,
    records: impl ExactSizeIterator<Item = (&'a str, &'a FeatureSequence)>,
) -> Result<(), FeatureError> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    for (id, seq) in records {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        w.write_all(&(seq.n_frames() as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(seq.n_frames() * (LFBE_DIM + 6) * 4);
        let mut put = |v: f64| buf.extend_from_slice(&(v as f32).to_le_bytes());
        for f in &seq.frames {
            f.lfbe.iter().for_each(|&v| put(v));
        }
        for f in &seq.frames {
            f.energy.iter().for_each(|&v| put(v));
        }
        for f in &seq.frames {
            f.pitch.iter().for_each(|&v| put(v));
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_cache(r: &mut impl Read) -> Result<Vec<(String, FeatureSequence)>, FeatureError> {
    let mut magic = [0u8; 10];
    r.read_exact(&mut magic)?;
    if &magic != FEATURE_MAGIC {
        return Err(FeatureError::Cache("bad magic header".into()));
    }
    let count = read_u32(r)?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id_len = read_u32(r)?;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id)?;
        let id = String::from_utf8(id).map_err(|_| FeatureError::Cache("id is not UTF-8".into()))?;
        let t = read_u32(r)?;
        let mut raw = vec![0u8; t * (LFBE_DIM + 6) * 4];
        r.read_exact(&mut raw)?;
        let vals: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let (lfbe, rest) = vals.split_at(t * LFBE_DIM);
        let (energy, pitch) = rest.split_at(t * 3);
        let frames = (0..t)
            .map(|i| {
                let mut f = FrameFeatures::default();
                f.lfbe.copy_from_slice(&lfbe[i * LFBE_DIM..(i + 1) * LFBE_DIM]);
                f.energy.copy_from_slice(&energy[i * 3..i * 3 + 3]);
                f.pitch.copy_from_slice(&pitch[i * 3..i * 3 + 3]);
                f
            })
            .collect();
        out.push((id, FeatureSequence { frames }));
    }
    Ok(out)
}

pub fn save_cache(path: &Path, records: &[(String, FeatureSequence)]) -> Result<(), FeatureError> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    write_cache(&mut f, records.iter().map(|(id, s)| (id.as_str(), s)))?;
    f.flush()?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<Vec<(String, FeatureSequence)>, FeatureError> {
    read_cache(&mut io::BufReader::new(std::fs::File::open(path)?))
}

fn read_u32(r: &mut impl Read) -> io::Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}
