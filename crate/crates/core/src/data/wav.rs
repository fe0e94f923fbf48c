use std::path::Path;

use super::DataError;
use crate::features::Waveform;

/// Reads a mono PCM WAV file (8–32 bit integer or 32-bit float) into
/// samples in `[-1, 1]`.
pub fn read_wav(path: &Path) -> Result<Waveform, DataError> {
    let wav_err = |e: hound::Error| DataError::Audio {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(DataError::Audio {
            path: path.to_path_buf(),
            message: format!("expected mono audio, found {} channels", spec.channels),
        });
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
    };
    Waveform::new(samples, spec.sample_rate).map_err(|e| DataError::Audio {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes 16-bit PCM mono with the same full-scale factor `read_wav` divides
/// by; samples are clipped to the representable range.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<(), DataError> {
    let wav_err = |e: hound::Error| DataError::Audio {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &wave.samples {
        writer
            .write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
            .map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let wave = Waveform::new(vec![0.0, 0.5, -0.5, 0.999], 8000).unwrap();
        write_wav(&path, &wave).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 8000);
        for (a, b) in wave.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }
}
