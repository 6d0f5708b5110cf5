use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::TimeSignal;

/// Writes a signal as 32-bit float RIFF WAV.
pub fn write_wav<P: AsRef<Path>>(path: P, signal: &TimeSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: signal.channels() as u16,
        sample_rate: signal.sample_rate() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..signal.len() {
        for ch in 0..signal.channels() {
            writer.write_sample(signal.channel(ch)[i] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Reads a WAV file into f64 channels. Accepts float32 and signed
/// integer formats; integers are scaled to [-1, 1).
pub fn read_wav<P: AsRef<Path>>(path: P) -> Result<TimeSignal> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Parse("wav with zero channels".into()));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let frames = interleaved.len() / channels;
    let mut data = vec![Vec::with_capacity(frames); channels];
    for (i, v) in interleaved.into_iter().enumerate() {
        data[i % channels].push(v);
    }
    TimeSignal::new(data, spec.sample_rate as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip_preserves_f32_values() {
        let dir = std::env::temp_dir().join(format!("srosync_wav_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.wav");

        let samples: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.1).sin() as f32 as f64).collect();
        let sig = TimeSignal::new(vec![samples.clone(), samples.clone()], 16000.0).unwrap();
        write_wav(&path, &sig).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.channels(), 2);
        assert_eq!(back.len(), 64);
        for i in 0..64 {
            assert_eq!(back.channel(0)[i], samples[i]);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
