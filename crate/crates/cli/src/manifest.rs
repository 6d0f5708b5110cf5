//! Run manifest: what was produced, from which inputs, with content
//! hashes so reruns can be checked for bit-exact reproduction.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use srosync::error::{Error, Result};

/// FNV-1a over a byte stream.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn hash_file<P: AsRef<Path>>(path: P) -> Result<u64> {
    Ok(fnv64(&std::fs::read(path)?))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    /// |final estimate - true combined offset| per loudspeaker, ppm.
    pub final_sro_error_ppm: Option<[f64; 2]>,
    pub mean_abs_delta_ic: f64,
    pub mean_abs_delta_itd_us: f64,
    /// Residual |delta IC| at and above 2 kHz.
    pub high_band_abs_delta_ic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub condition: String,
    pub software_version: String,
    pub config_hash: u64,
    pub seed: u64,
    pub sro_ppm: [f64; 3],
    pub files: Vec<(PathBuf, u64)>,
    pub summary: Summary,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "srosync manifest v1");
        let _ = writeln!(out, "software_version = {}", self.software_version);
        let _ = writeln!(out, "condition = {}", self.condition);
        let _ = writeln!(out, "config_hash = {:016x}", self.config_hash);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(
            out,
            "sro_ppm = {} {} {}",
            self.sro_ppm[0], self.sro_ppm[1], self.sro_ppm[2]
        );
        for (path, hash) in &self.files {
            let _ = writeln!(out, "file = {} {:016x}", path.display(), hash);
        }
        if let Some(err) = self.summary.final_sro_error_ppm {
            let _ = writeln!(out, "summary_final_sro_error_ppm_q1 = {}", err[0]);
            let _ = writeln!(out, "summary_final_sro_error_ppm_q2 = {}", err[1]);
        }
        let _ = writeln!(out, "summary_mean_abs_delta_ic = {}", self.summary.mean_abs_delta_ic);
        let _ = writeln!(
            out,
            "summary_mean_abs_delta_itd_us = {}",
            self.summary.mean_abs_delta_itd_us
        );
        let _ = writeln!(
            out,
            "summary_high_band_abs_delta_ic = {}",
            self.summary.high_band_abs_delta_ic
        );
        out
    }

    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut m = RunManifest {
            condition: String::new(),
            software_version: String::new(),
            config_hash: 0,
            seed: 0,
            sro_ppm: [0.0; 3],
            files: Vec::new(),
            summary: Summary::default(),
        };
        for line in text.lines().skip(1) {
            let Some((key, value)) = line.split_once('=') else { continue };
            let key = key.trim();
            let value = value.trim();
            match key {
                "software_version" => m.software_version = value.to_string(),
                "condition" => m.condition = value.to_string(),
                "config_hash" => {
                    m.config_hash = u64::from_str_radix(value, 16)
                        .map_err(|_| Error::Parse(format!("config_hash {value}")))?;
                }
                "seed" => {
                    m.seed =
                        value.parse().map_err(|_| Error::Parse(format!("seed {value}")))?;
                }
                "sro_ppm" => {
                    let parts: Vec<f64> = value
                        .split_whitespace()
                        .map(|p| p.parse().map_err(|_| Error::Parse(format!("sro_ppm {p}"))))
                        .collect::<Result<_>>()?;
                    if parts.len() == 3 {
                        m.sro_ppm = [parts[0], parts[1], parts[2]];
                    }
                }
                "file" => {
                    let mut it = value.rsplitn(2, ' ');
                    let hash = it.next().unwrap_or("");
                    let path = it.next().unwrap_or("");
                    m.files.push((
                        PathBuf::from(path),
                        u64::from_str_radix(hash, 16)
                            .map_err(|_| Error::Parse(format!("file hash {hash}")))?,
                    ));
                }
                "summary_final_sro_error_ppm_q1" => {
                    let v = value.parse().unwrap_or(f64::NAN);
                    let e = m.summary.final_sro_error_ppm.get_or_insert([0.0; 2]);
                    e[0] = v;
                }
                "summary_final_sro_error_ppm_q2" => {
                    let v = value.parse().unwrap_or(f64::NAN);
                    let e = m.summary.final_sro_error_ppm.get_or_insert([0.0; 2]);
                    e[1] = v;
                }
                "summary_mean_abs_delta_ic" => {
                    m.summary.mean_abs_delta_ic = value.parse().unwrap_or(f64::NAN);
                }
                "summary_mean_abs_delta_itd_us" => {
                    m.summary.mean_abs_delta_itd_us = value.parse().unwrap_or(f64::NAN);
                }
                "summary_high_band_abs_delta_ic" => {
                    m.summary.high_band_abs_delta_ic = value.parse().unwrap_or(f64::NAN);
                }
                _ => {}
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_vectors() {
        assert_eq!(fnv64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn manifest_roundtrip() {
        let m = RunManifest {
            condition: "oracle_comp".into(),
            software_version: "0.1.0".into(),
            config_hash: 0xdeadbeef,
            seed: 42,
            sro_ppm: [0.0, 10.0, -100.0],
            files: vec![(PathBuf::from("ears.wav"), 0x1234)],
            summary: Summary {
                final_sro_error_ppm: Some([0.25, 0.5]),
                mean_abs_delta_ic: 0.01,
                mean_abs_delta_itd_us: 3.5,
                high_band_abs_delta_ic: 0.2,
            },
        };
        let dir = std::env::temp_dir().join(format!("srosync_manifest_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("manifest.txt");
        m.write(&path).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(m, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
