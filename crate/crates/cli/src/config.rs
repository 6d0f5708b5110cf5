//! Run configuration: a flat `key = value` text format, versioned,
//! with unknown keys rejected and physical invariants checked eagerly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use srosync::error::{Error, Result};
use srosync::resample::PhaseRamp;
use srosync::room::{SceneConfig, SroInjection, SroSetup};
use srosync::stft::StftConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Reference,
    Uncompensated,
    OracleComp,
    EstimatedComp,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Reference,
        Condition::Uncompensated,
        Condition::OracleComp,
        Condition::EstimatedComp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Reference => "reference",
            Condition::Uncompensated => "uncompensated",
            Condition::OracleComp => "oracle_comp",
            Condition::EstimatedComp => "estimated_comp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Condition::Reference),
            "uncompensated" => Ok(Condition::Uncompensated),
            "oracle_comp" => Ok(Condition::OracleComp),
            "estimated_comp" => Ok(Condition::EstimatedComp),
            other => Err(Error::Config(format!(
                "condition must be reference|uncompensated|oracle_comp|estimated_comp, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarMode {
    /// Identical program material on both channels, each resampled by
    /// its loudspeaker offset and mixed straight to the ears.
    Direct,
    /// Ears rendered through the room impulse responses.
    Room,
}

#[derive(Debug, Clone)]
pub enum PlaybackSource {
    /// Seeded Gaussian noise, identical in both channels.
    Noise,
    /// Stereo WAV file.
    Wav(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub stft: StftConfig,
    /// STFT window for playback compensation (hop = window/4).
    pub comp_window: usize,
    pub dwacd_distance: usize,
    pub dwacd_alpha_s: f64,
    pub dwacd_gamma: f64,
    pub activity_threshold_db: f64,
    pub lcmv_alpha: f64,
    pub solo_phase_s: f64,
    pub condition: Condition,
    pub duration_s: f64,
    pub seed: u64,
    pub playback: PlaybackSource,
    pub output_dir: PathBuf,
    pub ear_mode: EarMode,
}

impl RunConfig {
    /// The evaluation setup: evaluation-scene geometry, 8192/2048 STFT,
    /// alpha_s = 0.95, diagonal loading 1e-6.
    pub fn evaluation_default() -> Self {
        Self {
            scene: SceneConfig::evaluation_scene(),
            stft: StftConfig::default(),
            comp_window: 2048,
            dwacd_distance: 8,
            dwacd_alpha_s: 0.95,
            dwacd_gamma: 0.95,
            activity_threshold_db: 40.0,
            lcmv_alpha: 1e-6,
            solo_phase_s: 10.0,
            condition: Condition::EstimatedComp,
            duration_s: 120.0,
            seed: 7,
            playback: PlaybackSource::Noise,
            output_dir: PathBuf::from("out"),
            ear_mode: EarMode::Direct,
        }
    }

    pub fn dwacd_config(&self) -> srosync::dwacd::DwacdConfig {
        let mut cfg = srosync::dwacd::DwacdConfig::from_stft(&self.stft);
        cfg.temporal_distance = self.dwacd_distance;
        cfg.coherence_smoothing = self.dwacd_alpha_s;
        cfg.estimate_smoothing = self.dwacd_gamma;
        cfg.activity_threshold_db = self.activity_threshold_db;
        cfg.warmup_frames = self.dwacd_distance + 5;
        cfg
    }

    /// Compensation framing (window/4 hop, one-sided bins).
    pub fn comp_stft(&self) -> StftConfig {
        StftConfig {
            window_size: self.comp_window,
            hop_size: self.comp_window / 4,
            fft_size: self.comp_window,
            ..self.stft
        }
    }

    /// Escalates the compensation window until the accumulated drift of
    /// the run stays inside the phase-ramp validity bound.
    pub fn effective_comp_stft(&self) -> Result<StftConfig> {
        let mut window = self.comp_window;
        loop {
            let cfg = StftConfig {
                window_size: window,
                hop_size: window / 4,
                fft_size: window,
                ..self.stft
            };
            let worst = self.worst_offset_ppm();
            let drift = self.duration_s * self.stft.sample_rate * worst.abs() * 1e-6;
            if drift <= window as f64 / 4.0 {
                return Ok(cfg);
            }
            if window >= 1 << 17 {
                return Err(Error::ValidityViolated {
                    frame: cfg.frames_for_len((self.duration_s * self.stft.sample_rate) as usize),
                    drift,
                    limit: window as f64 / 4.0,
                });
            }
            window *= 4;
        }
    }

    fn worst_offset_ppm(&self) -> f64 {
        let s = &self.scene.sro;
        s.loudspeakers
            .iter()
            .map(|e| (e.ppm() + s.primary.ppm()).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.stft.validate()?;
        if !self.comp_window.is_power_of_two() {
            return Err(Error::Config(format!(
                "comp_window {} must be a power of two",
                self.comp_window
            )));
        }
        if self.condition == Condition::EstimatedComp && self.duration_s < 32.0 {
            return Err(Error::Config(format!(
                "estimated_comp needs duration_s >= 32 (warm-up + 30 s), got {}",
                self.duration_s
            )));
        }
        if !(self.solo_phase_s > 1.0) {
            return Err(Error::Config("solo_phase_s must exceed 1 s".into()));
        }
        // Accumulated drift over the run must respect the phase-ramp
        // validity condition on the estimation framing.
        let frames = self
            .stft
            .frames_for_len((self.duration_s * self.stft.sample_rate) as usize);
        for q in 0..2 {
            let eps = self.scene.sro.combined(q)?;
            PhaseRamp::new(eps, self.stft).validate_frames(frames)?;
        }
        Ok(())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "version",
    "room",
    "rt60",
    "source_1",
    "source_2",
    "array_center",
    "array_radius",
    "mic_count",
    "ear_left",
    "ear_right",
    "sample_rate",
    "noise_level_db",
    "sro_ppm",
    "sro_injection",
    "ear_mode",
    "external_rirs",
    "window",
    "hop",
    "comp_window",
    "dwacd_distance",
    "dwacd_alpha_s",
    "dwacd_gamma",
    "activity_threshold_db",
    "lcmv_alpha",
    "solo_phase_s",
    "condition",
    "duration_s",
    "seed",
    "playback",
    "output_dir",
];

/// Parses and validates a config file.
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key: {key}")));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key: {key}")));
        }
    }
    let version: u32 = get_parsed(&map, "version")?
        .ok_or_else(|| Error::Config("missing required key: version".into()))?;
    if version != 1 {
        return Err(Error::Config(format!("unsupported config version {version}")));
    }

    let mut cfg = RunConfig::evaluation_default();

    if let Some(v) = map.get("room") {
        cfg.scene.room = parse_vec3("room", v)?;
    }
    if let Some(v) = get_parsed(&map, "rt60")? {
        cfg.scene.rt60 = v;
    }
    if let Some(v) = map.get("source_1") {
        cfg.scene.sources[0] = parse_vec3("source_1", v)?;
    }
    if let Some(v) = map.get("source_2") {
        cfg.scene.sources[1] = parse_vec3("source_2", v)?;
    }
    if let Some(v) = map.get("array_center") {
        cfg.scene.array_center = parse_vec3("array_center", v)?;
    }
    if let Some(v) = get_parsed(&map, "array_radius")? {
        cfg.scene.array_radius = v;
    }
    if let Some(v) = get_parsed(&map, "mic_count")? {
        cfg.scene.mic_count = v;
    }
    match (map.get("ear_left"), map.get("ear_right")) {
        (Some(l), Some(r)) => {
            cfg.scene.ears = Some([parse_vec3("ear_left", l)?, parse_vec3("ear_right", r)?]);
        }
        (None, None) => {}
        _ => return Err(Error::Config("ear_left and ear_right must be given together".into())),
    }
    if let Some(v) = get_parsed(&map, "sample_rate")? {
        cfg.scene.sample_rate = v;
        cfg.stft.sample_rate = v;
    }
    if let Some(v) = map.get("noise_level_db") {
        cfg.scene.noise_level_db =
            if v == "off" { None } else { Some(parse_num("noise_level_db", v)?) };
    }
    if let Some(v) = map.get("sro_ppm") {
        let parts = parse_numbers("sro_ppm", v, 3)?;
        cfg.scene.sro = SroSetup::new(parts[0], parts[1], parts[2])?;
    }
    if let Some(v) = map.get("sro_injection") {
        cfg.scene.sro_injection = match v.as_str() {
            "per_path" => SroInjection::PerPath,
            "mic_compound" => SroInjection::MicCompound,
            other => {
                return Err(Error::Config(format!(
                    "sro_injection must be per_path|mic_compound, got {other}"
                )))
            }
        };
    }
    if let Some(v) = map.get("ear_mode") {
        cfg.ear_mode = match v.as_str() {
            "direct" => EarMode::Direct,
            "room" => EarMode::Room,
            other => {
                return Err(Error::Config(format!("ear_mode must be direct|room, got {other}")))
            }
        };
    }
    if let Some(v) = map.get("external_rirs") {
        cfg.scene.external_rirs = Some(PathBuf::from(v));
    }
    if let Some(v) = get_parsed(&map, "window")? {
        cfg.stft.window_size = v;
        cfg.stft.fft_size = v;
    }
    if let Some(v) = get_parsed(&map, "hop")? {
        cfg.stft.hop_size = v;
    }
    if let Some(v) = get_parsed(&map, "comp_window")? {
        cfg.comp_window = v;
    }
    if let Some(v) = get_parsed(&map, "dwacd_distance")? {
        cfg.dwacd_distance = v;
    }
    if let Some(v) = get_parsed(&map, "dwacd_alpha_s")? {
        cfg.dwacd_alpha_s = v;
    }
    if let Some(v) = get_parsed(&map, "dwacd_gamma")? {
        cfg.dwacd_gamma = v;
    }
    if let Some(v) = get_parsed(&map, "activity_threshold_db")? {
        cfg.activity_threshold_db = v;
    }
    if let Some(v) = get_parsed(&map, "lcmv_alpha")? {
        cfg.lcmv_alpha = v;
    }
    if let Some(v) = get_parsed(&map, "solo_phase_s")? {
        cfg.solo_phase_s = v;
    }
    if let Some(v) = map.get("condition") {
        cfg.condition = Condition::parse(v)?;
    }
    if let Some(v) = get_parsed(&map, "duration_s")? {
        cfg.duration_s = v;
    }
    if let Some(v) = get_parsed(&map, "seed")? {
        cfg.seed = v;
        cfg.scene.noise_seed = v;
    }
    if let Some(v) = map.get("playback") {
        cfg.playback = if v == "noise" {
            PlaybackSource::Noise
        } else if let Some(path) = v.strip_prefix("wav:") {
            PlaybackSource::Wav(PathBuf::from(path))
        } else {
            return Err(Error::Config(format!("playback must be noise or wav:<path>, got {v}")));
        };
    }
    if let Some(v) = map.get("output_dir") {
        cfg.output_dir = PathBuf::from(v);
    }

    cfg.validate()?;
    Ok(cfg)
}

fn get_parsed<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("key {key}: cannot parse value {v}"))),
    }
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Config(format!("key {key}: cannot parse value {v}")))
}

fn parse_numbers(key: &str, v: &str, count: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = v
        .split_whitespace()
        .map(|p| parse_num(key, p))
        .collect::<Result<_>>()?;
    if parts.len() != count {
        return Err(Error::Config(format!("key {key}: expected {count} numbers, got {}", parts.len())));
    }
    Ok(parts)
}

fn parse_vec3(key: &str, v: &str) -> Result<[f64; 3]> {
    let parts = parse_numbers(key, v, 3)?;
    Ok([parts[0], parts[1], parts[2]])
}
