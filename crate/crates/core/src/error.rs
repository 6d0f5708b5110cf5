use thiserror::Error;

/// Errors shared by every processing stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {len} samples, need at least {min}")]
    InputTooShort { len: usize, min: usize },

    #[error("non-finite sample in channel {channel} at index {index}")]
    NonFiniteInput { channel: usize, index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample-rate offset {ppm} ppm outside supported range of +/-{limit} ppm")]
    SroOutOfRange { ppm: f64, limit: f64 },

    #[error(
        "phase-ramp validity violated at frame {frame}: accumulated drift {drift:.2} samples \
         exceeds window/4 = {limit:.2} samples"
    )]
    ValidityViolated { frame: usize, drift: f64, limit: f64 },

    #[error("position [{x}, {y}, {z}] lies outside the room")]
    Geometry { x: f64, y: f64, z: f64 },

    #[error("rt60 of {rt60} s is infeasible for this room: Sabine absorption {alpha:.3} >= 1")]
    InfeasibleRt60 { rt60: f64, alpha: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("trace/playback alignment: {0}")]
    Alignment(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
