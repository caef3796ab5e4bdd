use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine, the oracle, the benchmark harness and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("block size {0} must be a power of two in 16..=8192")]
    NonPowerOfTwoBlock(usize),
    #[error("fft size {fft_size} must equal twice the block size {block_size}")]
    FftSizeMismatch { block_size: usize, fft_size: usize },
    #[error("input channels {input} must be 1 or equal to output channels {output}")]
    BadChannelCombination { input: usize, output: usize },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("length must be nonzero")]
    ZeroLength,

    #[error("buffer length {actual} does not match expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("DC or Nyquist bin has a nonzero imaginary part")]
    NonRealEdgeBins,

    #[error("filters have unequal lengths ({first} vs {other})")]
    FilterLengthMismatch { first: usize, other: usize },
    #[error("filter set is empty or has zero-length filters")]
    EmptyFilter,
    #[error("mode {mode} is inconsistent with {input} input / {output} output channels")]
    ModeChannelMismatch {
        mode: &'static str,
        input: usize,
        output: usize,
    },
    #[error("block shape {actual_channels}x{actual_frames} does not match expected {expected_channels}x{expected_frames}")]
    ShapeMismatch {
        expected_channels: usize,
        expected_frames: usize,
        actual_channels: usize,
        actual_frames: usize,
    },
    #[error("input block contains NaN or infinite samples")]
    NonFiniteInput,
    #[error("synthesis filters have {synth} channels but feedback filters have {fc}")]
    ChannelCountMismatch { synth: usize, fc: usize },
    #[error("oracle input is empty")]
    EmptyInput,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("backend `{0}` is not available")]
    BackendUnavailable(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("out of memory allocating {0} bytes")]
    OutOfMemory(usize),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("unsupported file format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header in {path}: {reason}")]
    CorruptHeader { path: PathBuf, reason: String },
    #[error("sample rate {found} Hz does not match configured {expected} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
