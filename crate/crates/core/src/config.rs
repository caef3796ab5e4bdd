//! Engine configuration, block containers and sizing arithmetic.

use crate::error::{Error, Result};

pub const MIN_BLOCK_SIZE: usize = 16;
pub const MAX_BLOCK_SIZE: usize = 8192;

/// Sizing parameters shared by every stage of the engine.
///
/// A config is only meaningful after [`validate_config`] accepted it; all
/// constructors in this crate validate on the way in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EngineConfig {
    pub sample_rate_hz: u32,
    pub block_size: usize,
    pub fft_size: usize,
    pub input_channels: usize,
    pub output_channels: usize,
}

impl EngineConfig {
    /// Builds a validated config with `fft_size = 2 * block_size`.
    pub fn new(
        sample_rate_hz: u32,
        block_size: usize,
        input_channels: usize,
        output_channels: usize,
    ) -> Result<Self> {
        validate_config(EngineConfig {
            sample_rate_hz,
            block_size,
            fft_size: 2 * block_size,
            input_channels,
            output_channels,
        })
    }

    /// Number of complex bins in one real spectrum, `n_x + 1`.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn with_channels(self, input_channels: usize, output_channels: usize) -> Result<Self> {
        validate_config(EngineConfig {
            input_channels,
            output_channels,
            ..self
        })
    }

    pub fn latency_budget(&self) -> f64 {
        self.block_size as f64 / self.sample_rate_hz as f64
    }
}

/// Returns `cfg` unchanged when every config invariant holds.
pub fn validate_config(cfg: EngineConfig) -> Result<EngineConfig> {
    if cfg.sample_rate_hz == 0 {
        return Err(Error::ZeroSampleRate);
    }
    let n = cfg.block_size;
    if !n.is_power_of_two() || !(MIN_BLOCK_SIZE..=MAX_BLOCK_SIZE).contains(&n) {
        return Err(Error::NonPowerOfTwoBlock(n));
    }
    if cfg.fft_size != 2 * n {
        return Err(Error::FftSizeMismatch {
            block_size: n,
            fft_size: cfg.fft_size,
        });
    }
    let (input, output) = (cfg.input_channels, cfg.output_channels);
    if output == 0 || !(input == 1 || input == output) {
        return Err(Error::BadChannelCombination { input, output });
    }
    Ok(cfg)
}

/// Number of uniform partitions needed to cover a filter of `filter_len` taps.
pub fn partition_count(filter_len: usize, block_size: usize) -> Result<usize> {
    if filter_len == 0 || block_size == 0 {
        return Err(Error::ZeroLength);
    }
    Ok(filter_len.div_ceil(block_size))
}

/// Per-block processing deadline in seconds, `n_x / f_s`.
pub fn latency_budget(cfg: &EngineConfig) -> Result<f64> {
    Ok(validate_config(*cfg)?.latency_budget())
}

/// How input channels map onto filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One input channel filtered by every output filter.
    Broadcast,
    /// Input channel `c` filtered by filter `c` only.
    Elementwise,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Broadcast => "broadcast",
            Mode::Elementwise => "elementwise",
        }
    }

    /// Mode implied by a config's channel counts. `1 -> 1` is treated as broadcast.
    pub fn for_config(cfg: &EngineConfig) -> Mode {
        if cfg.input_channels == 1 {
            Mode::Broadcast
        } else {
            Mode::Elementwise
        }
    }
}

/// Planar (channel-major) block of finite `f32` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    channels: usize,
    frames: usize,
    data: Vec<f32>,
}

impl AudioBlock {
    pub fn zeros(channels: usize, frames: usize) -> Self {
        AudioBlock {
            channels,
            frames,
            data: vec![0.0; channels * frames],
        }
    }

    pub fn from_planar(channels: usize, frames: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || frames == 0 {
            return Err(Error::ZeroLength);
        }
        if data.len() != channels * frames {
            return Err(Error::LengthMismatch {
                expected: channels * frames,
                actual: data.len(),
            });
        }
        if !all_finite(&data) {
            return Err(Error::NonFiniteInput);
        }
        Ok(AudioBlock {
            channels,
            frames,
            data,
        })
    }

    pub fn from_channels(channels: &[Vec<f32>]) -> Result<Self> {
        let frames = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != frames) {
            return Err(Error::LengthMismatch {
                expected: frames,
                actual: channels.iter().map(Vec::len).find(|&l| l != frames).unwrap_or(0),
            });
        }
        let data = channels.iter().flatten().copied().collect();
        Self::from_planar(channels.len(), frames, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.frames..(c + 1) * self.frames]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        &mut self.data[c * self.frames..(c + 1) * self.frames]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.data
    }
}

pub(crate) fn all_finite(samples: &[f32]) -> bool {
    samples.iter().all(|s| s.is_finite())
}
