//! Synthesis filtering with integrated feedback cancellation.
//!
//! One call to [`Auralizer::auralize_into`] runs, for microphone block `n`:
//!
//! 1. `m~[n] = gain * m[n] - f^[n]`, with `f^[n]` computed during block `n-1`;
//! 2. `l[n]` = synthesis convolution of `m~[n]` (one input, `C_out` outputs);
//! 3. `f^[n+1]` = sum over channels of the feedback-path convolution of `l[n]`.
//!
//! The feedback filters are expected to include the whole loop latency
//! measured from the moment `l[n]` starts playing, which is the start of input
//! block `n + 1`.

use crate::backend::Backend;
use crate::config::{validate_config, AudioBlock, EngineConfig, Mode};
use crate::convolver::Convolver;
use crate::dft::DftPlan;
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Auralizer {
    synth: Convolver,
    fc: Convolver,
    feedback_estimate: Vec<f32>,
    conditioned: Vec<f32>,
    fc_out: Vec<f32>,
    input_gain: f32,
}

impl Auralizer {
    pub fn new(synth_filters: &[Vec<f32>], fc_filters: &[Vec<f32>], cfg: EngineConfig) -> Result<Self> {
        Self::with_backend(synth_filters, fc_filters, cfg, Backend::Reference)
    }

    /// `cfg` must describe one input and `C_out` outputs.
    pub fn with_backend(
        synth_filters: &[Vec<f32>],
        fc_filters: &[Vec<f32>],
        cfg: EngineConfig,
        backend: Backend,
    ) -> Result<Self> {
        let cfg = validate_config(cfg)?;
        if synth_filters.len() != fc_filters.len() {
            return Err(Error::ChannelCountMismatch {
                synth: synth_filters.len(),
                fc: fc_filters.len(),
            });
        }
        if cfg.input_channels != 1 {
            return Err(Error::BadChannelCombination {
                input: cfg.input_channels,
                output: cfg.output_channels,
            });
        }
        let plan = DftPlan::new(cfg.fft_size)?;
        let synth = Convolver::with_plan(synth_filters, cfg, Mode::Broadcast, backend, plan.clone())?;
        let fc_cfg = cfg.with_channels(cfg.output_channels, cfg.output_channels)?;
        let fc = Convolver::with_plan(fc_filters, fc_cfg, Mode::Elementwise, backend, plan)?;
        let n = cfg.block_size;
        Ok(Auralizer {
            feedback_estimate: vec![0.0; n],
            conditioned: vec![0.0; n],
            fc_out: vec![0.0; cfg.output_channels * n],
            input_gain: 1.0,
            synth,
            fc,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        self.synth.config()
    }

    pub fn synth_partitions(&self) -> usize {
        self.synth.partitions()
    }

    pub fn fc_partitions(&self) -> usize {
        self.fc.partitions()
    }

    pub fn input_gain(&self) -> f32 {
        self.input_gain
    }

    /// Scalar stand-in for the input pre-processing stage.
    pub fn set_input_gain(&mut self, gain: f32) {
        self.input_gain = gain;
    }

    /// Estimate that will be subtracted from the next microphone block.
    pub fn feedback_estimate(&self) -> &[f32] {
        &self.feedback_estimate
    }

    /// The cancelled input `m~` fed to the synthesis stage during the last call.
    pub fn conditioned_input(&self) -> &[f32] {
        &self.conditioned
    }

    pub fn auralize(&mut self, mic: &AudioBlock) -> Result<AudioBlock> {
        let cfg = *self.config();
        if mic.channels() != 1 || mic.frames() != cfg.block_size {
            return Err(Error::ShapeMismatch {
                expected_channels: 1,
                expected_frames: cfg.block_size,
                actual_channels: mic.channels(),
                actual_frames: mic.frames(),
            });
        }
        let mut out = AudioBlock::zeros(cfg.output_channels, cfg.block_size);
        self.auralize_into(mic.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    /// Fused, allocation-free pipeline step. The loudspeaker block written to
    /// `speakers` is consumed by the feedback stage without leaving the engine.
    pub fn auralize_into(&mut self, mic: &[f32], speakers: &mut [f32]) -> Result<()> {
        let n = self.config().block_size;
        if mic.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: mic.len(),
            });
        }
        if !mic.iter().all(|s| s.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        for ((m, &raw), &fb) in self.conditioned.iter_mut().zip(mic).zip(&self.feedback_estimate) {
            *m = self.input_gain * raw - fb;
        }
        self.synth.convolve_into(&self.conditioned, speakers)?;
        self.fc.convolve_into(speakers, &mut self.fc_out)?;
        self.feedback_estimate.fill(0.0);
        for channel in self.fc_out.chunks_exact(n) {
            for (e, &v) in self.feedback_estimate.iter_mut().zip(channel) {
                *e += v;
            }
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        self.synth.reset();
        self.fc.reset();
        self.feedback_estimate.fill(0.0);
        self.conditioned.fill(0.0);
        self.fc_out.fill(0.0);
    }
}
