//! Uniform partitioned overlap-save convolution with a frequency delay line.

use crate::backend::{Backend, OutputLane};
use crate::config::{all_finite, validate_config, AudioBlock, EngineConfig, Mode};
use crate::dft::DftPlan;
use crate::error::{Error, Result};
use crate::partition::{FrequencyDelayLine, PartitionedFilterSet};

/// Streaming block convolver.
///
/// Each call to [`Convolver::convolve_into`] consumes one `C_in x n_x` block and
/// produces one `C_out x n_x` block. After `B` calls the concatenated output is
/// the first `B * n_x` samples of the linear convolution of the concatenated
/// input with each filter.
#[derive(Debug)]
pub struct Convolver {
    cfg: EngineConfig,
    mode: Mode,
    backend: Backend,
    plan: DftPlan,
    filters: PartitionedFilterSet,
    fdls: Vec<FrequencyDelayLine>,
    windows: Vec<Vec<f32>>,
    work: Vec<f32>,
    scratch: Vec<num_complex::Complex32>,
    lanes: Vec<OutputLane>,
    blocks_processed: u64,
}

impl Convolver {
    /// Partitions and transforms `filters` (one per output channel).
    pub fn new(filters: &[Vec<f32>], cfg: EngineConfig, mode: Mode) -> Result<Self> {
        Self::with_backend(filters, cfg, mode, Backend::Reference)
    }

    pub fn with_backend(
        filters: &[Vec<f32>],
        cfg: EngineConfig,
        mode: Mode,
        backend: Backend,
    ) -> Result<Self> {
        let cfg = validate_config(cfg)?;
        let plan = DftPlan::new(cfg.fft_size)?;
        Self::with_plan(filters, cfg, mode, backend, plan)
    }

    pub(crate) fn with_plan(
        filters: &[Vec<f32>],
        cfg: EngineConfig,
        mode: Mode,
        backend: Backend,
        plan: DftPlan,
    ) -> Result<Self> {
        let mode_ok = match mode {
            Mode::Broadcast => cfg.input_channels == 1,
            Mode::Elementwise => cfg.input_channels == cfg.output_channels,
        };
        if !mode_ok || filters.len() != cfg.output_channels {
            return Err(Error::ModeChannelMismatch {
                mode: mode.as_str(),
                input: cfg.input_channels,
                output: filters.len(),
            });
        }
        let filters = PartitionedFilterSet::new(filters, &plan)?;
        let lines = match mode {
            Mode::Broadcast => 1,
            Mode::Elementwise => cfg.output_channels,
        };
        let fdls = (0..lines)
            .map(|_| FrequencyDelayLine::new(filters.partitions(), plan.bins()))
            .collect::<Result<Vec<_>>>()?;
        let lanes = backend.make_lanes(cfg.output_channels, &plan, filters.partitions());
        Ok(Convolver {
            cfg,
            mode,
            backend,
            windows: vec![vec![0.0; cfg.fft_size]; lines],
            work: vec![0.0; cfg.fft_size],
            scratch: plan.make_scratch(),
            plan,
            filters,
            fdls,
            lanes,
            blocks_processed: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn filters(&self) -> &PartitionedFilterSet {
        &self.filters
    }

    pub fn partitions(&self) -> usize {
        self.filters.partitions()
    }

    pub fn blocks_processed(&self) -> u64 {
        self.blocks_processed
    }

    pub fn delay_lines(&self) -> &[FrequencyDelayLine] {
        &self.fdls
    }

    pub fn convolve(&mut self, input: &AudioBlock) -> Result<AudioBlock> {
        if input.channels() != self.cfg.input_channels || input.frames() != self.cfg.block_size {
            return Err(self.shape_error(input.channels(), input.frames()));
        }
        let mut out = AudioBlock::zeros(self.cfg.output_channels, self.cfg.block_size);
        self.convolve_into(input.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    /// Allocation-free block step over planar slices
    /// (`input`: `C_in x n_x`, `output`: `C_out x n_x`).
    pub fn convolve_into(&mut self, input: &[f32], output: &mut [f32]) -> Result<()> {
        let n = self.cfg.block_size;
        if input.len() != self.cfg.input_channels * n {
            return Err(Error::LengthMismatch {
                expected: self.cfg.input_channels * n,
                actual: input.len(),
            });
        }
        if output.len() != self.cfg.output_channels * n {
            return Err(Error::LengthMismatch {
                expected: self.cfg.output_channels * n,
                actual: output.len(),
            });
        }
        if !all_finite(input) {
            return Err(Error::NonFiniteInput);
        }

        // Input packing: slide the window left by one block and append the new block.
        for ((window, fdl), block) in self.windows.iter_mut().zip(&mut self.fdls).zip(input.chunks_exact(n)) {
            window.copy_within(n.., 0);
            window[n..].copy_from_slice(block);
            self.work.copy_from_slice(window);
            self.plan
                .forward_in_place(&mut self.work, fdl.advance(), &mut self.scratch);
        }

        self.backend
            .filter_block(&self.fdls, &self.filters, self.mode, &self.plan, &mut self.lanes, output);
        self.blocks_processed += 1;
        Ok(())
    }

    /// Zeroes all streaming state; filters are kept.
    pub fn reset(&mut self) {
        self.fdls.iter_mut().for_each(FrequencyDelayLine::reset);
        self.windows.iter_mut().for_each(|w| w.fill(0.0));
        self.lanes.iter_mut().for_each(OutputLane::reset);
        self.blocks_processed = 0;
    }

    /// The most recent sliding window of input channel `c` (previous block, then current).
    pub fn window(&self, c: usize) -> &[f32] {
        &self.windows[c]
    }

    fn shape_error(&self, channels: usize, frames: usize) -> Error {
        Error::ShapeMismatch {
            expected_channels: self.cfg.input_channels,
            expected_frames: self.cfg.block_size,
            actual_channels: channels,
            actual_frames: frames,
        }
    }
}
