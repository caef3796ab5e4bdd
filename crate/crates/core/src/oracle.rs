//! Ground-truth references: direct time-domain convolution in `f64` and a
//! closed-loop microphone/loudspeaker simulator.
//!
//! Nothing here uses the transform or partitioning code; the simulator only
//! drives the [`Auralizer`] under test and computes the physical feedback
//! itself with [`direct_convolve_range`].

use crate::auralizer::Auralizer;
use crate::backend::Backend;
use crate::config::EngineConfig;
use crate::error::{Error, Result};

/// Full linear convolution, `y[t] = sum_tau x[tau] h[t - tau]`, length `N + n_h - 1`.
pub fn direct_convolve<T: Copy + Into<f64>>(signal: &[T], filter: &[T]) -> Result<Vec<f64>> {
    if signal.is_empty() || filter.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(direct_convolve_range(signal, filter, 0, signal.len() + filter.len() - 1))
}

/// Samples `start .. start + len` of the linear convolution (zero past the end).
pub fn direct_convolve_range<T: Copy + Into<f64>>(
    signal: &[T],
    filter: &[T],
    start: usize,
    len: usize,
) -> Vec<f64> {
    (start..start + len)
        .map(|t| {
            // tau ranges over indices with 0 <= tau < N and 0 <= t - tau < n_h.
            let lo = (t + 1).saturating_sub(filter.len());
            let hi = (t + 1).min(signal.len());
            (lo..hi)
                .map(|tau| signal[tau].into() * filter[t - tau].into())
                .sum()
        })
        .collect()
}

/// One microphone, `C_out` loudspeakers, a physical feedback path per speaker.
#[derive(Debug, Clone)]
pub struct ClosedLoopScenario {
    pub source: Vec<f32>,
    /// True paths `F`, aligned so tap 0 reaches the microphone at the start of
    /// the block after the one in which it was produced.
    pub true_feedback_paths: Vec<Vec<f32>>,
    /// The estimate handed to the auralizer.
    pub fc_filters: Vec<Vec<f32>>,
    pub synth_filters: Vec<Vec<f32>>,
    pub cfg: EngineConfig,
    pub num_blocks: usize,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRecord {
    /// Microphone signal per block, including physical feedback.
    pub mic_blocks: Vec<Vec<f32>>,
    /// Loudspeaker signals per block, planar `C_out x n_x`.
    pub speaker_blocks: Vec<Vec<f32>>,
    /// Cancelled input fed to the synthesis filters per block.
    pub conditioned_blocks: Vec<Vec<f32>>,
    /// `conditioned - source` per block.
    pub residual_blocks: Vec<Vec<f32>>,
}

impl ClosedLoopRecord {
    pub fn max_abs_residual(&self) -> f32 {
        self.residual_blocks
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sum of squares of every block in `blocks`.
pub fn block_energies(blocks: &[Vec<f32>]) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| b.iter().map(|&v| (v as f64) * (v as f64)).sum())
        .collect()
}

pub fn simulate_closed_loop(scn: &ClosedLoopScenario) -> Result<ClosedLoopRecord> {
    let n = scn.cfg.block_size;
    let channels = scn.cfg.output_channels;
    if scn.num_blocks == 0 {
        return Err(Error::InvalidScenario("num_blocks must be positive".into()));
    }
    if scn.source.len() < scn.num_blocks * n {
        return Err(Error::InvalidScenario(format!(
            "source has {} samples, need {}",
            scn.source.len(),
            scn.num_blocks * n
        )));
    }
    if scn.true_feedback_paths.len() != channels {
        return Err(Error::ChannelCountMismatch {
            synth: channels,
            fc: scn.true_feedback_paths.len(),
        });
    }
    if scn.true_feedback_paths.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput);
    }

    let mut aur = Auralizer::with_backend(&scn.synth_filters, &scn.fc_filters, scn.cfg, scn.backend)?;
    let mut played: Vec<Vec<f32>> = vec![Vec::with_capacity(scn.num_blocks * n); channels];
    let mut record = ClosedLoopRecord {
        mic_blocks: Vec::with_capacity(scn.num_blocks),
        speaker_blocks: Vec::with_capacity(scn.num_blocks),
        conditioned_blocks: Vec::with_capacity(scn.num_blocks),
        residual_blocks: Vec::with_capacity(scn.num_blocks),
    };
    let mut speakers = vec![0.0f32; channels * n];

    for b in 0..scn.num_blocks {
        let clean = &scn.source[b * n..(b + 1) * n];
        let mut mic: Vec<f64> = clean.iter().map(|&v| v as f64).collect();
        if b > 0 {
            for (path, history) in scn.true_feedback_paths.iter().zip(&played) {
                let fb = direct_convolve_range(history, path, (b - 1) * n, n);
                mic.iter_mut().zip(fb).for_each(|(m, f)| *m += f);
            }
        }
        let mic: Vec<f32> = mic.into_iter().map(|v| v as f32).collect();

        aur.auralize_into(&mic, &mut speakers)?;
        for (history, block) in played.iter_mut().zip(speakers.chunks_exact(n)) {
            history.extend_from_slice(block);
        }
        let conditioned = aur.conditioned_input().to_vec();
        record
            .residual_blocks
            .push(conditioned.iter().zip(clean).map(|(m, s)| m - s).collect());
        record.conditioned_blocks.push(conditioned);
        record.mic_blocks.push(mic);
        record.speaker_blocks.push(speakers.clone());
    }
    Ok(record)
}
