//! Execution backends for the spectral multiply-accumulate and output transform.
//!
//! The reference backend runs everything serially in a fixed order. The
//! parallel backend splits work across output channels and, when there are
//! fewer channels than workers, across fixed partition ranges whose partial
//! sums are reduced in range order. Both are deterministic.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex32;

use crate::config::Mode;
use crate::dft::{DftPlan, SpectrumBlock};
use crate::error::{Error, Result};
use crate::partition::{FrequencyDelayLine, PartitionedFilterSet};

/// Partitions per work item when the parallel backend splits a channel.
#[cfg(feature = "parallel")]
const PARTITION_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Reference,
    Parallel,
    Accelerator,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Reference => "reference",
            BackendKind::Parallel => "parallel",
            BackendKind::Accelerator => "accelerator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendDescriptor {
    pub name: String,
    pub kind: BackendKind,
    pub available: bool,
    /// Worker count or device name.
    pub detail: String,
}

/// Backends usable in this process. No accelerator device support is compiled
/// in, so the accelerator entry never appears.
pub fn list_backends() -> Vec<BackendDescriptor> {
    #[cfg_attr(not(feature = "parallel"), allow(unused_mut))]
    let mut out = vec![BackendDescriptor {
        name: "reference".into(),
        kind: BackendKind::Reference,
        available: true,
        detail: "1 worker".into(),
    }];
    #[cfg(feature = "parallel")]
    out.push(BackendDescriptor {
        name: "parallel".into(),
        kind: BackendKind::Parallel,
        available: true,
        detail: match rayon::current_num_threads() {
            1 => "1 worker".into(),
            n => format!("{n} workers"),
        },
    });
    out
}

/// A kernel dispatcher. Stateless and `Copy`; buffers belong to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    #[default]
    Reference,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Backend {
    /// Resolves a device name. `cpu` is an alias for `parallel`, `gpu` for `accelerator`.
    pub fn from_name(name: &str) -> Result<Backend> {
        match name.to_ascii_lowercase().as_str() {
            "reference" => Ok(Backend::Reference),
            #[cfg(feature = "parallel")]
            "parallel" | "cpu" => Ok(Backend::Parallel),
            #[cfg(not(feature = "parallel"))]
            "parallel" | "cpu" => Err(Error::BackendUnavailable("parallel".into())),
            "accelerator" | "gpu" => Err(Error::BackendUnavailable("accelerator".into())),
            other => Err(Error::UnknownBackend(other.into())),
        }
    }

    pub fn kind(self) -> BackendKind {
        match self {
            Backend::Reference => BackendKind::Reference,
            #[cfg(feature = "parallel")]
            Backend::Parallel => BackendKind::Parallel,
        }
    }

    pub fn name(self) -> &'static str {
        self.kind().as_str()
    }

    /// `out[c][j] = sum_k fdl(c).slot(k)[j] * spectra[c][k][j]`, where `fdl(c)` is
    /// the single shared line in broadcast mode and line `c` otherwise.
    pub fn spectral_mac(
        self,
        fdls: &[FrequencyDelayLine],
        filters: &PartitionedFilterSet,
        mode: Mode,
        out: &mut [SpectrumBlock],
    ) -> Result<()> {
        check_mac_shapes(fdls, filters, mode)?;
        if out.len() != filters.channels() || out.iter().any(|s| s.len() != filters.bins()) {
            return Err(shape(filters.channels(), filters.bins(), out.len(), out.first().map_or(0, |s| s.len())));
        }
        match self {
            Backend::Reference => {
                for (c, spec) in out.iter_mut().enumerate() {
                    mac_channel(line_for(fdls, mode, c), filters.channel(c), spec.bins_mut());
                }
            }
            #[cfg(feature = "parallel")]
            Backend::Parallel => {
                use rayon::prelude::*;
                out.par_iter_mut().enumerate().for_each(|(c, spec)| {
                    mac_channel(line_for(fdls, mode, c), filters.channel(c), spec.bins_mut());
                });
            }
        }
        Ok(())
    }

    /// Stage 2 and 3 for every output channel: accumulate, inverse transform,
    /// keep the last `n_x` samples. `output` is planar `C_out x n_x`.
    pub(crate) fn filter_block(
        self,
        fdls: &[FrequencyDelayLine],
        filters: &PartitionedFilterSet,
        mode: Mode,
        plan: &DftPlan,
        lanes: &mut [OutputLane],
        output: &mut [f32],
    ) {
        let block = plan.size() / 2;
        match self {
            Backend::Reference => {
                for (c, (lane, out)) in lanes.iter_mut().zip(output.chunks_exact_mut(block)).enumerate() {
                    mac_channel(line_for(fdls, mode, c), filters.channel(c), &mut lane.acc);
                    lane.unpack(plan, out);
                }
            }
            #[cfg(feature = "parallel")]
            Backend::Parallel => {
                use rayon::prelude::*;
                let split = lanes.len() < rayon::current_num_threads()
                    && filters.partitions() >= 2 * PARTITION_CHUNK;
                lanes
                    .par_iter_mut()
                    .zip(output.par_chunks_exact_mut(block))
                    .enumerate()
                    .for_each(|(c, (lane, out))| {
                        let fdl = line_for(fdls, mode, c);
                        if split {
                            mac_channel_split(fdl, filters.channel(c), lane);
                        } else {
                            mac_channel(fdl, filters.channel(c), &mut lane.acc);
                        }
                        lane.unpack(plan, out);
                    });
            }
        }
    }

    /// Allocates per-channel working buffers sized for this backend.
    pub(crate) fn make_lanes(self, channels: usize, plan: &DftPlan, partitions: usize) -> Vec<OutputLane> {
        let partial_bins = match self {
            Backend::Reference => 0,
            #[cfg(feature = "parallel")]
            Backend::Parallel => {
                if partitions >= 2 * PARTITION_CHUNK {
                    partitions.div_ceil(PARTITION_CHUNK) * plan.bins()
                } else {
                    0
                }
            }
        };
        let _ = partitions;
        (0..channels)
            .map(|_| OutputLane {
                acc: vec![Complex32::new(0.0, 0.0); plan.bins()],
                time: vec![0.0; plan.size()],
                scratch: plan.make_scratch(),
                partials: vec![Complex32::new(0.0, 0.0); partial_bins],
            })
            .collect()
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::from_name(s)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Working memory owned by one output channel.
#[derive(Debug, Clone)]
pub(crate) struct OutputLane {
    pub(crate) acc: Vec<Complex32>,
    time: Vec<f32>,
    scratch: Vec<Complex32>,
    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    partials: Vec<Complex32>,
}

impl OutputLane {
    fn unpack(&mut self, plan: &DftPlan, out: &mut [f32]) {
        plan.inverse_unnormalized_in_place(&mut self.acc, &mut self.time, &mut self.scratch);
        let scale = 1.0 / plan.size() as f32;
        let valid = &self.time[self.time.len() - out.len()..];
        for (o, &t) in out.iter_mut().zip(valid) {
            *o = t * scale;
        }
    }

    pub(crate) fn reset(&mut self) {
        self.acc.fill(Complex32::new(0.0, 0.0));
        self.time.fill(0.0);
        self.partials.fill(Complex32::new(0.0, 0.0));
    }
}

#[inline]
fn line_for(fdls: &[FrequencyDelayLine], mode: Mode, channel: usize) -> &FrequencyDelayLine {
    match mode {
        Mode::Broadcast => &fdls[0],
        Mode::Elementwise => &fdls[channel],
    }
}

/// Serial accumulation over all partitions, newest slot first.
#[inline]
pub(crate) fn mac_channel(fdl: &FrequencyDelayLine, spectra: &[Complex32], acc: &mut [Complex32]) {
    let bins = acc.len();
    acc.fill(Complex32::new(0.0, 0.0));
    fdl.for_each_slot(|k, x| {
        let h = &spectra[k * bins..(k + 1) * bins];
        for ((a, x), h) in acc.iter_mut().zip(x).zip(h) {
            *a += x * h;
        }
    });
}

#[cfg(feature = "parallel")]
fn mac_channel_split(fdl: &FrequencyDelayLine, spectra: &[Complex32], lane: &mut OutputLane) {
    use rayon::prelude::*;
    let bins = lane.acc.len();
    let partitions = fdl.capacity();
    lane.partials
        .par_chunks_exact_mut(bins)
        .enumerate()
        .for_each(|(r, partial)| {
            partial.fill(Complex32::new(0.0, 0.0));
            let end = ((r + 1) * PARTITION_CHUNK).min(partitions);
            for k in r * PARTITION_CHUNK..end {
                let x = fdl.slot(k);
                let h = &spectra[k * bins..(k + 1) * bins];
                for ((a, x), h) in partial.iter_mut().zip(x).zip(h) {
                    *a += x * h;
                }
            }
        });
    lane.acc.fill(Complex32::new(0.0, 0.0));
    for partial in lane.partials.chunks_exact(bins) {
        for (a, p) in lane.acc.iter_mut().zip(partial) {
            *a += p;
        }
    }
}

fn check_mac_shapes(fdls: &[FrequencyDelayLine], filters: &PartitionedFilterSet, mode: Mode) -> Result<()> {
    let expected_lines = match mode {
        Mode::Broadcast => 1,
        Mode::Elementwise => filters.channels(),
    };
    let first = fdls.first().map_or(0, |f| f.bins());
    if fdls.len() != expected_lines {
        return Err(shape(expected_lines, filters.bins(), fdls.len(), first));
    }
    for f in fdls {
        if f.capacity() != filters.partitions() || f.bins() != filters.bins() {
            return Err(shape(filters.partitions(), filters.bins(), f.capacity(), f.bins()));
        }
    }
    Ok(())
}

fn shape(ec: usize, ef: usize, ac: usize, af: usize) -> Error {
    Error::ShapeMismatch {
        expected_channels: ec,
        expected_frames: ef,
        actual_channels: ac,
        actual_frames: af,
    }
}
