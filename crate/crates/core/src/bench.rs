//! Per-block timing sweeps with real-time verdicts, and their CSV form.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::auralizer::Auralizer;
use crate::backend::Backend;
use crate::config::{EngineConfig, Mode};
use crate::convolver::Convolver;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "subject,backend,parameter,value,mean_s,min_s,max_s,trials,budget_s,realtime";

/// Distinct random input blocks cycled through during timing.
const INPUT_POOL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subject {
    Convolver,
    Auralizer,
}

impl Subject {
    pub fn as_str(self) -> &'static str {
        match self {
            Subject::Convolver => "convolver",
            Subject::Auralizer => "auralizer",
        }
    }
}

impl FromStr for Subject {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convolver" => Ok(Subject::Convolver),
            "auralizer" => Ok(Subject::Auralizer),
            other => Err(Error::InvalidSweep(format!("unknown subject `{other}`"))),
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    BlockSize,
    /// Synthesis filter length in seconds.
    FilterLength,
    Channels,
    /// Feedback cancellation filter length in seconds.
    FcLength,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::BlockSize => "block-size",
            SweepParameter::FilterLength => "filter-length",
            SweepParameter::Channels => "channels",
            SweepParameter::FcLength => "fc-length",
        }
    }

    /// The sweep ranges used for the published measurements.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParameter::BlockSize => (4..=12).map(|e| (1u32 << e) as f64).collect(),
            SweepParameter::FilterLength => vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            SweepParameter::Channels => vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            SweepParameter::FcLength => vec![0.1, 0.5, 1.0, 2.0, 5.0],
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block-size" => Ok(SweepParameter::BlockSize),
            "filter-length" => Ok(SweepParameter::FilterLength),
            "channels" => Ok(SweepParameter::Channels),
            "fc-length" => Ok(SweepParameter::FcLength),
            other => Err(Error::InvalidSweep(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub subject: Subject,
    pub backend: String,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub sample_rate_hz: u32,
    pub block_size: usize,
    pub channels: usize,
    pub synth_length_s: f64,
    pub fc_length_s: f64,
    pub trials: usize,
    pub warmup_trials: usize,
    pub rng_seed: u64,
}

impl SweepSpec {
    /// Defaults: 48 kHz, 128-sample blocks, 32 channels, 10 s synthesis and
    /// 1 s feedback filters, 10000 trials after 100 warmup calls.
    pub fn new(subject: Subject, parameter: SweepParameter) -> Self {
        SweepSpec {
            subject,
            backend: "reference".into(),
            parameter,
            values: parameter.default_values(),
            sample_rate_hz: 48_000,
            block_size: 128,
            channels: 32,
            synth_length_s: 10.0,
            fc_length_s: 1.0,
            trials: 10_000,
            warmup_trials: 100,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidSweep("no swept values".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSweep("swept values must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidSweep("swept values must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidSweep("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Fixed parameters with the swept one replaced by `value`.
    pub fn setting(&self, value: f64) -> Setting {
        let mut s = Setting {
            block_size: self.block_size,
            channels: self.channels,
            synth_length_s: self.synth_length_s,
            fc_length_s: self.fc_length_s,
        };
        match self.parameter {
            SweepParameter::BlockSize => s.block_size = value as usize,
            SweepParameter::FilterLength => s.synth_length_s = value,
            SweepParameter::Channels => s.channels = value as usize,
            SweepParameter::FcLength => s.fc_length_s = value,
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub block_size: usize,
    pub channels: usize,
    pub synth_length_s: f64,
    pub fc_length_s: f64,
}

/// Seconds to whole samples, at least one.
pub fn seconds_to_samples(seconds: f64, sample_rate_hz: u32) -> usize {
    ((seconds * sample_rate_hz as f64).round() as usize).max(1)
}

/// Filters and input blocks for one sweep point, drawn from a standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub cfg: EngineConfig,
    pub synth_filters: Vec<Vec<f32>>,
    pub fc_filters: Vec<Vec<f32>>,
    pub inputs: Vec<Vec<f32>>,
}

impl Workload {
    pub fn generate(spec: &SweepSpec, value: f64) -> Result<Workload> {
        let s = spec.setting(value);
        let cfg = EngineConfig::new(spec.sample_rate_hz, s.block_size, 1, s.channels)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let mut draw = |len: usize| -> Vec<f32> { (0..len).map(|_| rng.sample(StandardNormal)).collect() };
        let synth_len = seconds_to_samples(s.synth_length_s, spec.sample_rate_hz);
        let synth_filters: Vec<Vec<f32>> = (0..s.channels).map(|_| draw(synth_len)).collect();
        let fc_filters = match spec.subject {
            Subject::Convolver => Vec::new(),
            Subject::Auralizer => {
                // The auralizer feeds its own output back through the estimate,
                // so unscaled noise filters diverge within a few blocks. Scaling
                // each estimate so that sum_c |h_c|_1 |f_c|_1 = 1/2 keeps the
                // internal loop stable for any input.
                let fc_len = seconds_to_samples(s.fc_length_s, spec.sample_rate_hz);
                synth_filters
                    .iter()
                    .map(|h| {
                        let mut f = draw(fc_len);
                        let gain = l1(h) * l1(&f) * s.channels as f64;
                        let scale = (0.5 / gain) as f32;
                        f.iter_mut().for_each(|v| *v *= scale);
                        f
                    })
                    .collect()
            }
        };
        let inputs = (0..INPUT_POOL).map(|_| draw(s.block_size)).collect();
        Ok(Workload {
            cfg,
            synth_filters,
            fc_filters,
            inputs,
        })
    }
}

fn l1(v: &[f32]) -> f64 {
    v.iter().map(|x| x.abs() as f64).sum::<f64>().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub subject: Subject,
    pub backend: String,
    pub parameter: SweepParameter,
    pub value: f64,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub trials: usize,
    pub budget_s: f64,
    pub realtime: bool,
}

impl TimingRecord {
    pub fn from_samples(
        subject: Subject,
        backend: &str,
        parameter: SweepParameter,
        value: f64,
        budget_s: f64,
        samples: &[f64],
    ) -> Self {
        let mean_s = samples.iter().sum::<f64>() / samples.len() as f64;
        let min_s = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max_s = samples.iter().copied().fold(0.0, f64::max);
        TimingRecord {
            subject,
            backend: backend.to_string(),
            parameter,
            value,
            // Guard against the mean drifting outside [min, max] by rounding.
            mean_s: mean_s.clamp(min_s, max_s),
            min_s,
            max_s,
            trials: samples.len(),
            budget_s,
            realtime: mean_s < budget_s,
        }
    }
}

/// A sweep point that could not be measured.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub value: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub records: Vec<TimingRecord>,
    pub failures: Vec<SweepFailure>,
}

enum Subjected {
    Convolver(Box<Convolver>),
    Auralizer(Box<Auralizer>),
}

impl Subjected {
    fn step(&mut self, input: &[f32], output: &mut [f32]) -> Result<()> {
        match self {
            Subjected::Convolver(c) => c.convolve_into(input, output),
            Subjected::Auralizer(a) => a.auralize_into(input, output),
        }
    }
}

/// Times `spec.trials` single-block calls per swept value, after warmup.
/// Setup (partitioning and transforming the filters) is not timed.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let backend = Backend::from_name(&spec.backend)?;
    let mut report = SweepReport::default();
    for &value in &spec.values {
        match measure_point(spec, backend, value) {
            Ok(record) => report.records.push(record),
            Err(e @ (Error::OutOfMemory(_) | Error::NonPowerOfTwoBlock(_) | Error::BadChannelCombination { .. })) => {
                report.failures.push(SweepFailure {
                    value,
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn measure_point(spec: &SweepSpec, backend: Backend, value: f64) -> Result<TimingRecord> {
    let work = Workload::generate(spec, value)?;
    let cfg = work.cfg;
    let mut subject = match spec.subject {
        Subject::Convolver => Subjected::Convolver(Box::new(Convolver::with_backend(
            &work.synth_filters,
            cfg,
            Mode::Broadcast,
            backend,
        )?)),
        Subject::Auralizer => Subjected::Auralizer(Box::new(Auralizer::with_backend(
            &work.synth_filters,
            &work.fc_filters,
            cfg,
            backend,
        )?)),
    };
    drop(work.synth_filters);
    drop(work.fc_filters);

    let mut output = vec![0.0f32; cfg.output_channels * cfg.block_size];
    let mut inputs = work.inputs.iter().cycle();
    for _ in 0..spec.warmup_trials {
        subject.step(inputs.next().expect("pool is nonempty"), &mut output)?;
    }
    let mut samples = Vec::with_capacity(spec.trials);
    for _ in 0..spec.trials {
        let input = inputs.next().expect("pool is nonempty");
        let start = Instant::now();
        subject.step(input, &mut output)?;
        samples.push(start.elapsed().as_secs_f64());
        std::hint::black_box(&output);
    }
    Ok(TimingRecord::from_samples(
        spec.subject,
        backend.name(),
        spec.parameter,
        value,
        cfg.latency_budget(),
        &samples,
    ))
}

pub fn write_csv<W: Write>(records: &[TimingRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.subject, r.backend, r.parameter, r.value, r.mean_s, r.min_s, r.max_s, r.trials, r.budget_s, r.realtime
        )?;
    }
    Ok(())
}

pub fn emit_csv(records: &[TimingRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidSweep("no records to write".into()));
    }
    let mut file = BufWriter::new(File::create(path)?);
    write_csv(records, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<TimingRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        _ => {
            return Err(Error::Csv {
                line: 1,
                reason: "missing or unexpected header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| parse_row(line).map_err(|reason| Error::Csv { line: i + 1, reason }))
        .collect()
}

fn parse_row(line: &str) -> std::result::Result<TimingRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 10 {
        return Err(format!("expected 10 fields, found {}", fields.len()));
    }
    let num = |i: usize| fields[i].parse::<f64>().map_err(|e| format!("field {i}: {e}"));
    Ok(TimingRecord {
        subject: fields[0].parse().map_err(|e: Error| e.to_string())?,
        backend: fields[1].to_string(),
        parameter: fields[2].parse().map_err(|e: Error| e.to_string())?,
        value: num(3)?,
        mean_s: num(4)?,
        min_s: num(5)?,
        max_s: num(6)?,
        trials: fields[7].parse().map_err(|e| format!("trials: {e}"))?,
        budget_s: num(8)?,
        realtime: match fields[9] {
            "true" => true,
            "false" => false,
            other => return Err(format!("realtime must be true/false, got `{other}`")),
        },
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - mean).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}
