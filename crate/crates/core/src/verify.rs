//! Self-verification suites run by the `verify` command: streamed output
//! against the `f64` oracle, backend agreement, and closed-loop cancellation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::backend::Backend;
use crate::config::{EngineConfig, Mode};
use crate::convolver::Convolver;
use crate::error::Result;
use crate::oracle::{block_energies, direct_convolve_range, simulate_closed_loop, ClosedLoopScenario};

pub const ORACLE_TOLERANCE: f64 = 1e-4;
pub const BACKEND_TOLERANCE: f64 = 1e-4;
pub const CANCELLATION_TOLERANCE: f64 = 1e-4;
pub const ENERGY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    Small,
    Full,
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "small" => Ok(Grid::Small),
            "full" => Ok(Grid::Full),
            other => Err(format!("unknown grid `{other}` (expected small or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCase {
    pub block_size: usize,
    pub filter_len: usize,
    pub channels: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl fmt::Display for OracleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_x={} n_h={} C_out={} {} seed={}",
            self.block_size,
            self.filter_len,
            self.channels,
            self.mode.as_str(),
            self.seed
        )
    }
}

/// Filter lengths exercised for each block size: tiny, around one block, a
/// ragged tail and ten partitions.
pub fn filter_lengths(block_size: usize) -> [usize; 6] {
    let n = block_size;
    [1, n - 1, n, n + 1, 3 * n + 7, 10 * n]
}

pub fn oracle_grid(block_sizes: &[usize], seeds: &[u64]) -> Vec<OracleCase> {
    let mut cases = Vec::new();
    for &block_size in block_sizes {
        for filter_len in filter_lengths(block_size) {
            for channels in [1, 4] {
                for mode in [Mode::Broadcast, Mode::Elementwise] {
                    for &seed in seeds {
                        cases.push(OracleCase {
                            block_size,
                            filter_len,
                            channels,
                            mode,
                            seed,
                        });
                    }
                }
            }
        }
    }
    cases
}

pub fn grid_cases(grid: Grid) -> Vec<OracleCase> {
    match grid {
        Grid::Small => oracle_grid(&[16, 64], &[0]),
        Grid::Full => oracle_grid(&[16, 64, 128], &[0, 1, 2]),
    }
}

/// Random filters (scaled by `1/sqrt(n_h)`) and per-channel input streams for a case.
pub fn case_signals(case: &OracleCase) -> (Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed ^ ((case.block_size as u64) << 32) ^ ((case.filter_len as u64) << 8));
    let scale = 1.0 / (case.filter_len as f32).sqrt();
    let filters: Vec<Vec<f32>> = (0..case.channels)
        .map(|_| (0..case.filter_len).map(|_| scale * rng.sample::<f32, _>(StandardNormal)).collect())
        .collect();
    let blocks = case.filter_len.div_ceil(case.block_size) + 3;
    let streams = match case.mode {
        Mode::Broadcast => 1,
        Mode::Elementwise => case.channels,
    };
    let inputs = (0..streams)
        .map(|_| {
            (0..blocks * case.block_size)
                .map(|_| rng.sample::<f32, _>(StandardNormal))
                .collect()
        })
        .collect();
    (filters, inputs)
}

/// Streams `inputs` through a convolver and returns per-channel outputs.
pub fn stream_case(case: &OracleCase, backend: Backend, filters: &[Vec<f32>], inputs: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    let n = case.block_size;
    let cfg = EngineConfig::new(48_000, n, inputs.len(), case.channels)?;
    let mut conv = Convolver::with_backend(filters, cfg, case.mode, backend)?;
    let total = inputs[0].len();
    let mut outputs = vec![Vec::with_capacity(total); case.channels];
    let mut block = vec![0.0f32; inputs.len() * n];
    let mut out = vec![0.0f32; case.channels * n];
    for b in 0..total / n {
        for (dst, src) in block.chunks_exact_mut(n).zip(inputs) {
            dst.copy_from_slice(&src[b * n..(b + 1) * n]);
        }
        conv.convolve_into(&block, &mut out)?;
        for (o, chunk) in outputs.iter_mut().zip(out.chunks_exact(n)) {
            o.extend_from_slice(chunk);
        }
    }
    Ok(outputs)
}

/// Max abs difference between the streamed output and the direct convolution prefix.
pub fn oracle_error(case: &OracleCase, backend: Backend) -> Result<f64> {
    let (filters, inputs) = case_signals(case);
    let outputs = stream_case(case, backend, &filters, &inputs)?;
    let mut worst = 0.0f64;
    for (c, (h, y)) in filters.iter().zip(&outputs).enumerate() {
        let x = match case.mode {
            Mode::Broadcast => &inputs[0],
            Mode::Elementwise => &inputs[c],
        };
        let reference = direct_convolve_range(x, h, 0, y.len());
        for (a, b) in y.iter().zip(&reference) {
            worst = worst.max((*a as f64 - b).abs());
        }
    }
    Ok(worst)
}

/// Max abs difference between `backend` and the reference backend.
pub fn backend_error(case: &OracleCase, backend: Backend) -> Result<f64> {
    let (filters, inputs) = case_signals(case);
    let a = stream_case(case, Backend::Reference, &filters, &inputs)?;
    let b = stream_case(case, backend, &filters, &inputs)?;
    Ok(a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs() as f64)))
}

/// Random synthesis filters and feedback paths with the estimate equal to the
/// true paths. Lengths in samples.
pub fn matched_feedback_scenario(
    block_size: usize,
    channels: usize,
    synth_len: usize,
    fc_len: usize,
    num_blocks: usize,
    seed: u64,
    backend: Backend,
) -> Result<ClosedLoopScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize, scale: f32| -> Vec<f32> {
        (0..len).map(|_| scale * rng.sample::<f32, _>(StandardNormal)).collect()
    };
    let synth: Vec<Vec<f32>> = (0..channels).map(|_| draw(synth_len, 1.0 / (synth_len as f32).sqrt())).collect();
    let paths: Vec<Vec<f32>> = (0..channels).map(|_| draw(fc_len, 1.0 / (fc_len as f32).sqrt())).collect();
    let source = draw(num_blocks * block_size, 1.0);
    Ok(ClosedLoopScenario {
        source,
        fc_filters: paths.clone(),
        true_feedback_paths: paths,
        synth_filters: synth,
        cfg: EngineConfig::new(48_000, block_size, 1, channels)?,
        num_blocks,
        backend,
    })
}

/// One speaker with a unit-gain synthesis filter and a single feedback tap of
/// `loop_gain`, driven by a tone that repeats every block. Without
/// cancellation the loop gain above one makes every block louder than the last.
pub fn howling_scenario(
    block_size: usize,
    loop_gain: f32,
    cancel: bool,
    num_blocks: usize,
    backend: Backend,
) -> Result<ClosedLoopScenario> {
    let source = (0..num_blocks * block_size)
        .map(|t| 0.5 * (2.0 * std::f32::consts::PI * 4.0 * (t % block_size) as f32 / block_size as f32).sin())
        .collect();
    let path = vec![vec![loop_gain]];
    Ok(ClosedLoopScenario {
        source,
        fc_filters: if cancel { path.clone() } else { vec![vec![0.0]] },
        true_feedback_paths: path,
        synth_filters: vec![vec![1.0]],
        cfg: EngineConfig::new(48_000, block_size, 1, 1)?,
        num_blocks,
        backend,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub suite: &'static str,
    pub name: String,
    pub metric: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for CaseOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {} (metric {:.3e}, limit {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.metric,
            self.tolerance
        )
    }
}

fn outcome(suite: &'static str, name: String, metric: f64, tolerance: f64) -> CaseOutcome {
    CaseOutcome {
        suite,
        name,
        passed: metric < tolerance,
        metric,
        tolerance,
    }
}

/// Runs every suite for `grid`, calling `report` as each case finishes.
pub fn run_verification(grid: Grid, backend: Backend, mut report: impl FnMut(&CaseOutcome)) -> Result<Vec<CaseOutcome>> {
    let mut all = Vec::new();
    let mut push = |o: CaseOutcome, all: &mut Vec<CaseOutcome>| {
        report(&o);
        all.push(o);
    };

    for case in grid_cases(grid) {
        let err = oracle_error(&case, backend)?;
        push(outcome("oracle", case.to_string(), err, ORACLE_TOLERANCE), &mut all);
        if backend != Backend::Reference {
            let err = backend_error(&case, backend)?;
            push(outcome("backend", case.to_string(), err, BACKEND_TOLERANCE), &mut all);
        }
    }

    let (n, fc_len, blocks) = match grid {
        Grid::Small => (64, 2400, 20),
        Grid::Full => (128, 24_000, 50),
    };
    let matched = matched_feedback_scenario(n, 4, 4 * n, fc_len, blocks, 7, backend)?;
    let rec = simulate_closed_loop(&matched)?;
    push(
        outcome(
            "closed-loop",
            format!("matched estimate n_x={n} fc_len={fc_len} blocks={blocks}: max |residual|"),
            rec.max_abs_residual() as f64,
            CANCELLATION_TOLERANCE,
        ),
        &mut all,
    );
    let open = ClosedLoopScenario {
        true_feedback_paths: vec![vec![0.0]; 4],
        fc_filters: vec![vec![0.0]; 4],
        ..matched
    };
    let reference = simulate_closed_loop(&open)?;
    let speaker_diff = rec
        .speaker_blocks
        .iter()
        .flatten()
        .zip(reference.speaker_blocks.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() as f64));
    push(
        outcome(
            "closed-loop",
            "speakers match feedback-free run".into(),
            speaker_diff,
            CANCELLATION_TOLERANCE,
        ),
        &mut all,
    );

    let blocks = 13;
    let howl = simulate_closed_loop(&howling_scenario(128, 1.2, false, blocks, backend)?)?;
    let energy = block_energies(&howl.mic_blocks);
    let violations = energy[3..].windows(2).filter(|w| !(w[1] > w[0])).count();
    push(
        outcome(
            "closed-loop",
            "no cancellation, loop gain 1.2: mic energy strictly increasing over blocks 3-12 (violations)".into(),
            violations as f64,
            0.5,
        ),
        &mut all,
    );
    let tamed_scn = howling_scenario(128, 1.2, true, blocks, backend)?;
    let tamed = simulate_closed_loop(&tamed_scn)?;
    let clean = block_energies(&tamed_scn.source.chunks(128).map(<[f32]>::to_vec).collect::<Vec<_>>());
    let got = block_energies(&tamed.conditioned_blocks);
    let rel = got
        .iter()
        .zip(&clean)
        .fold(0.0f64, |m, (g, c)| m.max((g - c).abs() / c));
    push(
        outcome(
            "closed-loop",
            "matched cancellation, loop gain 1.2: input energy vs clean (max relative deviation)".into(),
            rel,
            ENERGY_TOLERANCE,
        ),
        &mut all,
    );
    Ok(all)
}
