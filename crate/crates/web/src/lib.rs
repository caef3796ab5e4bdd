//! WebAssembly bindings for the single-page demo in `www/`.
//!
//! Each exported entry point wraps a plain Rust function so the numbers the
//! page draws can be tested natively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wasm_bindgen::prelude::*;

use upconv::oracle::{block_energies, direct_convolve_range, simulate_closed_loop, ClosedLoopScenario};
use upconv::{partition_count, AudioBlock, Backend, Convolver, EngineConfig, Mode};

pub const SAMPLE_RATE: u32 = 48_000;

/// Exponentially decaying noise, a crude stand-in for a room response.
/// `rt60_ms` is the time for a 60 dB decay.
pub fn synthetic_response(len: usize, rt60_ms: f32, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay_per_sample = 6.907_755 / (rt60_ms.max(1.0) * 1e-3 * SAMPLE_RATE as f32);
    let mut h: Vec<f32> = (0..len)
        .map(|t| (-decay_per_sample * t as f32).exp() * rng.sample::<f32, _>(StandardNormal))
        .collect();
    let norm = h.iter().map(|v| v * v).sum::<f32>().sqrt().max(f32::MIN_POSITIVE);
    h.iter_mut().for_each(|v| *v /= norm);
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionRun {
    pub input: Vec<f32>,
    pub output: Vec<f32>,
    pub reference: Vec<f32>,
    pub max_error: f64,
    pub partitions: usize,
    pub blocks: usize,
}

/// Streams a few clicks through a partitioned convolver and the direct oracle.
pub fn run_convolution(block_size: usize, filter_ms: f32, rt60_ms: f32, seed: u64) -> Result<ConvolutionRun, String> {
    let cfg = EngineConfig::new(SAMPLE_RATE, block_size, 1, 1).map_err(|e| e.to_string())?;
    let filter_len = ((filter_ms * 1e-3 * SAMPLE_RATE as f32) as usize).max(1);
    let h = synthetic_response(filter_len, rt60_ms, seed);
    let partitions = partition_count(filter_len, block_size).map_err(|e| e.to_string())?;

    let total = (filter_len + filter_len / 2).max(4 * block_size);
    let blocks = total.div_ceil(block_size);
    let mut input = vec![0.0f32; blocks * block_size];
    for (i, amp) in [1.0f32, -0.6, 0.8].iter().enumerate() {
        let at = i * input.len() / 5;
        input[at] = *amp;
    }

    let mut conv = Convolver::with_backend(std::slice::from_ref(&h), cfg, Mode::Broadcast, Backend::Reference)
        .map_err(|e| e.to_string())?;
    let mut output = Vec::with_capacity(input.len());
    for chunk in input.chunks_exact(block_size) {
        let block = AudioBlock::from_planar(1, block_size, chunk.to_vec()).map_err(|e| e.to_string())?;
        output.extend_from_slice(conv.convolve(&block).map_err(|e| e.to_string())?.as_slice());
    }
    let reference = direct_convolve_range(&input, &h, 0, output.len());
    let max_error = output
        .iter()
        .zip(&reference)
        .fold(0.0f64, |m, (a, b)| m.max((*a as f64 - b).abs()));
    Ok(ConvolutionRun {
        input,
        output,
        reference: reference.into_iter().map(|v| v as f32).collect(),
        max_error,
        partitions,
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackRun {
    /// Microphone energy per block in dB, feedback included.
    pub mic_db: Vec<f32>,
    /// Energy of the cancelled input per block in dB.
    pub conditioned_db: Vec<f32>,
    /// Clean source energy per block in dB.
    pub source_db: Vec<f32>,
}

fn to_db(energies: &[f64]) -> Vec<f32> {
    energies.iter().map(|e| (10.0 * (e + 1e-12).log10()) as f32).collect()
}

/// Two loudspeakers feeding back into one microphone. The true paths have
/// broadband gain `loop_gain`; the canceller uses `estimate_scale` times them.
pub fn run_feedback(loop_gain: f32, estimate_scale: f32, blocks: usize, seed: u64) -> Result<FeedbackRun, String> {
    let block_size = 128;
    let channels = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let synth: Vec<Vec<f32>> = (0..channels)
        .map(|c| {
            let mut h = vec![0.0f32; block_size];
            h[c * 3] = 1.0 / (channels as f32).sqrt();
            h
        })
        .collect();
    let paths: Vec<Vec<f32>> = (0..channels)
        .map(|_| {
            // A direct tap plus a positive diffuse tail: all taps share a sign, so
            // the low-frequency loop gain equals `loop_gain` exactly.
            let mut p: Vec<f32> = synthetic_response(256, 8.0, rng.random()).iter().map(|v| v.abs()).collect();
            p[0] = 2.0;
            let norm: f32 = p.iter().sum();
            p.iter_mut().for_each(|v| *v *= loop_gain / (norm * (channels as f32).sqrt()));
            p
        })
        .collect();
    let fc = paths
        .iter()
        .map(|p| p.iter().map(|v| v * estimate_scale).collect())
        .collect();
    let source: Vec<f32> = (0..blocks * block_size)
        .map(|_| 0.3 * rng.sample::<f32, _>(StandardNormal))
        .collect();
    let scn = ClosedLoopScenario {
        source: source.clone(),
        true_feedback_paths: paths,
        fc_filters: fc,
        synth_filters: synth,
        cfg: EngineConfig::new(SAMPLE_RATE, block_size, 1, channels).map_err(|e| e.to_string())?,
        num_blocks: blocks,
        backend: Backend::Reference,
    };
    let rec = simulate_closed_loop(&scn).map_err(|e| e.to_string())?;
    let source_blocks: Vec<Vec<f32>> = source.chunks(block_size).map(<[f32]>::to_vec).collect();
    Ok(FeedbackRun {
        mic_db: to_db(&block_energies(&rec.mic_blocks)),
        conditioned_db: to_db(&block_energies(&rec.conditioned_blocks)),
        source_db: to_db(&block_energies(&source_blocks)),
    })
}

/// `[latency budget ms, partition count]` for each power-of-two block size
/// from 16 to 4096 with a filter of `filter_s` seconds.
pub fn budget_table(filter_s: f32, sample_rate: u32) -> Vec<(usize, f64, usize)> {
    let taps = ((filter_s * sample_rate as f32) as usize).max(1);
    (4..=12)
        .map(|e| {
            let n = 1usize << e;
            let budget_ms = n as f64 / sample_rate as f64 * 1e3;
            (n, budget_ms, taps.div_ceil(n))
        })
        .collect()
}

#[wasm_bindgen]
pub struct ConvolutionView {
    run: ConvolutionRun,
}

#[wasm_bindgen]
impl ConvolutionView {
    pub fn input(&self) -> Vec<f32> {
        self.run.input.clone()
    }
    pub fn output(&self) -> Vec<f32> {
        self.run.output.clone()
    }
    pub fn reference(&self) -> Vec<f32> {
        self.run.reference.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn max_error(&self) -> f64 {
        self.run.max_error
    }
    #[wasm_bindgen(getter)]
    pub fn partitions(&self) -> usize {
        self.run.partitions
    }
    #[wasm_bindgen(getter)]
    pub fn blocks(&self) -> usize {
        self.run.blocks
    }
}

#[wasm_bindgen]
pub fn convolve_demo(block_size: usize, filter_ms: f32, rt60_ms: f32, seed: u32) -> Result<ConvolutionView, JsValue> {
    run_convolution(block_size, filter_ms, rt60_ms, seed as u64)
        .map(|run| ConvolutionView { run })
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub struct FeedbackView {
    run: FeedbackRun,
}

#[wasm_bindgen]
impl FeedbackView {
    pub fn mic_db(&self) -> Vec<f32> {
        self.run.mic_db.clone()
    }
    pub fn conditioned_db(&self) -> Vec<f32> {
        self.run.conditioned_db.clone()
    }
    pub fn source_db(&self) -> Vec<f32> {
        self.run.source_db.clone()
    }
}

#[wasm_bindgen]
pub fn feedback_demo(loop_gain: f32, estimate_scale: f32, blocks: usize, seed: u32) -> Result<FeedbackView, JsValue> {
    run_feedback(loop_gain, estimate_scale, blocks, seed as u64)
        .map(|run| FeedbackView { run })
        .map_err(|e| JsValue::from_str(&e))
}

/// Flattened `[block_size, budget_ms, partitions, ...]` triples.
#[wasm_bindgen]
pub fn budget_demo(filter_s: f32, sample_rate: u32) -> Vec<f64> {
    budget_table(filter_s, sample_rate.max(1))
        .into_iter()
        .flat_map(|(n, ms, k)| [n as f64, ms, k as f64])
        .collect()
}
