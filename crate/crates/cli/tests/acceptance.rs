//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use upconv::bench::{self, parse_csv, spearman_rho, write_csv, Subject, SweepParameter, SweepSpec, TimingRecord};
use upconv::io::{read_filters, write_filters, Signal};
use upconv::oracle::{block_energies, direct_convolve_range, simulate_closed_loop, ClosedLoopScenario};
use upconv::verify::{
    backend_error, grid_cases, howling_scenario, matched_feedback_scenario, oracle_error, Grid, CANCELLATION_TOLERANCE,
    ENERGY_TOLERANCE, ORACLE_TOLERANCE,
};
use upconv::{latency_budget, list_backends, Backend, BackendKind, Convolver, EngineConfig, Mode};

const LONG_FILTER_TOLERANCE: f64 = 1e-3;
const BUDGET_TOLERANCE_MS: f64 = 0.05;
const SPEARMAN_MIN: f64 = 0.9;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn upconv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_upconv"))
        .args(args)
        .output()
        .expect("failed to launch upconv")
}

fn noise(rng: &mut ChaCha8Rng, len: usize, scale: f32) -> Vec<f32> {
    (0..len).map(|_| scale * rng.sample::<f32, _>(StandardNormal)).collect()
}

fn max_err(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((*x as f64 - y).abs()))
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_grid() -> Check {
    let cases = grid_cases(Grid::Full);
    let mut worst = 0.0f64;
    for case in &cases {
        let e = oracle_error(case, Backend::Reference).map_err(|e| format!("{case}: {e}"))?;
        worst = worst.max(e);
    }
    verdict(
        worst < ORACLE_TOLERANCE,
        format!("{} cases, max abs error {worst:.3e} (limit {ORACLE_TOLERANCE:.0e})", cases.len()),
    )
}

fn long_filter() -> Check {
    let (n, taps, channels, blocks) = (128, 480_000, 2, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let filters: Vec<Vec<f32>> = (0..channels)
        .map(|_| noise(&mut rng, taps, 1.0 / (taps as f32).sqrt()))
        .collect();
    let x = noise(&mut rng, n * blocks, 1.0);
    let cfg = EngineConfig::new(48_000, n, 1, channels).map_err(|e| e.to_string())?;
    let mut conv = Convolver::new(&filters, cfg, Mode::Broadcast).map_err(|e| e.to_string())?;
    let mut out = vec![Vec::new(); channels];
    let mut y = vec![0.0f32; channels * n];
    for block in x.chunks_exact(n) {
        conv.convolve_into(block, &mut y).map_err(|e| e.to_string())?;
        for (o, c) in out.iter_mut().zip(y.chunks_exact(n)) {
            o.extend_from_slice(c);
        }
    }
    let worst = filters
        .iter()
        .zip(&out)
        .map(|(h, o)| max_err(o, &direct_convolve_range(&x, h, 0, o.len())))
        .fold(0.0, f64::max);
    verdict(
        worst < LONG_FILTER_TOLERANCE,
        format!("K={} partitions, max abs error {worst:.3e} (limit {LONG_FILTER_TOLERANCE:.0e})", conv.partitions()),
    )
}

fn perfect_cancellation() -> Check {
    let (n, fc_len, blocks, channels) = (128, 24_000, 50, 2);
    let scn = matched_feedback_scenario(n, channels, 4 * n, fc_len, blocks, 5, Backend::Reference)
        .map_err(|e| e.to_string())?;
    let rec = simulate_closed_loop(&scn).map_err(|e| e.to_string())?;
    let open = ClosedLoopScenario {
        true_feedback_paths: vec![vec![0.0]; channels],
        fc_filters: vec![vec![0.0]; channels],
        ..scn
    };
    let free = simulate_closed_loop(&open).map_err(|e| e.to_string())?;
    let residual = rec.max_abs_residual() as f64;
    let speakers = rec
        .speaker_blocks
        .iter()
        .flatten()
        .zip(free.speaker_blocks.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() as f64));
    verdict(
        residual < CANCELLATION_TOLERANCE && speakers < CANCELLATION_TOLERANCE,
        format!(
            "max |residual| {residual:.3e}, speaker deviation {speakers:.3e} (limit {CANCELLATION_TOLERANCE:.0e})"
        ),
    )
}

fn instability_contrast() -> Check {
    let blocks = 13;
    let howl = simulate_closed_loop(&howling_scenario(128, 1.2, false, blocks, Backend::Reference).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let grow = block_energies(&howl.mic_blocks);
    let increasing = grow[3..=12].windows(2).all(|w| w[1] > w[0]);

    let scn = howling_scenario(128, 1.2, true, blocks, Backend::Reference).map_err(|e| e.to_string())?;
    let clean: Vec<Vec<f32>> = scn.source.chunks(128).map(<[f32]>::to_vec).collect();
    let clean = block_energies(&clean);
    let cancelled = block_energies(&simulate_closed_loop(&scn).map_err(|e| e.to_string())?.conditioned_blocks);
    let deviation = cancelled
        .iter()
        .zip(&clean)
        .map(|(c, e)| (c - e).abs() / e)
        .fold(0.0, f64::max);
    verdict(
        increasing && deviation < ENERGY_TOLERANCE,
        format!(
            "no cancellation: energy {:.3e} -> {:.3e}, strictly increasing over blocks 3-12: {increasing}; \
             matched: max relative deviation {deviation:.3e} (limit {ENERGY_TOLERANCE:.0e})",
            grow[3], grow[12]
        ),
    )
}

fn latency_budgets() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, exact_ms, published_ms) in [(128, 8.0 / 3.0, 2.6), (16, 1.0 / 3.0, 0.3), (4096, 256.0 / 3.0, 85.3)] {
        let cfg = EngineConfig::new(48_000, n, 1, 1).map_err(|e| e.to_string())?;
        let ms = latency_budget(&cfg).map_err(|e| e.to_string())? * 1e3;
        let truncated = (ms * 10.0).floor() / 10.0;
        ok &= (ms - exact_ms).abs() < 1e-9 && (truncated - published_ms).abs() < BUDGET_TOLERANCE_MS;
        lines.push(format!("{n}: {ms:.6} ms"));
    }
    verdict(ok, lines.join(", "))
}

fn backend_equivalence() -> Check {
    let others: Vec<Backend> = list_backends()
        .into_iter()
        .filter(|d| d.available && d.kind != BackendKind::Reference)
        .map(|d| Backend::from_name(&d.name))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    if others.is_empty() {
        return Ok("only the reference backend is compiled in; nothing to compare".into());
    }
    let cases = grid_cases(Grid::Full);
    let mut details = Vec::new();
    let mut ok = true;
    for backend in others {
        let mut worst = 0.0f64;
        for case in &cases {
            worst = worst.max(backend_error(case, backend).map_err(|e| format!("{backend} {case}: {e}"))?);
        }
        ok &= worst < ORACLE_TOLERANCE;
        details.push(format!("{backend}: {} cases, max abs deviation {worst:.3e}", cases.len()));
    }
    verdict(ok, format!("{} (limit {ORACLE_TOLERANCE:.0e})", details.join("; ")))
}

fn sweep(subject: Subject, parameter: SweepParameter, values: Vec<f64>, tweak: impl Fn(&mut SweepSpec)) -> Result<Vec<TimingRecord>, String> {
    let mut spec = SweepSpec {
        values,
        channels: 2,
        trials: 20,
        warmup_trials: 3,
        ..SweepSpec::new(subject, parameter)
    };
    tweak(&mut spec);
    let report = bench::run_sweep(&spec).map_err(|e| e.to_string())?;
    if let Some(f) = report.failures.first() {
        return Err(format!("{parameter}={} failed: {}", f.value, f.reason));
    }
    Ok(report.records)
}

fn rho(records: &[TimingRecord]) -> f64 {
    let x: Vec<f64> = records.iter().map(|r| r.value).collect();
    let y: Vec<f64> = records.iter().map(|r| r.mean_s).collect();
    spearman_rho(&x, &y)
}

fn scaling_properties() -> Check {
    let by_length = sweep(Subject::Convolver, SweepParameter::FilterLength, SweepParameter::FilterLength.default_values(), |s| {
        s.trials = 10;
    })?;
    let by_channels = sweep(Subject::Convolver, SweepParameter::Channels, SweepParameter::Channels.default_values(), |s| {
        s.synth_length_s = 0.5;
    })?;
    let matched = |subject| {
        sweep(subject, SweepParameter::Channels, vec![4.0], |s| {
            s.synth_length_s = 1.0;
            s.fc_length_s = 0.5;
        })
    };
    let conv = matched(Subject::Convolver)?[0].mean_s;
    let aur = matched(Subject::Auralizer)?[0].mean_s;
    let (rl, rc) = (rho(&by_length), rho(&by_channels));

    let mut speedup = String::new();
    if let Ok(par) = sweep(Subject::Convolver, SweepParameter::Channels, vec![16.0], |s| {
        s.backend = "parallel".into();
        s.synth_length_s = 0.5;
    }) {
        let reference = by_channels.iter().find(|r| r.value == 16.0).map(|r| r.mean_s);
        if let Some(reference) = reference {
            speedup = format!(", parallel speedup at 16 channels {:.2}x (reported only)", reference / par[0].mean_s);
        }
    }
    let realtime = by_length.iter().filter(|r| r.realtime).count();
    verdict(
        rl > SPEARMAN_MIN && rc > SPEARMAN_MIN && aur >= conv,
        format!(
            "rho(filter length)={rl:.3}, rho(channels)={rc:.3} (limit > {SPEARMAN_MIN}); auralizer {:.3} ms vs \
             convolver {:.3} ms; {realtime}/{} filter lengths real-time (reported only){speedup}",
            aur * 1e3,
            conv * 1e3,
            by_length.len()
        ),
    )
}

fn fc_length() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("fc.csv");
    let out = upconv(&[
        "bench", "--subject", "auralizer", "--sweep", "fc-length", "--values", "0.1,5", "--filter-length", "10",
        "--channels", "2", "--trials", "5", "--warmup", "1", "--out", csv.to_str().unwrap(),
    ]);
    if !out.status.success() {
        return Err(format!("bench exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    let records = parse_csv(&std::fs::read_to_string(&csv).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let ratio_line = stdout.lines().find(|l| l.contains("fc-length=5")).unwrap_or("");
    let ok = records.len() == 2 && records[0].value == 0.1 && records[1].value == 5.0 && !ratio_line.is_empty();
    let ratio = records.get(1).zip(records.first()).map_or(f64::NAN, |(a, b)| a.mean_s / b.mean_s);
    verdict(ok, format!("both points recorded; mean(5 s)/mean(0.1 s) = {ratio:.3} (reported only)"))
}

fn formats() -> Check {
    let records = sweep(Subject::Convolver, SweepParameter::BlockSize, vec![16.0, 64.0, 256.0], |s| {
        s.synth_length_s = 0.1;
        s.trials = 5;
    })?;
    let mut text = Vec::new();
    write_csv(&records, &mut text).map_err(|e| e.to_string())?;
    let back = parse_csv(std::str::from_utf8(&text).unwrap()).map_err(|e| e.to_string())?;
    let csv_ok = back == records;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let filters = Signal {
        sample_rate_hz: 48_000,
        channels: (0..3).map(|_| noise(&mut rng, 1001, 1.0)).collect(),
    };
    let mut files_ok = true;
    for name in ["h.wav", "h.f32"] {
        let path = dir.path().join(name);
        write_filters(&path, &filters).map_err(|e| e.to_string())?;
        let back = read_filters(&path, Some(48_000)).map_err(|e| e.to_string())?;
        files_ok &= back.channels.iter().flatten().map(|v| v.to_bits()).eq(filters.channels.iter().flatten().map(|v| v.to_bits()));
    }

    let verify = upconv(&["verify", "--grid", "small"]);
    let verify_ok = verify.status.success();
    verdict(
        csv_ok && files_ok && verify_ok,
        format!(
            "CSV lossless: {csv_ok}; WAV/raw bit-exact: {files_ok}; `verify --grid small` exit {:?}",
            verify.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence over the full grid", oracle_grid),
        ("long-filter equivalence (10 s filters)", long_filter),
        ("perfect feedback cancellation", perfect_cancellation),
        ("instability contrast", instability_contrast),
        ("latency budgets", latency_budgets),
        ("backend equivalence", backend_equivalence),
        ("benchmark scaling properties", scaling_properties),
        ("feedback-filter length insensitivity", fc_length),
        ("CSV and file-format conformance", formats),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
