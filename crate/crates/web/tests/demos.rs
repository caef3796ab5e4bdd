use upconv_web::{budget_table, run_convolution, run_feedback, synthetic_response, SAMPLE_RATE};

#[test]
fn convolution_demo_matches_oracle() {
    for block in [16, 128, 1024] {
        let run = run_convolution(block, 50.0, 300.0, 1).unwrap();
        assert_eq!(run.output.len(), run.blocks * block);
        assert_eq!(run.partitions, 2400usize.div_ceil(block));
        assert!(run.max_error < 1e-4, "block {block}: {}", run.max_error);
        assert!(run.output.iter().any(|v| v.abs() > 1e-3));
    }
}

#[test]
fn convolution_demo_rejects_bad_block() {
    assert!(run_convolution(100, 10.0, 100.0, 0).is_err());
}

#[test]
fn synthetic_response_is_unit_energy_and_deterministic() {
    let h = synthetic_response(4800, 200.0, 3);
    let e: f32 = h.iter().map(|v| v * v).sum();
    assert!((e - 1.0).abs() < 1e-4);
    assert_eq!(h, synthetic_response(4800, 200.0, 3));
    let head: f32 = h[..2400].iter().map(|v| v * v).sum();
    assert!(head > 0.9, "energy should be concentrated early");
}

#[test]
fn feedback_demo_contrasts_cancellation() {
    let open = run_feedback(1.5, 0.0, 40, 2).unwrap();
    let matched = run_feedback(1.5, 1.0, 40, 2).unwrap();
    assert!(open.mic_db[39] > open.source_db[39] + 20.0);
    for (c, s) in matched.conditioned_db.iter().zip(&matched.source_db) {
        assert!((c - s).abs() < 0.01);
    }
    let stable = run_feedback(0.5, 0.0, 40, 2).unwrap();
    assert!(stable.mic_db[39] < stable.source_db[39] + 10.0);
}

#[test]
fn budget_table_spans_block_sizes() {
    let rows = budget_table(10.0, SAMPLE_RATE);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0].0, 16);
    assert_eq!(rows[8].0, 4096);
    assert!((rows[3].1 - 8.0 / 3.0).abs() < 1e-9);
    assert_eq!(rows[3].2, 3750);
}
