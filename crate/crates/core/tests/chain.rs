use specsamp::perf::{expected_tokens_per_loop, implied_alpha, loop_time, speedup, AcceptanceStats, CostModel, Simulation};

/// Geometric accept chain with a small xorshift generator, independent of
/// the crate's random source.
fn chain_mean(alpha: f64, k: usize, trials: usize, mut state: u64) -> f64 {
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut total = 0usize;
    for _ in 0..trials {
        let mut emitted = 1;
        while emitted <= k && next() < alpha {
            emitted += 1;
        }
        total += emitted;
    }
    total as f64 / trials as f64
}

#[test]
fn closed_form_matches_chain() {
    for alpha in [0.1, 0.45, 0.9] {
        for k in [2, 5] {
            let mc = chain_mean(alpha, k, 200_000, 0x2545_f491_4f6c_dd1d);
            let exact = expected_tokens_per_loop(alpha, k);
            assert!((mc - exact).abs() < 0.02, "alpha {alpha} k {k}: {mc} vs {exact}");
        }
    }
}

#[test]
fn closed_form_by_summation() {
    // E = Σ_{j=0..K} α^j
    for alpha in [0.0, 0.3, 0.999_999, 1.0] {
        for k in 1..=8 {
            let direct: f64 = (0..=k).map(|j| if j == 0 { 1.0 } else { f64::powi(alpha, j as i32) }).sum();
            assert!((expected_tokens_per_loop(alpha, k) - direct).abs() < 1e-9, "alpha {alpha} k {k}");
        }
    }
}

#[test]
fn implied_alpha_inverts() {
    for alpha in [0.05, 0.5, 0.77, 0.95] {
        let m = expected_tokens_per_loop(alpha, 4);
        assert!((implied_alpha(m, 4).unwrap() - alpha).abs() < 1e-9);
    }
}

#[test]
fn published_timings() {
    let cost = CostModel::published();
    assert!((loop_time(&cost, 4) - 21.3).abs() < 1e-12);
    let none = Simulation { sequences: 0, ..Default::default() };
    let e = speedup(&cost, 4, &AcceptanceStats::MeanEmitted(21.3 / 5.73), &none).unwrap();
    assert!((e.ms_per_token - 5.73).abs() < 1e-12);
    assert!((e.speedup - 14.1 / 5.73).abs() < 1e-12);
}
