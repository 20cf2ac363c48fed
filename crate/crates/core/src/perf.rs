//! Analytical latency model for speculative loops.
//!
//! A loop costs `K · draft_ms + scoring_ms(K) + overhead_ms`, where scoring
//! `K + 1` positions in one target call is taken to cost about as much as
//! sampling one token (`scoring_ms(K) = scoring_ms + scoring_slope · K`,
//! slope 0 by default). Dividing by the expected tokens emitted per loop
//! gives a per-token time, and the speedup is the autoregressive per-token
//! time over that.
//!
//! The expected-tokens formula `(1 − α^{K+1}) / (1 − α)` assumes every
//! draft position is accepted independently with the same probability `α`.
//! That is a model; acceptance measured from real traces can be fed in
//! instead through [`AcceptanceStats::Empirical`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{RandomSource, UniformSource};
use crate::speculative::LoopTrace;

/// Per-call costs in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// One autoregressive target call.
    pub target_ms: f64,
    /// One draft call.
    pub draft_ms: f64,
    /// One parallel scoring call at `K = 0`; defaults to `target_ms`.
    #[serde(default)]
    pub scoring_ms: Option<f64>,
    /// Extra scoring cost per draft token.
    #[serde(default)]
    pub scoring_slope: f64,
    #[serde(default)]
    pub overhead_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_bytes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bytes_per_s: Option<f64>,
}

impl CostModel {
    /// Scoring cost equal to one target call, no overhead.
    pub fn new(target_ms: f64, draft_ms: f64) -> Self {
        CostModel {
            target_ms,
            draft_ms,
            scoring_ms: None,
            scoring_slope: 0.0,
            overhead_ms: 0.0,
            model_bytes: None,
            bandwidth_bytes_per_s: None,
        }
    }

    /// Target 14.1 ms/token, draft 1.8 ms/token.
    pub fn published() -> Self {
        CostModel::new(14.1, 1.8)
    }

    pub fn with_scoring(mut self, scoring_ms: f64) -> Self {
        self.scoring_ms = Some(scoring_ms);
        self
    }

    pub fn with_scoring_slope(mut self, slope: f64) -> Self {
        self.scoring_slope = slope;
        self
    }

    pub fn with_overhead(mut self, overhead_ms: f64) -> Self {
        self.overhead_ms = overhead_ms;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &'static str| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(Error::NonPositive(name)) };
        let non_negative =
            |v: f64, name: &'static str| if v >= 0.0 && v.is_finite() { Ok(()) } else { Err(Error::NonPositive(name)) };
        positive(self.target_ms, "target_ms")?;
        non_negative(self.draft_ms, "draft_ms")?;
        if let Some(s) = self.scoring_ms {
            positive(s, "scoring_ms")?;
        }
        non_negative(self.scoring_slope, "scoring_slope")?;
        non_negative(self.overhead_ms, "overhead_ms")
    }

    pub fn scoring_time(&self, k: usize) -> f64 {
        self.scoring_ms.unwrap_or(self.target_ms) + self.scoring_slope * k as f64
    }

    /// Autoregressive per-token floor from the configured model size and
    /// bandwidth, if both are set.
    pub fn ceiling_ms(&self) -> Option<Result<f64>> {
        match (self.model_bytes, self.bandwidth_bytes_per_s) {
            (Some(b), Some(bw)) => Some(bandwidth_ceiling(b, bw)),
            _ => None,
        }
    }
}

/// Model bytes over aggregate memory bandwidth, in ms per token: every
/// parameter has to be streamed once per autoregressive step.
pub fn bandwidth_ceiling(model_bytes: f64, bandwidth_bytes_per_s: f64) -> Result<f64> {
    if !(model_bytes > 0.0) {
        return Err(Error::NonPositive("model_bytes"));
    }
    if !(bandwidth_bytes_per_s > 0.0) {
        return Err(Error::NonPositive("aggregate_bandwidth"));
    }
    Ok(model_bytes / bandwidth_bytes_per_s * 1e3)
}

/// `K · draft + scoring(K) + overhead`.
pub fn loop_time(cost: &CostModel, k: usize) -> f64 {
    k as f64 * cost.draft_ms + cost.scoring_time(k) + cost.overhead_ms
}

/// Mean tokens per loop when each position is accepted with probability
/// `alpha`: `1 + α + … + α^K`.
pub fn expected_tokens_per_loop(alpha: f64, k: usize) -> f64 {
    let alpha = alpha.clamp(0.0, 1.0);
    if 1.0 - alpha < 1e-6 {
        // series form avoids 0/0 at α → 1
        let mut term = 1.0;
        let mut sum = 0.0;
        for _ in 0..=k {
            sum += term;
            term *= alpha;
        }
        return sum;
    }
    (1.0 - alpha.powi(k as i32 + 1)) / (1.0 - alpha)
}

/// The `α` whose [`expected_tokens_per_loop`] equals `mean` (bisection).
pub fn implied_alpha(mean: f64, k: usize) -> Result<f64> {
    if !(1.0..=(k + 1) as f64).contains(&mean) {
        return Err(Error::BadParam(format!("mean emitted {mean} outside [1, {}]", k + 1)));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_tokens_per_loop(mid, k) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Where per-loop acceptance behaviour comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceStats {
    /// Independent per-position acceptance probability.
    Rate(f64),
    /// Mean tokens per loop; the spread is taken from the i.i.d. model with
    /// the matching `α`.
    MeanEmitted(f64),
    /// Observed tokens emitted per loop.
    Empirical(Vec<u32>),
}

impl AcceptanceStats {
    pub fn from_traces(traces: &[LoopTrace]) -> Self {
        AcceptanceStats::Empirical(traces.iter().map(|t| t.emitted as u32).collect())
    }

    fn validate(&self, k: usize) -> Result<()> {
        match self {
            AcceptanceStats::Rate(a) if !(0.0..=1.0).contains(a) => {
                Err(Error::BadParam(format!("acceptance rate {a} outside [0, 1]")))
            }
            AcceptanceStats::MeanEmitted(m) => implied_alpha(*m, k).map(|_| ()),
            AcceptanceStats::Empirical(v) if v.is_empty() => Err(Error::EmptyStats),
            AcceptanceStats::Empirical(v) => match v.iter().find(|&&e| e < 1 || e as usize > k + 1) {
                Some(e) => Err(Error::BadParam(format!("loop emitted {e} tokens with K = {k}"))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn mean_emitted(&self, k: usize) -> f64 {
        match self {
            AcceptanceStats::Rate(a) => expected_tokens_per_loop(*a, k),
            AcceptanceStats::MeanEmitted(m) => *m,
            AcceptanceStats::Empirical(v) => v.iter().map(|&e| e as f64).sum::<f64>() / v.len() as f64,
        }
    }
}

/// Draws one loop's emitted count under the i.i.d. acceptance chain.
fn chain_draw<U: UniformSource + ?Sized>(alpha: f64, k: usize, rng: &mut U) -> usize {
    let mut accepted = 0;
    while accepted < k && rng.next_uniform() < alpha {
        accepted += 1;
    }
    accepted + 1
}

/// Monte Carlo settings for per-sequence generation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub sequences: usize,
    pub tokens: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for Simulation {
    fn default() -> Self {
        Simulation { sequences: 10_000, tokens: 128, seed: 0, exec: Exec::default() }
    }
}

const SIM_CHUNK: usize = 1000;

/// Simulated time to generate `sim.tokens` tokens, one entry per sequence.
/// Every call with the same settings reuses the same random streams.
pub fn simulate_sequence_times(cost: &CostModel, k: usize, stats: &AcceptanceStats, sim: &Simulation) -> Result<Vec<f64>> {
    stats.validate(k)?;
    let per_loop = loop_time(cost, k);
    let alpha = match stats {
        AcceptanceStats::Rate(a) => Some(*a),
        AcceptanceStats::MeanEmitted(m) => Some(implied_alpha(*m, k)?),
        AcceptanceStats::Empirical(_) => None,
    };
    let chunks = sim.sequences.div_ceil(SIM_CHUNK);
    let times = sim.exec.map_range(chunks, |c| {
        let mut rng = RandomSource::with_stream(sim.seed, c as u64);
        let n = SIM_CHUNK.min(sim.sequences - c * SIM_CHUNK);
        (0..n)
            .map(|_| {
                let mut produced = 0;
                let mut loops = 0usize;
                while produced < sim.tokens {
                    produced += match (alpha, stats) {
                        (Some(a), _) => chain_draw(a, k, &mut rng),
                        (None, AcceptanceStats::Empirical(v)) => {
                            v[((rng.next_uniform() * v.len() as f64) as usize).min(v.len() - 1)] as usize
                        }
                        _ => unreachable!(),
                    };
                    loops += 1;
                }
                loops as f64 * per_loop
            })
            .collect::<Vec<_>>()
    });
    Ok(times.into_iter().flatten().collect())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedupEstimate {
    pub mean_emitted: f64,
    pub loop_ms: f64,
    pub ms_per_token: f64,
    pub speedup: f64,
    pub mean_sequence_ms: f64,
    pub std_sequence_ms: f64,
}

/// Mean speedup over autoregressive sampling plus the simulated spread of
/// whole-sequence generation time.
pub fn speedup(cost: &CostModel, k: usize, stats: &AcceptanceStats, sim: &Simulation) -> Result<SpeedupEstimate> {
    cost.validate()?;
    if k == 0 {
        return Err(Error::BadParam("lookahead K must be >= 1".into()));
    }
    stats.validate(k)?;
    let loop_ms = loop_time(cost, k);
    let mean_emitted = stats.mean_emitted(k);
    let ms_per_token = loop_ms / mean_emitted;
    let (mean_sequence_ms, std_sequence_ms) = if sim.sequences > 0 {
        mean_std(&simulate_sequence_times(cost, k, stats, sim)?)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SpeedupEstimate {
        mean_emitted,
        loop_ms,
        ms_per_token,
        speedup: cost.target_ms / ms_per_token,
        mean_sequence_ms,
        std_sequence_ms,
    })
}

/// Acceptance input for a sweep across `K`.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepSource {
    Rate(f64),
    /// Per-position acceptance estimated from recorded loops: accepted
    /// positions over tested positions.
    Traces(Vec<LoopTrace>),
}

impl SweepSource {
    pub fn alpha(&self) -> Result<f64> {
        match self {
            SweepSource::Rate(a) if (0.0..=1.0).contains(a) => Ok(*a),
            SweepSource::Rate(a) => Err(Error::BadParam(format!("acceptance rate {a} outside [0, 1]"))),
            SweepSource::Traces(t) if t.is_empty() => Err(Error::EmptyStats),
            SweepSource::Traces(t) => {
                let accepted: usize = t.iter().map(|x| x.accepted).sum();
                let tested: usize = t.iter().map(|x| x.accepted + x.resampled as usize).sum();
                Ok(if tested == 0 { 1.0 } else { accepted as f64 / tested as f64 })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub mean_ms_per_128: f64,
    pub std_ms: f64,
    pub efficiency: f64,
    pub loop_ms: f64,
    pub speedup: f64,
}

pub const SWEEP_CSV_HEADER: &str = "K,mean_ms_per_128,std_ms,efficiency,loop_ms,speedup";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.k, self.mean_ms_per_128, self.std_ms, self.efficiency, self.loop_ms, self.speedup
        )
    }
}

/// One row per lookahead in `ks`.
pub fn k_sweep(cost: &CostModel, source: &SweepSource, ks: &[usize], sim: &Simulation) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(Error::BadParam("empty K range".into()));
    }
    let alpha = source.alpha()?;
    ks.iter()
        .map(|&k| {
            let est = speedup(cost, k, &AcceptanceStats::Rate(alpha), sim)?;
            Ok(SweepRow {
                k,
                mean_ms_per_128: est.mean_sequence_ms,
                std_ms: est.std_sequence_ms,
                efficiency: est.mean_emitted / (k + 1) as f64,
                loop_ms: est.loop_ms,
                speedup: est.speedup,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quick() -> Simulation {
        Simulation { sequences: 2000, ..Simulation::default() }
    }

    #[test]
    fn ceiling_examples() {
        assert!((bandwidth_ceiling(140e9, 1e13).unwrap() - 14.0).abs() < 1e-12);
        assert!((bandwidth_ceiling(140e9, 2e13).unwrap() - 7.0).abs() < 1e-12);
        assert!((bandwidth_ceiling(5e9, 5e9).unwrap() - 1000.0).abs() < 1e-12);
        assert_eq!(bandwidth_ceiling(0.0, 1.0), Err(Error::NonPositive("model_bytes")));
        assert!(bandwidth_ceiling(1.0, -1.0).is_err());
    }

    #[test]
    fn loop_time_examples() {
        assert!((loop_time(&CostModel::published(), 4) - 21.3).abs() < 1e-12);
        assert_eq!(loop_time(&CostModel::new(14.1, 1.8).with_overhead(0.25), 0), 14.35);
        let c = CostModel::new(10.0, 2.0).with_overhead(0.5);
        assert_eq!(loop_time(&c, 1), 12.5);
        let sloped = CostModel::new(10.0, 2.0).with_scoring_slope(0.5);
        assert_eq!(loop_time(&sloped, 4), 8.0 + 12.0);
    }

    #[test]
    fn expected_tokens_examples() {
        assert_eq!(expected_tokens_per_loop(0.0, 4), 1.0);
        assert_eq!(expected_tokens_per_loop(1.0, 4), 5.0);
        assert!((expected_tokens_per_loop(0.8, 4) - 3.3616).abs() < 1e-12);
        // continuity at α = 1
        assert!((expected_tokens_per_loop(1.0 - 1e-9, 7) - 8.0).abs() < 1e-6);
        assert!((expected_tokens_per_loop(1.0 - 2e-6, 7) - expected_tokens_per_loop(1.0 - 5e-7, 7)).abs() < 1e-4);
    }

    #[test]
    fn published_speedups() {
        let cost = CostModel::published();
        for (ms_per_token, expected) in [(5.73, 2.46), (7.00, 2.01)] {
            let mean = loop_time(&cost, 4) / ms_per_token;
            let est = speedup(&cost, 4, &AcceptanceStats::MeanEmitted(mean), &quick()).unwrap();
            assert!((est.ms_per_token - ms_per_token).abs() < 1e-12);
            assert!((est.speedup - expected).abs() < 0.005, "{}", est.speedup);
        }
    }

    #[test]
    fn free_perfect_drafts_hit_the_ceiling() {
        let cost = CostModel::new(14.1, 0.0);
        for k in 1..6 {
            let est = speedup(&cost, k, &AcceptanceStats::Rate(1.0), &quick()).unwrap();
            assert!((est.speedup - (k + 1) as f64).abs() < 1e-12);
            assert!(est.std_sequence_ms.abs() < 1e-9);
        }
    }

    #[test]
    fn empirical_stats() {
        let cost = CostModel::published();
        let stats = AcceptanceStats::Empirical(vec![1, 5, 3, 3]);
        let est = speedup(&cost, 4, &stats, &quick()).unwrap();
        assert_eq!(est.mean_emitted, 3.0);
        assert!(speedup(&cost, 4, &AcceptanceStats::Empirical(vec![]), &quick()) == Err(Error::EmptyStats));
        assert!(speedup(&cost, 4, &AcceptanceStats::Empirical(vec![6]), &quick()).is_err());
        assert!(speedup(&cost, 4, &AcceptanceStats::Rate(1.5), &quick()).is_err());
    }

    #[test]
    fn implied_alpha_inverts() {
        for k in [1, 4, 8] {
            for a in [0.0, 0.3, 0.77, 1.0] {
                let m = expected_tokens_per_loop(a, k);
                assert!((implied_alpha(m, k).unwrap() - a).abs() < 1e-9);
            }
        }
        assert!(implied_alpha(0.5, 4).is_err());
    }

    #[test]
    fn sweep_extremes() {
        let cost = CostModel::published();
        let ks: Vec<usize> = (1..=8).collect();
        let perfect = k_sweep(&cost, &SweepSource::Rate(1.0), &ks, &quick()).unwrap();
        // per-token time falls strictly; the 128-token total only up to the
        // rounding of the final loop
        assert!(perfect.windows(2).all(|w| w[1].loop_ms / ((w[1].k + 1) as f64) < w[0].loop_ms / ((w[0].k + 1) as f64)));
        assert!(perfect.windows(2).all(|w| w[1].speedup > w[0].speedup));
        assert!(perfect[..7].windows(2).all(|w| w[1].mean_ms_per_128 < w[0].mean_ms_per_128));
        let useless = k_sweep(&cost, &SweepSource::Rate(0.0), &ks, &quick()).unwrap();
        assert!(useless.iter().all(|r| r.speedup < 1.0));
        assert!(k_sweep(&cost, &SweepSource::Rate(0.5), &[], &quick()).is_err());
        let csv = sweep_csv(&perfect);
        assert!(csv.starts_with("K,mean_ms_per_128,std_ms,efficiency,loop_ms,speedup\n1,"));
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn trace_alpha_estimate() {
        let t = |accepted, bonus: bool| LoopTrace { drafted: 4, accepted, resampled: !bonus, bonus, emitted: accepted + 1 };
        // 4 + 1 accepted out of 4 + 2 tested
        let src = SweepSource::Traces(vec![t(4, true), t(1, false)]);
        assert!((src.alpha().unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cost_json_keys() {
        let c: CostModel = serde_json::from_str(r#"{"target_ms": 14.1, "draft_ms": 1.8, "overhead_ms": 0.2}"#).unwrap();
        assert_eq!(c.scoring_time(3), 14.1);
        assert_eq!(c.overhead_ms, 0.2);
        let c: CostModel = serde_json::from_str(r#"{"target_ms": 10, "draft_ms": 1, "scoring_ms": 11, "scoring_slope": 0.5}"#).unwrap();
        assert_eq!(c.scoring_time(2), 12.0);
        assert!(CostModel::new(0.0, 1.0).validate().is_err());
    }

    #[test]
    fn simulation_is_policy_independent() {
        let cost = CostModel::published();
        let seq = Simulation { exec: Exec::Sequential, ..quick() };
        let par = Simulation { exec: Exec::Parallel, ..quick() };
        let a = simulate_sequence_times(&cost, 4, &AcceptanceStats::Rate(0.6), &seq).unwrap();
        let b = simulate_sequence_times(&cost, 4, &AcceptanceStats::Rate(0.6), &par).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2000);
    }

    proptest! {
        #[test]
        fn efficiency_decreases_in_k(alpha in 0.01f64..0.99) {
            let eff: Vec<f64> = (1..=8).map(|k| expected_tokens_per_loop(alpha, k) / (k + 1) as f64).collect();
            prop_assert!(eff.windows(2).all(|w| w[1] < w[0]));
        }

        #[test]
        fn speedup_bounded_by_full_acceptance(alpha in 0.0f64..=1.0, k in 1usize..10,
                                              target in 1.0f64..50.0, draft in 0.0f64..10.0) {
            let cost = CostModel::new(target, draft);
            let sim = Simulation { sequences: 0, ..Simulation::default() };
            let est = speedup(&cost, k, &AcceptanceStats::Rate(alpha), &sim).unwrap();
            prop_assert!(est.speedup <= (k + 1) as f64 * target / loop_time(&cost, k) + 1e-12);
        }
    }
}
