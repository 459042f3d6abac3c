//! Evaluation engine for the error-bound terms.
//!
//! Every incorrect-decoding term in the bounds has the same shape: an
//! expectation over the true transmission `(inputs, output)` of a capped,
//! amplified rival-win probability,
//!
//! ```text
//! coefficient * E[ min{ cap, 2^amplifier * P[rival_score >= true_score | truth] } ]
//! ```
//!
//! where both scores decompose over positions. The engine consumes a
//! position-factored description ([`RivalTermSpec`]) and evaluates it two ways:
//!
//! - **Exact**: dynamic programming over positions tracking
//!   `(context histogram, quantized true score)`, where the *context* of a
//!   position captures exactly what the rival's per-position score
//!   distribution depends on (the reused true symbols and the output symbol).
//!   The rival's conditional score distribution is then the convolution of
//!   per-context distributions — mathematically identical to exhaustively
//!   enumerating rival codeword sequences — and the tail is read from suffix
//!   sums. The state count is capped; exceeding the cap falls back to:
//! - **Monte Carlo**: seeded counter-based sampling of the truth only; the
//!   rival-win probability for each sampled truth is still computed exactly by
//!   the same convolution, so sampling noise enters only through the outer
//!   expectation. Mean and standard error are reported.
//!
//! Score comparisons happen on quantized integer log-values throughout
//! ([`crate::logdomain`]), so tie events (which the inequality deliberately
//! includes) are decided identically here, in the decoders, and in the
//! brute-force oracles.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::logdomain::{q_add, QLog, Q_LOG_ZERO};
use crate::rng::{domain, keyed_unit, Seed};

/// Errors from malformed term specifications.
#[derive(Debug, Error)]
pub enum TermError {
    /// A position's outer-event weights do not sum to 1.
    #[error("position {position}: outer-event weights sum to {sum:.17} (must be 1 within 1e-9)")]
    EventWeightsNotNormalized { position: usize, sum: f64 },
    /// An event references a context with no rival distribution.
    #[error("position {position}: event references context {context}, only {count} defined")]
    UnknownContext { position: usize, context: usize, count: usize },
    /// A rival distribution's weights do not sum to 1.
    #[error("context {context}: rival-score weights sum to {sum:.17} (must be 1 within 1e-9)")]
    RivalWeightsNotNormalized { context: usize, sum: f64 },
    /// A specification has no positions.
    #[error("term specification has no positions")]
    NoPositions,
}

/// One outer event at one position: a joint draw of the true pinned symbols
/// and the output symbol, collapsed to what the engine needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterEvent {
    /// Probability of the event under the true law (pinned-symbol priors times
    /// the true conditional of the output). Events with zero probability are
    /// omitted.
    pub weight: f64,
    /// Quantized per-position increment of the true score (the log of the true
    /// candidate's likelihood factor at this position). Finite by
    /// construction: zero-probability outputs never form events.
    pub q_true: QLog,
    /// Which rival-score distribution applies at this position given this
    /// event (index into [`RivalTermSpec::context_dists`]).
    pub context: usize,
}

/// The outer-event table of one position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PositionSpec {
    /// All positive-probability outer events of this position.
    pub events: Vec<OuterEvent>,
}

/// A per-context distribution of the rival's quantized per-position score
/// (value, probability); [`Q_LOG_ZERO`] values are legal (rival factor zero).
pub type RivalDist = Vec<(QLog, f64)>;

/// A fully assembled incorrect-decoding term.
#[derive(Debug, Clone, PartialEq)]
pub struct RivalTermSpec {
    /// Per-position outer-event tables, in position order.
    pub positions: Vec<PositionSpec>,
    /// Rival score distributions by context id.
    pub context_dists: Vec<RivalDist>,
    /// Quantized score constant of the true candidate (log prior plus rate
    /// penalty), added outside the per-position sums.
    pub q_true_const: QLog,
    /// Quantized score constant of the rival candidate.
    pub q_rival_const: QLog,
    /// The candidate-count cap inside the min (e.g. one over the size of the
    /// matching operation-region slice).
    pub cap: f64,
    /// Log2 of the amplification factor in front of the rival-win probability
    /// (block length times the rival's fresh rate budget in bits).
    pub log2_amplifier: f64,
    /// Multiplier outside the expectation (the true selection's prior).
    pub coefficient: f64,
}

impl RivalTermSpec {
    /// Validates normalization and context references.
    pub fn validate(&self) -> Result<(), TermError> {
        if self.positions.is_empty() {
            return Err(TermError::NoPositions);
        }
        for (pi, pos) in self.positions.iter().enumerate() {
            let sum: f64 = pos.events.iter().map(|e| e.weight).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(TermError::EventWeightsNotNormalized { position: pi, sum });
            }
            for e in &pos.events {
                if e.context >= self.context_dists.len() {
                    return Err(TermError::UnknownContext {
                        position: pi,
                        context: e.context,
                        count: self.context_dists.len(),
                    });
                }
            }
        }
        for (ci, dist) in self.context_dists.iter().enumerate() {
            let sum: f64 = dist.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(TermError::RivalWeightsNotNormalized { context: ci, sum });
            }
        }
        Ok(())
    }
}

/// Evaluation limits and the per-term Monte Carlo seed.
#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    /// Maximum concurrent dynamic-programming states before falling back to
    /// Monte Carlo (0 forces Monte Carlo).
    pub max_exact_states: usize,
    /// Outer samples in Monte Carlo mode.
    pub mc_samples: usize,
    /// Seed for Monte Carlo mode; derive one per term upstream.
    pub seed: Seed,
}

/// How a term was evaluated, with the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalOutcome {
    /// Exact dynamic-programming evaluation.
    Exact(f64),
    /// Monte Carlo over the truth with exact inner tails.
    MonteCarlo {
        /// Sample mean of the capped, amplified rival-win probability, times
        /// the coefficient.
        value: f64,
        /// Standard error of `value` (also scaled by the coefficient).
        stderr: f64,
        /// Number of outer samples.
        samples: usize,
    },
}

impl EvalOutcome {
    /// The evaluated value regardless of mode.
    pub fn value(&self) -> f64 {
        match *self {
            EvalOutcome::Exact(v) => v,
            EvalOutcome::MonteCarlo { value, .. } => value,
        }
    }
}

/// Convolution of two rival-score distributions (distribution of the sum of
/// independent draws); [`Q_LOG_ZERO`] absorbs.
fn convolve(a: &RivalDist, b: &RivalDist) -> RivalDist {
    let mut m: BTreeMap<QLog, f64> = BTreeMap::new();
    for &(va, pa) in a {
        for &(vb, pb) in b {
            *m.entry(q_add(va, vb)).or_insert(0.0) += pa * pb;
        }
    }
    m.into_iter().collect()
}

/// Distribution of the sum of `k` independent draws from `d`.
fn dist_power(d: &RivalDist, k: u32) -> RivalDist {
    let mut acc: RivalDist = vec![(0, 1.0)];
    for _ in 0..k {
        acc = convolve(&acc, d);
    }
    acc
}

/// Sorted values plus suffix sums for tail lookups.
struct TailTable {
    values: Vec<QLog>,
    suffix: Vec<f64>,
}

impl TailTable {
    fn build(dist: RivalDist) -> TailTable {
        // RivalDist from convolve() is already sorted ascending by value.
        let values: Vec<QLog> = dist.iter().map(|&(v, _)| v).collect();
        let mut suffix = vec![0.0; values.len() + 1];
        for i in (0..values.len()).rev() {
            suffix[i] = suffix[i + 1] + dist[i].1;
        }
        TailTable { values, suffix }
    }

    /// `P[value >= theta]`.
    fn tail(&self, theta: QLog) -> f64 {
        let idx = self.values.partition_point(|&v| v < theta);
        self.suffix[idx]
    }
}

/// The tail threshold: rival_sum >= tau + true_const - rival_const. `None`
/// means the rival can never win (its constant is log-zero).
fn threshold(tau: QLog, q_true_const: QLog, q_rival_const: QLog) -> Option<QLog> {
    if q_rival_const == Q_LOG_ZERO {
        return None;
    }
    debug_assert_ne!(q_true_const, Q_LOG_ZERO, "true candidate with zero prior");
    Some(tau + q_true_const - q_rival_const)
}

struct TailCache<'a> {
    dists: &'a [RivalDist],
    cache: HashMap<Vec<u32>, TailTable>,
}

impl<'a> TailCache<'a> {
    fn new(dists: &'a [RivalDist]) -> Self {
        TailCache { dists, cache: HashMap::new() }
    }

    fn tail(&mut self, hist: &[u32], theta: QLog) -> f64 {
        if let Some(t) = self.cache.get(hist) {
            return t.tail(theta);
        }
        let mut acc: RivalDist = vec![(0, 1.0)];
        for (ci, &count) in hist.iter().enumerate() {
            if count > 0 {
                acc = convolve(&acc, &dist_power(&self.dists[ci], count));
            }
        }
        let table = TailTable::build(acc);
        let v = table.tail(theta);
        self.cache.insert(hist.to_vec(), table);
        v
    }
}

/// One summand of the expectation: `min{cap, 2^amp * tail}`, with the
/// zero-tail case short-circuited (so an infinite amplifier cannot poison it).
fn capped(cap: f64, log2_amplifier: f64, tail: f64) -> f64 {
    if tail <= 0.0 {
        0.0
    } else {
        (f64::exp2(log2_amplifier) * tail).min(cap)
    }
}

fn exact_eval(spec: &RivalTermSpec, max_states: usize) -> Option<f64> {
    let ctx_n = spec.context_dists.len();
    let mut states: BTreeMap<(Vec<u32>, QLog), f64> = BTreeMap::new();
    states.insert((vec![0u32; ctx_n], 0), 1.0);
    for pos in &spec.positions {
        let mut next: BTreeMap<(Vec<u32>, QLog), f64> = BTreeMap::new();
        for ((hist, tau), prob) in &states {
            for e in &pos.events {
                let mut h = hist.clone();
                h[e.context] += 1;
                let entry = next.entry((h, tau + e.q_true)).or_insert(0.0);
                *entry += prob * e.weight;
            }
        }
        if next.len() > max_states {
            return None;
        }
        states = next;
    }

    let mut tails = TailCache::new(&spec.context_dists);
    let mut expectation = 0.0;
    for ((hist, tau), prob) in &states {
        let contribution = match threshold(*tau, spec.q_true_const, spec.q_rival_const) {
            None => 0.0,
            Some(theta) => capped(spec.cap, spec.log2_amplifier, tails.tail(hist, theta)),
        };
        expectation += prob * contribution;
    }
    Some(spec.coefficient * expectation)
}

fn select_event(events: &[OuterEvent], u: f64) -> &OuterEvent {
    let mut acc = 0.0;
    for e in events {
        acc += e.weight;
        if u < acc {
            return e;
        }
    }
    events.last().expect("position with no events")
}

fn mc_eval(spec: &RivalTermSpec, settings: &EvalSettings) -> (f64, f64, usize) {
    let ctx_n = spec.context_dists.len();
    let m = settings.mc_samples.max(1);
    let mut tails = TailCache::new(&spec.context_dists);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for s in 0..m {
        let mut hist = vec![0u32; ctx_n];
        let mut tau: QLog = 0;
        for (p, pos) in spec.positions.iter().enumerate() {
            let u = keyed_unit(settings.seed, &[domain::BOUND_MC, s as u64, p as u64]);
            let e = select_event(&pos.events, u);
            hist[e.context] += 1;
            tau += e.q_true;
        }
        let v = match threshold(tau, spec.q_true_const, spec.q_rival_const) {
            None => 0.0,
            Some(theta) => capped(spec.cap, spec.log2_amplifier, tails.tail(&hist, theta)),
        };
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / m as f64;
    let stderr = if m > 1 {
        let var = ((sum_sq - sum * sum / m as f64) / (m as f64 - 1.0)).max(0.0);
        (var / m as f64).sqrt()
    } else {
        0.0
    };
    (spec.coefficient * mean, spec.coefficient * stderr, m)
}

/// Evaluates a term: exact dynamic programming while the state count stays
/// within `settings.max_exact_states`, Monte Carlo otherwise.
pub fn evaluate_rival_term(
    spec: &RivalTermSpec,
    settings: &EvalSettings,
) -> Result<EvalOutcome, TermError> {
    spec.validate()?;
    if spec.coefficient <= 0.0 {
        return Ok(EvalOutcome::Exact(0.0));
    }
    if settings.max_exact_states > 0 {
        if let Some(v) = exact_eval(spec, settings.max_exact_states) {
            return Ok(EvalOutcome::Exact(v));
        }
    }
    let (value, stderr, samples) = mc_eval(spec, settings);
    Ok(EvalOutcome::MonteCarlo { value, stderr, samples })
}
