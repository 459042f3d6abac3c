//! Closed-form error bounds for the slot-synchronous decoders.
//!
//! For each sub-decoder, the generalized error performance — the
//! prior-weighted sum of wrong decodes inside the operation region, failures
//! to admit in the margin, and missed collision reports — is bounded by a
//! finite sum of per-selection-pair terms, each of one of two shapes:
//!
//! - **rival terms** (the `B_i` families) — a wrongly chosen candidate inside
//!   the decoding region outscores the truth; these are capped,
//!   rate-amplified win probabilities evaluated by [`crate::termeval`],
//!   exactly where the state space permits;
//! - **threshold terms** (the `B_mc` families) — an outside selection's
//!   admission threshold outscores the truth; these reduce to
//!   `min{prior, prior * 2^rates * E}` with a per-position expectation factor
//!   computed in closed form, and are always exact.
//!
//! Threshold terms enter the totals with weight 2, rival terms with weight 1.
//! [`bound_gep12`] covers the pair decoder, [`bound_gep1`] the single-user
//! decoder, and [`bound_total`] evaluates every exact split of the
//! operation region between the two and takes the worst combined value, with
//! the full per-split table reported. [`id_collision_bound`] bounds the
//! probability that independently drawn identifier-selected codes collide.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, FactorUser, SymbolSource, User};
use crate::decoder::{
    q_const_pair, q_const_single, q_symbol, DecoderError, SyncContext,
};
use crate::fingerprint::sync_fingerprint;
use crate::logdomain::{LogAccumulator, QLog};
use crate::regions::{derive_d12_regions, derive_d1_regions, CodingVector, SubDecoderRegions};
use crate::rng::Seed;
use crate::termeval::{
    evaluate_rival_term, EvalOutcome, EvalSettings, OuterEvent, PositionSpec, RivalTermSpec,
    TermError,
};

/// Errors from bound assembly.
#[derive(Debug, Error)]
pub enum BoundsError {
    /// The operation region is too large to enumerate every split.
    #[error("operation region of {selections} selections needs {required} splits, cap is {cap}")]
    TooManySplits { selections: usize, required: u128, cap: usize },
    /// The identifier pool is empty.
    #[error("identifier pool must be non-empty")]
    EmptyIdentifierPool,
    /// A lookup failed while assembling terms.
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    /// A channel computation failed.
    #[error(transparent)]
    Channel(#[from] ChannelError),
    /// A term specification was malformed (indicates a builder bug).
    #[error(transparent)]
    Term(#[from] TermError),
}

/// Which bound family a term belongs to, named by the error event it covers.
///
/// Serializes as its [`label`](TermFamily::label) string, the name the term
/// carries in every report and table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermFamily {
    /// Pair decoder: rival keeps user 1's code (and codeword), redraws user 2.
    PairRivalSharesUser1,
    /// Pair decoder: rival keeps user 2's code, redraws user 1.
    PairRivalSharesUser2,
    /// Pair decoder: rival redraws both users.
    PairRivalFresh,
    /// Pair decoder: outside selection sharing user 1's code outscores the
    /// truth through its admission threshold.
    PairThresholdUser1Matched,
    /// Pair decoder: outside selection sharing user 2's code.
    PairThresholdUser2Matched,
    /// Pair decoder: outside selection sharing neither code.
    PairThresholdUnmatched,
    /// Single-user decoder: rival redraws user 1 under its own selection.
    SingleRivalFresh,
    /// Single-user decoder: outside selection's unmatched threshold.
    SingleThresholdUnmatched,
    /// Single-user decoder: outside selection keeping user 1's code.
    SingleThresholdUser1Matched,
    /// Joint packet decoder: rival keeps the codes and codewords of the listed
    /// packets (as `[user index, packet index]`, zero-based), redraws the rest.
    AsyncRival {
        /// Packets the rival shares with the truth.
        shared: Vec<[usize; 2]>,
    },
    /// Joint packet decoder: outside vector agreeing on the listed packets
    /// outscores the truth through its admission threshold.
    AsyncThreshold {
        /// Packets the outside vector shares with the truth.
        shared: Vec<[usize; 2]>,
    },
    /// Joint packet decoder: outside vector agreeing on every decoded packet.
    AsyncThresholdFullMatch,
}

impl TermFamily {
    /// The family's display name, e.g. `B_i{1}` for a pair-decoder rival that
    /// keeps user 1's code or `B_mc{}^{D1}` for the single-user decoder's
    /// unmatched threshold family.
    ///
    /// Packet-decoder families list the shared packets as one-based
    /// `<user><packet>` digit pairs, e.g. `B_iS{11,22}`.
    pub fn label(&self) -> String {
        fn shared_tokens(shared: &[[usize; 2]]) -> String {
            shared
                .iter()
                .map(|p| format!("{}{}", p[0] + 1, p[1] + 1))
                .collect::<Vec<_>>()
                .join(",")
        }
        match self {
            TermFamily::PairRivalSharesUser1 => "B_i{1}".to_owned(),
            TermFamily::PairRivalSharesUser2 => "B_i{2}".to_owned(),
            TermFamily::PairRivalFresh => "B_i{}".to_owned(),
            TermFamily::PairThresholdUser1Matched => "B_mc{1}".to_owned(),
            TermFamily::PairThresholdUser2Matched => "B_mc{2}".to_owned(),
            TermFamily::PairThresholdUnmatched => "B_mc{}".to_owned(),
            TermFamily::SingleRivalFresh => "B_i{}^{D1}".to_owned(),
            TermFamily::SingleThresholdUnmatched => "B_mc{}^{D1}".to_owned(),
            TermFamily::SingleThresholdUser1Matched => "B_mc{1}^{D1}".to_owned(),
            TermFamily::AsyncRival { shared } => {
                format!("B_iS{{{}}}", shared_tokens(shared))
            }
            TermFamily::AsyncThreshold { shared } => {
                format!("B_mcS{{{}}}", shared_tokens(shared))
            }
            TermFamily::AsyncThresholdFullMatch => "B_mcD".to_owned(),
        }
    }
}

impl Serialize for TermFamily {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

/// How a term's value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMode {
    /// Exact evaluation.
    Exact,
    /// Monte Carlo estimate with its standard error.
    MonteCarlo {
        /// Outer samples taken.
        samples: usize,
        /// Standard error of the term value.
        stderr: f64,
    },
}

impl EvalMode {
    pub(crate) fn from_outcome(outcome: &EvalOutcome) -> (f64, EvalMode) {
        match *outcome {
            EvalOutcome::Exact(v) => (v, EvalMode::Exact),
            EvalOutcome::MonteCarlo { value, stderr, samples } => {
                (value, EvalMode::MonteCarlo { samples, stderr })
            }
        }
    }
}

/// One summand of a bound, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTerm {
    /// The error event the term covers.
    pub family: TermFamily,
    /// Display label of the true selection.
    pub g: String,
    /// Display label of the rival / outside selection.
    pub g_tilde: String,
    /// Multiplier applied in the total (1 for rival terms, 2 for threshold
    /// terms).
    pub weight: f64,
    /// The term value before weighting.
    pub value: f64,
    /// How the value was obtained.
    pub mode: EvalMode,
}

impl BoundTerm {
    /// The term's contribution to the total.
    pub fn contribution(&self) -> f64 {
        self.weight * self.value
    }
}

/// One row of the split table produced by [`bound_total`]: an exact split of
/// the operation region between the two sub-decoders and the bound values it
/// yields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRow {
    /// Selections handled by the pair decoder, as display labels.
    pub pair_region: Vec<String>,
    /// Selections handled by the single-user decoder, as display labels.
    pub single_region: Vec<String>,
    /// Pair-decoder bound total for this split.
    pub pair_bound: f64,
    /// Single-user-decoder bound total for this split.
    pub single_bound: f64,
    /// Sum of the two, the quantity maximized over splits.
    pub combined: f64,
}

/// A complete evaluated bound: its terms and their weighted total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// Which result the report evaluates: 1 for the pair decoder, 2 for the
    /// single-user decoder, 3 for the worst exact split of the operation
    /// region, 4 for the joint packet decoder.
    pub theorem: u8,
    /// Fingerprint of the system the bound was evaluated for; comparisons
    /// against simulation estimates require it to match.
    pub fingerprint: String,
    /// Block length the bound was evaluated at.
    pub block_length: usize,
    /// Weighted sum of all terms.
    pub total: f64,
    /// Combined standard error of the total from Monte Carlo terms
    /// (root-sum-square of weighted per-term errors; 0 when all terms are
    /// exact).
    pub mc_stderr: f64,
    /// Every term in deterministic enumeration order. For a split-table
    /// report these are the worst split's pair terms followed by its single
    /// terms.
    pub terms: Vec<BoundTerm>,
    /// The full per-split table (split-table reports only).
    pub partition_table: Option<Vec<SplitRow>>,
    /// Index into `partition_table` of the split attaining `total`.
    pub worst_split: Option<usize>,
}

impl BoundReport {
    pub(crate) fn assemble(
        theorem: u8,
        fingerprint: String,
        block_length: usize,
        terms: Vec<BoundTerm>,
    ) -> BoundReport {
        let mut acc = LogAccumulator::new();
        let mut var = 0.0;
        for t in &terms {
            acc.add_linear(t.contribution());
            if let EvalMode::MonteCarlo { stderr, .. } = t.mode {
                var += (t.weight * stderr).powi(2);
            }
        }
        BoundReport {
            theorem,
            fingerprint,
            block_length,
            total: acc.total(),
            mc_stderr: var.sqrt(),
            terms,
            partition_table: None,
            worst_split: None,
        }
    }

    /// Renders the terms as CSV (`family,g,g_tilde,value,mode,stderr`).
    ///
    /// `mode` is `exact` or `monte_carlo`; `stderr` is empty for exact terms.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,g,g_tilde,value,mode,stderr\n");
        for t in &self.terms {
            let (mode, stderr) = match t.mode {
                EvalMode::Exact => ("exact", String::new()),
                EvalMode::MonteCarlo { stderr, .. } => ("monte_carlo", format!("{:.17e}", stderr)),
            };
            out.push_str(&format!(
                "\"{}\",\"{}\",\"{}\",{:.17e},{},{}\n",
                t.family.label(),
                t.g,
                t.g_tilde,
                t.value,
                mode,
                stderr
            ));
        }
        out
    }
}

/// Evaluation limits and base seed for bound assembly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Dynamic-programming state cap before the per-term Monte Carlo fallback.
    pub max_exact_states: usize,
    /// Outer samples per term in Monte Carlo mode.
    pub mc_samples: usize,
    /// Base seed; each term derives its own stream from it.
    pub seed: Seed,
    /// Cap on the number of operation-region splits [`bound_total`] will
    /// enumerate.
    pub max_partitions: usize,
}

impl EvalConfig {
    pub(crate) fn for_term(&self, ordinal: u64) -> EvalSettings {
        EvalSettings {
            max_exact_states: self.max_exact_states,
            mc_samples: self.mc_samples,
            seed: self.seed.derive(&[ordinal]),
        }
    }
}

/// Which user(s) the rival shares with the truth in a pair-decoder rival term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairShare {
    User1,
    User2,
    Neither,
}

/// Interns context keys and accumulates rival score distributions per context.
struct ContextTable {
    keys: Vec<(usize, usize)>,
    dists: Vec<std::collections::BTreeMap<QLog, f64>>,
}

impl ContextTable {
    fn new() -> ContextTable {
        ContextTable { keys: Vec::new(), dists: Vec::new() }
    }

    fn intern(&mut self, key: (usize, usize)) -> usize {
        if let Some(i) = self.keys.iter().position(|&k| k == key) {
            return i;
        }
        self.keys.push(key);
        self.dists.push(std::collections::BTreeMap::new());
        self.keys.len() - 1
    }

    fn add(&mut self, context: usize, value: QLog, prob: f64) {
        *self.dists[context].entry(value).or_insert(0.0) += prob;
    }

    fn into_dists(self) -> Vec<Vec<(QLog, f64)>> {
        self.dists.into_iter().map(|m| m.into_iter().collect()).collect()
    }
}

/// Builds the term specification for one pair-decoder rival term.
fn pair_rival_spec(
    ctx: &SyncContext,
    g: CodingVector,
    g_tilde: CodingVector,
    share: PairShare,
    cap: f64,
    block_length: usize,
) -> Result<RivalTermSpec, BoundsError> {
    let ch = ctx.channel;
    let d_g1 = ctx.dist(User::One, g.g1)?;
    let d_g2 = ctx.dist(User::Two, g.g2)?;
    let d_t1 = ctx.dist(User::One, g_tilde.g1)?;
    let d_t2 = ctx.dist(User::Two, g_tilde.g2)?;

    let mut contexts = ContextTable::new();
    let mut events = Vec::new();
    for (x1, p1) in d_g1.support() {
        for (x2, p2) in d_g2.support() {
            for y in 0..ch.y_alphabet() {
                let py = ch.prob(x1, x2, y);
                if py <= 0.0 {
                    continue;
                }
                let key = match share {
                    PairShare::User1 => (x1, y),
                    PairShare::User2 => (x2, y),
                    PairShare::Neither => (0, y),
                };
                let context = contexts.intern(key);
                events.push(OuterEvent {
                    weight: p1 * p2 * py,
                    q_true: ch.q_log_prob(x1, x2, y),
                    context,
                });
            }
        }
    }
    // Rival score distribution per context: redrawn users take fresh symbols
    // from the rival's code distributions, shared users reuse the truth's.
    for ci in 0..contexts.keys.len() {
        let (shared_symbol, y) = contexts.keys[ci];
        match share {
            PairShare::User1 => {
                for (x2, p) in d_t2.support() {
                    let v = q_symbol(ch, SymbolSource::Pinned(shared_symbol), SymbolSource::Pinned(x2), y);
                    contexts.add(ci, v, p);
                }
            }
            PairShare::User2 => {
                for (x1, p) in d_t1.support() {
                    let v = q_symbol(ch, SymbolSource::Pinned(x1), SymbolSource::Pinned(shared_symbol), y);
                    contexts.add(ci, v, p);
                }
            }
            PairShare::Neither => {
                for (x1, p1) in d_t1.support() {
                    for (x2, p2) in d_t2.support() {
                        let v = q_symbol(ch, SymbolSource::Pinned(x1), SymbolSource::Pinned(x2), y);
                        contexts.add(ci, v, p1 * p2);
                    }
                }
            }
        }
    }

    let rt1 = ctx.rate(User::One, g_tilde.g1)?;
    let rt2 = ctx.rate(User::Two, g_tilde.g2)?;
    let log2_amplifier = block_length as f64
        * match share {
            PairShare::User1 => rt2,
            PairShare::User2 => rt1,
            PairShare::Neither => rt1 + rt2,
        };
    let position = PositionSpec { events };
    Ok(RivalTermSpec {
        positions: vec![position; block_length],
        context_dists: contexts.into_dists(),
        q_true_const: q_const_pair(ctx, g, block_length)?,
        q_rival_const: q_const_pair(ctx, g_tilde, block_length)?,
        cap,
        log2_amplifier,
        coefficient: ctx.partition.prior(&g),
    })
}

/// Builds the term specification for one single-user-decoder rival term.
fn single_rival_spec(
    ctx: &SyncContext,
    g: CodingVector,
    g_tilde: CodingVector,
    cap: f64,
    block_length: usize,
) -> Result<RivalTermSpec, BoundsError> {
    let ch = ctx.channel;
    let d_g1 = ctx.dist(User::One, g.g1)?;
    let d_g2 = ctx.dist(User::Two, g.g2)?;
    let d_t1 = ctx.dist(User::One, g_tilde.g1)?;
    let d_t2 = ctx.dist(User::Two, g_tilde.g2)?;

    let mut contexts = ContextTable::new();
    let mut events = Vec::new();
    for (x1, p1) in d_g1.support() {
        for y in 0..ch.y_alphabet() {
            // True law and true score factor: user 2 averaged out under the
            // true selection's own distribution.
            let p_mix =
                ch.per_symbol_conditional(SymbolSource::Pinned(x1), SymbolSource::Mixed(d_g2), y);
            if p_mix <= 0.0 {
                continue;
            }
            let context = contexts.intern((0, y));
            events.push(OuterEvent {
                weight: p1 * p_mix,
                q_true: q_symbol(ch, SymbolSource::Pinned(x1), SymbolSource::Mixed(d_g2), y),
                context,
            });
        }
    }
    for ci in 0..contexts.keys.len() {
        let (_, y) = contexts.keys[ci];
        for (x1, p) in d_t1.support() {
            // Rival factor: fresh user-1 symbol, user 2 averaged under the
            // rival's own selection.
            let v = q_symbol(ch, SymbolSource::Pinned(x1), SymbolSource::Mixed(d_t2), y);
            contexts.add(ci, v, p);
        }
    }

    let rt1 = ctx.rate(User::One, g_tilde.g1)?;
    let position = PositionSpec { events };
    Ok(RivalTermSpec {
        positions: vec![position; block_length],
        context_dists: contexts.into_dists(),
        q_true_const: q_const_single(ctx, g, block_length)?,
        q_rival_const: q_const_single(ctx, g_tilde, block_length)?,
        cap,
        log2_amplifier: block_length as f64 * rt1,
        coefficient: ctx.partition.prior(&g),
    })
}

/// `min{prior_true, prior_rival * 2^log2_amp * factor^n}` with the zero cases
/// kept free of `0 * inf`.
fn threshold_term_value(
    prior_true: f64,
    prior_rival: f64,
    log2_amp: f64,
    factor: f64,
    block_length: usize,
) -> f64 {
    let powered = factor.powi(block_length as i32);
    if powered <= 0.0 || prior_rival <= 0.0 {
        return 0.0;
    }
    prior_true.min(prior_rival * f64::exp2(log2_amp) * powered)
}

fn pair_label(g: CodingVector) -> String {
    g.to_string()
}

/// Bounds the pair decoder's grouped error probability over its region triple.
pub fn bound_gep12(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    block_length: usize,
    settings: &EvalConfig,
) -> Result<BoundReport, BoundsError> {
    let n = block_length;
    let mut terms = Vec::new();
    let mut ordinal: u64 = 0;
    let operation: Vec<CodingVector> = regions.operation().iter().copied().collect();
    let outside: Vec<CodingVector> = regions.outside().copied().collect();

    for &g in &operation {
        let d_g1 = ctx.dist(User::One, g.g1)?;
        let d_g2 = ctx.dist(User::Two, g.g2)?;
        let r_g1 = ctx.rate(User::One, g.g1)?;
        let r_g2 = ctx.rate(User::Two, g.g2)?;
        let prior_g = ctx.partition.prior(&g);

        let slice1: Vec<CodingVector> =
            operation.iter().copied().filter(|h| h.g1 == g.g1).collect();
        let slice2: Vec<CodingVector> =
            operation.iter().copied().filter(|h| h.g2 == g.g2).collect();

        // Rival families, in fixed order: shares user 1, shares user 2, fresh.
        for (share, rivals, cap) in [
            (PairShare::User1, &slice1, 1.0 / slice1.len() as f64),
            (PairShare::User2, &slice2, 1.0 / slice2.len() as f64),
            (PairShare::Neither, &operation, 1.0 / operation.len() as f64),
        ] {
            for &gt in rivals {
                let spec = pair_rival_spec(ctx, g, gt, share, cap, n)?;
                let outcome = evaluate_rival_term(&spec, &settings.for_term(ordinal))?;
                ordinal += 1;
                let (value, mode) = EvalMode::from_outcome(&outcome);
                let family = match share {
                    PairShare::User1 => TermFamily::PairRivalSharesUser1,
                    PairShare::User2 => TermFamily::PairRivalSharesUser2,
                    PairShare::Neither => TermFamily::PairRivalFresh,
                };
                terms.push(BoundTerm {
                    family,
                    g: pair_label(g),
                    g_tilde: pair_label(gt),
                    weight: 1.0,
                    value,
                    mode,
                });
            }
        }

        // Threshold families against every margin or collision selection.
        for &gt in &outside {
            let prior_t = ctx.partition.prior(&gt);
            let d_t1 = ctx.dist(User::One, gt.g1)?;
            let d_t2 = ctx.dist(User::Two, gt.g2)?;
            if gt.g1 == g.g1 {
                let factor = ctx.channel.mc_expectation_factor(
                    FactorUser::PinnedSame { draw: d_g1 },
                    FactorUser::PinnedToMixed { draw: d_g2, num: d_t2 },
                )?;
                terms.push(BoundTerm {
                    family: TermFamily::PairThresholdUser1Matched,
                    g: pair_label(g),
                    g_tilde: pair_label(gt),
                    weight: 2.0,
                    value: threshold_term_value(prior_g, prior_t, n as f64 * r_g2, factor, n),
                    mode: EvalMode::Exact,
                });
            }
            if gt.g2 == g.g2 {
                let factor = ctx.channel.mc_expectation_factor(
                    FactorUser::PinnedToMixed { draw: d_g1, num: d_t1 },
                    FactorUser::PinnedSame { draw: d_g2 },
                )?;
                terms.push(BoundTerm {
                    family: TermFamily::PairThresholdUser2Matched,
                    g: pair_label(g),
                    g_tilde: pair_label(gt),
                    weight: 2.0,
                    value: threshold_term_value(prior_g, prior_t, n as f64 * r_g1, factor, n),
                    mode: EvalMode::Exact,
                });
            }
            // The expectation runs over the true joint: both symbols drawn,
            // the denominator conditioned on them, the numerator fully
            // marginalized under the outside selection.
            let factor = ctx.channel.mc_expectation_factor(
                FactorUser::PinnedToMixed { draw: d_g1, num: d_t1 },
                FactorUser::PinnedToMixed { draw: d_g2, num: d_t2 },
            )?;
            terms.push(BoundTerm {
                family: TermFamily::PairThresholdUnmatched,
                g: pair_label(g),
                g_tilde: pair_label(gt),
                weight: 2.0,
                value: threshold_term_value(
                    prior_g,
                    prior_t,
                    n as f64 * (r_g1 + r_g2),
                    factor,
                    n,
                ),
                mode: EvalMode::Exact,
            });
        }
    }
    Ok(BoundReport::assemble(1, sync_fingerprint(ctx, n), n, terms))
}

/// Bounds the single-user decoder's grouped error probability over its region
/// triple.
pub fn bound_gep1(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    block_length: usize,
    settings: &EvalConfig,
) -> Result<BoundReport, BoundsError> {
    let n = block_length;
    let mut terms = Vec::new();
    let mut ordinal: u64 = 0;
    let operation: Vec<CodingVector> = regions.operation().iter().copied().collect();
    let outside: Vec<CodingVector> = regions.outside().copied().collect();

    for &g in &operation {
        let d_g1 = ctx.dist(User::One, g.g1)?;
        let d_g2 = ctx.dist(User::Two, g.g2)?;
        let r_g1 = ctx.rate(User::One, g.g1)?;
        let prior_g = ctx.partition.prior(&g);
        let cap = 1.0 / operation.len() as f64;

        for &gt in &operation {
            let spec = single_rival_spec(ctx, g, gt, cap, n)?;
            let outcome = evaluate_rival_term(&spec, &settings.for_term(ordinal))?;
            ordinal += 1;
            let (value, mode) = EvalMode::from_outcome(&outcome);
            terms.push(BoundTerm {
                family: TermFamily::SingleRivalFresh,
                g: pair_label(g),
                g_tilde: pair_label(gt),
                weight: 1.0,
                value,
                mode,
            });
        }

        for &gt in &outside {
            let prior_t = ctx.partition.prior(&gt);
            let d_t1 = ctx.dist(User::One, gt.g1)?;
            // Unmatched threshold: the rival marginal keeps the truth's
            // user-2 distribution alongside the outside selection's user-1
            // distribution, but carries the outside selection's full prior.
            let factor = ctx.channel.mc_expectation_factor(
                FactorUser::PinnedToMixed { draw: d_g1, num: d_t1 },
                FactorUser::MixedBoth { den: d_g2, num: d_g2 },
            )?;
            terms.push(BoundTerm {
                family: TermFamily::SingleThresholdUnmatched,
                g: pair_label(g),
                g_tilde: pair_label(gt),
                weight: 2.0,
                value: threshold_term_value(prior_g, prior_t, n as f64 * r_g1, factor, n),
                mode: EvalMode::Exact,
            });
        }

        // User-1-matched thresholds apply against collision selections only.
        for &gt in regions.collision() {
            if gt.g1 != g.g1 {
                continue;
            }
            let prior_t = ctx.partition.prior(&gt);
            let d_t2 = ctx.dist(User::Two, gt.g2)?;
            let factor = ctx.channel.mc_expectation_factor(
                FactorUser::PinnedSame { draw: d_g1 },
                FactorUser::MixedBoth { den: d_g2, num: d_t2 },
            )?;
            terms.push(BoundTerm {
                family: TermFamily::SingleThresholdUser1Matched,
                g: pair_label(g),
                g_tilde: pair_label(gt),
                weight: 2.0,
                value: threshold_term_value(prior_g, prior_t, 0.0, factor, n),
                mode: EvalMode::Exact,
            });
        }
    }
    Ok(BoundReport::assemble(2, sync_fingerprint(ctx, n), n, terms))
}

/// Evaluates every exact split of the operation region between the pair and
/// single-user decoders and reports the worst combined bound.
///
/// The returned report carries the full per-split table, the index of the
/// worst split, and the worst split's terms (pair first, then single) so that
/// `total` remains the weighted sum of `terms`.
pub fn bound_total(
    ctx: &SyncContext,
    block_length: usize,
    settings: &EvalConfig,
) -> Result<BoundReport, BoundsError> {
    let ops: Vec<CodingVector> = ctx.partition.operation().iter().copied().collect();
    let k = ops.len();
    let required: u128 = 1u128 << k.min(127);
    if k >= 64 || required > settings.max_partitions as u128 {
        return Err(BoundsError::TooManySplits {
            selections: k,
            required,
            cap: settings.max_partitions,
        });
    }

    let evaluate = |mask: u64| -> Result<(BoundReport, BoundReport), BoundsError> {
        let mut to_pair = std::collections::BTreeSet::new();
        let mut to_single = std::collections::BTreeSet::new();
        for (i, &g) in ops.iter().enumerate() {
            if mask >> i & 1 == 1 {
                to_pair.insert(g);
            } else {
                to_single.insert(g);
            }
        }
        let pair_regions = derive_d12_regions(ctx.partition, &to_pair)
            .expect("subset of the operation region");
        let single_regions = derive_d1_regions(ctx.partition, &to_pair, &to_single)
            .expect("disjoint subsets of the operation region");
        let pair_settings = EvalConfig { seed: settings.seed.derive(&[mask, 0]), ..*settings };
        let single_settings =
            EvalConfig { seed: settings.seed.derive(&[mask, 1]), ..*settings };
        Ok((
            bound_gep12(ctx, &pair_regions, block_length, &pair_settings)?,
            bound_gep1(ctx, &single_regions, block_length, &single_settings)?,
        ))
    };

    let mut rows = Vec::with_capacity(required as usize);
    let mut worst_index = 0usize;
    let mut worst_combined = f64::NEG_INFINITY;
    for mask in 0..(1u64 << k) {
        let (pair_report, single_report) = evaluate(mask)?;
        let combined = pair_report.total + single_report.total;
        rows.push(SplitRow {
            pair_region: ops
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, g)| pair_label(*g))
                .collect(),
            single_region: ops
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 0)
                .map(|(_, g)| pair_label(*g))
                .collect(),
            pair_bound: pair_report.total,
            single_bound: single_report.total,
            combined,
        });
        if combined > worst_combined {
            worst_combined = combined;
            worst_index = mask as usize;
        }
    }
    // Re-evaluate the worst split (same derived seeds, identical values) to
    // attach its terms without holding every report in memory.
    let (pair_at_worst, single_at_worst) = evaluate(worst_index as u64)?;
    let mut terms = pair_at_worst.terms;
    terms.extend(single_at_worst.terms);
    let mut report =
        BoundReport::assemble(3, sync_fingerprint(ctx, block_length), block_length, terms);
    report.partition_table = Some(rows);
    report.worst_split = Some(worst_index);
    Ok(report)
}

/// Bounds the probability that any two of `users` independently, uniformly
/// drawn identifiers from a pool of `pool_size` coincide.
pub fn id_collision_bound(users: usize, pool_size: usize) -> Result<f64, BoundsError> {
    if pool_size == 0 {
        return Err(BoundsError::EmptyIdentifierPool);
    }
    let pairs = users as u128 * users.saturating_sub(1) as u128 / 2;
    Ok((pairs as f64 / pool_size as f64).min(1.0))
}
