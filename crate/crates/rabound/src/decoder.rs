//! Threshold-guarded maximum weighted-likelihood decoders for the
//! slot-synchronous case, and the rule that fuses their outputs.
//!
//! Two sub-decoders share the received slot:
//!
//! - the **pair decoder** ranks full candidates `(w1, w2, g)` over its
//!   operation region by the weighted likelihood
//!   `P(y | x1, x2) * P(g) * 2^(-n (r1 + r2))`;
//! - the **single-user decoder** ranks candidates `(w1, g)` by
//!   `P(y | x1; g's user-2 distribution) * P(g) * 2^(-n r1)`, averaging user 2
//!   out per position under the candidate's own selection.
//!
//! A candidate is admitted only if its score *strictly* exceeds an optimal
//! (prior-weighted output-density) threshold against **every** selection the
//! decoder must not confuse it with; the thresholds come in per-case families
//! depending on which user's code the confusable selection shares. Admission
//! plus argmax yields the decision; an empty admitted set is a collision
//! report. Ties at the maximum are resolved lexicographically and flagged —
//! the error accounting counts a tie involving the true candidate against the
//! decoder.
//!
//! All score comparisons run in the quantized integer log-domain
//! ([`crate::logdomain`]): every per-symbol factor and every scalar constant
//! is quantized separately and summed as integers, so mathematically equal
//! scores (same multiset of factors) compare exactly equal everywhere.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::channel::{Channel, ChannelError, SymbolDistribution, SymbolSource, User};
use crate::codes::{CodeEnsemble, CodebookSet, CodesError};
use crate::logdomain::{dequantize, q_add, quantize, QLog, LOG_ZERO, Q_LOG_ZERO};
use crate::regions::{CodingVector, RegionPartition, SubDecoderRegions};

/// Errors from decoder setup or invocation.
#[derive(Debug, Error)]
pub enum DecoderError {
    /// The received sequence length does not match the codebooks.
    #[error("received sequence has {got} symbols, codebooks have block length {want}")]
    BlockLengthMismatch { got: usize, want: usize },
    /// A region references a code index outside an ensemble.
    #[error("selection {pair} references a code outside the ensembles")]
    UnknownSelection { pair: CodingVector },
    /// An output symbol is outside the channel alphabet.
    #[error(transparent)]
    Channel(#[from] ChannelError),
    /// A code-level error (message counts, indices).
    #[error(transparent)]
    Codes(#[from] CodesError),
}

/// Shared borrow bundle for the slot-synchronous system: channel, the two
/// ensembles, and the base partition that supplies selection priors.
#[derive(Debug, Clone, Copy)]
pub struct SyncContext<'a> {
    /// The two-input channel.
    pub channel: &'a Channel,
    /// Code ensembles, user 1 first.
    pub ensembles: &'a [CodeEnsemble; 2],
    /// Base region partition; only its priors are read here (sub-decoder
    /// region triples are passed per call).
    pub partition: &'a RegionPartition<CodingVector>,
}

impl<'a> SyncContext<'a> {
    /// Input distribution of the selected code for one user.
    pub fn dist(&self, user: User, code: usize) -> Result<&'a SymbolDistribution, DecoderError> {
        Ok(self.ensembles[user.index()].code(code)?.input_dist())
    }

    /// Rate (bits per use) of the selected code for one user.
    pub fn rate(&self, user: User, code: usize) -> Result<f64, DecoderError> {
        Ok(self.ensembles[user.index()].code(code)?.rate())
    }

    /// Natural-log prior of a selection.
    pub fn log_prior(&self, g: CodingVector) -> f64 {
        let p = self.partition.prior(&g);
        if p > 0.0 {
            p.ln()
        } else {
            LOG_ZERO
        }
    }
}

/// Natural-log of the rate penalty `2^(-n * rate_bits)`.
pub fn rate_penalty_log(rate_bits: f64, block_length: usize) -> f64 {
    -(block_length as f64) * rate_bits * std::f64::consts::LN_2
}

/// The decoder's verdict from user 1's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    /// User 1's message and code were decoded.
    Decoded {
        /// User 1's message index.
        w1: usize,
        /// User 1's code index.
        g1: usize,
    },
    /// A collision was reported.
    Collision,
}

/// A scored candidate: the full `(w, g)` estimate behind a decoded verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateScore {
    /// User 1's message index.
    pub w1: usize,
    /// User 2's message index (absent for the single-user decoder, which
    /// never commits to user 2).
    pub w2: Option<usize>,
    /// The selected coding vector.
    pub g: CodingVector,
    /// The natural-log weighted-likelihood score of the candidate.
    pub log_weighted_likelihood: f64,
}

/// Diagnostic detail accompanying a decoded verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodeDetail {
    /// The winning candidate in full.
    pub best: CandidateScore,
    /// Whether the maximum admitted score was attained by more than one
    /// candidate (resolved lexicographically; counts against the decoder when
    /// the true candidate is involved).
    pub tied: bool,
}

/// Outcome of one decoding attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodeOutcome {
    /// The verdict (user 1's view).
    pub decision: Decision,
    /// The winning candidate and tie flag, when the verdict is a decode.
    pub detail: Option<DecodeDetail>,
}

impl DecodeOutcome {
    fn collision() -> Self {
        DecodeOutcome { decision: Decision::Collision, detail: None }
    }

    /// Whether the verdict came from a tied argmax (false for collisions).
    pub fn tied(&self) -> bool {
        self.detail.map_or(false, |d| d.tied)
    }
}

/// Log weighted likelihood of a full pair candidate:
/// `log P(y | x1, x2) + log P(g) - n (r1 + r2) log 2`.
pub fn weighted_likelihood_d12(
    ctx: &SyncContext,
    g: CodingVector,
    x1: &[usize],
    x2: &[usize],
    y: &[usize],
) -> Result<f64, DecoderError> {
    let ll = ctx.channel.sequence_log_likelihood(x1, x2, y)?;
    let rates = ctx.rate(User::One, g.g1)? + ctx.rate(User::Two, g.g2)?;
    Ok(ll + ctx.log_prior(g) + rate_penalty_log(rates, y.len()))
}

/// Log weighted likelihood of a single-user candidate, user 2 averaged out
/// under the candidate's own selection:
/// `log P(y | x1; dist of g.g2) + log P(g) - n r1 log 2`.
pub fn weighted_likelihood_d1(
    ctx: &SyncContext,
    g: CodingVector,
    x1: &[usize],
    y: &[usize],
) -> Result<f64, DecoderError> {
    let d2 = ctx.dist(User::Two, g.g2)?;
    let ll = ctx
        .channel
        .conditional_given_user_log_prob(User::One, x1, d2, y)?;
    Ok(ll + ctx.log_prior(g) + rate_penalty_log(ctx.rate(User::One, g.g1)?, y.len()))
}

/// Optimal threshold against `g_tilde` when the candidate shares neither
/// code with it: the prior-weighted output density
/// `log P(g_tilde) + log P_{g_tilde}(y)` (both users averaged under
/// `g_tilde`'s input distributions).
pub fn threshold_unmatched(
    ctx: &SyncContext,
    g_tilde: CodingVector,
    y: &[usize],
) -> Result<f64, DecoderError> {
    let d1 = ctx.dist(User::One, g_tilde.g1)?;
    let d2 = ctx.dist(User::Two, g_tilde.g2)?;
    Ok(ctx.log_prior(g_tilde) + ctx.channel.marginal_output_log_prob(d1, d2, y)?)
}

/// Optimal threshold against `g_tilde` when the candidate shares user 1's
/// code (and codeword) with it:
/// `log P(g_tilde) - n r1 log 2 + log P(y | x1; g_tilde's user-2 dist)`.
pub fn threshold_user1_matched(
    ctx: &SyncContext,
    g_tilde: CodingVector,
    x1: &[usize],
    y: &[usize],
) -> Result<f64, DecoderError> {
    let d2 = ctx.dist(User::Two, g_tilde.g2)?;
    let cond = ctx
        .channel
        .conditional_given_user_log_prob(User::One, x1, d2, y)?;
    let r1 = ctx.rate(User::One, g_tilde.g1)?;
    Ok(ctx.log_prior(g_tilde) + rate_penalty_log(r1, y.len()) + cond)
}

/// Optimal threshold against `g_tilde` when the candidate shares user 2's
/// code (and codeword) with it; mirror image of [`threshold_user1_matched`].
pub fn threshold_user2_matched(
    ctx: &SyncContext,
    g_tilde: CodingVector,
    x2: &[usize],
    y: &[usize],
) -> Result<f64, DecoderError> {
    let d1 = ctx.dist(User::One, g_tilde.g1)?;
    let cond = ctx
        .channel
        .conditional_given_user_log_prob(User::Two, x2, d1, y)?;
    let r2 = ctx.rate(User::Two, g_tilde.g2)?;
    Ok(ctx.log_prior(g_tilde) + rate_penalty_log(r2, y.len()) + cond)
}

/// Which threshold case applies against a confusable selection, carrying the
/// case-appropriate conditioning sequence.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdCase<'a> {
    /// No shared code: the threshold conditions on nothing.
    Unmatched,
    /// The candidate shares user 1's code and codeword (the sequence).
    User1Matched(&'a [usize]),
    /// The candidate shares user 2's code and codeword (the sequence).
    User2Matched(&'a [usize]),
}

/// Optimal pair-decoder threshold against `g_tilde` for the requested case,
/// in the natural-log domain:
///
/// - unmatched: `log P(g̃) + log P_g̃(y)`;
/// - user-1 matched: `log P(g̃) − n r_g̃1 log 2 + log P(y | x1; g̃'s user-2 dist)`;
/// - user-2 matched: the mirror image.
///
/// The conditioning codeword travels inside [`ThresholdCase`], so a matched
/// case can never be requested without its sequence.
pub fn optimal_thresholds_d12(
    ctx: &SyncContext,
    g_tilde: CodingVector,
    case: ThresholdCase<'_>,
    y: &[usize],
) -> Result<f64, DecoderError> {
    match case {
        ThresholdCase::Unmatched => threshold_unmatched(ctx, g_tilde, y),
        ThresholdCase::User1Matched(x1) => threshold_user1_matched(ctx, g_tilde, x1, y),
        ThresholdCase::User2Matched(x2) => threshold_user2_matched(ctx, g_tilde, x2, y),
    }
}

/// Optimal threshold for the single-user decoder against `g_tilde` when no
/// code is shared: the prior of `g_tilde` weighting the output density of the
/// *hybrid* selection `[g_tilde's user-1 code, candidate's user-2 code]` —
/// the single-user decoder never commits to user 2, so the confusable output
/// law keeps the candidate's own user-2 averaging.
pub fn threshold_unmatched_hybrid(
    ctx: &SyncContext,
    g_tilde: CodingVector,
    candidate_user2_code: usize,
    y: &[usize],
) -> Result<f64, DecoderError> {
    let d1 = ctx.dist(User::One, g_tilde.g1)?;
    let d2 = ctx.dist(User::Two, candidate_user2_code)?;
    Ok(ctx.log_prior(g_tilde) + ctx.channel.marginal_output_log_prob(d1, d2, y)?)
}

/// Quantized per-position sum of a slice of per-symbol quantized factors plus
/// quantized scalar constants; the one summation discipline shared by the
/// decoders, the bound engine, and the oracles.
pub(crate) fn q_from(parts: impl IntoIterator<Item = QLog>) -> QLog {
    let mut acc: QLog = 0;
    for p in parts {
        acc = q_add(acc, p);
    }
    acc
}

fn q_log(x: f64) -> QLog {
    quantize(x)
}

fn check_books(books: &CodebookSet, ensembles: &[CodeEnsemble; 2], n: usize) -> Result<(), DecoderError> {
    for (slot, ensemble) in ensembles.iter().enumerate() {
        let user = if slot == 0 { User::One } else { User::Two };
        for idx in 0..ensemble.len() {
            let b = books.book(user, idx);
            if b.block_length() != n {
                return Err(DecoderError::BlockLengthMismatch {
                    got: n,
                    want: b.block_length(),
                });
            }
        }
    }
    Ok(())
}

/// Quantized candidate constant `q(log P(g)) + q(-n (r1 + r2) log 2)`.
pub(crate) fn q_const_pair(ctx: &SyncContext, g: CodingVector, n: usize) -> Result<QLog, DecoderError> {
    let rates = ctx.rate(User::One, g.g1)? + ctx.rate(User::Two, g.g2)?;
    Ok(q_add(q_log(ctx.log_prior(g)), q_log(rate_penalty_log(rates, n))))
}

/// Quantized candidate constant `q(log P(g)) + q(-n r1 log 2)`.
pub(crate) fn q_const_single(ctx: &SyncContext, g: CodingVector, n: usize) -> Result<QLog, DecoderError> {
    let r1 = ctx.rate(User::One, g.g1)?;
    Ok(q_add(q_log(ctx.log_prior(g)), q_log(rate_penalty_log(r1, n))))
}

/// Quantized per-symbol conditional with each side pinned or mixed.
pub(crate) fn q_symbol(ch: &Channel, s1: SymbolSource, s2: SymbolSource, y: usize) -> QLog {
    let p = ch.per_symbol_conditional(s1, s2, y);
    if p > 0.0 {
        q_log(p.ln())
    } else {
        Q_LOG_ZERO
    }
}

/// Decodes the received slot with the pair decoder over its region triple.
///
/// Candidates `(w1, w2, g)` range over the operation region; each must
/// strictly exceed, against every margin or collision selection `g_tilde`,
/// the threshold of the case determined by which codes it shares with
/// `g_tilde` (none / user 1's / user 2's). Argmax over the admitted set,
/// lexicographic in `(g.g1, g.g2, w1, w2)` on ties; no admitted
/// candidate means a collision report.
pub fn decode_d12(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    books: &CodebookSet,
    y: &[usize],
) -> Result<DecodeOutcome, DecoderError> {
    decode_d12_with_offset(ctx, regions, books, y, 0.0)
}

/// [`decode_d12`] with every admission threshold shifted by
/// `threshold_offset_log` natural-log units. Offset 0 is the optimal-threshold
/// decoder; nonzero offsets exist to demonstrate that shifting the thresholds
/// in either direction cannot improve the error performance.
pub fn decode_d12_with_offset(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    books: &CodebookSet,
    y: &[usize],
    threshold_offset_log: f64,
) -> Result<DecodeOutcome, DecoderError> {
    let q_offset = quantize(threshold_offset_log);
    let n = y.len();
    check_books(books, ctx.ensembles, n)?;
    let outside: Vec<CodingVector> = regions.outside().copied().collect();

    // Case-{} thresholds: one per outside selection, candidate-independent.
    let mut q_thr_none: Vec<(CodingVector, QLog)> = Vec::with_capacity(outside.len());
    for &gt in &outside {
        let d1 = ctx.dist(User::One, gt.g1)?;
        let d2 = ctx.dist(User::Two, gt.g2)?;
        let q = q_from(
            std::iter::once(q_log(ctx.log_prior(gt))).chain(
                y.iter()
                    .map(|&yy| q_symbol(ctx.channel, SymbolSource::Mixed(d1), SymbolSource::Mixed(d2), yy)),
            ),
        );
        q_thr_none.push((gt, q));
    }

    // Matched-case thresholds depend on the shared codeword; cache per
    // (code, message, outside index).
    let mut q_thr_u1: HashMap<(usize, usize, usize), QLog> = HashMap::new();
    let mut q_thr_u2: HashMap<(usize, usize, usize), QLog> = HashMap::new();

    let mut best: Option<(QLog, CodingVector, usize, usize)> = None;
    let mut tied = false;

    for &g in regions.operation() {
        let m1 = ctx.ensembles[0].message_count(g.g1, n)?;
        let m2 = ctx.ensembles[1].message_count(g.g2, n)?;
        let q_const = q_const_pair(ctx, g, n)?;
        if q_const == Q_LOG_ZERO {
            continue; // zero prior: never decodable
        }
        for w1 in 0..m1 {
            let x1 = books.word(User::One, g.g1, w1);
            for w2 in 0..m2 {
                let x2 = books.word(User::Two, g.g2, w2);
                let q_score = q_from(
                    std::iter::once(q_const).chain(
                        x1.iter()
                            .zip(x2)
                            .zip(y)
                            .map(|((&a, &b), &yy)| ctx.channel.q_log_prob(a, b, yy)),
                    ),
                );
                if q_score == Q_LOG_ZERO {
                    continue; // impossible under the candidate: never admitted
                }

                let mut admitted = true;
                for (oi, &(gt, q_thr)) in q_thr_none.iter().enumerate() {
                    if q_score <= q_add(q_thr, q_offset) {
                        admitted = false;
                        break;
                    }
                    if gt.g1 == g.g1 {
                        let key = (g.g1, w1, oi);
                        let q = match q_thr_u1.get(&key) {
                            Some(&q) => q,
                            None => {
                                let d2 = ctx.dist(User::Two, gt.g2)?;
                                let r1 = ctx.rate(User::One, gt.g1)?;
                                let q = q_from(
                                    [
                                        q_log(ctx.log_prior(gt)),
                                        q_log(rate_penalty_log(r1, n)),
                                    ]
                                    .into_iter()
                                    .chain(x1.iter().zip(y).map(|(&a, &yy)| {
                                        q_symbol(
                                            ctx.channel,
                                            SymbolSource::Pinned(a),
                                            SymbolSource::Mixed(d2),
                                            yy,
                                        )
                                    })),
                                );
                                q_thr_u1.insert(key, q);
                                q
                            }
                        };
                        if q_score <= q_add(q, q_offset) {
                            admitted = false;
                            break;
                        }
                    }
                    if gt.g2 == g.g2 {
                        let key = (g.g2, w2, oi);
                        let q = match q_thr_u2.get(&key) {
                            Some(&q) => q,
                            None => {
                                let d1 = ctx.dist(User::One, gt.g1)?;
                                let r2 = ctx.rate(User::Two, gt.g2)?;
                                let q = q_from(
                                    [
                                        q_log(ctx.log_prior(gt)),
                                        q_log(rate_penalty_log(r2, n)),
                                    ]
                                    .into_iter()
                                    .chain(x2.iter().zip(y).map(|(&b, &yy)| {
                                        q_symbol(
                                            ctx.channel,
                                            SymbolSource::Mixed(d1),
                                            SymbolSource::Pinned(b),
                                            yy,
                                        )
                                    })),
                                );
                                q_thr_u2.insert(key, q);
                                q
                            }
                        };
                        if q_score <= q_add(q, q_offset) {
                            admitted = false;
                            break;
                        }
                    }
                }
                if !admitted {
                    continue;
                }

                match best {
                    Some((bq, _, _, _)) if q_score < bq => {}
                    Some((bq, _, _, _)) if q_score == bq => tied = true,
                    _ => {
                        best = Some((q_score, g, w1, w2));
                        tied = false;
                    }
                }
            }
        }
    }

    Ok(match best {
        Some((q, g, w1, w2)) => DecodeOutcome {
            decision: Decision::Decoded { w1, g1: g.g1 },
            detail: Some(DecodeDetail {
                best: CandidateScore {
                    w1,
                    w2: Some(w2),
                    g,
                    log_weighted_likelihood: dequantize(q),
                },
                tied,
            }),
        },
        None => DecodeOutcome::collision(),
    })
}

/// Decodes the received slot with the single-user decoder over its region
/// triple.
///
/// Candidates `(w1, g)` range over the operation region with user 2 averaged
/// out under `g`; two threshold families guard admission: against every
/// margin or collision selection via the hybrid output density
/// ([`threshold_unmatched_hybrid`]), and — only against *collision*
/// selections sharing user 1's code — via the shared-codeword conditional
/// ([`threshold_user1_matched`]). Argmax over the admitted set, lexicographic
/// in `(g.g1, g.g2, w1)` on ties.
pub fn decode_d1(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    books: &CodebookSet,
    y: &[usize],
) -> Result<DecodeOutcome, DecoderError> {
    decode_d1_with_offset(ctx, regions, books, y, 0.0)
}

/// [`decode_d1`] with every admission threshold shifted by
/// `threshold_offset_log` natural-log units (see [`decode_d12_with_offset`]).
pub fn decode_d1_with_offset(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    books: &CodebookSet,
    y: &[usize],
    threshold_offset_log: f64,
) -> Result<DecodeOutcome, DecoderError> {
    let q_offset = quantize(threshold_offset_log);
    let n = y.len();
    check_books(books, ctx.ensembles, n)?;
    let outside: Vec<CodingVector> = regions.outside().copied().collect();
    let collision_only: Vec<CodingVector> = regions.collision().iter().copied().collect();

    // Hybrid case-{} thresholds: per (outside selection, candidate user-2
    // code). Keyed by value pair.
    let mut q_thr_hybrid: HashMap<(usize, usize), QLog> = HashMap::new();
    // Matched-user-1 thresholds: per (candidate code, message, collision index).
    let mut q_thr_u1: HashMap<(usize, usize, usize), QLog> = HashMap::new();

    let mut best: Option<(QLog, CodingVector, usize)> = None;
    let mut tied = false;

    for &g in regions.operation() {
        let m1 = ctx.ensembles[0].message_count(g.g1, n)?;
        let q_const = q_const_single(ctx, g, n)?;
        if q_const == Q_LOG_ZERO {
            continue;
        }
        let d2_own = ctx.dist(User::Two, g.g2)?;
        for w1 in 0..m1 {
            let x1 = books.word(User::One, g.g1, w1);
            let q_score = q_from(
                std::iter::once(q_const).chain(x1.iter().zip(y).map(|(&a, &yy)| {
                    q_symbol(ctx.channel, SymbolSource::Pinned(a), SymbolSource::Mixed(d2_own), yy)
                })),
            );
            if q_score == Q_LOG_ZERO {
                continue;
            }

            let mut admitted = true;
            for &gt in &outside {
                let key = (gt.g1, g.g2);
                let q = match q_thr_hybrid.get(&key) {
                    Some(&q) => q,
                    None => {
                        let d1 = ctx.dist(User::One, gt.g1)?;
                        let q_marginal = q_from(y.iter().map(|&yy| {
                            q_symbol(
                                ctx.channel,
                                SymbolSource::Mixed(d1),
                                SymbolSource::Mixed(d2_own),
                                yy,
                            )
                        }));
                        q_thr_hybrid.insert(key, q_marginal);
                        q_marginal
                    }
                };
                let q_full = q_add(q_log(ctx.log_prior(gt)), q);
                if q_score <= q_add(q_full, q_offset) {
                    admitted = false;
                    break;
                }
            }
            if admitted {
                for (ci, &gt) in collision_only.iter().enumerate() {
                    if gt.g1 != g.g1 {
                        continue;
                    }
                    let key = (g.g1, w1, ci);
                    let q = match q_thr_u1.get(&key) {
                        Some(&q) => q,
                        None => {
                            let d2 = ctx.dist(User::Two, gt.g2)?;
                            let r1 = ctx.rate(User::One, gt.g1)?;
                            let q = q_from(
                                [q_log(ctx.log_prior(gt)), q_log(rate_penalty_log(r1, n))]
                                    .into_iter()
                                    .chain(x1.iter().zip(y).map(|(&a, &yy)| {
                                        q_symbol(
                                            ctx.channel,
                                            SymbolSource::Pinned(a),
                                            SymbolSource::Mixed(d2),
                                            yy,
                                        )
                                    })),
                            );
                            q_thr_u1.insert(key, q);
                            q
                        }
                    };
                    if q_score <= q_add(q, q_offset) {
                        admitted = false;
                        break;
                    }
                }
            }
            if !admitted {
                continue;
            }

            match best {
                Some((bq, _, _)) if q_score < bq => {}
                Some((bq, _, _)) if q_score == bq => tied = true,
                _ => {
                    best = Some((q_score, g, w1));
                    tied = false;
                }
            }
        }
    }

    Ok(match best {
        Some((q, g, w1)) => DecodeOutcome {
            decision: Decision::Decoded { w1, g1: g.g1 },
            detail: Some(DecodeDetail {
                best: CandidateScore {
                    w1,
                    w2: None,
                    g,
                    log_weighted_likelihood: dequantize(q),
                },
                tied,
            }),
        },
        None => DecodeOutcome::collision(),
    })
}

/// Fuses the pair decoder's and the single-user decoder's outcomes into the
/// receiver's verdict on user 1:
///
/// - both decoded: agree on `(message, code)` → that verdict; disagree →
///   collision;
/// - exactly one decoded → its verdict;
/// - both collided → collision.
///
/// A tie flag survives only when the flagged sub-outcome contributes to the
/// verdict.
pub fn synthesize(pair: &DecodeOutcome, single: &DecodeOutcome) -> DecodeOutcome {
    match (pair.decision, single.decision) {
        (Decision::Decoded { w1: wa, g1: ga }, Decision::Decoded { w1: wb, g1: gb }) => {
            if (wa, ga) == (wb, gb) {
                DecodeOutcome {
                    decision: pair.decision,
                    detail: pair.detail.map(|d| DecodeDetail {
                        best: d.best,
                        tied: pair.tied() || single.tied(),
                    }),
                }
            } else {
                DecodeOutcome::collision()
            }
        }
        (Decision::Decoded { .. }, Decision::Collision) => *pair,
        (Decision::Collision, Decision::Decoded { .. }) => *single,
        (Decision::Collision, Decision::Collision) => DecodeOutcome::collision(),
    }
}
