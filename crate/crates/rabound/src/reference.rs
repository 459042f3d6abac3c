//! Exhaustive reference evaluators for the decoder error bounds.
//!
//! These recompute every bound term by brute force: outer enumeration of all
//! input and output sequences under the true law, inner enumeration of all
//! rival codeword sequences, and direct expectation sums for the threshold
//! terms — no dynamic programming, no convolutions, no closed-form
//! per-position factors. Runtime is exponential in the block length and
//! alphabet sizes, so these are for cross-checking the production evaluators
//! ([`crate::bounds`]) at small sizes, not for measurement.
//!
//! Score comparisons use the same quantized integer log-domain as everywhere
//! else, so agreement with the production path is exact up to floating-point
//! summation order (tested at 1e-9).

use crate::channel::{Channel, SymbolDistribution, SymbolSource, User};
use crate::decoder::{q_const_pair, q_const_single, q_symbol, rate_penalty_log, SyncContext};
use crate::fingerprint::{async_fingerprint, sync_fingerprint};
use crate::frame_async::{AsyncCodingVector, AsyncContext, AsyncError, IndexSet};
use crate::logdomain::{q_add, quantize, QLog, Q_LOG_ZERO};
use crate::regions::{CodingVector, SubDecoderRegions};

use crate::bounds::{BoundReport, BoundTerm, BoundsError, EvalMode, TermFamily};

/// All sequences of length `n` over the support of `dist`, with their
/// probabilities.
fn sequences(dist: &SymbolDistribution, n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..n {
        let mut next = Vec::new();
        for (prefix, p) in &out {
            for (s, ps) in dist.support() {
                let mut seq = prefix.clone();
                seq.push(s);
                next.push((seq, p * ps));
            }
        }
        out = next;
    }
    out
}

/// All output sequences of length `n` (full alphabet; zero-probability
/// outputs are filtered by the callers through the weights).
fn output_sequences(ch: &Channel, n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for prefix in &out {
            for y in 0..ch.y_alphabet() {
                let mut seq = prefix.clone();
                seq.push(y);
                next.push(seq);
            }
        }
        out = next;
    }
    out
}

/// Quantized score of a fully pinned candidate sequence.
fn q_pair_score(ch: &Channel, x1: &[usize], x2: &[usize], y: &[usize], q_const: QLog) -> QLog {
    let mut acc = q_const;
    for p in 0..y.len() {
        acc = q_add(acc, ch.q_log_prob(x1[p], x2[p], y[p]));
    }
    acc
}

/// Quantized score of a user-1 candidate with user 2 averaged out under
/// `dist2`.
fn q_single_score(
    ch: &Channel,
    x1: &[usize],
    dist2: &SymbolDistribution,
    y: &[usize],
    q_const: QLog,
) -> QLog {
    let mut acc = q_const;
    for p in 0..y.len() {
        acc = q_add(
            acc,
            q_symbol(ch, SymbolSource::Pinned(x1[p]), SymbolSource::Mixed(dist2), y[p]),
        );
    }
    acc
}

/// Per-symbol output distribution with user 2 averaged out, by explicit
/// summation over the support.
fn mix2(ch: &Channel, x1: usize, dist2: &SymbolDistribution, y: usize) -> f64 {
    let mut acc = 0.0;
    for (x2, p2) in dist2.support() {
        acc += p2 * ch.prob(x1, x2, y);
    }
    acc
}

/// The capped, amplified inner probability with zero guarded.
fn capped(cap: f64, log2_amp: f64, inner: f64) -> f64 {
    if inner <= 0.0 {
        0.0
    } else {
        (f64::exp2(log2_amp) * inner).min(cap)
    }
}

/// Does a quantized rival total beat (reach) a quantized true total?
fn rival_wins(rival_total: QLog, true_total: QLog) -> bool {
    rival_total != Q_LOG_ZERO && rival_total >= true_total
}

/// Exhaustive recomputation of [`crate::bounds::bound_gep12`].
pub fn reference_bound_gep12(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    block_length: usize,
) -> Result<BoundReport, BoundsError> {
    let n = block_length;
    let ch = ctx.channel;
    let mut terms = Vec::new();
    let operation: Vec<CodingVector> = regions.operation().iter().copied().collect();
    let outside: Vec<CodingVector> = regions.outside().copied().collect();
    let ys = output_sequences(ch, n);

    for &g in &operation {
        let d_g1 = ctx.dist(User::One, g.g1)?;
        let d_g2 = ctx.dist(User::Two, g.g2)?;
        let r_g1 = ctx.rate(User::One, g.g1)?;
        let r_g2 = ctx.rate(User::Two, g.g2)?;
        let prior_g = ctx.partition.prior(&g);
        let qc_g = q_const_pair(ctx, g, n)?;
        let x1s = sequences(d_g1, n);
        let x2s = sequences(d_g2, n);

        let slice1: Vec<CodingVector> =
            operation.iter().copied().filter(|h| h.g1 == g.g1).collect();
        let slice2: Vec<CodingVector> =
            operation.iter().copied().filter(|h| h.g2 == g.g2).collect();

        // Rival terms. For each true (x1, x2, y) enumerate the rival's fresh
        // codeword sequences directly.
        for (family, rivals, cap) in [
            (
                TermFamily::PairRivalSharesUser1,
                &slice1,
                1.0 / slice1.len() as f64,
            ),
            (
                TermFamily::PairRivalSharesUser2,
                &slice2,
                1.0 / slice2.len() as f64,
            ),
            (
                TermFamily::PairRivalFresh,
                &operation,
                1.0 / operation.len() as f64,
            ),
        ] {
            for &gt in rivals {
                let d_t1 = ctx.dist(User::One, gt.g1)?;
                let d_t2 = ctx.dist(User::Two, gt.g2)?;
                let rt1 = ctx.rate(User::One, gt.g1)?;
                let rt2 = ctx.rate(User::Two, gt.g2)?;
                let qc_t = q_const_pair(ctx, gt, n)?;
                let log2_amp = n as f64
                    * match family {
                        TermFamily::PairRivalSharesUser1 => rt2,
                        TermFamily::PairRivalSharesUser2 => rt1,
                        _ => rt1 + rt2,
                    };
                let mut expectation = 0.0;
                for (x1, p1) in &x1s {
                    for (x2, p2) in &x2s {
                        for y in &ys {
                            let mut py = 1.0;
                            for p in 0..n {
                                py *= ch.prob(x1[p], x2[p], y[p]);
                            }
                            if py <= 0.0 {
                                continue;
                            }
                            let true_total = q_pair_score(ch, x1, x2, y, qc_g);
                            let mut inner = 0.0;
                            match family {
                                TermFamily::PairRivalSharesUser1 => {
                                    for (f2, pf) in sequences(d_t2, n) {
                                        let rv = q_pair_score(ch, x1, &f2, y, qc_t);
                                        if rival_wins(rv, true_total) {
                                            inner += pf;
                                        }
                                    }
                                }
                                TermFamily::PairRivalSharesUser2 => {
                                    for (f1, pf) in sequences(d_t1, n) {
                                        let rv = q_pair_score(ch, &f1, x2, y, qc_t);
                                        if rival_wins(rv, true_total) {
                                            inner += pf;
                                        }
                                    }
                                }
                                _ => {
                                    for (f1, pf1) in sequences(d_t1, n) {
                                        for (f2, pf2) in sequences(d_t2, n) {
                                            let rv = q_pair_score(ch, &f1, &f2, y, qc_t);
                                            if rival_wins(rv, true_total) {
                                                inner += pf1 * pf2;
                                            }
                                        }
                                    }
                                }
                            }
                            expectation += p1 * p2 * py * capped(cap, log2_amp, inner);
                        }
                    }
                }
                terms.push(BoundTerm {
                    family: family.clone(),
                    g: g.to_string(),
                    g_tilde: gt.to_string(),
                    weight: 1.0,
                    value: prior_g * expectation,
                    mode: EvalMode::Exact,
                });
            }
        }

        // Threshold terms: direct expectation of the outside selection's
        // output density over the true per-symbol law.
        for &gt in &outside {
            let prior_t = ctx.partition.prior(&gt);
            let d_t1 = ctx.dist(User::One, gt.g1)?;
            let d_t2 = ctx.dist(User::Two, gt.g2)?;
            if gt.g1 == g.g1 {
                let mut factor = 0.0;
                for (x1, p1) in d_g1.support() {
                    for (x2, p2) in d_g2.support() {
                        for y in 0..ch.y_alphabet() {
                            if ch.prob(x1, x2, y) > 0.0 {
                                factor += p1 * p2 * mix2(ch, x1, d_t2, y);
                            }
                        }
                    }
                }
                terms.push(BoundTerm {
                    family: TermFamily::PairThresholdUser1Matched,
                    g: g.to_string(),
                    g_tilde: gt.to_string(),
                    weight: 2.0,
                    value: threshold_value(prior_g, prior_t, n as f64 * r_g2, factor, n),
                    mode: EvalMode::Exact,
                });
            }
            if gt.g2 == g.g2 {
                let mut factor = 0.0;
                for (x1, p1) in d_g1.support() {
                    for (x2, p2) in d_g2.support() {
                        for y in 0..ch.y_alphabet() {
                            if ch.prob(x1, x2, y) > 0.0 {
                                let mut num = 0.0;
                                for (f1, pf1) in d_t1.support() {
                                    num += pf1 * ch.prob(f1, x2, y);
                                }
                                factor += p1 * p2 * num;
                            }
                        }
                    }
                }
                terms.push(BoundTerm {
                    family: TermFamily::PairThresholdUser2Matched,
                    g: g.to_string(),
                    g_tilde: gt.to_string(),
                    weight: 2.0,
                    value: threshold_value(prior_g, prior_t, n as f64 * r_g1, factor, n),
                    mode: EvalMode::Exact,
                });
            }
            {
                let mut factor = 0.0;
                for (x1, p1) in d_g1.support() {
                    for (x2, p2) in d_g2.support() {
                        for y in 0..ch.y_alphabet() {
                            if ch.prob(x1, x2, y) > 0.0 {
                                let mut num = 0.0;
                                for (f1, pf1) in d_t1.support() {
                                    for (f2, pf2) in d_t2.support() {
                                        num += pf1 * pf2 * ch.prob(f1, f2, y);
                                    }
                                }
                                factor += p1 * p2 * num;
                            }
                        }
                    }
                }
                terms.push(BoundTerm {
                    family: TermFamily::PairThresholdUnmatched,
                    g: g.to_string(),
                    g_tilde: gt.to_string(),
                    weight: 2.0,
                    value: threshold_value(prior_g, prior_t, n as f64 * (r_g1 + r_g2), factor, n),
                    mode: EvalMode::Exact,
                });
            }
        }
    }
    Ok(BoundReport::assemble(1, sync_fingerprint(ctx, n), n, terms))
}

/// `min{prior_true, prior_rival * 2^a * factor^n}` with zero guarded.
fn threshold_value(
    prior_true: f64,
    prior_rival: f64,
    log2_amp: f64,
    factor: f64,
    n: usize,
) -> f64 {
    let powered = factor.powi(n as i32);
    if powered <= 0.0 || prior_rival <= 0.0 {
        return 0.0;
    }
    prior_true.min(prior_rival * f64::exp2(log2_amp) * powered)
}

/// Exhaustive recomputation of [`crate::bounds::bound_gep1`].
pub fn reference_bound_gep1(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    block_length: usize,
) -> Result<BoundReport, BoundsError> {
    let n = block_length;
    let ch = ctx.channel;
    let mut terms = Vec::new();
    let operation: Vec<CodingVector> = regions.operation().iter().copied().collect();
    let outside: Vec<CodingVector> = regions.outside().copied().collect();
    let ys = output_sequences(ch, n);

    for &g in &operation {
        let d_g1 = ctx.dist(User::One, g.g1)?;
        let d_g2 = ctx.dist(User::Two, g.g2)?;
        let r_g1 = ctx.rate(User::One, g.g1)?;
        let prior_g = ctx.partition.prior(&g);
        let qc_g = q_const_single(ctx, g, n)?;
        let x1s = sequences(d_g1, n);
        let cap = 1.0 / operation.len() as f64;

        for &gt in &operation {
            let d_t1 = ctx.dist(User::One, gt.g1)?;
            let d_t2 = ctx.dist(User::Two, gt.g2)?;
            let rt1 = ctx.rate(User::One, gt.g1)?;
            let qc_t = q_const_single(ctx, gt, n)?;
            let mut expectation = 0.0;
            for (x1, p1) in &x1s {
                for y in &ys {
                    let mut pym = 1.0;
                    for p in 0..n {
                        pym *= mix2(ch, x1[p], d_g2, y[p]);
                    }
                    if pym <= 0.0 {
                        continue;
                    }
                    let true_total = q_single_score(ch, x1, d_g2, y, qc_g);
                    let mut inner = 0.0;
                    for (f1, pf) in sequences(d_t1, n) {
                        let rv = q_single_score(ch, &f1, d_t2, y, qc_t);
                        if rival_wins(rv, true_total) {
                            inner += pf;
                        }
                    }
                    expectation += p1 * pym * capped(cap, n as f64 * rt1, inner);
                }
            }
            terms.push(BoundTerm {
                family: TermFamily::SingleRivalFresh,
                g: g.to_string(),
                g_tilde: gt.to_string(),
                weight: 1.0,
                value: prior_g * expectation,
                mode: EvalMode::Exact,
            });
        }

        for &gt in &outside {
            let prior_t = ctx.partition.prior(&gt);
            let d_t1 = ctx.dist(User::One, gt.g1)?;
            let mut factor = 0.0;
            for (x1, p1) in d_g1.support() {
                for y in 0..ch.y_alphabet() {
                    if mix2(ch, x1, d_g2, y) > 0.0 {
                        // Hybrid output density: the outside selection's
                        // user-1 distribution with the truth's user-2 one.
                        let mut num = 0.0;
                        for (f1, pf1) in d_t1.support() {
                            num += pf1 * mix2(ch, f1, d_g2, y);
                        }
                        factor += p1 * num;
                    }
                }
            }
            terms.push(BoundTerm {
                family: TermFamily::SingleThresholdUnmatched,
                g: g.to_string(),
                g_tilde: gt.to_string(),
                weight: 2.0,
                value: threshold_value(prior_g, prior_t, n as f64 * r_g1, factor, n),
                mode: EvalMode::Exact,
            });
        }

        for &gt in regions.collision() {
            if gt.g1 != g.g1 {
                continue;
            }
            let prior_t = ctx.partition.prior(&gt);
            let d_t2 = ctx.dist(User::Two, gt.g2)?;
            let mut factor = 0.0;
            for (x1, p1) in d_g1.support() {
                for y in 0..ch.y_alphabet() {
                    if mix2(ch, x1, d_g2, y) > 0.0 {
                        factor += p1 * mix2(ch, x1, d_t2, y);
                    }
                }
            }
            terms.push(BoundTerm {
                family: TermFamily::SingleThresholdUser1Matched,
                g: g.to_string(),
                g_tilde: gt.to_string(),
                weight: 2.0,
                value: threshold_value(prior_g, prior_t, 0.0, factor, n),
                mode: EvalMode::Exact,
            });
        }
    }
    Ok(BoundReport::assemble(2, sync_fingerprint(ctx, n), n, terms))
}

/// One user's per-position input model in the windowed reference sums:
/// pinned at a symbol (idle fill, a target codeword symbol) or averaged
/// under a code's input distribution.
#[derive(Debug, Clone, Copy)]
enum RefSource<'a> {
    Pin(usize),
    Avg(&'a SymbolDistribution),
}

/// Linear per-position conditional, averaged sides expanded by explicit
/// support sums through the raw transition probabilities.
fn ref_factor(ch: &Channel, s1: RefSource, s2: RefSource, y: usize) -> f64 {
    match (s1, s2) {
        (RefSource::Pin(a), RefSource::Pin(b)) => ch.prob(a, b, y),
        (RefSource::Pin(a), RefSource::Avg(d2)) => {
            d2.support().map(|(b, p)| p * ch.prob(a, b, y)).sum()
        }
        (RefSource::Avg(d1), RefSource::Pin(b)) => {
            d1.support().map(|(a, p)| p * ch.prob(a, b, y)).sum()
        }
        (RefSource::Avg(d1), RefSource::Avg(d2)) => d1
            .support()
            .flat_map(|(a, p)| d2.support().map(move |(b, q)| p * q * ch.prob(a, b, y)))
            .sum(),
    }
}

/// The quantized-score twin of [`ref_factor`]'s source model, through the
/// production quantization primitive so tie classes match the decoder's.
fn ref_q_factor(ch: &Channel, s1: RefSource, s2: RefSource, y: usize) -> QLog {
    fn to_source(s: RefSource) -> SymbolSource {
        match s {
            RefSource::Pin(symbol) => SymbolSource::Pinned(symbol),
            RefSource::Avg(dist) => SymbolSource::Mixed(dist),
        }
    }
    q_symbol(ch, to_source(s1), to_source(s2), y)
}

/// Per-position role of one user across the received window.
#[derive(Debug, Clone, Copy)]
enum WindowShape {
    /// Idling at this pinned symbol.
    Idle(usize),
    /// Transmitting symbol `t` of targeted member `di`.
    Target { di: usize, t: usize },
    /// Transmitting an untargeted packet.
    Active { packet: usize },
}

/// Every index tuple below the per-axis counts (odometer order).
fn index_tuples(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &c in counts {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..c).map(move |i| {
                    let mut next = prefix.clone();
                    next.push(i);
                    next
                })
            })
            .collect();
    }
    out
}

/// `min{prior_true, prior_rival * 2^a * product}` with zero guarded; the
/// window product arrives fully multiplied, not powered.
fn capped_min(prior_true: f64, prior_rival: f64, log2_amp: f64, product: f64) -> f64 {
    if product <= 0.0 || prior_rival <= 0.0 {
        return 0.0;
    }
    prior_true.min(prior_rival * f64::exp2(log2_amp) * product)
}

/// Exhaustive recomputation of [`crate::frame_async::bound_gepD`].
///
/// Outer sums enumerate whole codeword tuples for every targeted packet and
/// whole output windows; inner sums enumerate whole rival codeword tuples —
/// an independent route to the same terms the production evaluator builds
/// from per-position factors, valid because every window position touches a
/// distinct symbol of any one codeword.
#[allow(non_snake_case)]
pub fn reference_bound_gepD(
    ctx: &AsyncContext,
    d: &IndexSet,
    regions: &SubDecoderRegions<AsyncCodingVector>,
) -> Result<BoundReport, AsyncError> {
    let ch = ctx.channel;
    let layout = ctx.layout;
    let n = layout.n();
    let total = layout.total_len();
    let targets: Vec<(User, usize)> = d.members().collect();
    let k = targets.len();
    let full_mask: usize = (1usize << k) - 1;
    let ys = output_sequences(ch, total);

    // Window roles per position per user.
    let mut shapes: Vec<[WindowShape; 2]> = Vec::with_capacity(total);
    for position in 0..total {
        let mut row = [WindowShape::Idle(0), WindowShape::Idle(0)];
        for user in [User::One, User::Two] {
            row[user.index()] = match layout.slot(user, position) {
                Some((packet, t)) => match targets.iter().position(|&m| m == (user, packet)) {
                    Some(di) => WindowShape::Target { di, t },
                    None => WindowShape::Active { packet },
                },
                None => WindowShape::Idle(
                    ch.idle_symbol(user).ok_or(AsyncError::MissingIdleSymbol { user })?,
                ),
            };
        }
        shapes.push(row);
    }

    // Per-user per-packet input distributions of one selection.
    let dists_of = |sel: &AsyncCodingVector| -> Result<[Vec<&SymbolDistribution>; 2], AsyncError> {
        let mut out: [Vec<&SymbolDistribution>; 2] = [Vec::new(), Vec::new()];
        for user in [User::One, User::Two] {
            for packet in 0..layout.l() {
                out[user.index()].push(ctx.dist(user, sel.code(user, packet))?);
            }
        }
        Ok(out)
    };

    let operation: Vec<&AsyncCodingVector> = regions.operation().iter().collect();
    let mut terms = Vec::new();

    for &g in &operation {
        let prior_g = ctx.prior(g);
        let g_dists = dists_of(g)?;
        let mut target_seqs: Vec<Vec<(Vec<usize>, f64)>> = Vec::new();
        let mut true_rate = 0.0;
        for &(user, packet) in &targets {
            target_seqs.push(sequences(ctx.dist(user, g.code(user, packet))?, n));
            true_rate += ctx.rate(user, g.code(user, packet))?;
        }
        let qc_g = q_add(quantize(ctx.log_prior(g)), quantize(rate_penalty_log(true_rate, n)));
        let draw_tuples = index_tuples(&target_seqs.iter().map(Vec::len).collect::<Vec<_>>());

        // True per-position source given a draw tuple.
        let true_src = |shape: WindowShape, xs: &[&Vec<usize>], user: usize| match shape {
            WindowShape::Idle(symbol) => RefSource::Pin(symbol),
            WindowShape::Target { di, t } => RefSource::Pin(xs[di][t]),
            WindowShape::Active { packet } => RefSource::Avg(g_dists[user][packet]),
        };

        for mask in 0..=full_mask {
            let in_shared: Vec<bool> = (0..k).map(|di| mask & (1 << di) != 0).collect();
            let shared_set = IndexSet::from_members(
                targets.iter().enumerate().filter(|&(di, _)| in_shared[di]).map(|(_, &m)| m),
            );
            let shared_pairs: Vec<[usize; 2]> =
                shared_set.members().map(|(user, packet)| [user.index(), packet]).collect();

            // Rival terms: proper subsets only, over the agreeing
            // operation-region slice (the truth included).
            if mask != full_mask {
                let slice: Vec<&AsyncCodingVector> = operation
                    .iter()
                    .copied()
                    .filter(|h| h.agrees_with(g, &shared_set))
                    .collect();
                let cap = 1.0 / slice.len() as f64;
                for gt in &slice {
                    let gt_dists = dists_of(gt)?;
                    let mut rival_rate = 0.0;
                    let mut amp_rate = 0.0;
                    let mut fresh_seqs: Vec<Vec<(Vec<usize>, f64)>> = Vec::new();
                    let mut fresh_of: Vec<Option<usize>> = vec![None; k];
                    for (di, &(user, packet)) in targets.iter().enumerate() {
                        let rt = ctx.rate(user, gt.code(user, packet))?;
                        rival_rate += rt;
                        if !in_shared[di] {
                            amp_rate += rt;
                            fresh_of[di] = Some(fresh_seqs.len());
                            fresh_seqs
                                .push(sequences(ctx.dist(user, gt.code(user, packet))?, n));
                        }
                    }
                    let qc_t = q_add(
                        quantize(ctx.log_prior(gt)),
                        quantize(rate_penalty_log(rival_rate, n)),
                    );
                    let fresh_tuples =
                        index_tuples(&fresh_seqs.iter().map(Vec::len).collect::<Vec<_>>());
                    let mut expectation = 0.0;
                    for idx in &draw_tuples {
                        let xs: Vec<&Vec<usize>> =
                            idx.iter().enumerate().map(|(di, &i)| &target_seqs[di][i].0).collect();
                        let wd: f64 =
                            idx.iter().enumerate().map(|(di, &i)| target_seqs[di][i].1).product();
                        for y in &ys {
                            let mut pcond = 1.0;
                            let mut true_total = qc_g;
                            for p in 0..total {
                                let s1 = true_src(shapes[p][0], &xs, 0);
                                let s2 = true_src(shapes[p][1], &xs, 1);
                                pcond *= ref_factor(ch, s1, s2, y[p]);
                                true_total = q_add(true_total, ref_q_factor(ch, s1, s2, y[p]));
                            }
                            if pcond <= 0.0 {
                                continue;
                            }
                            let mut inner = 0.0;
                            for fidx in &fresh_tuples {
                                let pf: f64 = fidx
                                    .iter()
                                    .enumerate()
                                    .map(|(fi, &i)| fresh_seqs[fi][i].1)
                                    .product();
                                let mut rv = qc_t;
                                for p in 0..total {
                                    let src = |shape: WindowShape, user: usize| match shape {
                                        WindowShape::Idle(symbol) => RefSource::Pin(symbol),
                                        WindowShape::Target { di, t } => {
                                            if in_shared[di] {
                                                RefSource::Pin(xs[di][t])
                                            } else {
                                                let fi = fresh_of[di]
                                                    .expect("unshared target has a fresh draw");
                                                RefSource::Pin(fresh_seqs[fi][fidx[fi]].0[t])
                                            }
                                        }
                                        WindowShape::Active { packet } => {
                                            RefSource::Avg(gt_dists[user][packet])
                                        }
                                    };
                                    rv = q_add(
                                        rv,
                                        ref_q_factor(
                                            ch,
                                            src(shapes[p][0], 0),
                                            src(shapes[p][1], 1),
                                            y[p],
                                        ),
                                    );
                                }
                                if rival_wins(rv, true_total) {
                                    inner += pf;
                                }
                            }
                            expectation += wd * pcond * capped(cap, n as f64 * amp_rate, inner);
                        }
                    }
                    terms.push(BoundTerm {
                        family: TermFamily::AsyncRival { shared: shared_pairs.clone() },
                        g: g.to_string(),
                        g_tilde: gt.to_string(),
                        weight: 1.0,
                        value: prior_g * expectation,
                        mode: EvalMode::Exact,
                    });
                }
            }

            // Threshold terms: proper subsets against margin and collision
            // selections, the full target set against collision only.
            let rivals: Vec<&AsyncCodingVector> = if mask == full_mask {
                regions.collision().iter().collect()
            } else {
                regions.outside().collect()
            };
            let mut unshared_true_rate = 0.0;
            for (di, &(user, packet)) in targets.iter().enumerate() {
                if !in_shared[di] {
                    unshared_true_rate += ctx.rate(user, g.code(user, packet))?;
                }
            }
            for gt in rivals {
                if !gt.agrees_with(g, &shared_set) {
                    continue;
                }
                let gt_dists = dists_of(gt)?;
                let mut factor = 0.0;
                for idx in &draw_tuples {
                    let xs: Vec<&Vec<usize>> =
                        idx.iter().enumerate().map(|(di, &i)| &target_seqs[di][i].0).collect();
                    let wd: f64 =
                        idx.iter().enumerate().map(|(di, &i)| target_seqs[di][i].1).product();
                    for y in &ys {
                        let mut pcond = 1.0;
                        for p in 0..total {
                            pcond *= ref_factor(
                                ch,
                                true_src(shapes[p][0], &xs, 0),
                                true_src(shapes[p][1], &xs, 1),
                                y[p],
                            );
                        }
                        if pcond <= 0.0 {
                            continue;
                        }
                        // The outside selection's output density with the
                        // shared targets pinned at the truth's codewords.
                        let mut num = 1.0;
                        for p in 0..total {
                            let src = |shape: WindowShape, user: usize| match shape {
                                WindowShape::Idle(symbol) => RefSource::Pin(symbol),
                                WindowShape::Target { di, t } => {
                                    if in_shared[di] {
                                        RefSource::Pin(xs[di][t])
                                    } else {
                                        let (_, packet) = targets[di];
                                        RefSource::Avg(gt_dists[user][packet])
                                    }
                                }
                                WindowShape::Active { packet } => {
                                    RefSource::Avg(gt_dists[user][packet])
                                }
                            };
                            num *= ref_factor(
                                ch,
                                src(shapes[p][0], 0),
                                src(shapes[p][1], 1),
                                y[p],
                            );
                        }
                        factor += wd * num;
                    }
                }
                terms.push(BoundTerm {
                    family: if mask == full_mask {
                        TermFamily::AsyncThresholdFullMatch
                    } else {
                        TermFamily::AsyncThreshold { shared: shared_pairs.clone() }
                    },
                    g: g.to_string(),
                    g_tilde: gt.to_string(),
                    weight: 2.0,
                    value: capped_min(
                        prior_g,
                        ctx.prior(gt),
                        n as f64 * unshared_true_rate,
                        factor,
                    ),
                    mode: EvalMode::Exact,
                });
            }
        }
    }
    Ok(BoundReport::assemble(4, async_fingerprint(ctx), n, terms))
}
