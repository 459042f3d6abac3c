//! Cross-checks the production decoders against a from-scratch re-derivation
//! of the decision rule.
//!
//! The production decoders score candidates in a quantized integer log
//! domain; the oracle here recomputes every score and threshold as plain
//! linear-domain products through the public channel API.
//!
//! Two candidates tie in the production decoders exactly when their factor
//! multisets coincide; algebraically equal scores assembled from *different*
//! factors are ordered deterministically by quantization noise instead. The
//! oracle therefore multiplies each factor list in sorted order (identical
//! multisets then give bit-identical products) and the test systems use
//! generic, non-commensurate priors so that distinct factor multisets never
//! produce near-equal values. A separation self-check asserts the latter: any
//! two compared quantities are either bit-equal or at least `1e-7` log-units
//! apart, which both arithmetic routes resolve identically.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rabound::channel::{Channel, SymbolDistribution, User};
use rabound::codes::{Code, CodeEnsemble, CodebookSet};
use rabound::decoder::{
    decode_d1, decode_d1_with_offset, decode_d12, decode_d12_with_offset, DecodeOutcome,
    Decision, SyncContext,
};
use rabound::regions::{
    derive_d1_regions, derive_d12_regions, CodingVector, RegionPartition, SubDecoderRegions,
};
use rabound::rng::Seed;

/// Minimum log-distance between any two compared quantities that are not
/// bit-equal; far above the quantization step of either route.
const SEPARATION: f64 = 1e-7;

fn gp(a: usize, b: usize) -> CodingVector {
    CodingVector { g1: a, g2: b }
}

/// Every output sequence of length `n` over `alphabet` symbols.
fn all_outputs(alphabet: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..alphabet).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Multiplies factors in ascending order, so equal multisets multiply to
/// bit-identical products regardless of how they were collected.
fn product_sorted(mut factors: Vec<f64>) -> f64 {
    factors.sort_by(f64::total_cmp);
    factors.into_iter().product()
}

/// Asserts the separation invariant for a set of values that the decoders
/// compare against each other.
fn assert_separated(values: &[f64], what: &str) {
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            if a == b || a == 0.0 || b == 0.0 {
                continue;
            }
            let gap = (a.ln() - b.ln()).abs();
            assert!(
                gap > SEPARATION,
                "{what}: values {a} and {b} are distinct but only {gap} log-units apart; \
                 pick different test-system parameters"
            );
        }
    }
}

/// Factor list of `P(y | x1, x2)`.
fn factors_pair(ch: &Channel, x1: &[usize], x2: &[usize], y: &[usize]) -> Vec<f64> {
    x1.iter().zip(x2).zip(y).map(|((&a, &b), &yy)| ch.prob(a, b, yy)).collect()
}

/// Factor list of `P(y | x1; d2)` with user 2 averaged per position.
fn factors_u1(ch: &Channel, x1: &[usize], d2: &SymbolDistribution, y: &[usize]) -> Vec<f64> {
    x1.iter()
        .zip(y)
        .map(|(&a, &yy)| d2.support().map(|(b, p)| p * ch.prob(a, b, yy)).sum::<f64>())
        .collect()
}

/// Factor list of `P(y | x2; d1)` with user 1 averaged per position.
fn factors_u2(ch: &Channel, d1: &SymbolDistribution, x2: &[usize], y: &[usize]) -> Vec<f64> {
    x2.iter()
        .zip(y)
        .map(|(&b, &yy)| d1.support().map(|(a, p)| p * ch.prob(a, b, yy)).sum::<f64>())
        .collect()
}

/// Factor list of the fully marginal `P(y; d1, d2)`.
fn factors_marginal(
    ch: &Channel,
    d1: &SymbolDistribution,
    d2: &SymbolDistribution,
    y: &[usize],
) -> Vec<f64> {
    y.iter()
        .map(|&yy| {
            d1.support()
                .flat_map(|(a, p)| d2.support().map(move |(b, q)| p * q * ch.prob(a, b, yy)))
                .sum::<f64>()
        })
        .collect()
}

struct OracleOutcome {
    /// Winning candidate, if any was admitted.
    best: Option<(CodingVector, usize, Option<usize>)>,
    /// Whether another admitted candidate attained the same (bit-equal) score.
    tied: bool,
}

/// The pair decision re-derived from the rule itself, in linear arithmetic.
///
/// A candidate `(w1, w2, g)` is admitted when its weighted likelihood
/// strictly exceeds, for every margin or collision selection `gt`: the
/// unweighted-output threshold `P(gt) * P_gt(y)` always, plus — when the
/// candidate shares a user's code with `gt` — that side's conditional
/// threshold with the shared codeword pinned and the shared rate's penalty.
/// Highest admitted product wins; earlier candidates win ties.
fn oracle_d12(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    books: &CodebookSet,
    y: &[usize],
    shift: f64,
) -> OracleOutcome {
    let ch = ctx.channel;
    let n = y.len();
    let amp = f64::exp(shift);
    let outside: Vec<CodingVector> = regions.outside().copied().collect();
    let mut compared: Vec<f64> = Vec::new();
    let mut best: Option<(f64, CodingVector, usize, usize)> = None;
    let mut tied = false;
    for &g in regions.operation() {
        let r = ctx.rate(User::One, g.g1).unwrap() + ctx.rate(User::Two, g.g2).unwrap();
        let prior = ctx.partition.prior(&g);
        if prior == 0.0 {
            continue;
        }
        let m1 = ctx.ensembles[0].message_count(g.g1, n).unwrap();
        let m2 = ctx.ensembles[1].message_count(g.g2, n).unwrap();
        for w1 in 0..m1 {
            let x1 = books.word(User::One, g.g1, w1);
            for w2 in 0..m2 {
                let x2 = books.word(User::Two, g.g2, w2);
                let mut f = factors_pair(ch, x1, x2, y);
                f.push(prior);
                f.push(f64::exp2(-(n as f64) * r));
                let score = product_sorted(f);
                if score == 0.0 {
                    continue;
                }
                compared.push(score);
                let mut admitted = true;
                for &gt in &outside {
                    let tprior = ctx.partition.prior(&gt);
                    let d1 = ctx.dist(User::One, gt.g1).unwrap();
                    let d2 = ctx.dist(User::Two, gt.g2).unwrap();
                    let mut f = factors_marginal(ch, d1, d2, y);
                    f.push(tprior);
                    f.push(amp);
                    let thr = product_sorted(f);
                    compared.push(thr);
                    if score <= thr {
                        admitted = false;
                        break;
                    }
                    if gt.g1 == g.g1 {
                        let r1 = ctx.rate(User::One, gt.g1).unwrap();
                        let mut f = factors_u1(ch, x1, d2, y);
                        f.push(tprior);
                        f.push(f64::exp2(-(n as f64) * r1));
                        f.push(amp);
                        let thr = product_sorted(f);
                        compared.push(thr);
                        if score <= thr {
                            admitted = false;
                            break;
                        }
                    }
                    if gt.g2 == g.g2 {
                        let r2 = ctx.rate(User::Two, gt.g2).unwrap();
                        let mut f = factors_u2(ch, d1, x2, y);
                        f.push(tprior);
                        f.push(f64::exp2(-(n as f64) * r2));
                        f.push(amp);
                        let thr = product_sorted(f);
                        compared.push(thr);
                        if score <= thr {
                            admitted = false;
                            break;
                        }
                    }
                }
                if !admitted {
                    continue;
                }
                match best {
                    Some((b, _, _, _)) if score < b => {}
                    Some((b, _, _, _)) if score == b => tied = true,
                    _ => {
                        best = Some((score, g, w1, w2));
                        tied = false;
                    }
                }
            }
        }
    }
    assert_separated(&compared, "pair oracle");
    OracleOutcome { best: best.map(|(_, g, w1, w2)| (g, w1, Some(w2))), tied }
}

/// The single-user decision re-derived in linear arithmetic: candidates
/// `(w1, g)` with user 2 averaged under `g`; hybrid thresholds (outside
/// selection's user-1 dist, candidate's user-2 dist) against every outside
/// selection, pinned-codeword thresholds against collision selections sharing
/// user 1's code.
fn oracle_d1(
    ctx: &SyncContext,
    regions: &SubDecoderRegions<CodingVector>,
    books: &CodebookSet,
    y: &[usize],
    shift: f64,
) -> OracleOutcome {
    let ch = ctx.channel;
    let n = y.len();
    let amp = f64::exp(shift);
    let outside: Vec<CodingVector> = regions.outside().copied().collect();
    let mut compared: Vec<f64> = Vec::new();
    let mut best: Option<(f64, CodingVector, usize)> = None;
    let mut tied = false;
    for &g in regions.operation() {
        let r1 = ctx.rate(User::One, g.g1).unwrap();
        let prior = ctx.partition.prior(&g);
        if prior == 0.0 {
            continue;
        }
        let d2_own = ctx.dist(User::Two, g.g2).unwrap();
        let m1 = ctx.ensembles[0].message_count(g.g1, n).unwrap();
        for w1 in 0..m1 {
            let x1 = books.word(User::One, g.g1, w1);
            let mut f = factors_u1(ch, x1, d2_own, y);
            f.push(prior);
            f.push(f64::exp2(-(n as f64) * r1));
            let score = product_sorted(f);
            if score == 0.0 {
                continue;
            }
            compared.push(score);
            let mut admitted = true;
            for &gt in &outside {
                let d1 = ctx.dist(User::One, gt.g1).unwrap();
                let mut f = factors_marginal(ch, d1, d2_own, y);
                f.push(ctx.partition.prior(&gt));
                f.push(amp);
                let thr = product_sorted(f);
                compared.push(thr);
                if score <= thr {
                    admitted = false;
                    break;
                }
            }
            if admitted {
                for &gt in regions.collision() {
                    if gt.g1 != g.g1 {
                        continue;
                    }
                    let rt1 = ctx.rate(User::One, gt.g1).unwrap();
                    let dt2 = ctx.dist(User::Two, gt.g2).unwrap();
                    let mut f = factors_u1(ch, x1, dt2, y);
                    f.push(ctx.partition.prior(&gt));
                    f.push(f64::exp2(-(n as f64) * rt1));
                    f.push(amp);
                    let thr = product_sorted(f);
                    compared.push(thr);
                    if score <= thr {
                        admitted = false;
                        break;
                    }
                }
            }
            if !admitted {
                continue;
            }
            match best {
                Some((b, _, _)) if score < b => {}
                Some((b, _, _)) if score == b => tied = true,
                _ => {
                    best = Some((score, g, w1));
                    tied = false;
                }
            }
        }
    }
    assert_separated(&compared, "single oracle");
    OracleOutcome { best: best.map(|(_, g, w1)| (g, w1, None)), tied }
}

/// Test systems: channel, ensembles, partition, block length. Priors are
/// deliberately non-commensurate (no ratio is a power of two), so products of
/// different factor multisets never coincide.
fn systems() -> Vec<(&'static str, Channel, [CodeEnsemble; 2], RegionPartition<CodingVector>, usize)>
{
    let uniform2 = SymbolDistribution::uniform(2);
    let mk2 = |user: User, r1: f64, r2: f64| {
        CodeEnsemble::new(
            user,
            vec![Code::active(uniform2.clone(), r1), Code::active(uniform2.clone(), r2)],
        )
    };
    let priors = |sel: &[CodingVector]| {
        let weights = [0.37, 0.29, 0.19, 0.15];
        sel.iter().copied().zip(weights).collect::<BTreeMap<_, _>>()
    };
    let sel = [gp(0, 0), gp(1, 1), gp(0, 1), gp(1, 0)];
    let mut out = Vec::new();

    // Noiseless separating channel, diagonal operation region.
    out.push((
        "noiseless",
        Channel::noiseless_pair(),
        [mk2(User::One, 0.5, 1.0), mk2(User::Two, 0.5, 1.0)],
        RegionPartition::new(
            BTreeSet::from([gp(0, 0), gp(1, 1)]),
            BTreeSet::from([gp(0, 1)]),
            BTreeSet::from([gp(1, 0)]),
            priors(&sel),
        )
        .unwrap(),
        2,
    ));

    // Clean XOR channel: heavy structural zeros, many exact ties.
    out.push((
        "xor(0)",
        Channel::binary_xor(0.0),
        [mk2(User::One, 0.5, 1.0), mk2(User::Two, 0.5, 1.0)],
        RegionPartition::new(
            BTreeSet::from([gp(0, 0), gp(1, 1)]),
            BTreeSet::from([gp(0, 1)]),
            BTreeSet::from([gp(1, 0)]),
            priors(&sel),
        )
        .unwrap(),
        2,
    ));

    // Noisy XOR with flip 0.23.
    out.push((
        "xor(0.23)",
        Channel::binary_xor(0.23),
        [mk2(User::One, 0.5, 1.0), mk2(User::Two, 0.5, 1.0)],
        RegionPartition::new(
            BTreeSet::from([gp(0, 0), gp(1, 1)]),
            BTreeSet::from([gp(0, 1)]),
            BTreeSet::from([gp(1, 0)]),
            priors(&sel),
        )
        .unwrap(),
        2,
    ));

    // Erasure-flavoured channel with a three-selection operation region.
    let mut t = vec![vec![vec![0.0; 3]; 2]; 2];
    t[0][0][0] = 1.0;
    t[1][0][1] = 1.0;
    t[0][1] = vec![0.31, 0.21, 0.48];
    t[1][1] = vec![0.21, 0.31, 0.48];
    out.push((
        "erasure",
        Channel::new(t, None, None).unwrap(),
        [mk2(User::One, 0.5, 1.0), mk2(User::Two, 0.5, 1.0)],
        RegionPartition::new(
            BTreeSet::from([gp(0, 0), gp(0, 1), gp(1, 0)]),
            BTreeSet::new(),
            BTreeSet::from([gp(1, 1)]),
            priors(&[gp(0, 0), gp(0, 1), gp(1, 0), gp(1, 1)]),
        )
        .unwrap(),
        2,
    ));
    out
}

fn check_outcome(got: &DecodeOutcome, want: &OracleOutcome, what: &str) {
    match (got.detail.as_ref(), want.best) {
        (Some(d), Some((g, w1, w2))) => {
            assert_eq!(d.best.g, g, "{what}: picked selection differs");
            assert_eq!(d.best.w1, w1, "{what}: picked w1 differs");
            assert_eq!(d.best.w2, w2, "{what}: picked w2 differs");
            assert_eq!(
                got.decision,
                Decision::Decoded { w1, g1: g.g1 },
                "{what}: decision differs"
            );
            assert_eq!(d.tied, want.tied, "{what}: tie flag differs");
        }
        (None, None) => assert_eq!(got.decision, Decision::Collision, "{what}"),
        (got, want) => panic!("{what}: admission differs: got {got:?}, oracle {want:?}"),
    }
}

#[test]
fn pair_decoder_matches_the_linear_domain_oracle_on_every_output() {
    for (name, ch, ens, partition, n) in systems() {
        let ctx = SyncContext { channel: &ch, ensembles: &ens, partition: &partition };
        let books = CodebookSet::generate(&ens, n, Seed(21, 4)).unwrap();
        let all: BTreeSet<CodingVector> = partition.operation().iter().copied().collect();
        let regions = derive_d12_regions(&partition, &all).unwrap();
        for y in all_outputs(ch.y_alphabet(), n) {
            let got = decode_d12(&ctx, &regions, &books, &y).unwrap();
            let want = oracle_d12(&ctx, &regions, &books, &y, 0.0);
            check_outcome(&got, &want, &format!("{name}, y={y:?}"));
        }
    }
}

#[test]
fn single_decoder_matches_the_linear_domain_oracle_on_every_output() {
    for (name, ch, ens, partition, n) in systems() {
        let ctx = SyncContext { channel: &ch, ensembles: &ens, partition: &partition };
        let books = CodebookSet::generate(&ens, n, Seed(22, 4)).unwrap();
        let all: BTreeSet<CodingVector> = partition.operation().iter().copied().collect();
        let regions = derive_d1_regions(&partition, &BTreeSet::new(), &all).unwrap();
        for y in all_outputs(ch.y_alphabet(), n) {
            let got = decode_d1(&ctx, &regions, &books, &y).unwrap();
            let want = oracle_d1(&ctx, &regions, &books, &y, 0.0);
            if let Some(d) = got.detail.as_ref() {
                assert_eq!(d.best.w2, None, "{name}, y={y:?}: w2 must stay open");
            }
            check_outcome(&got, &want, &format!("{name}, y={y:?}"));
        }
    }
}

#[test]
fn offset_decoding_matches_the_oracle_at_nonzero_shifts() {
    // The common threshold shift must act identically in both routes; the
    // separation self-check inside the oracle guarantees no comparison sits
    // near a boundary at these shifts.
    for shift in [-0.45, 0.3] {
        for (name, ch, ens, partition, n) in systems() {
            let ctx = SyncContext { channel: &ch, ensembles: &ens, partition: &partition };
            let books = CodebookSet::generate(&ens, n, Seed(23, 4)).unwrap();
            let all: BTreeSet<CodingVector> = partition.operation().iter().copied().collect();
            let regions = derive_d12_regions(&partition, &all).unwrap();
            let d1_regions = derive_d1_regions(&partition, &BTreeSet::new(), &all).unwrap();
            for y in all_outputs(ch.y_alphabet(), n) {
                let got = decode_d12_with_offset(&ctx, &regions, &books, &y, shift).unwrap();
                let want = oracle_d12(&ctx, &regions, &books, &y, shift);
                check_outcome(&got, &want, &format!("{name}, shift {shift}, y={y:?}"));
                let got = decode_d1_with_offset(&ctx, &d1_regions, &books, &y, shift).unwrap();
                let want = oracle_d1(&ctx, &d1_regions, &books, &y, shift);
                check_outcome(&got, &want, &format!("{name} single, shift {shift}, y={y:?}"));
            }
        }
    }
}

#[test]
fn deeply_negative_offsets_reduce_both_decoders_to_pure_argmax() {
    // With thresholds pushed far below any attainable score, admission always
    // passes and the decoders become unguarded maximum weighted likelihood.
    let shift = -1.0e6;
    for (name, ch, ens, partition, n) in systems() {
        let ctx = SyncContext { channel: &ch, ensembles: &ens, partition: &partition };
        let books = CodebookSet::generate(&ens, n, Seed(24, 4)).unwrap();
        let all: BTreeSet<CodingVector> = partition.operation().iter().copied().collect();
        let regions = derive_d12_regions(&partition, &all).unwrap();
        for y in all_outputs(ch.y_alphabet(), n) {
            let got = decode_d12_with_offset(&ctx, &regions, &books, &y, shift).unwrap();
            // Pure argmax oracle: admission unconditional.
            let want = {
                let mut best: Option<(f64, CodingVector, usize, usize)> = None;
                let mut tied = false;
                for &g in regions.operation() {
                    let prior = ctx.partition.prior(&g);
                    if prior == 0.0 {
                        continue;
                    }
                    let r = ctx.rate(User::One, g.g1).unwrap()
                        + ctx.rate(User::Two, g.g2).unwrap();
                    let m1 = ctx.ensembles[0].message_count(g.g1, n).unwrap();
                    let m2 = ctx.ensembles[1].message_count(g.g2, n).unwrap();
                    for w1 in 0..m1 {
                        for w2 in 0..m2 {
                            let mut f = factors_pair(
                                &ch,
                                books.word(User::One, g.g1, w1),
                                books.word(User::Two, g.g2, w2),
                                &y,
                            );
                            f.push(prior);
                            f.push(f64::exp2(-(n as f64) * r));
                            let score = product_sorted(f);
                            if score == 0.0 {
                                continue;
                            }
                            match best {
                                Some((b, _, _, _)) if score < b => {}
                                Some((b, _, _, _)) if score == b => tied = true,
                                _ => {
                                    best = Some((score, g, w1, w2));
                                    tied = false;
                                }
                            }
                        }
                    }
                }
                OracleOutcome { best: best.map(|(_, g, w1, w2)| (g, w1, Some(w2))), tied }
            };
            check_outcome(&got, &want, &format!("{name}, argmax, y={y:?}"));
        }
    }
}

#[test]
fn raising_the_offset_only_ever_removes_decodes() {
    // Admission regions are nested in the offset: a collision at a low offset
    // stays a collision at every higher offset.
    let offsets = [-2.0, -0.5, 0.0, 0.5, 2.0];
    for (name, ch, ens, partition, n) in systems() {
        let ctx = SyncContext { channel: &ch, ensembles: &ens, partition: &partition };
        let books = CodebookSet::generate(&ens, n, Seed(25, 4)).unwrap();
        let all: BTreeSet<CodingVector> = partition.operation().iter().copied().collect();
        let regions = derive_d12_regions(&partition, &all).unwrap();
        let d1_regions = derive_d1_regions(&partition, &BTreeSet::new(), &all).unwrap();
        for y in all_outputs(ch.y_alphabet(), n) {
            let mut was_collision = false;
            for &off in &offsets {
                let got = decode_d12_with_offset(&ctx, &regions, &books, &y, off).unwrap();
                let is_collision = got.decision == Decision::Collision;
                assert!(
                    !was_collision || is_collision,
                    "{name}, y={y:?}: pair decode reappeared at offset {off}"
                );
                was_collision = is_collision;
            }
            let mut was_collision = false;
            for &off in &offsets {
                let got = decode_d1_with_offset(&ctx, &d1_regions, &books, &y, off).unwrap();
                let is_collision = got.decision == Decision::Collision;
                assert!(
                    !was_collision || is_collision,
                    "{name}, y={y:?}: single decode reappeared at offset {off}"
                );
                was_collision = is_collision;
            }
        }
    }
}
