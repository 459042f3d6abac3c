//! Cross-checks for the frame-asynchronous bound and joint packet decoder:
//! exact collapse to the aligned pair machinery at one packet and no offset,
//! term-by-term agreement with the exhaustive windowed oracle at real
//! offsets, Monte Carlo consistency, and a linear-domain re-derivation of
//! the decoding rule.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rabound::bounds::{bound_gep12, BoundReport, EvalConfig, EvalMode};
use rabound::channel::{Channel, SymbolDistribution, User};
use rabound::codes::{Code, CodeEnsemble};
use rabound::decoder::SyncContext;
use rabound::frame_async::{
    bound_gepD, decode_dD_with_offset, AsyncCodebookSet, AsyncCodingVector, AsyncContext,
    AsyncDecision, AsyncDecodeOutcome, AsyncLayout, IndexSet, PacketDecode,
};
use rabound::reference::reference_bound_gepD;
use rabound::regions::{CodingVector, RegionPartition, SubDecoderRegions};
use rabound::rng::Seed;

const TOL: f64 = 1e-9;

/// Minimum log-distance between compared decoder quantities that are not
/// bit-equal; far above the quantization step of either route.
const SEPARATION: f64 = 1e-7;

fn settings() -> EvalConfig {
    EvalConfig {
        max_exact_states: 500_000,
        mc_samples: 1_000,
        seed: Seed(17, 23),
        max_partitions: 1 << 10,
    }
}

fn av(user1: &[usize], user2: &[usize]) -> AsyncCodingVector {
    AsyncCodingVector::new(user1.to_vec(), user2.to_vec()).unwrap()
}

fn regions_of(partition: &RegionPartition<AsyncCodingVector>) -> SubDecoderRegions<AsyncCodingVector> {
    SubDecoderRegions::from_parts(
        partition.operation().clone(),
        partition.margin().clone(),
        partition.collision().clone(),
    )
}

/// Keys a report's terms by (family label, true selection, rival selection)
/// and sums contributions per key.
fn term_map(report: &BoundReport) -> BTreeMap<(String, String, String), f64> {
    let mut map = BTreeMap::new();
    for t in &report.terms {
        *map.entry((t.family.label(), t.g.clone(), t.g_tilde.clone())).or_insert(0.0) +=
            t.contribution();
    }
    map
}

fn assert_reports_agree(production: &BoundReport, reference: &BoundReport, what: &str) {
    let lhs = term_map(production);
    let rhs = term_map(reference);
    assert_eq!(
        lhs.keys().collect::<Vec<_>>(),
        rhs.keys().collect::<Vec<_>>(),
        "{what}: term keys differ"
    );
    for (key, value) in &lhs {
        let other = rhs[key];
        assert!(
            (value - other).abs() < TOL,
            "{what}: term {key:?} differs: production {value} vs reference {other}"
        );
    }
    assert!(
        (production.total - reference.total).abs() < TOL,
        "{what}: totals differ: production {} vs reference {}",
        production.total,
        reference.total
    );
    assert_eq!(production.fingerprint, reference.fingerprint, "{what}: fingerprints differ");
}

/// The aligned mirror: a two-code-per-user XOR system stated once as a pair
/// partition and once as its single-packet windowed twin.
struct Mirror {
    ch: Channel,
    ens: [CodeEnsemble; 2],
    sync_partition: RegionPartition<CodingVector>,
    async_partition: RegionPartition<AsyncCodingVector>,
}

fn mirror(flip: f64) -> Mirror {
    let mk = |user: User| {
        CodeEnsemble::new(
            user,
            vec![
                Code::active(SymbolDistribution::uniform(2), 0.25),
                Code::active(SymbolDistribution::uniform(2), 0.5),
            ],
        )
    };
    let members = [((0, 0), 0.4), ((1, 1), 0.3), ((0, 1), 0.2), ((1, 0), 0.1)];
    let sync_priors: BTreeMap<CodingVector, f64> =
        members.iter().map(|&((a, b), p)| (CodingVector { g1: a, g2: b }, p)).collect();
    let async_priors: BTreeMap<AsyncCodingVector, f64> =
        members.iter().map(|&((a, b), p)| (av(&[a], &[b]), p)).collect();
    let sync_partition = RegionPartition::new(
        BTreeSet::from([CodingVector { g1: 0, g2: 0 }, CodingVector { g1: 1, g2: 1 }]),
        BTreeSet::from([CodingVector { g1: 0, g2: 1 }]),
        BTreeSet::from([CodingVector { g1: 1, g2: 0 }]),
        sync_priors,
    )
    .unwrap();
    let async_partition = RegionPartition::new(
        BTreeSet::from([av(&[0], &[0]), av(&[1], &[1])]),
        BTreeSet::from([av(&[0], &[1])]),
        BTreeSet::from([av(&[1], &[0])]),
        async_priors,
    )
    .unwrap();
    Mirror { ch: Channel::binary_xor(flip), ens: [mk(User::One), mk(User::Two)], sync_partition, async_partition }
}

#[test]
fn windowed_bound_collapses_to_the_pair_bound_when_aligned() {
    let m = mirror(0.05);
    let n = 4;
    let sync_ctx =
        SyncContext { channel: &m.ch, ensembles: &m.ens, partition: &m.sync_partition };
    let layout = AsyncLayout::new(n, 1, 0).unwrap();
    let async_ctx = AsyncContext {
        channel: &m.ch,
        ensembles: &m.ens,
        partition: &m.async_partition,
        layout,
    };
    let sync_regions = SubDecoderRegions::from_parts(
        m.sync_partition.operation().clone(),
        m.sync_partition.margin().clone(),
        m.sync_partition.collision().clone(),
    );
    let async_regions = regions_of(&m.async_partition);
    let d = IndexSet::universe(1);

    let pair = bound_gep12(&sync_ctx, &sync_regions, n, &settings()).unwrap();
    let windowed = bound_gepD(&async_ctx, &d, &async_regions, &settings()).unwrap();

    for term in &windowed.terms {
        assert_eq!(term.mode, EvalMode::Exact, "all windowed terms evaluate exactly here");
    }

    // Family labels translate one-to-one; selection labels translate by
    // rewriting the single-packet row separator.
    let family = |async_label: &str| -> &'static str {
        match async_label {
            "B_iS{11}" => "B_i{1}",
            "B_iS{21}" => "B_i{2}",
            "B_iS{}" => "B_i{}",
            "B_mcS{11}" => "B_mc{1}",
            "B_mcS{21}" => "B_mc{2}",
            "B_mcS{}" => "B_mc{}",
            other => panic!("unexpected windowed family {other}"),
        }
    };
    let selection = |label: &str| label.replace('|', ",");

    let pair_terms = term_map(&pair);
    let mut translated = BTreeMap::new();
    for ((label, g, gt), value) in term_map(&windowed) {
        assert_ne!(label, "B_mcD", "no collision selection can agree on every packet here");
        translated
            .insert((family(&label).to_owned(), selection(&g), selection(&gt)), value);
    }
    assert_eq!(
        pair_terms.keys().collect::<Vec<_>>(),
        translated.keys().collect::<Vec<_>>(),
        "translated term keys differ"
    );
    for (key, value) in &pair_terms {
        let other = translated[key];
        assert!(
            (value - other).abs() < TOL,
            "term {key:?} differs: pair {value} vs windowed {other}"
        );
    }
    assert!(
        (pair.total - windowed.total).abs() < TOL,
        "totals differ: pair {} vs windowed {}",
        pair.total,
        windowed.total
    );
    assert_eq!(pair.theorem, 1);
    assert_eq!(windowed.theorem, 4);
}

/// Single-packet offset system over the XOR channel with skewed priors.
fn single_packet_system(
    flip: f64,
    t2: usize,
) -> (Channel, [CodeEnsemble; 2], RegionPartition<AsyncCodingVector>, AsyncLayout) {
    let mk = |user: User| {
        CodeEnsemble::new(
            user,
            vec![
                Code::active(SymbolDistribution::uniform(2), 0.25),
                Code::active(SymbolDistribution::uniform(2), 0.5),
            ],
        )
    };
    let priors: BTreeMap<AsyncCodingVector, f64> = [
        (av(&[0], &[0]), 0.4),
        (av(&[1], &[1]), 0.3),
        (av(&[0], &[1]), 0.2),
        (av(&[1], &[0]), 0.1),
    ]
    .into_iter()
    .collect();
    let partition = RegionPartition::new(
        BTreeSet::from([av(&[0], &[0]), av(&[1], &[1])]),
        BTreeSet::from([av(&[0], &[1])]),
        BTreeSet::from([av(&[1], &[0])]),
        priors,
    )
    .unwrap();
    (
        Channel::binary_xor(flip),
        [mk(User::One), mk(User::Two)],
        partition,
        AsyncLayout::new(2, 1, t2).unwrap(),
    )
}

/// Two-packet system at block length 1, mixing a full-rate and a rate-zero
/// code, with margin and collision selections that agree with operation
/// selections on some packets but not others.
fn two_packet_system(
    t2: usize,
) -> (Channel, [CodeEnsemble; 2], RegionPartition<AsyncCodingVector>, AsyncLayout) {
    let mk = |user: User| {
        CodeEnsemble::new(
            user,
            vec![
                Code::active(SymbolDistribution::uniform(2), 1.0),
                Code::active(SymbolDistribution::new(vec![0.7, 0.3]).unwrap(), 0.0),
            ],
        )
    };
    let priors: BTreeMap<AsyncCodingVector, f64> = [
        (av(&[0, 0], &[0, 0]), 0.35),
        (av(&[1, 1], &[1, 1]), 0.25),
        (av(&[0, 1], &[1, 0]), 0.2),
        (av(&[1, 0], &[0, 1]), 0.15),
        (av(&[0, 0], &[1, 1]), 0.05),
    ]
    .into_iter()
    .collect();
    let partition = RegionPartition::new(
        BTreeSet::from([av(&[0, 0], &[0, 0]), av(&[1, 1], &[1, 1]), av(&[0, 1], &[1, 0])]),
        BTreeSet::from([av(&[1, 0], &[0, 1])]),
        BTreeSet::from([av(&[0, 0], &[1, 1])]),
        priors,
    )
    .unwrap();
    (
        Channel::binary_xor(0.05),
        [mk(User::One), mk(User::Two)],
        partition,
        AsyncLayout::new(1, 2, t2).unwrap(),
    )
}

#[test]
fn windowed_bound_matches_the_exhaustive_oracle_at_every_offset() {
    for t2 in [0, 1, 2] {
        let (ch, ens, partition, layout) = single_packet_system(0.1, t2);
        let ctx = AsyncContext { channel: &ch, ensembles: &ens, partition: &partition, layout };
        let regions = regions_of(&partition);
        for d in [
            IndexSet::universe(1),
            IndexSet::from_members([(User::One, 0)]),
            IndexSet::empty(),
        ] {
            let prod = bound_gepD(&ctx, &d, &regions, &settings()).unwrap();
            let oracle = reference_bound_gepD(&ctx, &d, &regions).unwrap();
            assert_reports_agree(&prod, &oracle, &format!("single packet, t2={t2}, D={d}"));
        }
    }
}

#[test]
fn windowed_bound_matches_the_exhaustive_oracle_across_packets() {
    for t2 in [0, 1] {
        let (ch, ens, partition, layout) = two_packet_system(t2);
        let ctx = AsyncContext { channel: &ch, ensembles: &ens, partition: &partition, layout };
        let regions = regions_of(&partition);
        for d in [
            IndexSet::from_members([(User::One, 0), (User::Two, 1)]),
            IndexSet::from_members([(User::Two, 0)]),
            IndexSet::universe(2),
        ] {
            let prod = bound_gepD(&ctx, &d, &regions, &settings()).unwrap();
            let oracle = reference_bound_gepD(&ctx, &d, &regions).unwrap();
            assert_reports_agree(&prod, &oracle, &format!("two packets, t2={t2}, D={d}"));
        }
    }
}

#[test]
fn monte_carlo_windowed_terms_agree_with_exact_evaluation() {
    let (ch, ens, partition, layout) = single_packet_system(0.1, 1);
    let ctx = AsyncContext { channel: &ch, ensembles: &ens, partition: &partition, layout };
    let regions = regions_of(&partition);
    let d = IndexSet::universe(1);
    let exact = bound_gepD(&ctx, &d, &regions, &settings()).unwrap();
    let mc_settings = EvalConfig {
        max_exact_states: 0,
        mc_samples: 4_000,
        seed: Seed(91, 17),
        max_partitions: 1 << 10,
    };
    let sampled = bound_gepD(&ctx, &d, &regions, &mc_settings).unwrap();

    let exact_terms = term_map(&exact);
    assert_eq!(
        exact_terms.keys().collect::<Vec<_>>(),
        term_map(&sampled).keys().collect::<Vec<_>>(),
        "term keys differ between modes"
    );
    let mut mc_terms = 0;
    for t in &sampled.terms {
        let want = exact_terms[&(t.family.label(), t.g.clone(), t.g_tilde.clone())];
        match t.mode {
            EvalMode::Exact => {
                assert!(
                    (t.contribution() - want).abs() < TOL,
                    "exact-mode term {} drifted between runs",
                    t.family.label()
                );
            }
            EvalMode::MonteCarlo { stderr, samples } => {
                mc_terms += 1;
                assert_eq!(samples, 4_000);
                assert!(
                    (t.contribution() - want).abs() <= 5.0 * t.weight * stderr + 1e-12,
                    "sampled term {} for {} vs {}: {} is more than 5 sigma from exact {}",
                    t.family.label(),
                    t.g,
                    t.g_tilde,
                    t.contribution(),
                    want
                );
            }
        }
    }
    assert!(mc_terms > 0, "forcing the state cap to zero must produce sampled terms");
}

// ---------------------------------------------------------------------------
// Linear-domain re-derivation of the joint packet decoding rule.
// ---------------------------------------------------------------------------

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

/// One user's per-position input model, linear domain.
#[derive(Clone, Copy)]
enum Lin<'a> {
    Pin(usize),
    Avg(&'a SymbolDistribution),
}

/// Per-position conditional with averaged sides expanded by support sums.
fn lin_factor(ch: &Channel, s1: Lin, s2: Lin, y: usize) -> f64 {
    match (s1, s2) {
        (Lin::Pin(a), Lin::Pin(b)) => ch.prob(a, b, y),
        (Lin::Pin(a), Lin::Avg(d2)) => d2.support().map(|(b, p)| p * ch.prob(a, b, y)).sum(),
        (Lin::Avg(d1), Lin::Pin(b)) => d1.support().map(|(a, p)| p * ch.prob(a, b, y)).sum(),
        (Lin::Avg(d1), Lin::Avg(d2)) => d1
            .support()
            .flat_map(|(a, p)| d2.support().map(move |(b, q)| p * q * ch.prob(a, b, y)))
            .sum(),
    }
}

struct OracleOutcome {
    best: Option<(AsyncCodingVector, Vec<usize>)>,
    tied: bool,
}

/// The joint packet decision re-derived from the rule itself in linear
/// arithmetic: candidates over the operation region and all message tuples
/// for the targets, admission by strict exceedance over every agreement
/// subset's margin/collision thresholds, highest admitted product wins,
/// earlier candidates win ties.
#[allow(non_snake_case)]
fn oracle_dD(
    ctx: &AsyncContext,
    d: &IndexSet,
    regions: &SubDecoderRegions<AsyncCodingVector>,
    books: &AsyncCodebookSet,
    y: &[usize],
    shift: f64,
) -> OracleOutcome {
    let ch = ctx.channel;
    let layout = ctx.layout;
    let n = layout.n();
    let total = layout.total_len();
    let amp = f64::exp(shift);
    let targets: Vec<(User, usize)> = d.members().collect();
    let k = targets.len();
    let full_mask: usize = (1usize << k) - 1;
    let mut compared: Vec<f64> = Vec::new();
    let mut best: Option<(f64, AsyncCodingVector, Vec<usize>)> = None;
    let mut tied = false;

    for g in regions.operation() {
        let prior = ctx.prior(g);
        if prior == 0.0 {
            continue;
        }
        let mut rate_d = 0.0;
        let mut counts = Vec::with_capacity(k);
        for &(user, packet) in &targets {
            rate_d += ctx.rate(user, g.code(user, packet)).unwrap();
            counts.push(
                ctx.ensembles[user.index()].message_count(g.code(user, packet), n).unwrap(),
            );
        }
        let mut tuples = vec![Vec::new()];
        for &c in &counts {
            tuples = tuples
                .into_iter()
                .flat_map(|p: Vec<usize>| {
                    (0..c).map(move |w| {
                        let mut q = p.clone();
                        q.push(w);
                        q
                    })
                })
                .collect();
        }
        for w in tuples {
            let words: Vec<&[usize]> = targets
                .iter()
                .zip(&w)
                .map(|(&(user, packet), &wi)| books.word(user, packet, g.code(user, packet), wi))
                .collect();
            let mut f = Vec::with_capacity(total + 2);
            for p in 0..total {
                let src = |user: User| match layout.slot(user, p) {
                    Some((packet, t)) => {
                        match targets.iter().position(|&m| m == (user, packet)) {
                            Some(di) => Lin::Pin(words[di][t]),
                            None => Lin::Avg(ctx.dist(user, g.code(user, packet)).unwrap()),
                        }
                    }
                    None => Lin::Pin(ch.idle_symbol(user).unwrap()),
                };
                f.push(lin_factor(ch, src(User::One), src(User::Two), y[p]));
            }
            f.push(prior);
            f.push(f64::exp2(-(n as f64) * rate_d));
            let score = product_sorted(f);
            if score == 0.0 {
                continue;
            }
            compared.push(score);

            let mut admitted = true;
            'masks: for mask in 0..=full_mask {
                let shared = IndexSet::from_members(
                    targets
                        .iter()
                        .enumerate()
                        .filter(|&(di, _)| mask & (1 << di) != 0)
                        .map(|(_, &m)| m),
                );
                let mut rate_s = 0.0;
                for (user, packet) in shared.members() {
                    rate_s += ctx.rate(user, g.code(user, packet)).unwrap();
                }
                let rivals: Vec<&AsyncCodingVector> = if mask == full_mask {
                    regions.collision().iter().collect()
                } else {
                    regions.outside().collect()
                };
                for gt in rivals {
                    if !gt.agrees_with(g, &shared) {
                        continue;
                    }
                    let mut f = Vec::with_capacity(total + 3);
                    for p in 0..total {
                        let src = |user: User| match layout.slot(user, p) {
                            Some((packet, t)) if shared.contains(user, packet) => {
                                let di = targets
                                    .iter()
                                    .position(|&m| m == (user, packet))
                                    .unwrap();
                                Lin::Pin(words[di][t])
                            }
                            Some((packet, _)) => {
                                Lin::Avg(ctx.dist(user, gt.code(user, packet)).unwrap())
                            }
                            None => Lin::Pin(ch.idle_symbol(user).unwrap()),
                        };
                        f.push(lin_factor(ch, src(User::One), src(User::Two), y[p]));
                    }
                    f.push(ctx.prior(gt));
                    f.push(f64::exp2(-(n as f64) * rate_s));
                    f.push(amp);
                    let thr = product_sorted(f);
                    compared.push(thr);
                    if score <= thr {
                        admitted = false;
                        break 'masks;
                    }
                }
            }
            if !admitted {
                continue;
            }
            match &best {
                Some((b, _, _)) if score < *b => {}
                Some((b, _, _)) if score == *b => tied = true,
                _ => {
                    best = Some((score, g.clone(), w));
                    tied = false;
                }
            }
        }
    }
    assert_separated(&compared, "joint packet oracle");
    OracleOutcome { best: best.map(|(_, g, w)| (g, w)), tied }
}

fn check_outcome(
    got: &AsyncDecodeOutcome,
    want: &OracleOutcome,
    d: &IndexSet,
    what: &str,
) {
    match (got.detail.as_ref(), &want.best) {
        (Some(det), Some((g, words))) => {
            assert_eq!(&det.best.g, g, "{what}: picked selection differs");
            let packets: Vec<PacketDecode> = d
                .members()
                .zip(words)
                .map(|((user, packet), &word)| PacketDecode {
                    user,
                    packet,
                    code: g.code(user, packet),
                    word,
                })
                .collect();
            assert_eq!(det.best.packets, packets, "{what}: picked packets differ");
            assert_eq!(
                got.decision,
                AsyncDecision::Decoded { packets },
                "{what}: decision differs"
            );
            assert_eq!(det.tied, want.tied, "{what}: tie flag differs");
        }
        (None, None) => {
            assert_eq!(got.decision, AsyncDecision::Collision, "{what}");
        }
        (got, want) => panic!("{what}: admission differs: got {got:?}, oracle {want:?}"),
    }
}

/// Two-packet decoding systems with integral message counts. Priors are
/// non-commensurate so distinct factor multisets never produce near-equal
/// products.
fn decode_systems() -> Vec<(
    &'static str,
    Channel,
    [CodeEnsemble; 2],
    RegionPartition<AsyncCodingVector>,
    AsyncLayout,
    IndexSet,
)> {
    let mk = |user: User| {
        CodeEnsemble::new(
            user,
            vec![
                Code::active(SymbolDistribution::uniform(2), 0.5),
                Code::active(SymbolDistribution::uniform(2), 1.0),
            ],
        )
    };
    let partition = || {
        let priors: BTreeMap<AsyncCodingVector, f64> = [
            (av(&[0, 0], &[0, 0]), 0.37),
            (av(&[1, 1], &[1, 1]), 0.29),
            (av(&[0, 1], &[1, 0]), 0.19),
            (av(&[1, 0], &[0, 1]), 0.11),
            (av(&[1, 1], &[0, 0]), 0.04),
        ]
        .into_iter()
        .collect();
        RegionPartition::new(
            BTreeSet::from([av(&[0, 0], &[0, 0]), av(&[1, 1], &[1, 1]), av(&[0, 1], &[1, 0])]),
            BTreeSet::from([av(&[1, 0], &[0, 1])]),
            BTreeSet::from([av(&[1, 1], &[0, 0])]),
            priors,
        )
        .unwrap()
    };
    vec![
        (
            "xor(0.23), aligned",
            Channel::binary_xor(0.23),
            [mk(User::One), mk(User::Two)],
            partition(),
            AsyncLayout::new(2, 2, 0).unwrap(),
            IndexSet::from_members([(User::One, 0), (User::Two, 1)]),
        ),
        (
            "xor(0.23), offset 1",
            Channel::binary_xor(0.23),
            [mk(User::One), mk(User::Two)],
            partition(),
            AsyncLayout::new(2, 2, 1).unwrap(),
            IndexSet::from_members([(User::One, 0), (User::One, 1)]),
        ),
        (
            "xor(0), disjoint windows",
            Channel::binary_xor(0.0),
            [mk(User::One), mk(User::Two)],
            partition(),
            AsyncLayout::new(2, 2, 2).unwrap(),
            IndexSet::from_members([(User::Two, 0)]),
        ),
    ]
}

#[test]
fn joint_packet_decoder_matches_the_linear_domain_oracle_on_every_output() {
    for (name, ch, ens, partition, layout, d) in decode_systems() {
        let ctx = AsyncContext { channel: &ch, ensembles: &ens, partition: &partition, layout };
        let regions = regions_of(&partition);
        let books = AsyncCodebookSet::generate(&ens, &layout, Seed(31, 7)).unwrap();
        for shift in [0.0, -0.45, 0.3] {
            for y in all_outputs(ch.y_alphabet(), layout.total_len()) {
                let got = decode_dD_with_offset(&ctx, &d, &regions, &books, &y, shift).unwrap();
                let want = oracle_dD(&ctx, &d, &regions, &books, &y, shift);
                check_outcome(&got, &want, &d, &format!("{name}, shift {shift}, y={y:?}"));
            }
        }
    }
}

#[test]
fn decoding_commutes_with_the_window_shift_on_a_deterministic_channel() {
    // User 1 holds an idle code, so the decision depends on the output only
    // through user 2's window; growing the offset by one and prefixing the
    // output with the deterministic idle output must decode identically.
    let ch = Channel::binary_xor(0.0);
    let ens = [
        CodeEnsemble::new(User::One, vec![Code::idle(0, 2)]),
        CodeEnsemble::new(
            User::Two,
            vec![
                Code::active(SymbolDistribution::uniform(2), 0.5),
                Code::active(SymbolDistribution::uniform(2), 1.0),
            ],
        ),
    ];
    let priors: BTreeMap<AsyncCodingVector, f64> =
        [(av(&[0], &[0]), 0.6), (av(&[0], &[1]), 0.4)].into_iter().collect();
    let partition = RegionPartition::new(
        BTreeSet::from([av(&[0], &[0])]),
        BTreeSet::new(),
        BTreeSet::from([av(&[0], &[1])]),
        priors,
    )
    .unwrap();
    let regions = regions_of(&partition);
    let d = IndexSet::from_members([(User::Two, 0)]);
    let seed = Seed(47, 11);

    let near = AsyncLayout::new(2, 1, 1).unwrap();
    let far = AsyncLayout::new(2, 1, 2).unwrap();
    let ctx_near = AsyncContext { channel: &ch, ensembles: &ens, partition: &partition, layout: near };
    let ctx_far = AsyncContext { channel: &ch, ensembles: &ens, partition: &partition, layout: far };
    let books_near = AsyncCodebookSet::generate(&ens, &near, seed).unwrap();
    let books_far = AsyncCodebookSet::generate(&ens, &far, seed).unwrap();

    let mut decodes = 0;
    let mut collisions = 0;
    for y in all_outputs(2, near.total_len()) {
        let mut shifted = vec![0];
        shifted.extend(&y);
        let a = decode_dD_with_offset(&ctx_near, &d, &regions, &books_near, &y, 0.0).unwrap();
        let b = decode_dD_with_offset(&ctx_far, &d, &regions, &books_far, &shifted, 0.0).unwrap();
        assert_eq!(a.decision, b.decision, "verdicts diverge at y={y:?}");
        match (a.detail, b.detail) {
            (Some(da), Some(db)) => {
                decodes += 1;
                assert_eq!(da.tied, db.tied, "tie flags diverge at y={y:?}");
                assert_eq!(
                    da.best.log_weighted_likelihood, db.best.log_weighted_likelihood,
                    "scores diverge at y={y:?}"
                );
            }
            (None, None) => collisions += 1,
            _ => unreachable!("decisions already matched"),
        }
    }
    assert!(decodes > 0, "the shift systems must decode somewhere");
    assert!(collisions > 0, "the shift systems must collide somewhere");
}
