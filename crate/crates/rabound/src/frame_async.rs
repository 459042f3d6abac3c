//! Frame-asynchronous operation: packetized transmission at a known offset,
//! joint packet decoding over an index set, and the matching union bound.
//!
//! Both users send trains of `l` packets, each a block of `n` channel uses;
//! user 2's train starts `t2` positions after user 1's (`0 <= t2 <= n`), so
//! the received window spans `n*l + t2` positions and each user is pinned at
//! the channel's idle symbol wherever the other is still mid-train. A
//! selection assigns one code per packet ([`AsyncCodingVector`]); the joint
//! packet decoder targets the packets named by an [`IndexSet`] `D` and
//! returns one code and message per target, or a collision ([`decode_dD`]).
//!
//! Scores, admission thresholds, and bound factors all multiply across
//! received positions: with the offset known, every position classifies per
//! user as idle, carrying a targeted packet, or carrying a packet averaged
//! out under its code's input distribution. Admission tests one threshold
//! family per subset `S` of the targets — the contending selection keeps the
//! candidate's codewords on `S` and is marginalized elsewhere — and
//! [`bound_gepD`] mirrors those families term by term. With one packet, no
//! offset, and the full index set, every operation here collapses to its
//! slot-synchronous counterpart in [`crate::decoder`] and [`crate::bounds`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{BoundReport, BoundTerm, EvalConfig, EvalMode, TermFamily};
use crate::channel::{
    Channel, ChannelError, FactorUser, SymbolDistribution, SymbolSource, User,
};
use crate::codes::{CodeEnsemble, CodebookSet, CodesError};
use crate::decoder::{q_from, q_symbol, rate_penalty_log};
use crate::logdomain::{dequantize, q_add, quantize, QLog, LOG_ZERO, Q_LOG_ZERO};
use crate::regions::{RegionPartition, SubDecoderRegions};
use crate::rng::{domain, Seed};
use crate::termeval::{
    evaluate_rival_term, OuterEvent, PositionSpec, RivalTermSpec, TermError,
};

/// Hard cap on index-set size in the decoder (`2^|D|` threshold families are
/// enumerated per candidate).
const DECODE_SUBSET_CAP_LOG2: usize = 20;

/// Errors from frame-asynchronous validation, decoding, and bound assembly.
#[derive(Debug, Error)]
pub enum AsyncError {
    /// The per-codeword block length must be positive.
    #[error("per-codeword block length must be positive")]
    ZeroBlockLength,
    /// Each user must send at least one packet.
    #[error("packet count must be positive")]
    ZeroPackets,
    /// The offset may not exceed one codeword.
    #[error("offset {t2} exceeds the per-codeword block length {n}")]
    OffsetExceedsBlock { t2: usize, n: usize },
    /// A coding vector's packet count does not match the layout.
    #[error("coding vector assigns {got} packets per user, layout has {want}")]
    PacketCountMismatch { got: usize, want: usize },
    /// A coding vector's two rows assign different packet counts.
    #[error("coding vector rows assign {user1} and {user2} packets")]
    UnevenRows { user1: usize, user2: usize },
    /// An index-set member names a packet outside the layout.
    #[error("index set names packet {packet} for user {user}, layout has {l} packets")]
    PacketOutOfRange { user: User, packet: usize, l: usize },
    /// The channel declares no idle symbol for a user that must idle.
    #[error("offset layouts need an idle symbol for user {user}, channel declares none")]
    MissingIdleSymbol { user: User },
    /// Supplied codewords do not cover exactly the targeted index set.
    #[error("decoded words cover {got}, index set is {want}")]
    WordCoverage { got: String, want: String },
    /// Supplied messages do not cover exactly the full index universe.
    #[error("messages cover {got}, layout universe is {want}")]
    MessageCoverage { got: String, want: String },
    /// A supplied codeword has the wrong length.
    #[error("codeword for user {user} packet {packet} has {got} symbols, block length is {want}")]
    WordLength { user: User, packet: usize, got: usize, want: usize },
    /// The received sequence length does not match the layout.
    #[error("received sequence has {got} symbols, layout spans {want}")]
    SequenceLengthMismatch { got: usize, want: usize },
    /// A message index is outside its codebook.
    #[error("message {word} for user {user} packet {packet} exceeds codebook size {count}")]
    MessageOutOfRange { user: User, packet: usize, word: usize, count: usize },
    /// The index set spawns more subset families than the configured cap.
    #[error("index set of {packets} members needs {required} subset families, cap is {cap}")]
    TooManySubsets { packets: usize, required: u128, cap: usize },
    /// Realized codebooks were generated at a different block length.
    #[error("codebooks realized at block length {got}, layout uses {want}")]
    BookBlockLength { got: usize, want: usize },
    /// Realized codebooks cover a different packet count.
    #[error("codebooks cover {got} packets, layout has {want}")]
    BookPackets { got: usize, want: usize },
    /// A channel-level error (alphabets, symbol ranges).
    #[error(transparent)]
    Channel(#[from] ChannelError),
    /// A code-level error (message counts, indices).
    #[error(transparent)]
    Codes(#[from] CodesError),
    /// A term-evaluation error.
    #[error(transparent)]
    Term(#[from] TermError),
}

/// The frame-asynchronous timing: per-codeword block length `n`, `l` packets
/// per user, and user 2's start offset `t2` in channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsyncLayout {
    n: usize,
    l: usize,
    t2: usize,
    total_len: usize,
}

impl AsyncLayout {
    /// Validates and builds a layout; the received window spans
    /// `n*l + t2` positions.
    pub fn new(n: usize, l: usize, t2: usize) -> Result<AsyncLayout, AsyncError> {
        if n == 0 {
            return Err(AsyncError::ZeroBlockLength);
        }
        if l == 0 {
            return Err(AsyncError::ZeroPackets);
        }
        if t2 > n {
            return Err(AsyncError::OffsetExceedsBlock { t2, n });
        }
        Ok(AsyncLayout { n, l, t2, total_len: n * l + t2 })
    }

    /// Per-codeword block length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Packets per user.
    pub fn l(&self) -> usize {
        self.l
    }

    /// User 2's start offset in channel uses.
    pub fn t2(&self) -> usize {
        self.t2
    }

    /// Length of the received window, `n*l + t2`.
    pub fn total_len(&self) -> usize {
        self.total_len
    }

    /// The packet and within-packet offset a user transmits at `position`,
    /// or `None` where that user idles. User 1 is active on `[0, n*l)`,
    /// user 2 on `[t2, t2 + n*l)`.
    pub fn slot(&self, user: User, position: usize) -> Option<(usize, usize)> {
        let start = match user {
            User::One => 0,
            User::Two => self.t2,
        };
        if position < start || position >= start + self.n * self.l {
            return None;
        }
        let p = position - start;
        Some((p / self.n, p % self.n))
    }
}

/// A set of `(user, packet)` indices — the targets of one joint packet
/// decoder, or an agreement pattern between two selections. Packets are
/// zero-based internally; the display form is one-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct IndexSet {
    members: BTreeSet<(User, usize)>,
}

impl IndexSet {
    /// The empty index set.
    pub fn empty() -> IndexSet {
        IndexSet { members: BTreeSet::new() }
    }

    /// An index set from explicit members.
    pub fn from_members(members: impl IntoIterator<Item = (User, usize)>) -> IndexSet {
        IndexSet { members: members.into_iter().collect() }
    }

    /// Every `(user, packet)` pair of an `l`-packet layout.
    pub fn universe(l: usize) -> IndexSet {
        let mut members = BTreeSet::new();
        for user in [User::One, User::Two] {
            for packet in 0..l {
                members.insert((user, packet));
            }
        }
        IndexSet { members }
    }

    /// Whether `(user, packet)` is a member.
    pub fn contains(&self, user: User, packet: usize) -> bool {
        self.members.contains(&(user, packet))
    }

    /// Members in sorted order (user 1's packets first).
    pub fn members(&self) -> impl Iterator<Item = (User, usize)> + '_ {
        self.members.iter().copied()
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Whether the set is empty.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Whether every member of `self` is a member of `other`.
    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.members.is_subset(&other.members)
    }

    /// Rejects members naming packets at or beyond `l`.
    pub fn check_within(&self, l: usize) -> Result<(), AsyncError> {
        for &(user, packet) in &self.members {
            if packet >= l {
                return Err(AsyncError::PacketOutOfRange { user, packet, l });
            }
        }
        Ok(())
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (user, packet)) in self.members().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[{},{}]", user.index() + 1, packet + 1)?;
        }
        write!(f, "}}")
    }
}

/// A frame-asynchronous selection: one code index per `(user, packet)` pair,
/// possibly the idle code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AsyncCodingVector {
    codes: [Vec<usize>; 2],
}

impl AsyncCodingVector {
    /// A selection from per-user code rows (packet order). Both rows must be
    /// non-empty and of equal length.
    pub fn new(user1: Vec<usize>, user2: Vec<usize>) -> Result<AsyncCodingVector, AsyncError> {
        if user1.len() != user2.len() {
            return Err(AsyncError::UnevenRows { user1: user1.len(), user2: user2.len() });
        }
        if user1.is_empty() {
            return Err(AsyncError::ZeroPackets);
        }
        Ok(AsyncCodingVector { codes: [user1, user2] })
    }

    /// Packets per user.
    pub fn packets(&self) -> usize {
        self.codes[0].len()
    }

    /// The code index assigned to `(user, packet)`.
    pub fn code(&self, user: User, packet: usize) -> usize {
        self.codes[user.index()][packet]
    }

    /// One user's code row in packet order.
    pub fn codes_for(&self, user: User) -> &[usize] {
        &self.codes[user.index()]
    }

    /// Whether the two selections assign the same codes on every member of
    /// `on`. Both selections must span the member packets.
    pub fn agrees_with(&self, other: &AsyncCodingVector, on: &IndexSet) -> bool {
        on.members().all(|(user, packet)| self.code(user, packet) == other.code(user, packet))
    }
}

impl fmt::Display for AsyncCodingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.codes[0].iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "|")?;
        for (i, c) in self.codes[1].iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for AsyncCodingVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Shared borrow bundle for the frame-asynchronous system: channel, the two
/// ensembles, the partition over async selections, and the timing layout.
#[derive(Debug, Clone, Copy)]
pub struct AsyncContext<'a> {
    /// The two-input channel.
    pub channel: &'a Channel,
    /// Code ensembles, user 1 first; packet codes index into these.
    pub ensembles: &'a [CodeEnsemble; 2],
    /// Base region partition over async selections; supplies priors.
    pub partition: &'a RegionPartition<AsyncCodingVector>,
    /// Packetization and offset.
    pub layout: AsyncLayout,
}

impl<'a> AsyncContext<'a> {
    /// Input distribution of the selected code for one user.
    pub fn dist(&self, user: User, code: usize) -> Result<&'a SymbolDistribution, AsyncError> {
        Ok(self.ensembles[user.index()].code(code)?.input_dist())
    }

    /// Rate (bits per use) of the selected code for one user.
    pub fn rate(&self, user: User, code: usize) -> Result<f64, AsyncError> {
        Ok(self.ensembles[user.index()].code(code)?.rate())
    }

    /// Prior probability of a selection (0 for unpartitioned selections).
    pub fn prior(&self, g: &AsyncCodingVector) -> f64 {
        self.partition.prior(g)
    }

    /// Natural-log prior of a selection.
    pub fn log_prior(&self, g: &AsyncCodingVector) -> f64 {
        let p = self.partition.prior(g);
        if p > 0.0 {
            p.ln()
        } else {
            LOG_ZERO
        }
    }

    /// Checks that every partitioned selection spans the layout's packets
    /// with in-range codes, and that idle symbols exist when the offset
    /// forces idling.
    pub fn validate(&self) -> Result<(), AsyncError> {
        for (g, _) in self.partition.selections() {
            check_vector(self.ensembles, self.layout.l(), g)?;
        }
        if self.layout.t2() > 0 {
            for user in [User::One, User::Two] {
                if self.channel.idle_symbol(user).is_none() {
                    return Err(AsyncError::MissingIdleSymbol { user });
                }
            }
        }
        Ok(())
    }
}

fn check_vector(
    ensembles: &[CodeEnsemble; 2],
    l: usize,
    g: &AsyncCodingVector,
) -> Result<(), AsyncError> {
    if g.packets() != l {
        return Err(AsyncError::PacketCountMismatch { got: g.packets(), want: l });
    }
    for user in [User::One, User::Two] {
        for packet in 0..l {
            ensembles[user.index()].code(g.code(user, packet))?;
        }
    }
    Ok(())
}

fn check_regions(
    ctx: &AsyncContext,
    regions: &SubDecoderRegions<AsyncCodingVector>,
) -> Result<(), AsyncError> {
    for g in regions.operation().iter().chain(regions.outside()) {
        check_vector(ctx.ensembles, ctx.layout.l(), g)?;
    }
    Ok(())
}

fn idle_symbol(channel: &Channel, user: User) -> Result<usize, AsyncError> {
    channel.idle_symbol(user).ok_or(AsyncError::MissingIdleSymbol { user })
}

/// The receiver's realized codebooks for every packet: per-packet codebook
/// sets drawn from one master seed, packet 0 exactly as the slot-synchronous
/// generation and later packets under derived sub-seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncCodebookSet {
    block_length: usize,
    packets: Vec<CodebookSet>,
}

impl AsyncCodebookSet {
    /// Generates every packet's codebooks for both ensembles.
    pub fn generate(
        ensembles: &[CodeEnsemble; 2],
        layout: &AsyncLayout,
        seed: Seed,
    ) -> Result<AsyncCodebookSet, CodesError> {
        let mut packets = Vec::with_capacity(layout.l());
        for j in 0..layout.l() {
            let packet_seed =
                if j == 0 { seed } else { seed.derive(&[domain::PACKET, j as u64]) };
            packets.push(CodebookSet::generate(ensembles, layout.n(), packet_seed)?);
        }
        Ok(AsyncCodebookSet { block_length: layout.n(), packets })
    }

    /// The per-codeword block length the books were realized at.
    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Number of packets covered.
    pub fn packets(&self) -> usize {
        self.packets.len()
    }

    /// The codebook set of one packet.
    pub fn packet(&self, packet: usize) -> &CodebookSet {
        &self.packets[packet]
    }

    /// The codeword for message `w` under `(user, packet, code_index)`.
    pub fn word(&self, user: User, packet: usize, code_index: usize, w: usize) -> &[usize] {
        self.packets[packet].word(user, code_index, w)
    }

    fn check_layout(&self, layout: &AsyncLayout) -> Result<(), AsyncError> {
        if self.block_length != layout.n() {
            return Err(AsyncError::BookBlockLength {
                got: self.block_length,
                want: layout.n(),
            });
        }
        if self.packets.len() != layout.l() {
            return Err(AsyncError::BookPackets { got: self.packets.len(), want: layout.l() });
        }
        Ok(())
    }
}

/// Builds both users' full-length channel input sequences: codewords for
/// every packet per the layout, idle fill where the other user is mid-train.
/// `messages` must assign one message to every `(user, packet)` pair.
pub fn async_input_sequences(
    channel: &Channel,
    layout: &AsyncLayout,
    books: &AsyncCodebookSet,
    coding: &AsyncCodingVector,
    messages: &BTreeMap<(User, usize), usize>,
) -> Result<[Vec<usize>; 2], AsyncError> {
    let l = layout.l();
    if coding.packets() != l {
        return Err(AsyncError::PacketCountMismatch { got: coding.packets(), want: l });
    }
    books.check_layout(layout)?;
    let got = IndexSet::from_members(messages.keys().copied());
    let want = IndexSet::universe(l);
    if got != want {
        return Err(AsyncError::MessageCoverage {
            got: got.to_string(),
            want: want.to_string(),
        });
    }
    for (&(user, packet), &word) in messages {
        let count = books.packet(packet).book(user, coding.code(user, packet)).message_count();
        if word >= count {
            return Err(AsyncError::MessageOutOfRange { user, packet, word, count });
        }
    }

    let mut sequences: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for user in [User::One, User::Two] {
        let mut seq = Vec::with_capacity(layout.total_len());
        for position in 0..layout.total_len() {
            match layout.slot(user, position) {
                Some((packet, t)) => {
                    let code = coding.code(user, packet);
                    let word = messages[&(user, packet)];
                    seq.push(books.word(user, packet, code, word)[t]);
                }
                None => seq.push(idle_symbol(channel, user)?),
            }
        }
        sequences[user.index()] = seq;
    }
    Ok(sequences)
}

/// Per-position input model for one user while scoring a candidate or an
/// admission threshold.
#[derive(Debug, Clone, Copy)]
enum PosSource<'a> {
    /// Pinned at a fixed symbol (idle fill).
    Fixed(usize),
    /// Pinned at symbol `t` of the codeword for target index `di`.
    Word { di: usize, t: usize },
    /// Averaged under a code's input distribution.
    Averaged(&'a SymbolDistribution),
}

fn resolve<'a>(source: PosSource<'a>, words: &[&'a [usize]]) -> SymbolSource<'a> {
    match source {
        PosSource::Fixed(symbol) => SymbolSource::Pinned(symbol),
        PosSource::Word { di, t } => SymbolSource::Pinned(words[di][t]),
        PosSource::Averaged(dist) => SymbolSource::Mixed(dist),
    }
}

/// Natural-log weighted likelihood of a joint-packet candidate: the output
/// likelihood with the targeted packets pinned at `decoded_words`, every
/// other packet averaged under its own code's input distribution, plus the
/// selection's log prior and the rate penalty over the targets,
/// `-n * sum of target rates * ln 2`. Returns `-inf` when the selection has
/// zero prior or the output is impossible under the candidate.
pub fn async_weighted_likelihood(
    ctx: &AsyncContext,
    coding: &AsyncCodingVector,
    d: &IndexSet,
    decoded_words: &BTreeMap<(User, usize), Vec<usize>>,
    y: &[usize],
) -> Result<f64, AsyncError> {
    let layout = ctx.layout;
    let n = layout.n();
    if coding.packets() != layout.l() {
        return Err(AsyncError::PacketCountMismatch { got: coding.packets(), want: layout.l() });
    }
    d.check_within(layout.l())?;
    if y.len() != layout.total_len() {
        return Err(AsyncError::SequenceLengthMismatch {
            got: y.len(),
            want: layout.total_len(),
        });
    }
    for (position, &symbol) in y.iter().enumerate() {
        if symbol >= ctx.channel.y_alphabet() {
            return Err(AsyncError::Channel(ChannelError::SymbolOutOfRange {
                which: "output",
                position,
                symbol,
                alphabet: ctx.channel.y_alphabet(),
            }));
        }
    }
    let got = IndexSet::from_members(decoded_words.keys().copied());
    if got != *d {
        return Err(AsyncError::WordCoverage { got: got.to_string(), want: d.to_string() });
    }
    for (&(user, packet), word) in decoded_words {
        if word.len() != n {
            return Err(AsyncError::WordLength { user, packet, got: word.len(), want: n });
        }
        let alphabet = ctx.channel.input_alphabet(user);
        for (position, &symbol) in word.iter().enumerate() {
            if symbol >= alphabet {
                return Err(AsyncError::Channel(ChannelError::SymbolOutOfRange {
                    which: match user {
                        User::One => "user 1 input",
                        User::Two => "user 2 input",
                    },
                    position,
                    symbol,
                    alphabet,
                }));
            }
        }
    }

    let mut total = ctx.log_prior(coding);
    if total == LOG_ZERO {
        return Ok(LOG_ZERO);
    }
    let mut target_rates = 0.0;
    for (user, packet) in d.members() {
        target_rates += ctx.rate(user, coding.code(user, packet))?;
    }
    total += rate_penalty_log(target_rates, n);

    for (position, &yy) in y.iter().enumerate() {
        let mut sources: [SymbolSource; 2] = [SymbolSource::Pinned(0), SymbolSource::Pinned(0)];
        for user in [User::One, User::Two] {
            sources[user.index()] = match layout.slot(user, position) {
                Some((packet, t)) if d.contains(user, packet) => {
                    SymbolSource::Pinned(decoded_words[&(user, packet)][t])
                }
                Some((packet, _)) => {
                    SymbolSource::Mixed(ctx.dist(user, coding.code(user, packet))?)
                }
                None => SymbolSource::Pinned(idle_symbol(ctx.channel, user)?),
            };
        }
        let p = ctx.channel.per_symbol_conditional(sources[0], sources[1], yy);
        if p <= 0.0 {
            return Ok(LOG_ZERO);
        }
        total += p.ln();
    }
    Ok(total)
}

/// One decoded target: the selected code and message for an index-set member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PacketDecode {
    /// The member's user.
    pub user: User,
    /// The member's packet (zero-based).
    pub packet: usize,
    /// The decoded code index.
    pub code: usize,
    /// The decoded message index.
    pub word: usize,
}

/// Verdict of one joint-packet decoding attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum AsyncDecision {
    /// Every targeted packet was decoded.
    Decoded {
        /// Per-target code and message, in index-set order.
        packets: Vec<PacketDecode>,
    },
    /// A collision was reported.
    Collision,
}

/// A scored candidate: the full `(w_D, g_U)` estimate behind a decoded
/// verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncCandidateScore {
    /// Per-target code and message, in index-set order.
    pub packets: Vec<PacketDecode>,
    /// The selected coding vector.
    pub g: AsyncCodingVector,
    /// The natural-log weighted-likelihood score of the candidate.
    pub log_weighted_likelihood: f64,
}

/// Diagnostic detail accompanying a decoded verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncDecodeDetail {
    /// The winning candidate in full.
    pub best: AsyncCandidateScore,
    /// Whether the maximum admitted score was attained by more than one
    /// candidate (resolved lexicographically).
    pub tied: bool,
}

/// Outcome of one joint-packet decoding attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncDecodeOutcome {
    /// The verdict.
    pub decision: AsyncDecision,
    /// The winning candidate and tie flag, when the verdict is a decode.
    pub detail: Option<AsyncDecodeDetail>,
}

impl AsyncDecodeOutcome {
    fn collision() -> Self {
        AsyncDecodeOutcome { decision: AsyncDecision::Collision, detail: None }
    }

    /// Whether the verdict came from a tied argmax (false for collisions).
    pub fn tied(&self) -> bool {
        self.detail.as_ref().map_or(false, |d| d.tied)
    }

    /// Whether a collision was reported.
    pub fn is_collision(&self) -> bool {
        matches!(self.decision, AsyncDecision::Collision)
    }
}

/// One admission-threshold family of one candidate selection: all thresholds
/// against one outside selection agreeing with the candidate on one target
/// subset.
struct ThresholdFamily<'a> {
    /// Quantized log prior of the outside selection plus the rate penalty
    /// over the shared subset.
    q_base: QLog,
    /// Per-position per-user rival input model (shared targets pin the
    /// candidate's codewords, everything else averages under the outside
    /// selection's codes).
    plans: Vec<[PosSource<'a>; 2]>,
    /// Target indices in the shared subset, as positions into the sorted
    /// target list (cache key extraction).
    shared_targets: Vec<usize>,
}

/// Decodes the received window with the joint packet decoder over the
/// targets in `d`.
///
/// Candidates `(w_D, g_U)` range over the operation region, untargeted
/// packets averaged out under `g_U`'s own codes. For every subset `S` of the
/// targets, admission requires the candidate's weighted likelihood to
/// strictly exceed the threshold of every outside selection agreeing with
/// `g_U` on `S` — margin or collision selections for proper `S`, collision
/// selections only for `S = D`. Argmax over the admitted set,
/// lexicographic in `(g_U, w_D)` on ties, else collision.
#[allow(non_snake_case)]
pub fn decode_dD(
    ctx: &AsyncContext,
    d: &IndexSet,
    regions: &SubDecoderRegions<AsyncCodingVector>,
    books: &AsyncCodebookSet,
    y: &[usize],
) -> Result<AsyncDecodeOutcome, AsyncError> {
    decode_dD_with_offset(ctx, d, regions, books, y, 0.0)
}

/// [`decode_dD`] with every admission threshold shifted by
/// `threshold_offset_log` natural-log units. Offset 0 is the
/// optimal-threshold decoder; nonzero offsets exist to demonstrate that
/// shifting the thresholds in either direction cannot improve the error
/// performance.
#[allow(non_snake_case)]
pub fn decode_dD_with_offset(
    ctx: &AsyncContext,
    d: &IndexSet,
    regions: &SubDecoderRegions<AsyncCodingVector>,
    books: &AsyncCodebookSet,
    y: &[usize],
    threshold_offset_log: f64,
) -> Result<AsyncDecodeOutcome, AsyncError> {
    let layout = ctx.layout;
    let n = layout.n();
    ctx.validate()?;
    check_regions(ctx, regions)?;
    d.check_within(layout.l())?;
    books.check_layout(&layout)?;
    if y.len() != layout.total_len() {
        return Err(AsyncError::SequenceLengthMismatch {
            got: y.len(),
            want: layout.total_len(),
        });
    }
    for (position, &symbol) in y.iter().enumerate() {
        if symbol >= ctx.channel.y_alphabet() {
            return Err(AsyncError::Channel(ChannelError::SymbolOutOfRange {
                which: "output",
                position,
                symbol,
                alphabet: ctx.channel.y_alphabet(),
            }));
        }
    }
    let q_offset = quantize(threshold_offset_log);
    let targets: Vec<(User, usize)> = d.members().collect();
    let k = targets.len();
    if k > DECODE_SUBSET_CAP_LOG2 {
        return Err(AsyncError::TooManySubsets {
            packets: k,
            required: 1u128 << k,
            cap: 1usize << DECODE_SUBSET_CAP_LOG2,
        });
    }
    let full_mask: usize = (1usize << k) - 1;

    let mut best: Option<(QLog, AsyncCodingVector, Vec<usize>)> = None;
    let mut tied = false;

    for g in regions.operation() {
        let mut target_rates = 0.0;
        for &(user, packet) in &targets {
            target_rates += ctx.rate(user, g.code(user, packet))?;
        }
        let q_const = q_add(
            quantize(ctx.log_prior(g)),
            quantize(rate_penalty_log(target_rates, n)),
        );
        if q_const == Q_LOG_ZERO {
            continue; // zero prior: never decodable
        }

        // Candidate input model per position, target codewords unresolved.
        let mut cand_plan: Vec<[PosSource; 2]> = Vec::with_capacity(layout.total_len());
        for position in 0..layout.total_len() {
            let mut row = [PosSource::Fixed(0), PosSource::Fixed(0)];
            for user in [User::One, User::Two] {
                row[user.index()] = match layout.slot(user, position) {
                    Some((packet, t)) => match targets.iter().position(|&m| m == (user, packet)) {
                        Some(di) => PosSource::Word { di, t },
                        None => PosSource::Averaged(ctx.dist(user, g.code(user, packet))?),
                    },
                    None => PosSource::Fixed(idle_symbol(ctx.channel, user)?),
                };
            }
            cand_plan.push(row);
        }

        // Threshold families: one per (subset of targets, agreeing outside
        // selection). The full subset is tested against collision
        // selections only; proper subsets against margin and collision.
        let mut families: Vec<ThresholdFamily> = Vec::new();
        for mask in 0..=full_mask {
            let shared = IndexSet::from_members(
                targets
                    .iter()
                    .enumerate()
                    .filter(|&(di, _)| mask & (1 << di) != 0)
                    .map(|(_, &m)| m),
            );
            let rivals: Vec<&AsyncCodingVector> = if mask == full_mask {
                regions.collision().iter().collect()
            } else {
                regions.outside().collect()
            };
            for gt in rivals {
                if !gt.agrees_with(g, &shared) {
                    continue;
                }
                let mut shared_rates = 0.0;
                for (user, packet) in shared.members() {
                    shared_rates += ctx.rate(user, g.code(user, packet))?;
                }
                let q_base = q_add(
                    quantize(ctx.log_prior(gt)),
                    quantize(rate_penalty_log(shared_rates, n)),
                );
                if q_base == Q_LOG_ZERO {
                    continue; // zero-prior threshold: never blocks admission
                }
                let mut plans: Vec<[PosSource; 2]> = Vec::with_capacity(layout.total_len());
                for position in 0..layout.total_len() {
                    let mut row = [PosSource::Fixed(0), PosSource::Fixed(0)];
                    for user in [User::One, User::Two] {
                        row[user.index()] = match layout.slot(user, position) {
                            Some((packet, t)) if shared.contains(user, packet) => {
                                let di = targets
                                    .iter()
                                    .position(|&m| m == (user, packet))
                                    .expect("shared subset is drawn from the targets");
                                PosSource::Word { di, t }
                            }
                            Some((packet, _)) => {
                                PosSource::Averaged(ctx.dist(user, gt.code(user, packet))?)
                            }
                            None => PosSource::Fixed(idle_symbol(ctx.channel, user)?),
                        };
                    }
                    plans.push(row);
                }
                families.push(ThresholdFamily {
                    q_base,
                    plans,
                    shared_targets: (0..k).filter(|di| mask & (1 << di) != 0).collect(),
                });
            }
        }

        // Thresholds depend on the candidate words only through the shared
        // subset; cache per (family, shared words).
        let mut q_thr_cache: HashMap<(usize, Vec<usize>), QLog> = HashMap::new();

        let counts: Vec<usize> = {
            let mut counts = Vec::with_capacity(k);
            for &(user, packet) in &targets {
                counts.push(
                    ctx.ensembles[user.index()].message_count(g.code(user, packet), n)?,
                );
            }
            counts
        };
        let mut w = vec![0usize; k];
        loop {
            let words: Vec<&[usize]> = targets
                .iter()
                .zip(&w)
                .map(|(&(user, packet), &wi)| books.word(user, packet, g.code(user, packet), wi))
                .collect();
            let q_score = q_from(std::iter::once(q_const).chain(
                cand_plan.iter().zip(y).map(|(row, &yy)| {
                    q_symbol(ctx.channel, resolve(row[0], &words), resolve(row[1], &words), yy)
                }),
            ));
            if q_score != Q_LOG_ZERO {
                let mut admitted = true;
                for (fi, family) in families.iter().enumerate() {
                    let key_words: Vec<usize> =
                        family.shared_targets.iter().map(|&di| w[di]).collect();
                    let q_thr = match q_thr_cache.get(&(fi, key_words.clone())) {
                        Some(&q) => q,
                        None => {
                            let q = q_from(std::iter::once(family.q_base).chain(
                                family.plans.iter().zip(y).map(|(row, &yy)| {
                                    q_symbol(
                                        ctx.channel,
                                        resolve(row[0], &words),
                                        resolve(row[1], &words),
                                        yy,
                                    )
                                }),
                            ));
                            q_thr_cache.insert((fi, key_words), q);
                            q
                        }
                    };
                    if q_score <= q_add(q_thr, q_offset) {
                        admitted = false;
                        break;
                    }
                }
                if admitted {
                    match &best {
                        Some((bq, _, _)) if q_score < *bq => {}
                        Some((bq, _, _)) if q_score == *bq => tied = true,
                        _ => {
                            best = Some((q_score, g.clone(), w.clone()));
                            tied = false;
                        }
                    }
                }
            }
            if !advance(&mut w, &counts) {
                break;
            }
        }
    }

    Ok(match best {
        Some((q, g, w)) => {
            let packets: Vec<PacketDecode> = targets
                .iter()
                .zip(&w)
                .map(|(&(user, packet), &word)| PacketDecode {
                    user,
                    packet,
                    code: g.code(user, packet),
                    word,
                })
                .collect();
            AsyncDecodeOutcome {
                decision: AsyncDecision::Decoded { packets: packets.clone() },
                detail: Some(AsyncDecodeDetail {
                    best: AsyncCandidateScore {
                        packets,
                        g,
                        log_weighted_likelihood: dequantize(q),
                    },
                    tied,
                }),
            }
        }
        None => AsyncDecodeOutcome::collision(),
    })
}

/// Odometer step over mixed-radix message indices; index 0 most significant.
fn advance(w: &mut [usize], counts: &[usize]) -> bool {
    for i in (0..w.len()).rev() {
        w[i] += 1;
        if w[i] < counts[i] {
            return true;
        }
        w[i] = 0;
    }
    false
}

/// Per-user role at one position while assembling a rival term.
#[derive(Clone, Copy)]
enum TrueRole<'a> {
    /// Pinned at a fixed symbol (idle fill) in the true law.
    Fixed(usize),
    /// A target symbol drawn from the true code's input distribution.
    Drawn { dist: &'a SymbolDistribution },
    /// Averaged under the true code's input distribution (untargeted packet).
    Mix(&'a SymbolDistribution),
}

/// Per-user role at one position in the rival's score factor.
#[derive(Clone, Copy)]
enum RivalRole<'a> {
    /// Pinned at a fixed symbol (idle fill).
    Fixed(usize),
    /// Reuses the truth's drawn symbol (shared target).
    Shared,
    /// Redrawn fresh from the rival's code distribution (unshared target).
    Fresh { dist: &'a SymbolDistribution, code: usize },
    /// Averaged under the rival's code distribution (untargeted packet).
    Mix { dist: &'a SymbolDistribution, code: usize },
}

fn true_source<'a>(role: TrueRole<'a>, drawn: Option<usize>) -> SymbolSource<'a> {
    match role {
        TrueRole::Fixed(symbol) => SymbolSource::Pinned(symbol),
        TrueRole::Drawn { .. } => {
            SymbolSource::Pinned(drawn.expect("drawn target without a symbol"))
        }
        TrueRole::Mix(dist) => SymbolSource::Mixed(dist),
    }
}

fn rival_source<'a>(
    role: RivalRole<'a>,
    drawn: Option<usize>,
    fresh_symbol: Option<usize>,
) -> SymbolSource<'a> {
    match role {
        RivalRole::Fixed(symbol) => SymbolSource::Pinned(symbol),
        RivalRole::Shared => {
            SymbolSource::Pinned(drawn.expect("shared target without a drawn symbol"))
        }
        RivalRole::Fresh { .. } => {
            SymbolSource::Pinned(fresh_symbol.expect("fresh target without a redraw"))
        }
        RivalRole::Mix { dist, .. } => SymbolSource::Mixed(dist),
    }
}

/// Context key of one user at one position: role tag, code index, pinned or
/// drawn symbol. Two events share a rival score distribution exactly when
/// their keys (and output symbol) match.
type RoleKey = (u8, usize, usize);

fn role_key(role: RivalRole, drawn: Option<usize>) -> RoleKey {
    match role {
        RivalRole::Fixed(symbol) => (0, 0, symbol),
        RivalRole::Shared => (1, 0, drawn.expect("shared target without a drawn symbol")),
        RivalRole::Fresh { code, .. } => (2, code, 0),
        RivalRole::Mix { code, .. } => (3, code, 0),
    }
}

/// Interns per-position context keys and accumulates rival score
/// distributions per context.
struct AsyncContextTable {
    keys: Vec<(RoleKey, RoleKey, usize)>,
    dists: Vec<BTreeMap<QLog, f64>>,
}

impl AsyncContextTable {
    fn new() -> AsyncContextTable {
        AsyncContextTable { keys: Vec::new(), dists: Vec::new() }
    }

    /// Interns a key; the flag is true when the context is new and its
    /// distribution still empty.
    fn intern(&mut self, key: (RoleKey, RoleKey, usize)) -> (usize, bool) {
        if let Some(i) = self.keys.iter().position(|&k| k == key) {
            return (i, false);
        }
        self.keys.push(key);
        self.dists.push(BTreeMap::new());
        (self.keys.len() - 1, true)
    }

    fn add(&mut self, context: usize, value: QLog, weight: f64) {
        *self.dists[context].entry(value).or_insert(0.0) += weight;
    }

    fn into_dists(self) -> Vec<Vec<(QLog, f64)>> {
        self.dists.into_iter().map(|d| d.into_iter().collect()).collect()
    }
}

/// Builds the term specification for one joint-packet rival term: the rival
/// keeps the truth's codewords on the shared targets, redraws the remaining
/// targets fresh from its own codes, and is marginalized on the untargeted
/// packets under its own codes.
fn async_rival_spec(
    ctx: &AsyncContext,
    g: &AsyncCodingVector,
    g_tilde: &AsyncCodingVector,
    shared: &IndexSet,
    d: &IndexSet,
    cap: f64,
    idle_dists: &[Option<SymbolDistribution>; 2],
) -> Result<RivalTermSpec, AsyncError> {
    let ch = ctx.channel;
    let layout = ctx.layout;
    let n = layout.n();

    let mut contexts = AsyncContextTable::new();
    let mut positions = Vec::with_capacity(layout.total_len());
    for position in 0..layout.total_len() {
        let mut true_roles: [TrueRole; 2] = [TrueRole::Fixed(0), TrueRole::Fixed(0)];
        let mut rival_roles: [RivalRole; 2] = [RivalRole::Fixed(0), RivalRole::Fixed(0)];
        for user in [User::One, User::Two] {
            let (true_role, rival_role) = match layout.slot(user, position) {
                Some((packet, _)) if d.contains(user, packet) => {
                    let dist = ctx.dist(user, g.code(user, packet))?;
                    if shared.contains(user, packet) {
                        (TrueRole::Drawn { dist }, RivalRole::Shared)
                    } else {
                        let code = g_tilde.code(user, packet);
                        (
                            TrueRole::Drawn { dist },
                            RivalRole::Fresh { dist: ctx.dist(user, code)?, code },
                        )
                    }
                }
                Some((packet, _)) => {
                    let code = g_tilde.code(user, packet);
                    (
                        TrueRole::Mix(ctx.dist(user, g.code(user, packet))?),
                        RivalRole::Mix { dist: ctx.dist(user, code)?, code },
                    )
                }
                None => {
                    let symbol = idle_dists[user.index()]
                        .as_ref()
                        .map(|d| {
                            d.support().next().expect("idle point mass has support").0
                        })
                        .ok_or(AsyncError::MissingIdleSymbol { user })?;
                    (TrueRole::Fixed(symbol), RivalRole::Fixed(symbol))
                }
            };
            true_roles[user.index()] = true_role;
            rival_roles[user.index()] = rival_role;
        }

        let draws = |role: TrueRole| -> Vec<(Option<usize>, f64)> {
            match role {
                TrueRole::Drawn { dist, .. } => {
                    dist.support().map(|(x, p)| (Some(x), p)).collect()
                }
                _ => vec![(None, 1.0)],
            }
        };

        let mut events = Vec::new();
        for &(x1, p1) in &draws(true_roles[0]) {
            for &(x2, p2) in &draws(true_roles[1]) {
                let s1 = true_source(true_roles[0], x1);
                let s2 = true_source(true_roles[1], x2);
                for yy in 0..ch.y_alphabet() {
                    let py = ch.per_symbol_conditional(s1, s2, yy);
                    if py <= 0.0 {
                        continue;
                    }
                    let key = (role_key(rival_roles[0], x1), role_key(rival_roles[1], x2), yy);
                    let (context, new) = contexts.intern(key);
                    if new {
                        // Rival score factor distribution under this
                        // context: fresh targets redrawn from the rival's
                        // codes, shared targets pinned at the truth's draw.
                        let fresh = |role: RivalRole| -> Vec<(Option<usize>, f64)> {
                            match role {
                                RivalRole::Fresh { dist, .. } => {
                                    dist.support().map(|(x, p)| (Some(x), p)).collect()
                                }
                                _ => vec![(None, 1.0)],
                            }
                        };
                        for &(f1, q1) in &fresh(rival_roles[0]) {
                            for &(f2, q2) in &fresh(rival_roles[1]) {
                                let r1 = rival_source(rival_roles[0], x1, f1);
                                let r2 = rival_source(rival_roles[1], x2, f2);
                                contexts.add(context, q_symbol(ch, r1, r2, yy), q1 * q2);
                            }
                        }
                    }
                    events.push(OuterEvent {
                        weight: p1 * p2 * py,
                        q_true: q_symbol(ch, s1, s2, yy),
                        context,
                    });
                }
            }
        }
        positions.push(PositionSpec { events });
    }

    let mut true_rates = 0.0;
    let mut rival_rates = 0.0;
    let mut fresh_rates = 0.0;
    for (user, packet) in d.members() {
        true_rates += ctx.rate(user, g.code(user, packet))?;
        let rt = ctx.rate(user, g_tilde.code(user, packet))?;
        rival_rates += rt;
        if !shared.contains(user, packet) {
            fresh_rates += rt;
        }
    }
    Ok(RivalTermSpec {
        positions,
        context_dists: contexts.into_dists(),
        q_true_const: q_add(
            quantize(ctx.log_prior(g)),
            quantize(rate_penalty_log(true_rates, n)),
        ),
        q_rival_const: q_add(
            quantize(ctx.log_prior(g_tilde)),
            quantize(rate_penalty_log(rival_rates, n)),
        ),
        cap,
        log2_amplifier: n as f64 * fresh_rates,
        coefficient: ctx.prior(g),
    })
}

/// `min{prior_true, prior_rival * 2^log2_amp * factor_product}` with the
/// zero cases kept free of `0 * inf`.
fn async_threshold_value(
    prior_true: f64,
    prior_rival: f64,
    log2_amp: f64,
    factor_product: f64,
) -> f64 {
    if factor_product <= 0.0 || prior_rival <= 0.0 {
        0.0
    } else {
        prior_true.min(prior_rival * f64::exp2(log2_amp) * factor_product)
    }
}

/// The per-position expectation product for one threshold term: shared
/// targets pinned identically in both laws, unshared targets pinned in the
/// true law and averaged under the outside selection's codes in the
/// numerator, untargeted packets averaged in both laws, idle positions
/// pinned at the idle symbol.
fn threshold_factor_product(
    ctx: &AsyncContext,
    g: &AsyncCodingVector,
    g_tilde: &AsyncCodingVector,
    shared: &IndexSet,
    d: &IndexSet,
    idle_dists: &[Option<SymbolDistribution>; 2],
) -> Result<f64, AsyncError> {
    let layout = ctx.layout;
    let mut product = 1.0;
    for position in 0..layout.total_len() {
        let mut factors: [Option<FactorUser>; 2] = [None, None];
        for user in [User::One, User::Two] {
            factors[user.index()] = Some(match layout.slot(user, position) {
                Some((packet, _)) if shared.contains(user, packet) => FactorUser::PinnedSame {
                    draw: ctx.dist(user, g.code(user, packet))?,
                },
                Some((packet, _)) if d.contains(user, packet) => FactorUser::PinnedToMixed {
                    draw: ctx.dist(user, g.code(user, packet))?,
                    num: ctx.dist(user, g_tilde.code(user, packet))?,
                },
                Some((packet, _)) => FactorUser::MixedBoth {
                    den: ctx.dist(user, g.code(user, packet))?,
                    num: ctx.dist(user, g_tilde.code(user, packet))?,
                },
                None => FactorUser::PinnedSame {
                    draw: idle_dists[user.index()]
                        .as_ref()
                        .ok_or(AsyncError::MissingIdleSymbol { user })?,
                },
            });
        }
        product *= ctx.channel.mc_expectation_factor(
            factors[0].expect("factor assembled for user 1"),
            factors[1].expect("factor assembled for user 2"),
        )?;
    }
    Ok(product)
}

/// Bounds the joint packet decoder's grouped error probability over the
/// targets in `d`.
///
/// For every true selection in the operation region and every proper subset
/// `S` of the targets, a rival family covers wrong decodes agreeing with the
/// truth on `S` (capped, rate-amplified win probabilities over the matching
/// operation-region slice) and a threshold family covers margin or collision
/// selections agreeing on `S` outscoring the truth's admission threshold;
/// collision selections agreeing on all targets contribute a final threshold
/// family. Threshold terms carry weight 2, rival terms weight 1.
#[allow(non_snake_case)]
pub fn bound_gepD(
    ctx: &AsyncContext,
    d: &IndexSet,
    regions: &SubDecoderRegions<AsyncCodingVector>,
    settings: &EvalConfig,
) -> Result<BoundReport, AsyncError> {
    let layout = ctx.layout;
    let n = layout.n();
    ctx.validate()?;
    check_regions(ctx, regions)?;
    d.check_within(layout.l())?;
    let targets: Vec<(User, usize)> = d.members().collect();
    let k = targets.len();
    let required = 1u128.checked_shl(k as u32).unwrap_or(u128::MAX);
    if required > settings.max_partitions as u128 {
        return Err(AsyncError::TooManySubsets {
            packets: k,
            required,
            cap: settings.max_partitions,
        });
    }
    let full_mask: usize = (1usize << k) - 1;

    let mut idle_dists: [Option<SymbolDistribution>; 2] = [None, None];
    if layout.t2() > 0 {
        for user in [User::One, User::Two] {
            idle_dists[user.index()] = Some(SymbolDistribution::point_mass(
                idle_symbol(ctx.channel, user)?,
                ctx.channel.input_alphabet(user),
            ));
        }
    }

    let operation: Vec<&AsyncCodingVector> = regions.operation().iter().collect();
    let mut terms = Vec::new();
    let mut ordinal: u64 = 0;

    for &g in &operation {
        let prior_g = ctx.prior(g);

        // Rival families: one per proper target subset, over the
        // operation-region slice agreeing with the truth there.
        for mask in 0..full_mask {
            let shared = IndexSet::from_members(
                targets
                    .iter()
                    .enumerate()
                    .filter(|&(di, _)| mask & (1 << di) != 0)
                    .map(|(_, &m)| m),
            );
            let shared_pairs: Vec<[usize; 2]> =
                shared.members().map(|(user, packet)| [user.index(), packet]).collect();
            let slice: Vec<&AsyncCodingVector> = operation
                .iter()
                .copied()
                .filter(|h| h.agrees_with(g, &shared))
                .collect();
            let cap = 1.0 / slice.len() as f64;
            for gt in slice {
                let spec = async_rival_spec(ctx, g, gt, &shared, d, cap, &idle_dists)?;
                let outcome = evaluate_rival_term(&spec, &settings.for_term(ordinal))?;
                ordinal += 1;
                let (value, mode) = EvalMode::from_outcome(&outcome);
                terms.push(BoundTerm {
                    family: TermFamily::AsyncRival { shared: shared_pairs.clone() },
                    g: g.to_string(),
                    g_tilde: gt.to_string(),
                    weight: 1.0,
                    value,
                    mode,
                });
            }
        }

        // Threshold families: proper subsets against margin and collision
        // selections, the full target set against collision selections only.
        for mask in 0..=full_mask {
            let shared = IndexSet::from_members(
                targets
                    .iter()
                    .enumerate()
                    .filter(|&(di, _)| mask & (1 << di) != 0)
                    .map(|(_, &m)| m),
            );
            let shared_pairs: Vec<[usize; 2]> =
                shared.members().map(|(user, packet)| [user.index(), packet]).collect();
            let mut fresh_rates = 0.0;
            for &(user, packet) in &targets {
                if !shared.contains(user, packet) {
                    fresh_rates += ctx.rate(user, g.code(user, packet))?;
                }
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
                let product = threshold_factor_product(ctx, g, gt, &shared, d, &idle_dists)?;
                terms.push(BoundTerm {
                    family: if mask == full_mask {
                        TermFamily::AsyncThresholdFullMatch
                    } else {
                        TermFamily::AsyncThreshold { shared: shared_pairs.clone() }
                    },
                    g: g.to_string(),
                    g_tilde: gt.to_string(),
                    weight: 2.0,
                    value: async_threshold_value(
                        prior_g,
                        ctx.prior(gt),
                        n as f64 * fresh_rates,
                        product,
                    ),
                    mode: EvalMode::Exact,
                });
            }
        }
    }

    Ok(BoundReport::assemble(
        4,
        crate::fingerprint::async_fingerprint(ctx),
        n,
        terms,
    ))
}
