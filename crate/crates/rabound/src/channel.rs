//! Discrete memoryless two-input channel model and per-symbol likelihood
//! machinery.
//!
//! A [`Channel`] holds the transition law `P(y | x1, x2)` for finite input
//! alphabets (one per user) and a finite output alphabet, plus optional
//! per-user idle symbols (what an inactive user feeds the channel). Sequence
//! operations factor over positions by memorylessness; everything is exposed
//! in the natural-log domain with `-inf` as the log-of-zero sentinel.
//!
//! Beyond plain sequence likelihoods, the module exposes the two composite
//! per-symbol quantities the decoders and bounds are built from:
//!
//! - [`Channel::per_symbol_conditional`]: `P(y | s1, s2)` where each input is
//!   either pinned to a symbol or mixed under a distribution — the building
//!   block for output marginals and single-user conditionals;
//! - [`Channel::mc_expectation_factor`]: the per-symbol factor of expectations
//!   of likelihood ratios `E[num(Y)/den(Y)]`, where each user's symbol is
//!   drawn and pinned or mixed independently in numerator and denominator.
//!   Zero-denominator outputs carry no probability under the denominator law
//!   and are excluded from the sum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logdomain::{quantize, QLog, LOG_ZERO};

/// Which of the two users a per-user argument refers to.
///
/// Orders as declared (`One < Two`), so `(User, packet)` pairs sort user 1's
/// packets before user 2's wherever packet indices are kept in ordered sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum User {
    /// The user whose message the receiver must deliver.
    One,
    /// The interfering user.
    Two,
}

impl User {
    /// Index 0 for user one, 1 for user two (array addressing).
    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    /// The other user.
    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }
}

impl std::fmt::Display for User {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            User::One => write!(f, "user 1"),
            User::Two => write!(f, "user 2"),
        }
    }
}

/// Errors from channel and distribution validation or sequence operations.
#[derive(Debug, Error)]
pub enum ChannelError {
    /// A transition row does not sum to 1 within tolerance.
    #[error("transition row (x1={x1}, x2={x2}) sums to {sum:.17} (must be 1 within 1e-12)")]
    RowNotNormalized { x1: usize, x2: usize, sum: f64 },
    /// A transition entry is negative or non-finite.
    #[error("transition entry (x1={x1}, x2={x2}, y={y}) is {value} (must be finite and >= 0)")]
    BadEntry { x1: usize, x2: usize, y: usize, value: f64 },
    /// An alphabet has no symbols.
    #[error("{which} alphabet is empty")]
    EmptyAlphabet { which: &'static str },
    /// The nested transition array is ragged.
    #[error("transition array is ragged: {detail}")]
    RaggedTransition { detail: String },
    /// A declared idle symbol is outside the user's alphabet.
    #[error("idle symbol {symbol} for {user} is outside alphabet of size {alphabet}")]
    IdleOutOfRange { user: User, symbol: usize, alphabet: usize },
    /// Sequence arguments have different lengths.
    #[error("sequence lengths differ: x1 has {x1_len}, x2 has {x2_len}, y has {y_len}")]
    LengthMismatch { x1_len: usize, x2_len: usize, y_len: usize },
    /// A sequence symbol is outside its alphabet.
    #[error("{which} symbol {symbol} at position {position} is outside alphabet of size {alphabet}")]
    SymbolOutOfRange { which: &'static str, position: usize, symbol: usize, alphabet: usize },
    /// A probability vector is invalid.
    #[error("invalid symbol distribution: {detail}")]
    BadDistribution { detail: String },
    /// A distribution's length does not match the alphabet it is used with.
    #[error("distribution over {got} symbols used with alphabet of size {want}")]
    DistributionAlphabetMismatch { got: usize, want: usize },
}

/// Absolute tolerance for probability normalization checks.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A probability distribution over one user's input alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDistribution {
    probs: Vec<f64>,
}

impl SymbolDistribution {
    /// Validates and wraps a probability vector (nonnegative, sums to 1
    /// within 1e-12, at least one symbol).
    pub fn new(probs: Vec<f64>) -> Result<Self, ChannelError> {
        if probs.is_empty() {
            return Err(ChannelError::BadDistribution {
                detail: "no symbols".to_string(),
            });
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(ChannelError::BadDistribution {
                    detail: format!("entry {i} is {p}"),
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(ChannelError::BadDistribution {
                detail: format!("sums to {sum:.17} (must be 1 within 1e-12)"),
            });
        }
        Ok(SymbolDistribution { probs })
    }

    /// The uniform distribution over `alphabet` symbols.
    pub fn uniform(alphabet: usize) -> Self {
        assert!(alphabet > 0, "uniform distribution needs a nonempty alphabet");
        SymbolDistribution {
            probs: vec![1.0 / alphabet as f64; alphabet],
        }
    }

    /// A point mass on `symbol` within an alphabet of the given size.
    pub fn point_mass(symbol: usize, alphabet: usize) -> Self {
        assert!(symbol < alphabet, "point mass symbol outside alphabet");
        let mut probs = vec![0.0; alphabet];
        probs[symbol] = 1.0;
        SymbolDistribution { probs }
    }

    /// Number of symbols the distribution ranges over.
    pub fn alphabet(&self) -> usize {
        self.probs.len()
    }

    /// Probability of `symbol`.
    pub fn prob(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    /// The raw probability vector.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Iterates over `(symbol, probability)` pairs with positive probability.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
    }
}

/// How one user's input enters a per-symbol channel factor.
#[derive(Debug, Clone, Copy)]
pub enum SymbolSource<'a> {
    /// The input is pinned to a known symbol.
    Pinned(usize),
    /// The input is averaged under a distribution.
    Mixed(&'a SymbolDistribution),
}

/// Per-user specification for [`Channel::mc_expectation_factor`]: how the
/// user's symbol is treated in the denominator and numerator laws of
/// `E[num(Y)/den(Y)]`, with the expectation over the drawn symbols and `Y`
/// from the denominator law.
#[derive(Debug, Clone, Copy)]
pub enum FactorUser<'a> {
    /// A symbol is drawn from `draw`, pinned in the denominator, and the
    /// numerator pins the same symbol.
    PinnedSame { draw: &'a SymbolDistribution },
    /// A symbol is drawn from `draw` and pinned in the denominator; the
    /// numerator averages the user out under `num` instead.
    PinnedToMixed { draw: &'a SymbolDistribution, num: &'a SymbolDistribution },
    /// No symbol is drawn: the denominator averages under `den` and the
    /// numerator averages under `num`.
    MixedBoth { den: &'a SymbolDistribution, num: &'a SymbolDistribution },
}

impl<'a> FactorUser<'a> {
    /// Drawn-and-pinned distribution, if any.
    fn draw(&self) -> Option<&'a SymbolDistribution> {
        match self {
            FactorUser::PinnedSame { draw } | FactorUser::PinnedToMixed { draw, .. } => Some(draw),
            FactorUser::MixedBoth { .. } => None,
        }
    }

    /// Denominator source given the drawn symbol (if one was drawn).
    fn den_source(&self, drawn: Option<usize>) -> SymbolSource<'a> {
        match self {
            FactorUser::PinnedSame { .. } | FactorUser::PinnedToMixed { .. } => {
                SymbolSource::Pinned(drawn.expect("pinned user without a drawn symbol"))
            }
            FactorUser::MixedBoth { den, .. } => SymbolSource::Mixed(den),
        }
    }

    /// Numerator source given the drawn symbol (if one was drawn).
    fn num_source(&self, drawn: Option<usize>) -> SymbolSource<'a> {
        match self {
            FactorUser::PinnedSame { .. } => {
                SymbolSource::Pinned(drawn.expect("pinned user without a drawn symbol"))
            }
            FactorUser::PinnedToMixed { num, .. } | FactorUser::MixedBoth { num, .. } => {
                SymbolSource::Mixed(num)
            }
        }
    }

    fn alphabet_check(&self, want: usize) -> Result<(), ChannelError> {
        let dists: [Option<&SymbolDistribution>; 2] = match self {
            FactorUser::PinnedSame { draw } => [Some(draw), None],
            FactorUser::PinnedToMixed { draw, num } => [Some(draw), Some(num)],
            FactorUser::MixedBoth { den, num } => [Some(den), Some(num)],
        };
        for dist in dists.into_iter().flatten() {
            if dist.alphabet() != want {
                return Err(ChannelError::DistributionAlphabetMismatch {
                    got: dist.alphabet(),
                    want,
                });
            }
        }
        Ok(())
    }
}

/// A discrete memoryless channel with two inputs and one output.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    x1_alphabet: usize,
    x2_alphabet: usize,
    y_alphabet: usize,
    /// Flattened `P(y | x1, x2)`, indexed `(x1 * |X2| + x2) * |Y| + y`.
    transition: Vec<f64>,
    idle1: Option<usize>,
    idle2: Option<usize>,
}

impl Channel {
    /// Builds and validates a channel from a nested transition array
    /// `transition[x1][x2][y]` and optional per-user idle symbols.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        idle1: Option<usize>,
        idle2: Option<usize>,
    ) -> Result<Self, ChannelError> {
        let x1_alphabet = transition.len();
        if x1_alphabet == 0 {
            return Err(ChannelError::EmptyAlphabet { which: "user 1 input" });
        }
        let x2_alphabet = transition[0].len();
        if x2_alphabet == 0 {
            return Err(ChannelError::EmptyAlphabet { which: "user 2 input" });
        }
        let y_alphabet = transition[0][0].len();
        if y_alphabet == 0 {
            return Err(ChannelError::EmptyAlphabet { which: "output" });
        }
        let mut flat = Vec::with_capacity(x1_alphabet * x2_alphabet * y_alphabet);
        for (x1, rows) in transition.iter().enumerate() {
            if rows.len() != x2_alphabet {
                return Err(ChannelError::RaggedTransition {
                    detail: format!("x1={x1} has {} x2-rows, expected {x2_alphabet}", rows.len()),
                });
            }
            for (x2, row) in rows.iter().enumerate() {
                if row.len() != y_alphabet {
                    return Err(ChannelError::RaggedTransition {
                        detail: format!(
                            "row (x1={x1}, x2={x2}) has {} outputs, expected {y_alphabet}",
                            row.len()
                        ),
                    });
                }
                for (y, &p) in row.iter().enumerate() {
                    if !p.is_finite() || p < 0.0 {
                        return Err(ChannelError::BadEntry { x1, x2, y, value: p });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(ChannelError::RowNotNormalized { x1, x2, sum });
                }
                flat.extend_from_slice(row);
            }
        }
        if let Some(s) = idle1 {
            if s >= x1_alphabet {
                return Err(ChannelError::IdleOutOfRange {
                    user: User::One,
                    symbol: s,
                    alphabet: x1_alphabet,
                });
            }
        }
        if let Some(s) = idle2 {
            if s >= x2_alphabet {
                return Err(ChannelError::IdleOutOfRange {
                    user: User::Two,
                    symbol: s,
                    alphabet: x2_alphabet,
                });
            }
        }
        Ok(Channel {
            x1_alphabet,
            x2_alphabet,
            y_alphabet,
            transition: flat,
            idle1,
            idle2,
        })
    }

    /// Re-checks every channel invariant on the stored table and reports the
    /// first violation: dimensions consistent, entries finite and
    /// nonnegative, each `(x1, x2)` row normalized, idle symbols in range.
    /// A channel built through [`Channel::new`] always passes; this exists so
    /// deserialized or externally assembled systems can be checked at the
    /// same standard.
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.transition.len() != self.x1_alphabet * self.x2_alphabet * self.y_alphabet {
            return Err(ChannelError::RaggedTransition {
                detail: format!(
                    "flat table has {} entries, expected {}",
                    self.transition.len(),
                    self.x1_alphabet * self.x2_alphabet * self.y_alphabet
                ),
            });
        }
        for x1 in 0..self.x1_alphabet {
            for x2 in 0..self.x2_alphabet {
                let mut sum = 0.0;
                for y in 0..self.y_alphabet {
                    let p = self.prob(x1, x2, y);
                    if !p.is_finite() || p < 0.0 {
                        return Err(ChannelError::BadEntry { x1, x2, y, value: p });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(ChannelError::RowNotNormalized { x1, x2, sum });
                }
            }
        }
        if let Some(s) = self.idle1 {
            if s >= self.x1_alphabet {
                return Err(ChannelError::IdleOutOfRange {
                    user: User::One,
                    symbol: s,
                    alphabet: self.x1_alphabet,
                });
            }
        }
        if let Some(s) = self.idle2 {
            if s >= self.x2_alphabet {
                return Err(ChannelError::IdleOutOfRange {
                    user: User::Two,
                    symbol: s,
                    alphabet: self.x2_alphabet,
                });
            }
        }
        Ok(())
    }

    /// Binary XOR channel: `Y = X1 xor X2` flipped with probability `flip`.
    /// Symbol 0 doubles as the idle symbol for both users (an idle user is
    /// transparent to the XOR).
    pub fn binary_xor(flip: f64) -> Self {
        assert!((0.0..=1.0).contains(&flip), "flip probability outside [0, 1]");
        let mut transition = vec![vec![vec![0.0; 2]; 2]; 2];
        for x1 in 0..2 {
            for x2 in 0..2 {
                let clean = x1 ^ x2;
                transition[x1][x2][clean] = 1.0 - flip;
                transition[x1][x2][1 - clean] = flip;
            }
        }
        Channel::new(transition, Some(0), Some(0)).expect("binary XOR channel is valid")
    }

    /// Noiseless pair-output channel: `Y = (X1, X2)` over binary inputs,
    /// output alphabet of size 4 indexed `2 * x1 + x2`. Both inputs are always
    /// distinguishable, so the receiver can always separate the users.
    pub fn noiseless_pair() -> Self {
        let mut transition = vec![vec![vec![0.0; 4]; 2]; 2];
        for x1 in 0..2 {
            for x2 in 0..2 {
                transition[x1][x2][2 * x1 + x2] = 1.0;
            }
        }
        Channel::new(transition, Some(0), Some(0)).expect("pair-output channel is valid")
    }

    /// Size of user 1's input alphabet.
    pub fn x1_alphabet(&self) -> usize {
        self.x1_alphabet
    }

    /// Size of user 2's input alphabet.
    pub fn x2_alphabet(&self) -> usize {
        self.x2_alphabet
    }

    /// Input alphabet size for the given user.
    pub fn input_alphabet(&self, user: User) -> usize {
        match user {
            User::One => self.x1_alphabet,
            User::Two => self.x2_alphabet,
        }
    }

    /// Size of the output alphabet.
    pub fn y_alphabet(&self) -> usize {
        self.y_alphabet
    }

    /// The idle symbol for the given user, if one is declared.
    pub fn idle_symbol(&self, user: User) -> Option<usize> {
        match user {
            User::One => self.idle1,
            User::Two => self.idle2,
        }
    }

    /// Transition probability `P(y | x1, x2)`.
    pub fn prob(&self, x1: usize, x2: usize, y: usize) -> f64 {
        debug_assert!(x1 < self.x1_alphabet && x2 < self.x2_alphabet && y < self.y_alphabet);
        self.transition[(x1 * self.x2_alphabet + x2) * self.y_alphabet + y]
    }

    /// Natural log of `P(y | x1, x2)` with `-inf` for zero.
    pub fn log_prob(&self, x1: usize, x2: usize, y: usize) -> f64 {
        let p = self.prob(x1, x2, y);
        if p > 0.0 {
            p.ln()
        } else {
            LOG_ZERO
        }
    }

    /// Quantized log of `P(y | x1, x2)`; the single source all comparison
    /// paths (decoders, bound tails, oracles) quantize from.
    pub fn q_log_prob(&self, x1: usize, x2: usize, y: usize) -> QLog {
        quantize(self.log_prob(x1, x2, y))
    }

    /// Per-symbol conditional `P(y | s1, s2)` with each input pinned or mixed.
    pub fn per_symbol_conditional(&self, s1: SymbolSource, s2: SymbolSource, y: usize) -> f64 {
        match (s1, s2) {
            (SymbolSource::Pinned(a), SymbolSource::Pinned(b)) => self.prob(a, b, y),
            (SymbolSource::Pinned(a), SymbolSource::Mixed(d2)) => d2
                .support()
                .map(|(b, p)| p * self.prob(a, b, y))
                .sum(),
            (SymbolSource::Mixed(d1), SymbolSource::Pinned(b)) => d1
                .support()
                .map(|(a, p)| p * self.prob(a, b, y))
                .sum(),
            (SymbolSource::Mixed(d1), SymbolSource::Mixed(d2)) => d1
                .support()
                .map(|(a, p1)| {
                    p1 * d2
                        .support()
                        .map(|(b, p2)| p2 * self.prob(a, b, y))
                        .sum::<f64>()
                })
                .sum(),
        }
    }

    fn check_lengths(
        &self,
        x1_len: usize,
        x2_len: usize,
        y_len: usize,
    ) -> Result<(), ChannelError> {
        if x1_len != y_len || x2_len != y_len {
            return Err(ChannelError::LengthMismatch { x1_len, x2_len, y_len });
        }
        Ok(())
    }

    fn check_symbols(
        &self,
        which: &'static str,
        seq: &[usize],
        alphabet: usize,
    ) -> Result<(), ChannelError> {
        for (position, &symbol) in seq.iter().enumerate() {
            if symbol >= alphabet {
                return Err(ChannelError::SymbolOutOfRange { which, position, symbol, alphabet });
            }
        }
        Ok(())
    }

    /// Log-likelihood `log P(y_seq | x1_seq, x2_seq)` of aligned sequences;
    /// `-inf` if any position is impossible.
    pub fn sequence_log_likelihood(
        &self,
        x1_seq: &[usize],
        x2_seq: &[usize],
        y_seq: &[usize],
    ) -> Result<f64, ChannelError> {
        self.check_lengths(x1_seq.len(), x2_seq.len(), y_seq.len())?;
        self.check_symbols("user 1 input", x1_seq, self.x1_alphabet)?;
        self.check_symbols("user 2 input", x2_seq, self.x2_alphabet)?;
        self.check_symbols("output", y_seq, self.y_alphabet)?;
        let mut total = 0.0;
        for ((&a, &b), &y) in x1_seq.iter().zip(x2_seq).zip(y_seq) {
            let lp = self.log_prob(a, b, y);
            if lp == LOG_ZERO {
                return Ok(LOG_ZERO);
            }
            total += lp;
        }
        Ok(total)
    }

    /// Log of the output-sequence probability with both inputs averaged
    /// independently per position: `log prod_p sum_{a,b} d1(a) d2(b) P(y_p | a, b)`.
    pub fn marginal_output_log_prob(
        &self,
        dist1: &SymbolDistribution,
        dist2: &SymbolDistribution,
        y_seq: &[usize],
    ) -> Result<f64, ChannelError> {
        self.check_dist(dist1, User::One)?;
        self.check_dist(dist2, User::Two)?;
        self.check_symbols("output", y_seq, self.y_alphabet)?;
        let mut total = 0.0;
        for &y in y_seq {
            let p = self.per_symbol_conditional(
                SymbolSource::Mixed(dist1),
                SymbolSource::Mixed(dist2),
                y,
            );
            if p > 0.0 {
                total += p.ln();
            } else {
                return Ok(LOG_ZERO);
            }
        }
        Ok(total)
    }

    /// Log-probability of `y_seq` given one user's sequence, with the other
    /// user averaged per position under `other_dist`.
    pub fn conditional_given_user_log_prob(
        &self,
        pinned_user: User,
        pinned_seq: &[usize],
        other_dist: &SymbolDistribution,
        y_seq: &[usize],
    ) -> Result<f64, ChannelError> {
        let pinned_alphabet = self.input_alphabet(pinned_user);
        match pinned_user {
            User::One => {
                self.check_lengths(pinned_seq.len(), y_seq.len(), y_seq.len())?;
                self.check_symbols("user 1 input", pinned_seq, pinned_alphabet)?;
            }
            User::Two => {
                self.check_lengths(y_seq.len(), pinned_seq.len(), y_seq.len())?;
                self.check_symbols("user 2 input", pinned_seq, pinned_alphabet)?;
            }
        }
        self.check_dist(other_dist, pinned_user.other())?;
        self.check_symbols("output", y_seq, self.y_alphabet)?;
        let mut total = 0.0;
        for (&x, &y) in pinned_seq.iter().zip(y_seq) {
            let p = match pinned_user {
                User::One => self.per_symbol_conditional(
                    SymbolSource::Pinned(x),
                    SymbolSource::Mixed(other_dist),
                    y,
                ),
                User::Two => self.per_symbol_conditional(
                    SymbolSource::Mixed(other_dist),
                    SymbolSource::Pinned(x),
                    y,
                ),
            };
            if p > 0.0 {
                total += p.ln();
            } else {
                return Ok(LOG_ZERO);
            }
        }
        Ok(total)
    }

    fn check_dist(&self, dist: &SymbolDistribution, user: User) -> Result<(), ChannelError> {
        if dist.alphabet() != self.input_alphabet(user) {
            return Err(ChannelError::DistributionAlphabetMismatch {
                got: dist.alphabet(),
                want: self.input_alphabet(user),
            });
        }
        Ok(())
    }

    /// Per-symbol factor of `E[num(Y) / den(Y)]` where, independently for each
    /// user, a symbol is drawn and pinned or the user is averaged out, per
    /// [`FactorUser`]. The expectation is over the drawn symbols and over `Y`
    /// from the denominator law; outputs with zero denominator probability are
    /// excluded (they carry no probability mass). A sequence-level expectation
    /// is the product of its per-position factors.
    pub fn mc_expectation_factor(
        &self,
        user1: FactorUser,
        user2: FactorUser,
    ) -> Result<f64, ChannelError> {
        user1.alphabet_check(self.x1_alphabet)?;
        user2.alphabet_check(self.x2_alphabet)?;
        let draws1: Vec<(Option<usize>, f64)> = match user1.draw() {
            Some(d) => d.support().map(|(x, p)| (Some(x), p)).collect(),
            None => vec![(None, 1.0)],
        };
        let draws2: Vec<(Option<usize>, f64)> = match user2.draw() {
            Some(d) => d.support().map(|(x, p)| (Some(x), p)).collect(),
            None => vec![(None, 1.0)],
        };
        let mut total = 0.0;
        for &(x1, w1) in &draws1 {
            for &(x2, w2) in &draws2 {
                let den1 = user1.den_source(x1);
                let den2 = user2.den_source(x2);
                let num1 = user1.num_source(x1);
                let num2 = user2.num_source(x2);
                // E[num/den | draws] = sum over y with den(y) > 0 of
                // den(y) * num(y) / den(y) = sum of num(y) over that support.
                let mut inner = 0.0;
                for y in 0..self.y_alphabet {
                    if self.per_symbol_conditional(den1, den2, y) > 0.0 {
                        inner += self.per_symbol_conditional(num1, num2, y);
                    }
                }
                total += w1 * w2 * inner;
            }
        }
        Ok(total)
    }
}
