//! Code ensembles and deterministic codebook generation.
//!
//! Each user owns a finite ensemble of codes. A code is an input distribution
//! plus a rate; the special idle code (rate 0, point mass on the channel's
//! idle symbol) models an inactive user. A codebook realizes a code at a given
//! block length: `message_count = 2^(rate * block_length)` codewords, each
//! symbol drawn i.i.d. from the code's input distribution via the
//! counter-based generator in [`crate::rng`], keyed by
//! `(user, code index, codeword, position)`. The receiver regenerates any
//! codebook — or any single symbol — from the seed alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Channel, ChannelError, SymbolDistribution, User};
use crate::rng::{domain, keyed_unit, sample_index, Seed};

/// Errors from code and ensemble validation or codebook generation.
#[derive(Debug, Error)]
pub enum CodesError {
    /// `rate * block_length` is not an integer within tolerance.
    #[error("rate {rate} over block length {block_length} gives non-integral message bits")]
    NonIntegralRate { rate: f64, block_length: usize },
    /// Same, with the offending code named.
    #[error("{user} code {index}: rate {rate} over block length {block_length} gives non-integral message bits")]
    NonIntegralRateInCode { user: User, index: usize, rate: f64, block_length: usize },
    /// The message count exceeds what fits in a `usize`.
    #[error("rate {rate} over block length {block_length} needs {bits} message bits (max 62)")]
    MessageCountOverflow { rate: f64, block_length: usize, bits: u32 },
    /// A rate is negative or non-finite.
    #[error("{user} code {index}: rate {rate} must be finite and >= 0")]
    BadRate { user: User, index: usize, rate: f64 },
    /// An idle code has a positive rate.
    #[error("{user} code {index}: idle code has nonzero rate {rate}")]
    IdleWithRate { user: User, index: usize, rate: f64 },
    /// An idle code's distribution is not a point mass on the channel's idle symbol.
    #[error("{user} code {index}: idle code must be a point mass on idle symbol {idle_symbol}")]
    IdleNotPointMass { user: User, index: usize, idle_symbol: usize },
    /// An idle code exists but the channel declares no idle symbol for the user.
    #[error("{user} code {index}: idle code but the channel declares no idle symbol for {user}")]
    IdleWithoutChannelIdle { user: User, index: usize },
    /// A code's input distribution does not match the channel alphabet.
    #[error("{user} code {index}: input distribution over {got} symbols, channel alphabet is {want}")]
    AlphabetMismatch { user: User, index: usize, got: usize, want: usize },
    /// An ensemble has no codes.
    #[error("{user} ensemble has no codes")]
    EmptyEnsemble { user: User },
    /// A code index is outside the ensemble.
    #[error("{user} code index {index} out of range (ensemble has {count} codes)")]
    CodeOutOfRange { user: User, index: usize, count: usize },
    /// An underlying distribution error.
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// One code: an input distribution and a rate in bits per channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Code {
    input_dist: SymbolDistribution,
    rate: f64,
    idle: bool,
}

impl Code {
    /// An active code with the given input distribution and rate.
    pub fn active(input_dist: SymbolDistribution, rate: f64) -> Code {
        Code { input_dist, rate, idle: false }
    }

    /// The idle code for an alphabet with the given idle symbol: rate 0 and a
    /// point mass on that symbol.
    pub fn idle(idle_symbol: usize, alphabet: usize) -> Code {
        Code {
            input_dist: SymbolDistribution::point_mass(idle_symbol, alphabet),
            rate: 0.0,
            idle: true,
        }
    }

    /// The code's input distribution.
    pub fn input_dist(&self) -> &SymbolDistribution {
        &self.input_dist
    }

    /// The code's rate in bits per channel use.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Whether this is the idle code.
    pub fn is_idle(&self) -> bool {
        self.idle
    }

    /// Number of messages at the given block length:
    /// `2^(rate * block_length)`, which must be integral; 1 for the idle code.
    pub fn message_count(&self, block_length: usize) -> Result<usize, CodesError> {
        if self.idle {
            return Ok(1);
        }
        let bits = self.rate * block_length as f64;
        let rounded = bits.round();
        if (bits - rounded).abs() > 1e-9 {
            return Err(CodesError::NonIntegralRate { rate: self.rate, block_length });
        }
        let bits_int = rounded as u32;
        if rounded > 62.0 {
            return Err(CodesError::MessageCountOverflow {
                rate: self.rate,
                block_length,
                bits: bits_int,
            });
        }
        Ok(1usize << bits_int)
    }
}

/// One user's finite ensemble of codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeEnsemble {
    user: User,
    codes: Vec<Code>,
}

impl CodeEnsemble {
    /// Wraps a code list for a user.
    pub fn new(user: User, codes: Vec<Code>) -> CodeEnsemble {
        CodeEnsemble { user, codes }
    }

    /// The user this ensemble belongs to.
    pub fn user(&self) -> User {
        self.user
    }

    /// Number of codes in the ensemble.
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    /// Whether the ensemble is empty (invalid; kept for completeness).
    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// The code at `index`.
    pub fn code(&self, index: usize) -> Result<&Code, CodesError> {
        self.codes.get(index).ok_or(CodesError::CodeOutOfRange {
            user: self.user,
            index,
            count: self.codes.len(),
        })
    }

    /// All codes in index order.
    pub fn codes(&self) -> &[Code] {
        &self.codes
    }

    /// Message count of the code at `index`, with the code named in errors.
    pub fn message_count(&self, index: usize, block_length: usize) -> Result<usize, CodesError> {
        let code = self.code(index)?;
        code.message_count(block_length).map_err(|e| match e {
            CodesError::NonIntegralRate { rate, block_length } => {
                CodesError::NonIntegralRateInCode { user: self.user, index, rate, block_length }
            }
            other => other,
        })
    }

    /// Validates every code against the channel: alphabet sizes, finite
    /// nonnegative rates, and idle codes pinned to the channel's idle symbol.
    pub fn validate(&self, channel: &Channel) -> Result<(), CodesError> {
        if self.codes.is_empty() {
            return Err(CodesError::EmptyEnsemble { user: self.user });
        }
        let want = channel.input_alphabet(self.user);
        for (index, code) in self.codes.iter().enumerate() {
            if code.input_dist.alphabet() != want {
                return Err(CodesError::AlphabetMismatch {
                    user: self.user,
                    index,
                    got: code.input_dist.alphabet(),
                    want,
                });
            }
            if !code.rate.is_finite() || code.rate < 0.0 {
                return Err(CodesError::BadRate { user: self.user, index, rate: code.rate });
            }
            if code.idle {
                if code.rate != 0.0 {
                    return Err(CodesError::IdleWithRate {
                        user: self.user,
                        index,
                        rate: code.rate,
                    });
                }
                let idle_symbol = channel.idle_symbol(self.user).ok_or(
                    CodesError::IdleWithoutChannelIdle { user: self.user, index },
                )?;
                let is_point = code
                    .input_dist
                    .probs()
                    .iter()
                    .enumerate()
                    .all(|(s, &p)| if s == idle_symbol { p == 1.0 } else { p == 0.0 });
                if !is_point {
                    return Err(CodesError::IdleNotPointMass {
                        user: self.user,
                        index,
                        idle_symbol,
                    });
                }
            }
        }
        Ok(())
    }

    /// Generates the codebook realizing code `index` at `block_length` under
    /// `seed`. Symbol `(w, p)` is keyed by
    /// `(user, index, w, p)` in the codebook domain, so any symbol can be
    /// re-derived in isolation and codebooks of different codes or users never
    /// share draws.
    pub fn generate_codebook(
        &self,
        index: usize,
        block_length: usize,
        seed: Seed,
    ) -> Result<Codebook, CodesError> {
        let code = self.code(index)?;
        let count = self.message_count(index, block_length)?;
        let user_word = self.user.index() as u64;
        let probs = code.input_dist.probs();
        let mut words = Vec::with_capacity(count);
        for w in 0..count {
            let mut word = Vec::with_capacity(block_length);
            for p in 0..block_length {
                let u = keyed_unit(
                    seed,
                    &[domain::CODEBOOK, user_word, index as u64, w as u64, p as u64],
                );
                word.push(sample_index(probs, u));
            }
            words.push(word);
        }
        Ok(Codebook {
            user: self.user,
            code_index: index,
            block_length,
            words,
        })
    }
}

/// A realized codebook: all codewords of one code at one block length.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    user: User,
    code_index: usize,
    block_length: usize,
    words: Vec<Vec<usize>>,
}

impl Codebook {
    /// The user the codebook belongs to.
    pub fn user(&self) -> User {
        self.user
    }

    /// The ensemble index of the realized code.
    pub fn code_index(&self) -> usize {
        self.code_index
    }

    /// The block length of every codeword.
    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Number of codewords.
    pub fn message_count(&self) -> usize {
        self.words.len()
    }

    /// The codeword for message `w`.
    pub fn word(&self, w: usize) -> &[usize] {
        &self.words[w]
    }
}

/// The receiver's full codebook view: one codebook per code per user.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    books: [Vec<Codebook>; 2],
}

impl CodebookSet {
    /// Generates every codebook of both ensembles at `block_length` under one
    /// seed.
    pub fn generate(
        ensembles: &[CodeEnsemble; 2],
        block_length: usize,
        seed: Seed,
    ) -> Result<CodebookSet, CodesError> {
        let mut books: [Vec<Codebook>; 2] = [Vec::new(), Vec::new()];
        for (slot, ensemble) in ensembles.iter().enumerate() {
            for index in 0..ensemble.len() {
                books[slot].push(ensemble.generate_codebook(index, block_length, seed)?);
            }
        }
        Ok(CodebookSet { books })
    }

    /// The codebook for `(user, code_index)`.
    pub fn book(&self, user: User, code_index: usize) -> &Codebook {
        &self.books[user.index()][code_index]
    }

    /// The codeword for message `w` under `(user, code_index)`.
    pub fn word(&self, user: User, code_index: usize, w: usize) -> &[usize] {
        self.book(user, code_index).word(w)
    }
}
