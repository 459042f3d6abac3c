//! Log-domain arithmetic shared by the decoders, the bound evaluators, and the
//! estimators.
//!
//! Two representations are used:
//!
//! - plain `f64` natural-log values with [`f64::NEG_INFINITY`] as the
//!   log-of-zero sentinel, accumulated with [`log_sum_exp`] where sums of
//!   probabilities are needed;
//! - a quantized integer form ([`QLog`]) used wherever two log-likelihoods are
//!   *compared* (decoder argmax and thresholds, rival-score tail events).
//!   Integer sums are independent of summation order, so a dynamic program, a
//!   brute-force enumeration, and the decoder itself reach bit-identical
//!   verdicts on ties — which carry positive probability on discrete channels
//!   and are part of the error accounting.

/// Log of zero: the additive identity killer in log-domain products.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// Quantized log-value: `round(x * 2^32)` with [`Q_LOG_ZERO`] as the
/// log-of-zero sentinel. At 2^-32 resolution, per-symbol log-probabilities
/// (|x| < 750) stay far inside `i64` range even when summed over millions of
/// positions.
pub type QLog = i64;

/// Sentinel for a quantized log of zero; absorbing under [`q_add`].
pub const Q_LOG_ZERO: QLog = i64::MIN;

const Q_SCALE: f64 = 4294967296.0; // 2^32

/// Quantizes a natural-log value to [`QLog`] resolution.
///
/// `f64::NEG_INFINITY` maps to [`Q_LOG_ZERO`]. Finite inputs this large do not
/// occur for log-probabilities (|log p| ≤ ~745 for normal `f64` p).
pub fn quantize(x: f64) -> QLog {
    if x == f64::NEG_INFINITY {
        Q_LOG_ZERO
    } else {
        debug_assert!(x.is_finite(), "cannot quantize {x}");
        (x * Q_SCALE).round() as QLog
    }
}

/// Returns the quantized value as a plain natural-log `f64` (for display).
pub fn dequantize(q: QLog) -> f64 {
    if q == Q_LOG_ZERO {
        LOG_ZERO
    } else {
        q as f64 / Q_SCALE
    }
}

/// Adds two quantized log-values (i.e. multiplies the underlying weights);
/// absorbing on [`Q_LOG_ZERO`].
pub fn q_add(a: QLog, b: QLog) -> QLog {
    if a == Q_LOG_ZERO || b == Q_LOG_ZERO {
        Q_LOG_ZERO
    } else {
        let s = a + b;
        debug_assert!(s > i64::MIN / 2, "quantized log sum underflow");
        s
    }
}

/// Sums a sequence of quantized log-values; absorbing on [`Q_LOG_ZERO`].
pub fn q_sum(values: impl IntoIterator<Item = QLog>) -> QLog {
    let mut acc: QLog = 0;
    for v in values {
        acc = q_add(acc, v);
        if acc == Q_LOG_ZERO {
            return Q_LOG_ZERO;
        }
    }
    acc
}

/// Numerically stable `log(exp(a) + exp(b))`.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        b
    } else if b == LOG_ZERO {
        a
    } else if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Accumulates a sum of nonnegative quantities in the log domain.
///
/// Feed in natural-log values; read back either the log total or the linear
/// total. Used for bound totals so that many tiny terms do not round away
/// against an early large one.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    log_total: f64,
}

impl LogAccumulator {
    /// An empty sum (log-total `-inf`, linear total 0).
    pub fn new() -> Self {
        LogAccumulator { log_total: LOG_ZERO }
    }

    /// Adds a term given its natural log.
    pub fn add_log(&mut self, log_term: f64) {
        self.log_total = log_sum_exp(self.log_total, log_term);
    }

    /// Adds a term given linearly; nonpositive terms are ignored.
    pub fn add_linear(&mut self, term: f64) {
        if term > 0.0 {
            self.add_log(term.ln());
        }
    }

    /// Natural log of the accumulated sum.
    pub fn log_total(&self) -> f64 {
        self.log_total
    }

    /// The accumulated sum, linear.
    pub fn total(&self) -> f64 {
        self.log_total.exp()
    }
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}
