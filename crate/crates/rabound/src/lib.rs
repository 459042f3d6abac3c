//! Receiver models and error-probability bounds for two-user random access
//! over a discrete memoryless multiple-access channel.
//!
//! Each of two users picks a code (an input distribution plus a rate, possibly
//! the idle code) from its own finite ensemble; the receiver knows both
//! ensembles and the codebook seeds but not which codes were picked. Depending
//! on the picked pair, the receiver must either decode user 1's message or
//! report a collision. This crate provides:
//!
//! - the channel and code-ensemble model ([`channel`], [`codes`]),
//! - region partitions over code pairs and their sub-decoder refinements
//!   ([`regions`]),
//! - threshold-guarded maximum weighted-likelihood decoders for the
//!   slot-synchronous case ([`decoder`]) and the frame-asynchronous case
//!   ([`frame_async`]),
//! - computable upper bounds on the generalized error performance (GEP) — the
//!   prior-weighted sum of region-dependent conditional error probabilities —
//!   for each decoder ([`bounds`], [`frame_async`]), with exact
//!   dynamic-programming evaluation where feasible and seeded Monte Carlo
//!   elsewhere ([`termeval`]),
//! - stratified Monte Carlo and exhaustive estimators of the operational GEP
//!   plus bound-vs-estimate comparison ([`estimator`]),
//! - a serializable experiment configuration layer shared with the command-line
//!   front end ([`config`]).
//!
//! All randomness flows through a counter-based keyed generator ([`rng`]), so
//! every artifact is reproducible from a master seed; all likelihood
//! comparisons run in a quantized integer log-domain ([`logdomain`]) so that
//! tie handling is exact and independent of summation order. Reports carry a
//! fingerprint of the system they were computed for ([`fingerprint`]), and
//! bound-vs-estimate comparisons refuse mismatched fingerprints.

pub mod bounds;
pub mod channel;
pub mod codes;
pub mod config;
pub mod decoder;
pub mod estimator;
pub mod fingerprint;
pub mod frame_async;
pub mod logdomain;
pub mod reference;
pub mod regions;
pub mod rng;
pub mod termeval;
