//! Canonical system fingerprints for report provenance checks.
//!
//! Every bound report and every simulation estimate carries a fingerprint of
//! the *system core* it was computed for: the channel, the code ensembles,
//! the base region partition with its priors, the block length, and (for
//! frame-asynchronous systems) the frame layout. Comparing a bound against an
//! estimate is only meaningful when both fingerprints agree, so the
//! comparison API refuses mismatched inputs.
//!
//! Deliberately *excluded* from the fingerprint: sub-decoder region subsets
//! and evaluation knobs (seeds, sample counts, state caps). A
//! decoder-splitting bound and a synthesized-receiver estimate describe the
//! same system, and their comparison must not be blocked by the split choice;
//! evaluation knobs affect precision, not identity.
//!
//! Floating-point values enter the canonical document as exact IEEE-754 bit
//! patterns, so any change in a probability — however small — changes the
//! fingerprint, and equal systems hash equally on every platform.

use std::fmt::Display;
use std::fmt::Write as _;

use crate::channel::{Channel, User};
use crate::codes::CodeEnsemble;
use crate::decoder::SyncContext;
use crate::frame_async::AsyncContext;
use crate::regions::RegionPartition;

/// 64-bit FNV-1a hash of a canonical document, as 16 lowercase hex digits.
pub fn fnv1a64_hex(doc: &str) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in doc.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    format!("{h:016x}")
}

fn push_f64(doc: &mut String, v: f64) {
    let _ = write!(doc, "{:016x}", v.to_bits());
}

/// Appends the channel's canonical lines: alphabets, idle symbols, and the
/// full transition table in fixed iteration order.
pub(crate) fn push_channel(doc: &mut String, ch: &Channel) {
    let _ = write!(
        doc,
        "channel x1={} x2={} y={} idle1={} idle2={}\n",
        ch.x1_alphabet(),
        ch.x2_alphabet(),
        ch.y_alphabet(),
        ch.idle_symbol(User::One).map_or("-".to_string(), |s| s.to_string()),
        ch.idle_symbol(User::Two).map_or("-".to_string(), |s| s.to_string()),
    );
    doc.push_str("transition ");
    for x1 in 0..ch.x1_alphabet() {
        for x2 in 0..ch.x2_alphabet() {
            for y in 0..ch.y_alphabet() {
                push_f64(doc, ch.prob(x1, x2, y));
                doc.push(' ');
            }
        }
    }
    doc.push('\n');
}

/// Appends one ensemble's canonical lines: per code, the kind, rate, and
/// input distribution.
pub(crate) fn push_ensemble(doc: &mut String, ensemble: &CodeEnsemble) {
    for (i, code) in ensemble.codes().iter().enumerate() {
        let _ = write!(
            doc,
            "code user={} index={i} kind={} rate=",
            ensemble.user().index() + 1,
            if code.is_idle() { "idle" } else { "active" },
        );
        push_f64(doc, code.rate());
        doc.push_str(" dist=");
        for &p in code.input_dist().probs() {
            push_f64(doc, p);
            doc.push(' ');
        }
        doc.push('\n');
    }
}

/// Appends the base partition's canonical lines: every selection in sorted
/// order with its region and prior.
pub(crate) fn push_partition<G: Ord + Clone + Display>(
    doc: &mut String,
    partition: &RegionPartition<G>,
) {
    for (g, prior) in partition.selections() {
        let region = partition
            .kind_of(g)
            .expect("validated partitions region every selection");
        let _ = write!(doc, "selection g={g} region={region} prior=");
        push_f64(doc, prior);
        doc.push('\n');
    }
}

/// Fingerprint of a slot-synchronous system core: channel, both ensembles,
/// base partition with priors, and block length.
pub fn sync_fingerprint(ctx: &SyncContext, n: usize) -> String {
    let mut doc = String::new();
    let _ = write!(doc, "sync n={n}\n");
    push_channel(&mut doc, ctx.channel);
    push_ensemble(&mut doc, &ctx.ensembles[0]);
    push_ensemble(&mut doc, &ctx.ensembles[1]);
    push_partition(&mut doc, ctx.partition);
    fnv1a64_hex(&doc)
}

/// Fingerprint of a frame-asynchronous system core: channel, both ensembles,
/// the partition over full coding vectors with priors, and the frame layout
/// (per-codeword block length, packets per user, offset).
pub fn async_fingerprint(ctx: &AsyncContext) -> String {
    let mut doc = String::new();
    let _ = write!(
        doc,
        "async n={} l={} t2={}\n",
        ctx.layout.n(),
        ctx.layout.l(),
        ctx.layout.t2(),
    );
    push_channel(&mut doc, ctx.channel);
    push_ensemble(&mut doc, &ctx.ensembles[0]);
    push_ensemble(&mut doc, &ctx.ensembles[1]);
    push_partition(&mut doc, ctx.partition);
    fnv1a64_hex(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SymbolDistribution;
    use crate::codes::Code;
    use crate::regions::CodingVector;
    use std::collections::BTreeSet;

    fn system(flip: f64) -> (Channel, [CodeEnsemble; 2], RegionPartition<CodingVector>) {
        let channel = Channel::binary_xor(flip);
        let mk = |user| {
            CodeEnsemble::new(
                user,
                vec![
                    Code::active(SymbolDistribution::uniform(2), 0.25),
                    Code::active(SymbolDistribution::uniform(2), 0.5),
                ],
            )
        };
        let pair_set = |pairs: &[(usize, usize)]| -> BTreeSet<CodingVector> {
            pairs.iter().map(|&(a, b)| CodingVector::new(a, b)).collect()
        };
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0), (1, 1)]),
            pair_set(&[(0, 1)]),
            pair_set(&[(1, 0)]),
        )
        .unwrap();
        (channel, [mk(User::One), mk(User::Two)], partition)
    }

    #[test]
    fn known_hash_values_are_stable() {
        // Standard FNV-1a 64 test vectors.
        assert_eq!(fnv1a64_hex(""), "cbf29ce484222325");
        assert_eq!(fnv1a64_hex("a"), "af63dc4c8601ec8c");
        assert_eq!(fnv1a64_hex("foobar"), "85944171f73967e8");
    }

    #[test]
    fn equal_systems_hash_equal_and_changes_show() {
        let (ch_a, en_a, pa_a) = system(0.1);
        let (ch_b, en_b, pa_b) = system(0.1);
        let fp_a = sync_fingerprint(
            &SyncContext { channel: &ch_a, ensembles: &en_a, partition: &pa_a },
            4,
        );
        let fp_b = sync_fingerprint(
            &SyncContext { channel: &ch_b, ensembles: &en_b, partition: &pa_b },
            4,
        );
        assert_eq!(fp_a, fp_b, "independently built equal systems must agree");

        let fp_n = sync_fingerprint(
            &SyncContext { channel: &ch_a, ensembles: &en_a, partition: &pa_a },
            8,
        );
        assert_ne!(fp_a, fp_n, "block length is part of the identity");

        let (ch_c, en_c, pa_c) = system(0.1 + 1e-15);
        let fp_c = sync_fingerprint(
            &SyncContext { channel: &ch_c, ensembles: &en_c, partition: &pa_c },
            4,
        );
        assert_ne!(fp_a, fp_c, "any bit-level probability change must show");
    }
}
