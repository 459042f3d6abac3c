//! Region partitions over code selections and their sub-decoder refinements.
//!
//! The selection space (pairs of codes in the slot-synchronous case, per-packet
//! code maps in the frame-asynchronous case) is partitioned into three
//! regions by what the receiver owes:
//!
//! - **operation**: the receiver must decode,
//! - **margin**: decoding and reporting a collision are both acceptable,
//! - **collision**: the receiver must report a collision.
//!
//! A [`RegionPartition`] carries the three sets plus selection priors. Each
//! sub-decoder commits to decoding only on a subset of the operation region
//! and works against a [`SubDecoderRegions`] triple: [`derive_d12_regions`]
//! builds the joint decoder's triple (uncommitted operation selections join
//! its margin), [`derive_d1_regions`] builds the single-user decoder's triple
//! (the joint decoder's subset joins its margin), and the collision region
//! carries over unchanged in both.
//!
//! The module is generic over the selection type `G`; it only needs a total
//! order (used everywhere for deterministic iteration and tie-breaking) and a
//! display form for error messages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for prior normalization.
pub const PRIOR_TOLERANCE: f64 = 1e-12;

/// Errors from partition construction and refinement.
#[derive(Debug, Error)]
pub enum RegionsError {
    /// A selection appears in two regions.
    #[error("selection {vector} appears in both the {first} and {second} regions")]
    OverlappingRegions { vector: String, first: &'static str, second: &'static str },
    /// The prior map's key set differs from the union of the regions.
    #[error("priors must cover exactly the partitioned selections: {detail}")]
    PriorKeyMismatch { detail: String },
    /// A prior is negative or non-finite.
    #[error("prior of {vector} is {value} (must be finite and >= 0)")]
    BadPrior { vector: String, value: f64 },
    /// Priors do not sum to 1 within tolerance.
    #[error("priors sum to {sum:.17} (must be 1 within 1e-12)")]
    PriorsNotNormalized { sum: f64 },
    /// The partition has no selections at all.
    #[error("partition covers no selections")]
    Empty,
    /// A sub-decoder restriction set leaves the operation region.
    #[error("restriction contains {vector}, which is not in the operation region")]
    RestrictionOutsideOperation { vector: String },
    /// The two sub-decoder restriction sets claim the same selection.
    #[error("restrictions overlap at {vector}: a selection cannot be owed by both sub-decoders")]
    RestrictionsOverlap { vector: String },
}

/// The three receiver obligations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// Must decode.
    Operation,
    /// Either decode correctly or report a collision.
    Margin,
    /// Must report a collision.
    Collision,
}

impl Display for RegionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegionKind::Operation => write!(f, "operation"),
            RegionKind::Margin => write!(f, "margin"),
            RegionKind::Collision => write!(f, "collision"),
        }
    }
}

/// A pair of code selections for the slot-synchronous case: user 1's code
/// index and user 2's code index.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct CodingVector {
    /// User 1's code index.
    pub g1: usize,
    /// User 2's code index.
    pub g2: usize,
}

impl CodingVector {
    /// Builds a pair from the two code indices.
    pub fn new(g1: usize, g2: usize) -> CodingVector {
        CodingVector { g1, g2 }
    }
}

impl From<[usize; 2]> for CodingVector {
    fn from([g1, g2]: [usize; 2]) -> Self {
        CodingVector { g1, g2 }
    }
}

impl From<CodingVector> for [usize; 2] {
    fn from(p: CodingVector) -> Self {
        [p.g1, p.g2]
    }
}

impl Display for CodingVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.g1, self.g2)
    }
}

/// A full partition of the selection space with selection priors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition<G: Ord> {
    operation: BTreeSet<G>,
    margin: BTreeSet<G>,
    collision: BTreeSet<G>,
    priors: BTreeMap<G, f64>,
}

fn check_disjoint<G: Ord + Display>(
    a: (&BTreeSet<G>, &'static str),
    b: (&BTreeSet<G>, &'static str),
) -> Result<(), RegionsError> {
    if let Some(v) = a.0.intersection(b.0).next() {
        return Err(RegionsError::OverlappingRegions {
            vector: v.to_string(),
            first: a.1,
            second: b.1,
        });
    }
    Ok(())
}

impl<G: Ord + Clone + Display> RegionPartition<G> {
    /// Builds and validates a partition: the regions must be pairwise
    /// disjoint, the priors must range exactly over their union, be
    /// nonnegative, and sum to 1 within [`PRIOR_TOLERANCE`].
    pub fn new(
        operation: BTreeSet<G>,
        margin: BTreeSet<G>,
        collision: BTreeSet<G>,
        priors: BTreeMap<G, f64>,
    ) -> Result<Self, RegionsError> {
        check_disjoint((&operation, "operation"), (&margin, "margin"))?;
        check_disjoint((&operation, "operation"), (&collision, "collision"))?;
        check_disjoint((&margin, "margin"), (&collision, "collision"))?;
        let mut all: BTreeSet<G> = BTreeSet::new();
        all.extend(operation.iter().cloned());
        all.extend(margin.iter().cloned());
        all.extend(collision.iter().cloned());
        if all.is_empty() {
            return Err(RegionsError::Empty);
        }
        if all.len() != priors.len() || !all.iter().all(|g| priors.contains_key(g)) {
            let missing: Vec<String> = all
                .iter()
                .filter(|g| !priors.contains_key(g))
                .map(|g| g.to_string())
                .collect();
            let extra: Vec<String> = priors
                .keys()
                .filter(|g| !all.contains(g))
                .map(|g| g.to_string())
                .collect();
            return Err(RegionsError::PriorKeyMismatch {
                detail: format!("missing priors for [{}], extra priors for [{}]",
                    missing.join(", "), extra.join(", ")),
            });
        }
        for (g, &p) in &priors {
            if !p.is_finite() || p < 0.0 {
                return Err(RegionsError::BadPrior { vector: g.to_string(), value: p });
            }
        }
        let sum: f64 = priors.values().sum();
        if (sum - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(RegionsError::PriorsNotNormalized { sum });
        }
        Ok(RegionPartition { operation, margin, collision, priors })
    }

    /// Builds a partition with uniform priors over all partitioned selections.
    pub fn with_uniform_priors(
        operation: BTreeSet<G>,
        margin: BTreeSet<G>,
        collision: BTreeSet<G>,
    ) -> Result<Self, RegionsError> {
        let mut all: BTreeSet<G> = BTreeSet::new();
        all.extend(operation.iter().cloned());
        all.extend(margin.iter().cloned());
        all.extend(collision.iter().cloned());
        if all.is_empty() {
            return Err(RegionsError::Empty);
        }
        let p = 1.0 / all.len() as f64;
        let priors = all.iter().cloned().map(|g| (g, p)).collect();
        RegionPartition::new(operation, margin, collision, priors)
    }

    /// The operation region (must decode).
    pub fn operation(&self) -> &BTreeSet<G> {
        &self.operation
    }

    /// The margin region (either outcome acceptable).
    pub fn margin(&self) -> &BTreeSet<G> {
        &self.margin
    }

    /// The collision region (must report a collision).
    pub fn collision(&self) -> &BTreeSet<G> {
        &self.collision
    }

    /// Which region a selection lies in, if partitioned at all.
    pub fn kind_of(&self, g: &G) -> Option<RegionKind> {
        if self.operation.contains(g) {
            Some(RegionKind::Operation)
        } else if self.margin.contains(g) {
            Some(RegionKind::Margin)
        } else if self.collision.contains(g) {
            Some(RegionKind::Collision)
        } else {
            None
        }
    }

    /// The prior of a partitioned selection (0 for unknown selections).
    pub fn prior(&self, g: &G) -> f64 {
        self.priors.get(g).copied().unwrap_or(0.0)
    }

    /// All partitioned selections in sorted order with their priors.
    pub fn selections(&self) -> impl Iterator<Item = (&G, f64)> {
        self.priors.iter().map(|(g, &p)| (g, p))
    }

    /// Number of partitioned selections.
    pub fn len(&self) -> usize {
        self.priors.len()
    }

    /// Whether the partition is empty (never true for a validated partition).
    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }
}

/// The region triple one sub-decoder works against.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDecoderRegions<G: Ord> {
    operation: BTreeSet<G>,
    margin: BTreeSet<G>,
    collision: BTreeSet<G>,
}

impl<G: Ord + Clone + Display> SubDecoderRegions<G> {
    /// Derives the regions for a sub-decoder that commits to decode exactly on
    /// `operation_subset`: the rest of the base operation region becomes
    /// margin for this sub-decoder (another sub-decoder owes it), and the
    /// collision region carries over. Fails if the subset strays outside the
    /// base operation region.
    ///
    /// This is the generic restriction rule: [`derive_d12_regions`] is the
    /// named slot-synchronous entry point, and the frame-asynchronous
    /// decoders reuse it over their own selection type.
    pub fn restrict_to(
        partition: &RegionPartition<G>,
        operation_subset: &BTreeSet<G>,
    ) -> Result<Self, RegionsError> {
        if let Some(v) = operation_subset.difference(&partition.operation).next() {
            return Err(RegionsError::RestrictionOutsideOperation { vector: v.to_string() });
        }
        let mut margin = partition.margin.clone();
        for g in partition.operation.difference(operation_subset) {
            margin.insert(g.clone());
        }
        Ok(SubDecoderRegions {
            operation: operation_subset.clone(),
            margin,
            collision: partition.collision.clone(),
        })
    }

    /// Assembles a region triple directly (used by tests and by derivations
    /// that already hold the three sets).
    pub fn from_parts(
        operation: BTreeSet<G>,
        margin: BTreeSet<G>,
        collision: BTreeSet<G>,
    ) -> Self {
        SubDecoderRegions { operation, margin, collision }
    }

    /// The sub-decoder's operation region.
    pub fn operation(&self) -> &BTreeSet<G> {
        &self.operation
    }

    /// The sub-decoder's margin region.
    pub fn margin(&self) -> &BTreeSet<G> {
        &self.margin
    }

    /// The sub-decoder's collision region.
    pub fn collision(&self) -> &BTreeSet<G> {
        &self.collision
    }

    /// Margin and collision selections in sorted order (the sets every
    /// decoding threshold quantifies over).
    pub fn outside(&self) -> impl Iterator<Item = &G> {
        self.margin.iter().chain(self.collision.iter())
    }
}

/// Derives the joint decoder's regions: it commits to decode exactly on
/// `r12`, so the rest of the base operation region joins its margin and the
/// collision region carries over. Fails if `r12` strays outside the base
/// operation region.
pub fn derive_d12_regions<G: Ord + Clone + Display>(
    base: &RegionPartition<G>,
    r12: &BTreeSet<G>,
) -> Result<SubDecoderRegions<G>, RegionsError> {
    SubDecoderRegions::restrict_to(base, r12)
}

/// Derives the single-user decoder's regions: it commits to decode user 1's
/// message exactly on `r1`, the joint decoder's subset `r12` joins its margin
/// (the joint decoder owes those selections), and the collision region
/// carries over. Requires `r1` inside the base operation region and disjoint
/// from `r12`.
///
/// Operation selections claimed by neither subset land in no region of the
/// result: neither sub-decoder owes them, which is sound for bounding but
/// leaves the receiver's obligation there uncovered. The decoder-splitting
/// search therefore only uses subset pairs that cover the operation region
/// exactly.
pub fn derive_d1_regions<G: Ord + Clone + Display>(
    base: &RegionPartition<G>,
    r12: &BTreeSet<G>,
    r1: &BTreeSet<G>,
) -> Result<SubDecoderRegions<G>, RegionsError> {
    if let Some(v) = r1.difference(base.operation()).next() {
        return Err(RegionsError::RestrictionOutsideOperation { vector: v.to_string() });
    }
    if let Some(v) = r1.intersection(r12).next() {
        return Err(RegionsError::RestrictionsOverlap { vector: v.to_string() });
    }
    let mut margin = base.margin().clone();
    margin.extend(r12.iter().cloned());
    Ok(SubDecoderRegions {
        operation: r1.clone(),
        margin,
        collision: base.collision().clone(),
    })
}

/// A component constraint selecting part of an operation region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceConstraint {
    /// No constraint: the whole operation region.
    None,
    /// Keep selections whose user-1 code index equals the given value.
    FixedG1(usize),
    /// Keep selections whose user-2 code index equals the given value.
    FixedG2(usize),
}

/// The subset of a sub-decoder's operation region matching a component
/// constraint. The cardinalities of these slices cap the candidate-count
/// terms in the error bounds (a rival sharing user 1's code competes only
/// against the same-code slice).
pub fn region_slice(
    regions: &SubDecoderRegions<CodingVector>,
    constraint: SliceConstraint,
) -> BTreeSet<CodingVector> {
    regions
        .operation()
        .iter()
        .filter(|g| match constraint {
            SliceConstraint::None => true,
            SliceConstraint::FixedG1(v) => g.g1 == v,
            SliceConstraint::FixedG2(v) => g.g2 == v,
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_set(pairs: &[(usize, usize)]) -> BTreeSet<CodingVector> {
        pairs.iter().map(|&(a, b)| CodingVector::new(a, b)).collect()
    }

    #[test]
    fn restriction_moves_uncovered_operation_selections_to_margin() {
        // Base: operation {a=(0,0), b=(0,1)}, margin {c=(1,0)}, collision {d=(1,1)};
        // restricting to {a} must give operation {a}, margin {b, c}, collision {d}.
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0), (0, 1)]),
            pair_set(&[(1, 0)]),
            pair_set(&[(1, 1)]),
        )
        .unwrap();
        let sub =
            SubDecoderRegions::restrict_to(&partition, &pair_set(&[(0, 0)])).unwrap();
        assert_eq!(sub.operation(), &pair_set(&[(0, 0)]));
        assert_eq!(sub.margin(), &pair_set(&[(0, 1), (1, 0)]));
        assert_eq!(sub.collision(), &pair_set(&[(1, 1)]));
    }

    #[test]
    fn restriction_rejects_selections_outside_operation() {
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0)]),
            pair_set(&[(0, 1)]),
            pair_set(&[(1, 1)]),
        )
        .unwrap();
        let err =
            SubDecoderRegions::restrict_to(&partition, &pair_set(&[(0, 1)])).unwrap_err();
        assert!(
            matches!(err, RegionsError::RestrictionOutsideOperation { .. }),
            "got {err}"
        );
    }

    #[test]
    fn empty_restriction_is_allowed() {
        // A sub-decoder may decode nowhere; everything it owned becomes margin.
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0), (1, 1)]),
            BTreeSet::new(),
            pair_set(&[(1, 0)]),
        )
        .unwrap();
        let sub = SubDecoderRegions::restrict_to(&partition, &BTreeSet::new()).unwrap();
        assert!(sub.operation().is_empty());
        assert_eq!(sub.margin(), &pair_set(&[(0, 0), (1, 1)]));
    }

    #[test]
    fn validation_rejects_overlap_and_bad_priors() {
        let err = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0)]),
            pair_set(&[(0, 0)]),
            BTreeSet::new(),
        )
        .unwrap_err();
        assert!(matches!(err, RegionsError::OverlappingRegions { .. }), "got {err}");

        let mut priors = BTreeMap::new();
        priors.insert(CodingVector::new(0, 0), 0.6);
        priors.insert(CodingVector::new(0, 1), 0.6);
        let err = RegionPartition::new(
            pair_set(&[(0, 0)]),
            pair_set(&[(0, 1)]),
            BTreeSet::new(),
            priors,
        )
        .unwrap_err();
        assert!(matches!(err, RegionsError::PriorsNotNormalized { .. }), "got {err}");

        let mut priors = BTreeMap::new();
        priors.insert(CodingVector::new(0, 0), 1.0);
        let err = RegionPartition::new(
            pair_set(&[(0, 0)]),
            pair_set(&[(0, 1)]),
            BTreeSet::new(),
            priors,
        )
        .unwrap_err();
        assert!(matches!(err, RegionsError::PriorKeyMismatch { .. }), "got {err}");
    }

    #[test]
    fn slice_fixing_one_component() {
        let regions = SubDecoderRegions::from_parts(
            pair_set(&[(0, 0), (0, 1), (1, 1)]),
            BTreeSet::new(),
            BTreeSet::new(),
        );
        assert_eq!(
            region_slice(&regions, SliceConstraint::None),
            pair_set(&[(0, 0), (0, 1), (1, 1)])
        );
        assert_eq!(
            region_slice(&regions, SliceConstraint::FixedG1(0)),
            pair_set(&[(0, 0), (0, 1)])
        );
        assert_eq!(
            region_slice(&regions, SliceConstraint::FixedG2(1)),
            pair_set(&[(0, 1), (1, 1)])
        );
        // A value absent from the operation region slices to the empty set.
        assert!(region_slice(&regions, SliceConstraint::FixedG2(7)).is_empty());
    }

    #[test]
    fn joint_decoder_regions_follow_the_restriction_formula() {
        // Base: operation {a=(0,0), b=(0,1)}, margin {c=(1,0)}, collision {d=(1,1)}.
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0), (0, 1)]),
            pair_set(&[(1, 0)]),
            pair_set(&[(1, 1)]),
        )
        .unwrap();

        // r12 = {a}: operation {a}, margin {b, c}, collision {d}.
        let sub = derive_d12_regions(&partition, &pair_set(&[(0, 0)])).unwrap();
        assert_eq!(sub.operation(), &pair_set(&[(0, 0)]));
        assert_eq!(sub.margin(), &pair_set(&[(0, 1), (1, 0)]));
        assert_eq!(sub.collision(), &pair_set(&[(1, 1)]));

        // r12 = whole operation region: margin unchanged.
        let sub = derive_d12_regions(&partition, &pair_set(&[(0, 0), (0, 1)])).unwrap();
        assert_eq!(sub.margin(), &pair_set(&[(1, 0)]));

        // r12 = empty: margin absorbs the whole operation region.
        let sub = derive_d12_regions(&partition, &BTreeSet::new()).unwrap();
        assert!(sub.operation().is_empty());
        assert_eq!(sub.margin(), &pair_set(&[(0, 0), (0, 1), (1, 0)]));
    }

    #[test]
    fn single_decoder_margin_absorbs_the_joint_subset() {
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0), (0, 1)]),
            pair_set(&[(1, 0)]),
            pair_set(&[(1, 1)]),
        )
        .unwrap();

        // r12 = {a}, r1 = {b}: operation {b}, margin = base margin ∪ {a}.
        let sub = derive_d1_regions(
            &partition,
            &pair_set(&[(0, 0)]),
            &pair_set(&[(0, 1)]),
        )
        .unwrap();
        assert_eq!(sub.operation(), &pair_set(&[(0, 1)]));
        assert_eq!(sub.margin(), &pair_set(&[(0, 0), (1, 0)]));
        assert_eq!(sub.collision(), &pair_set(&[(1, 1)]));

        // r12 = whole operation region forces r1 = ∅ and the margin absorbs
        // everything the receiver could decode.
        let sub = derive_d1_regions(
            &partition,
            &pair_set(&[(0, 0), (0, 1)]),
            &BTreeSet::new(),
        )
        .unwrap();
        assert!(sub.operation().is_empty());
        assert_eq!(sub.margin(), &pair_set(&[(0, 0), (0, 1), (1, 0)]));
    }

    #[test]
    fn single_decoder_restriction_conflicts_are_rejected() {
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0), (0, 1)]),
            pair_set(&[(1, 0)]),
            pair_set(&[(1, 1)]),
        )
        .unwrap();

        let err = derive_d1_regions(
            &partition,
            &pair_set(&[(0, 0)]),
            &pair_set(&[(0, 0)]),
        )
        .unwrap_err();
        assert!(matches!(err, RegionsError::RestrictionsOverlap { .. }), "got {err}");

        let err = derive_d1_regions(
            &partition,
            &pair_set(&[(0, 0)]),
            &pair_set(&[(1, 0)]),
        )
        .unwrap_err();
        assert!(
            matches!(err, RegionsError::RestrictionOutsideOperation { .. }),
            "got {err}"
        );
    }

    #[test]
    fn kind_and_prior_lookups() {
        let partition = RegionPartition::with_uniform_priors(
            pair_set(&[(0, 0)]),
            pair_set(&[(0, 1)]),
            pair_set(&[(1, 0), (1, 1)]),
        )
        .unwrap();
        assert_eq!(partition.kind_of(&CodingVector::new(0, 0)), Some(RegionKind::Operation));
        assert_eq!(partition.kind_of(&CodingVector::new(0, 1)), Some(RegionKind::Margin));
        assert_eq!(partition.kind_of(&CodingVector::new(1, 1)), Some(RegionKind::Collision));
        assert_eq!(partition.kind_of(&CodingVector::new(9, 9)), None);
        assert!((partition.prior(&CodingVector::new(1, 0)) - 0.25).abs() < 1e-15);
        assert_eq!(partition.prior(&CodingVector::new(9, 9)), 0.0);
        assert_eq!(partition.len(), 4);
    }

    #[test]
    fn code_pair_ordering_is_lexicographic() {
        let mut v = vec![
            CodingVector::new(1, 0),
            CodingVector::new(0, 1),
            CodingVector::new(0, 0),
            CodingVector::new(1, 1),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                CodingVector::new(0, 0),
                CodingVector::new(0, 1),
                CodingVector::new(1, 0),
                CodingVector::new(1, 1),
            ]
        );
    }

    #[test]
    fn code_pair_serializes_as_an_index_array() {
        let p = CodingVector::new(2, 5);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[2,5]");
        let back: CodingVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
