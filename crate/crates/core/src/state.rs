//! The 31-entry state vector.
//!
//! Layout (frozen; checkpoints record [`STATE_LAYOUT_VERSION`]):
//!
//! | index  | content                                                      |
//! |--------|--------------------------------------------------------------|
//! | 0, 1   | confidence of answer 1, answer 2                             |
//! | 2..=29 | for each feature i in 0..7: mean₁, max₁, mean₂, max₂ over refs |
//! | 30     | Levenshtein similarity between answer 1 and answer 2         |
//!
//! The knowledge block (2..=29) is all zeros when the reference set is empty.

use serde::{Deserialize, Serialize};

use crate::kg::ReferenceSet;
use crate::similarity::{l_sim, TextForms, FEATURE_COUNT};

pub const STATE_DIM: usize = 31;
pub const KG_BLOCK: std::ops::Range<usize> = 2..30;
pub const STATE_LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAnswer {
    pub text: String,
    pub confidence: f64,
}

impl CandidateAnswer {
    pub fn new(text: impl Into<String>, confidence: f64) -> Self {
        Self {
            text: text.into(),
            confidence,
        }
    }

    /// Stand-in for an article that yielded no extraction.
    pub fn absent() -> Self {
        Self::new("", 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn zero_kg_block(&mut self) {
        self.0[KG_BLOCK].fill(0.0);
    }
}

/// Mean and max of each pairwise feature between one answer and every
/// reference value; `[mean_0, max_0, mean_1, max_1, ...]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KgProfile(pub [f64; 2 * FEATURE_COUNT]);

impl KgProfile {
    pub fn mean(&self, feature: usize) -> f64 {
        self.0[2 * feature]
    }

    pub fn max(&self, feature: usize) -> f64 {
        self.0[2 * feature + 1]
    }
}

pub fn kg_profile(answer: &str, refs: &ReferenceSet) -> KgProfile {
    let forms: Vec<TextForms> = refs.values.iter().map(|v| TextForms::new(v)).collect();
    kg_profile_with(&TextForms::new(answer), &forms)
}

/// As [`kg_profile`] with the reference values already decoded.
pub fn kg_profile_with(answer: &TextForms, refs: &[TextForms]) -> KgProfile {
    let mut profile = KgProfile::default();
    if refs.is_empty() {
        return profile;
    }
    let rows: Vec<[f64; FEATURE_COUNT]> = refs.iter().map(|r| answer.features(r).0).collect();
    let n = refs.len() as f64;
    let mut column = Vec::with_capacity(rows.len());
    for i in 0..FEATURE_COUNT {
        column.clear();
        column.extend(rows.iter().map(|row| row[i]));
        // Summing in sorted order makes the mean bit-identical under any
        // ordering of the reference values.
        column.sort_by(f64::total_cmp);
        profile.0[2 * i] = column.iter().sum::<f64>() / n;
        profile.0[2 * i + 1] = column[column.len() - 1];
    }
    profile
}

pub fn embed(
    answer1: &CandidateAnswer,
    answer2: &CandidateAnswer,
    refs: &ReferenceSet,
) -> StateVector {
    assemble(
        answer1,
        &kg_profile(&answer1.text, refs),
        answer2,
        &kg_profile(&answer2.text, refs),
    )
}

/// Builds the state from precomputed per-answer profiles.
pub fn assemble(
    answer1: &CandidateAnswer,
    profile1: &KgProfile,
    answer2: &CandidateAnswer,
    profile2: &KgProfile,
) -> StateVector {
    let mut s = [0.0; STATE_DIM];
    s[0] = answer1.confidence;
    s[1] = answer2.confidence;
    for i in 0..FEATURE_COUNT {
        let base = KG_BLOCK.start + 4 * i;
        s[base] = profile1.mean(i);
        s[base + 1] = profile1.max(i);
        s[base + 2] = profile2.mean(i);
        s[base + 3] = profile2.max(i);
    }
    s[STATE_DIM - 1] = l_sim(&answer1.text, &answer2.text);
    StateVector(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::feature_vector;
    use proptest::prelude::*;

    #[test]
    fn gpu_example() {
        let a1 = CandidateAnswer::new("GV104", 0.25);
        let a2 = CandidateAnswer::new("RTX2080", 0.30);
        let refs = ReferenceSet::from_values("core code", ["GP104", "GM204"]);
        let s = embed(&a1, &a2, &refs).0;
        assert_eq!(s.len(), 31);
        assert_eq!(s[0], 0.25);
        assert_eq!(s[1], 0.30);
        // l_sim(GV104, GP104) = 0.8; GV104 → GM204 takes two substitutions
        // (V→M, 1→2), so l_sim = 0.6 and the mean is 0.7
        assert!((s[2] - 0.7).abs() < 1e-12);
        assert!((s[3] - 0.8).abs() < 1e-12);
        // distance(GV104, RTX2080) = 6 over length 7
        assert!((s[30] - (1.0 - 6.0 / 7.0)).abs() < 1e-12);
        assert_eq!(s[30], l_sim("GV104", "RTX2080"));
    }

    #[test]
    fn empty_refs_zero_the_kg_block() {
        let a1 = CandidateAnswer::new("GV104", 0.9);
        let a2 = CandidateAnswer::new("", 0.0);
        let s = embed(&a1, &a2, &ReferenceSet::empty("core code")).0;
        assert!(s[KG_BLOCK].iter().all(|&v| v == 0.0));
        assert_eq!(s[0], 0.9);
    }

    #[test]
    fn identical_answers_and_refs() {
        let a = CandidateAnswer::new("GP104", 0.7);
        let refs = ReferenceSet::from_values("core code", ["GP104"]);
        let s = embed(&a, &a, &refs).0;
        assert_eq!(s[30], 1.0);
        for base in [2, 3, 4, 5, 6, 7, 8, 9] {
            assert_eq!(s[base], 1.0, "entry {base}");
        }
    }

    #[test]
    fn layout_interleaves_mean_and_max_per_feature() {
        let a1 = CandidateAnswer::new("750 by 1334 Pixels", 0.1);
        let a2 = CandidateAnswer::new("GP104", 0.2);
        let refs = ReferenceSet::from_values("resolution", ["1080 by 1920 Pixels", "GP104"]);
        let s = embed(&a1, &a2, &refs).0;
        for i in 0..7 {
            let f1: Vec<f64> = refs
                .values
                .iter()
                .map(|r| feature_vector(&a1.text, r).0[i])
                .collect();
            let f2: Vec<f64> = refs
                .values
                .iter()
                .map(|r| feature_vector(&a2.text, r).0[i])
                .collect();
            let base = 2 + 4 * i;
            assert!((s[base] - (f1[0] + f1[1]) / 2.0).abs() < 1e-12);
            assert_eq!(s[base + 1], f1[0].max(f1[1]));
            assert!((s[base + 2] - (f2[0] + f2[1]) / 2.0).abs() < 1e-12);
            assert_eq!(s[base + 3], f2[0].max(f2[1]));
        }
    }

    fn arb_answer() -> impl Strategy<Value = CandidateAnswer> {
        ("[A-Z0-9 x]{0,8}", 0.0..=1.0f64).prop_map(|(t, c)| CandidateAnswer::new(t, c))
    }

    proptest! {
        #[test]
        fn swapping_answers_swaps_blocks(
            a1 in arb_answer(),
            a2 in arb_answer(),
            refs in proptest::collection::vec("[A-Z0-9]{0,6}", 0..5),
        ) {
            let refs = ReferenceSet::from_values("r", refs);
            let s = embed(&a1, &a2, &refs).0;
            let t = embed(&a2, &a1, &refs).0;
            prop_assert_eq!(s[0], t[1]);
            prop_assert_eq!(s[1], t[0]);
            for i in 0..7 {
                let b = 2 + 4 * i;
                prop_assert_eq!(&s[b..b + 2], &t[b + 2..b + 4]);
                prop_assert_eq!(&s[b + 2..b + 4], &t[b..b + 2]);
            }
            prop_assert_eq!(s[30], t[30]);
        }

        #[test]
        fn singleton_refs_mean_equals_max(a1 in arb_answer(), a2 in arb_answer(), r in "[A-Z0-9]{0,6}") {
            let refs = ReferenceSet::from_values("r", [r]);
            let s = embed(&a1, &a2, &refs).0;
            for i in 0..7 {
                let b = 2 + 4 * i;
                prop_assert_eq!(s[b], s[b + 1]);
                prop_assert_eq!(s[b + 2], s[b + 3]);
            }
        }

        #[test]
        fn reference_order_does_not_matter(
            a1 in arb_answer(),
            a2 in arb_answer(),
            refs in proptest::collection::vec("[A-Z0-9]{0,6}", 0..8),
        ) {
            let forward = ReferenceSet::from_values("r", refs.iter().cloned());
            let backward = ReferenceSet::from_values("r", refs.iter().rev().cloned());
            prop_assert_eq!(embed(&a1, &a2, &forward), embed(&a1, &a2, &backward));
        }
    }
}
