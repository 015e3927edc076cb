//! Seeded generator for desk-scale benchmarks: a knowledge graph of entities
//! grouped into categories, plus train/test episodes whose candidate answers
//! mix the true value with near misses, sibling values and off-format noise.
//!
//! Value grammars are tiny: `D` is a random digit, `L` a random uppercase
//! letter, anything else is literal. `"LLDDD"` yields codes like `GP104`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeRecord, PreparedEpisode};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::kg::{to_jsonl, CategoryRecord, Triplet};
use crate::state::CandidateAnswer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributePattern {
    pub attribute: String,
    pub pattern: String,
}

impl AttributePattern {
    pub fn new(attribute: impl Into<String>, pattern: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            pattern: pattern.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub attributes: Vec<AttributePattern>,
    /// Most-specific categories within the field.
    pub categories: usize,
    /// Entities whose triplets become training episodes.
    pub train_entities: usize,
    pub test_entities: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub fields: Vec<FieldSpec>,
    /// KG-only entities per category; these supply the reference values.
    pub background_per_category: usize,
    /// Candidate answers per episode (M).
    pub max_answers: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        let field = |name: &str, attribute: &str, pattern: &str| FieldSpec {
            name: name.into(),
            attributes: vec![AttributePattern::new(attribute, pattern)],
            categories: 5,
            train_entities: 250,
            test_entities: 75,
        };
        Self {
            fields: vec![
                field("gpu", "core code", "LLDDD"),
                field("game", "engine version", "LLLLL D.D"),
                field("movie", "release date", "DD/DD/DDDD"),
                field("phone", "display resolution", "DDD by DDDD Pixels"),
            ],
            background_per_category: 8,
            max_answers: 10,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_answers < 2 {
            return Err(Error::Config(format!(
                "max_answers must be at least 2, got {}",
                self.max_answers
            )));
        }
        if self.fields.is_empty() {
            return Err(Error::Config("dataset needs at least one field".into()));
        }
        for f in &self.fields {
            if f.name.is_empty() {
                return Err(Error::Config("field with an empty name".into()));
            }
            if f.attributes.is_empty() {
                return Err(Error::Config(format!(
                    "field {:?} has no attribute patterns",
                    f.name
                )));
            }
            if f.categories == 0 {
                return Err(Error::Config(format!(
                    "field {:?} has no categories",
                    f.name
                )));
            }
            for a in &f.attributes {
                if a.attribute.is_empty() {
                    return Err(Error::Config(format!(
                        "field {:?} has an unnamed attribute",
                        f.name
                    )));
                }
                if a.pattern.is_empty() {
                    return Err(Error::Config(format!(
                        "field {:?} attribute {:?} has an empty pattern",
                        f.name, a.attribute
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Probability that the true value is among the M answers.
    pub p_correct_present: f64,
    /// Per-character mutation probability for near-miss answers.
    pub corruption_rate: f64,
    /// Relative weights of the distractor kinds.
    pub near_miss_weight: f64,
    pub sibling_weight: f64,
    pub off_pattern_weight: f64,
    /// 0 gives disjoint bands (correct in [0.5, 1], distractors in [0, 0.5]);
    /// 1 gives both the full [0, 1].
    pub confidence_overlap: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            p_correct_present: 0.7,
            corruption_rate: 0.3,
            near_miss_weight: 0.2,
            sibling_weight: 0.3,
            off_pattern_weight: 0.5,
            confidence_overlap: 0.6,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_correct_present", self.p_correct_present),
            ("corruption_rate", self.corruption_rate),
            ("confidence_overlap", self.confidence_overlap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let weights = [
            self.near_miss_weight,
            self.sibling_weight,
            self.off_pattern_weight,
        ];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config(
                "distractor weights must be >= 0 with a positive sum".into(),
            ));
        }
        Ok(())
    }

    /// `(correct band, distractor band)`.
    pub fn bands(&self) -> ((f64, f64), (f64, f64)) {
        let width = 0.5 + self.confidence_overlap / 2.0;
        ((1.0 - width, 1.0), (0.0, width))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: DatasetSpec,
    pub noise: NoiseModel,
    pub seed: u64,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub kg_triplets: usize,
    /// Distractors that happened to equal the truth.
    pub collisions: usize,
    pub distractors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub train: Vec<EpisodeRecord>,
    pub test: Vec<EpisodeRecord>,
    pub triplets: Vec<Triplet>,
    pub categories: Vec<CategoryRecord>,
}

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const KG_FILE: &str = "kg.jsonl";
pub const CATEGORY_FILE: &str = "categories.jsonl";
pub const MANIFEST_FILE: &str = "dataset.json";

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(TRAIN_FILE), to_jsonl(&self.train)?.as_bytes())?;
        write_atomic(&dir.join(TEST_FILE), to_jsonl(&self.test)?.as_bytes())?;
        write_atomic(&dir.join(KG_FILE), to_jsonl(&self.triplets)?.as_bytes())?;
        write_atomic(
            &dir.join(CATEGORY_FILE),
            to_jsonl(&self.categories)?.as_bytes(),
        )?;
        let mut manifest = serde_json::to_string_pretty(&self.manifest)?;
        manifest.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())
    }
}

/// Expands a `D`/`L`/literal grammar.
pub fn expand_pattern<R: Rng + ?Sized>(pattern: &str, rng: &mut R) -> String {
    pattern
        .chars()
        .map(|c| match c {
            'D' => char::from(b'0' + rng.random_range(0..10u8)),
            'L' => char::from(b'A' + rng.random_range(0..26u8)),
            other => other,
        })
        .collect()
}

/// Whether `value` could have been produced by `pattern`.
pub fn matches_pattern(pattern: &str, value: &str) -> bool {
    let mut p = pattern.chars();
    let mut v = value.chars();
    loop {
        match (p.next(), v.next()) {
            (None, None) => return true,
            (Some('D'), Some(c)) if c.is_ascii_digit() => {}
            (Some('L'), Some(c)) if c.is_ascii_uppercase() => {}
            (Some(pc), Some(c)) if pc != 'D' && pc != 'L' && pc == c => {}
            _ => return false,
        }
    }
}

fn is_mutable(c: char) -> bool {
    c.is_ascii_alphanumeric()
}

fn mutate_char<R: Rng + ?Sized>(c: char, rng: &mut R) -> Option<char> {
    let (base, span) = if c.is_ascii_digit() {
        (b'0', 10u8)
    } else if c.is_ascii_uppercase() {
        (b'A', 26)
    } else if c.is_ascii_lowercase() {
        (b'a', 26)
    } else {
        return None;
    };
    let offset = c as u8 - base;
    let shift = rng.random_range(1..span);
    Some(char::from(base + (offset + shift) % span))
}

/// Same-format near miss: mutates characters within their class, always
/// changing at least one.
pub fn corrupt<R: Rng + ?Sized>(truth: &str, rate: f64, rng: &mut R) -> String {
    let mut chars: Vec<char> = truth.chars().collect();
    let mut changed = false;
    for c in chars.iter_mut() {
        if rng.random_bool(rate) {
            if let Some(m) = mutate_char(*c, rng) {
                *c = m;
                changed = true;
            }
        }
    }
    if !changed {
        let mutable: Vec<usize> = (0..chars.len()).filter(|&i| is_mutable(chars[i])).collect();
        if mutable.is_empty() {
            chars.push(char::from(b'a' + rng.random_range(0..26u8)));
        } else {
            let i = mutable[rng.random_range(0..mutable.len())];
            chars[i] = mutate_char(chars[i], rng).expect("mutable");
        }
    }
    chars.into_iter().collect()
}

fn random_word<R: Rng + ?Sized>(rng: &mut R) -> String {
    let len = rng.random_range(3..9);
    (0..len)
        .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
        .collect()
}

struct Entity {
    name: String,
    field: usize,
    category: String,
    values: Vec<String>,
}

pub fn generate_dataset(spec: &DatasetSpec, noise: &NoiseModel, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let all_patterns: Vec<(usize, String)> = spec
        .fields
        .iter()
        .enumerate()
        .flat_map(|(fi, f)| f.attributes.iter().map(move |a| (fi, a.pattern.clone())))
        .collect();

    let mut background = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (fi, field) in spec.fields.iter().enumerate() {
        let category = |k: usize| format!("{}/series-{}", field.name, k % field.categories);
        let make = |split: &str, k: usize, cat: String, rng: &mut ChaCha8Rng| Entity {
            name: format!("{}-{split}-{k:04}", field.name),
            field: fi,
            category: cat,
            values: field
                .attributes
                .iter()
                .map(|a| expand_pattern(&a.pattern, rng))
                .collect(),
        };
        for c in 0..field.categories {
            for b in 0..spec.background_per_category {
                let k = c * spec.background_per_category + b;
                background.push(make("kg", k, category(c), &mut rng));
            }
        }
        for k in 0..field.train_entities {
            train.push(make("train", k, category(k), &mut rng));
        }
        for k in 0..field.test_entities {
            test.push(make("test", k, category(k), &mut rng));
        }
    }

    // reference pool: (category, attribute index) -> background values
    let mut pool: BTreeMap<(String, usize), Vec<String>> = BTreeMap::new();
    for e in &background {
        for (ai, v) in e.values.iter().enumerate() {
            pool.entry((e.category.clone(), ai))
                .or_default()
                .push(v.clone());
        }
    }

    let (good_band, bad_band) = noise.bands();
    let weights = [
        noise.near_miss_weight,
        noise.sibling_weight,
        noise.off_pattern_weight,
    ];
    let total_weight: f64 = weights.iter().sum();
    let mut collisions = 0;
    let mut distractors = 0;

    let mut episodes_for = |entities: &[Entity], rng: &mut ChaCha8Rng| -> Vec<EpisodeRecord> {
        let mut out = Vec::new();
        for e in entities {
            let field = &spec.fields[e.field];
            for (ai, attr) in field.attributes.iter().enumerate() {
                let truth = &e.values[ai];
                let present = rng.random_bool(noise.p_correct_present);
                let slot = rng.random_range(0..spec.max_answers);
                let mut answers = Vec::with_capacity(spec.max_answers);
                for pos in 0..spec.max_answers {
                    if present && pos == slot {
                        let c = rng.random_range(good_band.0..=good_band.1);
                        answers.push(CandidateAnswer::new(truth.clone(), c));
                        continue;
                    }
                    let mut pick = rng.random_range(0.0..total_weight);
                    let kind = weights
                        .iter()
                        .position(|&w| {
                            if pick < w {
                                true
                            } else {
                                pick -= w;
                                false
                            }
                        })
                        .unwrap_or(2);
                    let siblings = pool.get(&(e.category.clone(), ai));
                    let text = match kind {
                        1 if siblings.is_some_and(|s| !s.is_empty()) => {
                            let s = siblings.unwrap();
                            s[rng.random_range(0..s.len())].clone()
                        }
                        2 => {
                            let others: Vec<&String> = all_patterns
                                .iter()
                                .filter(|(_, p)| p != &attr.pattern)
                                .map(|(_, p)| p)
                                .collect();
                            if others.is_empty() {
                                random_word(rng)
                            } else {
                                expand_pattern(others[rng.random_range(0..others.len())], rng)
                            }
                        }
                        _ => corrupt(truth, noise.corruption_rate, rng),
                    };
                    distractors += 1;
                    if &text == truth {
                        collisions += 1;
                    }
                    let c = rng.random_range(bad_band.0..=bad_band.1);
                    answers.push(CandidateAnswer::new(text, c));
                }
                out.push(EpisodeRecord {
                    entity: e.name.clone(),
                    attribute: attr.attribute.clone(),
                    truth: Some(truth.clone()),
                    field: field.name.clone(),
                    answers,
                });
            }
        }
        out
    };
    let train_eps = episodes_for(&train, &mut rng);
    let test_eps = episodes_for(&test, &mut rng);

    let mut triplets = Vec::new();
    let mut categories = Vec::new();
    for e in background.iter().chain(&train).chain(&test) {
        let field = &spec.fields[e.field];
        for (a, v) in field.attributes.iter().zip(&e.values) {
            triplets.push(Triplet::new(&e.name, &a.attribute, v));
        }
        categories.push(CategoryRecord {
            entity: e.name.clone(),
            categories: vec![field.name.clone(), e.category.clone()],
        });
    }

    Ok(Dataset {
        manifest: DatasetManifest {
            spec: spec.clone(),
            noise: noise.clone(),
            seed,
            train_episodes: train_eps.len(),
            test_episodes: test_eps.len(),
            kg_triplets: triplets.len(),
            collisions,
            distractors,
        },
        train: train_eps,
        test: test_eps,
        triplets,
        categories,
    })
}

/// Indices of the episodes whose reference sets are emptied: exactly
/// `round(fraction · n)` of them, drawn from `seed`.
pub fn kg_availability_mask(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::usage(format!("fraction {fraction} outside [0, 1]")));
    }
    let k = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, k.min(n)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Empties the reference sets of a seeded `fraction` of `episodes`; returns
/// the indices that were emptied.
pub fn apply_kg_availability(
    episodes: &mut [PreparedEpisode],
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    let picked = kg_availability_mask(episodes.len(), fraction, seed)?;
    for &i in &picked {
        episodes[i].clear_refs();
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> DatasetSpec {
        let mut spec = DatasetSpec::default();
        for f in &mut spec.fields {
            f.train_entities = 20;
            f.test_entities = 10;
            f.categories = 2;
        }
        spec.background_per_category = 3;
        spec
    }

    #[test]
    fn patterns_expand_and_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in ["LLDDD", "DDD by DDDD Pixels", "DD/DD/DDDD", "LLLLL D.D"] {
            for _ in 0..50 {
                let v = expand_pattern(p, &mut rng);
                assert!(matches_pattern(p, &v), "{p} -> {v}");
            }
        }
        assert!(!matches_pattern("LLDDD", "GP10"));
        assert!(!matches_pattern("LLDDD", "G1104"));
    }

    #[test]
    fn corruption_changes_and_keeps_format() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for rate in [0.0, 0.3, 1.0] {
            for _ in 0..50 {
                let c = corrupt("GP104", rate, &mut rng);
                assert_ne!(c, "GP104");
                assert!(matches_pattern("LLDDD", &c));
            }
        }
        assert_ne!(corrupt("//", 0.5, &mut rng), "//");
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_dataset(&small_spec(), &NoiseModel::default(), 5)
            .unwrap()
            .write(a.path())
            .unwrap();
        generate_dataset(&small_spec(), &NoiseModel::default(), 5)
            .unwrap()
            .write(b.path())
            .unwrap();
        for f in [TRAIN_FILE, TEST_FILE, KG_FILE, CATEGORY_FILE, MANIFEST_FILE] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
        let c = generate_dataset(&small_spec(), &NoiseModel::default(), 6).unwrap();
        let a = generate_dataset(&small_spec(), &NoiseModel::default(), 5).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn shape_and_truth_format() {
        let spec = small_spec();
        let d = generate_dataset(&spec, &NoiseModel::default(), 3).unwrap();
        assert_eq!(d.train.len(), 80);
        assert_eq!(d.test.len(), 40);
        for e in d.train.iter().chain(&d.test) {
            assert_eq!(e.answers.len(), 10);
            let f = spec.fields.iter().find(|f| f.name == e.field).unwrap();
            assert!(matches_pattern(
                &f.attributes[0].pattern,
                e.truth.as_deref().unwrap()
            ));
            assert!(e
                .answers
                .iter()
                .all(|a| (0.0..=1.0).contains(&a.confidence)));
        }
        // every episode entity is in the KG and has a category
        assert_eq!(d.triplets.len(), 80 + 40 + 4 * 2 * 3);
        assert_eq!(d.categories.len(), d.triplets.len());
    }

    #[test]
    fn noise_free_limit() {
        let noise = NoiseModel {
            p_correct_present: 1.0,
            corruption_rate: 0.0,
            confidence_overlap: 0.0,
            ..NoiseModel::default()
        };
        let d = generate_dataset(&small_spec(), &noise, 4).unwrap();
        for e in &d.test {
            let pick = crate::baselines::aggregate_confidence(&e.answers).unwrap();
            assert_eq!(Some(pick), e.truth.as_deref());
        }
    }

    #[test]
    fn absent_truth_caps_the_oracle() {
        let noise = NoiseModel {
            p_correct_present: 0.0,
            ..NoiseModel::default()
        };
        let d = generate_dataset(&small_spec(), &noise, 4).unwrap();
        let eps: Vec<PreparedEpisode> = d
            .test
            .iter()
            .map(|r| PreparedEpisode::new(r.clone(), crate::kg::ReferenceSet::empty(""), 10))
            .collect();
        let oracle = crate::baselines::run_oracle(&eps).unwrap();
        for (e, o) in eps.iter().zip(&oracle) {
            // direct scan of the generated answers
            let t = e.truth().unwrap();
            let best = e
                .answers()
                .iter()
                .map(|a| crate::similarity::l_sim(&a.text, t))
                .fold(0.0, f64::max);
            assert_eq!(o.reward, best);
        }
        let mean = oracle.iter().map(|o| o.reward).sum::<f64>() / oracle.len() as f64;
        assert!(mean < 1.0);
        // only chance collisions can reach 1
        let perfect = oracle.iter().filter(|o| o.reward == 1.0).count();
        assert!(perfect <= d.manifest.collisions);
    }

    #[test]
    fn invalid_specs_name_the_culprit() {
        let mut spec = small_spec();
        spec.fields[1].attributes[0].pattern.clear();
        let err = generate_dataset(&spec, &NoiseModel::default(), 0).unwrap_err();
        assert!(err.to_string().contains("game"), "{err}");
        let mut spec = small_spec();
        spec.max_answers = 1;
        assert!(generate_dataset(&spec, &NoiseModel::default(), 0).is_err());
        let noise = NoiseModel {
            p_correct_present: 1.5,
            ..NoiseModel::default()
        };
        assert!(generate_dataset(&small_spec(), &noise, 0).is_err());
    }

    #[test]
    fn availability_mask_counts() {
        assert!(kg_availability_mask(10, 0.0, 1).unwrap().is_empty());
        assert_eq!(
            kg_availability_mask(10, 1.0, 1).unwrap(),
            (0..10).collect::<Vec<_>>()
        );
        let a = kg_availability_mask(300, 0.5, 1).unwrap();
        let b = kg_availability_mask(300, 0.5, 2).unwrap();
        assert_eq!(a.len(), 150);
        assert_eq!(b.len(), 150);
        assert_ne!(a, b);
        assert_eq!(kg_availability_mask(7, 0.5, 3).unwrap().len(), 4);
        assert!(kg_availability_mask(7, 1.5, 3).is_err());
    }
}
