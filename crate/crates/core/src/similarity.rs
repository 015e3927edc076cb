//! String metrics over Unicode scalar values and the seven pairwise features
//! used to compare a candidate answer with a reference value.
//!
//! Every length, distance and mask here counts `char`s, never bytes. Two empty
//! strings are treated as identical, so both similarities return 1 for them.

use unicode_properties::{GeneralCategory, UnicodeGeneralCategory};

/// Number of pairwise features produced by [`feature_vector`].
pub const FEATURE_COUNT: usize = 7;

/// The seven pairwise features, in order:
///
/// 0. Levenshtein similarity
/// 1. longest-common-substring similarity
/// 2. Levenshtein similarity with digits removed
/// 3. longest-common-substring similarity with digits removed
/// 4. Levenshtein similarity with digits masked to `x`
/// 5. longest-common-substring similarity with digits masked to `x`
/// 6. absolute difference in character count
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_array(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }
}

/// Unicode decimal digit (general category Nd).
pub fn is_decimal_digit(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_digit();
    }
    c.general_category() == GeneralCategory::DecimalNumber
}

pub fn levenshtein_distance(s1: &str, s2: &str) -> usize {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    levenshtein_chars(&a, &b)
}

pub fn l_sim(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    l_sim_chars(&a, &b)
}

/// Length of the longest contiguous run shared by both strings.
pub fn lcs_length(s1: &str, s2: &str) -> usize {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    lcs_chars(&a, &b)
}

pub fn lcs_sim(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    lcs_sim_chars(&a, &b)
}

pub fn strip_digits(s: &str) -> String {
    s.chars().filter(|&c| !is_decimal_digit(c)).collect()
}

/// Replaces every decimal digit with `x`, e.g. `"750 by 1334 Pixels"` becomes
/// `"xxx by xxxx Pixels"`.
pub fn wildcard_mask(s: &str) -> String {
    s.chars()
        .map(|c| if is_decimal_digit(c) { 'x' } else { c })
        .collect()
}

pub fn feature_vector(s1: &str, s2: &str) -> FeatureVector {
    TextForms::new(s1).features(&TextForms::new(s2))
}

/// A string pre-split into the three forms the features compare: raw,
/// digit-stripped and wildcard-masked. Building this once per string avoids
/// re-decoding when one answer is compared against many reference values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextForms {
    raw: Vec<char>,
    stripped: Vec<char>,
    masked: Vec<char>,
}

impl TextForms {
    pub fn new(s: &str) -> Self {
        let raw: Vec<char> = s.chars().collect();
        let stripped = raw
            .iter()
            .copied()
            .filter(|&c| !is_decimal_digit(c))
            .collect();
        let masked = raw
            .iter()
            .map(|&c| if is_decimal_digit(c) { 'x' } else { c })
            .collect();
        Self {
            raw,
            stripped,
            masked,
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn features(&self, other: &TextForms) -> FeatureVector {
        FeatureVector([
            l_sim_chars(&self.raw, &other.raw),
            lcs_sim_chars(&self.raw, &other.raw),
            l_sim_chars(&self.stripped, &other.stripped),
            lcs_sim_chars(&self.stripped, &other.stripped),
            l_sim_chars(&self.masked, &other.masked),
            lcs_sim_chars(&self.masked, &other.masked),
            self.raw.len().abs_diff(other.raw.len()) as f64,
        ])
    }
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    // Keep the row over the shorter string.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let above = row[j + 1];
            let substitution = diag + usize::from(lc != sc);
            row[j + 1] = substitution.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[short.len()]
}

pub(crate) fn lcs_chars(a: &[char], b: &[char]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    // row[j] = length of the common suffix ending at long[i-1], short[j-1]
    let mut row = vec![0usize; short.len() + 1];
    let mut best = 0;
    for &lc in long {
        for j in (1..=short.len()).rev() {
            if short[j - 1] == lc {
                row[j] = row[j - 1] + 1;
                best = best.max(row[j]);
            } else {
                row[j] = 0;
            }
        }
    }
    best
}

fn l_sim_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein_chars(a, b) as f64 / longest as f64
}

fn lcs_sim_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    lcs_chars(a, b) as f64 / longest as f64
}
