//! Episodic answer-selection MDP.
//!
//! An episode walks a queue of candidate answers. Two slots are visible at
//! each decision: the current best (`answer1`) and the next candidate
//! (`answer2`). Reward is zero until the episode ends, then equals the
//! Levenshtein similarity between the final answer and the ground truth.
//!
//! When the queue is empty, Stop is the only legal action for agents that
//! have one, so an episode over `n` answers takes at most `n - 1` actions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeStore, ReferenceSet, Triplet, TripletMask};
use crate::similarity::{l_sim, TextForms};
use crate::state::{assemble, kg_profile_with, CandidateAnswer, KgProfile, StateVector};

/// One line of the recorded-episode JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub entity: String,
    pub attribute: String,
    /// Absent in deployment; rewards are then reported as zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    pub field: String,
    pub answers: Vec<CandidateAnswer>,
}

impl EpisodeRecord {
    pub fn triplet(&self) -> Option<Triplet> {
        self.truth
            .as_ref()
            .map(|t| Triplet::new(&self.entity, &self.attribute, t))
    }
}

/// An episode record joined with its reference set, truncated to at most
/// `max_answers` answers, with each answer's knowledge profile precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEpisode {
    pub record: EpisodeRecord,
    pub refs: ReferenceSet,
    profiles: Vec<KgProfile>,
}

impl PreparedEpisode {
    pub fn new(mut record: EpisodeRecord, refs: ReferenceSet, max_answers: usize) -> Self {
        record.answers.truncate(max_answers);
        let ref_forms: Vec<TextForms> = refs.values.iter().map(|v| TextForms::new(v)).collect();
        let profiles = record
            .answers
            .iter()
            .map(|a| kg_profile_with(&TextForms::new(&a.text), &ref_forms))
            .collect();
        Self {
            record,
            refs,
            profiles,
        }
    }

    /// Looks up references in `store` with `mask` applied.
    pub fn from_store(
        record: EpisodeRecord,
        store: &KnowledgeStore,
        mask: &TripletMask,
        max_answers: usize,
    ) -> Self {
        let refs = store.reference_values_masked(&record.entity, &record.attribute, mask);
        Self::new(record, refs, max_answers)
    }

    /// Drops the reference set, as if the knowledge graph had nothing for
    /// this triplet.
    pub fn clear_refs(&mut self) {
        self.refs.values.clear();
        self.profiles.fill(KgProfile::default());
    }

    pub fn answers(&self) -> &[CandidateAnswer] {
        &self.record.answers
    }

    pub fn profile(&self, index: usize) -> &KgProfile {
        &self.profiles[index]
    }

    pub fn truth(&self) -> Option<&str> {
        self.record.truth.as_deref()
    }

    pub fn field(&self) -> &str {
        &self.record.field
    }
}

/// Every action any agent variant can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Retain,
    Replace,
    Stop,
    /// Advance the best-by-confidence tracker (no-retain/replace variant).
    Continue,
}

/// Action set offered to an agent; Q-network outputs index into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionSpace {
    /// Retain = 0, Replace = 1, Stop = 2.
    Full,
    /// Continue = 0, Stop = 1.
    ContinueOrStop,
    /// Retain = 0, Replace = 1; the episode ends once the queue is spent.
    RetainOrReplace,
}

impl ActionSpace {
    pub fn actions(self) -> &'static [Action] {
        match self {
            ActionSpace::Full => &[Action::Retain, Action::Replace, Action::Stop],
            ActionSpace::ContinueOrStop => &[Action::Continue, Action::Stop],
            ActionSpace::RetainOrReplace => &[Action::Retain, Action::Replace],
        }
    }

    #[allow(clippy::len_without_is_empty)] // never empty
    pub fn len(self) -> usize {
        self.actions().len()
    }

    pub fn action(self, index: usize) -> Option<Action> {
        self.actions().get(index).copied()
    }

    pub fn index_of(self, action: Action) -> Option<usize> {
        self.actions().iter().position(|&a| a == action)
    }
}

/// Agent variants: the full agent and the three ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "RL-KG")]
    Kg,
    /// Knowledge block of the state forced to zero.
    #[serde(rename = "RL-NK")]
    NoKg,
    /// Only Continue/Stop; the current best is the highest-confidence answer seen.
    #[serde(rename = "RL-NR")]
    NoRetainReplace,
    /// Only Retain/Replace; every answer is examined.
    #[serde(rename = "RL-NS")]
    NoStop,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::NoKg,
        Variant::NoRetainReplace,
        Variant::NoStop,
        Variant::Kg,
    ];

    pub fn space(self) -> ActionSpace {
        match self {
            Variant::Kg | Variant::NoKg => ActionSpace::Full,
            Variant::NoRetainReplace => ActionSpace::ContinueOrStop,
            Variant::NoStop => ActionSpace::RetainOrReplace,
        }
    }

    pub fn uses_kg(self) -> bool {
        !matches!(self, Variant::NoKg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Kg => "RL-KG",
            Variant::NoKg => "RL-NK",
            Variant::NoRetainReplace => "RL-NR",
            Variant::NoStop => "RL-NS",
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Variant::Kg => 0,
            Variant::NoKg => 1,
            Variant::NoRetainReplace => 2,
            Variant::NoStop => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::usage(format!("unknown agent variant {s:?}")))
    }
}

/// Legal subset of an action space, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegalActions {
    bits: u8,
    len: usize,
}

impl LegalActions {
    pub fn all(len: usize) -> Self {
        Self {
            bits: ((1u16 << len) - 1) as u8,
            len,
        }
    }

    pub fn only(index: usize, len: usize) -> Self {
        Self {
            bits: 1 << index,
            len,
        }
    }

    pub fn from_indices(indices: &[usize], len: usize) -> Self {
        let bits = indices.iter().fold(0u8, |b, &i| b | (1 << i));
        Self { bits, len }
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.len && self.bits & (1 << index) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn space_len(&self) -> usize {
        self.len
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.contains(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `None` once the episode has ended.
    pub state: Option<StateVector>,
    pub reward: f64,
    pub done: bool,
    pub final_answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// First decision point.
    State(StateVector),
    /// Single-answer queue: ended immediately on that answer.
    Finished(StepOutcome),
    /// Empty queue; nothing to decide.
    Skipped,
}

/// Mutable episode state over a borrowed prepared episode.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    data: &'a PreparedEpisode,
    variant: Variant,
    /// Index of the next answer to pop.
    cursor: usize,
    current: usize,
    candidate: usize,
    steps: usize,
    done: bool,
    final_answer: Option<usize>,
}

impl<'a> Episode<'a> {
    pub fn new(data: &'a PreparedEpisode, variant: Variant) -> Self {
        Self {
            data,
            variant,
            cursor: 0,
            current: 0,
            candidate: 0,
            steps: 0,
            done: false,
            final_answer: None,
        }
    }

    pub fn reset(&mut self) -> Start {
        self.steps = 0;
        self.final_answer = None;
        self.done = false;
        match self.data.answers().len() {
            0 => {
                self.done = true;
                self.cursor = 0;
                Start::Skipped
            }
            1 => {
                self.cursor = 1;
                self.current = 0;
                self.candidate = 0;
                Start::Finished(self.finish())
            }
            _ => {
                self.cursor = 2;
                self.candidate = 1;
                self.current = match self.variant.space() {
                    ActionSpace::ContinueOrStop => self.more_confident(0, 1),
                    _ => 0,
                };
                Start::State(self.state())
            }
        }
    }

    fn more_confident(&self, best: usize, challenger: usize) -> usize {
        let answers = self.data.answers();
        if answers[challenger].confidence > answers[best].confidence {
            challenger
        } else {
            best
        }
    }

    pub fn state(&self) -> StateVector {
        let answers = self.data.answers();
        let (p1, p2) = if self.variant.uses_kg() {
            (
                *self.data.profile(self.current),
                *self.data.profile(self.candidate),
            )
        } else {
            (KgProfile::default(), KgProfile::default())
        };
        assemble(&answers[self.current], &p1, &answers[self.candidate], &p2)
    }

    fn queue_empty(&self) -> bool {
        self.cursor >= self.data.answers().len()
    }

    pub fn legal_actions(&self) -> LegalActions {
        let space = self.variant.space();
        match space {
            ActionSpace::Full | ActionSpace::ContinueOrStop if self.queue_empty() => {
                LegalActions::only(space.index_of(Action::Stop).unwrap(), space.len())
            }
            _ => LegalActions::all(space.len()),
        }
    }

    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::usage("step called on a finished episode"));
        }
        let space = self.variant.space();
        let action = space.action(action_index).ok_or_else(|| {
            Error::usage(format!(
                "action {action_index} is outside the {space:?} space"
            ))
        })?;
        if !self.legal_actions().contains(action_index) {
            return Err(Error::usage(format!("{action:?} is not legal here")));
        }
        self.steps += 1;
        match action {
            Action::Stop => return Ok(self.finish()),
            Action::Retain => {}
            Action::Replace => self.current = self.candidate,
            Action::Continue => {}
        }
        if self.queue_empty() {
            // only reachable without a Stop action
            return Ok(self.finish());
        }
        self.candidate = self.cursor;
        self.cursor += 1;
        if action == Action::Continue {
            self.current = self.more_confident(self.current, self.candidate);
        }
        Ok(StepOutcome {
            state: Some(self.state()),
            reward: 0.0,
            done: false,
            final_answer: None,
        })
    }

    fn finish(&mut self) -> StepOutcome {
        self.done = true;
        self.final_answer = Some(self.current);
        let text = self.data.answers()[self.current].text.clone();
        let reward = self.data.truth().map_or(0.0, |t| l_sim(&text, t));
        StepOutcome {
            state: None,
            reward,
            done: true,
            final_answer: Some(text),
        }
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Actions taken so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Answers popped from the queue so far.
    pub fn answers_consumed(&self) -> usize {
        self.cursor
    }

    pub fn current_best(&self) -> &CandidateAnswer {
        &self.data.answers()[self.current]
    }

    pub fn next_candidate(&self) -> &CandidateAnswer {
        &self.data.answers()[self.candidate]
    }
}

/// Best answer by similarity to the truth; ties go to the earliest.
pub fn oracle_answer(answers: &[CandidateAnswer], truth: &str) -> Result<(String, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in answers.iter().enumerate() {
        let sim = l_sim(&a.text, truth);
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((i, sim));
        }
    }
    best.map(|(i, s)| (answers[i].text.clone(), s))
        .ok_or_else(|| Error::usage("oracle needs at least one answer"))
}
