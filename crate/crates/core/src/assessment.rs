//! Cognitive-core assessment.
//!
//! A learner answers a forced-choice instrument split into two dichotomy
//! blocks: perception (Sensing vs iNtuition) and judgement (Feeling vs
//! Thinking). Each block is scored by strict majority. The two winning
//! poles compose into one of four cognitive cores.
//!
//! Option-to-pole keys live in the instrument file so alternate instruments
//! can re-key items without code changes.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::ids::LearnerId;

/// Items per dichotomy block in the shipped instrument.
pub const BLOCK_LEN: usize = 7;

const DEFAULT_INSTRUMENT: &str = include_str!("../data/instrument.toml");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssessmentError {
    #[error("expected {expected} answers for the {dichotomy} block, got {got}")]
    WrongAnswerCount {
        dichotomy: Dichotomy,
        expected: usize,
        got: usize,
    },
    #[error("response is incomplete: missing item(s) {0:?}")]
    MissingItems(Vec<u8>),
    #[error("response answers unknown item(s) {0:?}")]
    UnknownItems(Vec<u8>),
    #[error("invalid instrument: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidInstrument(Vec<InstrumentIssue>),
    #[error("cannot parse instrument: {0}")]
    Parse(String),
}

/// One of the four cognitive cores (function pairs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CognitiveCore {
    ST,
    SF,
    NT,
    NF,
}

impl CognitiveCore {
    pub const ALL: [CognitiveCore; 4] = [Self::ST, Self::SF, Self::NT, Self::NF];

    /// Compose a perception pole and a judgement pole.
    ///
    /// Returns `None` when the poles do not come from the two different
    /// dichotomies.
    pub fn from_poles(perception: Pole, judgement: Pole) -> Option<Self> {
        match (perception, judgement) {
            (Pole::S, Pole::T) => Some(Self::ST),
            (Pole::S, Pole::F) => Some(Self::SF),
            (Pole::N, Pole::T) => Some(Self::NT),
            (Pole::N, Pole::F) => Some(Self::NF),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ST => "ST",
            Self::SF => "SF",
            Self::NT => "NT",
            Self::NF => "NF",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            Self::ST => "Sensing with Thinking",
            Self::SF => "Sensing with Feeling",
            Self::NT => "Intuition with Thinking",
            Self::NF => "Intuition with Feeling",
        }
    }
}

impl fmt::Display for CognitiveCore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown cognitive core {0:?}")]
pub struct ParseCoreError(pub String);

impl FromStr for CognitiveCore {
    type Err = ParseCoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ST" => Ok(Self::ST),
            "SF" => Ok(Self::SF),
            "NT" => Ok(Self::NT),
            "NF" => Ok(Self::NF),
            _ => Err(ParseCoreError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dichotomy {
    Perception,
    Judgement,
}

impl Dichotomy {
    pub const ALL: [Dichotomy; 2] = [Self::Perception, Self::Judgement];

    pub fn poles(self) -> [Pole; 2] {
        match self {
            Self::Perception => [Pole::S, Pole::N],
            Self::Judgement => [Pole::F, Pole::T],
        }
    }
}

impl fmt::Display for Dichotomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Perception => f.write_str("perception"),
            Self::Judgement => f.write_str("judgement"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pole {
    S,
    N,
    F,
    T,
}

impl Pole {
    pub fn dichotomy(self) -> Dichotomy {
        match self {
            Self::S | Self::N => Dichotomy::Perception,
            Self::F | Self::T => Dichotomy::Judgement,
        }
    }
}

/// A forced-choice answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Self::A => Self::B,
            Self::B => Self::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemOption {
    pub text: String,
    pub pole: Pole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DichotomyItem {
    #[serde(rename = "id")]
    pub item_id: u8,
    pub dichotomy: Dichotomy,
    pub text: String,
    #[serde(rename = "a")]
    pub option_a: ItemOption,
    #[serde(rename = "b")]
    pub option_b: ItemOption,
}

impl DichotomyItem {
    pub fn pole_for(&self, choice: Choice) -> Pole {
        match choice {
            Choice::A => self.option_a.pole,
            Choice::B => self.option_b.pole,
        }
    }
}

/// A problem found by [`validate_instrument`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum InstrumentIssue {
    Empty,
    DuplicateItem(u8),
    EmptyBlock(Dichotomy),
    /// Even item count: a tie is possible.
    EvenBlock { dichotomy: Dichotomy, items: usize },
    /// An option is keyed to a pole outside the item's dichotomy, or both
    /// options are keyed to the same pole.
    BadKeying(u8),
}

impl fmt::Display for InstrumentIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => f.write_str("instrument has no items"),
            Self::DuplicateItem(id) => write!(f, "item {id} appears more than once"),
            Self::EmptyBlock(d) => write!(f, "{d} block has no items"),
            Self::EvenBlock { dichotomy, items } => {
                write!(f, "{dichotomy} block has {items} items: tie possible")
            }
            Self::BadKeying(id) => write!(
                f,
                "item {id} must key its two options to the two poles of its dichotomy"
            ),
        }
    }
}

/// Check that an item set can always be scored to a unique core.
pub fn validate_instrument(items: &[DichotomyItem]) -> Result<(), Vec<InstrumentIssue>> {
    let mut issues = Vec::new();
    if items.is_empty() {
        return Err(vec![InstrumentIssue::Empty]);
    }
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.item_id) {
            issues.push(InstrumentIssue::DuplicateItem(item.item_id));
        }
        let a = item.option_a.pole;
        let b = item.option_b.pole;
        if a == b || a.dichotomy() != item.dichotomy || b.dichotomy() != item.dichotomy {
            issues.push(InstrumentIssue::BadKeying(item.item_id));
        }
    }
    for d in Dichotomy::ALL {
        let n = items.iter().filter(|i| i.dichotomy == d).count();
        if n == 0 {
            issues.push(InstrumentIssue::EmptyBlock(d));
        } else if n % 2 == 0 {
            issues.push(InstrumentIssue::EvenBlock {
                dichotomy: d,
                items: n,
            });
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

/// Score one block of the shipped keying: A answers indicate S (perception)
/// or F (judgement); B answers indicate N or T.
pub fn score_dichotomy(answers: &[Choice], dichotomy: Dichotomy) -> Result<Pole, AssessmentError> {
    if answers.len() != BLOCK_LEN {
        return Err(AssessmentError::WrongAnswerCount {
            dichotomy,
            expected: BLOCK_LEN,
            got: answers.len(),
        });
    }
    let a_votes = answers.iter().filter(|&&c| c == Choice::A).count();
    let [a_pole, b_pole] = dichotomy.poles();
    Ok(if 2 * a_votes > answers.len() {
        a_pole
    } else {
        b_pole
    })
}

/// A learner's answers to the instrument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentResponse {
    pub learner_id: LearnerId,
    pub answers: BTreeMap<u8, Choice>,
    pub completed_at: DateTime<Utc>,
}

impl AssessmentResponse {
    /// Build a response from answers listed in item order 1..=n.
    pub fn from_sequence(
        learner_id: LearnerId,
        answers: &[Choice],
        completed_at: DateTime<Utc>,
    ) -> Self {
        let answers = answers
            .iter()
            .enumerate()
            .map(|(i, &c)| ((i + 1) as u8, c))
            .collect();
        Self {
            learner_id,
            answers,
            completed_at,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct InstrumentFile {
    #[serde(default)]
    name: String,
    items: Vec<DichotomyItem>,
}

/// A validated instrument. Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instrument {
    name: String,
    items: Vec<DichotomyItem>,
}

impl Instrument {
    pub fn new(name: impl Into<String>, items: Vec<DichotomyItem>) -> Result<Self, AssessmentError> {
        validate_instrument(&items).map_err(AssessmentError::InvalidInstrument)?;
        Ok(Self {
            name: name.into(),
            items,
        })
    }

    pub fn from_toml(src: &str) -> Result<Self, AssessmentError> {
        let file: InstrumentFile =
            toml::from_str(src).map_err(|e| AssessmentError::Parse(e.to_string()))?;
        Self::new(file.name, file.items)
    }

    /// The shipped 14-item instrument.
    pub fn abridged() -> Self {
        Self::from_toml(DEFAULT_INSTRUMENT).expect("shipped instrument is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn items(&self) -> &[DichotomyItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn check_complete(&self, response: &AssessmentResponse) -> Result<(), AssessmentError> {
        let expected: BTreeSet<u8> = self.items.iter().map(|i| i.item_id).collect();
        let got: BTreeSet<u8> = response.answers.keys().copied().collect();
        let unknown: Vec<u8> = got.difference(&expected).copied().collect();
        if !unknown.is_empty() {
            return Err(AssessmentError::UnknownItems(unknown));
        }
        let missing: Vec<u8> = expected.difference(&got).copied().collect();
        if !missing.is_empty() {
            return Err(AssessmentError::MissingItems(missing));
        }
        Ok(())
    }

    /// Majority pole of one block under this instrument's keying.
    pub fn score_block(
        &self,
        response: &AssessmentResponse,
        dichotomy: Dichotomy,
    ) -> Result<Pole, AssessmentError> {
        self.check_complete(response)?;
        let [first, second] = dichotomy.poles();
        let mut first_votes = 0usize;
        let mut total = 0usize;
        for item in self.items.iter().filter(|i| i.dichotomy == dichotomy) {
            let choice = response.answers[&item.item_id];
            total += 1;
            if item.pole_for(choice) == first {
                first_votes += 1;
            }
        }
        Ok(if 2 * first_votes > total { first } else { second })
    }

    /// Score a complete response to its cognitive core.
    pub fn determine_cognitive_core(
        &self,
        response: &AssessmentResponse,
    ) -> Result<CognitiveCore, AssessmentError> {
        let perception = self.score_block(response, Dichotomy::Perception)?;
        let judgement = self.score_block(response, Dichotomy::Judgement)?;
        Ok(CognitiveCore::from_poles(perception, judgement)
            .expect("blocks score to poles of their own dichotomy"))
    }
}

/// Score a response against the shipped instrument.
pub fn determine_cognitive_core(
    response: &AssessmentResponse,
) -> Result<CognitiveCore, AssessmentError> {
    Instrument::abridged().determine_cognitive_core(response)
}

/// A canonical answer vector for the shipped instrument that scores to
/// `core`: unanimous answers in each block.
pub fn canonical_answers(core: CognitiveCore) -> [Choice; 14] {
    let (p, j) = match core {
        CognitiveCore::ST => (Choice::A, Choice::B),
        CognitiveCore::SF => (Choice::A, Choice::A),
        CognitiveCore::NT => (Choice::B, Choice::B),
        CognitiveCore::NF => (Choice::B, Choice::A),
    };
    let mut out = [p; 14];
    for c in out.iter_mut().skip(BLOCK_LEN) {
        *c = j;
    }
    out
}
