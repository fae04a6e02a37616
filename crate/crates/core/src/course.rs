//! Course tree, quiz grading and the per-learner unlock state machine.
//!
//! A course is a tree of topics, lessons and quizzes. Content drips: a
//! learner starts with the first topic and its first lesson open. Finishing
//! a lesson opens its quizzes; passing every quiz of a lesson opens the next
//! lesson, crossing into the next topic when the current one runs out.
//! Nothing ever locks again once opened.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ids::{CourseId, LearnerId, LessonId, NodeId, QuizId, TopicId};
use crate::numeric::round_half_up_div;

const IIC_COURSE: &str = include_str!("../data/course_iic.toml");

pub const DEFAULT_PASS_THRESHOLD_PCT: u8 = 80;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CourseError {
    #[error("cannot parse course: {0}")]
    Parse(String),
    #[error("invalid course: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<CourseIssue>),
    #[error("{0} is not part of this course")]
    UnknownNode(NodeId),
    #[error("{0} is locked")]
    Locked(NodeId),
    #[error("course is not finished: {remaining} topic(s) still open")]
    NotFinished { remaining: usize },
    #[error("invalid submission: {0}")]
    InvalidSubmission(String),
}

/// A structural problem found while validating a course.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CourseIssue {
    NoTopics,
    EmptyTopic(TopicId),
    DuplicateId(NodeId),
    NoQuestions(QuizId),
    ZeroPoints(QuizId),
    BadQuestion { quiz: QuizId, index: usize },
    Threshold(u8),
    UnreachableGate { lesson: LessonId, cost: u32, available: u32 },
}

impl fmt::Display for CourseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoTopics => write!(f, "course has no topics"),
            Self::EmptyTopic(t) => write!(f, "topic {t} has no lessons"),
            Self::DuplicateId(n) => write!(f, "{n} appears twice"),
            Self::NoQuestions(q) => write!(f, "quiz {q} has no questions"),
            Self::ZeroPoints(q) => write!(f, "quiz {q} awards no points"),
            Self::BadQuestion { quiz, index } => {
                write!(f, "quiz {quiz} question {} is malformed", index + 1)
            }
            Self::Threshold(t) => write!(f, "pass threshold {t}% outside 1..=100"),
            Self::UnreachableGate { lesson, cost, available } => write!(
                f,
                "lesson {lesson} costs {cost} points but only {available} are available before it"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    #[default]
    MultipleChoice,
    Matching,
    Puzzle,
    /// Free-text answers scored by an instructor.
    Essay,
}

impl ActivityKind {
    pub fn instructor_scored(self) -> bool {
        self == Self::Essay
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentRef {
    pub id: String,
    pub title: String,
    /// Content-variant tag; untagged content is shown to everyone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub prompt: String,
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quiz {
    #[serde(rename = "id")]
    pub quiz_id: QuizId,
    pub title: String,
    #[serde(default)]
    pub activity_kind: ActivityKind,
    pub points_total: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<u32>,
    pub questions: Vec<Question>,
    #[serde(default)]
    pub content: Vec<ContentRef>,
}

impl Quiz {
    /// Number of gradable units: one per question.
    pub fn total(&self) -> u32 {
        self.questions.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lesson {
    #[serde(rename = "id")]
    pub lesson_id: LessonId,
    pub title: String,
    #[serde(default)]
    pub content: Vec<ContentRef>,
    /// Points needed before this lesson opens, when the economy element is active.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_cost: Option<u32>,
    #[serde(default)]
    pub quizzes: Vec<Quiz>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    #[serde(rename = "id")]
    pub topic_id: TopicId,
    pub title: String,
    pub lessons: Vec<Lesson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseGraph {
    pub course_id: CourseId,
    pub title: String,
    #[serde(default = "default_threshold")]
    pub pass_threshold_pct: u8,
    pub topics: Vec<Topic>,
}

fn default_threshold() -> u8 {
    DEFAULT_PASS_THRESHOLD_PCT
}

impl CourseGraph {
    pub fn from_toml(src: &str) -> Result<Self, CourseError> {
        let graph: Self = toml::from_str(src).map_err(|e| CourseError::Parse(e.to_string()))?;
        graph.validate()?;
        Ok(graph)
    }

    /// The shipped six-topic instructional innovation course.
    pub fn instructional_innovation() -> Self {
        Self::from_toml(IIC_COURSE).expect("shipped course is valid")
    }

    /// A generated course of `topics × lessons × quizzes`, every quiz having
    /// two single-choice questions worth 10 points.
    pub fn synthetic(course_id: u64, topics: usize, lessons: usize, quizzes: usize) -> Self {
        let mut next = course_id;
        let mut id = || {
            next += 1;
            next
        };
        let question = |n: usize| Question {
            prompt: format!("Question {n}"),
            options: vec!["right".into(), "wrong".into()],
            correct: Some(0),
        };
        let topics = (0..topics)
            .map(|t| Topic {
                topic_id: TopicId(id()),
                title: format!("Topic {}", t + 1),
                lessons: (0..lessons)
                    .map(|l| Lesson {
                        lesson_id: LessonId(id()),
                        title: format!("Lesson {}.{}", t + 1, l + 1),
                        content: vec![],
                        gate_cost: None,
                        quizzes: (0..quizzes)
                            .map(|q| Quiz {
                                quiz_id: QuizId(id()),
                                title: format!("Quiz {}.{}.{}", t + 1, l + 1, q + 1),
                                activity_kind: ActivityKind::MultipleChoice,
                                points_total: 10,
                                time_limit_secs: None,
                                questions: vec![question(1), question(2)],
                                content: vec![],
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        Self {
            course_id: CourseId(course_id),
            title: "Synthetic course".into(),
            pass_threshold_pct: DEFAULT_PASS_THRESHOLD_PCT,
            topics,
        }
    }

    pub fn validate(&self) -> Result<(), CourseError> {
        let mut issues = Vec::new();
        if self.topics.is_empty() {
            issues.push(CourseIssue::NoTopics);
        }
        if !(1..=100).contains(&self.pass_threshold_pct) {
            issues.push(CourseIssue::Threshold(self.pass_threshold_pct));
        }
        let mut seen = BTreeSet::new();
        let mut available = 0u32;
        for topic in &self.topics {
            if !seen.insert(NodeId::Topic(topic.topic_id)) {
                issues.push(CourseIssue::DuplicateId(NodeId::Topic(topic.topic_id)));
            }
            if topic.lessons.is_empty() {
                issues.push(CourseIssue::EmptyTopic(topic.topic_id));
            }
            for lesson in &topic.lessons {
                if !seen.insert(NodeId::Lesson(lesson.lesson_id)) {
                    issues.push(CourseIssue::DuplicateId(NodeId::Lesson(lesson.lesson_id)));
                }
                if let Some(cost) = lesson.gate_cost {
                    if cost > available {
                        issues.push(CourseIssue::UnreachableGate {
                            lesson: lesson.lesson_id,
                            cost,
                            available,
                        });
                    }
                }
                for quiz in &lesson.quizzes {
                    if !seen.insert(NodeId::Quiz(quiz.quiz_id)) {
                        issues.push(CourseIssue::DuplicateId(NodeId::Quiz(quiz.quiz_id)));
                    }
                    if quiz.questions.is_empty() {
                        issues.push(CourseIssue::NoQuestions(quiz.quiz_id));
                    }
                    if quiz.points_total == 0 {
                        issues.push(CourseIssue::ZeroPoints(quiz.quiz_id));
                    }
                    for (index, q) in quiz.questions.iter().enumerate() {
                        let ok = if quiz.activity_kind.instructor_scored() {
                            q.correct.is_none()
                        } else {
                            matches!(q.correct, Some(c) if c < q.options.len())
                        };
                        if !ok {
                            issues.push(CourseIssue::BadQuestion {
                                quiz: quiz.quiz_id,
                                index,
                            });
                        }
                    }
                    available += quiz.points_total;
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(CourseError::Invalid(issues))
        }
    }

    pub fn lessons(&self) -> impl Iterator<Item = (&Topic, &Lesson)> {
        self.topics
            .iter()
            .flat_map(|t| t.lessons.iter().map(move |l| (t, l)))
    }

    pub fn quizzes(&self) -> impl Iterator<Item = (&Lesson, &Quiz)> {
        self.lessons()
            .flat_map(|(_, l)| l.quizzes.iter().map(move |q| (l, q)))
    }

    pub fn quiz(&self, id: QuizId) -> Option<&Quiz> {
        self.quizzes().map(|(_, q)| q).find(|q| q.quiz_id == id)
    }

    pub fn lesson(&self, id: LessonId) -> Option<&Lesson> {
        self.lessons().map(|(_, l)| l).find(|l| l.lesson_id == id)
    }

    pub fn topic(&self, id: TopicId) -> Option<&Topic> {
        self.topics.iter().find(|t| t.topic_id == id)
    }

    pub fn lesson_of_quiz(&self, id: QuizId) -> Option<&Lesson> {
        self.quizzes().find(|(_, q)| q.quiz_id == id).map(|(l, _)| l)
    }

    pub fn topic_of_lesson(&self, id: LessonId) -> Option<&Topic> {
        self.lessons().find(|(_, l)| l.lesson_id == id).map(|(t, _)| t)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        match node {
            NodeId::Topic(t) => self.topic(t).is_some(),
            NodeId::Lesson(l) => self.lesson(l).is_some(),
            NodeId::Quiz(q) => self.quiz(q).is_some(),
        }
    }

    /// All nodes in course order: each topic, then its lessons, each lesson
    /// followed by its quizzes.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for t in &self.topics {
            out.push(NodeId::Topic(t.topic_id));
            for l in &t.lessons {
                out.push(NodeId::Lesson(l.lesson_id));
                out.extend(l.quizzes.iter().map(|q| NodeId::Quiz(q.quiz_id)));
            }
        }
        out
    }

    /// Lessons plus quizzes. Topics are containers, not steps.
    pub fn steps_total(&self) -> u32 {
        self.lessons()
            .map(|(_, l)| 1 + l.quizzes.len() as u32)
            .sum()
    }

    /// The lesson after `id` in course order, crossing topic boundaries.
    fn next_lesson(&self, id: LessonId) -> Option<&Lesson> {
        let mut it = self.lessons().map(|(_, l)| l);
        it.by_ref().find(|l| l.lesson_id == id)?;
        it.next()
    }
}

/// What a learner handed in for one attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Submission {
    /// Chosen option per question; `None` leaves a question unanswered.
    Answers(Vec<Option<usize>>),
    /// Score assigned by an instructor to a free-text attempt.
    InstructorScore(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptResult {
    pub quiz_id: QuizId,
    pub score: u32,
    pub total: u32,
    pub points: u32,
    pub points_total: u32,
    /// Percentage rounded half-up for display; `passed` uses the exact ratio.
    pub percentage: u32,
    pub passed: bool,
}

/// Grade a raw `score / total` against a points scale and pass threshold.
pub fn grade_score(
    quiz_id: QuizId,
    score: u32,
    total: u32,
    points_total: u32,
    threshold_pct: u8,
) -> Result<AttemptResult, CourseError> {
    if total == 0 || score > total {
        return Err(CourseError::InvalidSubmission(format!(
            "score {score} out of {total}"
        )));
    }
    let (s, t) = (u64::from(score), u64::from(total));
    Ok(AttemptResult {
        quiz_id,
        score,
        total,
        points: round_half_up_div(s * u64::from(points_total), t) as u32,
        points_total,
        percentage: round_half_up_div(100 * s, t) as u32,
        passed: 100 * s >= u64::from(threshold_pct) * t,
    })
}

pub fn grade_quiz(
    quiz: &Quiz,
    submission: &Submission,
    threshold_pct: u8,
) -> Result<AttemptResult, CourseError> {
    let score = match (submission, quiz.activity_kind.instructor_scored()) {
        (Submission::Answers(answers), false) => {
            if answers.len() != quiz.questions.len() {
                return Err(CourseError::InvalidSubmission(format!(
                    "expected {} answers, got {}",
                    quiz.questions.len(),
                    answers.len()
                )));
            }
            let mut score = 0;
            for (q, a) in quiz.questions.iter().zip(answers) {
                if let Some(a) = a {
                    if *a >= q.options.len() {
                        return Err(CourseError::InvalidSubmission(format!(
                            "option {a} does not exist"
                        )));
                    }
                }
                if a.is_some() && *a == q.correct {
                    score += 1;
                }
            }
            score
        }
        (Submission::InstructorScore(s), true) => *s,
        (Submission::Answers(_), true) => {
            return Err(CourseError::InvalidSubmission(
                "free-text activity needs an instructor score".into(),
            ))
        }
        (Submission::InstructorScore(_), false) => {
            return Err(CourseError::InvalidSubmission(
                "auto-graded activity takes answers".into(),
            ))
        }
    };
    grade_score(quiz.quiz_id, score, quiz.total(), quiz.points_total, threshold_pct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Locked,
    Unlocked,
    Completed,
}

/// Nodes whose state changed as the result of one operation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UnlockDelta {
    pub unlocked: Vec<NodeId>,
    pub completed: Vec<NodeId>,
    /// Gated lessons opened in this operation, for learners subject to gates.
    pub gates_opened: Vec<LessonId>,
}

impl UnlockDelta {
    pub fn is_empty(&self) -> bool {
        self.unlocked.is_empty() && self.completed.is_empty() && self.gates_opened.is_empty()
    }

    pub fn completed_topics(&self) -> impl Iterator<Item = TopicId> + '_ {
        self.completed.iter().filter_map(|n| match n {
            NodeId::Topic(t) => Some(*t),
            _ => None,
        })
    }
}

/// What a learner sees on opening an unlocked node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentHandle {
    pub node: NodeId,
    pub title: String,
    pub content: Vec<ContentRef>,
    pub time_limit_secs: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionAward {
    pub course_id: CourseId,
    pub total_points: u32,
    /// False when the course had already been completed.
    pub first_time: bool,
}

/// One learner's progress through one course.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerEnrollment {
    pub learner_id: LearnerId,
    pub course_id: CourseId,
    /// Whether points gates apply to this learner.
    pub economy_gates: bool,
    #[serde(with = "crate::ids::map_as_pairs")]
    states: BTreeMap<NodeId, NodeState>,
    best_points: BTreeMap<QuizId, u32>,
    attempts: BTreeMap<QuizId, u32>,
    /// Lessons that became due while their gate was still closed.
    pending_gates: BTreeSet<LessonId>,
    course_completed: bool,
}

impl LearnerEnrollment {
    pub fn enroll(course: &CourseGraph, learner_id: LearnerId, economy_gates: bool) -> Self {
        let mut e = Self {
            learner_id,
            course_id: course.course_id,
            economy_gates,
            states: course.nodes().into_iter().map(|n| (n, NodeState::Locked)).collect(),
            best_points: BTreeMap::new(),
            attempts: BTreeMap::new(),
            pending_gates: BTreeSet::new(),
            course_completed: false,
        };
        let mut delta = UnlockDelta::default();
        if let Some(first) = course.topics.first() {
            e.set(NodeId::Topic(first.topic_id), NodeState::Unlocked, &mut delta);
            if let Some(lesson) = first.lessons.first() {
                e.open_lesson(lesson, &mut delta);
            }
        }
        e
    }

    pub fn state(&self, node: NodeId) -> Option<NodeState> {
        self.states.get(&node).copied()
    }

    pub fn states(&self) -> &BTreeMap<NodeId, NodeState> {
        &self.states
    }

    pub fn attempts(&self, quiz: QuizId) -> u32 {
        self.attempts.get(&quiz).copied().unwrap_or(0)
    }

    pub fn best_points(&self, quiz: QuizId) -> Option<u32> {
        self.best_points.get(&quiz).copied()
    }

    /// Sum over quizzes of the best points earned on each.
    pub fn total_points(&self) -> u32 {
        self.best_points.values().sum()
    }

    pub fn course_completed(&self) -> bool {
        self.course_completed
    }

    /// The post-course evaluation opens once the course is completed.
    pub fn survey_unlocked(&self) -> bool {
        self.course_completed
    }

    pub fn steps_completed(&self) -> u32 {
        self.states
            .iter()
            .filter(|(n, s)| !matches!(n, NodeId::Topic(_)) && **s == NodeState::Completed)
            .count() as u32
    }

    /// Rounded completion percentage over lessons and quizzes.
    pub fn progress_percent(&self, course: &CourseGraph) -> u32 {
        let total = course.steps_total();
        if total == 0 {
            return 0;
        }
        round_half_up_div(
            100 * u64::from(self.steps_completed()),
            u64::from(total),
        ) as u32
    }

    fn set(&mut self, node: NodeId, to: NodeState, delta: &mut UnlockDelta) {
        let slot = self.states.entry(node).or_insert(NodeState::Locked);
        // States only move forward.
        if to <= *slot {
            return;
        }
        *slot = to;
        match to {
            NodeState::Unlocked => delta.unlocked.push(node),
            NodeState::Completed => delta.completed.push(node),
            NodeState::Locked => {}
        }
    }

    fn gate_open(&self, lesson: &Lesson) -> bool {
        !self.economy_gates
            || crate::runtime::economy_gate_check(self.total_points(), lesson.gate_cost.unwrap_or(0))
    }

    fn open_lesson(&mut self, lesson: &Lesson, delta: &mut UnlockDelta) {
        if self.gate_open(lesson) {
            self.set(NodeId::Lesson(lesson.lesson_id), NodeState::Unlocked, delta);
            if self.economy_gates && lesson.gate_cost.is_some() {
                delta.gates_opened.push(lesson.lesson_id);
            }
        } else {
            self.pending_gates.insert(lesson.lesson_id);
        }
    }

    fn recheck_gates(&mut self, course: &CourseGraph, delta: &mut UnlockDelta) {
        let pending: Vec<LessonId> = self.pending_gates.iter().copied().collect();
        for id in pending {
            let lesson = course.lesson(id).expect("pending lesson belongs to course");
            if self.gate_open(lesson) {
                self.pending_gates.remove(&id);
                self.set(NodeId::Lesson(id), NodeState::Unlocked, delta);
                delta.gates_opened.push(id);
            }
        }
    }

    /// Lessons waiting on a points gate.
    pub fn pending_gates(&self) -> impl Iterator<Item = LessonId> + '_ {
        self.pending_gates.iter().copied()
    }

    fn require_open(&self, node: NodeId) -> Result<NodeState, CourseError> {
        match self.states.get(&node) {
            None => Err(CourseError::UnknownNode(node)),
            Some(NodeState::Locked) => Err(CourseError::Locked(node)),
            Some(&s) => Ok(s),
        }
    }

    /// Mark an unlocked lesson as studied, opening its quizzes.
    pub fn complete_lesson(
        &mut self,
        course: &CourseGraph,
        lesson_id: LessonId,
    ) -> Result<UnlockDelta, CourseError> {
        let node = NodeId::Lesson(lesson_id);
        let mut delta = UnlockDelta::default();
        if self.require_open(node)? == NodeState::Completed {
            return Ok(delta);
        }
        let lesson = course.lesson(lesson_id).ok_or(CourseError::UnknownNode(node))?;
        self.set(node, NodeState::Completed, &mut delta);
        for q in &lesson.quizzes {
            self.set(NodeId::Quiz(q.quiz_id), NodeState::Unlocked, &mut delta);
        }
        if lesson.quizzes.is_empty() {
            self.advance(course, lesson, &mut delta);
        }
        Ok(delta)
    }

    /// Record a graded attempt and apply any unlocks it causes.
    pub fn record_attempt_and_unlock(
        &mut self,
        course: &CourseGraph,
        result: &AttemptResult,
    ) -> Result<UnlockDelta, CourseError> {
        let node = NodeId::Quiz(result.quiz_id);
        let prior = self.require_open(node)?;
        let mut delta = UnlockDelta::default();
        *self.attempts.entry(result.quiz_id).or_insert(0) += 1;
        let best = self.best_points.entry(result.quiz_id).or_insert(0);
        let points_changed = result.points > *best;
        *best = (*best).max(result.points);
        if result.passed && prior == NodeState::Unlocked {
            self.set(node, NodeState::Completed, &mut delta);
            let lesson = course
                .lesson_of_quiz(result.quiz_id)
                .ok_or(CourseError::UnknownNode(node))?;
            let done = lesson
                .quizzes
                .iter()
                .all(|q| self.state(NodeId::Quiz(q.quiz_id)) == Some(NodeState::Completed));
            if done {
                self.advance(course, lesson, &mut delta);
            }
        }
        if points_changed {
            self.recheck_gates(course, &mut delta);
        }
        Ok(delta)
    }

    fn advance(&mut self, course: &CourseGraph, lesson: &Lesson, delta: &mut UnlockDelta) {
        let topic = course
            .topic_of_lesson(lesson.lesson_id)
            .expect("lesson belongs to course");
        let next = course.next_lesson(lesson.lesson_id);
        let crosses = next.is_none_or(|n| !topic.lessons.iter().any(|l| l.lesson_id == n.lesson_id));
        if crosses {
            self.set(NodeId::Topic(topic.topic_id), NodeState::Completed, delta);
            if let Some(n) = next {
                let next_topic = course.topic_of_lesson(n.lesson_id).expect("lesson belongs to course");
                self.set(NodeId::Topic(next_topic.topic_id), NodeState::Unlocked, delta);
            }
        }
        if let Some(n) = next {
            self.open_lesson(n, delta);
        }
    }

    /// Open an unlocked node again.
    pub fn revisit(&self, course: &CourseGraph, node: NodeId) -> Result<ContentHandle, CourseError> {
        self.require_open(node)?;
        let handle = match node {
            NodeId::Topic(id) => {
                let t = course.topic(id).ok_or(CourseError::UnknownNode(node))?;
                ContentHandle {
                    node,
                    title: t.title.clone(),
                    content: vec![],
                    time_limit_secs: None,
                }
            }
            NodeId::Lesson(id) => {
                let l = course.lesson(id).ok_or(CourseError::UnknownNode(node))?;
                ContentHandle {
                    node,
                    title: l.title.clone(),
                    content: l.content.clone(),
                    time_limit_secs: None,
                }
            }
            NodeId::Quiz(id) => {
                let q = course.quiz(id).ok_or(CourseError::UnknownNode(node))?;
                ContentHandle {
                    node,
                    title: q.title.clone(),
                    content: q.content.clone(),
                    time_limit_secs: q.time_limit_secs,
                }
            }
        };
        Ok(handle)
    }

    /// Finish the course once every topic is completed. Repeat calls return
    /// the same award with `first_time` cleared.
    pub fn complete_course(&mut self, course: &CourseGraph) -> Result<CompletionAward, CourseError> {
        let remaining = course
            .topics
            .iter()
            .filter(|t| self.state(NodeId::Topic(t.topic_id)) != Some(NodeState::Completed))
            .count();
        if remaining > 0 {
            return Err(CourseError::NotFinished { remaining });
        }
        let first_time = !self.course_completed;
        self.course_completed = true;
        Ok(CompletionAward {
            course_id: self.course_id,
            total_points: self.total_points(),
            first_time,
        })
    }
}
