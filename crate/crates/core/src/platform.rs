//! Single entry point that ties assessment, course engine, runtime and
//! telemetry together.
//!
//! Every state change goes through [`Platform::apply`] as a [`Command`].
//! Accepted commands are appended to a journal; replaying the journal on a
//! fresh platform built from the same [`PlatformSetup`] rebuilds identical
//! state, which is how both persistence and crash recovery work.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::assessment::{AssessmentError, AssessmentResponse, Choice, CognitiveCore, Instrument};
use crate::course::{
    grade_quiz, AttemptResult, CompletionAward, ContentHandle, CourseError, CourseGraph,
    LearnerEnrollment, NodeState, Submission, UnlockDelta,
};
use crate::elements::{ids, ElementCatalog, ElementId, ElementMapping};
use crate::ids::{CourseId, EventId, LearnerId, LessonId, NodeId, QuizId};
use crate::runtime::{
    queue_feedback, ActivityEvent, BadgeCatalog, ChannelMap, ElementEffect, EventKind,
    FeedbackRecord, FeedbackTransport, GamificationState, LeaderboardEntry, NullTransport, Reducer,
};
use crate::telemetry::{
    cohort_summary, stats_report, CohortMember, CohortSummary, EvaluationResponse, Questionnaire,
    QuizAttemptRecord, StatsReport, TelemetryError, TimeSpent,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlatformError {
    #[error("unknown course {0}")]
    UnknownCourse(CourseId),
    #[error("unknown quiz {0}")]
    UnknownQuiz(QuizId),
    #[error("learner {learner} is not enrolled in course {course}")]
    NotEnrolled { learner: LearnerId, course: CourseId },
    #[error("learner {learner} is already enrolled in course {course}")]
    AlreadyEnrolled { learner: LearnerId, course: CourseId },
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
    #[error(transparent)]
    Course(#[from] CourseError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error("command at {at} precedes learner {learner}'s last activity at {last}")]
    OutOfOrder {
        learner: LearnerId,
        at: DateTime<Utc>,
        last: DateTime<Utc>,
    },
    #[error("the evaluation survey opens after the course is completed")]
    SurveyLocked,
    #[error("learner {0} already submitted an evaluation")]
    AlreadyEvaluated(LearnerId),
    #[error("{0} is not active for this learner")]
    ElementInactive(ElementId),
    #[error("course setup rejected: {0}")]
    Setup(String),
    #[error("journal entry {seq} is out of sequence (expected {expected})")]
    JournalSequence { seq: u64, expected: u64 },
    #[error("no timer is running on quiz {0}")]
    NoTimer(QuizId),
}

impl PlatformError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownCourse(_) => "unknown_course",
            Self::UnknownQuiz(_) => "unknown_quiz",
            Self::NotEnrolled { .. } => "not_enrolled",
            Self::AlreadyEnrolled { .. } => "already_enrolled",
            Self::Assessment(_) => "invalid_assessment",
            Self::Course(CourseError::Locked(_)) => "locked",
            Self::Course(CourseError::UnknownNode(_)) => "unknown_node",
            Self::Course(CourseError::NotFinished { .. }) => "course_not_finished",
            Self::Course(CourseError::InvalidSubmission(_)) => "invalid_submission",
            Self::Course(_) => "invalid_course",
            Self::Telemetry(_) => "invalid_record",
            Self::OutOfOrder { .. } => "out_of_order",
            Self::SurveyLocked => "survey_locked",
            Self::AlreadyEvaluated(_) => "already_evaluated",
            Self::ElementInactive(_) => "element_inactive",
            Self::Setup(_) => "invalid_setup",
            Self::JournalSequence { .. } => "journal_sequence",
            Self::NoTimer(_) => "no_timer",
        }
    }
}

/// Everything a platform is built from, apart from the journal.
#[derive(Debug, Clone)]
pub struct PlatformSetup {
    pub courses: Vec<CourseGraph>,
    pub mapping: ElementMapping,
    pub catalog: ElementCatalog,
    pub instrument: Instrument,
    pub badges: BadgeCatalog,
    pub channels: ChannelMap,
    pub questionnaire: Questionnaire,
    /// Replaces every course's own pass threshold when set.
    pub pass_threshold_override: Option<u8>,
}

impl PlatformSetup {
    /// The shipped course, mapping and instruments.
    pub fn standard() -> Self {
        Self::with_courses(vec![CourseGraph::instructional_innovation()])
    }

    pub fn with_courses(courses: Vec<CourseGraph>) -> Self {
        Self {
            courses,
            mapping: ElementMapping::deployed(),
            catalog: ElementCatalog::standard(),
            instrument: Instrument::abridged(),
            badges: BadgeCatalog::standard(),
            channels: ChannelMap::standard(),
            questionnaire: Questionnaire::standard(),
            pass_threshold_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Enroll {
        learner: LearnerId,
        course: CourseId,
        answers: Vec<Choice>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gender: Option<String>,
        at: DateTime<Utc>,
    },
    ViewNode {
        learner: LearnerId,
        course: CourseId,
        node: NodeId,
        at: DateTime<Utc>,
    },
    CompleteLesson {
        learner: LearnerId,
        course: CourseId,
        lesson: LessonId,
        at: DateTime<Utc>,
    },
    SubmitQuiz {
        learner: LearnerId,
        quiz: QuizId,
        submission: Submission,
        time_spent_secs: u32,
        at: DateTime<Utc>,
    },
    /// Save answers on a running timed quiz. They are submitted for the
    /// learner if the timer runs out first.
    SaveDraft {
        learner: LearnerId,
        quiz: QuizId,
        answers: Vec<Option<usize>>,
        at: DateTime<Utc>,
    },
    CompleteCourse {
        learner: LearnerId,
        course: CourseId,
        at: DateTime<Utc>,
    },
    SubmitEvaluation {
        learner: LearnerId,
        course: CourseId,
        /// Statement id to rating. Written as pairs so it survives the
        /// flattened journal encoding.
        #[serde(with = "crate::ids::map_as_pairs")]
        answers: BTreeMap<u8, u8>,
        at: DateTime<Utc>,
    },
    /// Advance the clock, expiring due timers.
    Tick { at: DateTime<Utc> },
}

impl Command {
    pub fn at(&self) -> DateTime<Utc> {
        match self {
            Self::Enroll { at, .. }
            | Self::ViewNode { at, .. }
            | Self::CompleteLesson { at, .. }
            | Self::SubmitQuiz { at, .. }
            | Self::SaveDraft { at, .. }
            | Self::CompleteCourse { at, .. }
            | Self::SubmitEvaluation { at, .. }
            | Self::Tick { at } => *at,
        }
    }

    pub fn learner(&self) -> Option<LearnerId> {
        match self {
            Self::Enroll { learner, .. }
            | Self::ViewNode { learner, .. }
            | Self::CompleteLesson { learner, .. }
            | Self::SubmitQuiz { learner, .. }
            | Self::SaveDraft { learner, .. }
            | Self::CompleteCourse { learner, .. }
            | Self::SubmitEvaluation { learner, .. } => Some(*learner),
            Self::Tick { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub command: Command,
}

/// What an accepted command produced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Outcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core: Option<CognitiveCore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempt: Option<AttemptResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<ContentHandle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub award: Option<CompletionAward>,
    pub delta: UnlockDelta,
    /// Effects for the acting learner, surfaced ones only.
    pub effects: Vec<ElementEffect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enrollment {
    pub state: LearnerEnrollment,
    pub core: CognitiveCore,
    pub active: Vec<ElementId>,
    pub assessment: AssessmentResponse,
    pub gender: Option<String>,
    pub enrolled_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectRecord {
    pub event_id: EventId,
    pub learner_id: LearnerId,
    pub at: DateTime<Utc>,
    pub effect: ElementEffect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseRuntime {
    pub graph: CourseGraph,
    pub enrollments: BTreeMap<LearnerId, Enrollment>,
    pub game: GamificationState,
    pub attempts: Vec<QuizAttemptRecord>,
    pub events: Vec<ActivityEvent>,
    pub effects: Vec<EffectRecord>,
    pub feedback: Vec<FeedbackRecord>,
    pub evaluations: Vec<EvaluationResponse>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub completed: u32,
    pub total: u32,
    pub percent: u32,
}

/// A learner's view of one course.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LearnerView {
    pub learner_id: LearnerId,
    pub course_id: CourseId,
    pub core: CognitiveCore,
    pub active_elements: Vec<ElementId>,
    pub nodes: Vec<NodeView>,
    pub progress: Progress,
    pub points: u32,
    pub badges: Vec<String>,
    pub pending_gates: Vec<LessonId>,
    pub course_completed: bool,
    pub survey_unlocked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeView {
    pub node: NodeId,
    pub title: String,
    pub state: NodeState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_points: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CourseReport {
    pub course_id: CourseId,
    pub attempts_logged: usize,
    pub cohort: CohortSummary,
    /// Absent until at least one evaluation has been submitted.
    pub evaluation: Option<StatsReport>,
}

pub struct Platform {
    setup: PlatformSetup,
    courses: BTreeMap<CourseId, CourseRuntime>,
    quiz_index: BTreeMap<QuizId, CourseId>,
    journal: Vec<JournalEntry>,
    last_at: BTreeMap<LearnerId, DateTime<Utc>>,
    next_event: u64,
    transport: Box<dyn FeedbackTransport>,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform")
            .field("courses", &self.courses.keys().collect::<Vec<_>>())
            .field("journal_len", &self.journal.len())
            .finish()
    }
}

impl Platform {
    pub fn new(mut setup: PlatformSetup) -> Result<Self, PlatformError> {
        let mut courses = BTreeMap::new();
        let mut quiz_index = BTreeMap::new();
        for graph in &mut setup.courses {
            if let Some(t) = setup.pass_threshold_override {
                graph.pass_threshold_pct = t;
            }
            graph.validate()?;
            for (_, q) in graph.quizzes() {
                if quiz_index.insert(q.quiz_id, graph.course_id).is_some() {
                    return Err(PlatformError::Setup(format!(
                        "quiz {} appears in more than one course",
                        q.quiz_id
                    )));
                }
            }
            let runtime = CourseRuntime {
                graph: graph.clone(),
                enrollments: BTreeMap::new(),
                game: GamificationState::default(),
                attempts: Vec::new(),
                events: Vec::new(),
                effects: Vec::new(),
                feedback: Vec::new(),
                evaluations: Vec::new(),
            };
            if courses.insert(graph.course_id, runtime).is_some() {
                return Err(PlatformError::Setup(format!(
                    "course {} defined twice",
                    graph.course_id
                )));
            }
        }
        Ok(Self {
            setup,
            courses,
            quiz_index,
            journal: Vec::new(),
            last_at: BTreeMap::new(),
            next_event: 1,
            transport: Box::new(NullTransport),
        })
    }

    pub fn standard() -> Self {
        Self::new(PlatformSetup::standard()).expect("shipped setup is valid")
    }

    pub fn set_transport(&mut self, transport: Box<dyn FeedbackTransport>) {
        self.transport = transport;
    }

    pub fn setup(&self) -> &PlatformSetup {
        &self.setup
    }

    /// Rebuild a platform by applying a journal from the start.
    pub fn replay(setup: PlatformSetup, journal: &[JournalEntry]) -> Result<Self, PlatformError> {
        let mut p = Self::new(setup)?;
        for entry in journal {
            p.apply_entry(entry)?;
        }
        Ok(p)
    }

    /// Apply one journal entry, checking that it continues the sequence.
    pub fn apply_entry(&mut self, entry: &JournalEntry) -> Result<Outcome, PlatformError> {
        let expected = self.journal.len() as u64 + 1;
        if entry.seq != expected {
            return Err(PlatformError::JournalSequence {
                seq: entry.seq,
                expected,
            });
        }
        self.apply(entry.command.clone())
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn course(&self, id: CourseId) -> Result<&CourseRuntime, PlatformError> {
        self.courses.get(&id).ok_or(PlatformError::UnknownCourse(id))
    }

    pub fn courses(&self) -> impl Iterator<Item = &CourseRuntime> {
        self.courses.values()
    }

    /// Timestamp of the learner's latest accepted command.
    pub fn last_activity(&self, learner: LearnerId) -> Option<DateTime<Utc>> {
        self.last_at.get(&learner).copied()
    }

    /// Earliest running quiz timer across all courses.
    pub fn next_deadline(&self) -> Option<DateTime<Utc>> {
        self.courses
            .values()
            .flat_map(|rt| rt.game.timers.values())
            .min()
            .copied()
    }

    pub fn course_of_quiz(&self, quiz: QuizId) -> Option<CourseId> {
        self.quiz_index.get(&quiz).copied()
    }

    pub fn enrollment(
        &self,
        learner: LearnerId,
        course: CourseId,
    ) -> Result<&Enrollment, PlatformError> {
        self.course(course)?
            .enrollments
            .get(&learner)
            .ok_or(PlatformError::NotEnrolled { learner, course })
    }

    /// Serialized form of all derived state, for equality checks across restarts.
    pub fn state_json(&self) -> String {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            courses: &'a BTreeMap<CourseId, CourseRuntime>,
            last_at: &'a BTreeMap<LearnerId, DateTime<Utc>>,
            next_event: u64,
        }
        serde_json::to_string(&Snapshot {
            courses: &self.courses,
            last_at: &self.last_at,
            next_event: self.next_event,
        })
        .expect("state serializes")
    }

    /// Validate and execute a command. Rejected commands leave no trace.
    pub fn apply(&mut self, command: Command) -> Result<Outcome, PlatformError> {
        let at = command.at();
        if let Some(learner) = command.learner() {
            if let Some(&last) = self.last_at.get(&learner) {
                if at < last {
                    return Err(PlatformError::OutOfOrder { learner, at, last });
                }
            }
        }
        let outcome = match &command {
            Command::Enroll {
                learner,
                course,
                answers,
                gender,
                at,
            } => self.enroll(*learner, *course, answers, gender.clone(), *at)?,
            Command::ViewNode {
                learner,
                course,
                node,
                at,
            } => self.view_node(*learner, *course, *node, *at)?,
            Command::CompleteLesson {
                learner,
                course,
                lesson,
                at,
            } => self.complete_lesson(*learner, *course, *lesson, *at)?,
            Command::SubmitQuiz {
                learner,
                quiz,
                submission,
                time_spent_secs,
                at,
            } => self.submit_quiz(*learner, *quiz, submission, *time_spent_secs, *at)?,
            Command::SaveDraft {
                learner,
                quiz,
                answers,
                ..
            } => self.save_draft(*learner, *quiz, answers)?,
            Command::CompleteCourse {
                learner,
                course,
                at,
            } => self.complete_course(*learner, *course, *at)?,
            Command::SubmitEvaluation {
                learner,
                course,
                answers,
                at,
            } => self.submit_evaluation(*learner, *course, answers, *at)?,
            Command::Tick { at } => self.tick(*at),
        };
        if let Some(learner) = command.learner() {
            self.last_at.insert(learner, at);
        }
        let seq = self.journal.len() as u64 + 1;
        self.journal.push(JournalEntry { seq, command });
        Ok(outcome)
    }

    fn runtime_mut(&mut self, id: CourseId) -> Result<&mut CourseRuntime, PlatformError> {
        self.courses.get_mut(&id).ok_or(PlatformError::UnknownCourse(id))
    }

    fn enrolled_mut(
        &mut self,
        learner: LearnerId,
        course: CourseId,
    ) -> Result<&mut Enrollment, PlatformError> {
        self.runtime_mut(course)?
            .enrollments
            .get_mut(&learner)
            .ok_or(PlatformError::NotEnrolled { learner, course })
    }

    /// Run engine events through the reducer and record everything they produce.
    fn emit(
        &mut self,
        course: CourseId,
        learner: LearnerId,
        at: DateTime<Utc>,
        kinds: Vec<EventKind>,
    ) -> Vec<ElementEffect> {
        let rt = self.courses.get_mut(&course).expect("course checked by caller");
        let active = rt
            .enrollments
            .get(&learner)
            .map(|e| e.active.clone())
            .unwrap_or_default();
        let reducer = Reducer {
            course: &rt.graph,
            catalog: &self.setup.catalog,
            badges: &self.setup.badges,
        };
        let mut surfaced = Vec::new();
        for kind in kinds {
            let event = ActivityEvent {
                event_id: EventId(self.next_event),
                learner_id: learner,
                course_id: course,
                at,
                kind,
            };
            self.next_event += 1;
            let effects = reducer.reduce(&mut rt.game, &event, &active);
            let records = queue_feedback(learner, at, &effects, &self.setup.channels);
            for r in &records {
                // Delivery is best effort; the record stays queryable either way.
                let _ = self.transport.deliver(r);
            }
            rt.feedback.extend(records);
            for e in &effects {
                rt.effects.push(EffectRecord {
                    event_id: event.event_id,
                    learner_id: learner,
                    at,
                    effect: e.clone(),
                });
            }
            surfaced.extend(effects.into_iter().filter(|e| e.surfaced));
            rt.events.push(event);
        }
        surfaced
    }

    fn topic_events(delta: &UnlockDelta) -> impl Iterator<Item = EventKind> + '_ {
        delta
            .completed_topics()
            .map(|topic| EventKind::TopicCompleted { topic })
    }

    fn enroll(
        &mut self,
        learner: LearnerId,
        course: CourseId,
        answers: &[Choice],
        gender: Option<String>,
        at: DateTime<Utc>,
    ) -> Result<Outcome, PlatformError> {
        let rt = self.course(course)?;
        if rt.enrollments.contains_key(&learner) {
            return Err(PlatformError::AlreadyEnrolled { learner, course });
        }
        let assessment = AssessmentResponse::from_sequence(learner, answers, at);
        let core = self.setup.instrument.determine_cognitive_core(&assessment)?;
        let active = self.setup.mapping.active_elements(core).to_vec();
        let economy = active.iter().any(|e| e == ids::ECONOMY);
        let state = LearnerEnrollment::enroll(&rt.graph, learner, economy);
        self.runtime_mut(course)?.enrollments.insert(
            learner,
            Enrollment {
                state,
                core,
                active,
                assessment,
                gender,
                enrolled_at: at,
            },
        );
        let effects = self.emit(course, learner, at, vec![EventKind::Enrolled]);
        Ok(Outcome {
            core: Some(core),
            effects,
            ..Outcome::default()
        })
    }

    fn view_node(
        &mut self,
        learner: LearnerId,
        course: CourseId,
        node: NodeId,
        at: DateTime<Utc>,
    ) -> Result<Outcome, PlatformError> {
        let rt = self.course(course)?;
        let e = self.enrollment(learner, course)?;
        let content = e.state.revisit(&rt.graph, node)?;
        let effects = self.emit(course, learner, at, vec![EventKind::ContentViewed { node }]);
        Ok(Outcome {
            content: Some(content),
            effects,
            ..Outcome::default()
        })
    }

    fn complete_lesson(
        &mut self,
        learner: LearnerId,
        course: CourseId,
        lesson: LessonId,
        at: DateTime<Utc>,
    ) -> Result<Outcome, PlatformError> {
        let graph = self.course(course)?.graph.clone();
        let e = self.enrolled_mut(learner, course)?;
        let delta = e.state.complete_lesson(&graph, lesson)?;
        if delta.is_empty() {
            return Ok(Outcome::default());
        }
        let mut kinds = vec![EventKind::LessonCompleted {
            lesson,
            delta: delta.clone(),
        }];
        kinds.extend(Self::topic_events(&delta));
        let effects = self.emit(course, learner, at, kinds);
        Ok(Outcome {
            delta,
            effects,
            ..Outcome::default()
        })
    }

    fn submit_quiz(
        &mut self,
        learner: LearnerId,
        quiz: QuizId,
        submission: &Submission,
        time_spent_secs: u32,
        at: DateTime<Utc>,
    ) -> Result<Outcome, PlatformError> {
        let course = self.course_of_quiz(quiz).ok_or(PlatformError::UnknownQuiz(quiz))?;
        let graph = self.course(course)?.graph.clone();
        let q = graph.quiz(quiz).ok_or(PlatformError::UnknownQuiz(quiz))?;
        let e = self.enrolled_mut(learner, course)?;
        if e.state.state(NodeId::Quiz(quiz)) == Some(NodeState::Locked) {
            return Err(CourseError::Locked(NodeId::Quiz(quiz)).into());
        }
        let result = grade_quiz(q, submission, graph.pass_threshold_pct)?;
        let delta = e.state.record_attempt_and_unlock(&graph, &result)?;
        let record = QuizAttemptRecord {
            user_id: learner,
            quiz_id: quiz,
            score: result.score,
            total: result.total,
            date: at.date_naive(),
            points: result.points,
            points_total: result.points_total,
            percentage: result.percentage,
            time_spent: TimeSpent(time_spent_secs),
            passed: result.passed,
            course_id: course,
        };
        record
            .validate(graph.pass_threshold_pct)
            .expect("engine grading satisfies the log invariants");
        self.runtime_mut(course)?.attempts.push(record);
        let mut kinds = vec![EventKind::QuizAttempted {
            result: result.clone(),
            delta: delta.clone(),
            time_spent_secs,
        }];
        kinds.extend(Self::topic_events(&delta));
        let effects = self.emit(course, learner, at, kinds);
        Ok(Outcome {
            attempt: Some(result),
            delta,
            effects,
            ..Outcome::default()
        })
    }

    fn save_draft(
        &mut self,
        learner: LearnerId,
        quiz: QuizId,
        answers: &[Option<usize>],
    ) -> Result<Outcome, PlatformError> {
        let course = self.course_of_quiz(quiz).ok_or(PlatformError::UnknownQuiz(quiz))?;
        let rt = self.course(course)?;
        self.enrollment(learner, course)?;
        let q = rt.graph.quiz(quiz).ok_or(PlatformError::UnknownQuiz(quiz))?;
        // Grading checks the answer shape; the result is discarded.
        grade_quiz(q, &Submission::Answers(answers.to_vec()), rt.graph.pass_threshold_pct)?;
        let rt = self.runtime_mut(course)?;
        if !rt.game.save_draft(learner, quiz, answers.to_vec()) {
            return Err(PlatformError::NoTimer(quiz));
        }
        Ok(Outcome::default())
    }

    fn complete_course(
        &mut self,
        learner: LearnerId,
        course: CourseId,
        at: DateTime<Utc>,
    ) -> Result<Outcome, PlatformError> {
        let graph = self.course(course)?.graph.clone();
        let e = self.enrolled_mut(learner, course)?;
        let award = e.state.complete_course(&graph)?;
        let effects = self.emit(
            course,
            learner,
            at,
            vec![EventKind::CourseCompleted {
                award: award.clone(),
            }],
        );
        Ok(Outcome {
            award: Some(award),
            effects,
            ..Outcome::default()
        })
    }

    fn submit_evaluation(
        &mut self,
        learner: LearnerId,
        course: CourseId,
        answers: &BTreeMap<u8, u8>,
        at: DateTime<Utc>,
    ) -> Result<Outcome, PlatformError> {
        let rt = self.course(course)?;
        let e = self.enrollment(learner, course)?;
        if !e.state.survey_unlocked() {
            return Err(PlatformError::SurveyLocked);
        }
        if rt.evaluations.iter().any(|r| r.learner_id == learner) {
            return Err(PlatformError::AlreadyEvaluated(learner));
        }
        let response = EvaluationResponse {
            learner_id: learner,
            core: e.core,
            answers: answers.clone(),
            submitted_at: at,
        };
        self.setup.questionnaire.validate_response(&response)?;
        self.runtime_mut(course)?.evaluations.push(response);
        Ok(Outcome::default())
    }

    /// Expire due timers and submit each one's draft, unanswered questions
    /// scoring nothing.
    fn tick(&mut self, at: DateTime<Utc>) -> Outcome {
        let ids: Vec<CourseId> = self.courses.keys().copied().collect();
        let mut expired = Vec::new();
        for id in ids {
            let rt = self.courses.get_mut(&id).expect("listed");
            let reducer = Reducer {
                course: &rt.graph,
                catalog: &self.setup.catalog,
                badges: &self.setup.badges,
            };
            for (timer, effect) in reducer.tick(&mut rt.game, at) {
                let learner = timer.learner_id;
                if let Some(q) = rt.graph.quiz(timer.quiz_id).filter(|q| !q.activity_kind.instructor_scored()) {
                    expired.push((timer, q.questions.len(), q.time_limit_secs.unwrap_or(0)));
                }
                let records = queue_feedback(
                    learner,
                    at,
                    std::slice::from_ref(&effect),
                    &self.setup.channels,
                );
                for r in &records {
                    let _ = self.transport.deliver(r);
                }
                rt.feedback.extend(records);
                rt.effects.push(EffectRecord {
                    event_id: EventId(0),
                    learner_id: learner,
                    at,
                    effect,
                });
            }
        }
        let mut effects = Vec::new();
        for (timer, questions, limit) in expired {
            let answers = timer.draft.unwrap_or_else(|| vec![None; questions]);
            let o = self
                .submit_quiz(timer.learner_id, timer.quiz_id, &Submission::Answers(answers), limit, timer.deadline)
                .expect("a timed quiz stays open and its draft was checked when saved");
            effects.extend(o.effects);
        }
        Outcome {
            effects,
            ..Outcome::default()
        }
    }

    pub fn learner_view(
        &self,
        learner: LearnerId,
        course: CourseId,
    ) -> Result<LearnerView, PlatformError> {
        let rt = self.course(course)?;
        let e = self.enrollment(learner, course)?;
        let title = |n: NodeId| match n {
            NodeId::Topic(t) => rt.graph.topic(t).map(|t| t.title.clone()),
            NodeId::Lesson(l) => rt.graph.lesson(l).map(|l| l.title.clone()),
            NodeId::Quiz(q) => rt.graph.quiz(q).map(|q| q.title.clone()),
        };
        let nodes = rt
            .graph
            .nodes()
            .into_iter()
            .map(|n| NodeView {
                node: n,
                title: title(n).unwrap_or_default(),
                state: e.state.state(n).unwrap_or(NodeState::Locked),
                best_points: match n {
                    NodeId::Quiz(q) => e.state.best_points(q),
                    _ => None,
                },
            })
            .collect();
        let badges = rt
            .game
            .learners
            .get(&learner)
            .map(|g| g.badges.iter().cloned().collect())
            .unwrap_or_default();
        Ok(LearnerView {
            learner_id: learner,
            course_id: course,
            core: e.core,
            active_elements: e.active.clone(),
            nodes,
            progress: Progress {
                completed: e.state.steps_completed(),
                total: rt.graph.steps_total(),
                percent: e.state.progress_percent(&rt.graph),
            },
            points: e.state.total_points(),
            badges,
            pending_gates: e.state.pending_gates().collect(),
            course_completed: e.state.course_completed(),
            survey_unlocked: e.state.survey_unlocked(),
        })
    }

    /// Standings, unrestricted. For instructors and reports.
    pub fn leaderboard(&self, course: CourseId) -> Result<Vec<LeaderboardEntry>, PlatformError> {
        Ok(self.course(course)?.game.leaderboard())
    }

    /// Standings as a learner may see them: only with competition active.
    pub fn leaderboard_for(
        &self,
        learner: LearnerId,
        course: CourseId,
    ) -> Result<Vec<LeaderboardEntry>, PlatformError> {
        let e = self.enrollment(learner, course)?;
        if !e.active.iter().any(|a| a == ids::COMPETITION) {
            return Err(PlatformError::ElementInactive(ElementId::new(ids::COMPETITION)));
        }
        self.leaderboard(course)
    }

    /// Activity log rows in export order.
    pub fn export_log(&self, course: CourseId) -> Result<Vec<QuizAttemptRecord>, PlatformError> {
        let mut rows = self.course(course)?.attempts.clone();
        crate::telemetry::sort_for_export(&mut rows);
        Ok(rows)
    }

    pub fn export_log_csv(&self, course: CourseId) -> Result<String, PlatformError> {
        Ok(crate::telemetry::records_to_csv(&self.export_log(course)?))
    }

    pub fn cohort_members(&self, course: CourseId) -> Result<Vec<CohortMember>, PlatformError> {
        Ok(self
            .course(course)?
            .enrollments
            .iter()
            .map(|(&id, e)| CohortMember {
                learner_id: id,
                core: e.core,
                gender: e.gender.clone(),
                completed: e.state.course_completed(),
            })
            .collect())
    }

    pub fn report(&self, course: CourseId) -> Result<CourseReport, PlatformError> {
        let rt = self.course(course)?;
        let cohort = cohort_summary(&self.cohort_members(course)?, &rt.evaluations);
        let evaluation = if rt.evaluations.is_empty() {
            None
        } else {
            Some(stats_report(&rt.evaluations, &self.setup.questionnaire)?)
        };
        Ok(CourseReport {
            course_id: course,
            attempts_logged: rt.attempts.len(),
            cohort,
            evaluation,
        })
    }

    /// Surfaced effects whose element is not in the learner's tuple. Always
    /// empty for a correct runtime.
    pub fn personalization_violations(&self) -> Vec<&EffectRecord> {
        self.courses
            .values()
            .flat_map(|rt| {
                rt.effects.iter().filter(move |r| {
                    let Some(el) = &r.effect.element else { return false };
                    r.effect.surfaced
                        && !rt
                            .enrollments
                            .get(&r.learner_id)
                            .is_some_and(|e| e.active.contains(el))
                })
            })
            .collect()
    }

    /// Elements that surfaced at least one effect, across all courses.
    pub fn surfaced_elements(&self) -> BTreeSet<ElementId> {
        self.courses
            .values()
            .flat_map(|rt| rt.effects.iter())
            .filter(|r| r.effect.surfaced)
            .filter_map(|r| r.effect.element.clone())
            .collect()
    }
}

pub fn journal_to_jsonl(journal: &[JournalEntry]) -> String {
    journal
        .iter()
        .map(|e| serde_json::to_string(e).expect("journal serializes") + "\n")
        .collect()
}

pub fn journal_from_jsonl(src: &str) -> Result<Vec<JournalEntry>, String> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}
