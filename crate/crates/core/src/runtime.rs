//! Gamification runtime: turns learner activity into element effects.
//!
//! The reducer consumes one [`ActivityEvent`] at a time together with the
//! learner's active element tuple and returns the effects to show. Points,
//! progress and leaderboard standings are tracked for everyone so that the
//! numbers stay consistent; an effect is surfaced only when its element is
//! in the learner's tuple.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::course::{AttemptResult, CompletionAward, CourseGraph, UnlockDelta};
use crate::elements::{ids, ElementCatalog, ElementId};
use crate::ids::{CourseId, EventId, LearnerId, LessonId, NodeId, QuizId, TopicId};
use crate::numeric::round_half_up_div;

const DEFAULT_BADGES: &str = include_str!("../data/badges.toml");
const DEFAULT_CHANNELS: &str = include_str!("../data/channels.toml");

/// True when a learner holding `points` may open a lesson costing `cost`.
pub fn economy_gate_check(points: u32, cost: u32) -> bool {
    points >= cost
}

/// Completed steps as a rounded percentage.
pub fn progress_fraction(completed: u32, total: u32) -> u32 {
    if total == 0 {
        return 0;
    }
    round_half_up_div(100 * u64::from(completed.min(total)), u64::from(total)) as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub event_id: EventId,
    pub learner_id: LearnerId,
    pub course_id: CourseId,
    pub at: DateTime<Utc>,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Enrolled,
    ContentViewed { node: NodeId },
    LessonCompleted { lesson: LessonId, delta: UnlockDelta },
    QuizAttempted {
        result: AttemptResult,
        delta: UnlockDelta,
        time_spent_secs: u32,
    },
    TopicCompleted { topic: TopicId },
    CourseCompleted { award: CompletionAward },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Enrolled => "enrolled",
            Self::ContentViewed { .. } => "content_viewed",
            Self::LessonCompleted { .. } => "lesson_completed",
            Self::QuizAttempted { .. } => "quiz_attempted",
            Self::TopicCompleted { .. } => "topic_completed",
            Self::CourseCompleted { .. } => "course_completed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementEffect {
    /// Element that produced the effect; `None` for baseline course feedback.
    pub element: Option<ElementId>,
    /// Whether the learner is shown this effect.
    pub surfaced: bool,
    #[serde(flatten)]
    pub kind: EffectKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum EffectKind {
    PointsAwarded { delta: u32, total: u32 },
    LeaderboardUpdated { rank: u32, of: u32 },
    BadgeGranted { badge_id: String, name: String },
    ProgressUpdated { completed_steps: u32, total_steps: u32, percent: u32 },
    GateOpened { lesson: LessonId },
    StatsUpdated {
        attempts: u32,
        passes: u32,
        accuracy_pct: u32,
        time_spent_secs: u64,
    },
    VariantSelected { node: NodeId, content_id: String, variant: String },
    TimerStarted { quiz: QuizId, deadline: DateTime<Utc> },
    NotificationQueued { message: String },
}

impl EffectKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PointsAwarded { .. } => "points_awarded",
            Self::LeaderboardUpdated { .. } => "leaderboard_updated",
            Self::BadgeGranted { .. } => "badge_granted",
            Self::ProgressUpdated { .. } => "progress_updated",
            Self::GateOpened { .. } => "gate_opened",
            Self::StatsUpdated { .. } => "stats_updated",
            Self::VariantSelected { .. } => "variant_selected",
            Self::TimerStarted { .. } => "timer_started",
            Self::NotificationQueued { .. } => "notification_queued",
        }
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PointsAwarded { delta, total } => write!(f, "+{delta} points ({total} total)"),
            Self::LeaderboardUpdated { rank, of } => write!(f, "rank {rank} of {of}"),
            Self::BadgeGranted { name, .. } => write!(f, "badge earned: {name}"),
            Self::ProgressUpdated { percent, .. } => write!(f, "{percent}% complete"),
            Self::GateOpened { lesson } => write!(f, "lesson {lesson} unlocked with points"),
            Self::StatsUpdated { accuracy_pct, attempts, .. } => {
                write!(f, "{accuracy_pct}% accuracy over {attempts} attempts")
            }
            Self::VariantSelected { variant, .. } => write!(f, "{variant} content"),
            Self::TimerStarted { deadline, .. } => write!(f, "timer running until {deadline}"),
            Self::NotificationQueued { message } => f.write_str(message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BadgeTrigger {
    Quiz(QuizId),
    Topic(TopicId),
    Course,
}

impl std::str::FromStr for BadgeTrigger {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "course" {
            return Ok(Self::Course);
        }
        let (kind, id) = s.split_once(':').ok_or_else(|| format!("bad trigger {s:?}"))?;
        let id: u64 = id.parse().map_err(|_| format!("bad trigger id in {s:?}"))?;
        match kind {
            "quiz" => Ok(Self::Quiz(QuizId(id))),
            "topic" => Ok(Self::Topic(TopicId(id))),
            _ => Err(format!("bad trigger kind in {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Badge {
    pub id: String,
    pub name: String,
    pub trigger: BadgeTrigger,
    pub icon: String,
}

#[derive(Debug, Clone, Default)]
pub struct BadgeCatalog {
    badges: Vec<Badge>,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot load {what}: {message}")]
pub struct ConfigError {
    what: &'static str,
    message: String,
}

impl BadgeCatalog {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        #[derive(Deserialize)]
        struct File {
            badges: Vec<Row>,
        }
        #[derive(Deserialize)]
        struct Row {
            id: String,
            name: String,
            trigger: String,
            #[serde(default)]
            icon: String,
        }
        let err = |message: String| ConfigError {
            what: "badges",
            message,
        };
        let file: File = toml::from_str(src).map_err(|e| err(e.to_string()))?;
        let badges = file
            .badges
            .into_iter()
            .map(|r| {
                Ok(Badge {
                    trigger: r.trigger.parse().map_err(err)?,
                    id: r.id,
                    name: r.name,
                    icon: r.icon,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let mut seen = BTreeSet::new();
        for b in &badges {
            if !seen.insert(b.trigger) {
                return Err(err(format!("two badges share trigger {:?}", b.trigger)));
            }
        }
        Ok(Self { badges })
    }

    pub fn standard() -> Self {
        Self::from_toml(DEFAULT_BADGES).expect("shipped badges are valid")
    }

    pub fn for_trigger(&self, trigger: BadgeTrigger) -> Option<&Badge> {
        self.badges.iter().find(|b| b.trigger == trigger)
    }

    pub fn badges(&self) -> &[Badge] {
        &self.badges
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerStats {
    pub attempts: u32,
    pub passes: u32,
    pub score_sum: u64,
    pub total_sum: u64,
    pub time_spent_secs: u64,
}

impl LearnerStats {
    pub fn accuracy_pct(&self) -> u32 {
        if self.total_sum == 0 {
            return 0;
        }
        round_half_up_div(100 * self.score_sum, self.total_sum) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerGameState {
    pub enrolled_at: DateTime<Utc>,
    pub points: u32,
    /// When the current points total was reached.
    pub points_at: DateTime<Utc>,
    pub best: BTreeMap<QuizId, u32>,
    pub badges: BTreeSet<String>,
    pub steps_completed: u32,
    pub stats: LearnerStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timer {
    pub learner_id: LearnerId,
    pub quiz_id: QuizId,
    pub deadline: DateTime<Utc>,
    /// Answers saved before time ran out.
    pub draft: Option<Vec<Option<usize>>>,
}

/// Gamification state of one course across all its learners.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamificationState {
    pub learners: BTreeMap<LearnerId, LearnerGameState>,
    #[serde(with = "crate::ids::map_as_pairs")]
    pub timers: BTreeMap<(LearnerId, QuizId), DateTime<Utc>>,
    /// Answers saved on a running timed quiz; submitted if time runs out.
    #[serde(default, with = "crate::ids::map_as_pairs")]
    pub drafts: BTreeMap<(LearnerId, QuizId), Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: u32,
    pub learner_id: LearnerId,
    pub points: u32,
}

impl GamificationState {
    /// Standings by points, then by who reached their total first, then by id.
    pub fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        let mut rows: Vec<(&LearnerId, &LearnerGameState)> = self.learners.iter().collect();
        rows.sort_by(|(a_id, a), (b_id, b)| {
            b.points
                .cmp(&a.points)
                .then(a.points_at.cmp(&b.points_at))
                .then(a_id.cmp(b_id))
        });
        rows.into_iter()
            .enumerate()
            .map(|(i, (&learner_id, s))| LeaderboardEntry {
                rank: i as u32 + 1,
                learner_id,
                points: s.points,
            })
            .collect()
    }

    pub fn rank_of(&self, learner: LearnerId) -> Option<u32> {
        self.leaderboard()
            .into_iter()
            .find(|e| e.learner_id == learner)
            .map(|e| e.rank)
    }

    /// Start a timer unless one is already running; reopening a quiz does
    /// not buy more time.
    pub fn start_timer(&mut self, learner: LearnerId, quiz: QuizId, deadline: DateTime<Utc>) -> bool {
        if self.timers.contains_key(&(learner, quiz)) {
            return false;
        }
        self.timers.insert((learner, quiz), deadline);
        true
    }

    pub fn cancel_timer(&mut self, learner: LearnerId, quiz: QuizId) -> bool {
        self.drafts.remove(&(learner, quiz));
        self.timers.remove(&(learner, quiz)).is_some()
    }

    /// Keep the latest answers of a running timed quiz. False when no timer runs.
    pub fn save_draft(&mut self, learner: LearnerId, quiz: QuizId, answers: Vec<Option<usize>>) -> bool {
        if !self.timers.contains_key(&(learner, quiz)) {
            return false;
        }
        self.drafts.insert((learner, quiz), answers);
        true
    }

    /// Remove and return every timer whose deadline is at or before `now`.
    pub fn expire_timers(&mut self, now: DateTime<Utc>) -> Vec<Timer> {
        let due: Vec<(LearnerId, QuizId)> = self
            .timers
            .iter()
            .filter(|(_, &d)| d <= now)
            .map(|(&k, _)| k)
            .collect();
        due.into_iter()
            .map(|k| {
                let deadline = self.timers.remove(&k).expect("present");
                Timer {
                    learner_id: k.0,
                    quiz_id: k.1,
                    deadline,
                    draft: self.drafts.remove(&k),
                }
            })
            .collect()
    }
}

/// Pure event → effects function over a course's gamification state.
pub struct Reducer<'a> {
    pub course: &'a CourseGraph,
    pub catalog: &'a ElementCatalog,
    pub badges: &'a BadgeCatalog,
}

struct Emitter<'a> {
    active: &'a [ElementId],
    out: Vec<ElementEffect>,
}

impl Emitter<'_> {
    fn is_active(&self, element: &str) -> bool {
        self.active.iter().any(|e| e == element)
    }

    /// Tracked for everyone, shown only when the element is active.
    fn always(&mut self, element: &str, kind: EffectKind) {
        let surfaced = self.is_active(element);
        self.out.push(ElementEffect {
            element: Some(ElementId::new(element)),
            surfaced,
            kind,
        });
    }

    /// Emitted only when the element is active.
    fn when_active(&mut self, element: &str, kind: EffectKind) {
        if self.is_active(element) {
            self.always(element, kind);
        }
    }

    fn baseline(&mut self, message: String) {
        self.out.push(ElementEffect {
            element: None,
            surfaced: true,
            kind: EffectKind::NotificationQueued { message },
        });
    }
}

impl Reducer<'_> {
    pub fn reduce(
        &self,
        state: &mut GamificationState,
        event: &ActivityEvent,
        active: &[ElementId],
    ) -> Vec<ElementEffect> {
        let mut em = Emitter {
            active,
            out: Vec::new(),
        };
        let learner = event.learner_id;
        let total_steps = self.course.steps_total();
        if matches!(event.kind, EventKind::Enrolled) {
            state.learners.entry(learner).or_insert(LearnerGameState {
                enrolled_at: event.at,
                points: 0,
                points_at: event.at,
                best: BTreeMap::new(),
                badges: BTreeSet::new(),
                steps_completed: 0,
                stats: LearnerStats::default(),
            });
            return em.out;
        }
        if !state.learners.contains_key(&learner) {
            return em.out;
        }
        match &event.kind {
            EventKind::Enrolled => {}
            EventKind::ContentViewed { node } => {
                let (content, time_limit) = match *node {
                    NodeId::Lesson(l) => match self.course.lesson(l) {
                        Some(l) => (l.content.as_slice(), None),
                        None => return em.out,
                    },
                    NodeId::Quiz(q) => match self.course.quiz(q) {
                        Some(q) => (q.content.as_slice(), q.time_limit_secs),
                        None => return em.out,
                    },
                    NodeId::Topic(_) => (&[][..], None),
                };
                for c in content {
                    let Some(tag) = &c.variant else { continue };
                    if let Some(element) = self.catalog.by_variant_tag(tag) {
                        em.when_active(
                            element.element_id.as_str(),
                            EffectKind::VariantSelected {
                                node: *node,
                                content_id: c.id.clone(),
                                variant: tag.clone(),
                            },
                        );
                    }
                }
                if let (NodeId::Quiz(quiz), Some(secs)) = (*node, time_limit) {
                    let deadline = event.at + Duration::seconds(i64::from(secs));
                    if em.is_active(ids::TIME_PRESSURE) && state.start_timer(learner, quiz, deadline) {
                        em.when_active(
                            ids::TIME_PRESSURE,
                            EffectKind::TimerStarted { quiz, deadline },
                        );
                    }
                }
            }
            EventKind::LessonCompleted { delta, .. } => {
                self.progress(state, learner, delta, total_steps, &mut em);
                self.gates(delta, &mut em);
            }
            EventKind::QuizAttempted {
                result,
                delta,
                time_spent_secs,
            } => {
                state.cancel_timer(learner, result.quiz_id);
                let s = state.learners.get_mut(&learner).expect("checked above");
                let best = s.best.entry(result.quiz_id).or_insert(0);
                let gain = result.points.saturating_sub(*best);
                *best = (*best).max(result.points);
                s.stats.attempts += 1;
                s.stats.passes += u32::from(result.passed);
                s.stats.score_sum += u64::from(result.score);
                s.stats.total_sum += u64::from(result.total);
                s.stats.time_spent_secs += u64::from(*time_spent_secs);
                if gain > 0 {
                    s.points += gain;
                    s.points_at = event.at;
                    let total = s.points;
                    em.always(ids::POINTS, EffectKind::PointsAwarded { delta: gain, total });
                    let board = state.leaderboard();
                    let rank = board
                        .iter()
                        .find(|e| e.learner_id == learner)
                        .map_or(0, |e| e.rank);
                    em.when_active(
                        ids::COMPETITION,
                        EffectKind::LeaderboardUpdated {
                            rank,
                            of: board.len() as u32,
                        },
                    );
                }
                if result.passed {
                    self.badge(state, learner, BadgeTrigger::Quiz(result.quiz_id), &mut em);
                }
                self.progress(state, learner, delta, total_steps, &mut em);
                self.gates(delta, &mut em);
                let stats = &state.learners[&learner].stats;
                em.when_active(
                    ids::STATS,
                    EffectKind::StatsUpdated {
                        attempts: stats.attempts,
                        passes: stats.passes,
                        accuracy_pct: stats.accuracy_pct(),
                        time_spent_secs: stats.time_spent_secs,
                    },
                );
                let title = self
                    .course
                    .quiz(result.quiz_id)
                    .map_or_else(|| result.quiz_id.to_string(), |q| q.title.clone());
                em.baseline(if result.passed {
                    format!("Passed {title} with {}%", result.percentage)
                } else {
                    format!(
                        "{title}: {}% this time; retake when ready ({}% needed)",
                        result.percentage, self.course.pass_threshold_pct
                    )
                });
            }
            EventKind::TopicCompleted { topic } => {
                self.badge(state, learner, BadgeTrigger::Topic(*topic), &mut em);
            }
            EventKind::CourseCompleted { award } => {
                if award.first_time {
                    self.badge(state, learner, BadgeTrigger::Course, &mut em);
                    em.baseline(format!(
                        "Course completed with {} points; the evaluation survey is open",
                        award.total_points
                    ));
                }
            }
        }
        em.out
    }

    fn progress(
        &self,
        state: &mut GamificationState,
        learner: LearnerId,
        delta: &UnlockDelta,
        total_steps: u32,
        em: &mut Emitter<'_>,
    ) {
        let steps = delta
            .completed
            .iter()
            .filter(|n| !matches!(n, NodeId::Topic(_)))
            .count() as u32;
        if steps == 0 {
            return;
        }
        let s = state.learners.get_mut(&learner).expect("enrolled");
        s.steps_completed += steps;
        em.always(
            ids::PROGRESSION,
            EffectKind::ProgressUpdated {
                completed_steps: s.steps_completed,
                total_steps,
                percent: progress_fraction(s.steps_completed, total_steps),
            },
        );
    }

    fn gates(&self, delta: &UnlockDelta, em: &mut Emitter<'_>) {
        for &lesson in &delta.gates_opened {
            em.when_active(ids::ECONOMY, EffectKind::GateOpened { lesson });
        }
    }

    fn badge(
        &self,
        state: &mut GamificationState,
        learner: LearnerId,
        trigger: BadgeTrigger,
        em: &mut Emitter<'_>,
    ) {
        if !em.is_active(ids::ACKNOWLEDGEMENT) {
            return;
        }
        let Some(badge) = self.badges.for_trigger(trigger) else { return };
        let s = state.learners.get_mut(&learner).expect("enrolled");
        if s.badges.insert(badge.id.clone()) {
            em.when_active(
                ids::ACKNOWLEDGEMENT,
                EffectKind::BadgeGranted {
                    badge_id: badge.id.clone(),
                    name: badge.name.clone(),
                },
            );
        }
    }

    /// Expire due timers, queueing a time-up notice for each. The caller
    /// submits whatever each timer's draft holds.
    pub fn tick(
        &self,
        state: &mut GamificationState,
        now: DateTime<Utc>,
    ) -> Vec<(Timer, ElementEffect)> {
        state
            .expire_timers(now)
            .into_iter()
            .map(|t| {
                let title = self
                    .course
                    .quiz(t.quiz_id)
                    .map_or_else(|| t.quiz_id.to_string(), |q| q.title.clone());
                (
                    t,
                    ElementEffect {
                        element: Some(ElementId::new(ids::TIME_PRESSURE)),
                        surfaced: true,
                        kind: EffectKind::NotificationQueued {
                            message: format!("Time is up for {title}"),
                        },
                    },
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Popup,
    Dashboard,
    Email,
    Reminder,
}

/// Effect kind → delivery channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMap(BTreeMap<String, Vec<Channel>>);

impl ChannelMap {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map(Self).map_err(|e| ConfigError {
            what: "channel map",
            message: e.to_string(),
        })
    }

    pub fn standard() -> Self {
        Self::from_toml(DEFAULT_CHANNELS).expect("shipped channel map is valid")
    }

    pub fn channels(&self, kind: &EffectKind) -> &[Channel] {
        self.0.get(kind.name()).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub learner_id: LearnerId,
    pub channel: Channel,
    pub effect: String,
    pub message: String,
    pub at: DateTime<Utc>,
}

/// Fan surfaced effects out to their channels. Unsurfaced effects produce nothing.
pub fn queue_feedback(
    learner_id: LearnerId,
    at: DateTime<Utc>,
    effects: &[ElementEffect],
    channels: &ChannelMap,
) -> Vec<FeedbackRecord> {
    effects
        .iter()
        .filter(|e| e.surfaced)
        .flat_map(|e| {
            channels.channels(&e.kind).iter().map(move |&channel| FeedbackRecord {
                learner_id,
                channel,
                effect: e.kind.name().to_string(),
                message: e.kind.to_string(),
                at,
            })
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
#[error("delivery over {channel:?} failed: {message}")]
pub struct TransportError {
    pub channel: Channel,
    pub message: String,
}

/// Delivers feedback records to the outside world.
pub trait FeedbackTransport: Send {
    fn deliver(&mut self, record: &FeedbackRecord) -> Result<(), TransportError>;
}

/// Drops everything. Records remain queryable on the platform.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullTransport;

impl FeedbackTransport for NullTransport {
    fn deliver(&mut self, _record: &FeedbackRecord) -> Result<(), TransportError> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessment::CognitiveCore;
    use crate::course::{grade_score, LearnerEnrollment};
    use crate::elements::ElementMapping;
    use chrono::TimeZone;

    struct Fixture {
        course: CourseGraph,
        catalog: ElementCatalog,
        badges: BadgeCatalog,
    }

    impl Fixture {
        fn new() -> Self {
            Self {
                course: CourseGraph::instructional_innovation(),
                catalog: ElementCatalog::standard(),
                badges: BadgeCatalog::standard(),
            }
        }

        fn reducer(&self) -> Reducer<'_> {
            Reducer {
                course: &self.course,
                catalog: &self.catalog,
                badges: &self.badges,
            }
        }
    }

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2022, 4, 20, 9, 0, 0).unwrap() + Duration::seconds(secs)
    }

    fn ev(learner: u64, at: i64, kind: EventKind) -> ActivityEvent {
        ActivityEvent {
            event_id: EventId(at as u64),
            learner_id: LearnerId(learner),
            course_id: CourseId(31285),
            at: t(at),
            kind,
        }
    }

    fn kinds(effects: &[ElementEffect]) -> Vec<(&'static str, bool)> {
        effects.iter().map(|e| (e.kind.name(), e.surfaced)).collect()
    }

    #[test]
    fn milestone_pass_for_sf_learner() {
        let f = Fixture::new();
        let r = f.reducer();
        let sf = ElementMapping::deployed();
        let active = sf.active_elements(CognitiveCore::SF);
        let mut st = GamificationState::default();
        let mut e = LearnerEnrollment::enroll(&f.course, LearnerId(1), false);
        assert!(r.reduce(&mut st, &ev(1, 0, EventKind::Enrolled), active).is_empty());
        let delta = e.complete_lesson(&f.course, LessonId(31300)).unwrap();
        r.reduce(&mut st, &ev(1, 1, EventKind::LessonCompleted { lesson: LessonId(31300), delta }), active);
        let result = grade_score(QuizId(30381), 1, 1, 10, 80).unwrap();
        let delta = e.record_attempt_and_unlock(&f.course, &result).unwrap();
        let effects = r.reduce(
            &mut st,
            &ev(1, 2, EventKind::QuizAttempted { result, delta, time_spent_secs: 83 }),
            active,
        );
        assert_eq!(
            kinds(&effects),
            vec![
                ("points_awarded", false),
                ("badge_granted", true),
                ("progress_updated", false),
                ("notification_queued", true),
            ]
        );
        assert!(matches!(effects[0].kind, EffectKind::PointsAwarded { delta: 10, total: 10 }));
        assert_eq!(effects[3].element, None);
    }

    #[test]
    fn timed_quiz_view_starts_timer_only_under_time_pressure() {
        let f = Fixture::new();
        let r = f.reducer();
        let m = ElementMapping::deployed();
        let mut st = GamificationState::default();
        r.reduce(&mut st, &ev(1, 0, EventKind::Enrolled), &[]);
        let view = ev(1, 10, EventKind::ContentViewed { node: NodeId::Quiz(QuizId(30381)) });
        let effects = r.reduce(&mut st, &view, m.active_elements(CognitiveCore::NT));
        assert_eq!(kinds(&effects), vec![("timer_started", true)]);
        assert!(matches!(effects[0].kind, EffectKind::TimerStarted { deadline, .. } if deadline == t(130)));
        assert!(r.reduce(&mut st, &view, &[]).is_empty());
        assert!(r.tick(&mut st, t(129)).is_empty());
        let expired = r.tick(&mut st, t(130));
        assert_eq!(expired.len(), 1);
        assert!(st.timers.is_empty());
    }

    #[test]
    fn content_variants_follow_active_elements() {
        let f = Fixture::new();
        let r = f.reducer();
        let m = ElementMapping::deployed();
        let mut st = GamificationState::default();
        r.reduce(&mut st, &ev(1, 0, EventKind::Enrolled), &[]);
        let view = ev(1, 5, EventKind::ContentViewed { node: NodeId::Lesson(LessonId(31300)) });
        let sf = r.reduce(&mut st, &view, m.active_elements(CognitiveCore::SF));
        assert_eq!(kinds(&sf), vec![("variant_selected", true)]);
        assert_eq!(sf[0].element.as_ref().unwrap(), ids::SENSATION);
        let st_core = r.reduce(&mut st, &view, m.active_elements(CognitiveCore::ST));
        assert!(st_core.is_empty());
    }

    #[test]
    fn failing_attempt_queues_retake_notice() {
        let f = Fixture::new();
        let r = f.reducer();
        let mut st = GamificationState::default();
        r.reduce(&mut st, &ev(1, 0, EventKind::Enrolled), &[]);
        let result = grade_score(QuizId(30386), 0, 2, 10, 80).unwrap();
        let effects = r.reduce(
            &mut st,
            &ev(1, 1, EventKind::QuizAttempted { result, delta: UnlockDelta::default(), time_spent_secs: 18 }),
            &[],
        );
        assert_eq!(kinds(&effects), vec![("notification_queued", true)]);
        let EffectKind::NotificationQueued { message } = &effects[0].kind else { unreachable!() };
        assert!(message.contains("retake"));
    }

    #[test]
    fn leaderboard_orders_by_points_then_time_then_id() {
        let f = Fixture::new();
        let r = f.reducer();
        let comp = vec![ElementId::new(ids::COMPETITION)];
        let mut st = GamificationState::default();
        for l in [3, 1, 2, 4] {
            r.reduce(&mut st, &ev(l, 0, EventKind::Enrolled), &comp);
        }
        let attempt = |quiz: u64, score: u32| EventKind::QuizAttempted {
            result: grade_score(QuizId(quiz), score, 2, 10, 80).unwrap(),
            delta: UnlockDelta::default(),
            time_spent_secs: 30,
        };
        r.reduce(&mut st, &ev(2, 10, attempt(30386, 2)), &comp);
        let fx = r.reduce(&mut st, &ev(3, 5, attempt(30386, 2)), &comp);
        assert!(fx.iter().any(|e| matches!(e.kind, EffectKind::LeaderboardUpdated { rank: 1, of: 4 })));
        r.reduce(&mut st, &ev(4, 20, attempt(30386, 1)), &comp);
        let board: Vec<(u64, u32, u32)> = st
            .leaderboard()
            .iter()
            .map(|e| (e.learner_id.0, e.points, e.rank))
            .collect();
        assert_eq!(board, vec![(3, 10, 1), (2, 10, 2), (4, 5, 3), (1, 0, 4)]);
    }

    #[test]
    fn feedback_only_for_surfaced_effects() {
        let channels = ChannelMap::standard();
        let effects = vec![
            ElementEffect {
                element: Some(ElementId::new(ids::POINTS)),
                surfaced: false,
                kind: EffectKind::PointsAwarded { delta: 5, total: 5 },
            },
            ElementEffect {
                element: Some(ElementId::new(ids::ACKNOWLEDGEMENT)),
                surfaced: true,
                kind: EffectKind::BadgeGranted { badge_id: "b".into(), name: "B".into() },
            },
        ];
        let records = queue_feedback(LearnerId(1), t(0), &effects, &channels);
        let ch: Vec<Channel> = records.iter().map(|r| r.channel).collect();
        assert_eq!(ch, vec![Channel::Popup, Channel::Dashboard, Channel::Email]);
        let mut transport = NullTransport;
        for r in &records {
            transport.deliver(r).unwrap();
        }
    }

    #[test]
    fn badges_are_granted_once() {
        let f = Fixture::new();
        let r = f.reducer();
        let ack = vec![ElementId::new(ids::ACKNOWLEDGEMENT)];
        let mut st = GamificationState::default();
        r.reduce(&mut st, &ev(1, 0, EventKind::Enrolled), &ack);
        let topic = ev(1, 1, EventKind::TopicCompleted { topic: TopicId(31291) });
        assert_eq!(kinds(&r.reduce(&mut st, &topic, &ack)), vec![("badge_granted", true)]);
        assert!(r.reduce(&mut st, &topic, &ack).is_empty());
        assert!(r
            .reduce(&mut st, &ev(1, 2, EventKind::TopicCompleted { topic: TopicId(31290) }), &ack)
            .is_empty());
    }

    #[test]
    fn badge_triggers_parse() {
        assert_eq!("course".parse::<BadgeTrigger>(), Ok(BadgeTrigger::Course));
        assert_eq!("quiz:5".parse::<BadgeTrigger>(), Ok(BadgeTrigger::Quiz(QuizId(5))));
        assert!("lesson:5".parse::<BadgeTrigger>().is_err());
        assert!("quiz:x".parse::<BadgeTrigger>().is_err());
        assert_eq!(BadgeCatalog::standard().badges().len(), 6);
    }

    #[test]
    fn gate_and_progress_helpers() {
        assert!(economy_gate_check(30, 30));
        assert!(!economy_gate_check(29, 30));
        assert_eq!(progress_fraction(2, 14), 14);
        assert_eq!(progress_fraction(7, 14), 50);
        assert_eq!(progress_fraction(1, 0), 0);
    }
}
