//! Seeded cohort simulator. Scripted agents take the course on one shared
//! engine; a deterministic event queue orders their actions so a given
//! config and seed always produce byte-identical exports.

pub mod config;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use cogniplay_core::assessment::{Choice, CognitiveCore};
use cogniplay_core::course::{CourseGraph, NodeState, Quiz, Submission};
use cogniplay_core::elements::{ids, ElementId};
use cogniplay_core::ids::{CourseId, LearnerId, NodeId, QuizId};
use cogniplay_core::platform::{
    journal_to_jsonl, Command, JournalEntry, Platform, PlatformError, PlatformSetup,
};
use cogniplay_core::telemetry::{fixtures, responses_to_csv, CohortSummary, StatsReport};

pub use config::{AgentProfile, CohortConfig, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("engine rejected {command}: {error}")]
    Rejected {
        command: String,
        error: PlatformError,
    },
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentEnd {
    /// Finished the course.
    Completed,
    /// Ran out of attempts on a quiz.
    Stalled,
    /// Hit the per-agent action cap.
    Capped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentOutcome {
    pub learner_id: LearnerId,
    pub core: CognitiveCore,
    pub end: AgentEnd,
    pub attempts: u32,
    pub failed_attempts: u32,
    pub evaluated: bool,
    /// The quiz the agent gave up on, if it stalled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stalled_at: Option<QuizId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CohortReport {
    pub seed: u64,
    pub course_id: CourseId,
    pub cohort: CohortSummary,
    pub evaluation: Option<StatsReport>,
    pub attempts: usize,
    pub failed_attempts: usize,
    pub agents: Vec<AgentOutcome>,
    pub surfaced_elements: BTreeSet<ElementId>,
    pub uncovered_elements: Vec<ElementId>,
    pub personalization_violations: usize,
    pub liveness_failures: Vec<LearnerId>,
    /// Invariant failures; empty for a healthy run.
    pub failures: Vec<String>,
}

pub struct CohortRun {
    pub platform: Platform,
    pub report: CohortReport,
}

/// The exported artifacts of a run, as written to disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exports {
    pub logs_csv: String,
    pub evaluations_csv: String,
    pub journal_jsonl: String,
}

impl Exports {
    pub fn of(platform: &Platform, course: CourseId) -> Result<Self, PlatformError> {
        let rt = platform.course(course)?;
        Ok(Self {
            logs_csv: platform.export_log_csv(course)?,
            evaluations_csv: responses_to_csv(&platform.setup().questionnaire, &rt.evaluations),
            journal_jsonl: journal_to_jsonl(platform.journal()),
        })
    }
}

impl CohortRun {
    pub fn exports(&self) -> Exports {
        Exports::of(&self.platform, self.report.course_id).expect("run course exists")
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes") + "\n"
    }

    /// Write logs.csv, evaluations.csv, summary.json and journal.jsonl.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let e = self.exports();
        std::fs::write(dir.join("logs.csv"), e.logs_csv)?;
        std::fs::write(dir.join("evaluations.csv"), e.evaluations_csv)?;
        std::fs::write(dir.join("journal.jsonl"), e.journal_jsonl)?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        Ok(())
    }
}

/// Per-agent generator: the cohort seed on a stream of its own, so one
/// agent's draws never shift another's.
pub fn agent_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const GENDER_STREAM: u64 = u64::MAX;

struct Agent {
    learner: LearnerId,
    core: CognitiveCore,
    profile: AgentProfile,
    answers: Vec<Choice>,
    gender: Option<String>,
    eval_means: BTreeMap<u8, f64>,
    rng: ChaCha8Rng,
    clock: DateTime<Utc>,
    actions: u32,
    viewed: BTreeSet<NodeId>,
    open_quiz: Option<OpenQuiz>,
    /// Extra attempts on passed quizzes, made to earn points for a gate.
    retakes: BTreeMap<QuizId, u32>,
    evaluated: bool,
    end: Option<AgentEnd>,
    stalled_at: Option<QuizId>,
}

enum OpenQuiz {
    /// Answer after this many seconds.
    Answer(QuizId, u32),
    /// Too slow for the timer: save what is done and let time run out.
    Overrun(QuizId, DateTime<Utc>),
}

enum Step {
    Act(Command, u32),
    End(AgentEnd),
}

impl Agent {
    fn think(&mut self) -> u32 {
        let [lo, hi] = self.profile.think_secs;
        self.rng.random_range(lo..=hi)
    }

    fn may_attempt(&self, used: u32) -> bool {
        self.profile.persistence.is_none_or(|p| used < p)
    }

    fn submission(&mut self, quiz: &Quiz) -> Submission {
        let acc = self.profile.accuracy;
        if quiz.activity_kind.instructor_scored() {
            let score = (0..quiz.total())
                .filter(|_| self.rng.random_bool(acc))
                .count();
            return Submission::InstructorScore(score as u32);
        }
        let answers = quiz
            .questions
            .iter()
            .map(|q| {
                let correct = q.correct.unwrap_or(0);
                if self.rng.random_bool(acc) || q.options.len() < 2 {
                    Some(correct)
                } else {
                    let wrong = self.rng.random_range(1..q.options.len());
                    Some((correct + wrong) % q.options.len())
                }
            })
            .collect();
        Submission::Answers(answers)
    }

    fn evaluation(&mut self, sd: f64) -> BTreeMap<u8, u8> {
        let means = self.eval_means.clone();
        means
            .into_iter()
            .map(|(id, mean)| {
                let noise = Normal::new(0.0, sd)
                    .expect("validated sd")
                    .sample(&mut self.rng);
                (id, (mean + noise).round().clamp(1.0, 5.0) as u8)
            })
            .collect()
    }

    fn step(&mut self, p: &Platform, graph: &CourseGraph, cfg: &CohortConfig) -> Step {
        let course = graph.course_id;
        let (learner, at) = (self.learner, self.clock);
        if self.actions >= cfg.max_actions {
            return Step::End(AgentEnd::Capped);
        }
        let Ok(enrollment) = p.enrollment(learner, course) else {
            let delay = self.think();
            return Step::Act(
                Command::Enroll {
                    learner,
                    course,
                    answers: self.answers.clone(),
                    gender: self.gender.clone(),
                    at,
                },
                delay,
            );
        };
        let e = &enrollment.state;
        if e.course_completed() {
            if self.evaluated {
                return Step::End(AgentEnd::Completed);
            }
            self.evaluated = true;
            if !self.rng.random_bool(cfg.evaluation_rate) {
                return Step::End(AgentEnd::Completed);
            }
            let answers = self.evaluation(cfg.evaluation_sd);
            let delay = self.think();
            return Step::Act(
                Command::SubmitEvaluation {
                    learner,
                    course,
                    answers,
                    at,
                },
                delay,
            );
        }
        match self.open_quiz.take() {
            Some(OpenQuiz::Answer(quiz, spent)) => {
                let q = graph.quiz(quiz).expect("opened quiz exists").clone();
                let submission = self.submission(&q);
                let delay = self.think();
                return Step::Act(
                    Command::SubmitQuiz {
                        learner,
                        quiz,
                        submission,
                        time_spent_secs: spent,
                        at,
                    },
                    delay,
                );
            }
            Some(OpenQuiz::Overrun(quiz, deadline)) => {
                let q = graph.quiz(quiz).expect("opened quiz exists").clone();
                let Submission::Answers(mut answers) = self.submission(&q) else {
                    unreachable!("only answered quizzes overrun")
                };
                if let Some(last) = answers.last_mut() {
                    *last = None;
                }
                let wait = (deadline - at).num_seconds().max(0) as u32 + 1;
                return Step::Act(
                    Command::SaveDraft {
                        learner,
                        quiz,
                        answers,
                        at,
                    },
                    wait,
                );
            }
            None => {}
        }
        let next = graph
            .nodes()
            .into_iter()
            .filter(|n| !matches!(n, NodeId::Topic(_)))
            .find(|&n| e.state(n) == Some(NodeState::Unlocked));
        match next {
            Some(NodeId::Lesson(lesson)) => {
                let delay = self.think();
                if self.viewed.insert(NodeId::Lesson(lesson)) {
                    let node = NodeId::Lesson(lesson);
                    Step::Act(
                        Command::ViewNode {
                            learner,
                            course,
                            node,
                            at,
                        },
                        delay,
                    )
                } else {
                    Step::Act(
                        Command::CompleteLesson {
                            learner,
                            course,
                            lesson,
                            at,
                        },
                        delay,
                    )
                }
            }
            Some(NodeId::Quiz(quiz)) => {
                if !self.may_attempt(e.attempts(quiz)) {
                    self.stalled_at = Some(quiz);
                    return Step::End(AgentEnd::Stalled);
                }
                self.open(p, graph, quiz)
            }
            _ if e.steps_completed() == graph.steps_total() => {
                let delay = self.think();
                Step::Act(
                    Command::CompleteCourse {
                        learner,
                        course,
                        at,
                    },
                    delay,
                )
            }
            _ => {
                // Everything open is done, so a points gate is holding the
                // next lesson. Retake the weakest passed quiz.
                let retake = graph
                    .quizzes()
                    .map(|(_, q)| q)
                    .filter(|q| e.best_points(q.quiz_id).is_some_and(|b| b < q.points_total))
                    .filter(|q| {
                        self.may_attempt(self.retakes.get(&q.quiz_id).copied().unwrap_or(0))
                    })
                    .min_by_key(|q| (e.best_points(q.quiz_id), q.quiz_id))
                    .map(|q| q.quiz_id);
                match retake {
                    Some(quiz) => {
                        *self.retakes.entry(quiz).or_insert(0) += 1;
                        self.open(p, graph, quiz)
                    }
                    None => {
                        self.stalled_at = e.pending_gates().next().and_then(|l| {
                            graph
                                .lesson(l)
                                .and_then(|l| l.quizzes.first())
                                .map(|q| q.quiz_id)
                        });
                        Step::End(AgentEnd::Stalled)
                    }
                }
            }
        }
    }

    /// View a quiz. An agent whose answering time would pass a running
    /// timer's deadline saves a partial draft before it instead.
    fn open(&mut self, p: &Platform, graph: &CourseGraph, quiz: QuizId) -> Step {
        let course = graph.course_id;
        let spent = self.think();
        let q = graph.quiz(quiz).expect("unlocked quiz exists");
        let timed = p
            .enrollment(self.learner, course)
            .is_ok_and(|e| e.active.iter().any(|a| a == ids::TIME_PRESSURE));
        let deadline = p
            .course(course)
            .ok()
            .and_then(|rt| rt.game.timers.get(&(self.learner, quiz)).copied())
            .or_else(|| {
                q.time_limit_secs
                    .filter(|_| timed)
                    .map(|l| self.clock + Duration::seconds(i64::from(l)))
            });
        let delay = match deadline {
            Some(d)
                if !q.activity_kind.instructor_scored()
                    && self.clock + Duration::seconds(i64::from(spent)) >= d =>
            {
                self.open_quiz = Some(OpenQuiz::Overrun(quiz, d));
                let left = (d - self.clock).num_seconds().max(2) as u32;
                self.rng.random_range(1..left)
            }
            _ => {
                self.open_quiz = Some(OpenQuiz::Answer(quiz, spent));
                spent
            }
        };
        Step::Act(
            Command::ViewNode {
                learner: self.learner,
                course,
                node: NodeId::Quiz(quiz),
                at: self.clock,
            },
            delay,
        )
    }
}

fn evaluation_means(
    profile: &AgentProfile,
    core: CognitiveCore,
    setup: &PlatformSetup,
) -> BTreeMap<u8, f64> {
    if let Some(m) = &profile.evaluation_means {
        return m
            .iter()
            .map(|(k, &v)| (k.parse().expect("validated key"), v))
            .collect();
    }
    let q = &setup.questionnaire;
    let targets = match fixtures::per_core_criterion_means().get(&core) {
        Some(per_core) => fixtures::statement_targets_for(q, per_core),
        None => fixtures::statement_means(),
    };
    targets
        .into_iter()
        .map(|(k, t)| (k, f64::from(t.0) / 10.0))
        .collect()
}

/// Run every agent to completion or exhaustion on a fresh engine.
pub fn run_cohort(cfg: &CohortConfig) -> Result<CohortRun, SimError> {
    let setup = cfg.platform_setup()?;
    let mut platform = Platform::new(setup.clone())?;
    let graph = platform
        .courses()
        .next()
        .ok_or_else(|| ConfigError::Invalid("no course".into()))?
        .graph
        .clone();

    let mut genders: Vec<String> = cfg
        .genders
        .iter()
        .flat_map(|(g, &n)| std::iter::repeat_n(g.clone(), n as usize))
        .collect();
    genders.shuffle(&mut agent_rng(cfg.seed, GENDER_STREAM));

    let mut agents = Vec::new();
    for &core in &CognitiveCore::ALL {
        let profile = cfg.profile(core);
        for _ in 0..cfg.counts.get(&core).copied().unwrap_or(0) {
            let index = agents.len() as u64;
            let mut rng = agent_rng(cfg.seed, index);
            let offset = rng.random_range(0..=cfg.enroll_window_secs);
            agents.push(Agent {
                learner: LearnerId(index + 1),
                core,
                answers: profile.answer_vector(core)?,
                eval_means: evaluation_means(&profile, core, &setup),
                profile: profile.clone(),
                gender: genders.get(index as usize).cloned(),
                rng,
                clock: cfg.start + Duration::seconds(i64::from(offset)),
                actions: 0,
                viewed: BTreeSet::new(),
                open_quiz: None,
                retakes: BTreeMap::new(),
                evaluated: false,
                end: None,
                stalled_at: None,
            });
        }
    }

    let mut queue: BinaryHeap<Reverse<(DateTime<Utc>, usize)>> = agents
        .iter()
        .enumerate()
        .map(|(i, a)| Reverse((a.clock, i)))
        .collect();
    while let Some(Reverse((at, i))) = queue.pop() {
        while let Some(deadline) = platform.next_deadline().filter(|&d| d <= at) {
            platform.apply(Command::Tick { at: deadline })?;
        }
        let agent = &mut agents[i];
        match agent.step(&platform, &graph, cfg) {
            Step::Act(command, delay) => {
                let label = format!("{command:?}");
                platform
                    .apply(command)
                    .map_err(|error| SimError::Rejected {
                        command: label,
                        error,
                    })?;
                agent.actions += 1;
                agent.clock += Duration::seconds(i64::from(delay.max(1)));
                queue.push(Reverse((agent.clock, i)));
            }
            Step::End(end) => agent.end = Some(end),
        }
    }

    let report = build_report(cfg, &platform, &graph, &agents)?;
    Ok(CohortRun { platform, report })
}

fn build_report(
    cfg: &CohortConfig,
    platform: &Platform,
    graph: &CourseGraph,
    agents: &[Agent],
) -> Result<CohortReport, SimError> {
    let course = graph.course_id;
    let summary = platform.report(course)?;
    let rt = platform.course(course)?;
    let threshold = f64::from(graph.pass_threshold_pct) / 100.0;

    let outcomes: Vec<AgentOutcome> = agents
        .iter()
        .map(|a| {
            let mine = || rt.attempts.iter().filter(|r| r.user_id == a.learner);
            AgentOutcome {
                learner_id: a.learner,
                core: a.core,
                end: a.end.expect("every agent ends"),
                attempts: mine().count() as u32,
                failed_attempts: mine().filter(|r| !r.passed).count() as u32,
                evaluated: rt.evaluations.iter().any(|r| r.learner_id == a.learner),
                stalled_at: a.stalled_at,
            }
        })
        .collect();

    let surfaced = platform.surfaced_elements();
    let deployed: BTreeSet<ElementId> = CognitiveCore::ALL
        .iter()
        .filter(|c| cfg.counts.get(c).copied().unwrap_or(0) > 0)
        .flat_map(|&c| platform.setup().mapping.active_elements(c).iter().cloned())
        .collect();
    let uncovered: Vec<ElementId> = deployed.difference(&surfaced).cloned().collect();

    let liveness: Vec<LearnerId> = agents
        .iter()
        .filter(|a| a.profile.persistence.is_none() && a.profile.accuracy >= threshold)
        .filter(|a| a.end != Some(AgentEnd::Completed))
        .map(|a| a.learner)
        .collect();

    let violations = platform.personalization_violations().len();
    let mut failures = Vec::new();
    if violations > 0 {
        failures.push(format!(
            "{violations} effects surfaced outside the learner's tuple"
        ));
    }
    if !liveness.is_empty() {
        failures.push(format!(
            "{} agents should have finished but did not",
            liveness.len()
        ));
    }
    if cfg.require_coverage && !uncovered.is_empty() {
        let names: Vec<&str> = uncovered.iter().map(|e| e.as_str()).collect();
        failures.push(format!("elements never surfaced: {}", names.join(", ")));
    }

    Ok(CohortReport {
        seed: cfg.seed,
        course_id: course,
        cohort: summary.cohort,
        evaluation: summary.evaluation,
        attempts: rt.attempts.len(),
        failed_attempts: rt.attempts.iter().filter(|r| !r.passed).count(),
        agents: outcomes,
        surfaced_elements: surfaced,
        uncovered_elements: uncovered,
        personalization_violations: violations,
        liveness_failures: liveness,
        failures,
    })
}

/// Rebuild an engine from a journal. Gaps, out-of-order commands and
/// commands for unknown enrollments are rejected.
pub fn replay(setup: PlatformSetup, journal: &[JournalEntry]) -> Result<Platform, PlatformError> {
    Platform::replay(setup, journal)
}
