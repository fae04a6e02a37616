use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use std::collections::BTreeMap;

use cogniplay_core::assessment::{canonical_answers, CognitiveCore};
use cogniplay_core::course::{
    grade_score, CourseGraph, LearnerEnrollment, NodeState, Submission,
};
use cogniplay_core::ids::{CourseId, LearnerId, LessonId, NodeId, QuizId};
use cogniplay_core::numeric::Tenths;
use cogniplay_core::platform::{Command, Platform, PlatformSetup};
use cogniplay_core::telemetry::{classify, Classification};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 2, 28, 8, 0, 0).unwrap()
}

#[derive(Debug, Clone)]
enum Op {
    Lesson(usize),
    Attempt(usize, u32),
}

fn arb_ops(lessons: usize, quizzes: usize) -> impl Strategy<Value = Vec<Op>> {
    let op = prop_oneof![
        (0..lessons).prop_map(Op::Lesson),
        (0..quizzes, 0u32..=2).prop_map(|(q, s)| Op::Attempt(q, s)),
    ];
    proptest::collection::vec(op, 0..60)
}

/// Every quiz has a completed lesson, and every open lesson after the first
/// has all earlier quizzes passed.
fn assert_sound(course: &CourseGraph, e: &LearnerEnrollment) {
    let lessons: Vec<_> = course.lessons().map(|(_, l)| l).collect();
    for (i, l) in lessons.iter().enumerate() {
        let ls = e.state(NodeId::Lesson(l.lesson_id)).unwrap();
        for q in &l.quizzes {
            let qs = e.state(NodeId::Quiz(q.quiz_id)).unwrap();
            if qs != NodeState::Locked {
                assert_eq!(ls, NodeState::Completed, "quiz open under unfinished lesson");
            }
        }
        if ls != NodeState::Locked && i > 0 {
            for prev in &lessons[..i] {
                for q in &prev.quizzes {
                    assert_eq!(
                        e.state(NodeId::Quiz(q.quiz_id)),
                        Some(NodeState::Completed),
                        "lesson {} open before quiz {} passed",
                        l.lesson_id,
                        q.quiz_id
                    );
                }
            }
        }
    }
    assert!(e.steps_completed() <= course.steps_total());
}

proptest! {
    #[test]
    fn unlocks_are_monotone_and_sound(ops in arb_ops(4, 4), economy in any::<bool>()) {
        let course = CourseGraph::synthetic(9000, 2, 2, 1);
        let lessons: Vec<LessonId> = course.lessons().map(|(_, l)| l.lesson_id).collect();
        let quizzes: Vec<QuizId> = course.quizzes().map(|(_, q)| q.quiz_id).collect();
        let mut e = LearnerEnrollment::enroll(&course, LearnerId(1), economy);
        let mut prev = e.states().clone();
        for op in ops {
            let _ = match op {
                Op::Lesson(i) => e.complete_lesson(&course, lessons[i]),
                Op::Attempt(i, s) => {
                    let r = grade_score(quizzes[i], s, 2, 10, course.pass_threshold_pct).unwrap();
                    e.record_attempt_and_unlock(&course, &r)
                }
            };
            for (node, &before) in &prev {
                prop_assert!(e.state(*node).unwrap() >= before, "{node} regressed");
            }
            assert_sound(&course, &e);
            prev = e.states().clone();
        }
    }

    #[test]
    fn rejected_operations_change_nothing(ops in arb_ops(4, 4)) {
        let course = CourseGraph::synthetic(9000, 2, 2, 1);
        let lessons: Vec<LessonId> = course.lessons().map(|(_, l)| l.lesson_id).collect();
        let quizzes: Vec<QuizId> = course.quizzes().map(|(_, q)| q.quiz_id).collect();
        let mut e = LearnerEnrollment::enroll(&course, LearnerId(1), false);
        for op in ops {
            let before = e.clone();
            let res = match op {
                Op::Lesson(i) => e.complete_lesson(&course, lessons[i]),
                Op::Attempt(i, s) => {
                    let r = grade_score(quizzes[i], s, 2, 10, 80).unwrap();
                    e.record_attempt_and_unlock(&course, &r)
                }
            };
            if res.is_err() {
                prop_assert_eq!(&before, &e);
            }
        }
    }

    #[test]
    fn grading_matches_interval_oracle(total in 1u32..200, frac in 0.0f64..=1.0, pts in 1u32..100, thr in 1u8..=100) {
        let score = ((f64::from(total) * frac).floor() as u32).min(total);
        let r = grade_score(QuizId(1), score, total, pts, thr).unwrap();
        // p is the half-up rounding of x = n/d iff (2p-1)d <= 2n < (2p+1)d.
        let check = |p: u32, n: u64, d: u64| {
            let p = u64::from(p);
            (2 * p).saturating_sub(1) * d <= 2 * n && 2 * n < (2 * p + 1) * d
        };
        prop_assert!(check(r.percentage, 100 * u64::from(score), u64::from(total)));
        prop_assert!(check(r.points, u64::from(score) * u64::from(pts), u64::from(total)));
        prop_assert!(r.points <= pts);
        prop_assert_eq!(r.passed, u64::from(score) * 100 >= u64::from(thr) * u64::from(total));
    }

    #[test]
    fn classification_is_total_and_monotone(a in 10u32..=50, b in 10u32..=50) {
        let (lo, hi) = (a.min(b), a.max(b));
        let cl = classify(Tenths(lo)).unwrap();
        let ch = classify(Tenths(hi)).unwrap();
        prop_assert!(cl <= ch);
    }
}

#[test]
fn classification_matches_ranges() {
    for v in 10..=50u32 {
        let expected = if v < 26 {
            Classification::Negative
        } else if v < 34 {
            Classification::Neutral
        } else {
            Classification::Positive
        };
        assert_eq!(classify(Tenths(v)).unwrap(), expected);
    }
}

#[derive(Debug, Clone)]
enum Action {
    View(usize),
    Lesson(usize),
    Quiz(usize, u8),
    Draft(usize, u8),
    Finish,
    Tick,
}

fn arb_actions() -> impl Strategy<Value = Vec<(usize, u32, Action)>> {
    let action = prop_oneof![
        (0usize..20).prop_map(Action::View),
        (0usize..7).prop_map(Action::Lesson),
        (0usize..7, 0u8..=4).prop_map(|(q, r)| Action::Quiz(q, r)),
        (0usize..7, 0u8..=4).prop_map(|(q, r)| Action::Draft(q, r)),
        Just(Action::Finish),
        Just(Action::Tick),
    ];
    proptest::collection::vec((0usize..4, 1u32..400, action), 0..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surfaced_effects_stay_inside_the_tuple(actions in arb_actions()) {
        let mut p = Platform::standard();
        let course = CourseId(31285);
        let graph = p.course(course).unwrap().graph.clone();
        let nodes = graph.nodes();
        let lessons: Vec<LessonId> = graph.lessons().map(|(_, l)| l.lesson_id).collect();
        let quizzes: Vec<_> = graph.quizzes().map(|(_, q)| q.clone()).collect();
        let mut now = t0();
        for (i, core) in CognitiveCore::ALL.iter().enumerate() {
            p.apply(Command::Enroll {
                learner: LearnerId(i as u64 + 1),
                course,
                answers: canonical_answers(*core).to_vec(),
                gender: None,
                at: now,
            }).unwrap();
        }
        for (who, dt, action) in actions {
            now += Duration::seconds(i64::from(dt));
            let learner = LearnerId(who as u64 + 1);
            let is_tick = matches!(action, Action::Tick);
            let cmd = match action {
                Action::View(n) => Command::ViewNode { learner, course, node: nodes[n % nodes.len()], at: now },
                Action::Lesson(l) => Command::CompleteLesson { learner, course, lesson: lessons[l], at: now },
                Action::Quiz(q, right) => {
                    let quiz = &quizzes[q];
                    let submission = if quiz.activity_kind.instructor_scored() {
                        Submission::InstructorScore(u32::from(right).min(quiz.total()))
                    } else {
                        Submission::Answers(quiz.questions.iter().enumerate().map(|(i, qq)| {
                            let c = qq.correct.unwrap();
                            Some(if i < usize::from(right) { c } else { (c + 1) % qq.options.len() })
                        }).collect())
                    };
                    Command::SubmitQuiz { learner, quiz: quiz.quiz_id, submission, time_spent_secs: dt, at: now }
                }
                Action::Draft(q, right) => {
                    let quiz = &quizzes[q];
                    let answers = quiz.questions.iter().enumerate()
                        .map(|(i, qq)| (i < usize::from(right)).then(|| qq.correct.unwrap_or(0)))
                        .collect();
                    Command::SaveDraft { learner, quiz: quiz.quiz_id, answers, at: now }
                }
                Action::Finish => Command::CompleteCourse { learner, course, at: now },
                Action::Tick => Command::Tick { at: now },
            };
            let _ = p.apply(cmd);
            if is_tick {
                prop_assert!(p.next_deadline().is_none_or(|d| d > now), "a due timer survived the tick");
            }
        }
        prop_assert!(p.personalization_violations().is_empty());
        let replayed = Platform::replay(PlatformSetup::standard(), p.journal()).unwrap();
        prop_assert_eq!(replayed.state_json(), p.state_json());
    }
}

#[test]
fn evaluation_requires_full_valid_answers() {
    let mut p = Platform::standard();
    let course = CourseId(31285);
    p.apply(Command::Enroll {
        learner: LearnerId(1),
        course,
        answers: canonical_answers(CognitiveCore::NF).to_vec(),
        gender: Some("female".into()),
        at: t0(),
    })
    .unwrap();
    let answers: BTreeMap<u8, u8> = (1..=16).map(|i| (i, 4)).collect();
    let err = p
        .apply(Command::SubmitEvaluation { learner: LearnerId(1), course, answers, at: t0() })
        .unwrap_err();
    // The survey is still closed, which is checked first.
    assert_eq!(err.code(), "survey_locked");
}
