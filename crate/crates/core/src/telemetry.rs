//! Activity log, evaluation questionnaire and the statistics computed from them.

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::assessment::CognitiveCore;
use crate::course::grade_score;
use crate::ids::{CourseId, LearnerId, QuizId};
use crate::numeric::{largest_remainder, population_sd_tenths, Tenths};

const DEFAULT_QUESTIONNAIRE: &str = include_str!("../data/questionnaire.toml");

pub const LOG_HEADER: &str =
    "user_id,quiz_id,score,total,date,points,points_total,percentage,time_spent,passed,course_id";
pub const DATE_FORMAT: &str = "%d-%m-%y";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TelemetryError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot parse {what}: {message}")]
    Parse { what: &'static str, message: String },
    #[error("no responses to aggregate")]
    NoResponses,
    #[error("mean {0} outside the rating scale")]
    OutOfScale(Tenths),
}

fn invalid(field: &'static str, message: impl Into<String>) -> TelemetryError {
    TelemetryError::Invalid {
        field,
        message: message.into(),
    }
}

/// Whole seconds, written as `1m 45s` or `41s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeSpent(pub u32);

impl fmt::Display for TimeSpent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (m, s) = (self.0 / 60, self.0 % 60);
        if m > 0 {
            write!(f, "{m}m {s}s")
        } else {
            write!(f, "{s}s")
        }
    }
}

impl FromStr for TimeSpent {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TelemetryError::Parse {
            what: "time spent",
            message: s.to_string(),
        };
        let mut secs = 0u32;
        let mut seen_any = false;
        let mut last_unit = 0u8;
        for part in s.split_whitespace() {
            let (num, unit) = part.split_at(part.len().saturating_sub(1));
            let n: u32 = num.parse().map_err(|_| err())?;
            let (mult, order) = match unit {
                "h" => (3600, 1),
                "m" => (60, 2),
                "s" => (1, 3),
                _ => return Err(err()),
            };
            if order <= last_unit {
                return Err(err());
            }
            last_unit = order;
            secs = n
                .checked_mul(mult)
                .and_then(|v| secs.checked_add(v))
                .ok_or_else(err)?;
            seen_any = true;
        }
        if !seen_any {
            return Err(err());
        }
        Ok(Self(secs))
    }
}

impl Serialize for TimeSpent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeSpent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod log_date {
    use super::DATE_FORMAT;
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&d.format(DATE_FORMAT))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let s = String::deserialize(d)?;
        NaiveDate::parse_from_str(&s, DATE_FORMAT).map_err(serde::de::Error::custom)
    }
}

mod yes_no {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(if *b { "YES" } else { "NO" })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match String::deserialize(d)?.as_str() {
            "YES" => Ok(true),
            "NO" => Ok(false),
            other => Err(serde::de::Error::custom(format!("expected YES or NO, got {other:?}"))),
        }
    }
}

/// One row of the quiz activity log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizAttemptRecord {
    pub user_id: LearnerId,
    pub quiz_id: QuizId,
    pub score: u32,
    pub total: u32,
    #[serde(with = "log_date")]
    pub date: NaiveDate,
    pub points: u32,
    pub points_total: u32,
    pub percentage: u32,
    pub time_spent: TimeSpent,
    #[serde(with = "yes_no")]
    pub passed: bool,
    pub course_id: CourseId,
}

impl QuizAttemptRecord {
    /// Check the derived columns against a regrade of `score / total`.
    pub fn validate(&self, threshold_pct: u8) -> Result<(), TelemetryError> {
        if self.total == 0 {
            return Err(invalid("total", "must be positive"));
        }
        if self.score > self.total {
            return Err(invalid("score", format!("{} exceeds total {}", self.score, self.total)));
        }
        if self.points > self.points_total {
            return Err(invalid(
                "points",
                format!("{} exceeds points_total {}", self.points, self.points_total),
            ));
        }
        let g = grade_score(self.quiz_id, self.score, self.total, self.points_total, threshold_pct)
            .map_err(|e| invalid("score", e.to_string()))?;
        if g.percentage != self.percentage {
            return Err(invalid(
                "percentage",
                format!("must be {} for {}/{}", g.percentage, self.score, self.total),
            ));
        }
        if g.points != self.points {
            return Err(invalid("points", format!("must be {}", g.points)));
        }
        if g.passed != self.passed {
            return Err(invalid(
                "passed",
                format!("inconsistent with a {threshold_pct}% threshold"),
            ));
        }
        Ok(())
    }
}

/// Append-only quiz activity log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityLog {
    records: Vec<QuizAttemptRecord>,
}

impl ActivityLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validate and append. Identical rows are allowed: attempts repeat.
    pub fn log_attempt(
        &mut self,
        record: QuizAttemptRecord,
        threshold_pct: u8,
    ) -> Result<(), TelemetryError> {
        record.validate(threshold_pct)?;
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[QuizAttemptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV in append order.
    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }

    /// Parse an exported log, validating every row.
    pub fn from_csv(src: &str, threshold_pct: u8) -> Result<Self, TelemetryError> {
        let mut log = Self::new();
        for r in parse_log_csv(src)? {
            log.log_attempt(r, threshold_pct)?;
        }
        Ok(log)
    }
}

pub fn records_to_csv(records: &[QuizAttemptRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    format!("{LOG_HEADER}\n{body}")
}

pub fn parse_log_csv(src: &str) -> Result<Vec<QuizAttemptRecord>, TelemetryError> {
    let mut reader = csv::Reader::from_reader(src.as_bytes());
    let headers = reader.headers().map_err(|e| TelemetryError::Parse {
        what: "activity log",
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>().join(",") != LOG_HEADER {
        return Err(TelemetryError::Parse {
            what: "activity log",
            message: "unexpected header".into(),
        });
    }
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e| TelemetryError::Parse {
                what: "activity log",
                message: e.to_string(),
            })
        })
        .collect()
}

/// Stable sort into export order: quiz, then date, then learner.
pub fn sort_for_export(records: &mut [QuizAttemptRecord]) {
    records.sort_by_key(|r| (r.quiz_id, r.date, r.user_id));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    UserCentricity,
    Emotion,
    Appeal,
    Satisfaction,
    Clarity,
    ErrorRecognition,
    Feedback,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Self::UserCentricity,
        Self::Emotion,
        Self::Appeal,
        Self::Satisfaction,
        Self::Clarity,
        Self::ErrorRecognition,
        Self::Feedback,
    ];

    pub fn group(self) -> CriterionGroup {
        match self {
            Self::UserCentricity | Self::Emotion | Self::Appeal | Self::Satisfaction => {
                CriterionGroup::Engagement
            }
            Self::Clarity | Self::ErrorRecognition | Self::Feedback => {
                CriterionGroup::EducationalUsability
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::UserCentricity => "User-centricity",
            Self::Emotion => "Emotion",
            Self::Appeal => "Appeal",
            Self::Satisfaction => "Satisfaction",
            Self::Clarity => "Clarity",
            Self::ErrorRecognition => "Error recognition and correction",
            Self::Feedback => "Feedback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionGroup {
    Engagement,
    EducationalUsability,
}

impl CriterionGroup {
    pub const ALL: [CriterionGroup; 2] = [Self::Engagement, Self::EducationalUsability];

    pub fn criteria(self) -> impl Iterator<Item = Criterion> {
        Criterion::ALL.into_iter().filter(move |c| c.group() == self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Negative,
    Neutral,
    Positive,
}

/// Negative below 2.6, neutral below 3.4, positive from 3.4 up to 5.
pub fn classify(mean: Tenths) -> Result<Classification, TelemetryError> {
    match mean.tenths() {
        10..26 => Ok(Classification::Negative),
        26..34 => Ok(Classification::Neutral),
        34..=50 => Ok(Classification::Positive),
        _ => Err(TelemetryError::OutOfScale(mean)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: u8,
    pub criterion: Criterion,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub scale_min: u8,
    pub scale_max: u8,
    pub statements: Vec<Statement>,
}

impl Questionnaire {
    pub fn from_toml(src: &str) -> Result<Self, TelemetryError> {
        let q: Self = toml::from_str(src).map_err(|e| TelemetryError::Parse {
            what: "questionnaire",
            message: e.to_string(),
        })?;
        if q.scale_min >= q.scale_max {
            return Err(invalid("scale", "min must be below max"));
        }
        let ids: BTreeSet<u8> = q.statements.iter().map(|s| s.id).collect();
        if ids.len() != q.statements.len() {
            return Err(invalid("statements", "duplicate statement id"));
        }
        Ok(q)
    }

    /// The 17-statement course evaluation.
    pub fn standard() -> Self {
        Self::from_toml(DEFAULT_QUESTIONNAIRE).expect("shipped questionnaire is valid")
    }

    pub fn statement_ids(&self, criterion: Criterion) -> Vec<u8> {
        self.statements
            .iter()
            .filter(|s| s.criterion == criterion)
            .map(|s| s.id)
            .collect()
    }

    fn group_statement_ids(&self, group: CriterionGroup) -> Vec<u8> {
        self.statements
            .iter()
            .filter(|s| s.criterion.group() == group)
            .map(|s| s.id)
            .collect()
    }

    pub fn validate_response(&self, r: &EvaluationResponse) -> Result<(), TelemetryError> {
        if r.answers.len() != self.statements.len() {
            return Err(invalid(
                "answers",
                format!("expected {} answers, got {}", self.statements.len(), r.answers.len()),
            ));
        }
        for s in &self.statements {
            let Some(&v) = r.answers.get(&s.id) else {
                return Err(invalid("answers", format!("statement {} unanswered", s.id)));
            };
            if !(self.scale_min..=self.scale_max).contains(&v) {
                return Err(invalid(
                    "answers",
                    format!("statement {} rated {v}, outside {}..={}", s.id, self.scale_min, self.scale_max),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationResponse {
    pub learner_id: LearnerId,
    pub core: CognitiveCore,
    pub answers: BTreeMap<u8, u8>,
    pub submitted_at: DateTime<Utc>,
}

/// Summary of a pool of ratings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolStats {
    pub n: usize,
    pub mean: Tenths,
    pub sd: Tenths,
    pub min: u8,
    pub max: u8,
    pub classification: Classification,
}

fn pool_stats(pool: &[u32]) -> Result<PoolStats, TelemetryError> {
    if pool.is_empty() {
        return Err(TelemetryError::NoResponses);
    }
    let sum: u64 = pool.iter().map(|&v| u64::from(v)).sum();
    let mean = Tenths::from_ratio(sum, pool.len() as u64);
    Ok(PoolStats {
        n: pool.len(),
        mean,
        sd: population_sd_tenths(pool).expect("non-empty"),
        min: *pool.iter().min().expect("non-empty") as u8,
        max: *pool.iter().max().expect("non-empty") as u8,
        classification: classify(mean)?,
    })
}

fn pool(responses: &[EvaluationResponse], statements: &[u8]) -> Vec<u32> {
    responses
        .iter()
        .flat_map(|r| statements.iter().filter_map(|s| r.answers.get(s)))
        .map(|&v| u32::from(v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CriterionStats {
    pub criterion: Criterion,
    pub statement_ids: Vec<u8>,
    pub mean: Tenths,
    pub sd: Tenths,
    pub min: u8,
    pub max: u8,
    pub classification: Classification,
}

/// Statistics over every rating given to the criterion's statements.
pub fn criterion_stats(
    responses: &[EvaluationResponse],
    questionnaire: &Questionnaire,
    criterion: Criterion,
) -> Result<CriterionStats, TelemetryError> {
    let statement_ids = questionnaire.statement_ids(criterion);
    let s = pool_stats(&pool(responses, &statement_ids))?;
    Ok(CriterionStats {
        criterion,
        statement_ids,
        mean: s.mean,
        sd: s.sd,
        min: s.min,
        max: s.max,
        classification: s.classification,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatementStats {
    pub statement: u8,
    pub criterion: Criterion,
    #[serde(flatten)]
    pub stats: PoolStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupStats {
    pub group: CriterionGroup,
    /// Mean of the group's criterion means.
    pub mean: Tenths,
    pub classification: Classification,
}

/// Overall group figure: the mean of the group's rounded criterion means.
pub fn group_rollup(
    responses: &[EvaluationResponse],
    questionnaire: &Questionnaire,
    group: CriterionGroup,
) -> Result<GroupStats, TelemetryError> {
    let means = group
        .criteria()
        .map(|c| criterion_stats(responses, questionnaire, c).map(|s| s.mean))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = Tenths::mean_of(&means).ok_or(TelemetryError::NoResponses)?;
    Ok(GroupStats {
        group,
        mean,
        classification: classify(mean)?,
    })
}

/// Per-core group mean over every rating of the group's statements. Cores
/// without responses are left out.
pub fn per_core_breakdown(
    responses: &[EvaluationResponse],
    questionnaire: &Questionnaire,
    group: CriterionGroup,
) -> BTreeMap<CognitiveCore, Tenths> {
    let statements = questionnaire.group_statement_ids(group);
    CognitiveCore::ALL
        .iter()
        .filter_map(|&core| {
            let of_core: Vec<EvaluationResponse> =
                responses.iter().filter(|r| r.core == core).cloned().collect();
            pool_stats(&pool(&of_core, &statements))
                .ok()
                .map(|s| (core, s.mean))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub respondents: usize,
    pub statements: Vec<StatementStats>,
    pub criteria: Vec<CriterionStats>,
    pub groups: Vec<GroupStats>,
    pub per_core: BTreeMap<CriterionGroup, BTreeMap<CognitiveCore, Tenths>>,
}

pub fn stats_report(
    responses: &[EvaluationResponse],
    questionnaire: &Questionnaire,
) -> Result<StatsReport, TelemetryError> {
    if responses.is_empty() {
        return Err(TelemetryError::NoResponses);
    }
    let statements = questionnaire
        .statements
        .iter()
        .map(|s| {
            Ok(StatementStats {
                statement: s.id,
                criterion: s.criterion,
                stats: pool_stats(&pool(responses, &[s.id]))?,
            })
        })
        .collect::<Result<Vec<_>, TelemetryError>>()?;
    let criteria = Criterion::ALL
        .iter()
        .map(|&c| criterion_stats(responses, questionnaire, c))
        .collect::<Result<Vec<_>, _>>()?;
    let groups = CriterionGroup::ALL
        .iter()
        .map(|&g| group_rollup(responses, questionnaire, g))
        .collect::<Result<Vec<_>, _>>()?;
    let per_core = CriterionGroup::ALL
        .iter()
        .map(|&g| (g, per_core_breakdown(responses, questionnaire, g)))
        .collect();
    Ok(StatsReport {
        respondents: responses.len(),
        statements,
        criteria,
        groups,
        per_core,
    })
}

/// `n` responses whose per-statement means are exactly `targets`.
///
/// Each statement's ratings are spread as evenly as possible: with target
/// sum `q*n + r`, `r` respondents give `q + 1` and the rest give `q`.
pub fn synthesize_responses(
    questionnaire: &Questionnaire,
    targets: &BTreeMap<u8, Tenths>,
    core: CognitiveCore,
    first_learner: u64,
    n: u32,
    submitted_at: DateTime<Utc>,
) -> Result<Vec<EvaluationResponse>, TelemetryError> {
    if n == 0 {
        return Err(TelemetryError::NoResponses);
    }
    let mut columns = BTreeMap::new();
    for s in &questionnaire.statements {
        let t = *targets
            .get(&s.id)
            .ok_or_else(|| invalid("targets", format!("statement {} missing", s.id)))?;
        let scaled = u64::from(t.tenths()) * u64::from(n);
        if scaled % 10 != 0 {
            return Err(invalid(
                "targets",
                format!("mean {t} not reachable with {n} respondents"),
            ));
        }
        let sum = (scaled / 10) as u32;
        let (q, r) = (sum / n, sum % n);
        let lo = u32::from(questionnaire.scale_min);
        let hi = u32::from(questionnaire.scale_max);
        if q < lo || q + u32::from(r > 0) > hi {
            return Err(TelemetryError::OutOfScale(t));
        }
        columns.insert(s.id, (q, r));
    }
    Ok((0..n)
        .map(|i| EvaluationResponse {
            learner_id: LearnerId(first_learner + u64::from(i)),
            core,
            answers: columns
                .iter()
                .map(|(&id, &(q, r))| (id, (q + u32::from(i < r)) as u8))
                .collect(),
            submitted_at,
        })
        .collect())
}

/// Evaluation responses as CSV: `learner_id,core,submitted_at,s1..sN`.
pub fn responses_to_csv(questionnaire: &Questionnaire, responses: &[EvaluationResponse]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["learner_id".to_string(), "core".into(), "submitted_at".into()];
    header.extend(questionnaire.statements.iter().map(|s| format!("s{}", s.id)));
    w.write_record(&header).expect("in-memory write");
    for r in responses {
        let mut row = vec![
            r.learner_id.to_string(),
            r.core.to_string(),
            r.submitted_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        ];
        row.extend(
            questionnaire
                .statements
                .iter()
                .map(|s| r.answers.get(&s.id).map_or(String::new(), ToString::to_string)),
        );
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn responses_from_csv(
    questionnaire: &Questionnaire,
    src: &str,
) -> Result<Vec<EvaluationResponse>, TelemetryError> {
    let perr = |m: String| TelemetryError::Parse {
        what: "evaluation responses",
        message: m,
    };
    let mut reader = csv::Reader::from_reader(src.as_bytes());
    let headers = reader.headers().map_err(|e| perr(e.to_string()))?.clone();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| perr(e.to_string()))?;
        let get = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .and_then(|i| row.get(i))
                .ok_or_else(|| perr(format!("missing column {name}")))
        };
        let mut answers = BTreeMap::new();
        for s in &questionnaire.statements {
            let v = get(&format!("s{}", s.id))?;
            answers.insert(s.id, v.parse().map_err(|_| perr(format!("bad rating {v:?}")))?);
        }
        let response = EvaluationResponse {
            learner_id: LearnerId(get("learner_id")?.parse().map_err(|_| perr("bad learner id".into()))?),
            core: get("core")?.parse().map_err(|_| perr("bad core".into()))?,
            answers,
            submitted_at: DateTime::parse_from_rfc3339(get("submitted_at")?)
                .map_err(|e| perr(e.to_string()))?
                .with_timezone(&Utc),
        };
        questionnaire.validate_response(&response)?;
        out.push(response);
    }
    Ok(out)
}

/// `100 * num / den` to one decimal, rounded half-up.
pub fn percent_tenths(num: u64, den: u64) -> Tenths {
    if den == 0 {
        return Tenths(0);
    }
    Tenths::from_ratio(100 * num, den)
}

/// One-decimal shares of 100% that sum to exactly 100.0.
pub fn distribution_tenths<K: Ord + Clone>(counts: &BTreeMap<K, u32>) -> BTreeMap<K, Tenths> {
    let keys: Vec<&K> = counts.keys().collect();
    let values: Vec<u64> = counts.values().map(|&v| u64::from(v)).collect();
    match largest_remainder(&values, 1000) {
        Some(shares) => keys
            .into_iter()
            .cloned()
            .zip(shares.into_iter().map(|s| Tenths(s as u32)))
            .collect(),
        None => keys.into_iter().cloned().map(|k| (k, Tenths(0))).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortMember {
    pub learner_id: LearnerId,
    pub core: CognitiveCore,
    pub gender: Option<String>,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CohortSummary {
    pub n: u32,
    pub gender_counts: BTreeMap<String, u32>,
    pub gender_percentages: BTreeMap<String, Tenths>,
    pub core_counts: BTreeMap<CognitiveCore, u32>,
    pub core_percentages: BTreeMap<CognitiveCore, Tenths>,
    pub completion_count: u32,
    /// Completions as a share of all participants.
    pub completion_pct: Tenths,
    pub response_count: u32,
    /// Evaluation responses as a share of completions.
    pub response_pct: Tenths,
}

pub fn cohort_summary(members: &[CohortMember], responses: &[EvaluationResponse]) -> CohortSummary {
    let n = members.len() as u32;
    let mut core_counts: BTreeMap<CognitiveCore, u32> =
        CognitiveCore::ALL.iter().map(|&c| (c, 0)).collect();
    let mut gender_counts: BTreeMap<String, u32> = BTreeMap::new();
    for m in members {
        *core_counts.entry(m.core).or_insert(0) += 1;
        if let Some(g) = &m.gender {
            *gender_counts.entry(g.clone()).or_insert(0) += 1;
        }
    }
    let completion_count = members.iter().filter(|m| m.completed).count() as u32;
    let response_count = responses
        .iter()
        .map(|r| r.learner_id)
        .collect::<BTreeSet<_>>()
        .len() as u32;
    CohortSummary {
        n,
        gender_percentages: distribution_tenths(&gender_counts),
        gender_counts,
        core_percentages: distribution_tenths(&core_counts),
        core_counts,
        completion_count,
        completion_pct: percent_tenths(completion_count.into(), n.into()),
        response_count,
        response_pct: percent_tenths(response_count.into(), completion_count.into()),
    }
}

/// Reference data for checking the analytics.
pub mod fixtures {
    use super::*;

    const QUIZ_LOG_SAMPLE: &str = include_str!("../data/quiz_log_sample.csv");
    const STATEMENT_MEANS: &str = include_str!("../data/evaluation_statement_means.csv");
    const PER_CORE_MEANS: &str = include_str!("../data/per_core_criterion_means.toml");

    /// 28 logged quiz attempts, exactly as exported by the live course.
    pub fn attempt_log_csv() -> &'static str {
        QUIZ_LOG_SAMPLE
    }

    pub fn attempt_log() -> Vec<QuizAttemptRecord> {
        parse_log_csv(QUIZ_LOG_SAMPLE).expect("fixture parses")
    }

    /// Mean rating per statement across all respondents.
    pub fn statement_means() -> BTreeMap<u8, Tenths> {
        #[derive(Deserialize)]
        struct Row {
            statement: u8,
            mean: String,
        }
        csv::Reader::from_reader(STATEMENT_MEANS.as_bytes())
            .deserialize::<Row>()
            .map(|r| {
                let r = r.expect("fixture parses");
                (r.statement, r.mean.parse().expect("fixture parses"))
            })
            .collect()
    }

    /// Mean rating per criterion for each core.
    pub fn per_core_criterion_means() -> BTreeMap<CognitiveCore, BTreeMap<Criterion, Tenths>> {
        let raw: BTreeMap<String, BTreeMap<Criterion, Tenths>> =
            toml::from_str(PER_CORE_MEANS).expect("fixture parses");
        raw.into_iter()
            .map(|(k, v)| (k.parse().expect("fixture core"), v))
            .collect()
    }

    /// Every statement of a criterion takes that criterion's mean.
    pub fn statement_targets_for(
        questionnaire: &Questionnaire,
        criterion_means: &BTreeMap<Criterion, Tenths>,
    ) -> BTreeMap<u8, Tenths> {
        questionnaire
            .statements
            .iter()
            .map(|s| (s.id, criterion_means[&s.criterion]))
            .collect()
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2022, 5, 1, 12, 0, 0).unwrap()
    }

    #[test]
    fn time_spent_round_trip() {
        for (s, secs) in [("1m 45s", 105), ("41s", 41), ("2m 10s", 130), ("1m 9s", 69), ("0s", 0)] {
            let t: TimeSpent = s.parse().unwrap();
            assert_eq!(t.0, secs);
            assert_eq!(t.to_string(), s);
        }
        assert_eq!("1h 0m 5s".parse::<TimeSpent>().unwrap().0, 3605);
        for bad in ["", "45", "1s 2m", "xm 3s", "3d"] {
            assert!(bad.parse::<TimeSpent>().is_err(), "{bad}");
        }
    }

    fn row(user: u64, score: u32, total: u32, pct: u32, pts: u32, passed: bool) -> QuizAttemptRecord {
        QuizAttemptRecord {
            user_id: LearnerId(user),
            quiz_id: QuizId(30386),
            score,
            total,
            date: NaiveDate::from_ymd_opt(2022, 3, 9).unwrap(),
            points: pts,
            points_total: 10,
            percentage: pct,
            time_spent: TimeSpent(55),
            passed,
            course_id: CourseId(31285),
        }
    }

    #[test]
    fn log_rejects_inconsistent_rows() {
        let mut log = ActivityLog::new();
        log.log_attempt(row(141, 1, 2, 50, 5, false), 80).unwrap();
        log.log_attempt(row(141, 1, 2, 50, 5, false), 80).unwrap();
        assert_eq!(log.len(), 2);
        let e = log.log_attempt(row(141, 1, 2, 40, 5, false), 80).unwrap_err();
        assert!(matches!(e, TelemetryError::Invalid { field: "percentage", .. }));
        let e = log.log_attempt(row(141, 1, 2, 50, 5, true), 80).unwrap_err();
        assert!(matches!(e, TelemetryError::Invalid { field: "passed", .. }));
        let e = log.log_attempt(row(141, 3, 2, 150, 15, true), 80).unwrap_err();
        assert!(matches!(e, TelemetryError::Invalid { field: "score", .. }));
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn fixture_log_round_trips_byte_exact() {
        let src = fixtures::attempt_log_csv();
        let log = ActivityLog::from_csv(src, 80).unwrap();
        assert_eq!(log.len(), 28);
        assert_eq!(log.to_csv(), src);
        let first = &log.records()[0];
        assert_eq!(first.date, NaiveDate::from_ymd_opt(2022, 4, 13).unwrap());
        assert_eq!(first.time_spent, TimeSpent(105));
    }

    #[test]
    fn empty_log_exports_header_only() {
        assert_eq!(ActivityLog::new().to_csv(), format!("{LOG_HEADER}\n"));
        assert!(parse_log_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn export_sort_is_stable() {
        let mut rows = fixtures::attempt_log();
        sort_for_export(&mut rows);
        let user_171: Vec<u32> = rows.iter().filter(|r| r.user_id.0 == 171).map(|r| r.score).collect();
        assert_eq!(user_171, vec![2, 1]);
        assert!(rows.windows(2).all(|w| (w[0].quiz_id, w[0].date, w[0].user_id)
            <= (w[1].quiz_id, w[1].date, w[1].user_id)));
    }

    #[test]
    fn classification_boundaries() {
        assert_eq!(classify(Tenths(10)), Ok(Classification::Negative));
        assert_eq!(classify(Tenths(25)), Ok(Classification::Negative));
        assert_eq!(classify(Tenths(26)), Ok(Classification::Neutral));
        assert_eq!(classify(Tenths(33)), Ok(Classification::Neutral));
        assert_eq!(classify(Tenths(34)), Ok(Classification::Positive));
        assert_eq!(classify(Tenths(45)), Ok(Classification::Positive));
        assert_eq!(classify(Tenths(50)), Ok(Classification::Positive));
        assert!(classify(Tenths(9)).is_err());
        assert!(classify(Tenths(51)).is_err());
    }

    #[test]
    fn questionnaire_shape() {
        let q = Questionnaire::standard();
        assert_eq!(q.statements.len(), 17);
        assert_eq!(q.statement_ids(Criterion::Clarity), vec![11, 12]);
        assert_eq!(q.statement_ids(Criterion::ErrorRecognition), vec![13, 14]);
        assert_eq!(
            CriterionGroup::Engagement.criteria().count() + CriterionGroup::EducationalUsability.criteria().count(),
            7
        );
    }

    #[test]
    fn response_validation() {
        let q = Questionnaire::standard();
        let mut r = EvaluationResponse {
            learner_id: LearnerId(1),
            core: CognitiveCore::SF,
            answers: (1..=17).map(|i| (i, 4)).collect(),
            submitted_at: at(),
        };
        q.validate_response(&r).unwrap();
        r.answers.insert(3, 6);
        assert!(q.validate_response(&r).is_err());
        r.answers.insert(3, 0);
        assert!(q.validate_response(&r).is_err());
        r.answers.remove(&3);
        assert!(q.validate_response(&r).is_err());
    }

    #[test]
    fn criterion_examples() {
        let q = Questionnaire::standard();
        let targets = fixtures::statement_means();
        let responses = synthesize_responses(&q, &targets, CognitiveCore::ST, 1, 10, at()).unwrap();
        let mean = |c| criterion_stats(&responses, &q, c).unwrap().mean;
        assert_eq!(mean(Criterion::Clarity), Tenths(39));
        assert_eq!(mean(Criterion::ErrorRecognition), Tenths(47));
        assert_eq!(mean(Criterion::UserCentricity), Tenths(44));
        assert!(matches!(
            criterion_stats(&[], &q, Criterion::Clarity),
            Err(TelemetryError::NoResponses)
        ));
    }

    #[test]
    fn synthetic_columns_hit_targets_exactly() {
        let q = Questionnaire::standard();
        let targets = fixtures::statement_means();
        let responses = synthesize_responses(&q, &targets, CognitiveCore::NT, 100, 10, at()).unwrap();
        for s in &q.statements {
            let sum: u32 = responses.iter().map(|r| u32::from(r.answers[&s.id])).sum();
            assert_eq!(sum, targets[&s.id].tenths());
        }
        for r in &responses {
            q.validate_response(r).unwrap();
        }
        let odd: BTreeMap<u8, Tenths> = targets.keys().map(|&k| (k, Tenths(43))).collect();
        assert!(synthesize_responses(&q, &odd, CognitiveCore::NT, 1, 3, at()).is_err());
    }

    #[test]
    fn responses_csv_round_trip() {
        let q = Questionnaire::standard();
        let responses =
            synthesize_responses(&q, &fixtures::statement_means(), CognitiveCore::SF, 1, 10, at()).unwrap();
        let csv = responses_to_csv(&q, &responses);
        assert_eq!(responses_from_csv(&q, &csv).unwrap(), responses);
    }

    #[test]
    fn uniform_threes_give_three_everywhere() {
        let q = Questionnaire::standard();
        let responses: Vec<EvaluationResponse> = CognitiveCore::ALL
            .iter()
            .map(|&core| EvaluationResponse {
                learner_id: LearnerId(1),
                core,
                answers: (1..=17).map(|i| (i, 3)).collect(),
                submitted_at: at(),
            })
            .collect();
        let b = per_core_breakdown(&responses, &q, CriterionGroup::Engagement);
        assert_eq!(b.len(), 4);
        assert!(b.values().all(|&m| m == Tenths(30)));
        let partial = per_core_breakdown(&responses[..1], &q, CriterionGroup::Engagement);
        assert_eq!(partial.len(), 1);
    }

    #[test]
    fn cohort_percentages() {
        let mut members = Vec::new();
        let mut id = 0;
        for (core, count, done) in [
            (CognitiveCore::NF, 6, 4),
            (CognitiveCore::NT, 8, 5),
            (CognitiveCore::SF, 8, 5),
            (CognitiveCore::ST, 15, 9),
        ] {
            for i in 0..count {
                id += 1;
                members.push(CohortMember {
                    learner_id: LearnerId(id),
                    core,
                    gender: Some(if id <= 17 { "female" } else { "male" }.into()),
                    completed: i < done,
                });
            }
        }
        let s = cohort_summary(&members, &[]);
        assert_eq!(s.n, 37);
        assert_eq!(s.core_counts[&CognitiveCore::ST], 15);
        assert_eq!(s.core_percentages[&CognitiveCore::ST], Tenths(406));
        assert_eq!(s.core_percentages[&CognitiveCore::NF], Tenths(162));
        assert_eq!(s.completion_count, 23);
        assert_eq!(s.completion_pct, Tenths(622));
        assert_eq!(percent_tenths(21, 23), Tenths(913));
        assert_eq!(s.core_counts.values().sum::<u32>(), s.n);

        let empty = cohort_summary(&[], &[]);
        assert_eq!(empty.n, 0);
        assert_eq!(empty.completion_pct, Tenths(0));
        assert!(empty.core_percentages.values().all(|&p| p == Tenths(0)));
    }
}
