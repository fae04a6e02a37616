//! Identifier newtypes.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! numeric_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                Self(v)
            }
        }
    };
}

numeric_id!(LearnerId);
numeric_id!(CourseId);
numeric_id!(TopicId);
numeric_id!(LessonId);
numeric_id!(QuizId);
numeric_id!(
    /// Sequence number of an [`crate::runtime::ActivityEvent`], unique per platform.
    EventId
);

/// A node of a course tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum NodeId {
    Topic(TopicId),
    Lesson(LessonId),
    Quiz(QuizId),
}

impl NodeId {
    pub fn raw(self) -> u64 {
        match self {
            Self::Topic(t) => t.0,
            Self::Lesson(l) => l.0,
            Self::Quiz(q) => q.0,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Topic(t) => write!(f, "topic:{t}"),
            Self::Lesson(l) => write!(f, "lesson:{l}"),
            Self::Quiz(q) => write!(f, "quiz:{q}"),
        }
    }
}

/// Serialize a map with structured keys as a list of `[key, value]` pairs,
/// for formats such as JSON that only allow string keys.
pub(crate) mod map_as_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize,
        V: Serialize,
        S: Serializer,
    {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}
