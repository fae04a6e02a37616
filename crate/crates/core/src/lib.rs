//! Course engine for personality-adapted gamified learning.
//!
//! A short forced-choice instrument assigns each learner a cognitive core
//! (ST, SF, NT or NF). The core selects a tuple of game elements, and the
//! runtime surfaces only the effects of those elements while the course
//! engine drips content through topics, lessons and quizzes.

pub mod assessment;
pub mod course;
pub mod elements;
pub mod ids;
pub mod numeric;
pub mod platform;
pub mod runtime;
pub mod telemetry;
