//! Semantic schemas for event data: a JSON model, a JSLT interpreter, a
//! versioned schema registry, validation, random event generation, schema
//! evolution tooling and streaming data-quality checks.

pub mod jslt;
pub mod json;
pub mod pattern;
pub mod registry;
pub mod validator;
pub mod generator;
pub mod evolution;
pub mod dqt;
