//! Heuristic-driven link-of-analogy prompting toolkit.
//!
//! The crate covers the full experiment loop for heuristic-driven prompting
//! on document-level event argument extraction (and two classification
//! tasks): generating candidate heuristics with a completion backend,
//! selecting the strongest ones by measured accuracy, assembling prompts
//! from byte-pinned templates, invoking backends with retries and a
//! content-addressed cache, parsing structured answers back out of model
//! text, and scoring Arg-I/Arg-C span F1. A probe module implements the
//! companion methodology for detecting and ablating implicit heuristics in
//! existing few-shot prompts.

pub mod core;
pub mod data;
pub mod heuristics;
pub mod llm;
pub mod parse;
pub mod probe;
pub mod promptkit;
pub mod runner;
pub mod score;
