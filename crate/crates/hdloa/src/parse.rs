//! Turn raw completions into role predictions or classification labels.
//!
//! Model output drifts: brackets go missing, quotes turn curly, candidate
//! answers get restated before the final reevaluation. The parsers here are
//! tolerant by construction — the last answer line per role wins, missing
//! roles become empty predictions rather than errors, and only label
//! parsing (where the scorer needs a definite verdict) can fail.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{RolePredictions, TaskKind, NOT_SPECIFIED};

#[derive(Debug, Error)]
#[error("no {task} label found after the answer cue")]
pub struct ParseLabelError {
    pub task: TaskKind,
}

/// What the EAE parser saw: which requested roles got an answer line, which
/// did not, how many answer-shaped lines matched no requested role, and
/// whether the output was unparseable enough that everything fell through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub matched_roles: BTreeSet<String>,
    pub missing_roles: BTreeSet<String>,
    pub stray_lines: usize,
    pub used_fallback: bool,
}

/// Match `[<role>]: rest` at the start of a trimmed line, tolerating
/// missing brackets and case differences in the role. Returns the text
/// after the colon.
fn match_answer_line<'a>(line: &'a str, role: &str) -> Option<&'a str> {
    let mut s = line.trim_start();
    if let Some(rest) = s.strip_prefix('[') {
        s = rest.trim_start();
    }
    if s.len() < role.len() || !s.is_char_boundary(role.len()) {
        return None;
    }
    if !s[..role.len()].eq_ignore_ascii_case(role) {
        return None;
    }
    let mut after = s[role.len()..].trim_start();
    if let Some(rest) = after.strip_prefix(']') {
        after = rest.trim_start();
    }
    after.strip_prefix(':')
}

/// A line that looks like an answer line (`[something]: ...`), whether or
/// not it names a requested role.
fn looks_like_answer_line(line: &str) -> bool {
    let t = line.trim_start();
    match t.strip_prefix('[') {
        Some(rest) => rest
            .find(']')
            .is_some_and(|i| rest[i + 1..].trim_start().starts_with(':')),
        None => false,
    }
}

const QUOTE_CHARS: [char; 3] = ['"', '\u{201C}', '\u{201D}'];

/// Split the text after `[role]:` into spans. Quoted segments are the
/// canonical form and protect embedded commas; with no quotes at all the
/// text is split on commas as a fallback. The sentinel maps to no span.
fn split_spans(rest: &str, max_answers: usize) -> Vec<String> {
    let mut pieces: Vec<String> = Vec::new();
    if rest.contains(&QUOTE_CHARS[..]) {
        let mut inside = false;
        let mut current = String::new();
        for ch in rest.chars() {
            if QUOTE_CHARS.contains(&ch) {
                if inside {
                    pieces.push(current.clone());
                    current.clear();
                }
                inside = !inside;
            } else if inside {
                current.push(ch);
            }
        }
    } else {
        pieces.extend(rest.split(',').map(|s| s.to_string()));
    }

    pieces
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty() && !p.eq_ignore_ascii_case(NOT_SPECIFIED))
        .take(max_answers)
        .collect()
}

/// Extract per-role spans from a completion.
///
/// For each requested role the final `[<role>]:` line wins — models restate
/// candidates during the application step, and the reevaluated answer comes
/// last. Roles with no matching line are missing and yield empty lists.
pub fn parse_eae_output(
    text: &str,
    roles: &[String],
    max_answers: usize,
) -> (RolePredictions, ParseDiagnostics) {
    let mut last_rest: BTreeMap<&str, &str> = BTreeMap::new();
    let mut stray_lines = 0usize;

    for line in text.lines() {
        let mut matched = false;
        for role in roles {
            if let Some(rest) = match_answer_line(line, role) {
                last_rest.insert(role.as_str(), rest);
                matched = true;
            }
        }
        if !matched && looks_like_answer_line(line) {
            stray_lines += 1;
        }
    }

    let mut per_role = BTreeMap::new();
    let mut matched_roles = BTreeSet::new();
    let mut missing_roles = BTreeSet::new();
    for role in roles {
        match last_rest.get(role.as_str()) {
            Some(rest) => {
                matched_roles.insert(role.clone());
                per_role.insert(role.clone(), split_spans(rest, max_answers));
            }
            None => {
                missing_roles.insert(role.clone());
                per_role.insert(role.clone(), Vec::new());
            }
        }
    }

    let used_fallback = matched_roles.is_empty();
    (
        RolePredictions {
            per_role,
            raw_output: text.to_string(),
        },
        ParseDiagnostics {
            matched_roles,
            missing_roles,
            stray_lines,
            used_fallback,
        },
    )
}

/// Render the canonical answer block for a set of predictions: one
/// `[<role>]: "<span>", ...` line per role in the given order, with the
/// sentinel standing in for empty lists. Inverse of `parse_eae_output`
/// over well-formed spans.
pub fn render_answer_block(roles: &[String], preds: &RolePredictions) -> String {
    let mut lines = Vec::new();
    for role in roles {
        let spans = preds.per_role.get(role).map(Vec::as_slice).unwrap_or(&[]);
        let value = if spans.is_empty() {
            format!("\"{NOT_SPECIFIED}\"")
        } else {
            spans
                .iter()
                .map(|s| format!("\"{s}\""))
                .collect::<Vec<_>>()
                .join(", ")
        };
        lines.push(format!("[{role}]: {value}"));
    }
    lines.join("\n")
}

/// Take the label candidate after a cue occurrence and canonicalize it
/// against the task's label set.
fn label_after(rest: &str, labels: &[&str]) -> Option<String> {
    let trimmed = rest.trim_start().trim_start_matches(':').trim_start();
    let lowered = trimmed.to_lowercase();
    // Longest label first so "no" cannot shadow "it is not possible to tell".
    let mut sorted: Vec<&str> = labels.to_vec();
    sorted.sort_by_key(|l| std::cmp::Reverse(l.len()));
    for label in sorted {
        if let Some(after) = lowered.strip_prefix(label) {
            let boundary_ok = !after.chars().next().is_some_and(|c| c.is_alphanumeric());
            if boundary_ok {
                return Some(label.to_string());
            }
        }
    }
    None
}

/// Extract the last task label that follows the task's answer cue
/// ("sentiment:" for sentiment analysis, "the answer is" for NLI), matched
/// case-insensitively; the label comes back in canonical casing.
pub fn parse_label_output(text: &str, task: TaskKind) -> Result<String, ParseLabelError> {
    let labels = task.label_set().ok_or(ParseLabelError { task })?;
    let cue = match task {
        TaskKind::Sentiment => "sentiment:",
        TaskKind::Nli => "the answer is",
        _ => return Err(ParseLabelError { task }),
    };

    // Work entirely on the lowered text; labels come back in canonical
    // casing from the label set, never from the completion.
    let lowered = text.to_lowercase();
    let mut result = None;
    let mut from = 0;
    while let Some(pos) = lowered[from..].find(cue) {
        let rest_start = from + pos + cue.len();
        let line_rest = lowered[rest_start..].lines().next().unwrap_or("");
        if let Some(label) = label_after(line_rest, labels) {
            result = Some(label);
        }
        from = rest_start;
    }
    result.ok_or(ParseLabelError { task })
}
