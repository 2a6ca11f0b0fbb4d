//! Domain model shared by every other module.
//!
//! All types here are immutable values after construction and safe to share
//! across threads without synchronization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel the prompts mandate for a role with no extractable argument.
/// It never appears in gold data or in parsed predictions; parsers map it
/// to an empty span list.
pub const NOT_SPECIFIED: &str = "not specified";

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("heuristic label must be non-empty")]
    EmptyLabel,
    #[error("heuristic body must be non-empty (label {label:?})")]
    EmptyBody { label: String },
    #[error("duplicate heuristic label {label:?} (labels are case-insensitive)")]
    DuplicateLabel { label: String },
    #[error("duplicate generation_index {index} in heuristic set")]
    DuplicateIndex { index: usize },
    #[error("predicted span list for role {role:?} has {len} entries, cap is {cap}")]
    TooManyAnswers {
        role: String,
        len: usize,
        cap: usize,
    },
    #[error("predicted span for role {role:?} equals the reserved sentinel")]
    SentinelPrediction { role: String },
    #[error("unknown task kind {0:?}")]
    UnknownTask(String),
}

/// The tasks the toolkit knows how to prompt and score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "rams")]
    EaeRams,
    #[serde(rename = "docee")]
    EaeDocee,
    #[serde(rename = "sst2")]
    Sentiment,
    #[serde(rename = "snli")]
    Nli,
}

impl TaskKind {
    pub fn is_eae(self) -> bool {
        matches!(self, TaskKind::EaeRams | TaskKind::EaeDocee)
    }

    /// Closed label set for classification variants; `None` for EAE, which
    /// carries a per-instance role inventory instead.
    pub fn label_set(self) -> Option<&'static [&'static str]> {
        match self {
            TaskKind::Sentiment => Some(&["positive", "negative"]),
            TaskKind::Nli => Some(&["yes", "no", "it is not possible to tell"]),
            _ => None,
        }
    }

    /// Per-role answer cap: multi-answer documents allow up to three spans,
    /// single-answer extraction allows one. Overridable where operations
    /// take an explicit cap.
    pub fn default_max_answers(self) -> usize {
        match self {
            TaskKind::EaeDocee => 3,
            _ => 1,
        }
    }

    /// Number of in-context exemplars a demonstration keeps for this task.
    pub fn exemplar_count(self) -> usize {
        match self {
            TaskKind::EaeRams | TaskKind::EaeDocee => 1,
            TaskKind::Sentiment => 2,
            TaskKind::Nli => 3,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            TaskKind::EaeRams => "rams",
            TaskKind::EaeDocee => "docee",
            TaskKind::Sentiment => "sst2",
            TaskKind::Nli => "snli",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for TaskKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rams" => Ok(TaskKind::EaeRams),
            "docee" => Ok(TaskKind::EaeDocee),
            "sst2" => Ok(TaskKind::Sentiment),
            "snli" => Ok(TaskKind::Nli),
            other => Err(CoreError::UnknownTask(other.to_string())),
        }
    }
}

/// Character-offset span of the event trigger inside the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerSpan {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// One document paired with an event, its role inventory and gold arguments;
/// the unit of evaluation.
///
/// Gold absence is encoded by key absence: a role with no gold argument does
/// not appear in `gold` at all, and the sentinel string never does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EAEInstance {
    pub id: String,
    pub document: String,
    pub event_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<TriggerSpan>,
    pub roles: Vec<String>,
    #[serde(default)]
    pub gold: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
}

/// Collapse whitespace runs to single spaces and trim.
pub fn squish(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Check every instance invariant and return one description per violation.
///
/// Violations are data, not failures: loaders turn them into errors, but
/// the check itself never fails and is pure.
pub fn validate_instance(inst: &EAEInstance) -> Vec<String> {
    let mut violations = Vec::new();

    if let Some(trigger) = &inst.trigger {
        let chars: Vec<char> = inst.document.chars().collect();
        if trigger.char_start > trigger.char_end || trigger.char_end > chars.len() {
            violations.push(format!(
                "trigger offsets {}..{} out of range for document of {} chars",
                trigger.char_start,
                trigger.char_end,
                chars.len()
            ));
        } else {
            let slice: String = chars[trigger.char_start..trigger.char_end].iter().collect();
            if squish(&slice) != squish(&trigger.text) {
                violations.push(format!(
                    "trigger text {:?} does not match document slice {:?} at {}..{}",
                    trigger.text, slice, trigger.char_start, trigger.char_end
                ));
            }
        }
    }

    for (role, spans) in &inst.gold {
        if !inst.roles.iter().any(|r| r == role) {
            violations.push(format!("gold role {role:?} is not in the role inventory"));
        }
        if spans.is_empty() {
            violations.push(format!(
                "gold span set for role {role:?} is empty; absent roles must be omitted"
            ));
        }
        for span in spans {
            if span.trim().eq_ignore_ascii_case(NOT_SPECIFIED) {
                violations.push(format!(
                    "gold span for role {role:?} equals the reserved sentinel"
                ));
            }
        }
    }

    violations
}

/// A sentence (or premise/hypothesis pair) with a gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationText {
    Sentence(String),
    Pair { premise: String, hypothesis: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationInstance {
    pub id: String,
    pub text: ClassificationText,
    pub gold_label: String,
}

impl ClassificationInstance {
    /// Validate the gold label against the task's closed label set.
    pub fn validate(&self, task: TaskKind) -> Result<(), String> {
        let Some(labels) = task.label_set() else {
            return Err(format!("task {task} has no label set"));
        };
        if labels.contains(&self.gold_label.as_str()) {
            Ok(())
        } else {
            Err(format!(
                "label {:?} not in {{{}}}",
                self.gold_label,
                labels.join(", ")
            ))
        }
    }
}

/// Where a heuristic came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Manual,
}

/// A labeled extraction strategy: a short label plus the rule text itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heuristic {
    pub label: String,
    pub body: String,
    pub provenance: Provenance,
    pub generation_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_accuracy: Option<f64>,
}

impl Heuristic {
    pub fn new(
        label: impl Into<String>,
        body: impl Into<String>,
        provenance: Provenance,
        generation_index: usize,
    ) -> Result<Self, CoreError> {
        let label = label.into();
        let body = body.into();
        if label.trim().is_empty() {
            return Err(CoreError::EmptyLabel);
        }
        if body.trim().is_empty() {
            return Err(CoreError::EmptyBody { label });
        }
        Ok(Heuristic {
            label,
            body,
            provenance,
            generation_index,
            eval_accuracy: None,
        })
    }
}

/// An ordered set of heuristics written for one base role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSet {
    pub items: Vec<Heuristic>,
    pub base_role: String,
}

impl HeuristicSet {
    /// Labels must be pairwise distinct case-insensitively and
    /// generation indices unique.
    pub fn new(items: Vec<Heuristic>, base_role: impl Into<String>) -> Result<Self, CoreError> {
        let mut labels = std::collections::BTreeSet::new();
        let mut indices = std::collections::BTreeSet::new();
        for h in &items {
            if !labels.insert(h.label.to_lowercase()) {
                return Err(CoreError::DuplicateLabel {
                    label: h.label.clone(),
                });
            }
            if !indices.insert(h.generation_index) {
                return Err(CoreError::DuplicateIndex {
                    index: h.generation_index,
                });
            }
        }
        Ok(HeuristicSet {
            items,
            base_role: base_role.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Per-role extracted spans parsed from model output, plus the raw text
/// they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolePredictions {
    pub per_role: BTreeMap<String, Vec<String>>,
    pub raw_output: String,
}

impl RolePredictions {
    /// `cap` is the per-role answer limit (1 for single-answer tasks,
    /// 3 for multi-answer documents).
    pub fn new(
        per_role: BTreeMap<String, Vec<String>>,
        raw_output: impl Into<String>,
        cap: usize,
    ) -> Result<Self, CoreError> {
        for (role, spans) in &per_role {
            if spans.len() > cap || spans.len() > 3 {
                return Err(CoreError::TooManyAnswers {
                    role: role.clone(),
                    len: spans.len(),
                    cap: cap.min(3),
                });
            }
            for span in spans {
                if span.trim().eq_ignore_ascii_case(NOT_SPECIFIED) {
                    return Err(CoreError::SentinelPrediction { role: role.clone() });
                }
            }
        }
        Ok(RolePredictions {
            per_role,
            raw_output: raw_output.into(),
        })
    }

    /// All requested roles present with empty span lists; used to give an
    /// instance zero credit when its pipeline failed.
    pub fn empty(roles: &[String]) -> Self {
        RolePredictions {
            per_role: roles.iter().map(|r| (r.clone(), Vec::new())).collect(),
            raw_output: String::new(),
        }
    }
}

/// Precision/recall/F1 triple as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScores {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrfScores {
            precision,
            recall,
            f1,
        }
    }
}

/// Raw TP/FP/FN counts for identification (`_i`) and classification (`_c`)
/// matching. Classification matches imply identification matches, so
/// `tp_c <= tp_i` on any scorer output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp_i: u64,
    pub fp_i: u64,
    pub fn_i: u64,
    pub tp_c: u64,
    pub fp_c: u64,
    pub fn_c: u64,
}

impl MatchCounts {
    pub fn add(&mut self, other: &MatchCounts) {
        self.tp_i += other.tp_i;
        self.fp_i += other.fp_i;
        self.fn_i += other.fn_i;
        self.tp_c += other.tp_c;
        self.fp_c += other.fp_c;
        self.fn_c += other.fn_c;
    }
}

/// Arg-I and Arg-C precision/recall/F1 with the raw counts they derive from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EAEScores {
    pub arg_i: PrfScores,
    pub arg_c: PrfScores,
    pub counts: MatchCounts,
}

impl EAEScores {
    pub fn from_counts(counts: MatchCounts) -> Self {
        EAEScores {
            arg_i: PrfScores::from_counts(counts.tp_i, counts.fp_i, counts.fn_i),
            arg_c: PrfScores::from_counts(counts.tp_c, counts.fp_c, counts.fn_c),
            counts,
        }
    }
}
