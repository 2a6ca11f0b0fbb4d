//! Structured link-of-analogy exemplar content and its renderers.
//!
//! An exemplar demonstrates, per role: selecting a heuristic from the list
//! (retrieve), applying it independently per selection (map), and a
//! reevaluation question-and-answer pass that settles the final answer line
//! (evaluate). The structure is stored as data so the same exemplar can be
//! rendered with the full step scaffolding, with wording that avoids
//! referencing a heuristic list when the list was ablated away, or as bare
//! direct-answer lines when the step structure itself is ablated.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::{Ablation, AnalogyMapping, Exemplar, PromptError, PromptStyle};
use crate::core::{TaskKind, NOT_SPECIFIED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoaApplication {
    pub label: String,
    pub heuristic_text: String,
    pub application: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoaReevaluation {
    pub candidate: String,
    pub verdict: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoaRoleDemo {
    pub role: String,
    pub gloss: String,
    /// Heuristic labels chosen in the retrieve step.
    pub selected: Vec<String>,
    pub applications: Vec<LoaApplication>,
    pub reevaluations: Vec<LoaReevaluation>,
    /// Final answer spans; empty means the sentinel line.
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoaExemplar {
    pub event_type: String,
    pub event_gloss: String,
    pub roles: Vec<LoaRoleDemo>,
}

/// Step phrasing differs between the two document-level tasks: one selects
/// "one or two heuristics" with numbered sub-steps, the other selects a
/// single heuristic per role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoaDialect {
    Rams,
    Docee,
}

impl LoaDialect {
    pub fn for_task(task: TaskKind) -> Option<Self> {
        match task {
            TaskKind::EaeRams => Some(LoaDialect::Rams),
            TaskKind::EaeDocee => Some(LoaDialect::Docee),
            _ => None,
        }
    }
}

/// Whether the prompt still carries an explicit heuristic list for the
/// exemplar's step wording to point at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListReference {
    HeuristicList,
    NoList,
}

fn quoted(span: &str) -> String {
    format!("\"{span}\"")
}

pub(crate) fn answer_line(role: &str, answers: &[String]) -> String {
    if answers.is_empty() {
        format!("[{role}]: {}", quoted(NOT_SPECIFIED))
    } else {
        format!(
            "[{role}]: {}",
            answers
                .iter()
                .map(|a| quoted(a))
                .collect::<Vec<_>>()
                .join(", ")
        )
    }
}

impl LoaExemplar {
    fn validate(&self, mapping: &AnalogyMapping) -> Result<(), PromptError> {
        mapping.validate()?;
        if !self.roles.iter().any(|r| r.role == mapping.target_role) {
            return Err(PromptError::InvalidMapping(format!(
                "mapping target role {:?} is not demonstrated by the exemplar",
                mapping.target_role
            )));
        }
        for demo in &self.roles {
            if demo.selected.is_empty() {
                return Err(PromptError::MissingStep {
                    role: demo.role.clone(),
                    step: 1,
                });
            }
            if demo.applications.is_empty()
                || demo
                    .applications
                    .iter()
                    .any(|a| a.application.trim().is_empty() || a.heuristic_text.trim().is_empty())
            {
                return Err(PromptError::MissingStep {
                    role: demo.role.clone(),
                    step: 2,
                });
            }
            if demo.reevaluations.is_empty()
                || demo
                    .reevaluations
                    .iter()
                    .any(|r| r.rationale.trim().is_empty())
            {
                return Err(PromptError::MissingStep {
                    role: demo.role.clone(),
                    step: 3,
                });
            }
        }
        Ok(())
    }

    /// The direct-answer block: one canonical answer line per role, used by
    /// the ablation that strips the step structure.
    pub fn direct_answer_block(&self) -> String {
        self.roles
            .iter()
            .map(|d| answer_line(&d.role, &d.answers))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn demonstrated_roles(&self) -> BTreeSet<String> {
        self.roles.iter().map(|d| d.role.clone()).collect()
    }
}

fn selection_phrase(labels: &[String]) -> String {
    labels
        .iter()
        .map(|l| format!("{l} Heuristic"))
        .collect::<Vec<_>>()
        .join(" and ")
}

/// Render the full retrieve/map/evaluate text of one exemplar.
pub fn render_loa_exemplar(
    exemplar: &LoaExemplar,
    mapping: &AnalogyMapping,
    dialect: LoaDialect,
    list_ref: ListReference,
) -> Result<String, PromptError> {
    exemplar.validate(mapping)?;

    let mut out = String::new();
    out.push_str("Elaborate the meaning of event type and its argument roles:\n");
    match dialect {
        LoaDialect::Rams => out.push_str(&format!(
            "\"{}\": {}\n",
            exemplar.event_type, exemplar.event_gloss
        )),
        LoaDialect::Docee => out.push_str(&format!(
            "'{}': {}\n",
            exemplar.event_type, exemplar.event_gloss
        )),
    }
    for demo in &exemplar.roles {
        out.push_str(&format!("[{}]: {}\n", demo.role, demo.gloss));
    }

    for demo in &exemplar.roles {
        out.push('\n');
        out.push_str(&format!(
            "Recognizing [{}] in the given document:\n",
            demo.role
        ));
        let role = &demo.role;
        match dialect {
            LoaDialect::Rams => {
                let step1 = match list_ref {
                    ListReference::HeuristicList => format!(
                        "Step 1: Select one or two heuristics in the heuristic list that are most suitable to identify the [{role}] in the given document: {}.",
                        selection_phrase(&demo.selected)
                    ),
                    ListReference::NoList => format!(
                        "Step 1: Determine one or two heuristics that are most suitable to identify the [{role}] in the given document: {}.",
                        selection_phrase(&demo.selected)
                    ),
                };
                out.push_str(&step1);
                out.push('\n');
                out.push_str(&format!(
                    "Step 2: Apply selected heuristics to identify [{role}] independently.\n"
                ));
                for (i, app) in demo.applications.iter().enumerate() {
                    out.push_str(&format!(
                        "Step 2.{}: Identify the [{role}] based on {} Heuristic: \"{}\". {}\n",
                        i + 1,
                        app.label,
                        app.heuristic_text,
                        app.application
                    ));
                }
                let candidates = demo
                    .reevaluations
                    .iter()
                    .map(|r| quoted(&r.candidate))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push_str(&format!(
                    "Step 3: Reevaluate argument candidates: [{candidates}]\n"
                ));
            }
            LoaDialect::Docee => {
                let step1 = match list_ref {
                    ListReference::HeuristicList => format!(
                        "Step 1: Select a heuristic in the heuristic list that is most suitable to identify the [{role}] in the given document: {}.",
                        selection_phrase(&demo.selected[..1])
                    ),
                    ListReference::NoList => format!(
                        "Step 1: Determine a heuristic that is most suitable to identify the [{role}] in the given document: {}.",
                        selection_phrase(&demo.selected[..1])
                    ),
                };
                out.push_str(&step1);
                out.push('\n');
                for app in &demo.applications {
                    out.push_str(&format!(
                        "Step 2: Identify the argument based on {} Heuristic: {}. {}\n",
                        app.label, app.heuristic_text, app.application
                    ));
                }
                out.push_str("Step 3: Reevaluate argument candidates:\n");
            }
        }
        for reeval in &demo.reevaluations {
            let verdict = if reeval.verdict { "Yes" } else { "No" };
            out.push_str(&format!(
                "Is argument {} alignment with the argument role [{role}]? {verdict}, because {}.\n",
                quoted(&reeval.candidate),
                reeval.rationale
            ));
        }
        out.push_str(&answer_line(role, &demo.answers));
        out.push('\n');
    }

    // Trailing newline is an artifact of the line-oriented assembly above.
    out.truncate(out.trim_end_matches('\n').len());
    Ok(out)
}

/// The shipped demonstration content for one task: the exemplar question
/// texts plus, per entry, either structured LoA content (document-level
/// tasks) or pre-written step text (classification tasks), a free-form
/// rationale for chain-of-thought baselines, and the bare answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemplarSource {
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<AnalogyMapping>,
    pub entries: Vec<ExemplarEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemplarEntry {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loa: Option<LoaExemplar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loa_reasoning: Option<String>,
    pub cot_rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default)]
    pub label_coverage: BTreeSet<String>,
}

impl ExemplarSource {
    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        serde_json::from_str(text).map_err(|e| PromptError::Asset {
            name: "exemplar source".to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Asset {
            name: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Roles demonstrated across all entries; the seen/unseen breakdown
    /// partitions test roles against this set.
    pub fn demonstrated_roles(&self) -> BTreeSet<String> {
        let mut roles = BTreeSet::new();
        for entry in &self.entries {
            if let Some(loa) = &entry.loa {
                roles.extend(loa.demonstrated_roles());
            }
        }
        roles
    }

    /// Instantiate the entries as prompt-ready exemplars for a style and
    /// ablation.
    pub fn exemplars_for(
        &self,
        style: PromptStyle,
        ablation: Option<Ablation>,
    ) -> Result<Vec<Exemplar>, PromptError> {
        let dialect = LoaDialect::for_task(self.task);
        let mut out = Vec::new();
        for (index, entry) in self.entries.iter().enumerate() {
            let answer = match (&entry.loa, &entry.answer) {
                (Some(loa), _) => loa.direct_answer_block(),
                (None, Some(answer)) => answer.clone(),
                (None, None) => {
                    return Err(PromptError::Asset {
                        name: format!("exemplar {index}"),
                        message: "entry has neither structured content nor an answer".into(),
                    })
                }
            };
            let reasoning = match (style, ablation) {
                (PromptStyle::Hdloa, Some(Ablation::NoLoa)) => String::new(),
                (PromptStyle::Hdloa, ablation) => {
                    let list_ref = if ablation == Some(Ablation::NoHeuristics) {
                        ListReference::NoList
                    } else {
                        ListReference::HeuristicList
                    };
                    match (&entry.loa, &entry.loa_reasoning) {
                        (Some(loa), _) => {
                            let dialect = dialect.ok_or_else(|| PromptError::Asset {
                                name: format!("exemplar {index}"),
                                message: format!(
                                    "structured content is only valid for document-level tasks, not {}",
                                    self.task
                                ),
                            })?;
                            let mapping = self.mapping.as_ref().ok_or_else(|| {
                                PromptError::InvalidMapping(
                                    "document-level exemplar needs an analogy mapping".into(),
                                )
                            })?;
                            render_loa_exemplar(loa, mapping, dialect, list_ref)?
                        }
                        (None, Some(text)) => text.clone(),
                        (None, None) => {
                            return Err(PromptError::MissingLoaReasoning { index });
                        }
                    }
                }
                (PromptStyle::Cot, _) => entry.cot_rationale.clone(),
                (PromptStyle::Standard, _) => String::new(),
            };
            out.push(Exemplar {
                question: entry.question.clone(),
                reasoning,
                answer,
                label_coverage: entry.label_coverage.clone(),
            });
        }
        Ok(out)
    }
}

/// The demonstration content shipped with the crate.
pub fn builtin_exemplar_source(task: TaskKind) -> Result<ExemplarSource, PromptError> {
    let text = match task {
        TaskKind::EaeRams => include_str!("../../templates/exemplars/rams.json"),
        TaskKind::EaeDocee => include_str!("../../templates/exemplars/docee.json"),
        TaskKind::Sentiment => include_str!("../../templates/exemplars/sst2.json"),
        TaskKind::Nli => include_str!("../../templates/exemplars/snli.json"),
    };
    ExemplarSource::from_json(text)
}

/// The heuristic (or pattern) lists shipped with the crate, one record per
/// line.
pub fn builtin_heuristics(task: TaskKind) -> Result<crate::core::HeuristicSet, PromptError> {
    let text = match task {
        TaskKind::EaeRams => include_str!("../../templates/heuristics/rams.jsonl"),
        TaskKind::EaeDocee => include_str!("../../templates/heuristics/docee.jsonl"),
        TaskKind::Sentiment => include_str!("../../templates/heuristics/sst2.jsonl"),
        TaskKind::Nli => include_str!("../../templates/heuristics/snli.jsonl"),
    };
    let base_role = if task.is_eae() { "giver" } else { "" };
    let mut items = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let h: crate::core::Heuristic =
            serde_json::from_str(line).map_err(|e| PromptError::Asset {
                name: format!("heuristics/{}.jsonl", task.slug()),
                message: e.to_string(),
            })?;
        items.push(h);
    }
    crate::core::HeuristicSet::new(items, base_role).map_err(|e| PromptError::Asset {
        name: format!("heuristics/{}.jsonl", task.slug()),
        message: e.to_string(),
    })
}
