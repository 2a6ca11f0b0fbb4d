//! Byte-exact prompt assembly.
//!
//! A prompt is a task template with three slots: the heuristic block (the
//! instruction sentence that points at the list, plus the list itself), the
//! exemplar section, and the target question. Assembly is a pure function
//! of the structured fields, so re-rendering a persisted bundle reproduces
//! its bytes exactly — golden tests pin that.

mod loa;
mod templates;

pub use loa::{
    builtin_exemplar_source, builtin_heuristics, render_loa_exemplar, ExemplarEntry,
    ExemplarSource, ListReference, LoaApplication, LoaDialect, LoaExemplar, LoaReevaluation,
    LoaRoleDemo,
};
pub use templates::{Template, TemplateSet};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{ClassificationInstance, ClassificationText, EAEInstance, Heuristic, TaskKind};
use crate::heuristics::RankedHeuristics;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("a heuristic-driven prompt needs at least one heuristic")]
    ZeroHeuristics,
    #[error("task wants {expected} exemplar(s), got {got}")]
    ExemplarCount { expected: usize, got: usize },
    #[error("target instance {id:?} has no roles")]
    EmptyRoles { id: String },
    #[error("target instance {id:?} has no trigger span, which this task's template requires")]
    MissingTrigger { id: String },
    #[error("trigger offsets of instance {id:?} do not fit the document")]
    BadTriggerOffsets { id: String },
    #[error("use the baseline constructor only for baseline styles")]
    WrongConstructor,
    #[error("target kind does not fit task {task}")]
    TargetMismatch { task: TaskKind },
    #[error("template {template}: slot {slot:?} left unfilled")]
    UnfilledSlot { template: String, slot: String },
    #[error("no template for {name}")]
    TemplateNotFound { name: String },
    #[error("asset {name}: {message}")]
    Asset { name: String, message: String },
    #[error("exemplar role {role:?} is missing step {step} content")]
    MissingStep { role: String, step: u8 },
    #[error("exemplar {index} has no link-of-analogy content")]
    MissingLoaReasoning { index: usize },
    #[error("exemplar {index} reasoning lacks the {marker:?} marker in order")]
    LoaMarkers { index: usize, marker: String },
    #[error("analogy mapping: {0}")]
    InvalidMapping(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    Hdloa,
    Cot,
    Standard,
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptStyle::Hdloa => "hdloa",
            PromptStyle::Cot => "cot",
            PromptStyle::Standard => "standard",
        })
    }
}

impl FromStr for PromptStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hdloa" => Ok(PromptStyle::Hdloa),
            "cot" => Ok(PromptStyle::Cot),
            "standard" => Ok(PromptStyle::Standard),
            other => Err(format!("unknown style {other:?}")),
        }
    }
}

/// Component ablations for heuristic-driven prompts: drop the explicit
/// heuristic list, or keep it but strip the step structure from the
/// exemplar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    NoHeuristics,
    NoLoa,
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no_heuristics" => Ok(Ablation::NoHeuristics),
            "no_loa" => Ok(Ablation::NoLoa),
            other => Err(format!("unknown ablation {other:?}")),
        }
    }
}

/// One in-context example: the question as it appears in the prompt, the
/// reasoning text between question and answer (empty for direct-answer
/// styles), and the answer itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question: String,
    pub reasoning: String,
    pub answer: String,
    #[serde(default)]
    pub label_coverage: BTreeSet<String>,
}

/// The analogy record `base_role : base_heuristic :: target_role :
/// target_heuristic`: which base-role heuristic the exemplar extends, to
/// which new role, producing which mapped heuristic statement and
/// (optionally) which argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyMapping {
    pub base_role: String,
    pub base_heuristic: Heuristic,
    pub target_role: String,
    pub target_heuristic_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_argument: Option<String>,
}

impl AnalogyMapping {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.base_role == self.target_role {
            return Err(PromptError::InvalidMapping(format!(
                "base role and target role are both {:?}",
                self.base_role
            )));
        }
        Ok(())
    }
}

/// What the prompt asks about.
#[derive(Debug, Clone, Copy)]
pub enum PromptTarget<'a> {
    Eae(&'a EAEInstance),
    Classification(&'a ClassificationInstance),
}

/// An assembled prompt plus the structure it was assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub style: PromptStyle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Ablation>,
    #[serde(default)]
    pub base_role: String,
    pub template: String,
    pub template_digest: String,
    pub instruction: String,
    pub heuristic_block: Vec<Heuristic>,
    pub exemplars: Vec<Exemplar>,
    pub target: String,
    pub rendered: String,
}

impl PromptBundle {
    /// Recompute `rendered` from the structured fields. Byte-equality with
    /// the stored text is the golden-stability invariant.
    pub fn re_render(&self) -> Result<String, PromptError> {
        match self.task {
            Some(task) => {
                let template = Template::new("re-render", self.template.clone());
                let sections = assemble(
                    &template,
                    task,
                    self.style,
                    self.ablation,
                    &self.base_role,
                    &self.heuristic_block,
                    &self.exemplars,
                    &self.target,
                )?;
                Ok(sections.rendered)
            }
            None => Ok(render_exemplar_section(None, self.style, &self.exemplars)),
        }
    }
}

fn heuristic_line(task: TaskKind, h: &Heuristic) -> String {
    match task {
        TaskKind::EaeRams | TaskKind::EaeDocee => format!("{} Heuristic: {}", h.label, h.body),
        TaskKind::Sentiment | TaskKind::Nli => format!("{} Pattern: {}", h.label, h.body),
    }
}

/// The instruction sentence that points at the list, plus the list itself.
/// With the list ablated, a neutral instruction sentence replaces the whole
/// block so nothing in the prompt mentions a heuristic list.
fn heuristic_block_text(
    task: TaskKind,
    base_role: &str,
    heuristics: &[Heuristic],
    ablated: bool,
) -> String {
    if ablated {
        return match task {
            TaskKind::EaeRams => "\nSpecifically, you will identify the event arguments for each argument role, and re-evaluate the identified argument candidates to get the final answer.".to_string(),
            TaskKind::EaeDocee => "\nSpecifically, you will identify the event arguments for each target argument role, and re-evaluate the identified argument candidates to confirm if they are correct event arguments or not.".to_string(),
            TaskKind::Sentiment => "Specifically, you will determine the sentiment of the target sentence and re-evaluate the identified sentiment to get the final answer.".to_string(),
            TaskKind::Nli => "You will determine the relationship between the premise and the hypothesis.".to_string(),
        };
    }

    let lines = heuristics
        .iter()
        .map(|h| heuristic_line(task, h))
        .collect::<Vec<_>>()
        .join("\n");
    match task {
        TaskKind::EaeRams => format!(
            "Heuristics: serving as guiding rules for extracting event arguments.\n\nSpecifically, you will use the heuristic provided in the heuristic list to guide identify event arguments, and re-evaluate the identified argument candidates to get the final answer.\nheuristic list:\n[\n{lines}\n]"
        ),
        TaskKind::EaeDocee => format!(
            "Heuristics: serving as guiding principles or strategies to aid the extraction of event arguments, tailored to specific argument roles.\n\nSpecifically, you will adapt a set of given heuristics for identifying the argument role of '{base_role}' to other target argument roles, and then use these adapted heuristics to guide the extraction of target event arguments. Finally, re-evaluate the identified argument candidates to confirm if they are correct event arguments or not.\nHeuristic list:\n[\n{lines}\n]"
        ),
        TaskKind::Sentiment => format!(
            "Specifically, you will leverage the pattern in the pattern list below to recognize the sentiment of the target sentence. For each sentence, you will select the most appropriate one or two patterns to identify its sentiment. The identification of a sentence based on different patterns should not be interconnected. Finally, re-evaluate the identified sentiment to get the final answer.\n\nPattern list:\n[\n{lines}\n]"
        ),
        TaskKind::Nli => format!(
            "You will select the most appropriate pattern in the pattern list below to classify the natural language inference task. For each sentence, you will use the selected patterns to identify the relationship between the premise and the hypothesis.\n\nPattern list:\n[\n{lines}\n]"
        ),
    }
}

fn answer_separator(task: Option<TaskKind>) -> &'static str {
    match task {
        Some(t) if t.is_eae() => "\n\nAnswer:\n",
        _ => "\nAnswer:\n",
    }
}

fn render_exemplar_text(task: Option<TaskKind>, style: PromptStyle, ex: &Exemplar) -> String {
    let sep = answer_separator(task);
    match style {
        // Link-of-analogy reasoning embeds the per-role answer lines; when
        // the reasoning was stripped (ablation) fall back to the answer.
        PromptStyle::Hdloa => {
            if ex.reasoning.is_empty() {
                format!("{}{}{}", ex.question, sep, ex.answer)
            } else {
                format!("{}{}{}", ex.question, sep, ex.reasoning)
            }
        }
        PromptStyle::Cot => {
            if ex.reasoning.is_empty() {
                format!("{}{}{}", ex.question, sep, ex.answer)
            } else {
                format!("{}{}{}\n{}", ex.question, sep, ex.reasoning, ex.answer)
            }
        }
        PromptStyle::Standard => format!("{}{}{}", ex.question, sep, ex.answer),
    }
}

fn render_exemplar_section(
    task: Option<TaskKind>,
    style: PromptStyle,
    exemplars: &[Exemplar],
) -> String {
    exemplars
        .iter()
        .map(|ex| render_exemplar_text(task, style, ex))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn enumerate_roles_rams(roles: &[String]) -> String {
    match roles {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        many => {
            let (last, front) = many.split_last().unwrap();
            format!("{}, and {last}", front.join(", "))
        }
    }
}

fn enumerate_roles_docee(roles: &[String]) -> String {
    roles
        .iter()
        .map(|r| format!("'{r}'"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn delimit_trigger(inst: &EAEInstance) -> Result<String, PromptError> {
    let trigger = inst
        .trigger
        .as_ref()
        .ok_or_else(|| PromptError::MissingTrigger {
            id: inst.id.clone(),
        })?;
    let chars: Vec<char> = inst.document.chars().collect();
    if trigger.char_start > trigger.char_end || trigger.char_end > chars.len() {
        return Err(PromptError::BadTriggerOffsets {
            id: inst.id.clone(),
        });
    }
    let before: String = chars[..trigger.char_start].iter().collect();
    let span: String = chars[trigger.char_start..trigger.char_end].iter().collect();
    let after: String = chars[trigger.char_end..].iter().collect();
    Ok(format!("{before}<t>{span}</t>{after}"))
}

/// The target question, ending with the answer cue the model completes.
pub fn render_target(task: TaskKind, target: &PromptTarget<'_>) -> Result<String, PromptError> {
    match (task, target) {
        (TaskKind::EaeRams, PromptTarget::Eae(inst)) => {
            if inst.roles.is_empty() {
                return Err(PromptError::EmptyRoles { id: inst.id.clone() });
            }
            let trigger_text = inst
                .trigger
                .as_ref()
                .ok_or_else(|| PromptError::MissingTrigger { id: inst.id.clone() })?
                .text
                .clone();
            Ok(format!(
                "Question: Extract the event arguments of {} in the \"{}\" event in the provided document, with the trigger word being \"{}\", highlighted between \"<t>\" and \"</t>\". When pinpointing each event argument, it's crucial to quote the entity exactly as it appears in the text. If an event argument is not explicitly mentioned or cannot be directly associated with the event indicated by the trigger word, please respond with \"not specified\".\nDocument: {}\n\nAnswer:",
                enumerate_roles_rams(&inst.roles),
                inst.event_type,
                trigger_text,
                delimit_trigger(inst)?
            ))
        }
        (TaskKind::EaeDocee, PromptTarget::Eae(inst)) => {
            if inst.roles.is_empty() {
                return Err(PromptError::EmptyRoles { id: inst.id.clone() });
            }
            Ok(format!(
                "Question: Extract the event arguments of {} in the '{}' event in the provided news document. When pinpointing each event argument, it's crucial to quote the entity exactly as it appears in the text. Note that if an event argument is not explicitly mentioned or cannot be directly associated with its argument role in question, please respond with \"not specified\".\nDocument: {}\n\nAnswer:",
                enumerate_roles_docee(&inst.roles),
                inst.event_type,
                inst.document
            ))
        }
        (TaskKind::Sentiment, PromptTarget::Classification(inst)) => match &inst.text {
            ClassificationText::Sentence(text) => Ok(format!(
                "Question: What is the sentiment of the following sentence?\nSentence: \"{text}\"\nAnswer:"
            )),
            ClassificationText::Pair { .. } => Err(PromptError::TargetMismatch { task }),
        },
        (TaskKind::Nli, PromptTarget::Classification(inst)) => match &inst.text {
            ClassificationText::Pair { premise, hypothesis } => Ok(format!(
                "Premise: \"{premise}\"\nBased on this premise, can we conclude the hypothesis \"{hypothesis}\" is true?\nOPTIONS:\n- yes\n- no\n- it is not possible to tell\nAnswer:"
            )),
            ClassificationText::Sentence(_) => Err(PromptError::TargetMismatch { task }),
        },
        _ => Err(PromptError::TargetMismatch { task }),
    }
}

struct Sections {
    instruction: String,
    rendered: String,
}

/// Assemble the template with the three slot values. Shared by the builders
/// and by `PromptBundle::re_render` so both produce identical bytes.
#[allow(clippy::too_many_arguments)]
fn assemble(
    template: &Template,
    task: TaskKind,
    style: PromptStyle,
    ablation: Option<Ablation>,
    base_role: &str,
    heuristics: &[Heuristic],
    exemplars: &[Exemplar],
    target_text: &str,
) -> Result<Sections, PromptError> {
    let parts: Vec<&str> = template.text.splitn(2, "{{exemplars}}").collect();
    if parts.len() != 2 {
        return Err(PromptError::UnfilledSlot {
            template: template.name.clone(),
            slot: "exemplars".to_string(),
        });
    }
    let block = if style == PromptStyle::Hdloa {
        heuristic_block_text(
            task,
            base_role,
            heuristics,
            ablation == Some(Ablation::NoHeuristics),
        )
    } else {
        String::new()
    };
    let instruction = parts[0].replace("{{heuristic_block}}", &block);
    templates::check_filled(&template.name, &instruction)?;
    let tail = parts[1].replace("{{target}}", target_text);
    templates::check_filled(&template.name, &tail)?;
    let exemplar_section = render_exemplar_section(Some(task), style, exemplars);
    Ok(Sections {
        rendered: format!("{instruction}{exemplar_section}{tail}"),
        instruction,
    })
}

fn check_loa_markers(task: TaskKind, exemplars: &[Exemplar]) -> Result<(), PromptError> {
    // The evaluate step is folded into the final answer sentence in the
    // three-exemplar inference demonstrations, so only the first two
    // markers are universal.
    let markers: &[&str] = if task == TaskKind::Nli {
        &["Step 1", "Step 2"]
    } else {
        &["Step 1", "Step 2", "Step 3"]
    };
    for (index, ex) in exemplars.iter().enumerate() {
        let mut from = 0usize;
        for marker in markers {
            match ex.reasoning[from..].find(marker) {
                Some(pos) => from += pos + marker.len(),
                None => {
                    return Err(PromptError::LoaMarkers {
                        index,
                        marker: marker.to_string(),
                    })
                }
            }
        }
    }
    Ok(())
}

/// Build a heuristic-driven demonstration prompt: instruction, heuristic
/// list, link-of-analogy exemplar(s), and the target question.
pub fn build_hdloa_prompt(
    task: TaskKind,
    heuristics: &RankedHeuristics,
    exemplars: &[Exemplar],
    target: &PromptTarget<'_>,
    templates: &TemplateSet,
    ablation: Option<Ablation>,
) -> Result<PromptBundle, PromptError> {
    let list: &[Heuristic] = if ablation == Some(Ablation::NoHeuristics) {
        &[]
    } else {
        heuristics.heuristics()
    };
    if list.is_empty() && ablation != Some(Ablation::NoHeuristics) {
        return Err(PromptError::ZeroHeuristics);
    }
    if exemplars.len() != task.exemplar_count() {
        return Err(PromptError::ExemplarCount {
            expected: task.exemplar_count(),
            got: exemplars.len(),
        });
    }
    if ablation != Some(Ablation::NoLoa) {
        check_loa_markers(task, exemplars)?;
    }

    let target_text = render_target(task, target)?;
    let template = templates.get(task, PromptStyle::Hdloa)?;
    let sections = assemble(
        template,
        task,
        PromptStyle::Hdloa,
        ablation,
        &heuristics.base_role,
        list,
        exemplars,
        &target_text,
    )?;
    Ok(PromptBundle {
        style: PromptStyle::Hdloa,
        task: Some(task),
        ablation,
        base_role: heuristics.base_role.clone(),
        template: template.text.clone(),
        template_digest: template.digest(),
        instruction: sections.instruction,
        heuristic_block: list.to_vec(),
        exemplars: exemplars.to_vec(),
        target: target_text,
        rendered: sections.rendered,
    })
}

/// Build a baseline prompt: direct question/answer exemplars (standard) or
/// question/rationale/answer exemplars (chain of thought), with no
/// heuristic block in either.
pub fn build_baseline_prompt(
    style: PromptStyle,
    task: TaskKind,
    exemplars: &[Exemplar],
    target: &PromptTarget<'_>,
    templates: &TemplateSet,
) -> Result<PromptBundle, PromptError> {
    if style == PromptStyle::Hdloa {
        return Err(PromptError::WrongConstructor);
    }
    let target_text = render_target(task, target)?;
    let template = templates.get(task, style)?;
    let sections = assemble(
        template,
        task,
        style,
        None,
        "",
        &[],
        exemplars,
        &target_text,
    )?;
    Ok(PromptBundle {
        style,
        task: Some(task),
        ablation: None,
        base_role: String::new(),
        template: template.text.clone(),
        template_digest: template.digest(),
        instruction: sections.instruction,
        heuristic_block: Vec::new(),
        exemplars: exemplars.to_vec(),
        target: target_text,
        rendered: sections.rendered,
    })
}

/// Assemble a bare demonstration from exemplars only (no task template, no
/// target); the probe experiments prepend this to raw test questions.
pub fn build_demo_bundle(style: PromptStyle, exemplars: &[Exemplar]) -> PromptBundle {
    let rendered = render_exemplar_section(None, style, exemplars);
    PromptBundle {
        style,
        task: None,
        ablation: None,
        base_role: String::new(),
        template: String::new(),
        template_digest: String::new(),
        instruction: String::new(),
        heuristic_block: Vec::new(),
        exemplars: exemplars.to_vec(),
        target: String::new(),
        rendered,
    }
}

/// Re-export: canonical answer block rendering lives with the parser so the
/// two sides of the round-trip stay in one place.
pub use crate::parse::render_answer_block;
