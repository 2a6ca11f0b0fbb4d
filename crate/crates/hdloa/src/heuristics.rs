//! Heuristic generation and accuracy-based selection.
//!
//! Candidates are generated in one completion call and parsed out of the
//! `<Label> heuristic: <body>` line format. Selection puts each candidate
//! alone into a prompt, runs it over a small labeled subset, and keeps the
//! top performers by measured span-classification F1 — the selection prompt
//! mirrors the final prompt's structure minus the rest of the list, so the
//! measurement isolates the heuristic itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{EAEInstance, Heuristic, HeuristicSet, Provenance, TaskKind};
use crate::llm::{Client, LlmError, RequestDefaults};
use crate::parse::parse_eae_output;
use crate::promptkit::{build_hdloa_prompt, Exemplar, PromptError, PromptTarget, TemplateSet};
use crate::score::{score_eae, MatchPolicy, ScoreError};

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("n must be at least 1")]
    ZeroRequested,
    #[error("parsed {parsed} of {requested} heuristics from the generation output")]
    NotEnoughParsed { parsed: usize, requested: usize },
    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("candidate set is empty")]
    EmptySet,
    #[error("evaluation subset is empty")]
    EmptySubset,
    #[error("candidate {label:?} has no measured accuracy")]
    MissingAccuracy { label: String },
}

/// A line the parser could not interpret, reported alongside the parsed
/// heuristics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLine {
    pub line: usize,
    pub content: String,
}

/// Parse `<Label> heuristic: <body>` lines ("heuristic" matched
/// case-insensitively). Non-matching, non-empty lines are skipped and
/// reported, not fatal.
pub fn parse_heuristic_lines(text: &str) -> (Vec<Heuristic>, Vec<SkippedLine>) {
    let mut parsed = Vec::new();
    let mut skipped = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match split_heuristic_line(trimmed) {
            Some((label, body)) => {
                match Heuristic::new(label, body, Provenance::Generated, parsed.len()) {
                    Ok(h) => parsed.push(h),
                    Err(_) => skipped.push(SkippedLine {
                        line: line_no + 1,
                        content: trimmed.to_string(),
                    }),
                }
            }
            None => skipped.push(SkippedLine {
                line: line_no + 1,
                content: trimmed.to_string(),
            }),
        }
    }
    (parsed, skipped)
}

/// Label is everything before the literal token "heuristic:"; the token may
/// be capitalized and may be separated from the colon by whitespace.
fn split_heuristic_line(line: &str) -> Option<(String, String)> {
    let lowered = line.to_lowercase();
    let mut search_from = 0;
    while let Some(pos) = lowered[search_from..].find("heuristic") {
        let at = search_from + pos;
        let after = &line[at + "heuristic".len()..];
        let after_trimmed = after.trim_start();
        if let Some(body) = after_trimmed.strip_prefix(':') {
            let label = line[..at].trim();
            let body = body.trim();
            if !label.is_empty() && !body.is_empty() {
                return Some((label.to_string(), body.to_string()));
            }
            return None;
        }
        search_from = at + "heuristic".len();
    }
    None
}

/// Generate `n` candidate heuristics for a role with one completion call.
pub fn generate_heuristics(
    task_description: &str,
    base_role: &str,
    n: usize,
    client: &Client,
    templates: &TemplateSet,
    defaults: &RequestDefaults,
) -> Result<HeuristicSet, HeuristicError> {
    if n == 0 {
        return Err(HeuristicError::ZeroRequested);
    }
    let prompt = templates.heuristic_generation.render(&[
        ("n", n.to_string().as_str()),
        ("role", base_role),
        ("task_description", task_description),
    ])?;
    let result = client.complete(&defaults.request(prompt))?;
    let (mut parsed, _skipped) = parse_heuristic_lines(&result.text);
    if parsed.len() < n {
        return Err(HeuristicError::NotEnoughParsed {
            parsed: parsed.len(),
            requested: n,
        });
    }
    parsed.truncate(n);
    Ok(HeuristicSet::new(parsed, base_role)?)
}

/// Candidates ranked by measured accuracy, best first; ties broken by
/// ascending generation index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHeuristics {
    pub ranked: Vec<Heuristic>,
    pub base_role: String,
    pub k: usize,
    pub subset_size: usize,
    pub seed: u64,
}

impl RankedHeuristics {
    /// Treat an already-ordered list as ranked, for loading persisted lists
    /// or pinning a manual one.
    pub fn from_list(list: Vec<Heuristic>, base_role: impl Into<String>) -> Self {
        let k = list.len();
        RankedHeuristics {
            ranked: list,
            base_role: base_role.into(),
            k,
            subset_size: 0,
            seed: 0,
        }
    }

    pub fn single(h: Heuristic, base_role: impl Into<String>) -> Self {
        Self::from_list(vec![h], base_role)
    }

    pub fn heuristics(&self) -> &[Heuristic] {
        &self.ranked
    }

    pub fn save_jsonl(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut out = String::new();
        for h in &self.ranked {
            out.push_str(&serde_json::to_string(h).expect("heuristics serialize"));
            out.push('\n');
        }
        std::fs::write(path, out)
    }

    pub fn load_jsonl(
        path: &std::path::Path,
        base_role: impl Into<String>,
    ) -> Result<Self, HeuristicError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HeuristicError::Backend(LlmError::Config(format!("{}: {e}", path.display())))
        })?;
        let mut list = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let h: Heuristic = serde_json::from_str(line).map_err(|e| {
                HeuristicError::Backend(LlmError::Config(format!("{}: {e}", path.display())))
            })?;
            list.push(h);
        }
        Ok(Self::from_list(list, base_role))
    }
}

/// One candidate's measured outcome: its accuracy on the subset plus any
/// per-instance failures (each failure gave the instance zero credit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicEvalOutcome {
    pub accuracy: f64,
    pub failures: Vec<InstanceFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub instance_id: String,
    pub message: String,
}

/// The single-heuristic evaluation procedure selection runs per candidate.
pub trait HeuristicEvaluator {
    fn evaluate(
        &self,
        heuristic: &Heuristic,
        subset: &[EAEInstance],
    ) -> Result<HeuristicEvalOutcome, HeuristicError>;
}

/// Everything selection measured, kept for the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub per_heuristic: Vec<HeuristicScore>,
    pub subset_size: usize,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeuristicScore {
    pub label: String,
    pub generation_index: usize,
    pub accuracy: f64,
    pub failures: Vec<InstanceFailure>,
}

/// Measure every candidate on the subset and keep the top `k`.
pub fn select_heuristics(
    set: &HeuristicSet,
    eval_subset: &[EAEInstance],
    k: usize,
    evaluator: &dyn HeuristicEvaluator,
    seed: u64,
) -> Result<(RankedHeuristics, SelectionReport), HeuristicError> {
    if set.is_empty() {
        return Err(HeuristicError::EmptySet);
    }
    if eval_subset.is_empty() {
        return Err(HeuristicError::EmptySubset);
    }

    let mut scored: Vec<(Heuristic, Vec<InstanceFailure>)> = Vec::new();
    for h in &set.items {
        let outcome = evaluator.evaluate(h, eval_subset)?;
        let mut with_score = h.clone();
        with_score.eval_accuracy = Some(outcome.accuracy);
        scored.push((with_score, outcome.failures));
    }

    scored.sort_by(|(a, _), (b, _)| {
        let acc_a = a.eval_accuracy.unwrap_or(0.0);
        let acc_b = b.eval_accuracy.unwrap_or(0.0);
        acc_b
            .partial_cmp(&acc_a)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.generation_index.cmp(&b.generation_index))
    });

    let report = SelectionReport {
        per_heuristic: scored
            .iter()
            .map(|(h, failures)| HeuristicScore {
                label: h.label.clone(),
                generation_index: h.generation_index,
                accuracy: h.eval_accuracy.unwrap_or(0.0),
                failures: failures.clone(),
            })
            .collect(),
        subset_size: eval_subset.len(),
        k,
        seed,
    };

    let take = k.min(scored.len());
    let ranked = RankedHeuristics {
        ranked: scored.into_iter().take(take).map(|(h, _)| h).collect(),
        base_role: set.base_role.clone(),
        k,
        subset_size: eval_subset.len(),
        seed,
    };
    Ok((ranked, report))
}

/// The default evaluation procedure: build a prompt containing exactly one
/// heuristic and one exemplar, complete, parse, and score span
/// classification micro-F1 over the subset. Instance failures count as
/// zero credit, never abort the candidate.
pub struct SingleHeuristicPipeline<'a> {
    pub client: &'a Client,
    pub templates: &'a TemplateSet,
    pub task: TaskKind,
    pub exemplars: Vec<Exemplar>,
    pub defaults: RequestDefaults,
    pub policy: MatchPolicy,
    pub max_answers: usize,
    pub base_role: String,
}

impl HeuristicEvaluator for SingleHeuristicPipeline<'_> {
    fn evaluate(
        &self,
        heuristic: &Heuristic,
        subset: &[EAEInstance],
    ) -> Result<HeuristicEvalOutcome, HeuristicError> {
        let single = RankedHeuristics::single(heuristic.clone(), self.base_role.clone());
        let mut pairs = Vec::new();
        let mut failures = Vec::new();
        for inst in subset {
            let attempt = build_hdloa_prompt(
                self.task,
                &single,
                &self.exemplars,
                &PromptTarget::Eae(inst),
                self.templates,
                None,
            )
            .map_err(HeuristicError::from)
            .and_then(|bundle| {
                self.client
                    .complete(&self.defaults.request(bundle.rendered))
                    .map_err(HeuristicError::from)
            });
            match attempt {
                Ok(result) => {
                    let (preds, _) = parse_eae_output(&result.text, &inst.roles, self.max_answers);
                    pairs.push((inst.clone(), preds));
                }
                Err(e) => {
                    failures.push(InstanceFailure {
                        instance_id: inst.id.clone(),
                        message: e.to_string(),
                    });
                    pairs.push((
                        inst.clone(),
                        crate::core::RolePredictions::empty(&inst.roles),
                    ));
                }
            }
        }
        let scores = score_eae(&pairs, &self.policy)?;
        Ok(HeuristicEvalOutcome {
            accuracy: scores.arg_c.f1,
            failures,
        })
    }
}
