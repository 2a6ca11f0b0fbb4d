//! Hypothesis-probing toolkit: identify the implicit heuristics embedded in
//! an existing few-shot prompt, count how many distinct ones it carries,
//! build single- versus diverse-heuristic demonstrations, swap one
//! heuristic's example out for a duplicate of another (deduction), and
//! compute accuracy grouped by heuristic type.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::ClassificationInstance;
use crate::llm::{Client, LlmError, RequestDefaults};
use crate::promptkit::{
    build_demo_bundle, Exemplar, PromptBundle, PromptError, PromptStyle, TemplateSet,
};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("need at least one example")]
    NoExamples,
    #[error("identifier output has no entry for example {index}")]
    MissingExample { index: usize },
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{strategy} strategy needs {needed} {what}, only {available} available")]
    InsufficientPool {
        strategy: String,
        needed: usize,
        available: usize,
        what: String,
    },
    #[error("demonstration has {count} examples of category {category}, expected exactly one")]
    DeductTargetCount {
        category: HeuristicCategory,
        count: usize,
    },
    #[error("no replacement in the pool duplicates a category already in the demonstration")]
    NoReplacement,
    #[error("removing {category} cannot leave exactly one duplicated category")]
    UnbalancedDemo { category: HeuristicCategory },
    #[error("result sample {id:?} is not in any group")]
    UngroupedSample { id: String },
}

/// The closed six-way taxonomy implicit heuristics are projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeuristicCategory {
    #[serde(rename = "ER")]
    Er,
    #[serde(rename = "Comp")]
    Comp,
    #[serde(rename = "KB")]
    Kb,
    #[serde(rename = "Def")]
    Def,
    #[serde(rename = "Chron")]
    Chron,
    #[serde(rename = "Other")]
    Other,
}

impl HeuristicCategory {
    pub const ALL: [HeuristicCategory; 6] = [
        HeuristicCategory::Er,
        HeuristicCategory::Comp,
        HeuristicCategory::Kb,
        HeuristicCategory::Def,
        HeuristicCategory::Chron,
        HeuristicCategory::Other,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            HeuristicCategory::Er => "ER",
            HeuristicCategory::Comp => "Comp",
            HeuristicCategory::Kb => "KB",
            HeuristicCategory::Def => "Def",
            HeuristicCategory::Chron => "Chron",
            HeuristicCategory::Other => "Other",
        }
    }

    pub fn full_name(self) -> &'static str {
        match self {
            HeuristicCategory::Er => "empathetic reasoning",
            HeuristicCategory::Comp => "comparison",
            HeuristicCategory::Kb => "knowledge-based",
            HeuristicCategory::Def => "definition-based",
            HeuristicCategory::Chron => "chronological",
            HeuristicCategory::Other => "other",
        }
    }
}

impl fmt::Display for HeuristicCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for HeuristicCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        for c in Self::ALL {
            if s.eq_ignore_ascii_case(c.short_name()) || s.eq_ignore_ascii_case(c.full_name()) {
                return Ok(c);
            }
        }
        Err(format!("unknown heuristic category {s:?}"))
    }
}

/// What the identifier said about one example: a free-text label plus which
/// other examples it shares a heuristic with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifiedHeuristic {
    /// 1-based, matching the "example N" numbering in the prompt.
    pub example_index: usize,
    pub category_label: String,
    pub shared_with: BTreeSet<usize>,
}

/// Lowercase, trim punctuation, drop a trailing "heuristic"/"heuristics"
/// token. This is the equality key for merging identifier labels.
pub fn normalize_label(label: &str) -> String {
    let mut s = label.trim().to_lowercase();
    s = s
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == ',')
        .to_string();
    for suffix in ["heuristics", "heuristic"] {
        if let Some(stripped) = s.strip_suffix(suffix) {
            s = stripped.trim_end().to_string();
        }
    }
    crate::core::squish(&s)
}

/// Free-text label -> taxonomy category. Built-in aliases cover the
/// canonical names and their common variants; extra aliases can be merged
/// in from a JSON config (`{"label": "Comp", ...}`).
#[derive(Debug, Clone)]
pub struct AliasTable {
    map: BTreeMap<String, HeuristicCategory>,
}

impl Default for AliasTable {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        let mut add = |label: &str, cat: HeuristicCategory| {
            map.insert(normalize_label(label), cat);
        };
        add("empathetic reasoning", HeuristicCategory::Er);
        add("empathy", HeuristicCategory::Er);
        add("ER", HeuristicCategory::Er);
        add("comparison", HeuristicCategory::Comp);
        add("comparative", HeuristicCategory::Comp);
        add("Comp", HeuristicCategory::Comp);
        add("knowledge-based", HeuristicCategory::Kb);
        add("knowledge based", HeuristicCategory::Kb);
        add("KB", HeuristicCategory::Kb);
        add("definition-based", HeuristicCategory::Def);
        add("definition based", HeuristicCategory::Def);
        add("definition", HeuristicCategory::Def);
        add("Def", HeuristicCategory::Def);
        add("chronological", HeuristicCategory::Chron);
        add("chronology", HeuristicCategory::Chron);
        add("Chron", HeuristicCategory::Chron);
        add("other", HeuristicCategory::Other);
        add("others", HeuristicCategory::Other);
        AliasTable { map }
    }
}

impl AliasTable {
    pub fn categorize(&self, label: &str) -> HeuristicCategory {
        self.map
            .get(&normalize_label(label))
            .copied()
            .unwrap_or(HeuristicCategory::Other)
    }

    pub fn merge_json(&mut self, text: &str) -> Result<(), ProbeError> {
        let extra: BTreeMap<String, String> = serde_json::from_str(text)
            .map_err(|e| LlmError::Config(format!("alias table: {e}")))?;
        for (label, cat) in extra {
            let cat = HeuristicCategory::from_str(&cat).map_err(LlmError::Config)?;
            self.map.insert(normalize_label(&label), cat);
        }
        Ok(())
    }

    /// Any known alias (longest first) appearing in free text, for parsing
    /// labeler completions.
    fn find_in_text(&self, text: &str) -> Option<HeuristicCategory> {
        let lowered = text.to_lowercase();
        let mut keys: Vec<&String> = self.map.keys().collect();
        keys.sort_by_key(|k| std::cmp::Reverse(k.len()));
        let mut best: Option<(usize, HeuristicCategory)> = None;
        for key in keys {
            if key.is_empty() {
                continue;
            }
            if let Some(pos) = lowered.rfind(key.as_str()) {
                let better = match best {
                    Some((best_pos, _)) => pos > best_pos,
                    None => true,
                };
                if better {
                    best = Some((pos, self.map[key]));
                }
            }
        }
        best.map(|(_, c)| c)
    }
}

fn render_probe_example(index: usize, ex: &Exemplar) -> String {
    let answer = if ex.reasoning.is_empty() {
        ex.answer.clone()
    } else {
        format!("{} {}", ex.reasoning, ex.answer)
    };
    format!("example {index}\nQ: {}\nA: {answer}", ex.question)
}

/// Ask the backend which heuristic each in-prompt example embeds and parse
/// the per-example labels; examples whose normalized labels agree are
/// linked as sharing one heuristic.
pub fn identify_prompt_heuristics(
    prompt_examples: &[Exemplar],
    client: &Client,
    templates: &TemplateSet,
    defaults: &RequestDefaults,
) -> Result<Vec<IdentifiedHeuristic>, ProbeError> {
    if prompt_examples.is_empty() {
        return Err(ProbeError::NoExamples);
    }
    let examples_text = prompt_examples
        .iter()
        .enumerate()
        .map(|(i, ex)| render_probe_example(i + 1, ex))
        .collect::<Vec<_>>()
        .join("\n\n");
    let prompt = templates
        .probe_identify
        .render(&[("examples", examples_text.as_str())])?;
    let result = client.complete(&defaults.request(prompt))?;
    parse_identification_output(&result.text, prompt_examples.len())
}

/// Parse per-example blocks of the form `Example N: ...`, pulling the first
/// quoted phrase of each block as the heuristic label.
pub fn parse_identification_output(
    text: &str,
    example_count: usize,
) -> Result<Vec<IdentifiedHeuristic>, ProbeError> {
    let lowered = text.to_lowercase();
    let mut records = Vec::new();
    for index in 1..=example_count {
        let marker = format!("example {index}:");
        let start = lowered
            .find(&marker)
            .ok_or(ProbeError::MissingExample { index })?;
        let body_start = start + marker.len();
        let next_marker = format!("example {}:", index + 1);
        let body_end = lowered[body_start..]
            .find(&next_marker)
            .map(|p| body_start + p)
            .unwrap_or(text.len());
        let body = &text[body_start..body_end];
        let label = first_quoted_phrase(body)
            .unwrap_or_else(|| body.split('.').next().unwrap_or(body).trim().to_string());
        records.push(IdentifiedHeuristic {
            example_index: index,
            category_label: label,
            shared_with: BTreeSet::new(),
        });
    }

    // Sharing statements surface as repeated labels; link records whose
    // normalized labels coincide.
    for i in 0..records.len() {
        for j in 0..records.len() {
            if i != j
                && normalize_label(&records[i].category_label)
                    == normalize_label(&records[j].category_label)
            {
                let other = records[j].example_index;
                records[i].shared_with.insert(other);
            }
        }
    }
    Ok(records)
}

fn first_quoted_phrase(text: &str) -> Option<String> {
    let quotes = ['"', '\u{201C}', '\u{201D}'];
    let start = text.find(quotes)?;
    let after = &text[start + text[start..].chars().next()?.len_utf8()..];
    let end = after.find(quotes)?;
    Some(after[..end].to_string())
}

/// Count the distinct heuristics in a set of identification records:
/// equivalence classes under `shared_with` links, further merged when the
/// normalized labels are equal.
pub fn count_distinct_heuristics(records: &[IdentifiedHeuristic]) -> usize {
    let n = records.len();
    if n == 0 {
        return 0;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let ra = find(parent, a);
        let rb = find(parent, b);
        if ra != rb {
            parent[ra] = rb;
        }
    };

    let index_of: BTreeMap<usize, usize> = records
        .iter()
        .enumerate()
        .map(|(pos, r)| (r.example_index, pos))
        .collect();
    for (pos, record) in records.iter().enumerate() {
        for shared in &record.shared_with {
            if let Some(&other) = index_of.get(shared) {
                union(&mut parent, pos, other);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if normalize_label(&records[i].category_label)
                == normalize_label(&records[j].category_label)
            {
                union(&mut parent, i, j);
            }
        }
    }

    let mut roots = BTreeSet::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        roots.insert(root);
    }
    roots.len()
}

/// An exemplar tagged with the heuristic category its explanation follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorizedExemplar {
    pub exemplar: Exemplar,
    pub category: HeuristicCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyMode {
    Single,
    Diverse,
}

impl FromStr for StrategyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(StrategyMode::Single),
            "diverse" => Ok(StrategyMode::Diverse),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

/// Build an n-example demonstration where all explanations follow one
/// heuristic (single) or pairwise-distinct heuristics (diverse). Selection
/// is deterministic for a fixed seed.
pub fn build_strategy_prompt(
    pool: &[CategorizedExemplar],
    n: usize,
    strategy: StrategyMode,
    seed: u64,
) -> Result<(PromptBundle, Vec<CategorizedExemplar>), ProbeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_category: BTreeMap<HeuristicCategory, Vec<&CategorizedExemplar>> = BTreeMap::new();
    for ex in pool {
        by_category.entry(ex.category).or_default().push(ex);
    }

    let chosen: Vec<CategorizedExemplar> = match strategy {
        StrategyMode::Single => {
            let mut candidates: Vec<HeuristicCategory> = by_category
                .iter()
                .filter(|(_, v)| v.len() >= n)
                .map(|(c, _)| *c)
                .collect();
            if candidates.is_empty() {
                let best = by_category.values().map(Vec::len).max().unwrap_or(0);
                return Err(ProbeError::InsufficientPool {
                    strategy: "single".into(),
                    needed: n,
                    available: best,
                    what: "examples of one category".into(),
                });
            }
            candidates.shuffle(&mut rng);
            let category = candidates[0];
            let mut members = by_category[&category].clone();
            members.shuffle(&mut rng);
            members.into_iter().take(n).cloned().collect()
        }
        StrategyMode::Diverse => {
            let mut categories: Vec<HeuristicCategory> = by_category.keys().copied().collect();
            if categories.len() < n {
                return Err(ProbeError::InsufficientPool {
                    strategy: "diverse".into(),
                    needed: n,
                    available: categories.len(),
                    what: "distinct categories".into(),
                });
            }
            categories.shuffle(&mut rng);
            categories
                .into_iter()
                .take(n)
                .map(|c| {
                    let members = &by_category[&c];
                    let pick = (0..members.len())
                        .collect::<Vec<_>>()
                        .choose(&mut rng)
                        .copied()
                        .unwrap_or(0);
                    members[pick].clone()
                })
                .collect()
        }
    };

    let exemplars: Vec<Exemplar> = chosen.iter().map(|c| c.exemplar.clone()).collect();
    Ok((build_demo_bundle(PromptStyle::Cot, &exemplars), chosen))
}

/// Replace the sole example of `remove` with a pool example whose category
/// already occurs in the demonstration, in place. The output keeps the
/// demonstration's length, loses `remove` entirely, and duplicates exactly
/// one surviving category.
pub fn deduct_heuristic(
    demo: &[CategorizedExemplar],
    remove: HeuristicCategory,
    pool: &[CategorizedExemplar],
) -> Result<Vec<CategorizedExemplar>, ProbeError> {
    let positions: Vec<usize> = demo
        .iter()
        .enumerate()
        .filter(|(_, e)| e.category == remove)
        .map(|(i, _)| i)
        .collect();
    if positions.len() != 1 {
        return Err(ProbeError::DeductTargetCount {
            category: remove,
            count: positions.len(),
        });
    }
    let slot = positions[0];

    let mut counts: BTreeMap<HeuristicCategory, usize> = BTreeMap::new();
    for (i, e) in demo.iter().enumerate() {
        if i != slot {
            *counts.entry(e.category).or_default() += 1;
        }
    }
    if counts.values().any(|&c| c > 1) {
        return Err(ProbeError::UnbalancedDemo { category: remove });
    }

    let replacement = pool
        .iter()
        .find(|candidate| {
            candidate.category != remove
                && counts.contains_key(&candidate.category)
                && !demo.iter().any(|d| d.exemplar == candidate.exemplar)
        })
        .ok_or(ProbeError::NoReplacement)?;

    let mut out = demo.to_vec();
    out[slot] = replacement.clone();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDiagnostic {
    pub sample_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelingOutcome {
    pub groups: BTreeMap<HeuristicCategory, Vec<String>>,
    pub diagnostics: Vec<LabelDiagnostic>,
}

fn classification_text(inst: &ClassificationInstance) -> String {
    match &inst.text {
        crate::core::ClassificationText::Sentence(s) => s.clone(),
        crate::core::ClassificationText::Pair {
            premise,
            hypothesis,
        } => {
            format!("Premise: {premise}\nHypothesis: {hypothesis}")
        }
    }
}

/// Assign every sample to exactly one category by asking the backend which
/// heuristic would guide its prediction. Unparseable assignments land in
/// `Other` with a diagnostic; the groups always partition the input.
pub fn label_samples_by_heuristic(
    samples: &[ClassificationInstance],
    taxonomy: &[HeuristicCategory],
    client: &Client,
    templates: &TemplateSet,
    defaults: &RequestDefaults,
    aliases: &AliasTable,
) -> Result<LabelingOutcome, ProbeError> {
    let options = taxonomy
        .iter()
        .map(|c| format!("{} ({})", c.full_name(), c.short_name()))
        .collect::<Vec<_>>()
        .join(", ");
    let mut groups: BTreeMap<HeuristicCategory, Vec<String>> = BTreeMap::new();
    let mut diagnostics = Vec::new();

    for sample in samples {
        let text = classification_text(sample);
        let prompt = templates
            .probe_label
            .render(&[("options", options.as_str()), ("text", text.as_str())])?;
        let category = match client.complete(&defaults.request(prompt)) {
            Ok(result) => match aliases.find_in_text(&result.text) {
                Some(cat) if taxonomy.contains(&cat) => cat,
                Some(cat) => {
                    diagnostics.push(LabelDiagnostic {
                        sample_id: sample.id.clone(),
                        message: format!("label {cat} outside the requested taxonomy"),
                    });
                    HeuristicCategory::Other
                }
                None => {
                    diagnostics.push(LabelDiagnostic {
                        sample_id: sample.id.clone(),
                        message: format!(
                            "no taxonomy label found in completion: {}",
                            result.text.chars().take(80).collect::<String>()
                        ),
                    });
                    HeuristicCategory::Other
                }
            },
            Err(e) => {
                diagnostics.push(LabelDiagnostic {
                    sample_id: sample.id.clone(),
                    message: e.to_string(),
                });
                HeuristicCategory::Other
            }
        };
        groups.entry(category).or_default().push(sample.id.clone());
    }

    Ok(LabelingOutcome {
        groups,
        diagnostics,
    })
}

/// Per-category accuracy over correctness-flagged results. Empty groups
/// are absent from the output rather than reported as zero.
pub fn grouped_accuracy(
    results: &[(String, bool)],
    groups: &BTreeMap<HeuristicCategory, Vec<String>>,
) -> Result<BTreeMap<HeuristicCategory, f64>, ProbeError> {
    let mut membership: BTreeMap<&str, HeuristicCategory> = BTreeMap::new();
    for (category, ids) in groups {
        for id in ids {
            membership.insert(id.as_str(), *category);
        }
    }
    let mut totals: BTreeMap<HeuristicCategory, (usize, usize)> = BTreeMap::new();
    for (id, correct) in results {
        let category = membership
            .get(id.as_str())
            .ok_or_else(|| ProbeError::UngroupedSample { id: id.clone() })?;
        let entry = totals.entry(*category).or_default();
        entry.1 += 1;
        if *correct {
            entry.0 += 1;
        }
    }
    Ok(totals
        .into_iter()
        .map(|(c, (correct, total))| (c, correct as f64 / total as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(index: usize, label: &str) -> IdentifiedHeuristic {
        IdentifiedHeuristic {
            example_index: index,
            category_label: label.to_string(),
            shared_with: BTreeSet::new(),
        }
    }

    #[test]
    fn label_normalization_strips_quotes_and_suffix() {
        assert_eq!(normalize_label("\"comparison heuristic\""), "comparison");
        assert_eq!(
            normalize_label("Empathetic Reasoning"),
            "empathetic reasoning"
        );
        assert_eq!(normalize_label("chronological heuristic."), "chronological");
    }

    #[test]
    fn count_is_zero_for_empty_and_one_for_uniform() {
        assert_eq!(count_distinct_heuristics(&[]), 0);
        let records = vec![
            record(1, "comparison"),
            record(2, "Comparison heuristic"),
            record(3, "comparison"),
            record(4, "comparison"),
        ];
        assert_eq!(count_distinct_heuristics(&records), 1);
    }

    #[test]
    fn count_merges_shared_links_and_is_permutation_invariant() {
        let mut a = record(1, "alpha");
        let b = record(2, "beta");
        let mut c = record(3, "gamma");
        a.shared_with.insert(3);
        c.shared_with.insert(1);
        let forward = vec![a.clone(), b.clone(), c.clone()];
        let backward = vec![c, b, a];
        assert_eq!(count_distinct_heuristics(&forward), 2);
        assert_eq!(
            count_distinct_heuristics(&forward),
            count_distinct_heuristics(&backward)
        );
    }

    #[test]
    fn alias_table_projects_variants_onto_categories() {
        let aliases = AliasTable::default();
        assert_eq!(
            aliases.categorize("\"comparison heuristic\""),
            HeuristicCategory::Comp
        );
        assert_eq!(
            aliases.categorize("empathetic reasoning"),
            HeuristicCategory::Er
        );
        assert_eq!(
            aliases.categorize("something novel"),
            HeuristicCategory::Other
        );

        let mut aliases = AliasTable::default();
        aliases
            .merge_json(r#"{"timeline reasoning": "Chron"}"#)
            .unwrap();
        assert_eq!(
            aliases.categorize("Timeline Reasoning"),
            HeuristicCategory::Chron
        );
    }

    fn categorized(tag: &str, category: HeuristicCategory) -> CategorizedExemplar {
        CategorizedExemplar {
            exemplar: Exemplar {
                question: format!("Q {tag}"),
                reasoning: format!("R {tag}"),
                answer: format!("A {tag}"),
                label_coverage: BTreeSet::new(),
            },
            category,
        }
    }

    fn five_category_demo() -> Vec<CategorizedExemplar> {
        vec![
            categorized("er", HeuristicCategory::Er),
            categorized("comp", HeuristicCategory::Comp),
            categorized("kb", HeuristicCategory::Kb),
            categorized("def", HeuristicCategory::Def),
            categorized("chron", HeuristicCategory::Chron),
        ]
    }

    #[test]
    fn single_strategy_picks_n_of_one_category() {
        let mut pool = Vec::new();
        for i in 0..4 {
            pool.push(categorized(&format!("comp{i}"), HeuristicCategory::Comp));
        }
        pool.push(categorized("kb", HeuristicCategory::Kb));
        let (bundle, chosen) = build_strategy_prompt(&pool, 3, StrategyMode::Single, 1).unwrap();
        assert_eq!(chosen.len(), 3);
        assert!(chosen.iter().all(|c| c.category == HeuristicCategory::Comp));
        assert!(!bundle.rendered.is_empty());

        let (_, again) = build_strategy_prompt(&pool, 3, StrategyMode::Single, 1).unwrap();
        assert_eq!(chosen, again, "seeded selection is deterministic");
    }

    #[test]
    fn diverse_strategy_picks_distinct_categories() {
        let pool = five_category_demo();
        let (_, chosen) = build_strategy_prompt(&pool, 5, StrategyMode::Diverse, 9).unwrap();
        let categories: BTreeSet<HeuristicCategory> = chosen.iter().map(|c| c.category).collect();
        assert_eq!(categories.len(), 5);
    }

    #[test]
    fn diverse_past_taxonomy_size_errors_with_counts() {
        let pool = five_category_demo();
        let err = build_strategy_prompt(&pool, 6, StrategyMode::Diverse, 0).unwrap_err();
        match err {
            ProbeError::InsufficientPool {
                needed, available, ..
            } => {
                assert_eq!(needed, 6);
                assert_eq!(available, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deduct_replaces_exactly_one_slot() {
        let demo = five_category_demo();
        let pool = vec![categorized("kb2", HeuristicCategory::Kb)];
        let out = deduct_heuristic(&demo, HeuristicCategory::Def, &pool).unwrap();
        assert_eq!(out.len(), demo.len());
        assert!(out.iter().all(|e| e.category != HeuristicCategory::Def));
        let kb_count = out
            .iter()
            .filter(|e| e.category == HeuristicCategory::Kb)
            .count();
        assert_eq!(kb_count, 2);
        for (i, e) in out.iter().enumerate() {
            if i != 3 {
                assert_eq!(e, &demo[i], "untouched slots stay in place");
            }
        }
    }

    #[test]
    fn deduct_missing_category_errors() {
        let demo = five_category_demo();
        let pool = vec![categorized("x", HeuristicCategory::Kb)];
        let err = deduct_heuristic(&demo, HeuristicCategory::Other, &pool).unwrap_err();
        assert!(matches!(
            err,
            ProbeError::DeductTargetCount { count: 0, .. }
        ));
    }

    #[test]
    fn deduct_without_replacement_errors() {
        let demo = five_category_demo();
        let pool = vec![categorized("other", HeuristicCategory::Other)];
        assert!(matches!(
            deduct_heuristic(&demo, HeuristicCategory::Def, &pool),
            Err(ProbeError::NoReplacement)
        ));
    }

    #[test]
    fn grouped_accuracy_computes_ratios_and_skips_empty_groups() {
        let groups = BTreeMap::from([
            (
                HeuristicCategory::Comp,
                vec![
                    "a".to_string(),
                    "b".to_string(),
                    "c".to_string(),
                    "d".to_string(),
                ],
            ),
            (HeuristicCategory::Er, Vec::new()),
        ]);
        let results = vec![
            ("a".to_string(), true),
            ("b".to_string(), true),
            ("c".to_string(), true),
            ("d".to_string(), false),
        ];
        let acc = grouped_accuracy(&results, &groups).unwrap();
        assert_eq!(acc[&HeuristicCategory::Comp], 0.75);
        assert!(!acc.contains_key(&HeuristicCategory::Er));
    }

    #[test]
    fn ungrouped_sample_errors() {
        let groups = BTreeMap::from([(HeuristicCategory::Comp, vec!["a".to_string()])]);
        let results = vec![("mystery".to_string(), true)];
        assert!(matches!(
            grouped_accuracy(&results, &groups),
            Err(ProbeError::UngroupedSample { .. })
        ));
    }

    #[test]
    fn grouped_accuracy_reproduces_fixed_ratio_table() {
        // Ratios chosen so correct/total lands exactly on the target
        // accuracy for each group.
        let spec: [(HeuristicCategory, usize, usize); 5] = [
            (HeuristicCategory::Er, 157, 200),
            (HeuristicCategory::Comp, 727, 1000),
            (HeuristicCategory::Kb, 872, 1000),
            (HeuristicCategory::Def, 851, 1000),
            (HeuristicCategory::Chron, 747, 1000),
        ];
        let mut groups: BTreeMap<HeuristicCategory, Vec<String>> = BTreeMap::new();
        let mut results = Vec::new();
        for (category, correct, total) in spec {
            for i in 0..total {
                let id = format!("{category}-{i}");
                groups.entry(category).or_default().push(id.clone());
                results.push((id, i < correct));
            }
        }
        let acc = grouped_accuracy(&results, &groups).unwrap();
        assert!((acc[&HeuristicCategory::Er] - 0.785).abs() < 1e-12);
        assert!((acc[&HeuristicCategory::Comp] - 0.727).abs() < 1e-12);
        assert!((acc[&HeuristicCategory::Kb] - 0.872).abs() < 1e-12);
        assert!((acc[&HeuristicCategory::Def] - 0.851).abs() < 1e-12);
        assert!((acc[&HeuristicCategory::Chron] - 0.747).abs() < 1e-12);
    }
}
