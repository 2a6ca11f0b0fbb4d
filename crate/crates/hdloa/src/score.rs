//! Evaluation protocol: span normalization, Arg-I/Arg-C micro-F1,
//! classification accuracy, and seen/unseen role breakdowns.
//!
//! Matching is exact string equality after normalization, one-to-one
//! between predictions and gold spans. A predicted span scores an Arg-C
//! true positive when some still-unmatched gold span of the same role in
//! the same instance normalizes equal to it, and an Arg-I true positive
//! when some still-unmatched gold span of any role does. Matching is
//! greedy in role order then list order; because equality induces disjoint
//! equivalence groups this greedy matching is maximal (the acceptance
//! suite checks it against a brute-force maximum-matching oracle).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{EAEInstance, EAEScores, MatchCounts, RolePredictions};

/// Articles stripped from span starts.
pub const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Prepositions stripped from span starts when the policy enables it.
pub const LEADING_PREPOSITIONS: [&str; 9] =
    ["of", "to", "in", "on", "at", "by", "for", "from", "with"];

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("prediction role {role:?} is not in the roles of instance {instance:?}")]
    UnknownRole { instance: String, role: String },
    #[error("no pairs to score")]
    Empty,
}

/// How spans are normalized before equality matching. The policy is echoed
/// in every score report so results stay interpretable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPolicy {
    pub strip_articles: bool,
    pub strip_leading_prepositions: bool,
    pub case_fold: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy {
            strip_articles: true,
            strip_leading_prepositions: true,
            case_fold: true,
        }
    }
}

impl MatchPolicy {
    /// Whitespace collapse only; no article/preposition stripping, no case
    /// folding.
    pub fn raw() -> Self {
        MatchPolicy {
            strip_articles: false,
            strip_leading_prepositions: false,
            case_fold: false,
        }
    }
}

/// Normalize a span for matching: collapse whitespace runs, trim, case-fold
/// when enabled, and strip leading articles (and prepositions when enabled)
/// until the span no longer starts with one. Stripping to a fixpoint keeps
/// the function idempotent.
pub fn normalize_span(text: &str, policy: &MatchPolicy) -> String {
    let mut s = crate::core::squish(text);
    if policy.case_fold {
        s = s.to_lowercase();
    }
    while let Some(first) = s.split_whitespace().next() {
        let lowered = first.to_lowercase();
        let strip = (policy.strip_articles && ARTICLES.contains(&lowered.as_str()))
            || (policy.strip_leading_prepositions
                && LEADING_PREPOSITIONS.contains(&lowered.as_str()));
        if !strip {
            break;
        }
        s = s[first.len()..].trim_start().to_string();
    }
    s
}

#[derive(Debug, Clone)]
struct GoldSlot<'a> {
    role: &'a str,
    norm: String,
    taken: bool,
}

impl<'a> GoldSlot<'a> {
    fn new(role: &'a str, norm: String) -> GoldSlot<'a> {
        GoldSlot {
            role,
            norm,
            taken: false,
        }
    }
}

fn instance_counts(
    inst: &EAEInstance,
    preds: &RolePredictions,
    policy: &MatchPolicy,
) -> Result<MatchCounts, ScoreError> {
    for role in preds.per_role.keys() {
        if !inst.roles.iter().any(|r| r == role) {
            return Err(ScoreError::UnknownRole {
                instance: inst.id.clone(),
                role: role.clone(),
            });
        }
    }

    // Gold slots laid out in role order then span order, deduplicated per
    // role on the normalized form so a set written twice cannot double-count.
    let mut slots: Vec<GoldSlot<'_>> = Vec::new();
    for role in &inst.roles {
        if let Some(spans) = inst.gold.get(role) {
            let mut seen = std::collections::BTreeSet::new();
            for span in spans {
                let norm = normalize_span(span, policy);
                if seen.insert(norm.clone()) {
                    slots.push(GoldSlot::new(role, norm));
                }
            }
        }
    }

    // Predictions in role order then list order.
    let mut pred_norms: Vec<(&str, String)> = Vec::new();
    for role in &inst.roles {
        if let Some(spans) = preds.per_role.get(role) {
            for span in spans {
                pred_norms.push((role.as_str(), normalize_span(span, policy)));
            }
        }
    }

    let gold_total = slots.len() as u64;
    let pred_total = pred_norms.len() as u64;

    // Arg-C pass: same role, equal normalized form, one gold per prediction.
    let mut c_slots = slots.clone();
    let mut tp_c = 0u64;
    for (role, norm) in &pred_norms {
        if let Some(slot) = c_slots
            .iter_mut()
            .find(|s| !s.taken && s.role == *role && s.norm == *norm)
        {
            slot.taken = true;
            tp_c += 1;
        }
    }

    // Arg-I pass: any role of the same instance.
    let mut i_slots = slots;
    let mut tp_i = 0u64;
    for (_, norm) in &pred_norms {
        if let Some(slot) = i_slots.iter_mut().find(|s| !s.taken && s.norm == *norm) {
            slot.taken = true;
            tp_i += 1;
        }
    }

    Ok(MatchCounts {
        tp_i,
        fp_i: pred_total - tp_i,
        fn_i: gold_total - tp_i,
        tp_c,
        fp_c: pred_total - tp_c,
        fn_c: gold_total - tp_c,
    })
}

/// Micro-averaged Arg-I / Arg-C scores over instance/prediction pairs.
pub fn score_eae(
    pairs: &[(EAEInstance, RolePredictions)],
    policy: &MatchPolicy,
) -> Result<EAEScores, ScoreError> {
    let mut totals = MatchCounts::default();
    for (inst, preds) in pairs {
        totals.add(&instance_counts(inst, preds, policy)?);
    }
    Ok(EAEScores::from_counts(totals))
}

/// Per-role Arg-C counts alongside the pooled scores, plus a flag count for
/// instances where two roles share an identical normalized gold string
/// (those are the cases where Arg-I credit assignment is ambiguous).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetailedScores {
    pub scores: EAEScores,
    pub per_role: BTreeMap<String, MatchCounts>,
    pub shared_gold_instances: Vec<String>,
    pub policy: MatchPolicy,
}

pub fn score_eae_detailed(
    pairs: &[(EAEInstance, RolePredictions)],
    policy: &MatchPolicy,
) -> Result<DetailedScores, ScoreError> {
    let mut totals = MatchCounts::default();
    let mut per_role: BTreeMap<String, MatchCounts> = BTreeMap::new();
    let mut shared = Vec::new();

    for (inst, preds) in pairs {
        totals.add(&instance_counts(inst, preds, policy)?);

        // Per-role view: score each role in isolation (classification
        // matching only, identification is meaningless within one role).
        for role in &inst.roles {
            let sub_inst = restrict_instance(inst, |r| r == role);
            let sub_preds = restrict_predictions(preds, |r| r == role);
            let counts = instance_counts(&sub_inst, &sub_preds, policy)?;
            per_role.entry(role.clone()).or_default().add(&counts);
        }

        let mut norms_by_role: BTreeMap<String, &str> = BTreeMap::new();
        'outer: for (role, spans) in &inst.gold {
            for span in spans {
                let norm = normalize_span(span, policy);
                if let Some(other) = norms_by_role.get(&norm) {
                    if *other != role.as_str() {
                        shared.push(inst.id.clone());
                        break 'outer;
                    }
                } else {
                    norms_by_role.insert(norm, role);
                }
            }
        }
    }

    Ok(DetailedScores {
        scores: EAEScores::from_counts(totals),
        per_role,
        shared_gold_instances: shared,
        policy: *policy,
    })
}

fn restrict_instance(inst: &EAEInstance, keep: impl Fn(&str) -> bool) -> EAEInstance {
    EAEInstance {
        id: inst.id.clone(),
        document: inst.document.clone(),
        event_type: inst.event_type.clone(),
        trigger: inst.trigger.clone(),
        roles: inst.roles.iter().filter(|r| keep(r)).cloned().collect(),
        gold: inst
            .gold
            .iter()
            .filter(|(r, _)| keep(r))
            .map(|(r, s)| (r.clone(), s.clone()))
            .collect(),
        domain_tag: inst.domain_tag.clone(),
    }
}

fn restrict_predictions(preds: &RolePredictions, keep: impl Fn(&str) -> bool) -> RolePredictions {
    RolePredictions {
        per_role: preds
            .per_role
            .iter()
            .filter(|(r, _)| keep(r))
            .map(|(r, s)| (r.clone(), s.clone()))
            .collect(),
        raw_output: String::new(),
    }
}

/// Accuracy over (gold, predicted) label pairs; a `None` prediction is a
/// parse failure and counts as incorrect.
pub fn score_classification(pairs: &[(String, Option<String>)]) -> Result<f64, ScoreError> {
    if pairs.is_empty() {
        return Err(ScoreError::Empty);
    }
    let correct = pairs
        .iter()
        .filter(|(gold, pred)| pred.as_deref() == Some(gold.as_str()))
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Scores partitioned by whether the role was demonstrated in the prompt's
/// exemplars.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeenUnseenScores {
    pub seen: EAEScores,
    pub unseen: EAEScores,
}

/// Partition every (instance, role) pair by membership of the role in
/// `exemplar_roles` and score each side independently.
pub fn seen_unseen_breakdown(
    pairs: &[(EAEInstance, RolePredictions)],
    exemplar_roles: &std::collections::BTreeSet<String>,
    policy: &MatchPolicy,
) -> Result<SeenUnseenScores, ScoreError> {
    let mut seen_pairs = Vec::new();
    let mut unseen_pairs = Vec::new();
    for (inst, preds) in pairs {
        let seen_inst = restrict_instance(inst, |r| exemplar_roles.contains(r));
        let seen_preds = restrict_predictions(preds, |r| exemplar_roles.contains(r));
        let unseen_inst = restrict_instance(inst, |r| !exemplar_roles.contains(r));
        let unseen_preds = restrict_predictions(preds, |r| !exemplar_roles.contains(r));
        seen_pairs.push((seen_inst, seen_preds));
        unseen_pairs.push((unseen_inst, unseen_preds));
    }
    Ok(SeenUnseenScores {
        seen: score_eae(&seen_pairs, policy)?,
        unseen: score_eae(&unseen_pairs, policy)?,
    })
}

impl fmt::Display for DetailedScores {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.scores.counts;
        writeln!(
            f,
            "policy: strip_articles={} strip_leading_prepositions={} case_fold={} whitespace_collapse=true",
            self.policy.strip_articles,
            self.policy.strip_leading_prepositions,
            self.policy.case_fold
        )?;
        writeln!(
            f,
            "arg-i: P={:.4} R={:.4} F1={:.4} (tp={} fp={} fn={})",
            self.scores.arg_i.precision,
            self.scores.arg_i.recall,
            self.scores.arg_i.f1,
            c.tp_i,
            c.fp_i,
            c.fn_i
        )?;
        writeln!(
            f,
            "arg-c: P={:.4} R={:.4} F1={:.4} (tp={} fp={} fn={})",
            self.scores.arg_c.precision,
            self.scores.arg_c.recall,
            self.scores.arg_c.f1,
            c.tp_c,
            c.fp_c,
            c.fn_c
        )?;
        writeln!(f, "per-role (arg-c):")?;
        for (role, counts) in &self.per_role {
            let prf = crate::core::PrfScores::from_counts(counts.tp_c, counts.fp_c, counts.fn_c);
            writeln!(
                f,
                "  {role}: P={:.4} R={:.4} F1={:.4} (tp={} fp={} fn={})",
                prf.precision, prf.recall, prf.f1, counts.tp_c, counts.fp_c, counts.fn_c
            )?;
        }
        if !self.shared_gold_instances.is_empty() {
            writeln!(
                f,
                "instances with one gold string under multiple roles: {}",
                self.shared_gold_instances.join(", ")
            )?;
        }
        Ok(())
    }
}
