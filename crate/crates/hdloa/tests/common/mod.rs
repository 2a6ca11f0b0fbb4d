//! Shared fixtures and the independent matching oracle used across
//! integration suites.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::Rng;

use hdloa::core::{EAEInstance, MatchCounts, RolePredictions, TriggerSpan};
use hdloa::score::{normalize_span, MatchPolicy};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/goldens")
        .join(name)
}

/// Compare against a golden file; `UPDATE_GOLDENS=1` rewrites it instead.
pub fn assert_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var("UPDATE_GOLDENS").is_ok() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("golden {name} missing ({e}); run with UPDATE_GOLDENS=1"));
    assert_eq!(
        actual, expected,
        "golden mismatch for {name}; run with UPDATE_GOLDENS=1 to regenerate"
    );
}

/// Maximum bipartite matching by augmenting paths. Independent of the
/// scorer's greedy implementation; used as its oracle.
pub fn max_bipartite_matching(adjacency: &[Vec<usize>], right_size: usize) -> usize {
    fn try_augment(
        u: usize,
        adjacency: &[Vec<usize>],
        seen: &mut [bool],
        matched_right: &mut [Option<usize>],
    ) -> bool {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                let take = match matched_right[v] {
                    None => true,
                    Some(prev) => try_augment(prev, adjacency, seen, matched_right),
                };
                if take {
                    matched_right[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }

    let mut matched_right: Vec<Option<usize>> = vec![None; right_size];
    let mut total = 0;
    for u in 0..adjacency.len() {
        let mut seen = vec![false; right_size];
        if try_augment(u, adjacency, &mut seen, &mut matched_right) {
            total += 1;
        }
    }
    total
}

/// Oracle counts for one instance: maximum matchings over the equality
/// graphs for classification (same role) and identification (any role).
pub fn oracle_counts(
    inst: &EAEInstance,
    preds: &RolePredictions,
    policy: &MatchPolicy,
) -> MatchCounts {
    let mut gold: Vec<(String, String)> = Vec::new();
    for role in &inst.roles {
        if let Some(spans) = inst.gold.get(role) {
            let mut seen = std::collections::BTreeSet::new();
            for span in spans {
                let norm = normalize_span(span, policy);
                if seen.insert(norm.clone()) {
                    gold.push((role.clone(), norm));
                }
            }
        }
    }
    let mut pred: Vec<(String, String)> = Vec::new();
    for role in &inst.roles {
        if let Some(spans) = preds.per_role.get(role) {
            for span in spans {
                pred.push((role.clone(), normalize_span(span, policy)));
            }
        }
    }

    let adjacency_c: Vec<Vec<usize>> = pred
        .iter()
        .map(|(role, norm)| {
            gold.iter()
                .enumerate()
                .filter(|(_, (g_role, g_norm))| g_role == role && g_norm == norm)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let adjacency_i: Vec<Vec<usize>> = pred
        .iter()
        .map(|(_, norm)| {
            gold.iter()
                .enumerate()
                .filter(|(_, (_, g_norm))| g_norm == norm)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let tp_c = max_bipartite_matching(&adjacency_c, gold.len()) as u64;
    let tp_i = max_bipartite_matching(&adjacency_i, gold.len()) as u64;
    MatchCounts {
        tp_i,
        fp_i: pred.len() as u64 - tp_i,
        fn_i: gold.len() as u64 - tp_i,
        tp_c,
        fp_c: pred.len() as u64 - tp_c,
        fn_c: gold.len() as u64 - tp_c,
    }
}

/// Token alphabet for randomized instances; includes articles and
/// prepositions so normalization participates in matching.
pub const TOKENS: [&str; 20] = [
    "the",
    "a",
    "of",
    "to",
    "envoy",
    "minister",
    "aid",
    "convoy",
    "syria",
    "camp",
    "border",
    "crossing",
    "relief",
    "supplies",
    "officials",
    "village",
    "family",
    "group",
    "road",
    "night",
];

pub fn random_span(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(1..=3);
    (0..len)
        .map(|_| TOKENS[rng.gen_range(0..TOKENS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random instance with up to 5 roles and up to 3 gold spans per role,
/// plus predictions drawn from the same alphabet.
pub fn random_scored_pair(rng: &mut impl Rng) -> (EAEInstance, RolePredictions) {
    let role_count = rng.gen_range(1..=5);
    let roles: Vec<String> = (0..role_count).map(|i| format!("r{i}")).collect();

    let mut gold = BTreeMap::new();
    for role in &roles {
        if rng.gen_bool(0.7) {
            let count = rng.gen_range(1..=3);
            let mut spans = Vec::new();
            for _ in 0..count {
                let span = random_span(rng);
                // The loader deduplicates; keep the generator consistent and
                // skip sentinel-looking spans.
                if !spans.contains(&span) {
                    spans.push(span);
                }
            }
            if !spans.is_empty() {
                gold.insert(role.clone(), spans);
            }
        }
    }

    let mut per_role = BTreeMap::new();
    for role in &roles {
        if rng.gen_bool(0.8) {
            let count = rng.gen_range(0..=3);
            let spans: Vec<String> = (0..count).map(|_| random_span(rng)).collect();
            per_role.insert(role.clone(), spans);
        }
    }

    let inst = EAEInstance {
        id: format!("rand-{}", rng.gen::<u32>()),
        document: String::new(),
        event_type: "event".into(),
        trigger: None,
        roles,
        gold,
        domain_tag: None,
    };
    let preds = RolePredictions {
        per_role,
        raw_output: String::new(),
    };
    (inst, preds)
}

/// The fixed target instance the golden prompt files are built around.
pub fn rams_target() -> EAEInstance {
    let text = "UN officials said the peace envoy transported aid to the besieged village despite the massacre that killed hundreds last week.";
    let start = text.find("transported").unwrap();
    EAEInstance {
        id: "rams-target-1".into(),
        document: text.to_string(),
        event_type: "movement.transportartifact.preventexit".into(),
        trigger: Some(TriggerSpan {
            text: "transported".into(),
            char_start: start,
            char_end: start + "transported".len(),
        }),
        roles: vec![
            "transporter".into(),
            "artifact".into(),
            "destination".into(),
        ],
        gold: BTreeMap::from([
            ("transporter".to_string(), vec!["peace envoy".to_string()]),
            ("artifact".to_string(), vec!["aid".to_string()]),
            (
                "destination".to_string(),
                vec!["besieged village".to_string()],
            ),
        ]),
        domain_tag: None,
    }
}

pub fn docee_target() -> EAEInstance {
    EAEInstance {
        id: "docee-target-1".into(),
        document: "A magnitude 6.6 earthquake struck the coastal region on Friday. Officials claimed 142 deaths and said 800 houses were damaged across three towns.".into(),
        event_type: "Earthquakes".into(),
        trigger: None,
        roles: vec![
            "Date".into(),
            "Casualties and Losses".into(),
            "Magnitude".into(),
        ],
        gold: BTreeMap::from([
            ("Date".to_string(), vec!["Friday".to_string()]),
            (
                "Casualties and Losses".to_string(),
                vec![
                    "claimed 142 deaths".to_string(),
                    "800 houses were damaged".to_string(),
                ],
            ),
            ("Magnitude".to_string(), vec!["6.6".to_string()]),
        ]),
        domain_tag: Some("normal".to_string()),
    }
}
