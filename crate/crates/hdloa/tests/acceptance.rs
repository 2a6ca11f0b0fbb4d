//! Acceptance suite: one test per criterion, each printing a pass line.
//! Everything here goes through the public API; expected values are either
//! fixed by construction, computed by an independent oracle in this file,
//! or pinned golden bytes.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hdloa::core::{EAEInstance, Heuristic, HeuristicSet, Provenance, RolePredictions, TaskKind};
use hdloa::data::{DatasetManifest, Split};
use hdloa::heuristics::{
    select_heuristics, HeuristicError, HeuristicEvalOutcome, HeuristicEvaluator,
};
use hdloa::llm::{Client, MockBackend, MockScript, RequestDefaults, ResponseCache};
use hdloa::parse::{parse_eae_output, render_answer_block};
use hdloa::probe::{
    count_distinct_heuristics, deduct_heuristic, identify_prompt_heuristics, CategorizedExemplar,
    HeuristicCategory,
};
use hdloa::promptkit::{
    build_baseline_prompt, build_hdloa_prompt, builtin_exemplar_source, builtin_heuristics,
    Ablation, Exemplar, PromptStyle, PromptTarget, TemplateSet,
};
use hdloa::runner::{
    compare_runs, run_experiment_with_client, BackendConfig, RunConfig, TableFormat,
};
use hdloa::score::{normalize_span, score_eae, MatchPolicy};

#[test]
fn criterion_01_parser_fidelity_on_verbatim_output() {
    let text = common::fixture("rams_loa_completion.txt");
    let roles = vec!["victim".to_string(), "place".to_string()];
    let started = Instant::now();
    let (preds, diagnostics) = parse_eae_output(&text, &roles, 1);
    let elapsed = started.elapsed();

    assert_eq!(
        preds.per_role["victim"],
        vec!["280 victims , including women , children and old people".to_string()]
    );
    assert_eq!(preds.per_role["place"], vec!["Syria".to_string()]);
    assert_eq!(preds.per_role.len(), 2);
    assert!(diagnostics.matched_roles.contains("victim"));
    assert!(diagnostics.matched_roles.contains("place"));
    assert!(!diagnostics.used_fallback);
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "parse took {elapsed:?}, limit is 1s"
    );
    println!("acceptance 01 parser-fidelity: pass ({elapsed:?})");
}

#[test]
fn criterion_02_scorer_matches_brute_force_oracle() {
    let policy = MatchPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c0e);
    let mut checked = 0usize;
    for _ in 0..1000 {
        let (inst, preds) = common::random_scored_pair(&mut rng);
        let expected = common::oracle_counts(&inst, &preds, &policy);
        let scored = score_eae(
            std::slice::from_ref(&(inst.clone(), preds.clone())),
            &policy,
        )
        .unwrap();
        assert_eq!(
            scored.counts, expected,
            "greedy counts diverge from maximum matching on {}",
            inst.id
        );

        // F1 must be recomputable from the counts within 1e-12.
        let re = hdloa::core::EAEScores::from_counts(scored.counts);
        assert!((scored.arg_i.f1 - re.arg_i.f1).abs() < 1e-12);
        assert!((scored.arg_c.f1 - re.arg_c.f1).abs() < 1e-12);
        assert!(scored.counts.tp_c <= scored.counts.tp_i);
        checked += 1;
    }
    assert_eq!(checked, 1000);
    println!("acceptance 02 scorer-oracle-equivalence: pass (1000 instances)");
}

#[test]
fn criterion_03_normalization_idempotence() {
    let policy = MatchPolicy::default();
    assert_eq!(normalize_span("the damaged car", &policy), "damaged car");

    let mut rng = ChaCha8Rng::seed_from_u64(0x100b);
    for i in 0..10_000 {
        let s = random_string(&mut rng);
        let once = normalize_span(&s, &policy);
        let twice = normalize_span(&once, &policy);
        assert_eq!(once, twice, "not idempotent on input {i}: {s:?}");
    }
    println!("acceptance 03 normalization-idempotence: pass (10000 strings)");
}

fn random_string(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..3) {
        // Token sequences over an alphabet that includes articles and
        // prepositions, stacked on purpose.
        0 => {
            let len = rng.gen_range(0..6);
            (0..len)
                .map(|_| common::TOKENS[rng.gen_range(0..common::TOKENS.len())])
                .collect::<Vec<_>>()
                .join(" ")
        }
        // Raw printable ASCII with odd whitespace.
        1 => {
            let len = rng.gen_range(0..40);
            (0..len)
                .map(|_| {
                    let c = rng.gen_range(0x20u8..0x7f) as char;
                    if rng.gen_bool(0.1) {
                        '\t'
                    } else {
                        c
                    }
                })
                .collect()
        }
        // Mixed-case function words with padding.
        _ => {
            let words = ["The", "OF", "tO", "An", "a", "SYRIA", "envoy", "  ", "WITH"];
            let len = rng.gen_range(0..6);
            (0..len)
                .map(|_| words[rng.gen_range(0..words.len())])
                .collect::<Vec<_>>()
                .join(" ")
        }
    }
}

struct ScriptedAccuracies(BTreeMap<String, f64>);

impl HeuristicEvaluator for ScriptedAccuracies {
    fn evaluate(
        &self,
        heuristic: &Heuristic,
        subset: &[EAEInstance],
    ) -> Result<HeuristicEvalOutcome, HeuristicError> {
        assert_eq!(subset.len(), 10, "selection must see the whole subset");
        Ok(HeuristicEvalOutcome {
            accuracy: self.0[&heuristic.label],
            failures: Vec::new(),
        })
    }
}

#[test]
fn criterion_04_heuristic_selection_ranks_and_is_deterministic() {
    let subset: Vec<EAEInstance> = (0..10)
        .map(|i| EAEInstance {
            id: format!("syn-{i}"),
            document: format!("Document {i} mentions aid near the border."),
            event_type: "transaction.transaction.giftgrantprovideaid".into(),
            trigger: None,
            roles: vec!["giver".into()],
            gold: BTreeMap::from([("giver".to_string(), vec![format!("entity {i}")])]),
            domain_tag: None,
        })
        .collect();

    let set = HeuristicSet::new(
        vec![
            Heuristic::new("Syntactic", "sentence structure", Provenance::Generated, 0).unwrap(),
            Heuristic::new(
                "Semantic role labeling",
                "agent or source role",
                Provenance::Generated,
                1,
            )
            .unwrap(),
            Heuristic::new(
                "Discourse analysis",
                "broader narrative",
                Provenance::Generated,
                2,
            )
            .unwrap(),
        ],
        "giver",
    )
    .unwrap();
    let evaluator = ScriptedAccuracies(BTreeMap::from([
        ("Syntactic".to_string(), 0.3369),
        ("Semantic role labeling".to_string(), 0.2652),
        ("Discourse analysis".to_string(), 0.40),
    ]));

    let mut previous: Option<Vec<(String, Option<f64>)>> = None;
    for round in 0..5 {
        let (ranked, report) = select_heuristics(&set, &subset, 3, &evaluator, 11).unwrap();
        let labels: Vec<(String, Option<f64>)> = ranked
            .ranked
            .iter()
            .map(|h| (h.label.clone(), h.eval_accuracy))
            .collect();
        assert_eq!(ranked.ranked[0].label, "Discourse analysis");
        assert_eq!(ranked.ranked[0].eval_accuracy, Some(0.40));
        assert_eq!(ranked.ranked[1].label, "Syntactic");
        assert_eq!(ranked.ranked[1].eval_accuracy, Some(0.3369));
        assert_eq!(ranked.ranked[2].label, "Semantic role labeling");
        assert_eq!(ranked.ranked[2].eval_accuracy, Some(0.2652));
        assert_eq!(ranked.ranked.len(), 3, "k=3 excludes nothing here");
        assert_eq!(report.subset_size, 10);
        if let Some(prev) = &previous {
            assert_eq!(prev, &labels, "round {round} differed");
        }
        previous = Some(labels);
    }
    println!("acceptance 04 heuristic-selection: pass (5 deterministic rounds)");
}

fn hdloa_bundle_for(task: TaskKind, ablation: Option<Ablation>) -> hdloa::promptkit::PromptBundle {
    let templates = TemplateSet::builtin();
    let source = builtin_exemplar_source(task).unwrap();
    let exemplars = source.exemplars_for(PromptStyle::Hdloa, ablation).unwrap();
    let set = builtin_heuristics(task).unwrap();
    let ranked = hdloa::heuristics::RankedHeuristics::from_list(set.items, set.base_role);
    let rams = common::rams_target();
    let docee = common::docee_target();
    let sst2 = hdloa::core::ClassificationInstance {
        id: "sst2-target-1".into(),
        text: hdloa::core::ClassificationText::Sentence(
            "a gorgeous , witty , seductive movie".to_string(),
        ),
        gold_label: "positive".into(),
    };
    let snli = hdloa::core::ClassificationInstance {
        id: "snli-target-1".into(),
        text: hdloa::core::ClassificationText::Pair {
            premise: "A man inspects the uniform of a figure in some East Asian country."
                .to_string(),
            hypothesis: "The man is sleeping.".to_string(),
        },
        gold_label: "no".into(),
    };
    let target = match task {
        TaskKind::EaeRams => PromptTarget::Eae(&rams),
        TaskKind::EaeDocee => PromptTarget::Eae(&docee),
        TaskKind::Sentiment => PromptTarget::Classification(&sst2),
        TaskKind::Nli => PromptTarget::Classification(&snli),
    };
    build_hdloa_prompt(task, &ranked, &exemplars, &target, &templates, ablation).unwrap()
}

#[test]
fn criterion_05_prompt_goldens_and_structural_exclusions() {
    for (task, golden) in [
        (TaskKind::EaeRams, "rams_hdloa.golden.txt"),
        (TaskKind::EaeDocee, "docee_hdloa.golden.txt"),
        (TaskKind::Sentiment, "sst2_hdloa.golden.txt"),
        (TaskKind::Nli, "snli_hdloa.golden.txt"),
    ] {
        let bundle = hdloa_bundle_for(task, None);
        let expected = std::fs::read_to_string(common::golden_path(golden)).unwrap();
        assert_eq!(bundle.rendered, expected, "golden drift for {task}");
    }

    // The standard baseline carries no heuristic block.
    let templates = TemplateSet::builtin();
    let source = builtin_exemplar_source(TaskKind::EaeRams).unwrap();
    let exemplars = source.exemplars_for(PromptStyle::Standard, None).unwrap();
    let target = common::rams_target();
    let standard = build_baseline_prompt(
        PromptStyle::Standard,
        TaskKind::EaeRams,
        &exemplars,
        &PromptTarget::Eae(&target),
        &templates,
    )
    .unwrap();
    assert!(standard.heuristic_block.is_empty());
    assert!(!standard.rendered.to_lowercase().contains("heuristic list"));

    // The list ablation leaves no mention of a heuristic list anywhere.
    for task in [
        TaskKind::EaeRams,
        TaskKind::EaeDocee,
        TaskKind::Sentiment,
        TaskKind::Nli,
    ] {
        let ablated = hdloa_bundle_for(task, Some(Ablation::NoHeuristics));
        assert!(
            !ablated.rendered.to_lowercase().contains("heuristic list"),
            "{task} ablated prompt mentions the list"
        );
    }
    println!("acceptance 05 prompt-goldens: pass (4 tasks + exclusions)");
}

#[test]
fn criterion_06_probe_counts_five_heuristics_over_six_examples() {
    let identification = common::fixture("heuristic_identification_completion.txt");
    let script =
        MockScript::default().on_substring("most critical and profound heuristic", identification);
    let client = Client::new(Arc::new(MockBackend::new(script)));
    let templates = TemplateSet::builtin();
    let examples: Vec<Exemplar> =
        serde_json::from_str(&common::fixture("identify_examples.json")).unwrap();
    assert_eq!(examples.len(), 6);

    let records = identify_prompt_heuristics(
        &examples,
        &client,
        &templates,
        &RequestDefaults::new("mock-model"),
    )
    .unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(count_distinct_heuristics(&records), 5);

    let second = records.iter().find(|r| r.example_index == 2).unwrap();
    let fourth = records.iter().find(|r| r.example_index == 4).unwrap();
    assert!(second.shared_with.contains(&4));
    assert!(fourth.shared_with.contains(&2));
    assert_eq!(
        hdloa::probe::normalize_label(&second.category_label),
        "comparison"
    );
    println!("acceptance 06 probe-counting: pass (5 distinct, 2<->4 shared)");
}

#[test]
fn criterion_07_deduction_mechanics_for_every_category() {
    let demo: Vec<CategorizedExemplar> = [
        HeuristicCategory::Er,
        HeuristicCategory::Comp,
        HeuristicCategory::Kb,
        HeuristicCategory::Def,
        HeuristicCategory::Chron,
    ]
    .into_iter()
    .enumerate()
    .map(|(i, category)| CategorizedExemplar {
        exemplar: Exemplar {
            question: format!("Q{i}"),
            reasoning: format!("R{i}"),
            answer: format!("A{i}"),
            label_coverage: Default::default(),
        },
        category,
    })
    .collect();

    for remove in [
        HeuristicCategory::Er,
        HeuristicCategory::Comp,
        HeuristicCategory::Kb,
        HeuristicCategory::Def,
        HeuristicCategory::Chron,
    ] {
        // The pool duplicates every surviving category, so a replacement is
        // always available no matter which category is removed.
        let pool: Vec<CategorizedExemplar> = demo
            .iter()
            .map(|entry| CategorizedExemplar {
                exemplar: Exemplar {
                    question: format!("{}-spare", entry.exemplar.question),
                    reasoning: entry.exemplar.reasoning.clone(),
                    answer: entry.exemplar.answer.clone(),
                    label_coverage: Default::default(),
                },
                category: entry.category,
            })
            .collect();

        let out = deduct_heuristic(&demo, remove, &pool).unwrap();
        assert_eq!(out.len(), demo.len(), "{remove}: length preserved");
        assert!(
            out.iter().all(|e| e.category != remove),
            "{remove}: removed category absent"
        );
        let mut counts: BTreeMap<HeuristicCategory, usize> = BTreeMap::new();
        for entry in &out {
            *counts.entry(entry.category).or_default() += 1;
        }
        let duplicated: Vec<_> = counts.iter().filter(|(_, &c)| c == 2).collect();
        assert_eq!(duplicated.len(), 1, "{remove}: exactly one duplicate");
        assert!(counts.values().all(|&c| c <= 2));
        let changed: Vec<usize> = demo
            .iter()
            .zip(&out)
            .enumerate()
            .filter(|(_, (before, after))| before != after)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(changed.len(), 1, "{remove}: exactly one slot changed");
    }
    println!("acceptance 07 deduction-mechanics: pass (5 categories)");
}

#[test]
fn criterion_08_end_to_end_determinism_with_warm_cache() {
    let dir = tempfile::tempdir().unwrap();
    let templates = TemplateSet::builtin();

    let lines = [
        serde_json::json!({
            "id": "r1",
            "document": "A massacre in Syria killed 280 victims , including women , children and old people .",
            "event_type": "life.die.na",
            "trigger": {"text": "massacre", "char_start": 2, "char_end": 10},
            "roles": ["victim", "place"],
            "gold": {"victim": ["280 victims , including women , children and old people"], "place": ["Syria"]}
        }),
        serde_json::json!({
            "id": "r2",
            "document": "Access was granted by the administrator to Ripley Johnson in Building 7.",
            "event_type": "transaction.transaction.giftgrantprovideaid",
            "trigger": {"text": "granted", "char_start": 11, "char_end": 18},
            "roles": ["giver", "recipient"],
            "gold": {"giver": ["the administrator"], "recipient": ["Ripley Johnson"]}
        }),
        serde_json::json!({
            "id": "r3",
            "document": "Protests erupted in Moscow after the election.",
            "event_type": "conflict.demonstrate.na",
            "trigger": {"text": "erupted", "char_start": 9, "char_end": 16},
            "roles": ["place"],
            "gold": {"place": ["Moscow"]}
        }),
    ];
    let data_path = dir.path().join("rams.jsonl");
    std::fs::write(
        &data_path,
        lines
            .iter()
            .map(|l| l.to_string() + "\n")
            .collect::<String>(),
    )
    .unwrap();

    let script = MockScript::default()
        .on_substring(
            "280 victims , including",
            common::fixture("rams_loa_completion.txt"),
        )
        .on_substring(
            "Building 7",
            "[giver]: \"administrator\"\n[recipient]: \"Ripley Johnson\"",
        )
        .on_substring("in Moscow after the election", "[place]: \"Kyiv\"");
    let script_path = dir.path().join("script.json");
    std::fs::write(&script_path, serde_json::to_string(&script).unwrap()).unwrap();

    let config = |run: &str| RunConfig {
        task: TaskKind::EaeRams,
        dataset: DatasetManifest {
            task: TaskKind::EaeRams,
            path: data_path.clone(),
            split: Split::Test,
            expected_count: Some(3),
        },
        style: PromptStyle::Hdloa,
        backend: BackendConfig::Mock {
            script: script_path.clone(),
        },
        model_id: "mock-model".into(),
        heuristics_path: Some(
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("templates/heuristics/rams.jsonl"),
        ),
        generate: false,
        selection: None,
        k: 3,
        n_generate: 10,
        temperature: 0.0,
        max_tokens: 1024,
        max_parallel: 2,
        cache_dir: dir.path().join("shared-cache"),
        seed: 7,
        ablation: None,
        eval_limit: None,
        out_dir: dir.path().join(run),
        policy: MatchPolicy::default(),
        max_answers: None,
        exemplars_path: None,
        max_retries: 3,
    };

    let first_backend = Arc::new(MockBackend::new(script.clone()));
    let first_client = Client::new(first_backend.clone())
        .with_cache(ResponseCache::open(dir.path().join("shared-cache")).unwrap());
    let first = run_experiment_with_client(&config("run1"), &first_client, &templates).unwrap();
    assert_eq!(first_backend.calls(), 3);

    let second_backend = Arc::new(MockBackend::new(script));
    let second_client = Client::new(second_backend.clone())
        .with_cache(ResponseCache::open(dir.path().join("shared-cache")).unwrap());
    let second = run_experiment_with_client(&config("run2"), &second_client, &templates).unwrap();

    assert_eq!(
        second_backend.calls(),
        0,
        "warm cache must absorb every request"
    );
    assert_eq!(
        first.aggregate_bytes(),
        second.aggregate_bytes(),
        "aggregate sections must be byte-identical"
    );
    println!("acceptance 08 end-to-end-determinism: pass (0 calls on warm run)");
}

#[test]
fn criterion_09_answer_block_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    for case in 0..500 {
        let role_count = rng.gen_range(1..=5);
        let roles: Vec<String> = (0..role_count)
            .map(|i| {
                if rng.gen_bool(0.3) {
                    format!("Casualties and Losses {i}")
                } else {
                    format!("role{i}")
                }
            })
            .collect();
        let mut per_role = BTreeMap::new();
        for role in &roles {
            let count = rng.gen_range(0..=3usize);
            let spans: Vec<String> = (0..count)
                .map(|_| {
                    // Spans with embedded commas and mixed casing are the
                    // hard cases.
                    if rng.gen_bool(0.4) {
                        "280 victims , including women , children and old people".to_string()
                    } else {
                        common::random_span(&mut rng)
                    }
                })
                .collect();
            per_role.insert(role.clone(), spans);
        }
        let preds = RolePredictions {
            per_role,
            raw_output: String::new(),
        };
        let block = render_answer_block(&roles, &preds);
        let (reparsed, diagnostics) = parse_eae_output(&block, &roles, 3);
        assert_eq!(
            reparsed.per_role, preds.per_role,
            "round trip failed on case {case}: block was\n{block}"
        );
        assert!(diagnostics.missing_roles.is_empty());
    }
    println!("acceptance 09 answer-round-trip: pass (500 cases)");
}

/// Live check, not CI-gated. Configure with:
///   HDLOA_LIVE_ENDPOINT  completion endpoint URL
///   HDLOA_LIVE_MODEL     model id
///   HDLOA_LIVE_KEY_ENV   name of the env var holding the credential
///   HDLOA_LIVE_DATA      path to a RAMS-format test file
#[test]
#[ignore = "live backend required; see env vars in the doc comment"]
fn criterion_10_live_run_parses_and_compares() {
    let endpoint = std::env::var("HDLOA_LIVE_ENDPOINT").expect("HDLOA_LIVE_ENDPOINT");
    let model = std::env::var("HDLOA_LIVE_MODEL").expect("HDLOA_LIVE_MODEL");
    let key_env = std::env::var("HDLOA_LIVE_KEY_ENV").expect("HDLOA_LIVE_KEY_ENV");
    let data = PathBuf::from(std::env::var("HDLOA_LIVE_DATA").expect("HDLOA_LIVE_DATA"));

    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig {
        task: TaskKind::EaeRams,
        dataset: DatasetManifest {
            task: TaskKind::EaeRams,
            path: data,
            split: Split::Test,
            expected_count: None,
        },
        style: PromptStyle::Hdloa,
        backend: BackendConfig::Http {
            endpoint,
            api_key_env: key_env,
            response_field: "choices.0.text".into(),
            timeout_secs: 120,
        },
        model_id: model,
        heuristics_path: Some(
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("templates/heuristics/rams.jsonl"),
        ),
        generate: false,
        selection: None,
        k: 3,
        n_generate: 10,
        temperature: 0.0,
        max_tokens: 1024,
        max_parallel: 4,
        cache_dir: dir.path().join("cache"),
        seed: 7,
        ablation: None,
        eval_limit: Some(50),
        out_dir: dir.path().join("live-hdloa"),
        policy: MatchPolicy::default(),
        max_answers: None,
        exemplars_path: None,
        max_retries: 3,
    };
    let templates = TemplateSet::builtin();
    let hdloa_bundle = hdloa::runner::run_experiment(&base, &templates).unwrap();

    let mut standard = base.clone();
    standard.style = PromptStyle::Standard;
    standard.heuristics_path = None;
    standard.out_dir = dir.path().join("live-standard");
    let standard_bundle = hdloa::runner::run_experiment(&standard, &templates).unwrap();

    let parse_ok = hdloa_bundle
        .instances
        .iter()
        .filter(|r| r.failed.is_none() && r.diagnostics.as_ref().is_some_and(|d| !d.used_fallback))
        .count();
    let rate = parse_ok as f64 / hdloa_bundle.instances.len() as f64;
    assert!(
        rate >= 0.95,
        "only {parse_ok}/{} instances parsed cleanly",
        hdloa_bundle.instances.len()
    );

    let table = compare_runs(&[hdloa_bundle, standard_bundle], 1, TableFormat::Plain).unwrap();
    println!("{table}");
    println!("acceptance 10 live-run: pass ({rate:.2} parse-clean)");
}
