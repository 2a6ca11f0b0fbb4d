//! Experiment orchestration: declarative run configs, the end-to-end
//! pipeline (load data, obtain heuristics, build prompts, complete, parse,
//! score), ablations, comparison tables, and report bundles.
//!
//! Reports are self-describing: they embed the full config and template
//! digests, every per-instance record needed to recompute the aggregates,
//! and the aggregate section contains nothing time- or cache-dependent, so
//! a re-run with identical config and a warm cache reproduces it
//! byte-for-byte.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{ClassificationInstance, EAEInstance, RolePredictions, TaskKind};
use crate::data::{
    load_classification, load_eae, sample_subset, take_subset, DataError, DatasetManifest,
};
use crate::heuristics::{
    generate_heuristics, select_heuristics, HeuristicError, RankedHeuristics,
    SingleHeuristicPipeline,
};
use crate::llm::{
    cache_key, Client, HttpBackend, HttpBackendConfig, LlmError, MockBackend, MockScript,
    RequestDefaults, ResponseCache, RetryPolicy,
};
use crate::parse::{parse_eae_output, parse_label_output, ParseDiagnostics};
use crate::promptkit::{
    build_baseline_prompt, build_hdloa_prompt, builtin_exemplar_source, Ablation, ExemplarSource,
    PromptError, PromptStyle, PromptTarget, TemplateSet,
};
use crate::score::{score_classification, score_eae, MatchPolicy, ScoreError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("heuristics: {0}")]
    Heuristic(#[from] HeuristicError),
    #[error("io {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("comparison needs at least two bundles")]
    NotEnoughBundles,
    #[error("bundles cover different datasets: {0}")]
    MixedDatasets(String),
    #[error("baseline index {index} out of range for {count} bundles")]
    BadBaseline { index: usize, count: usize },
}

impl RunError {
    /// Process exit code: 1 config, 2 data, 3 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_)
            | RunError::Prompt(_)
            | RunError::NotEnoughBundles
            | RunError::MixedDatasets(_)
            | RunError::BadBaseline { .. } => 1,
            RunError::Data(_) | RunError::Io { .. } | RunError::Score(_) => 2,
            RunError::Backend(_) => 3,
            RunError::Heuristic(e) => match e {
                HeuristicError::Backend(_) => 3,
                _ => 1,
            },
        }
    }
}

/// Which backend a run talks to.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Mock {
        script: PathBuf,
    },
    Http {
        endpoint: String,
        api_key_env: String,
        #[serde(default = "default_response_field")]
        response_field: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_response_field() -> String {
    "choices.0.text".to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

/// In-pipeline heuristic selection: a labeled subset file plus the fraction
/// of it to use.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub subset_path: PathBuf,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

fn default_fraction() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskKind,
    pub dataset: DatasetManifest,
    pub style: PromptStyle,
    pub backend: BackendConfig,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristics_path: Option<PathBuf>,
    #[serde(default)]
    pub generate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionConfig>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n_generate")]
    pub n_generate: usize,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    pub cache_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Ablation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_limit: Option<usize>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub policy: MatchPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_answers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplars_path: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_k() -> usize {
    3
}

fn default_n_generate() -> usize {
    10
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_max_parallel() -> usize {
    4
}

fn default_retries() -> u32 {
    3
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.task != self.dataset.task {
            return Err(RunError::Config(format!(
                "run task {} does not match dataset task {}",
                self.task, self.dataset.task
            )));
        }
        if self.style == PromptStyle::Hdloa && self.heuristics_path.is_none() && !self.generate {
            return Err(RunError::Config(
                "heuristic-driven style needs heuristics_path or generate = true".to_string(),
            ));
        }
        if self.ablation.is_some() && self.style != PromptStyle::Hdloa {
            return Err(RunError::Config(
                "ablations only apply to the heuristic-driven style".to_string(),
            ));
        }
        if self.max_parallel == 0 {
            return Err(RunError::Config(
                "max_parallel must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    pub fn defaults(&self) -> RequestDefaults {
        RequestDefaults {
            model_id: self.model_id.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            stop_sequences: Vec::new(),
        }
    }
}

/// Build the client a config describes. Returns the mock handle too when
/// the backend is scripted, so callers can assert on call counts.
pub fn build_client(config: &RunConfig) -> Result<(Client, Option<Arc<MockBackend>>), RunError> {
    let cache = ResponseCache::open(&config.cache_dir)?;
    let retry = RetryPolicy {
        max_retries: config.max_retries,
        ..RetryPolicy::default()
    };
    match &config.backend {
        BackendConfig::Mock { script } => {
            let backend = Arc::new(MockBackend::new(MockScript::load(script)?));
            let client = Client::new(backend.clone())
                .with_cache(cache)
                .with_retry(retry)
                .with_max_in_flight(config.max_parallel);
            Ok((client, Some(backend)))
        }
        BackendConfig::Http {
            endpoint,
            api_key_env,
            response_field,
            timeout_secs,
        } => {
            let backend = Arc::new(HttpBackend::new(HttpBackendConfig {
                endpoint: endpoint.clone(),
                api_key_env: api_key_env.clone(),
                response_field: response_field.clone(),
                timeout_secs: *timeout_secs,
            })?);
            let client = Client::new(backend)
                .with_cache(cache)
                .with_retry(retry)
                .with_max_in_flight(config.max_parallel);
            Ok((client, None))
        }
    }
}

/// One instance's trip through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub instance_id: String,
    pub prompt_digest: String,
    pub cached: bool,
    pub latency_ms: u64,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<RolePredictions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ParseDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aggregate {
    Eae {
        scores: crate::core::EAEScores,
        instances: usize,
        failed: usize,
        policy: MatchPolicy,
    },
    Classification {
        accuracy: f64,
        correct: usize,
        total: usize,
        parse_errors: usize,
        failed: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheUsage {
    pub hits: usize,
    pub misses: usize,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config: RunConfig,
    pub template_digests: std::collections::BTreeMap<String, String>,
    pub heuristic_labels: Vec<String>,
    pub instances: Vec<InstanceRecord>,
    pub aggregate: Aggregate,
    pub timing: Timing,
    pub cache: CacheUsage,
}

impl ReportBundle {
    /// The deterministic part of the report, as canonical JSON bytes.
    pub fn aggregate_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.aggregate).expect("aggregate serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), RunError> {
        let body = serde_json::to_vec_pretty(self).map_err(|e| RunError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        write_atomic(path, &body)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| RunError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    fn method_name(&self) -> String {
        let mut name = format!("{}/{}", self.config.model_id, self.config.style);
        if let Some(ablation) = self.config.ablation {
            let tag = match ablation {
                Ablation::NoHeuristics => "no_heuristics",
                Ablation::NoLoa => "no_loa",
            };
            name.push_str(&format!("[{tag}]"));
        }
        name
    }
}

fn write_atomic(path: &Path, body: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| RunError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| RunError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    std::io::Write::write_all(&mut tmp.as_file(), body).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    tmp.persist(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(())
}

enum Instances {
    Eae(Vec<EAEInstance>),
    Classification(Vec<ClassificationInstance>),
}

fn load_instances(config: &RunConfig) -> Result<Instances, RunError> {
    if config.task.is_eae() {
        let mut instances = load_eae(&config.dataset)?;
        if let Some(limit) = config.eval_limit {
            if limit < instances.len() {
                instances = take_subset(&instances, limit, config.seed)?;
            }
        }
        Ok(Instances::Eae(instances))
    } else {
        let mut instances = load_classification(&config.dataset)?;
        if let Some(limit) = config.eval_limit {
            if limit < instances.len() {
                instances = take_subset(&instances, limit, config.seed)?;
            }
        }
        Ok(Instances::Classification(instances))
    }
}

fn obtain_heuristics(
    config: &RunConfig,
    client: &Client,
    templates: &TemplateSet,
    exemplar_source: &ExemplarSource,
) -> Result<RankedHeuristics, RunError> {
    if config.style != PromptStyle::Hdloa {
        return Ok(RankedHeuristics::from_list(Vec::new(), ""));
    }
    let base_role = if config.task.is_eae() { "giver" } else { "" };

    if let Some(path) = &config.heuristics_path {
        let mut ranked = RankedHeuristics::load_jsonl(path, base_role)?;
        if ranked.ranked.len() > config.k {
            ranked.ranked.truncate(config.k);
        }
        ranked.k = config.k;
        ranked.seed = config.seed;
        return Ok(ranked);
    }

    // Generation path; optionally followed by accuracy-based selection on a
    // labeled subset.
    let set = generate_heuristics(
        "event argument extraction",
        base_role,
        config.n_generate,
        client,
        templates,
        &config.defaults(),
    )?;
    match &config.selection {
        Some(selection) => {
            let manifest = DatasetManifest {
                task: config.task,
                path: selection.subset_path.clone(),
                split: crate::data::Split::Train,
                expected_count: None,
            };
            let train = load_eae(&manifest)?;
            let subset = sample_subset(&train, selection.fraction, config.seed)?;
            let pipeline = SingleHeuristicPipeline {
                client,
                templates,
                task: config.task,
                exemplars: exemplar_source.exemplars_for(PromptStyle::Hdloa, None)?,
                defaults: config.defaults(),
                policy: config.policy,
                max_answers: config
                    .max_answers
                    .unwrap_or_else(|| config.task.default_max_answers()),
                base_role: base_role.to_string(),
            };
            let (ranked, _report) =
                select_heuristics(&set, &subset, config.k, &pipeline, config.seed)?;
            Ok(ranked)
        }
        None => {
            let mut items = set.items;
            items.truncate(config.k);
            Ok(RankedHeuristics {
                ranked: items,
                base_role: set.base_role,
                k: config.k,
                subset_size: 0,
                seed: config.seed,
            })
        }
    }
}

fn exemplar_source_for(config: &RunConfig) -> Result<ExemplarSource, RunError> {
    match &config.exemplars_path {
        Some(path) => Ok(ExemplarSource::load(path)?),
        None => Ok(builtin_exemplar_source(config.task)?),
    }
}

/// Run the full pipeline an experiment config describes, against an
/// already-built client (tests inject scripted backends this way).
pub fn run_experiment_with_client(
    config: &RunConfig,
    client: &Client,
    templates: &TemplateSet,
) -> Result<ReportBundle, RunError> {
    config.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);

    let exemplar_source = exemplar_source_for(config)?;
    let instances = load_instances(config)?;
    let heuristics = obtain_heuristics(config, client, templates, &exemplar_source)?;
    let exemplars = exemplar_source.exemplars_for(config.style, config.ablation)?;
    let defaults = config.defaults();
    let max_answers = config
        .max_answers
        .unwrap_or_else(|| config.task.default_max_answers());

    let records: Vec<InstanceRecord> = match &instances {
        Instances::Eae(list) => run_over(config, list, config.max_parallel, |index, inst| {
            let bundle = match config.style {
                PromptStyle::Hdloa => build_hdloa_prompt(
                    config.task,
                    &heuristics,
                    &exemplars,
                    &PromptTarget::Eae(inst),
                    templates,
                    config.ablation,
                ),
                style => build_baseline_prompt(
                    style,
                    config.task,
                    &exemplars,
                    &PromptTarget::Eae(inst),
                    templates,
                ),
            }?;
            let request = defaults.request(bundle.rendered);
            let digest = cache_key(&request);
            let result = client.complete(&request)?;
            let (predictions, diagnostics) =
                parse_eae_output(&result.text, &inst.roles, max_answers);
            Ok(InstanceRecord {
                index,
                instance_id: inst.id.clone(),
                prompt_digest: digest,
                cached: result.cached,
                latency_ms: result.latency_ms,
                raw_output: result.text,
                predictions: Some(predictions),
                diagnostics: Some(diagnostics),
                predicted_label: None,
                failed: None,
            })
        })?,
        Instances::Classification(list) => {
            run_over(config, list, config.max_parallel, |index, inst| {
                let bundle = match config.style {
                    PromptStyle::Hdloa => build_hdloa_prompt(
                        config.task,
                        &heuristics,
                        &exemplars,
                        &PromptTarget::Classification(inst),
                        templates,
                        config.ablation,
                    ),
                    style => build_baseline_prompt(
                        style,
                        config.task,
                        &exemplars,
                        &PromptTarget::Classification(inst),
                        templates,
                    ),
                }?;
                let request = defaults.request(bundle.rendered);
                let digest = cache_key(&request);
                let result = client.complete(&request)?;
                let predicted_label = parse_label_output(&result.text, config.task).ok();
                Ok(InstanceRecord {
                    index,
                    instance_id: inst.id.clone(),
                    prompt_digest: digest,
                    cached: result.cached,
                    latency_ms: result.latency_ms,
                    raw_output: result.text,
                    predictions: None,
                    diagnostics: None,
                    predicted_label,
                    failed: None,
                })
            })?
        }
    };

    let aggregate = match &instances {
        Instances::Eae(list) => aggregate_eae(config, list, &records)?,
        Instances::Classification(list) => aggregate_classification(list, &records)?,
    };

    let hits = records.iter().filter(|r| r.cached).count();
    let misses = records.len().saturating_sub(hits);
    let heuristic_labels = if config.ablation == Some(Ablation::NoHeuristics) {
        Vec::new()
    } else {
        heuristics
            .heuristics()
            .iter()
            .map(|h| h.label.clone())
            .collect()
    };
    let bundle = ReportBundle {
        config: config.clone(),
        template_digests: templates.digest_map(),
        heuristic_labels,
        instances: records,
        aggregate,
        timing: Timing {
            started_unix,
            wall_ms: started.elapsed().as_millis() as u64,
        },
        cache: CacheUsage {
            hits,
            misses,
            hit_rate: if hits + misses == 0 {
                0.0
            } else {
                hits as f64 / (hits + misses) as f64
            },
        },
    };
    bundle.save(&config.out_dir.join("report.json"))?;
    Ok(bundle)
}

/// Convenience entry: build the backend from the config and run.
pub fn run_experiment(
    config: &RunConfig,
    templates: &TemplateSet,
) -> Result<ReportBundle, RunError> {
    let (client, _mock) = build_client(config)?;
    run_experiment_with_client(config, &client, templates)
}

/// Fan instances out over up to `max_parallel` worker threads. Results are
/// collected by index so the record order never depends on scheduling; a
/// failed instance becomes a record with the `failed` marker, persisted
/// immediately so a crashed run can resume from its cache.
fn run_over<T: Sync>(
    config: &RunConfig,
    items: &[T],
    max_parallel: usize,
    work: impl Fn(usize, &T) -> Result<InstanceRecord, RunError> + Sync,
) -> Result<Vec<InstanceRecord>, RunError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<InstanceRecord>>> = Mutex::new(vec![None; items.len()]);
    let instances_dir = config.out_dir.join("instances");
    std::fs::create_dir_all(&instances_dir).map_err(|e| RunError::Io {
        path: instances_dir.clone(),
        message: e.to_string(),
    })?;

    let workers = max_parallel.clamp(1, items.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= items.len() {
                    break;
                }
                let record = match work(index, &items[index]) {
                    Ok(record) => record,
                    Err(e) => InstanceRecord {
                        index,
                        instance_id: format!("#{index}"),
                        prompt_digest: String::new(),
                        cached: false,
                        latency_ms: 0,
                        raw_output: String::new(),
                        predictions: None,
                        diagnostics: None,
                        predicted_label: None,
                        failed: Some(e.to_string()),
                    },
                };
                let path = instances_dir.join(format!("{index:05}.json"));
                if let Ok(body) = serde_json::to_vec_pretty(&record) {
                    let _ = write_atomic(&path, &body);
                }
                results.lock().unwrap()[index] = Some(record);
            });
        }
    });

    Ok(results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect())
}

fn aggregate_eae(
    config: &RunConfig,
    instances: &[EAEInstance],
    records: &[InstanceRecord],
) -> Result<Aggregate, RunError> {
    let mut pairs = Vec::new();
    let mut failed = 0usize;
    for (inst, record) in instances.iter().zip(records) {
        let preds = match (&record.predictions, &record.failed) {
            (Some(p), None) => p.clone(),
            _ => {
                failed += 1;
                RolePredictions::empty(&inst.roles)
            }
        };
        pairs.push((inst.clone(), preds));
    }
    let scores = score_eae(&pairs, &config.policy)?;
    Ok(Aggregate::Eae {
        scores,
        instances: instances.len(),
        failed,
        policy: config.policy,
    })
}

fn aggregate_classification(
    instances: &[ClassificationInstance],
    records: &[InstanceRecord],
) -> Result<Aggregate, RunError> {
    let mut pairs = Vec::new();
    let mut parse_errors = 0usize;
    let mut failed = 0usize;
    for (inst, record) in instances.iter().zip(records) {
        if record.failed.is_some() {
            failed += 1;
        } else if record.predicted_label.is_none() {
            parse_errors += 1;
        }
        pairs.push((inst.gold_label.clone(), record.predicted_label.clone()));
    }
    let accuracy = score_classification(&pairs)?;
    let correct = pairs
        .iter()
        .filter(|(g, p)| p.as_deref() == Some(g.as_str()))
        .count();
    Ok(Aggregate::Classification {
        accuracy,
        correct,
        total: pairs.len(),
        parse_errors,
        failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Plain,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" | "plain" => Ok(TableFormat::Plain),
            "markdown" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

fn dataset_signature(bundle: &ReportBundle) -> String {
    format!(
        "{}:{}:{}",
        bundle.config.task,
        bundle.config.dataset.path.display(),
        bundle.config.dataset.split
    )
}

/// Method-by-metric comparison across runs of one dataset, with deltas
/// against a designated baseline row.
pub fn compare_runs(
    bundles: &[ReportBundle],
    baseline: usize,
    format: TableFormat,
) -> Result<String, RunError> {
    if bundles.len() < 2 {
        return Err(RunError::NotEnoughBundles);
    }
    if baseline >= bundles.len() {
        return Err(RunError::BadBaseline {
            index: baseline,
            count: bundles.len(),
        });
    }
    let signature = dataset_signature(&bundles[0]);
    for b in bundles.iter().skip(1) {
        let other = dataset_signature(b);
        if other != signature {
            return Err(RunError::MixedDatasets(format!("{signature} vs {other}")));
        }
    }

    let eae = matches!(bundles[0].aggregate, Aggregate::Eae { .. });
    for b in bundles {
        if matches!(b.aggregate, Aggregate::Eae { .. }) != eae {
            return Err(RunError::MixedDatasets("mixed metric kinds".to_string()));
        }
    }

    let headline = |b: &ReportBundle| -> (f64, Option<f64>) {
        match &b.aggregate {
            Aggregate::Eae { scores, .. } => (scores.arg_c.f1, Some(scores.arg_i.f1)),
            Aggregate::Classification { accuracy, .. } => (*accuracy, None),
        }
    };
    let (base_main, _) = headline(&bundles[baseline]);
    let metric = if eae { "arg_c_f1" } else { "accuracy" };

    let mut rows = Vec::new();
    for (i, b) in bundles.iter().enumerate() {
        let (main, second) = headline(b);
        let delta = main - base_main;
        let marker = if i == baseline { " (baseline)" } else { "" };
        rows.push((
            format!("{}{marker}", b.method_name()),
            second
                .map(|s| format!("{s:.4}"))
                .unwrap_or_else(|| "-".to_string()),
            format!("{main:.4}"),
            format!("{delta:+.4}"),
        ));
    }

    let header = (
        "method".to_string(),
        "arg_i_f1".to_string(),
        metric.to_string(),
        "delta".to_string(),
    );
    let mut out = String::new();
    out.push_str(&format!("dataset: {signature}\n"));
    match format {
        TableFormat::Markdown => {
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n|---|---|---|---|\n",
                header.0, header.1, header.2, header.3
            ));
            for (a, b, c, d) in &rows {
                out.push_str(&format!("| {a} | {b} | {c} | {d} |\n"));
            }
        }
        TableFormat::Plain => {
            let width = rows
                .iter()
                .map(|(a, _, _, _)| a.len())
                .chain([header.0.len()])
                .max()
                .unwrap_or(10);
            out.push_str(&format!(
                "{:<width$}  {:>10}  {:>10}  {:>10}\n",
                header.0, header.1, header.2, header.3
            ));
            for (a, b, c, d) in &rows {
                out.push_str(&format!("{a:<width$}  {b:>10}  {c:>10}  {d:>10}\n"));
            }
        }
    }
    Ok(out)
}

/// Render one bundle's aggregate as a table.
pub fn format_report(bundle: &ReportBundle, format: TableFormat) -> String {
    let mut fields: Vec<(String, String)> = vec![
        ("task".into(), bundle.config.task.to_string()),
        ("style".into(), bundle.method_name()),
        ("instances".into(), bundle.instances.len().to_string()),
        (
            "cache_hit_rate".into(),
            format!("{:.4}", bundle.cache.hit_rate),
        ),
        ("wall_ms".into(), bundle.timing.wall_ms.to_string()),
        ("heuristics".into(), bundle.heuristic_labels.join(", ")),
    ];
    match &bundle.aggregate {
        Aggregate::Eae { scores, failed, .. } => {
            fields.push(("arg_i_p".into(), format!("{:.4}", scores.arg_i.precision)));
            fields.push(("arg_i_r".into(), format!("{:.4}", scores.arg_i.recall)));
            fields.push(("arg_i_f1".into(), format!("{:.4}", scores.arg_i.f1)));
            fields.push(("arg_c_p".into(), format!("{:.4}", scores.arg_c.precision)));
            fields.push(("arg_c_r".into(), format!("{:.4}", scores.arg_c.recall)));
            fields.push(("arg_c_f1".into(), format!("{:.4}", scores.arg_c.f1)));
            fields.push(("failed".into(), failed.to_string()));
        }
        Aggregate::Classification {
            accuracy,
            correct,
            total,
            parse_errors,
            failed,
        } => {
            fields.push(("accuracy".into(), format!("{accuracy:.4}")));
            fields.push(("correct".into(), format!("{correct}/{total}")));
            fields.push(("parse_errors".into(), parse_errors.to_string()));
            fields.push(("failed".into(), failed.to_string()));
        }
    }
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            out.push_str("| field | value |\n|---|---|\n");
            for (k, v) in fields {
                out.push_str(&format!("| {k} | {v} |\n"));
            }
        }
        TableFormat::Plain => {
            for (k, v) in fields {
                out.push_str(&format!("{k:<16} {v}\n"));
            }
        }
    }
    out
}

/// Exemplar roles demonstrated by a config's demonstration content, for the
/// seen/unseen breakdown.
pub fn demonstrated_roles(config: &RunConfig) -> Result<BTreeSet<String>, RunError> {
    Ok(exemplar_source_for(config)?.demonstrated_roles())
}
