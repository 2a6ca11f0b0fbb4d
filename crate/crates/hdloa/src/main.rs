//! `hdloa` — experiment CLI for heuristic-driven link-of-analogy prompting.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 backend error.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use hdloa::core::{RolePredictions, TaskKind};
use hdloa::data::{load_classification, load_eae, sample_subset, DatasetManifest, Split};
use hdloa::heuristics::{
    generate_heuristics, select_heuristics, RankedHeuristics, SingleHeuristicPipeline,
};
use hdloa::llm::{
    Client, HttpBackend, HttpBackendConfig, MockBackend, MockScript, RequestDefaults, ResponseCache,
};
use hdloa::probe::{
    build_strategy_prompt, count_distinct_heuristics, deduct_heuristic, grouped_accuracy,
    identify_prompt_heuristics, CategorizedExemplar, HeuristicCategory, StrategyMode,
};
use hdloa::promptkit::{
    build_baseline_prompt, build_hdloa_prompt, builtin_exemplar_source, builtin_heuristics,
    Ablation, Exemplar, PromptStyle, PromptTarget, TemplateSet,
};
use hdloa::runner::{
    compare_runs, format_report, run_experiment, ReportBundle, RunConfig, RunError, TableFormat,
};
use hdloa::score::{score_eae_detailed, seen_unseen_breakdown, MatchPolicy};

#[derive(Parser)]
#[command(
    name = "hdloa",
    about = "heuristic-driven link-of-analogy prompting toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset loading and validation.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
    /// Backend utilities.
    Llm {
        #[command(subcommand)]
        command: LlmCommand,
    },
    /// Heuristic generation and selection.
    Heuristics {
        #[command(subcommand)]
        command: HeuristicsCommand,
    },
    /// Prompt assembly.
    Prompt {
        #[command(subcommand)]
        command: PromptCommand,
    },
    /// Score persisted predictions against gold data.
    Score(ScoreArgs),
    /// Implicit-heuristic probing experiments.
    Probe {
        #[command(subcommand)]
        command: ProbeCommand,
    },
    /// Run a full experiment from a declarative config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare report bundles against a baseline row.
    Compare {
        bundles: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        baseline: usize,
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Render one report bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Load a dataset file and report violations.
    Validate {
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        expect: Option<usize>,
    },
}

#[derive(Subcommand)]
enum LlmCommand {
    /// Send a one-token request and report the round trip.
    Ping(BackendArgs),
    /// Count entries and bytes in a response cache directory.
    CacheStats {
        #[arg(long)]
        cache_dir: PathBuf,
    },
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// TOML file describing the backend (same schema as a run config's
    /// [backend] section, plus optional cache_dir / model_id).
    #[arg(long)]
    backend: PathBuf,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Deserialize)]
struct BackendFile {
    #[serde(flatten)]
    backend: hdloa::runner::BackendConfig,
    #[serde(default)]
    cache_dir: Option<PathBuf>,
    #[serde(default)]
    model_id: Option<String>,
    #[serde(default)]
    max_parallel: Option<usize>,
}

#[derive(Subcommand)]
enum HeuristicsCommand {
    /// Generate candidate heuristics for a role with one completion call.
    Generate {
        #[arg(long)]
        role: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value = "event argument extraction")]
        task_description: String,
    },
    /// Measure candidates on a labeled subset and keep the top k.
    Select {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        subset: PathBuf,
        #[arg(long)]
        task: TaskKind,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Subcommand)]
enum PromptCommand {
    /// Assemble a prompt for one target instance and write it out.
    Build {
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        style: String,
        #[arg(long)]
        heuristics: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target_id: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ablation: Option<String>,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    task: TaskKind,
    /// "default" (articles, prepositions, case folding) or "raw"
    /// (whitespace collapse only).
    #[arg(long, default_value = "default")]
    policy: String,
    /// Demonstrated roles; when given, a seen/unseen breakdown is printed.
    #[arg(long)]
    exemplar_roles: Vec<String>,
}

#[derive(Subcommand)]
enum ProbeCommand {
    /// Identify the implicit heuristic of each example in a prompt file.
    Identify {
        /// JSON array of {question, answer} examples.
        #[arg(long)]
        prompt: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Build a single- or diverse-heuristic demonstration from a pool.
    Strategy {
        #[arg(long)]
        mode: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON array of {exemplar: {...}, category: "Comp"} entries.
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace the sole example of one category with a duplicate of another.
    Deduct {
        #[arg(long)]
        remove: String,
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy grouped by heuristic category.
    GroupAcc {
        /// One {"sample_id": ..., "correct": bool} record per line.
        #[arg(long)]
        results: PathBuf,
        /// One {"sample_id": ..., "category": "KB"} record per line.
        #[arg(long)]
        groups: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn build_standalone_client(args: &BackendArgs) -> Result<(Client, RequestDefaults), RunError> {
    let text = std::fs::read_to_string(&args.backend).map_err(|e| io_err(&args.backend, e))?;
    let file: BackendFile =
        toml::from_str(&text).map_err(|e| RunError::Config(format!("backend file: {e}")))?;
    let backend: Arc<dyn hdloa::llm::Backend> = match &file.backend {
        hdloa::runner::BackendConfig::Mock { script } => {
            Arc::new(MockBackend::new(MockScript::load(script)?))
        }
        hdloa::runner::BackendConfig::Http {
            endpoint,
            api_key_env,
            response_field,
            timeout_secs,
        } => Arc::new(HttpBackend::new(HttpBackendConfig {
            endpoint: endpoint.clone(),
            api_key_env: api_key_env.clone(),
            response_field: response_field.clone(),
            timeout_secs: *timeout_secs,
        })?),
    };
    let mut client = Client::new(backend);
    if let Some(dir) = &file.cache_dir {
        client = client.with_cache(ResponseCache::open(dir)?);
    }
    if let Some(parallel) = file.max_parallel {
        client = client.with_max_in_flight(parallel);
    }
    let model_id = args
        .model
        .clone()
        .or(file.model_id)
        .unwrap_or_else(|| "default-model".to_string());
    Ok((client, RequestDefaults::new(model_id)))
}

fn parse_policy(name: &str) -> Result<MatchPolicy, RunError> {
    match name {
        "default" => Ok(MatchPolicy::default()),
        "raw" => Ok(MatchPolicy::raw()),
        other => Err(RunError::Config(format!("unknown policy {other:?}"))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<Vec<T>, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

fn write_output(path: &std::path::Path, body: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    std::fs::write(path, body).map_err(|e| io_err(path, e))
}

#[derive(Deserialize)]
struct PredRecord {
    instance_id: String,
    role: String,
    #[serde(default)]
    spans: Vec<String>,
}

#[derive(Deserialize)]
struct ResultRecord {
    sample_id: String,
    correct: bool,
}

#[derive(Deserialize)]
struct GroupRecord {
    sample_id: String,
    category: String,
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Data { command } => match command {
            DataCommand::Validate { task, path, expect } => {
                let manifest = DatasetManifest {
                    task,
                    path,
                    split: Split::Test,
                    expected_count: expect,
                };
                let count = if task.is_eae() {
                    load_eae(&manifest)?.len()
                } else {
                    load_classification(&manifest)?.len()
                };
                println!("ok: {count} valid {task} records");
                Ok(())
            }
        },
        Command::Llm { command } => match command {
            LlmCommand::Ping(args) => {
                let (client, defaults) = build_standalone_client(&args)?;
                let result = client.complete(&defaults.request("ping"))?;
                println!(
                    "ok: backend={} cached={} latency_ms={} bytes={}",
                    result.backend_id,
                    result.cached,
                    result.latency_ms,
                    result.text.len()
                );
                Ok(())
            }
            LlmCommand::CacheStats { cache_dir } => {
                let stats = ResponseCache::open(&cache_dir)?.stats()?;
                println!("entries={} bytes={}", stats.entries, stats.bytes);
                Ok(())
            }
        },
        Command::Heuristics { command } => match command {
            HeuristicsCommand::Generate {
                role,
                n,
                out,
                backend,
                task_description,
            } => {
                let (client, defaults) = build_standalone_client(&backend)?;
                let templates = TemplateSet::builtin();
                let set = generate_heuristics(
                    &task_description,
                    &role,
                    n,
                    &client,
                    &templates,
                    &defaults,
                )?;
                let ranked = RankedHeuristics::from_list(set.items, set.base_role);
                ranked.save_jsonl(&out).map_err(|e| io_err(&out, e))?;
                println!(
                    "wrote {} heuristics to {}",
                    ranked.ranked.len(),
                    out.display()
                );
                Ok(())
            }
            HeuristicsCommand::Select {
                candidates,
                subset,
                task,
                k,
                seed,
                fraction,
                out,
                backend,
            } => {
                let (client, defaults) = build_standalone_client(&backend)?;
                let templates = TemplateSet::builtin();
                let loaded = RankedHeuristics::load_jsonl(&candidates, "giver")?;
                let set = hdloa::core::HeuristicSet::new(loaded.ranked, "giver")
                    .map_err(|e| RunError::Config(e.to_string()))?;
                let manifest = DatasetManifest {
                    task,
                    path: subset,
                    split: Split::Train,
                    expected_count: None,
                };
                let instances = load_eae(&manifest)?;
                let eval_subset = sample_subset(&instances, fraction, seed)?;
                let source = builtin_exemplar_source(task)?;
                let pipeline = SingleHeuristicPipeline {
                    client: &client,
                    templates: &templates,
                    task,
                    exemplars: source.exemplars_for(PromptStyle::Hdloa, None)?,
                    defaults,
                    policy: MatchPolicy::default(),
                    max_answers: task.default_max_answers(),
                    base_role: "giver".to_string(),
                };
                let (ranked, report) = select_heuristics(&set, &eval_subset, k, &pipeline, seed)?;
                ranked.save_jsonl(&out).map_err(|e| io_err(&out, e))?;
                for score in &report.per_heuristic {
                    println!(
                        "{}\taccuracy={:.4}\tfailures={}",
                        score.label,
                        score.accuracy,
                        score.failures.len()
                    );
                }
                println!(
                    "kept top {} of {} (subset={} seed={})",
                    ranked.ranked.len(),
                    report.per_heuristic.len(),
                    report.subset_size,
                    seed
                );
                Ok(())
            }
        },
        Command::Prompt { command } => match command {
            PromptCommand::Build {
                task,
                style,
                heuristics,
                data,
                target_id,
                out,
                ablation,
                templates,
            } => {
                let style: PromptStyle = style.parse().map_err(|e: String| RunError::Config(e))?;
                let ablation = ablation
                    .map(|a| a.parse::<Ablation>())
                    .transpose()
                    .map_err(RunError::Config)?;
                let templates = match templates {
                    Some(dir) => TemplateSet::from_dir(&dir)?,
                    None => TemplateSet::builtin(),
                };
                let source = builtin_exemplar_source(task)?;
                let exemplars = source.exemplars_for(style, ablation)?;

                let manifest = DatasetManifest {
                    task,
                    path: data,
                    split: Split::Test,
                    expected_count: None,
                };
                let bundle = if task.is_eae() {
                    let instances = load_eae(&manifest)?;
                    let target = instances
                        .iter()
                        .find(|i| i.id == target_id)
                        .ok_or_else(|| RunError::Config(format!("no instance {target_id:?}")))?;
                    build_one(
                        task,
                        style,
                        ablation,
                        heuristics,
                        &exemplars,
                        PromptTarget::Eae(target),
                        &templates,
                    )?
                } else {
                    let instances = load_classification(&manifest)?;
                    let target = instances
                        .iter()
                        .find(|i| i.id == target_id)
                        .ok_or_else(|| RunError::Config(format!("no instance {target_id:?}")))?;
                    build_one(
                        task,
                        style,
                        ablation,
                        heuristics,
                        &exemplars,
                        PromptTarget::Classification(target),
                        &templates,
                    )?
                };
                write_output(&out, &bundle.rendered)?;
                println!(
                    "wrote {} bytes (template digest {})",
                    bundle.rendered.len(),
                    &bundle.template_digest[..12]
                );
                Ok(())
            }
        },
        Command::Score(args) => {
            let policy = parse_policy(&args.policy)?;
            let manifest = DatasetManifest {
                task: args.task,
                path: args.gold,
                split: Split::Test,
                expected_count: None,
            };
            let instances = load_eae(&manifest)?;
            let records: Vec<PredRecord> = read_jsonl(&args.pred)?;
            let mut by_instance: std::collections::BTreeMap<String, RolePredictions> =
                std::collections::BTreeMap::new();
            for record in records {
                by_instance
                    .entry(record.instance_id)
                    .or_insert_with(|| RolePredictions {
                        per_role: Default::default(),
                        raw_output: String::new(),
                    })
                    .per_role
                    .insert(record.role, record.spans);
            }
            let mut pairs = Vec::new();
            for inst in instances {
                let preds = by_instance
                    .remove(&inst.id)
                    .unwrap_or_else(|| RolePredictions::empty(&inst.roles));
                pairs.push((inst, preds));
            }
            if let Some(stray) = by_instance.keys().next() {
                return Err(RunError::Config(format!(
                    "prediction for unknown instance id {stray:?}"
                )));
            }
            let detailed = score_eae_detailed(&pairs, &policy)?;
            print!("{detailed}");
            if !args.exemplar_roles.is_empty() {
                let roles: BTreeSet<String> = args.exemplar_roles.into_iter().collect();
                let split = seen_unseen_breakdown(&pairs, &roles, &policy)?;
                println!(
                    "seen:   arg-c F1={:.4} (tp={} fp={} fn={})",
                    split.seen.arg_c.f1,
                    split.seen.counts.tp_c,
                    split.seen.counts.fp_c,
                    split.seen.counts.fn_c
                );
                println!(
                    "unseen: arg-c F1={:.4} (tp={} fp={} fn={})",
                    split.unseen.arg_c.f1,
                    split.unseen.counts.tp_c,
                    split.unseen.counts.fp_c,
                    split.unseen.counts.fn_c
                );
            }
            Ok(())
        }
        Command::Probe { command } => match command {
            ProbeCommand::Identify { prompt, backend } => {
                let (client, defaults) = build_standalone_client(&backend)?;
                let templates = TemplateSet::builtin();
                let examples: Vec<Exemplar> = read_json(&prompt)?;
                let records = identify_prompt_heuristics(&examples, &client, &templates, &defaults)
                    .map_err(probe_err)?;
                for record in &records {
                    println!("{}", serde_json::to_string(record).expect("serialize"));
                }
                println!("distinct: {}", count_distinct_heuristics(&records));
                Ok(())
            }
            ProbeCommand::Strategy {
                mode,
                n,
                seed,
                pool,
                out,
            } => {
                let mode: StrategyMode = mode.parse().map_err(RunError::Config)?;
                let pool: Vec<CategorizedExemplar> = read_json(&pool)?;
                let (bundle, chosen) =
                    build_strategy_prompt(&pool, n, mode, seed).map_err(probe_err)?;
                let categories: Vec<String> =
                    chosen.iter().map(|c| c.category.to_string()).collect();
                eprintln!("categories: {}", categories.join(", "));
                match out {
                    Some(path) => write_output(&path, &bundle.rendered)?,
                    None => println!("{}", bundle.rendered),
                }
                Ok(())
            }
            ProbeCommand::Deduct {
                remove,
                demo,
                pool,
                out,
            } => {
                let category: HeuristicCategory = remove.parse().map_err(RunError::Config)?;
                let demo: Vec<CategorizedExemplar> = read_json(&demo)?;
                let pool: Vec<CategorizedExemplar> = read_json(&pool)?;
                let result = deduct_heuristic(&demo, category, &pool).map_err(probe_err)?;
                let body = serde_json::to_string_pretty(&result).expect("serialize");
                match out {
                    Some(path) => write_output(&path, &body)?,
                    None => println!("{body}"),
                }
                Ok(())
            }
            ProbeCommand::GroupAcc { results, groups } => {
                let results: Vec<ResultRecord> = read_jsonl(&results)?;
                let groups_raw: Vec<GroupRecord> = read_jsonl(&groups)?;
                let mut groups: std::collections::BTreeMap<HeuristicCategory, Vec<String>> =
                    Default::default();
                for record in groups_raw {
                    let category: HeuristicCategory =
                        record.category.parse().map_err(RunError::Config)?;
                    groups.entry(category).or_default().push(record.sample_id);
                }
                let results: Vec<(String, bool)> = results
                    .into_iter()
                    .map(|r| (r.sample_id, r.correct))
                    .collect();
                let accuracy = grouped_accuracy(&results, &groups).map_err(probe_err)?;
                for (category, acc) in accuracy {
                    println!("{category}\t{:.4}", acc);
                }
                Ok(())
            }
        },
        Command::Run { config } => {
            let config = RunConfig::load(&config)?;
            let templates = TemplateSet::builtin();
            let bundle = run_experiment(&config, &templates)?;
            print!("{}", format_report(&bundle, TableFormat::Plain));
            println!("report: {}", config.out_dir.join("report.json").display());
            Ok(())
        }
        Command::Compare {
            bundles,
            baseline,
            format,
        } => {
            let format: TableFormat = format.parse().map_err(RunError::Config)?;
            let mut loaded = Vec::new();
            for path in &bundles {
                loaded.push(ReportBundle::load(path)?);
            }
            print!("{}", compare_runs(&loaded, baseline, format)?);
            Ok(())
        }
        Command::Report { bundle, format } => {
            let format: TableFormat = format.parse().map_err(RunError::Config)?;
            let bundle = ReportBundle::load(&bundle)?;
            print!("{}", format_report(&bundle, format));
            Ok(())
        }
    }
}

fn probe_err(e: hdloa::probe::ProbeError) -> RunError {
    match e {
        hdloa::probe::ProbeError::Backend(inner) => RunError::Backend(inner),
        hdloa::probe::ProbeError::Prompt(inner) => RunError::Prompt(inner),
        other => RunError::Config(other.to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
fn build_one(
    task: TaskKind,
    style: PromptStyle,
    ablation: Option<Ablation>,
    heuristics_path: Option<PathBuf>,
    exemplars: &[Exemplar],
    target: PromptTarget<'_>,
    templates: &TemplateSet,
) -> Result<hdloa::promptkit::PromptBundle, RunError> {
    let base_role = if task.is_eae() { "giver" } else { "" };
    match style {
        PromptStyle::Hdloa => {
            let ranked = match heuristics_path {
                Some(path) => RankedHeuristics::load_jsonl(&path, base_role)
                    .map_err(|e| RunError::Config(e.to_string()))?,
                None => {
                    let set = builtin_heuristics(task)?;
                    RankedHeuristics::from_list(set.items, set.base_role)
                }
            };
            Ok(build_hdloa_prompt(
                task, &ranked, exemplars, &target, templates, ablation,
            )?)
        }
        style => Ok(build_baseline_prompt(
            style, task, exemplars, &target, templates,
        )?),
    }
}
