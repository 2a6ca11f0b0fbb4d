//! Load, validate, and subsample datasets from the canonical line-delimited
//! record format.
//!
//! One JSON record per line. EAE records carry `id`, `document`,
//! `event_type`, optional `trigger {text, char_start, char_end}`, `roles`,
//! `gold {role: [spans]}`, and optional `domain_tag`. Classification
//! records carry `id`, either `text` or `premise`+`hypothesis`, and
//! `gold_label`. Converters from native corpus distributions are
//! documentation, not code: the protocol only depends on these fields.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    validate_instance, ClassificationInstance, ClassificationText, EAEInstance, TaskKind,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: instance {id:?} violates invariants: {violations}")]
    InvalidInstance {
        path: PathBuf,
        line: usize,
        id: String,
        violations: String,
    },
    #[error("{path}:{line}: unknown label {label:?}; {allowed}")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
        allowed: String,
    },
    #[error("{path}: expected {expected} records, loaded {actual}")]
    CountMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("manifest task {task} does not match loader kind {wanted}")]
    WrongTask {
        task: TaskKind,
        wanted: &'static str,
    },
    #[error("cannot subsample an empty list")]
    EmptyInput,
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Where a dataset lives and how many records it must contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: TaskKind,
    pub path: PathBuf,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_count: Option<usize>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, DataError> {
    let content = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn check_count(path: &Path, expected: Option<usize>, actual: usize) -> Result<(), DataError> {
    match expected {
        Some(expected) if expected != actual => Err(DataError::CountMismatch {
            path: path.to_path_buf(),
            expected,
            actual,
        }),
        _ => Ok(()),
    }
}

/// Load EAE instances in file order. Every instance must pass
/// `validate_instance`; gold span lists are deduplicated (they are sets).
pub fn load_eae(manifest: &DatasetManifest) -> Result<Vec<EAEInstance>, DataError> {
    if !manifest.task.is_eae() {
        return Err(DataError::WrongTask {
            task: manifest.task,
            wanted: "eae",
        });
    }
    let mut out = Vec::new();
    for (line, text) in read_lines(&manifest.path)? {
        let mut inst: EAEInstance =
            serde_json::from_str(&text).map_err(|e| DataError::Malformed {
                path: manifest.path.clone(),
                line,
                message: e.to_string(),
            })?;
        for spans in inst.gold.values_mut() {
            let mut seen = std::collections::BTreeSet::new();
            spans.retain(|s| seen.insert(s.clone()));
        }
        let violations = validate_instance(&inst);
        if !violations.is_empty() {
            return Err(DataError::InvalidInstance {
                path: manifest.path.clone(),
                line,
                id: inst.id.clone(),
                violations: violations.join("; "),
            });
        }
        out.push(inst);
    }
    check_count(&manifest.path, manifest.expected_count, out.len())?;
    Ok(out)
}

#[derive(Deserialize)]
struct RawClassificationRecord {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    premise: Option<String>,
    #[serde(default)]
    hypothesis: Option<String>,
    gold_label: String,
}

/// Load classification instances, validating each label against the task's
/// closed label set.
pub fn load_classification(
    manifest: &DatasetManifest,
) -> Result<Vec<ClassificationInstance>, DataError> {
    if manifest.task.label_set().is_none() {
        return Err(DataError::WrongTask {
            task: manifest.task,
            wanted: "classification",
        });
    }
    let mut out = Vec::new();
    for (line, text) in read_lines(&manifest.path)? {
        let raw: RawClassificationRecord =
            serde_json::from_str(&text).map_err(|e| DataError::Malformed {
                path: manifest.path.clone(),
                line,
                message: e.to_string(),
            })?;
        let body = match (raw.text, raw.premise, raw.hypothesis) {
            (Some(t), None, None) => ClassificationText::Sentence(t),
            (None, Some(p), Some(h)) => ClassificationText::Pair {
                premise: p,
                hypothesis: h,
            },
            _ => {
                return Err(DataError::Malformed {
                    path: manifest.path.clone(),
                    line,
                    message: "record needs either `text` or both `premise` and `hypothesis`"
                        .to_string(),
                })
            }
        };
        let inst = ClassificationInstance {
            id: raw.id,
            text: body,
            gold_label: raw.gold_label,
        };
        if let Err(msg) = inst.validate(manifest.task) {
            return Err(DataError::UnknownLabel {
                path: manifest.path.clone(),
                line,
                label: inst.gold_label.clone(),
                allowed: msg,
            });
        }
        out.push(inst);
    }
    check_count(&manifest.path, manifest.expected_count, out.len())?;
    Ok(out)
}

/// Pick exactly `k` items by a seeded pseudo-random permutation, preserving
/// the input's relative order in the output.
pub fn take_subset<T: Clone>(items: &[T], k: usize, seed: u64) -> Result<Vec<T>, DataError> {
    if items.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let k = k.clamp(1, items.len());
    let mut indices: Vec<usize> = (0..items.len()).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = indices[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| items[i].clone()).collect())
}

/// Deterministic fraction-based subsampling: `ceil(fraction * N)` items
/// chosen by a seeded permutation, original relative order preserved.
pub fn sample_subset<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<Vec<T>, DataError> {
    if items.is_empty() {
        return Err(DataError::EmptyInput);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let k = (fraction * items.len() as f64).ceil() as usize;
    take_subset(items, k, seed)
}
