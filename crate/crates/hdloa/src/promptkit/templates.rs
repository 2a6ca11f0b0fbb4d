//! Prompt templates as external text files with `{{slot}}` placeholders.
//!
//! One template per (task, style) plus the heuristic-generation and probe
//! prompts. The shipped files under `templates/` are embedded at compile
//! time so the binary works from any directory; `TemplateSet::from_dir`
//! loads overrides for experimentation. Golden tests pin rendered bytes.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{PromptError, PromptStyle};
use crate::core::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub text: String,
}

impl Template {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Template {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    /// Fill `{{key}}` placeholders. Every placeholder must be covered by a
    /// slot; leftovers are an error naming the slot.
    pub fn render(&self, slots: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = self.text.clone();
        for (key, value) in slots {
            out = out.replace(&format!("{{{{{key}}}}}"), value);
        }
        check_filled(&self.name, &out)?;
        Ok(out)
    }
}

pub(crate) fn check_filled(name: &str, text: &str) -> Result<(), PromptError> {
    if let Some(start) = text.find("{{") {
        let end = text[start..]
            .find("}}")
            .map(|e| start + e)
            .unwrap_or(text.len());
        return Err(PromptError::UnfilledSlot {
            template: name.to_string(),
            slot: text[start + 2..end].to_string(),
        });
    }
    Ok(())
}

const TASK_SLUGS: [(TaskKind, &str); 4] = [
    (TaskKind::EaeRams, "rams"),
    (TaskKind::EaeDocee, "docee"),
    (TaskKind::Sentiment, "sst2"),
    (TaskKind::Nli, "snli"),
];

const STYLE_SLUGS: [(PromptStyle, &str); 3] = [
    (PromptStyle::Hdloa, "hdloa"),
    (PromptStyle::Cot, "cot"),
    (PromptStyle::Standard, "standard"),
];

/// The full set of templates a build needs.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    tasks: BTreeMap<(TaskKind, PromptStyle), Template>,
    pub heuristic_generation: Template,
    pub probe_identify: Template,
    pub probe_label: Template,
}

macro_rules! builtin {
    ($path:expr) => {
        Template::new($path, include_str!(concat!("../../templates/", $path)))
    };
}

impl TemplateSet {
    /// The templates shipped with the crate, embedded at compile time.
    pub fn builtin() -> Self {
        let mut tasks = BTreeMap::new();
        tasks.insert(
            (TaskKind::EaeRams, PromptStyle::Hdloa),
            builtin!("rams/hdloa.txt"),
        );
        tasks.insert(
            (TaskKind::EaeRams, PromptStyle::Cot),
            builtin!("rams/cot.txt"),
        );
        tasks.insert(
            (TaskKind::EaeRams, PromptStyle::Standard),
            builtin!("rams/standard.txt"),
        );
        tasks.insert(
            (TaskKind::EaeDocee, PromptStyle::Hdloa),
            builtin!("docee/hdloa.txt"),
        );
        tasks.insert(
            (TaskKind::EaeDocee, PromptStyle::Cot),
            builtin!("docee/cot.txt"),
        );
        tasks.insert(
            (TaskKind::EaeDocee, PromptStyle::Standard),
            builtin!("docee/standard.txt"),
        );
        tasks.insert(
            (TaskKind::Sentiment, PromptStyle::Hdloa),
            builtin!("sst2/hdloa.txt"),
        );
        tasks.insert(
            (TaskKind::Sentiment, PromptStyle::Cot),
            builtin!("sst2/cot.txt"),
        );
        tasks.insert(
            (TaskKind::Sentiment, PromptStyle::Standard),
            builtin!("sst2/standard.txt"),
        );
        tasks.insert(
            (TaskKind::Nli, PromptStyle::Hdloa),
            builtin!("snli/hdloa.txt"),
        );
        tasks.insert((TaskKind::Nli, PromptStyle::Cot), builtin!("snli/cot.txt"));
        tasks.insert(
            (TaskKind::Nli, PromptStyle::Standard),
            builtin!("snli/standard.txt"),
        );
        TemplateSet {
            tasks,
            heuristic_generation: builtin!("heuristic_generation.txt"),
            probe_identify: builtin!("probe/identify.txt"),
            probe_label: builtin!("probe/label.txt"),
        }
    }

    /// Load the same layout from a directory: `<task>/<style>.txt`,
    /// `heuristic_generation.txt`, `probe/identify.txt`, `probe/label.txt`.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |rel: String| -> Result<Template, PromptError> {
            let path = dir.join(&rel);
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Asset {
                name: path.display().to_string(),
                message: e.to_string(),
            })?;
            Ok(Template::new(rel, text))
        };
        let mut tasks = BTreeMap::new();
        for (task, task_slug) in TASK_SLUGS {
            for (style, style_slug) in STYLE_SLUGS {
                tasks.insert(
                    (task, style),
                    read(format!("{task_slug}/{style_slug}.txt"))?,
                );
            }
        }
        Ok(TemplateSet {
            tasks,
            heuristic_generation: read("heuristic_generation.txt".to_string())?,
            probe_identify: read("probe/identify.txt".to_string())?,
            probe_label: read("probe/label.txt".to_string())?,
        })
    }

    pub fn get(&self, task: TaskKind, style: PromptStyle) -> Result<&Template, PromptError> {
        self.tasks
            .get(&(task, style))
            .ok_or_else(|| PromptError::TemplateNotFound {
                name: format!("{}/{}", task.slug(), style),
            })
    }

    /// Template name -> content digest, embedded in reports so runs are
    /// self-describing.
    pub fn digest_map(&self) -> BTreeMap<String, String> {
        let mut map: BTreeMap<String, String> = self
            .tasks
            .values()
            .map(|t| (t.name.clone(), t.digest()))
            .collect();
        for t in [
            &self.heuristic_generation,
            &self.probe_identify,
            &self.probe_label,
        ] {
            map.insert(t.name.clone(), t.digest());
        }
        map
    }
}
