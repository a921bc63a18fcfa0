use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::language_name;
use crate::speaker::Speaker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Transcribe,
    Translate,
}

impl Task {
    pub const BOTH: [Task; 2] = [Task::Transcribe, Task::Translate];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Transcribe => "transcribe",
            Task::Translate => "translate",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transcribe" => Ok(Task::Transcribe),
            "translate" => Ok(Task::Translate),
            other => Err(Error::arg(format!("unknown task `{other}`"))),
        }
    }
}

/// Prompt templates keyed by task and tagged speaker. `{src}` and `{tgt}`
/// expand to language names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptCatalog {
    templates: BTreeMap<Task, BTreeMap<Speaker, String>>,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        let mut c = PromptCatalog::empty();
        c.insert(Task::Transcribe, Speaker::Wearer, "Transcribe what the wearer says in {src}.");
        c.insert(Task::Transcribe, Speaker::Partner, "Transcribe what the conversation partner says in {src}.");
        c.insert(Task::Translate, Speaker::Wearer, "Translate what the wearer says from {src} into {tgt}.");
        c.insert(
            Task::Translate,
            Speaker::Partner,
            "Translate what the conversation partner says from {src} into {tgt}.",
        );
        c
    }
}

impl PromptCatalog {
    pub fn empty() -> Self {
        Self { templates: BTreeMap::new() }
    }

    pub fn insert(&mut self, task: Task, speaker: Speaker, template: impl Into<String>) {
        self.templates.entry(task).or_default().insert(speaker, template.into());
    }

    /// Checks that every (task, speaker) pair the pipeline uses has a template.
    pub fn validate(&self) -> Result<()> {
        for task in Task::BOTH {
            for s in Speaker::BOTH {
                self.template(task, s)?;
            }
        }
        Ok(())
    }

    fn template(&self, task: Task, speaker: Speaker) -> Result<&str> {
        self.templates
            .get(&task)
            .and_then(|m| m.get(&speaker))
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("no `{task}` prompt template for `{speaker}`")))
    }

    pub fn render(&self, task: Task, speaker: Speaker, src: &str, tgt: &str) -> Result<String> {
        Ok(self
            .template(task, speaker)?
            .replace("{src}", language_name(src))
            .replace("{tgt}", language_name(tgt)))
    }
}
