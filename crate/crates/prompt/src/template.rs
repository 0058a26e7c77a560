//! Task prompts: role, task description, domain knowledge and output
//! format, plus a worked example that the format's grammar must accept.
//!
//! On disk a prompt is a TOML front-matter block between `---` lines
//! followed by `[role]`, `[task]`, `[knowledge]`, `[format]` and
//! `[example]` sections:
//!
//! ```text
//! ---
//! task = "tte"
//! version = 1
//! placeholders = ["city"]
//! ---
//! [role]
//! You are ...
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use trajlens_core::tasks::{parse_answer, TaskKind};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unbound placeholder: {0}")]
    Unbound(String),
    #[error("prompt line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("prompt front matter: {0}")]
    FrontMatter(String),
    #[error("declared placeholders {declared:?} do not match those used in knowledge {used:?}")]
    Placeholders { declared: Vec<String>, used: Vec<String> },
    #[error("worked example does not parse under the {0} answer grammar")]
    Example(TaskKind),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}").unwrap());

pub const SECTIONS: [&str; 5] = ["role", "task", "knowledge", "format", "example"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPrompt {
    pub kind: TaskKind,
    pub version: u32,
    pub role: String,
    pub task: String,
    /// May hold `{{name}}` placeholders for location-specific facts.
    pub knowledge: String,
    pub format: String,
    pub example: String,
}

#[derive(Serialize, Deserialize)]
struct FrontMatter {
    task: TaskKind,
    version: u32,
    #[serde(default)]
    placeholders: Vec<String>,
}

/// Placeholder names in `text`, sorted and deduplicated.
pub fn placeholders_in(text: &str) -> Vec<String> {
    let set: BTreeSet<String> = PLACEHOLDER.captures_iter(text).map(|c| c[1].to_string()).collect();
    set.into_iter().collect()
}

/// Splits `[name]` sections. Text before the first header is returned
/// separately.
pub(crate) fn split_sections(text: &str, first_line: usize) -> Result<(String, Vec<(String, String)>), PromptError> {
    let mut preamble = String::new();
    let mut sections: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        let header = trimmed
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .filter(|n| SECTIONS.contains(n));
        match header {
            Some(name) => {
                if sections.iter().any(|(n, _)| n == name) {
                    return Err(PromptError::Parse {
                        line: first_line + i,
                        message: format!("duplicate section [{name}]"),
                    });
                }
                sections.push((name.to_string(), String::new()));
            }
            None => {
                let body = match sections.last_mut() {
                    Some((_, body)) => body,
                    None => &mut preamble,
                };
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    for (_, body) in &mut sections {
        *body = body.trim().to_string();
    }
    Ok((preamble, sections))
}

impl TaskPrompt {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("---") {
            return Err(PromptError::Parse {
                line: 1,
                message: "expected front matter opening '---'".into(),
            });
        }
        let mut front = String::new();
        let mut closed_at = None;
        for (i, line) in lines.by_ref().enumerate() {
            if line.trim() == "---" {
                closed_at = Some(i + 2);
                break;
            }
            front.push_str(line);
            front.push('\n');
        }
        let closed_at = closed_at.ok_or_else(|| PromptError::Parse {
            line: 1,
            message: "front matter is not closed by '---'".into(),
        })?;
        let fm: FrontMatter = toml::from_str(&front).map_err(|e| PromptError::FrontMatter(e.to_string()))?;
        let rest: Vec<&str> = lines.collect();
        let (preamble, sections) = split_sections(&rest.join("\n"), closed_at + 1)?;
        if !preamble.trim().is_empty() {
            return Err(PromptError::Parse {
                line: closed_at + 1,
                message: "text before the first section".into(),
            });
        }
        let get = |name: &str| {
            sections
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, b)| b.clone())
                .ok_or_else(|| PromptError::Parse {
                    line: closed_at,
                    message: format!("missing section [{name}]"),
                })
        };
        let prompt = TaskPrompt {
            kind: fm.task,
            version: fm.version,
            role: get("role")?,
            task: get("task")?,
            knowledge: get("knowledge")?,
            format: get("format")?,
            example: get("example")?,
        };
        let mut declared = fm.placeholders;
        declared.sort();
        declared.dedup();
        let used = prompt.placeholders();
        if declared != used {
            return Err(PromptError::Placeholders { declared, used });
        }
        prompt.self_check()?;
        Ok(prompt)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_file_string(&self) -> String {
        let fm = FrontMatter {
            task: self.kind,
            version: self.version,
            placeholders: self.placeholders(),
        };
        let mut out = format!("---\n{}---\n", toml::to_string(&fm).expect("front matter serialises"));
        for (name, body) in SECTIONS.iter().zip(self.bodies()) {
            out.push_str(&format!("[{name}]\n{body}\n\n"));
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), PromptError> {
        fs::write(path, self.to_file_string()).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn bodies(&self) -> [&str; 5] {
        [&self.role, &self.task, &self.knowledge, &self.format, &self.example]
    }

    /// Unbound placeholder names in the knowledge section.
    pub fn placeholders(&self) -> Vec<String> {
        placeholders_in(&self.knowledge)
    }

    pub fn is_bound(&self) -> bool {
        self.placeholders().is_empty()
    }

    /// The worked example must parse under the task's answer grammar.
    pub fn self_check(&self) -> Result<(), PromptError> {
        parse_answer(self.kind, &self.example, None)
            .map(|_| ())
            .ok_or(PromptError::Example(self.kind))
    }

    /// Substitutes location-specific facts into the knowledge section. Extra
    /// facts are ignored; a missing one is an error naming it.
    pub fn instantiate(&self, facts: &BTreeMap<String, String>) -> Result<TaskPrompt, PromptError> {
        if let Some(missing) = self.placeholders().into_iter().find(|p| !facts.contains_key(p)) {
            return Err(PromptError::Unbound(missing));
        }
        let knowledge = PLACEHOLDER
            .replace_all(&self.knowledge, |c: &regex::Captures| facts[&c[1]].clone())
            .into_owned();
        Ok(TaskPrompt {
            knowledge,
            ..self.clone()
        })
    }

    /// System message sent to the model.
    pub fn system_text(&self) -> Result<String, PromptError> {
        if let Some(p) = self.placeholders().into_iter().next() {
            return Err(PromptError::Unbound(p));
        }
        Ok(format!(
            "## Role\n{}\n\n## Task\n{}\n\n## Domain Knowledge\n{}\n\n## Output Format\n{}\n\n## Example\n{}\n",
            self.role, self.task, self.knowledge, self.format, self.example
        ))
    }
}

const TTE: &str = include_str!("../prompts/tte.prompt");
const AD: &str = include_str!("../prompts/ad.prompt");
const MP: &str = include_str!("../prompts/mp.prompt");
const TMI: &str = include_str!("../prompts/tmi.prompt");

/// The shipped initial prompt for `task`.
pub fn builtin(task: TaskKind) -> TaskPrompt {
    let text = match task {
        TaskKind::Tte => TTE,
        TaskKind::Ad => AD,
        TaskKind::Mp => MP,
        TaskKind::Tmi => TMI,
    };
    TaskPrompt::parse(text).expect("shipped prompt parses")
}
